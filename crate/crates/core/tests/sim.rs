mod common;

use common::synth::*;
use igekit::dataset::{Dataset, VariantKind};
use igekit::sim::{
    comparison_csv, coverage, guidance_probability, is_effective, next_point, run_seed, simulate, BoxChoice,
    InteractionPoint, SimulationConfig, Strategy,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn cfg(strategy: Strategy) -> SimulationConfig {
    SimulationConfig { strategy, seed: 7, ..Default::default() }
}

/// Scenes with a few small elements each, so random taps rarely land.
fn fold() -> Dataset {
    let mut scenes = vec![];
    let mut anns = vec![];
    for s in 0..4 {
        let id = format!("scene{s}");
        scenes.push(scene(&id, "app", 960.0, 540.0));
        for k in 0..3 {
            let b = bb(50.0 + 250.0 * k as f64, 60.0 + 90.0 * s as f64, 60.0, 40.0);
            anns.push(ann(s * 10 + k, &id, b, "button", true));
        }
    }
    dataset(VariantKind::Semantics, scenes, anns)
}

fn oracle_detections(ds: &Dataset) -> Vec<igekit::pipeline::SceneDetections> {
    ds.scenes
        .iter()
        .map(|s| {
            let dets = ds
                .annotations
                .iter()
                .filter(|a| a.scene_id == s.scene_id)
                .map(|a| det(a.bbox, 1.0, &a.category, true))
                .collect();
            scene_dets(&s.scene_id, dets)
        })
        .collect()
}

#[test]
fn guidance_probability_is_linear_decay() {
    assert_eq!(guidance_probability(0.0, 60.0).unwrap(), 1.0);
    assert_eq!(guidance_probability(30.0, 60.0).unwrap(), 0.5);
    assert_eq!(guidance_probability(60.0, 60.0).unwrap(), 0.0);
    assert!(guidance_probability(61.0, 60.0).is_err());
    assert!(guidance_probability(-0.5, 60.0).is_err());
}

#[test]
fn random_points_stay_in_bounds() {
    let s = scene("s", "a", 960.0, 540.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..2000 {
        let p = next_point(&s, &cfg(Strategy::Random), &[], 5.0, &mut rng).unwrap();
        assert!((0.0..960.0).contains(&p.x) && (0.0..540.0).contains(&p.y));
    }
}

#[test]
fn forced_guidance_lands_in_the_box() {
    let s = scene("s", "a", 960.0, 540.0);
    let b = bb(100.0, 100.0, 50.0, 50.0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..500 {
        let p = next_point(&s, &cfg(Strategy::Guided), &[b], 0.0, &mut rng).unwrap();
        assert!(b.contains(p.x, p.y));
    }
    let area = SimulationConfig { box_choice: BoxChoice::AreaWeighted, ..cfg(Strategy::Guided) };
    let p = next_point(&s, &area, &[b], 0.0, &mut rng).unwrap();
    assert!(b.contains(p.x, p.y));
}

#[test]
fn effectiveness_and_coverage() {
    let iges = [bb(0.0, 0.0, 10.0, 10.0), bb(20.0, 0.0, 10.0, 10.0), bb(40.0, 0.0, 10.0, 10.0), bb(60.0, 0.0, 10.0, 10.0)];
    let pt = |x: f64, y: f64| InteractionPoint { t: 1.0, x, y };
    assert!(is_effective(&pt(5.0, 5.0), &iges));
    assert!(!is_effective(&pt(10.0, 5.0), &iges));
    assert_eq!(coverage(&[pt(5.0, 5.0), pt(25.0, 5.0), pt(26.0, 6.0)], &iges), 0.5);
    assert_eq!(coverage(&[], &[]), 1.0);
}

#[test]
fn one_point_per_interval_and_monotone_series() {
    let ds = fold();
    let trace = simulate(&ds, Some(&oracle_detections(&ds)), &cfg(Strategy::Guided)).unwrap();
    assert_eq!(trace.aggregate.len(), 60);
    for s in &trace.scenes {
        assert_eq!(s.runs.len(), 5);
        for r in &s.runs {
            assert_eq!(r.points.len(), 60);
            assert_eq!(r.points[0].t, 1.0);
            assert_eq!(r.points[59].t, 60.0);
            for w in r.series.windows(2) {
                assert!(w[1].effective_count >= w[0].effective_count);
                assert!(w[1].coverage >= w[0].coverage);
            }
        }
    }
}

#[test]
fn same_seed_same_trace_and_runs_are_independent() {
    let ds = fold();
    let a = simulate(&ds, None, &cfg(Strategy::Random)).unwrap();
    let b = simulate(&ds, None, &cfg(Strategy::Random)).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let r = &a.scenes[0].runs;
    assert_ne!(r[0].points, r[1].points);
    assert_ne!(run_seed(7, 0, "scene0"), run_seed(7, 1, "scene0"));
    assert_ne!(run_seed(7, 0, "scene0"), run_seed(7, 0, "scene1"));
}

#[test]
fn guided_with_oracle_detections_beats_random() {
    let ds = fold();
    let guided = simulate(&ds, Some(&oracle_detections(&ds)), &cfg(Strategy::Guided)).unwrap();
    let random = simulate(&ds, None, &cfg(Strategy::Random)).unwrap();
    for t in [10, 60] {
        assert!(guided.aggregate[t - 1].mean_coverage > random.aggregate[t - 1].mean_coverage, "t = {t}");
    }
    let csv = comparison_csv(&guided, &random).unwrap();
    assert_eq!(csv.lines().count(), 61);
}

#[test]
fn missing_detections_fall_back_with_a_warning() {
    let ds = fold();
    let mut dets = oracle_detections(&ds);
    dets.truncate(2);
    let trace = simulate(&ds, Some(&dets), &cfg(Strategy::Guided)).unwrap();
    assert_eq!(trace.warnings.len(), 2);
    assert!(trace.scenes.iter().filter(|s| s.guided).count() == 2);
}

#[test]
fn random_rate_matches_covered_area() {
    // One element covering 25% of the image.
    let ds = dataset(
        VariantKind::Semantics,
        vec![scene("q", "a", 200.0, 100.0)],
        vec![ann(1, "q", bb(0.0, 0.0, 100.0, 50.0), "panel", true)],
    );
    let config = SimulationConfig { duration: 1000.0, runs: 12, ..cfg(Strategy::Random) };
    let trace = simulate(&ds, None, &config).unwrap();
    let last = trace.aggregate.last().unwrap();
    let rate = last.mean_effective_count / 1000.0;
    assert!((rate - 0.25).abs() <= 0.03, "rate {rate}");
}

#[test]
fn invalid_configs_are_rejected() {
    let ds = fold();
    for bad in [
        SimulationConfig { duration: 0.0, ..Default::default() },
        SimulationConfig { interval: -1.0, ..Default::default() },
        SimulationConfig { runs: 0, ..Default::default() },
    ] {
        assert!(simulate(&ds, None, &bad).is_err());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn guided_rate_at_least_area_fraction(t in 0u32..=60, seed in any::<u64>()) {
        // Guidance box equals the only element, area fraction a = 0.1.
        let s = scene("s", "a", 100.0, 100.0);
        let iges = [bb(0.0, 0.0, 10.0, 100.0)];
        let config = SimulationConfig { seed, ..cfg(Strategy::Guided) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 2000;
        let hits = (0..n)
            .filter(|_| is_effective(&next_point(&s, &config, &iges, t as f64, &mut rng).unwrap(), &iges))
            .count();
        let p = 1.0 - t as f64 / 60.0;
        let expected = p + (1.0 - p) * 0.1;
        prop_assert!((hits as f64 / n as f64 - expected).abs() <= 0.04);
    }

    #[test]
    fn aggregates_stay_in_range(seed in any::<u64>(), runs in 1u32..4) {
        let ds = fold();
        let config = SimulationConfig { seed, runs, duration: 20.0, ..cfg(Strategy::Random) };
        let trace = simulate(&ds, None, &config).unwrap();
        for a in &trace.aggregate {
            prop_assert!((0.0..=1.0).contains(&a.mean_coverage));
            prop_assert!(a.mean_effective_count <= a.t + 1e-9);
        }
    }
}
