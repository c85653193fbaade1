//! Monte-Carlo simulation of black-box GUI testing on annotated scenes.
//!
//! Every `interval` minutes until `duration` a tester taps one point on the
//! scene. The random strategy taps uniformly; the guided strategy taps inside
//! a detected element with probability `1 - t/T` and uniformly otherwise.
//! A tap is effective when it lands in a ground-truth element; an element is
//! covered once any tap lands in it.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{Dataset, Scene};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;
use crate::pipeline::SceneDetections;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Random,
    Guided,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Guided => "guided",
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Strategy::Random),
            "guided" => Ok(Strategy::Guided),
            other => Err(Error::Config(format!("unknown strategy {other:?} (random, guided)"))),
        }
    }
}

/// How the guided strategy picks among detected boxes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxChoice {
    #[default]
    PerBox,
    AreaWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Test duration T in minutes.
    pub duration: f64,
    /// Minutes between interactions.
    pub interval: f64,
    pub runs: u32,
    pub seed: u64,
    pub strategy: Strategy,
    #[serde(default)]
    pub box_choice: BoxChoice,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { duration: 60.0, interval: 1.0, runs: 5, seed: 0, strategy: Strategy::Random, box_choice: BoxChoice::PerBox }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("duration must be positive, got {}", self.duration)));
        }
        if !(self.interval > 0.0 && self.interval.is_finite()) {
            return Err(Error::Config(format!("interval must be positive, got {}", self.interval)));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of interactions per scene and run.
    pub fn steps(&self) -> usize {
        (self.duration / self.interval + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// `1 - t/T`, defined for `t` in `[0, T]`.
pub fn guidance_probability(t: f64, duration: f64) -> Result<f64> {
    if duration.is_nan() || duration <= 0.0 || !(0.0..=duration).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0, {duration}]")));
    }
    Ok(1.0 - t / duration)
}

fn uniform_in(b: &BoundingBox, rng: &mut impl Rng) -> (f64, f64) {
    (b.x + rng.random::<f64>() * b.w, b.y + rng.random::<f64>() * b.h)
}

/// Draws the interaction at time `t`. Guided sampling with no boxes falls
/// back to a uniform point.
pub fn next_point(
    scene: &Scene,
    config: &SimulationConfig,
    guidance: &[BoundingBox],
    t: f64,
    rng: &mut impl Rng,
) -> Result<InteractionPoint> {
    let full = BoundingBox { x: 0.0, y: 0.0, w: scene.width, h: scene.height };
    let guided = config.strategy == Strategy::Guided
        && !guidance.is_empty()
        && rng.random::<f64>() < guidance_probability(t, config.duration)?;
    let (x, y) = if guided {
        let b = match config.box_choice {
            BoxChoice::PerBox => &guidance[rng.random_range(0..guidance.len())],
            BoxChoice::AreaWeighted => {
                let total: f64 = guidance.iter().map(BoundingBox::area).sum();
                let mut target = rng.random::<f64>() * total;
                guidance
                    .iter()
                    .find(|b| {
                        target -= b.area();
                        target < 0.0
                    })
                    .unwrap_or(&guidance[guidance.len() - 1])
            }
        };
        uniform_in(b, rng)
    } else {
        uniform_in(&full, rng)
    };
    Ok(InteractionPoint { t, x, y })
}

pub fn is_effective(p: &InteractionPoint, iges: &[BoundingBox]) -> bool {
    iges.iter().any(|b| b.contains(p.x, p.y))
}

/// Fraction of `iges` containing at least one point; 1 when there are none.
pub fn coverage(points: &[InteractionPoint], iges: &[BoundingBox]) -> f64 {
    if iges.is_empty() {
        return 1.0;
    }
    let covered = iges.iter().filter(|b| points.iter().any(|p| b.contains(p.x, p.y))).count();
    covered as f64 / iges.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub t: f64,
    pub effective_count: u32,
    pub covered_iges: u32,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub run: u32,
    pub seed: u64,
    pub points: Vec<InteractionPoint>,
    pub series: Vec<StepMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTrace {
    pub scene_id: String,
    pub n_iges: usize,
    /// Whether detections steered this scene (false for random runs and for
    /// guided runs that fell back to random).
    pub guided: bool,
    pub runs: Vec<RunTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateStep {
    pub t: f64,
    /// Mean over runs, then over scenes.
    pub mean_effective_count: f64,
    pub mean_coverage: f64,
    /// Sum over scenes of the run-averaged effective count.
    pub total_effective_count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub config: SimulationConfig,
    pub scenes: Vec<SceneTrace>,
    pub aggregate: Vec<AggregateStep>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Generator seed for one (run, scene) pair.
pub fn run_seed(seed: u64, run: u32, scene_id: &str) -> u64 {
    let digest = Sha256::digest(format!("{seed}:{run}:{scene_id}").as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn simulate_run(scene: &Scene, iges: &[BoundingBox], guidance: &[BoundingBox], config: &SimulationConfig, run: u32) -> Result<RunTrace> {
    let seed = run_seed(config.seed, run, &scene.scene_id);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(config.steps());
    let mut series = Vec::with_capacity(config.steps());
    let mut touched = vec![false; iges.len()];
    let mut effective = 0u32;
    for k in 1..=config.steps() {
        let t = (k as f64 * config.interval).min(config.duration);
        let p = next_point(scene, config, guidance, t, &mut rng)?;
        let mut hit = false;
        for (b, seen) in iges.iter().zip(touched.iter_mut()) {
            if b.contains(p.x, p.y) {
                *seen = true;
                hit = true;
            }
        }
        effective += hit as u32;
        let covered = touched.iter().filter(|c| **c).count() as u32;
        let cov = if iges.is_empty() { 1.0 } else { covered as f64 / iges.len() as f64 };
        series.push(StepMetrics { t, effective_count: effective, covered_iges: covered, coverage: cov });
        points.push(p);
    }
    Ok(RunTrace { run, seed, points, series })
}

/// Simulates every scene of `fold` for `config.runs` runs.
///
/// `detections` steers the guided strategy (interactable detections only);
/// a scene without detections falls back to random with a warning.
pub fn simulate(fold: &Dataset, detections: Option<&[SceneDetections]>, config: &SimulationConfig) -> Result<SimulationTrace> {
    config.validate()?;
    let guidance: BTreeMap<&str, Vec<BoundingBox>> = detections
        .unwrap_or_default()
        .iter()
        .map(|s| (s.scene_id.as_str(), s.detections.iter().filter(|d| d.interactable).map(|d| d.bbox).collect()))
        .collect();
    let by_scene = fold.annotations_by_scene();
    let mut warnings = vec![];

    let mut scenes = Vec::with_capacity(fold.scenes.len());
    for scene in &fold.scenes {
        let iges: Vec<BoundingBox> = by_scene
            .get(scene.scene_id.as_str())
            .map(|v| v.iter().filter(|a| a.interactable).map(|a| a.bbox).collect())
            .unwrap_or_default();
        if iges.is_empty() {
            tracing::info!(scene = %scene.scene_id, "scene has no IGEs; coverage is 1 by convention");
            warnings.push(format!("{}: no interactable elements, coverage fixed at 1", scene.scene_id));
        }
        let boxes: &[BoundingBox] = match (config.strategy, guidance.get(scene.scene_id.as_str())) {
            (Strategy::Guided, Some(b)) => b,
            (Strategy::Guided, None) => {
                tracing::warn!(scene = %scene.scene_id, "no detections; guided simulation falls back to random");
                warnings.push(format!("{}: no detections, simulated as random", scene.scene_id));
                &[]
            }
            (Strategy::Random, _) => &[],
        };
        let runs = (0..config.runs).map(|r| simulate_run(scene, &iges, boxes, config, r)).collect::<Result<Vec<_>>>()?;
        scenes.push(SceneTrace {
            scene_id: scene.scene_id.clone(),
            n_iges: iges.len(),
            guided: config.strategy == Strategy::Guided && guidance.contains_key(scene.scene_id.as_str()),
            runs,
        });
    }

    let aggregate = aggregate(&scenes, config)?;
    Ok(SimulationTrace { config: config.clone(), scenes, aggregate, warnings })
}

fn aggregate(scenes: &[SceneTrace], config: &SimulationConfig) -> Result<Vec<AggregateStep>> {
    let steps = config.steps();
    let runs = config.runs as usize;
    let n = scenes.len();
    let mut out = Vec::with_capacity(steps);
    for k in 0..steps {
        let t = scenes.first().map(|s| s.runs[0].series[k].t).unwrap_or((k + 1) as f64 * config.interval);
        let eff = |s: usize, r: usize| scenes[s].runs[r].series[k].effective_count as f64;
        let cov = |s: usize, r: usize| scenes[s].runs[r].series[k].coverage;
        let runs_then_scenes = |f: &dyn Fn(usize, usize) -> f64| {
            (0..n).map(|s| (0..runs).map(|r| f(s, r)).sum::<f64>() / runs as f64).sum::<f64>() / n.max(1) as f64
        };
        let scenes_then_runs = |f: &dyn Fn(usize, usize) -> f64| {
            (0..runs).map(|r| (0..n).map(|s| f(s, r)).sum::<f64>() / n.max(1) as f64).sum::<f64>() / runs as f64
        };
        let (e1, e2) = (runs_then_scenes(&eff), scenes_then_runs(&eff));
        let (c1, c2) = (runs_then_scenes(&cov), scenes_then_runs(&cov));
        if (e1 - e2).abs() > 1e-12 || (c1 - c2).abs() > 1e-12 {
            return Err(Error::Domain(format!("aggregation orders disagree at t = {t}")));
        }
        out.push(AggregateStep { t, mean_effective_count: e1, mean_coverage: c1, total_effective_count: e1 * n as f64 });
    }
    Ok(out)
}

impl SimulationTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes") + "\n"
    }

    /// One row per step: `strategy,t,mean_effective_count,total_effective_count,mean_coverage`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(vec![]);
        let err = |e: csv::Error| Error::Io { path: "<csv>".into(), source: e.into() };
        w.write_record(["strategy", "t", "mean_effective_count", "total_effective_count", "mean_coverage"]).map_err(err)?;
        for a in &self.aggregate {
            w.write_record([
                self.config.strategy.as_str().to_string(),
                a.t.to_string(),
                format!("{:.6}", a.mean_effective_count),
                format!("{:.6}", a.total_effective_count),
                format!("{:.6}", a.mean_coverage),
            ])
            .map_err(err)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io { path: "<csv>".into(), source: e.into_error() })?)
            .expect("utf-8"))
    }
}

/// Side-by-side aggregate series of two traces over the same steps.
pub fn comparison_csv(guided: &SimulationTrace, random: &SimulationTrace) -> Result<String> {
    let mut w = csv::Writer::from_writer(vec![]);
    let err = |e: csv::Error| Error::Io { path: "<csv>".into(), source: e.into() };
    w.write_record(["t", "guided_effective", "random_effective", "guided_coverage", "random_coverage"]).map_err(err)?;
    for (g, r) in guided.aggregate.iter().zip(&random.aggregate) {
        w.write_record([
            g.t.to_string(),
            format!("{:.6}", g.mean_effective_count),
            format!("{:.6}", r.mean_effective_count),
            format!("{:.6}", g.mean_coverage),
            format!("{:.6}", r.mean_coverage),
        ])
        .map_err(err)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::Io { path: "<csv>".into(), source: e.into_error() })?)
        .expect("utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> Scene {
        Scene { scene_id: "s".into(), app_id: "a".into(), width: 960.0, height: 540.0, image_uri: String::new(), genres: vec![] }
    }

    #[test]
    fn probability_endpoints_and_domain() {
        assert_eq!(guidance_probability(0.0, 60.0).unwrap(), 1.0);
        assert_eq!(guidance_probability(30.0, 60.0).unwrap(), 0.5);
        assert_eq!(guidance_probability(60.0, 60.0).unwrap(), 0.0);
        assert!(guidance_probability(-1.0, 60.0).is_err());
        assert!(guidance_probability(61.0, 60.0).is_err());
    }

    #[test]
    fn points_respect_their_branch() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let guided = SimulationConfig { strategy: Strategy::Guided, ..Default::default() };
        let b = BoundingBox::new(100.0, 100.0, 50.0, 50.0).unwrap();
        for _ in 0..500 {
            let p = next_point(&scene(), &guided, &[b], 0.0, &mut rng).unwrap();
            assert!(b.contains(p.x, p.y));
            let p = next_point(&scene(), &SimulationConfig::default(), &[b], 0.0, &mut rng).unwrap();
            assert!((0.0..960.0).contains(&p.x) && (0.0..540.0).contains(&p.y));
        }
    }

    #[test]
    fn coverage_conventions() {
        let b = |x| BoundingBox::new(x, 0.0, 10.0, 10.0).unwrap();
        let pts = [InteractionPoint { t: 1.0, x: 5.0, y: 5.0 }, InteractionPoint { t: 2.0, x: 25.0, y: 5.0 }];
        assert_eq!(coverage(&pts, &[b(0.0), b(20.0), b(40.0), b(60.0)]), 0.5);
        assert_eq!(coverage(&pts, &[]), 1.0);
        assert!(is_effective(&pts[0], &[b(0.0)]));
        // Right and bottom edges are exclusive.
        assert!(!is_effective(&InteractionPoint { t: 0.0, x: 10.0, y: 5.0 }, &[b(0.0)]));
    }

    #[test]
    fn steps_follow_duration_and_interval() {
        assert_eq!(SimulationConfig::default().steps(), 60);
        assert_eq!(SimulationConfig { duration: 10.0, interval: 2.5, ..Default::default() }.steps(), 4);
        assert!(SimulationConfig { runs: 0, ..Default::default() }.validate().is_err());
    }
}
