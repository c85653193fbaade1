//! Compare random and detection-guided black-box testing on the fixture
//! corpus: effective interactions and element coverage over one hour.
//!
//! ```text
//! cargo run --example simulate
//! ```

use std::path::Path;

use igekit::dataset::{load_coco, LoadOptions};
use igekit::pipeline::SceneDetections;
use igekit::sim::{simulate, SimulationConfig, Strategy};

fn main() -> igekit::Result<()> {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
    let ds = load_coco(&corpus.join("dataset.json"), LoadOptions::default())?;
    let detections = ds
        .scenes
        .iter()
        .map(|s| {
            let text = std::fs::read_to_string(corpus.join(format!("golden/{}.json", s.scene_id))).expect("golden file");
            serde_json::from_str::<SceneDetections>(&text).map_err(igekit::Error::from)
        })
        .collect::<igekit::Result<Vec<_>>>()?;

    let base = SimulationConfig { seed: 3, ..Default::default() };
    let random = simulate(&ds, None, &base)?;
    let guided = simulate(&ds, Some(&detections), &SimulationConfig { strategy: Strategy::Guided, ..base })?;

    println!("{:>4}  {:>16} {:>16}  {:>14} {:>14}", "t", "effective (rand)", "effective (guid)", "cover (rand)", "cover (guid)");
    for (r, g) in random.aggregate.iter().zip(&guided.aggregate).filter(|(r, _)| (r.t as u32).is_multiple_of(10)) {
        println!(
            "{:>4}  {:>16.2} {:>16.2}  {:>14.3} {:>14.3}",
            r.t, r.mean_effective_count, g.mean_effective_count, r.mean_coverage, g.mean_coverage
        );
    }
    Ok(())
}
