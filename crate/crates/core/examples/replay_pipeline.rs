//! Run the full detection pipeline over the fixture corpus using recorded
//! model answers, so the output is deterministic and needs no network.
//!
//! ```text
//! cargo run --example replay_pipeline
//! ```

use std::path::Path;

use igekit::dataset::{load_apps, load_coco, LoadOptions};
use igekit::gateway::{BackendKind, ProviderOptions, Providers};
use igekit::pipeline::{Pipeline, PipelineConfig, SceneInput};

fn main() -> igekit::Result<()> {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
    let ds = load_coco(&corpus.join("dataset.json"), LoadOptions::default())?;
    let apps = load_apps(&corpus.join("apps.json"))?;
    let providers = Providers::build(&ProviderOptions {
        backend: BackendKind::Replay,
        replay_dir: Some(corpus.join("replay")),
        ..Default::default()
    })?;
    let pipeline = Pipeline::new(providers.chat, providers.ground, PipelineConfig::default());

    let inputs = ds.scenes.iter().map(|s| SceneInput::load(&ds, s, &apps)).collect::<igekit::Result<Vec<_>>>()?;
    for item in pipeline.run_batch(&inputs, 2) {
        let out = item.result?;
        println!(
            "{}: {} detections, {} iteration(s), {} chat / {} ground calls",
            out.scene_id,
            out.detections.len(),
            out.stats.iterations,
            out.stats.chat_calls,
            out.stats.ground_calls
        );
        for d in &out.detections {
            println!(
                "  {:<12} interactable={:<5} score={:.2} box=({}, {}, {}, {})  \"{}\"",
                d.category, d.interactable, d.score, d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h, d.provenance.cd_text
            );
        }
    }
    Ok(())
}
