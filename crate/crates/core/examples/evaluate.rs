//! Score the frozen detections of the fixture corpus in all three dataset
//! variants and print the metrics table.
//!
//! ```text
//! cargo run --example evaluate
//! ```

use std::path::Path;
use std::sync::Arc;

use igekit::dataset::{derive_variant, load_coco, LoadOptions, VariantKind};
use igekit::eval::{evaluate, table_csv, EvalOptions, SemanticMatcher, DEFAULT_MATCH_THRESHOLD};
use igekit::gateway::{Embedder, HashEmbedder, TableEmbedder};
use igekit::pipeline::SceneDetections;

fn main() -> igekit::Result<()> {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
    let base = load_coco(&corpus.join("dataset.json"), LoadOptions::default())?;
    let mut detections: Vec<SceneDetections> = vec![];
    for s in &base.scenes {
        let text = std::fs::read_to_string(corpus.join(format!("golden/{}.json", s.scene_id))).expect("golden file");
        detections.push(serde_json::from_str(&text)?);
    }
    // Rename one prediction to a synonym; the table maps it next to the
    // ground-truth label, other labels fall back to hashed embeddings.
    for d in detections.iter_mut().flat_map(|s| s.detections.iter_mut()).filter(|d| d.category == "coffee mug") {
        d.category = "mug".into();
    }
    let embedder = TableEmbedder::new(256).with("mug", HashEmbedder::default().embed("coffee mug")?.values);
    let matcher = SemanticMatcher::new(Arc::new(embedder), DEFAULT_MATCH_THRESHOLD);
    let fold = base.scenes.iter().map(|s| s.scene_id.clone()).collect();

    let trees = vec!["tree".to_string()];
    let mut reports = vec![];
    for (kind, cats) in [
        (VariantKind::Semantics, None),
        (VariantKind::Interactability, None),
        (VariantKind::Context, Some(trees.as_slice())),
    ] {
        let ds = derive_variant(&base, kind, cats)?;
        let report = evaluate(&ds, &fold, &detections, &matcher, &EvalOptions { split: "all".into(), ..Default::default() })?;
        let t = report.at(0.75).expect("threshold evaluated");
        println!("{:<16} @0.75  P={:.3} R={:.3} F1={:.3} mAP={:.3} over {} categories",
            kind.as_str(), t.average.precision, t.average.recall, t.average.f1, t.average.map, t.average.categories);
        reports.push(report);
    }
    println!("\n{}", table_csv(&reports)?);
    Ok(())
}
