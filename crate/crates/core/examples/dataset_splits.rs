//! Load a COCO-style dataset with its app sidecar, derive the three
//! evaluation variants and draw app, genre and context-sensitive splits.
//!
//! ```text
//! cargo run --example dataset_splits
//! ```

use std::path::Path;

use igekit::dataset::{derive_variant, load_apps, load_coco, make_split, LoadOptions, SplitKind, VariantKind};

fn main() -> igekit::Result<()> {
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
    let mut ds = load_coco(&corpus.join("dataset.json"), LoadOptions::default())?;
    let apps = load_apps(&corpus.join("apps.json"))?;
    ds.attach_apps(&apps);
    println!("{:?}", ds.summary());

    let inter = derive_variant(&ds, VariantKind::Interactability, None)?;
    println!("interactability variant: {} annotations, categories {:?}", inter.annotations.len(), inter.category_universe);

    let trees = vec!["tree".to_string()];
    let ctx = derive_variant(&ds, VariantKind::Context, Some(&trees))?;
    for a in &ctx.annotations {
        println!("context variant: {} in {} (interactable: {})", a.category, a.scene_id, a.interactable);
    }

    // Four scenes are too few for every genre split; a fold left empty is
    // reported instead of silently produced.
    for kind in [SplitKind::App, SplitKind::Genre] {
        match make_split(&ds, kind, 0, None) {
            Ok(split) => println!("{kind:?} split: train {:?} val {:?} test {:?}", split.train, split.val, split.test),
            Err(e) => println!("{kind:?} split: {e}"),
        }
    }
    match make_split(&ds, SplitKind::ContextSensitive, 0, Some(&trees)) {
        Ok(split) => println!("context-sensitive split: test {:?}", split.test),
        Err(e) => println!("context-sensitive split: {e}"),
    }

    // A larger synthetic catalog: ten single-scene apps.
    let mut big = ds.clone();
    big.scenes = (0..10)
        .map(|i| igekit::dataset::Scene {
            scene_id: format!("s{i}"),
            app_id: format!("app{i}"),
            genres: vec![["sports", "casual"][i % 2].to_string()],
            ..ds.scenes[0].clone()
        })
        .collect();
    big.annotations.clear();
    let split = make_split(&big, SplitKind::App, 7, None)?;
    println!("ten apps: {} / {} / {} scenes", split.train.len(), split.val.len(), split.test.len());
    Ok(())
}
