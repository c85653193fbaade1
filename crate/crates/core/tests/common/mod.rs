#![allow(dead_code)]

pub mod oracles;
pub mod synth;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use igekit::dataset::{load_apps, load_coco, AppCatalog, Dataset, LoadOptions};
use igekit::gateway::{BackendKind, ProviderOptions, Providers};
use igekit::pipeline::{Pipeline, PipelineConfig, SceneInput};

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus")
}

pub fn corpus() -> (Dataset, AppCatalog) {
    let dir = corpus_dir();
    let ds = load_coco(&dir.join("dataset.json"), LoadOptions::default()).expect("corpus dataset");
    let apps = load_apps(&dir.join("apps.json")).expect("corpus apps");
    (ds, apps)
}

pub fn inputs(ds: &Dataset, apps: &AppCatalog) -> Vec<SceneInput> {
    ds.scenes.iter().map(|s| SceneInput::load(ds, s, apps).expect("scene input")).collect()
}

pub fn input(scene_id: &str) -> SceneInput {
    let (ds, apps) = corpus();
    let scene = ds.scene(scene_id).expect("scene in corpus").clone();
    SceneInput::load(&ds, &scene, &apps).unwrap()
}

pub fn mock_providers() -> Providers {
    Providers::build(&ProviderOptions {
        backend: BackendKind::Mock,
        mock_script: Some(corpus_dir().join("mock_script.json")),
        ..Default::default()
    })
    .unwrap()
}

pub fn replay_providers() -> Providers {
    Providers::build(&ProviderOptions {
        backend: BackendKind::Replay,
        replay_dir: Some(corpus_dir().join("replay")),
        ..Default::default()
    })
    .unwrap()
}

pub fn pipeline(p: &Providers, config: PipelineConfig) -> Pipeline {
    Pipeline::new(Arc::clone(&p.chat), Arc::clone(&p.ground), config)
}
