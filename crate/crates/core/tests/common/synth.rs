//! Small in-memory datasets and detections.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use igekit::dataset::{Annotation, Dataset, Scene, VariantKind};
use igekit::eval::SemanticMatcher;
use igekit::gateway::TableEmbedder;
use igekit::geometry::BoundingBox;
use igekit::pipeline::{Detection, Provenance, SceneDetections, SceneStats};

pub fn bb(x: f64, y: f64, w: f64, h: f64) -> BoundingBox {
    BoundingBox::new(x, y, w, h).unwrap()
}

pub fn scene(id: &str, app: &str, w: f64, h: f64) -> Scene {
    Scene {
        scene_id: id.into(),
        app_id: app.into(),
        width: w,
        height: h,
        image_uri: format!("{id}.png"),
        genres: vec![],
    }
}

pub fn ann(id: usize, scene: &str, b: BoundingBox, cat: &str, interactable: bool) -> Annotation {
    Annotation { ann_id: id.to_string(), scene_id: scene.into(), bbox: b, category: cat.into(), interactable }
}

pub fn dataset(kind: VariantKind, scenes: Vec<Scene>, annotations: Vec<Annotation>) -> Dataset {
    Dataset {
        kind,
        category_universe: annotations.iter().map(|a| a.category.clone()).collect(),
        scenes,
        annotations,
        base_dir: PathBuf::new(),
    }
}

pub fn det(b: BoundingBox, score: f64, cat: &str, interactable: bool) -> Detection {
    Detection {
        bbox: b,
        score,
        category: cat.into(),
        interactable,
        provenance: Provenance { cd_text: String::new(), iterations_used: 1, warnings: vec![] },
    }
}

pub fn scene_dets(id: &str, detections: Vec<Detection>) -> SceneDetections {
    SceneDetections { scene_id: id.into(), detections, stats: SceneStats::default() }
}

pub fn fold_of(ds: &Dataset) -> BTreeSet<String> {
    ds.scenes.iter().map(|s| s.scene_id.clone()).collect()
}

/// Matcher over one-hot label embeddings: distinct listed labels never match.
pub fn one_hot_matcher(labels: &[&str]) -> SemanticMatcher {
    let mut table = TableEmbedder::new(labels.len());
    for (i, l) in labels.iter().enumerate() {
        let mut v = vec![0.0; labels.len()];
        v[i] = 1.0;
        table = table.with(l, v);
    }
    SemanticMatcher::new(Arc::new(table), 0.85)
}

/// Ten apps with one scene each; the `fish` category appears in scenes 2 and 7.
pub fn ten_apps() -> Dataset {
    let mut scenes = vec![];
    let mut anns = vec![];
    for i in 0..10 {
        let id = format!("scene{i}");
        scenes.push(Scene { genres: vec![["action", "casual"][i % 2].to_string()], ..scene(&id, &format!("app{i}"), 960.0, 540.0) });
        anns.push(ann(2 * i, &id, bb(10.0, 10.0, 50.0, 50.0), "button", true));
        if i == 2 || i == 7 {
            anns.push(ann(2 * i + 1, &id, bb(100.0, 100.0, 40.0, 20.0), "fish", i == 2));
        }
    }
    dataset(VariantKind::Semantics, scenes, anns)
}
