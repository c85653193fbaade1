use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{universe, Annotation, Dataset, Scene, VariantKind};
use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

/// Slack allowed before an annotation counts as out of bounds.
const BOUNDS_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundsPolicy {
    #[default]
    Reject,
    Clamp,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub bounds: BoundsPolicy,
}

#[derive(Debug, Deserialize, Serialize, Clone, PartialEq, Eq, Hash)]
#[serde(untagged)]
enum CocoId {
    Int(i64),
    Str(String),
}

impl CocoId {
    fn key(&self) -> String {
        match self {
            CocoId::Int(i) => i.to_string(),
            CocoId::Str(s) => s.clone(),
        }
    }

    fn from_key(key: &str) -> Self {
        key.parse::<i64>().map(CocoId::Int).unwrap_or_else(|_| CocoId::Str(key.to_string()))
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct CocoImage {
    id: CocoId,
    file_name: String,
    width: f64,
    height: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scene_id: Option<String>,
    #[serde(default)]
    app_id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    genres: Vec<String>,
}

#[derive(Debug, Deserialize, Serialize)]
struct CocoAnnotation {
    id: CocoId,
    image_id: CocoId,
    category_id: CocoId,
    bbox: Vec<f64>,
    #[serde(default = "default_true")]
    interactable: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize, Serialize)]
struct CocoCategory {
    id: CocoId,
    name: String,
}

#[derive(Debug, Deserialize, Serialize)]
struct CocoFile {
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CocoCategory>,
}

pub fn load_coco(path: &Path, options: LoadOptions) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut ds = load_coco_str(&text, options)?;
    ds.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(ds)
}

pub fn load_coco_str(text: &str, options: LoadOptions) -> Result<Dataset> {
    let raw: Value = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    for field in ["images", "annotations", "categories"] {
        match raw.get(field) {
            Some(Value::Array(_)) => {}
            Some(_) => return Err(Error::Schema(format!("`{field}` must be an array"))),
            None => return Err(Error::Schema(format!("missing `{field}`"))),
        }
    }
    let file: CocoFile = serde_json::from_value(raw).map_err(|e| Error::Schema(e.to_string()))?;

    let mut categories: HashMap<String, String> = HashMap::new();
    for c in &file.categories {
        if c.name.trim().is_empty() {
            return Err(Error::Schema(format!("category {} has an empty name", c.id.key())));
        }
        categories.insert(c.id.key(), c.name.clone());
    }

    let mut scenes = Vec::with_capacity(file.images.len());
    let mut by_image: HashMap<String, usize> = HashMap::new();
    let mut seen_scene_ids = HashSet::new();
    for img in &file.images {
        if !(img.width > 0.0 && img.height > 0.0) {
            return Err(Error::Schema(format!("image {} has non-positive size", img.id.key())));
        }
        let scene_id = img.scene_id.clone().unwrap_or_else(|| img.id.key());
        if !seen_scene_ids.insert(scene_id.clone()) {
            return Err(Error::Schema(format!("duplicate scene_id {scene_id}")));
        }
        if by_image.insert(img.id.key(), scenes.len()).is_some() {
            return Err(Error::Schema(format!("duplicate image id {}", img.id.key())));
        }
        scenes.push(Scene {
            scene_id,
            app_id: img.app_id.clone(),
            width: img.width,
            height: img.height,
            image_uri: img.file_name.clone(),
            genres: img.genres.clone(),
        });
    }

    let mut annotations = Vec::with_capacity(file.annotations.len());
    let mut seen_ann_ids = HashSet::new();
    for a in &file.annotations {
        let ann_id = a.id.key();
        if !seen_ann_ids.insert(ann_id.clone()) {
            return Err(Error::Schema(format!("duplicate annotation id {ann_id}")));
        }
        let scene = by_image.get(&a.image_id.key()).map(|&i| &scenes[i]).ok_or_else(|| {
            Error::Schema(format!(
                "annotation {ann_id}: image_id {} references no image",
                a.image_id.key()
            ))
        })?;
        let category = categories.get(&a.category_id.key()).ok_or_else(|| {
            Error::Schema(format!(
                "annotation {ann_id}: category_id {} references no category",
                a.category_id.key()
            ))
        })?;
        let [x, y, w, h] = <[f64; 4]>::try_from(a.bbox.as_slice())
            .map_err(|_| Error::Schema(format!("annotation {ann_id}: bbox must have 4 numbers")))?;
        let bbox = BoundingBox::new(x, y, w, h).map_err(|_| Error::Bounds {
            ann_id: ann_id.clone(),
            detail: format!("degenerate bbox [{x}, {y}, {w}, {h}]"),
        })?;
        let bbox = check_bounds(&ann_id, bbox, scene, options.bounds)?;
        annotations.push(Annotation {
            ann_id,
            scene_id: scene.scene_id.clone(),
            bbox,
            category: category.clone(),
            interactable: a.interactable,
        });
    }

    Ok(Dataset {
        kind: VariantKind::Semantics,
        category_universe: universe(&annotations),
        scenes,
        annotations,
        base_dir: Default::default(),
    })
}

fn check_bounds(ann_id: &str, b: BoundingBox, scene: &Scene, policy: BoundsPolicy) -> Result<BoundingBox> {
    let inside = b.right() <= scene.width + BOUNDS_EPS && b.bottom() <= scene.height + BOUNDS_EPS;
    if inside {
        return Ok(b.clamp_to(scene.width, scene.height).unwrap_or(b));
    }
    let err = || Error::Bounds {
        ann_id: ann_id.to_string(),
        detail: format!(
            "box [{}, {}, {}, {}] exceeds {}x{} image {}",
            b.x, b.y, b.w, b.h, scene.width, scene.height, scene.scene_id
        ),
    };
    match policy {
        BoundsPolicy::Reject => Err(err()),
        BoundsPolicy::Clamp => b.clamp_to(scene.width, scene.height).ok_or_else(err),
    }
}

/// Serializes a dataset back to COCO JSON. Category ids are assigned in
/// sorted label order starting at 1.
pub fn to_coco_json(ds: &Dataset) -> Value {
    let cat_ids: BTreeMap<&str, i64> =
        ds.category_universe.iter().enumerate().map(|(i, c)| (c.as_str(), i as i64 + 1)).collect();
    let file = CocoFile {
        images: ds
            .scenes
            .iter()
            .map(|s| CocoImage {
                id: CocoId::from_key(&s.scene_id),
                file_name: s.image_uri.clone(),
                width: s.width,
                height: s.height,
                scene_id: None,
                app_id: s.app_id.clone(),
                genres: s.genres.clone(),
            })
            .collect(),
        annotations: ds
            .annotations
            .iter()
            .map(|a| CocoAnnotation {
                id: CocoId::from_key(&a.ann_id),
                image_id: CocoId::from_key(&a.scene_id),
                category_id: CocoId::Int(cat_ids[a.category.as_str()]),
                bbox: vec![a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h],
                interactable: a.interactable,
            })
            .collect(),
        categories: cat_ids
            .iter()
            .map(|(name, id)| CocoCategory { id: CocoId::Int(*id), name: name.to_string() })
            .collect(),
    };
    serde_json::to_value(file).expect("coco structs serialize")
}

pub fn save_coco(ds: &Dataset, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&to_coco_json(ds))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
