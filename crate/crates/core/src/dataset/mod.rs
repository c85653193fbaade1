//! COCO-format IGE datasets, their derived variants, and 6:1:3 splits.
//!
//! Interactability is carried per annotation in a custom `"interactable"`
//! attribute. A missing attribute means `true`; context-variant files mark
//! their non-interactable counterparts explicitly with `false`.

mod coco;
mod split;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

pub use coco::{load_coco, load_coco_str, save_coco, to_coco_json, BoundsPolicy, LoadOptions};
pub use split::{load_split, make_split, save_split, Split, SplitKind};

/// Category label every annotation carries in the interactability variant.
pub const INTERACTABLE_LABEL: &str = "interactable";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub scene_id: String,
    pub app_id: String,
    pub width: f64,
    pub height: f64,
    /// Locator of the right-eye screenshot, relative to the dataset file
    /// unless absolute.
    pub image_uri: String,
    #[serde(default)]
    pub genres: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub ann_id: String,
    pub scene_id: String,
    pub bbox: BoundingBox,
    pub category: String,
    pub interactable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantKind {
    Semantics,
    Interactability,
    Context,
}

impl VariantKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VariantKind::Semantics => "semantics",
            VariantKind::Interactability => "interactability",
            VariantKind::Context => "context",
        }
    }
}

impl std::str::FromStr for VariantKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "semantics" => Ok(VariantKind::Semantics),
            "interactability" => Ok(VariantKind::Interactability),
            "context" => Ok(VariantKind::Context),
            other => Err(Error::Config(format!("unknown dataset variant {other:?}"))),
        }
    }
}

/// A loaded dataset in one of its three variants.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kind: VariantKind,
    pub scenes: Vec<Scene>,
    pub annotations: Vec<Annotation>,
    pub category_universe: BTreeSet<String>,
    /// Directory that relative `image_uri`s resolve against.
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub scenes: usize,
    pub annotations: usize,
    pub interactable_annotations: usize,
    pub categories: usize,
    pub apps: usize,
}

impl Dataset {
    pub fn scene(&self, scene_id: &str) -> Option<&Scene> {
        self.scenes.iter().find(|s| s.scene_id == scene_id)
    }

    pub fn image_path(&self, scene: &Scene) -> PathBuf {
        let p = Path::new(&scene.image_uri);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn annotations_by_scene(&self) -> HashMap<&str, Vec<&Annotation>> {
        let mut map: HashMap<&str, Vec<&Annotation>> = HashMap::new();
        for a in &self.annotations {
            map.entry(a.scene_id.as_str()).or_default().push(a);
        }
        map
    }

    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            scenes: self.scenes.len(),
            annotations: self.annotations.len(),
            interactable_annotations: self.annotations.iter().filter(|a| a.interactable).count(),
            categories: self.category_universe.len(),
            apps: self.scenes.iter().map(|s| s.app_id.as_str()).collect::<BTreeSet<_>>().len(),
        }
    }

    /// Restricts the dataset to the given scenes (annotations follow).
    pub fn subset(&self, scene_ids: &BTreeSet<String>) -> Dataset {
        let scenes: Vec<Scene> =
            self.scenes.iter().filter(|s| scene_ids.contains(&s.scene_id)).cloned().collect();
        let annotations: Vec<Annotation> = self
            .annotations
            .iter()
            .filter(|a| scene_ids.contains(&a.scene_id))
            .cloned()
            .collect();
        Dataset {
            kind: self.kind,
            category_universe: universe(&annotations),
            scenes,
            annotations,
            base_dir: self.base_dir.clone(),
        }
    }

    /// Fills empty scene genre lists from app metadata.
    pub fn attach_apps(&mut self, apps: &AppCatalog) {
        for scene in &mut self.scenes {
            if scene.genres.is_empty() {
                if let Some(app) = apps.get(&scene.app_id) {
                    scene.genres = app.genres.clone();
                }
            }
        }
    }
}

pub(crate) fn universe(annotations: &[Annotation]) -> BTreeSet<String> {
    annotations.iter().map(|a| a.category.clone()).collect()
}

fn fold_label(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Derives one of the three evaluation variants from the semantics dataset.
///
/// `context_categories` is required for [`VariantKind::Context`] and names the
/// sampled categories to keep (matched case-insensitively).
pub fn derive_variant(
    base: &Dataset,
    kind: VariantKind,
    context_categories: Option<&[String]>,
) -> Result<Dataset> {
    if base.kind != VariantKind::Semantics {
        return Err(Error::Config(format!(
            "variants derive from the semantics dataset, got {}",
            base.kind.as_str()
        )));
    }
    match kind {
        VariantKind::Semantics => Ok(base.clone()),
        VariantKind::Interactability => {
            // Non-interactable counterparts have no place in a single-class
            // "interactable" dataset.
            let annotations: Vec<Annotation> = base
                .annotations
                .iter()
                .filter(|a| a.interactable)
                .map(|a| Annotation { category: INTERACTABLE_LABEL.to_string(), ..a.clone() })
                .collect();
            Ok(Dataset {
                kind,
                scenes: base.scenes.clone(),
                category_universe: BTreeSet::from([INTERACTABLE_LABEL.to_string()]),
                annotations,
                base_dir: base.base_dir.clone(),
            })
        }
        VariantKind::Context => {
            let sample: BTreeSet<String> = context_categories
                .ok_or_else(|| Error::Config("context variant needs a category sample".into()))?
                .iter()
                .map(|c| fold_label(c))
                .collect();
            let annotations: Vec<Annotation> = base
                .annotations
                .iter()
                .filter(|a| sample.contains(&fold_label(&a.category)))
                .cloned()
                .collect();
            if !annotations.iter().any(|a| !a.interactable) {
                return Err(Error::MissingCounterparts);
            }
            Ok(Dataset {
                kind,
                scenes: base.scenes.clone(),
                category_universe: universe(&annotations),
                annotations,
                base_dir: base.base_dir.clone(),
            })
        }
    }
}

/// Draws a context-category sample: `k` labels chosen uniformly from the
/// `top_n` most frequent interactable categories (ties broken by name).
pub fn sample_context_categories(
    dataset: &Dataset,
    top_n: usize,
    k: usize,
    seed: u64,
) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for a in dataset.annotations.iter().filter(|a| a.interactable) {
        *counts.entry(a.category.as_str()).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let mut top: Vec<String> = ranked.into_iter().take(top_n).map(|(c, _)| c.to_string()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    top.shuffle(&mut rng);
    top.truncate(k);
    top.sort();
    top
}

/// Store-page metadata for one app.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppInfo {
    pub name: String,
    #[serde(default)]
    pub genres: Vec<String>,
    #[serde(default)]
    pub store_page_text: String,
}

/// Sidecar file mapping `app_id` to [`AppInfo`].
pub type AppCatalog = BTreeMap<String, AppInfo>;

pub fn load_apps(path: &Path) -> Result<AppCatalog> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn ann(id: &str, scene: &str, bbox: (f64, f64, f64, f64), cat: &str, inter: bool) -> Annotation {
        Annotation {
            ann_id: id.into(),
            scene_id: scene.into(),
            bbox: BoundingBox::new(bbox.0, bbox.1, bbox.2, bbox.3).unwrap(),
            category: cat.into(),
            interactable: inter,
        }
    }

    pub fn scene(id: &str, app: &str, genres: &[&str]) -> Scene {
        Scene {
            scene_id: id.into(),
            app_id: app.into(),
            width: 960.0,
            height: 540.0,
            image_uri: format!("{id}.png"),
            genres: genres.iter().map(|g| g.to_string()).collect(),
        }
    }

    pub fn dataset(scenes: Vec<Scene>, annotations: Vec<Annotation>) -> Dataset {
        Dataset {
            kind: VariantKind::Semantics,
            category_universe: universe(&annotations),
            scenes,
            annotations,
            base_dir: PathBuf::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn base() -> Dataset {
        dataset(
            vec![scene("s1", "a1", &["casual"]), scene("s2", "a2", &["sports"])],
            vec![
                ann("1", "s1", (10.0, 10.0, 50.0, 50.0), "tree", true),
                ann("2", "s1", (100.0, 10.0, 50.0, 50.0), "axe", true),
                ann("3", "s2", (10.0, 10.0, 50.0, 50.0), "tree", false),
                ann("4", "s2", (200.0, 10.0, 30.0, 30.0), "fishing rod", true),
            ],
        )
    }

    #[test]
    fn interactability_variant_has_single_category() {
        let v = derive_variant(&base(), VariantKind::Interactability, None).unwrap();
        assert_eq!(v.category_universe, BTreeSet::from(["interactable".to_string()]));
        assert_eq!(v.annotations.len(), 3);
        assert!(v.annotations.iter().all(|a| a.category == "interactable"));
    }

    #[test]
    fn semantics_variant_is_identity() {
        let b = base();
        assert_eq!(derive_variant(&b, VariantKind::Semantics, None).unwrap(), b);
    }

    #[test]
    fn context_variant_keeps_counterparts() {
        let cats = vec!["Tree".to_string()];
        let v = derive_variant(&base(), VariantKind::Context, Some(&cats)).unwrap();
        assert_eq!(v.annotations.len(), 2);
        assert!(v.annotations.iter().any(|a| a.category == "tree" && a.interactable));
        assert!(v.annotations.iter().any(|a| a.category == "tree" && !a.interactable));
    }

    #[test]
    fn context_variant_without_counterparts_fails() {
        let cats = vec!["axe".to_string()];
        let err = derive_variant(&base(), VariantKind::Context, Some(&cats)).unwrap_err();
        assert!(matches!(err, Error::MissingCounterparts));
    }

    #[test]
    fn derive_requires_semantics_base() {
        let v = derive_variant(&base(), VariantKind::Interactability, None).unwrap();
        assert!(derive_variant(&v, VariantKind::Semantics, None).is_err());
    }

    #[test]
    fn category_sample_is_seeded() {
        let b = base();
        let a = sample_context_categories(&b, 100, 2, 7);
        assert_eq!(a, sample_context_categories(&b, 100, 2, 7));
        assert_eq!(a.len(), 2);
    }
}
