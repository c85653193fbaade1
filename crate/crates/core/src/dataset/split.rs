use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fold_label, Dataset};
use crate::error::{Error, Result};

/// Target train/val/test proportions.
const RATIO: [f64; 3] = [0.6, 0.1, 0.3];
const FOLD_NAMES: [&str; 3] = ["train", "val", "test"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    App,
    Genre,
    ContextSensitive,
}

impl std::str::FromStr for SplitKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "app" => Ok(SplitKind::App),
            "genre" => Ok(SplitKind::Genre),
            "context_sensitive" | "context-sensitive" | "context" => Ok(SplitKind::ContextSensitive),
            other => Err(Error::Config(format!("unknown split kind {other:?}"))),
        }
    }
}

/// A train/val/test partition of scene ids. Serializes to the split
/// manifest format `{kind, seed, train, val, test}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub kind: SplitKind,
    pub seed: u64,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl Split {
    pub fn fold(&self, name: &str) -> Option<&[String]> {
        match name {
            "train" => Some(&self.train),
            "val" => Some(&self.val),
            "test" => Some(&self.test),
            _ => None,
        }
    }

    pub fn fold_set(&self, name: &str) -> Option<BTreeSet<String>> {
        self.fold(name).map(|f| f.iter().cloned().collect())
    }

    fn from_folds(kind: SplitKind, seed: u64, folds: [Vec<String>; 3]) -> Result<Self> {
        for (fold, name) in folds.iter().zip(FOLD_NAMES) {
            if fold.is_empty() {
                return Err(Error::EmptyFold(name.to_string()));
            }
        }
        let [mut train, mut val, mut test] = folds;
        train.sort();
        val.sort();
        test.sort();
        Ok(Split { kind, seed, train, val, test })
    }
}

/// Partitions `dataset` into 6:1:3 folds.
///
/// App and genre splits move whole apps; the context-sensitive split forces
/// every scene holding one of `context_categories` into test and divides the
/// rest 6:1 between train and val.
pub fn make_split(
    dataset: &Dataset,
    kind: SplitKind,
    seed: u64,
    context_categories: Option<&[String]>,
) -> Result<Split> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let folds = match kind {
        SplitKind::App => {
            let groups = app_groups(dataset);
            let mut apps: Vec<&String> = groups.keys().collect();
            apps.shuffle(&mut rng);
            // Larger apps first so small ones can fill the remaining deficits.
            apps.sort_by_key(|a| std::cmp::Reverse(groups[*a].len()));
            let total = dataset.scenes.len() as f64;
            let mut counts = [0usize; 3];
            let mut folds: [Vec<String>; 3] = Default::default();
            for app in apps {
                let scenes = &groups[app];
                let f = pick_fold(&counts, total, None);
                counts[f] += scenes.len();
                folds[f].extend(scenes.iter().cloned());
            }
            folds
        }
        SplitKind::Genre => genre_folds(dataset, &mut rng),
        SplitKind::ContextSensitive => {
            let sample: BTreeSet<String> = context_categories
                .ok_or_else(|| {
                    Error::Config("context-sensitive split needs the sampled category list".into())
                })?
                .iter()
                .map(|c| fold_label(c))
                .collect();
            let held: BTreeSet<&str> = dataset
                .annotations
                .iter()
                .filter(|a| sample.contains(&fold_label(&a.category)))
                .map(|a| a.scene_id.as_str())
                .collect();
            let mut rest: Vec<String> = dataset
                .scenes
                .iter()
                .filter(|s| !held.contains(s.scene_id.as_str()))
                .map(|s| s.scene_id.clone())
                .collect();
            rest.shuffle(&mut rng);
            let n_train = ((rest.len() as f64) * 6.0 / 7.0).round() as usize;
            let val = rest.split_off(n_train.min(rest.len()));
            [rest, val, held.into_iter().map(String::from).collect()]
        }
    };
    Split::from_folds(kind, seed, folds)
}

fn app_groups(dataset: &Dataset) -> BTreeMap<String, Vec<String>> {
    let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for s in &dataset.scenes {
        groups.entry(s.app_id.clone()).or_default().push(s.scene_id.clone());
    }
    groups
}

/// Fold with the largest remaining deficit against the 6:1:3 target,
/// optionally adding a second (local) deficit; ties go to the earlier fold.
fn pick_fold(counts: &[usize; 3], total: f64, local: Option<(&[usize; 3], f64)>) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for f in 0..3 {
        let mut score = RATIO[f] * total - counts[f] as f64;
        if let Some((lc, lt)) = local {
            score += RATIO[f] * lt - lc[f] as f64;
        }
        if score > best_score {
            best_score = score;
            best = f;
        }
    }
    best
}

/// Each app is filed under its most common genre; genres are visited from
/// most to least frequent and their apps dealt into folds against both the
/// genre-local and the global 6:1:3 targets.
fn genre_folds(dataset: &Dataset, rng: &mut ChaCha8Rng) -> [Vec<String>; 3] {
    let groups = app_groups(dataset);
    let mut app_genres: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for s in &dataset.scenes {
        let entry = app_genres.entry(s.app_id.as_str()).or_default();
        entry.extend(s.genres.iter().map(String::as_str));
    }
    let mut genre_freq: BTreeMap<&str, usize> = BTreeMap::new();
    for genres in app_genres.values() {
        for g in genres {
            *genre_freq.entry(g).or_default() += 1;
        }
    }
    let mut by_genre: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (app, genres) in &app_genres {
        let primary = genres
            .iter()
            .max_by(|a, b| genre_freq[*a].cmp(&genre_freq[*b]).then(b.cmp(a)))
            .copied()
            .unwrap_or("unknown");
        by_genre.entry(primary).or_default().push(app);
    }
    let mut genres: Vec<(&str, Vec<&str>)> = by_genre.into_iter().collect();
    genres.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(b.0)));

    let total = dataset.scenes.len() as f64;
    let mut counts = [0usize; 3];
    let mut folds: [Vec<String>; 3] = Default::default();
    for (_, mut apps) in genres {
        apps.shuffle(rng);
        apps.sort_by_key(|a| std::cmp::Reverse(groups[*a].len()));
        let local_total: usize = apps.iter().map(|a| groups[*a].len()).sum();
        let mut local = [0usize; 3];
        for app in apps {
            let scenes = &groups[app];
            let f = pick_fold(&counts, total, Some((&local, local_total as f64)));
            counts[f] += scenes.len();
            local[f] += scenes.len();
            folds[f].extend(scenes.iter().cloned());
        }
    }
    folds
}

pub fn save_split(split: &Split, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(split)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_split(path: &Path) -> Result<Split> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
}
