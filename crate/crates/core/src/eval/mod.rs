//! Open-vocabulary detection metrics: semantic label matching, greedy
//! prediction/ground-truth matching, P/R/F1, 101-point AP and the per-category
//! averaging used for the three dataset variants.

mod matcher;
mod matching;
mod metrics;
mod report;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use matcher::{SemanticMatcher, DEFAULT_MATCH_THRESHOLD};
pub use matching::{match_scene, ranking, Assignment, MatchLedger, Prediction};
pub use metrics::{ap_101, pr_f1, Prf};
pub use report::{table_csv, Averages, CategoryMetrics, MetricsReport, ReportMeta, ThresholdReport};

use crate::dataset::{Annotation, Dataset, VariantKind, INTERACTABLE_LABEL};
use crate::error::{Error, Result};
use crate::pipeline::SceneDetections;

pub const DEFAULT_IOU_THRESHOLDS: [f64; 5] = [0.75, 0.80, 0.85, 0.90, 0.95];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub iou_thresholds: Vec<f64>,
    /// Free-form split label recorded in the report, e.g. `app/test`.
    pub split: String,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { iou_thresholds: DEFAULT_IOU_THRESHOLDS.to_vec(), split: String::new() }
    }
}

/// One evaluation category: its ground truths and the predictions counted
/// toward it.
struct Category {
    name: String,
    gts: Vec<Annotation>,
    preds: Vec<Prediction>,
    /// Predicted label with no ground-truth counterpart in the fold.
    zeroed: bool,
}

/// Scores `detections` against the scenes of `fold`.
///
/// The evaluation mode follows `ds.kind`:
/// - semantics: categories are the ground-truth labels; a prediction counts
///   toward every category its label semantically matches. Predicted labels
///   matching no ground-truth category form extra categories with all-zero
///   metrics that still enter the averages.
/// - interactability: a single `interactable` category.
/// - context: per category, a prediction matching an interactable ground
///   truth is a TP, one matching a non-interactable ground truth is an FP, and
///   unmatched non-interactable ground truths are TNs. Predicted labels
///   outside the context categories are ignored.
///
/// Only predictions flagged interactable take part. Detections for scenes
/// outside the fold are an error; fold scenes without detections count as
/// having no predictions.
pub fn evaluate(
    ds: &Dataset,
    fold: &BTreeSet<String>,
    detections: &[SceneDetections],
    matcher: &SemanticMatcher,
    opts: &EvalOptions,
) -> Result<MetricsReport> {
    for d in detections {
        if !fold.contains(&d.scene_id) {
            return Err(Error::FoldMismatch(d.scene_id.clone()));
        }
    }
    let mode = ds.kind;
    let gts: Vec<Annotation> = ds
        .annotations
        .iter()
        .filter(|a| fold.contains(&a.scene_id))
        .filter(|a| mode == VariantKind::Context || a.interactable)
        .cloned()
        .collect();
    let preds: Vec<Prediction> = detections
        .iter()
        .flat_map(|s| s.detections.iter().map(|d| Prediction::from_detection(&s.scene_id, d)))
        .filter(|p| p.interactable)
        .map(|mut p| {
            if mode == VariantKind::Interactability {
                p.category = INTERACTABLE_LABEL.to_string();
            }
            p
        })
        .collect();

    let categories = group(mode, &gts, preds, matcher)?;
    let mut thresholds = Vec::with_capacity(opts.iou_thresholds.len());
    for &thr in &opts.iou_thresholds {
        let per_cat = categories.iter().map(|c| score_category(mode, c, thr)).collect::<Result<Vec<_>>>()?;
        thresholds.push(ThresholdReport::new(thr, per_cat));
    }
    Ok(MetricsReport {
        meta: ReportMeta {
            variant: mode,
            split: opts.split.clone(),
            matcher_threshold: matcher.threshold(),
            scenes: fold.len(),
        },
        thresholds,
    })
}

fn group(mode: VariantKind, gts: &[Annotation], mut preds: Vec<Prediction>, matcher: &SemanticMatcher) -> Result<Vec<Category>> {
    // A canonical visiting order keeps grouping independent of input order.
    preds.sort_by(|a, b| {
        a.category
            .trim()
            .to_lowercase()
            .cmp(&b.category.trim().to_lowercase())
            .then_with(|| a.scene_id.cmp(&b.scene_id))
            .then_with(|| b.score.total_cmp(&a.score))
            .then_with(|| a.bbox.lex_cmp(&b.bbox))
    });
    let mut by_label: BTreeMap<String, Vec<Annotation>> = BTreeMap::new();
    for a in gts {
        by_label.entry(a.category.clone()).or_default().push(a.clone());
    }
    let mut cats: Vec<Category> = by_label
        .into_iter()
        .map(|(name, gts)| Category { name, gts, preds: vec![], zeroed: false })
        .collect();
    let n_gt_cats = cats.len();

    for p in preds {
        let mut claimed = false;
        for c in cats[..n_gt_cats].iter_mut() {
            if matcher.matches(&p.category, &c.name)? {
                c.preds.push(p.clone());
                claimed = true;
            }
        }
        if claimed || mode == VariantKind::Context {
            continue;
        }
        let mut home = None;
        for (i, c) in cats.iter().enumerate().skip(n_gt_cats) {
            if matcher.matches(&p.category, &c.name)? {
                home = Some(i);
                break;
            }
        }
        match home {
            Some(i) => cats[i].preds.push(p),
            None => cats.push(Category { name: p.category.trim().to_lowercase(), gts: vec![], preds: vec![p], zeroed: true }),
        }
    }
    cats[n_gt_cats..].sort_by(|a, b| a.name.cmp(&b.name));
    Ok(cats)
}

fn score_category(mode: VariantKind, c: &Category, thr: f64) -> Result<CategoryMetrics> {
    let n_pred = c.preds.len();
    if c.zeroed {
        return Ok(CategoryMetrics::zeroed(&c.name, n_pred));
    }
    let mut scenes: BTreeMap<&str, (Vec<Prediction>, Vec<&Annotation>)> = BTreeMap::new();
    for p in &c.preds {
        scenes.entry(p.scene_id.as_str()).or_default().0.push(p.clone());
    }
    for g in &c.gts {
        scenes.entry(g.scene_id.as_str()).or_default().1.push(g);
    }

    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    let mut ranked: Vec<(Prediction, bool)> = Vec::with_capacity(n_pred);
    for (preds, gts) in scenes.values() {
        // Category membership was decided during grouping.
        let ledger = match_scene(preds, gts, thr, |_, _| Ok(true))?;
        for a in &ledger.assignments {
            let hit = match (mode, a.gt) {
                (VariantKind::Context, Some(g)) => gts[g].interactable,
                (_, Some(_)) => true,
                (_, None) => false,
            };
            if hit {
                tp += 1;
            } else {
                fp += 1;
            }
            ranked.push((preds[a.pred].clone(), hit));
        }
        let claimed: BTreeSet<usize> = ledger.matched_gts().collect();
        for (g, gt) in gts.iter().enumerate() {
            if claimed.contains(&g) {
                continue;
            }
            if gt.interactable {
                fn_ += 1;
            } else {
                tn += 1;
            }
        }
    }

    let n_gt = c.gts.iter().filter(|g| g.interactable).count();
    let preds: Vec<Prediction> = ranked.iter().map(|(p, _)| p.clone()).collect();
    let flags: Vec<bool> = ranking(&preds).into_iter().map(|i| ranked[i].1).collect();
    let ap = ap_101(&flags, n_gt)?;
    let prf = pr_f1(tp, fp, fn_);
    Ok(CategoryMetrics {
        category: c.name.clone(),
        n_gt,
        n_pred,
        tp,
        fp,
        fn_,
        tn,
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        ap,
        zeroed: false,
    })
}
