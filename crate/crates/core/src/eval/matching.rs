use serde::{Deserialize, Serialize};

use crate::dataset::Annotation;
use crate::error::Result;
use crate::geometry::{iou, BoundingBox, ScoredBox};
use crate::pipeline::Detection;

/// A detection as seen by the evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub scene_id: String,
    #[serde(flatten)]
    pub bbox: BoundingBox,
    pub score: f64,
    pub category: String,
    pub interactable: bool,
}

impl Prediction {
    pub fn from_detection(scene_id: &str, d: &Detection) -> Self {
        Self {
            scene_id: scene_id.to_string(),
            bbox: d.bbox,
            score: d.score,
            category: d.category.clone(),
            interactable: d.interactable,
        }
    }

    fn scored(&self) -> ScoredBox {
        ScoredBox { bbox: self.bbox, score: self.score }
    }
}

/// Indices of `preds` in evaluation order: confidence descending, equal
/// confidences by box (x, y, w, h), then input position.
pub fn ranking(preds: &[Prediction]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| crate::geometry::score_order(&preds[a].scored(), &preds[b].scored()).then(a.cmp(&b)));
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// Index into the prediction slice given to [`match_scene`].
    pub pred: usize,
    /// Index into the ground-truth slice, if claimed.
    pub gt: Option<usize>,
    pub iou: f64,
}

/// Outcome of matching one scene. `assignments` follows evaluation order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchLedger {
    pub assignments: Vec<Assignment>,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl MatchLedger {
    pub fn matched_gts(&self) -> impl Iterator<Item = usize> + '_ {
        self.assignments.iter().filter_map(|a| a.gt)
    }
}

/// Greedy confidence-ordered matching.
///
/// Each prediction, in [`ranking`] order, claims the unclaimed ground truth
/// with the highest IoU among those that share its scene, whose category
/// `compatible` accepts, and whose IoU strictly exceeds `iou_thr`. IoU ties go
/// to the lower ground-truth index.
pub fn match_scene<F>(preds: &[Prediction], gts: &[&Annotation], iou_thr: f64, mut compatible: F) -> Result<MatchLedger>
where
    F: FnMut(&Prediction, &Annotation) -> Result<bool>,
{
    let mut claimed = vec![false; gts.len()];
    let mut ledger = MatchLedger::default();
    for p in ranking(preds) {
        let pred = &preds[p];
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if claimed[g] || gt.scene_id != pred.scene_id {
                continue;
            }
            let overlap = iou(&pred.bbox, &gt.bbox);
            if overlap <= iou_thr || best.is_some_and(|(_, b)| overlap <= b) {
                continue;
            }
            if compatible(pred, gt)? {
                best = Some((g, overlap));
            }
        }
        match best {
            Some((g, overlap)) => {
                claimed[g] = true;
                ledger.tp += 1;
                ledger.assignments.push(Assignment { pred: p, gt: Some(g), iou: overlap });
            }
            None => {
                ledger.fp += 1;
                ledger.assignments.push(Assignment { pred: p, gt: None, iou: 0.0 });
            }
        }
    }
    ledger.fn_ = claimed.iter().filter(|c| !**c).count();
    Ok(ledger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fixtures::ann;

    fn pred(x: f64, score: f64, cat: &str) -> Prediction {
        Prediction {
            scene_id: "s".into(),
            bbox: BoundingBox::new(x, 0.0, 10.0, 10.0).unwrap(),
            score,
            category: cat.into(),
            interactable: true,
        }
    }

    fn same(p: &Prediction, g: &Annotation) -> Result<bool> {
        Ok(p.category == g.category)
    }

    #[test]
    fn spec_cases() {
        let g1 = ann("1", "s", (0.0, 0.0, 10.0, 10.0), "a", true);
        let g2 = ann("2", "s", (50.0, 0.0, 10.0, 10.0), "a", true);
        let l = match_scene(&[], &[&g1, &g2], 0.75, same).unwrap();
        assert_eq!((l.tp, l.fp, l.fn_), (0, 0, 2));

        let l = match_scene(&[pred(0.0, 0.9, "a")], &[&g1], 0.75, same).unwrap();
        assert_eq!((l.tp, l.fp, l.fn_), (1, 0, 0));

        let l = match_scene(&[pred(0.0, 0.8, "a"), pred(0.0, 0.9, "a")], &[&g1], 0.75, same).unwrap();
        assert_eq!((l.tp, l.fp, l.fn_), (1, 1, 0));
        assert_eq!(l.assignments[0], Assignment { pred: 1, gt: Some(0), iou: 1.0 });
    }

    #[test]
    fn category_scene_and_threshold_gate_matches() {
        let g = ann("1", "s", (0.0, 0.0, 10.0, 10.0), "a", true);
        assert_eq!(match_scene(&[pred(0.0, 0.9, "b")], &[&g], 0.5, same).unwrap().tp, 0);
        let mut other = pred(0.0, 0.9, "a");
        other.scene_id = "t".into();
        assert_eq!(match_scene(&[other], &[&g], 0.5, same).unwrap().tp, 0);
        // IoU of a 5-pixel shift is 50/150.
        assert_eq!(match_scene(&[pred(5.0, 0.9, "a")], &[&g], 1.0 / 3.0, same).unwrap().tp, 0);
        assert_eq!(match_scene(&[pred(5.0, 0.9, "a")], &[&g], 0.33, same).unwrap().tp, 1);
    }
}
