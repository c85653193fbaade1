//! Reference implementations written independently of the library, used to
//! cross-check it on random instances.

use igekit::geometry::{BoundingBox, ScoredBox};

/// IoU of two integer-aligned boxes by counting unit cells.
pub fn raster_iou(a: (u32, u32, u32, u32), b: (u32, u32, u32, u32)) -> f64 {
    let inside = |r: (u32, u32, u32, u32), px: u32, py: u32| px >= r.0 && px < r.0 + r.2 && py >= r.1 && py < r.1 + r.3;
    let max_x = (a.0 + a.2).max(b.0 + b.2);
    let max_y = (a.1 + a.3).max(b.1 + b.3);
    let (mut inter, mut union) = (0u64, 0u64);
    for py in 0..max_y {
        for px in 0..max_x {
            let (ia, ib) = (inside(a, px, py), inside(b, px, py));
            inter += (ia && ib) as u64;
            union += (ia || ib) as u64;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Checks the suppression invariants of `kept = nms(input, thr)`.
pub fn nms_violations(input: &[ScoredBox], kept: &[ScoredBox], thr: f64, iou: impl Fn(&BoundingBox, &BoundingBox) -> f64) -> Vec<String> {
    let mut out = vec![];
    let mut pool: Vec<ScoredBox> = input.to_vec();
    for k in kept {
        match pool.iter().position(|p| p == k) {
            Some(i) => {
                pool.remove(i);
            }
            None => out.push(format!("kept box {k:?} is not from the input")),
        }
    }
    for (i, a) in kept.iter().enumerate() {
        for b in &kept[i + 1..] {
            if iou(&a.bbox, &b.bbox) > thr {
                out.push(format!("kept pair overlaps above threshold: {a:?} {b:?}"));
            }
        }
    }
    if let Some(top) = input.iter().map(|b| b.score).reduce(f64::max) {
        if !kept.iter().any(|k| k.score == top) {
            out.push("highest-scoring box was suppressed".into());
        }
    }
    out
}

/// 101-point interpolated AP evaluated straight from the definition: for
/// each recall level, the best precision over all cut-offs reaching it.
pub fn brute_ap(flags: &[bool], n_gt: usize) -> f64 {
    let cutoffs: Vec<(f64, f64)> = (1..=flags.len())
        .map(|k| {
            let tp = flags[..k].iter().filter(|f| **f).count();
            (tp as f64 / n_gt as f64, tp as f64 / k as f64)
        })
        .collect();
    let total: f64 = (0..=100)
        .map(|i| {
            let r = i as f64 / 100.0;
            cutoffs.iter().filter(|(rec, _)| *rec >= r).map(|(_, p)| *p).fold(0.0, f64::max)
        })
        .sum();
    total / 101.0
}

/// A candidate for the exhaustive matcher: score, box.
pub type Cand = (f64, BoundingBox);

/// Best assignment so far: its comparison key and the assignment itself.
type Best = Option<(Vec<(u8, f64, i64)>, Vec<Option<usize>>)>;

fn rank(preds: &[Cand]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..preds.len()).collect();
    idx.sort_by(|&i, &j| {
        let (a, b) = (&preds[i], &preds[j]);
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(a.1.x.partial_cmp(&b.1.x).unwrap())
            .then(a.1.y.partial_cmp(&b.1.y).unwrap())
            .then(a.1.w.partial_cmp(&b.1.w).unwrap())
            .then(a.1.h.partial_cmp(&b.1.h).unwrap())
            .then(i.cmp(&j))
    });
    idx
}

/// Enumerates every one-to-one partial assignment of predictions to ground
/// truths with IoU above `thr` and returns the one whose per-prediction keys,
/// read in confidence order, are lexicographically largest. The key of a
/// matched prediction is (1, IoU, -gt index); of an unmatched one (0, 0, 0).
/// Result: for each prediction index, its ground-truth index.
pub fn exhaustive_match(
    preds: &[Cand],
    gts: &[BoundingBox],
    thr: f64,
    iou: impl Fn(&BoundingBox, &BoundingBox) -> f64,
) -> Vec<Option<usize>> {
    let order = rank(preds);
    let mut best: Best = None;
    let mut current = vec![None; preds.len()];
    let mut used = vec![false; gts.len()];

    #[allow(clippy::too_many_arguments)]
    fn walk(
        depth: usize,
        order: &[usize],
        preds: &[Cand],
        gts: &[BoundingBox],
        thr: f64,
        iou: &dyn Fn(&BoundingBox, &BoundingBox) -> f64,
        current: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        best: &mut Best,
    ) {
        if depth == order.len() {
            let key: Vec<(u8, f64, i64)> = order
                .iter()
                .map(|&p| match current[p] {
                    Some(g) => (1, iou(&preds[p].1, &gts[g]), -(g as i64)),
                    None => (0, 0.0, 0),
                })
                .collect();
            let better = match best {
                None => true,
                Some((k, _)) => key.partial_cmp(k) == Some(std::cmp::Ordering::Greater),
            };
            if better {
                *best = Some((key, current.clone()));
            }
            return;
        }
        let p = order[depth];
        walk(depth + 1, order, preds, gts, thr, iou, current, used, best);
        for g in 0..gts.len() {
            if !used[g] && iou(&preds[p].1, &gts[g]) > thr {
                used[g] = true;
                current[p] = Some(g);
                walk(depth + 1, order, preds, gts, thr, iou, current, used, best);
                current[p] = None;
                used[g] = false;
            }
        }
    }

    walk(0, &order, preds, gts, thr, &iou, &mut current, &mut used, &mut best);
    best.map(|(_, a)| a).unwrap_or_default()
}
