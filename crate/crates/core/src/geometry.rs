//! Axis-aligned box geometry and the two detection post-processing filters.
//!
//! Coordinates are real-valued pixels with a top-left origin. A box is
//! described by its upper-left corner plus width and height.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default area fraction above which a box is treated as abnormally large.
pub const DEFAULT_MAX_AREA_FRACTION: f64 = 0.9;

/// Default IoU above which the lower-scored of two boxes is suppressed.
pub const DEFAULT_NMS_IOU: f64 = 0.7;

/// An axis-aligned rectangle `(x, y, w, h)` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    /// Builds a box, rejecting non-finite values, negative corners and
    /// non-positive extents.
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let b = Self { x, y, w, h };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite());
        if !finite || self.x < 0.0 || self.y < 0.0 || self.w <= 0.0 || self.h <= 0.0 {
            return Err(Error::InvalidBox(format!(
                "({}, {}, {}, {})",
                self.x, self.y, self.w, self.h
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// Half-open membership: `x ∈ [left, right)` and `y ∈ [top, bottom)`.
    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x && px < self.right() && py >= self.y && py < self.bottom()
    }

    pub fn fits_within(&self, width: f64, height: f64) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.right() <= width && self.bottom() <= height
    }

    /// Clamps the box to `[0, width] x [0, height]`. Returns `None` when
    /// nothing of positive area remains.
    pub fn clamp_to(&self, width: f64, height: f64) -> Option<Self> {
        let x0 = self.x.clamp(0.0, width);
        let y0 = self.y.clamp(0.0, height);
        let x1 = self.right().clamp(0.0, width);
        let y1 = self.bottom().clamp(0.0, height);
        (x1 > x0 && y1 > y0).then_some(Self { x: x0, y: y0, w: x1 - x0, h: y1 - y0 })
    }

    /// Grows the box by `fraction` of its size on every side.
    pub fn padded(&self, fraction: f64) -> Self {
        let dx = self.w * fraction;
        let dy = self.h * fraction;
        Self { x: self.x - dx, y: self.y - dy, w: self.w + 2.0 * dx, h: self.h + 2.0 * dy }
    }

    pub fn intersection_area(&self, other: &Self) -> f64 {
        let iw = self.right().min(other.right()) - self.x.max(other.x);
        let ih = self.bottom().min(other.bottom()) - self.y.max(other.y);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }

    /// Lexicographic order on `(x, y, w, h)`, used as a deterministic tie-break.
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        self.x
            .total_cmp(&other.x)
            .then(self.y.total_cmp(&other.y))
            .then(self.w.total_cmp(&other.w))
            .then(self.h.total_cmp(&other.h))
    }
}

/// Intersection over union of two boxes, in `[0, 1]`.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// A box with a confidence score in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox {
    #[serde(flatten)]
    pub bbox: BoundingBox,
    pub score: f64,
}

impl ScoredBox {
    pub fn new(bbox: BoundingBox, score: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidScore(score));
        }
        Ok(Self { bbox, score })
    }
}

/// Descending score, ties broken by box lexicographic order.
pub fn score_order(a: &ScoredBox, b: &ScoredBox) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.bbox.lex_cmp(&b.bbox))
}

/// Drops every box whose area is strictly greater than
/// `max_area_fraction * scene_w * scene_h`. Survivors keep their order.
pub fn filter_oversized(
    boxes: Vec<ScoredBox>,
    scene_w: f64,
    scene_h: f64,
    max_area_fraction: f64,
) -> Vec<ScoredBox> {
    boxes.into_iter().filter(|b| !is_oversized(&b.bbox, scene_w, scene_h, max_area_fraction)).collect()
}

/// True when the box area is strictly greater than the allowed scene fraction.
pub fn is_oversized(b: &BoundingBox, scene_w: f64, scene_h: f64, max_area_fraction: f64) -> bool {
    b.area() > max_area_fraction * scene_w * scene_h
}

/// Greedy class-agnostic non-maximum suppression.
///
/// Boxes are visited in descending score order; a box is accepted iff its IoU
/// with every already-accepted box is at most `iou_threshold`.
pub fn nms(boxes: Vec<ScoredBox>, iou_threshold: f64) -> Vec<ScoredBox> {
    nms_by(boxes, iou_threshold, |b| *b)
}

/// [`nms`] over arbitrary items that carry a scored box.
pub fn nms_by<T, F>(mut items: Vec<T>, iou_threshold: f64, scored: F) -> Vec<T>
where
    F: Fn(&T) -> ScoredBox,
{
    items.sort_by(|a, b| score_order(&scored(a), &scored(b)));
    let mut kept: Vec<T> = Vec::with_capacity(items.len());
    for item in items {
        let candidate = scored(&item).bbox;
        if kept.iter().all(|k| iou(&scored(k).bbox, &candidate) <= iou_threshold) {
            kept.push(item);
        }
    }
    kept
}
