//! Geometric clean-up applied to raw grounding output: drop boxes covering
//! most of the screen, then suppress overlapping duplicates.
//!
//! ```text
//! cargo run --example postprocess
//! ```

use igekit::geometry::{filter_oversized, iou, nms, BoundingBox, ScoredBox, DEFAULT_MAX_AREA_FRACTION, DEFAULT_NMS_IOU};

fn scored(x: f64, y: f64, w: f64, h: f64, score: f64) -> ScoredBox {
    ScoredBox::new(BoundingBox::new(x, y, w, h).unwrap(), score).unwrap()
}

fn main() {
    let (width, height) = (960.0, 540.0);
    let raw = vec![
        scored(430.0, 250.0, 100.0, 60.0, 0.90),
        scored(432.0, 252.0, 98.0, 58.0, 0.70),
        scored(0.0, 0.0, 950.0, 530.0, 0.60),
        scored(250.0, 260.0, 60.0, 70.0, 0.85),
    ];
    println!("raw boxes: {}", raw.len());

    let sized = filter_oversized(raw, width, height, DEFAULT_MAX_AREA_FRACTION);
    println!("after area filter (limit {} px): {}", DEFAULT_MAX_AREA_FRACTION * width * height, sized.len());

    println!("IoU of the two donut boxes: {:.3}", iou(&sized[0].bbox, &sized[1].bbox));
    let kept = nms(sized, DEFAULT_NMS_IOU);
    for b in &kept {
        println!("  kept ({}, {}, {}, {}) score {:.2}", b.bbox.x, b.bbox.y, b.bbox.w, b.bbox.h, b.score);
    }
}
