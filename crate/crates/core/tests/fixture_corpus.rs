//! Regenerates the frozen replay corpus under `tests/fixtures/corpus`.
//!
//! Run with `IGEKIT_REGEN_FIXTURES=1 cargo test --test fixture_corpus -- --ignored`.
//! Scene images are drawn here, every scripted answer is recorded into
//! `replay/`, and the resulting detections are frozen into `golden/`.

mod common;

use std::path::Path;

use image::{Rgba, RgbaImage};
use igekit::gateway::{BackendKind, ProviderOptions, Providers};
use igekit::pipeline::PipelineConfig;

fn fill(img: &mut RgbaImage, x: u32, y: u32, w: u32, h: u32, color: [u8; 3]) {
    for yy in y..(y + h).min(img.height()) {
        for xx in x..(x + w).min(img.width()) {
            img.put_pixel(xx, yy, Rgba([color[0], color[1], color[2], 255]));
        }
    }
}

fn draw(path: &Path, background: [u8; 3], shapes: &[(u32, u32, u32, u32, [u8; 3])]) {
    let mut img = RgbaImage::from_pixel(960, 540, Rgba([background[0], background[1], background[2], 255]));
    for &(x, y, w, h, c) in shapes {
        fill(&mut img, x, y, w, h, c);
    }
    img.save(path).unwrap();
}

fn draw_images(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    draw(
        &dir.join("baseball.png"),
        [18, 24, 48],
        &[
            (0, 360, 960, 180, [40, 110, 50]),
            (0, 140, 960, 80, [90, 80, 100]),
            (720, 40, 200, 90, [30, 30, 30]),
            (740, 60, 40, 50, [240, 240, 240]),
            (800, 60, 40, 50, [240, 240, 240]),
            (470, 260, 20, 20, [245, 245, 245]),
            (600, 330, 180, 60, [160, 110, 60]),
        ],
    );
    draw(
        &dir.join("donut.png"),
        [200, 190, 170],
        &[
            (0, 330, 960, 210, [225, 225, 230]),
            (400, 300, 180, 40, [120, 80, 50]),
            (430, 250, 100, 60, [200, 140, 80]),
            (450, 262, 10, 6, [230, 40, 90]),
            (490, 270, 10, 6, [40, 180, 230]),
            (250, 260, 60, 70, [200, 30, 30]),
            (620, 300, 80, 40, [250, 250, 250]),
        ],
    );
    draw(
        &dir.join("grove.png"),
        [150, 200, 240],
        &[
            (0, 300, 960, 240, [120, 170, 80]),
            (360, 400, 200, 40, [100, 70, 40]),
            (400, 200, 120, 220, [50, 140, 50]),
            (650, 330, 300, 20, [150, 110, 70]),
            (700, 300, 60, 180, [150, 150, 160]),
        ],
    );
    draw(
        &dir.join("lake.png"),
        [150, 150, 160],
        &[
            (0, 260, 960, 280, [50, 90, 130]),
            (50, 80, 200, 200, [30, 80, 40]),
            (700, 120, 200, 150, [30, 80, 40]),
            (500, 300, 250, 80, [20, 20, 20]),
        ],
    );
}

#[test]
#[ignore = "rewrites the frozen fixture corpus"]
fn regenerate() {
    if std::env::var("IGEKIT_REGEN_FIXTURES").as_deref() != Ok("1") {
        eprintln!("set IGEKIT_REGEN_FIXTURES=1 to regenerate");
        return;
    }
    let dir = common::corpus_dir();
    draw_images(&dir.join("images"));
    let replay = dir.join("replay");
    let golden = dir.join("golden");
    for d in [&replay, &golden] {
        if d.exists() {
            std::fs::remove_dir_all(d).unwrap();
        }
        std::fs::create_dir_all(d).unwrap();
    }

    let providers = Providers::build(&ProviderOptions {
        backend: BackendKind::Record,
        replay_dir: Some(replay),
        mock_script: Some(dir.join("mock_script.json")),
        ..Default::default()
    })
    .unwrap();
    let (ds, apps) = common::corpus();
    let pipeline = common::pipeline(&providers, PipelineConfig::default());
    for input in common::inputs(&ds, &apps) {
        let out = pipeline.run(&input).unwrap();
        std::fs::write(golden.join(format!("{}.json", out.scene_id)), out.to_json()).unwrap();
    }
}
