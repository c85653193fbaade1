mod common;

use common::synth::ten_apps;
use igekit::dataset::{load_split, make_split, save_split, SplitKind};

fn sizes(s: &igekit::dataset::Split) -> [usize; 3] {
    [s.train.len(), s.val.len(), s.test.len()]
}

#[test]
fn ten_apps_split_six_one_three() {
    let ds = ten_apps();
    for seed in [0, 1, 99, u64::MAX] {
        assert_eq!(sizes(&make_split(&ds, SplitKind::App, seed, None).unwrap()), [6, 1, 3]);
    }
}

#[test]
fn genre_split_partitions_all_scenes() {
    let ds = ten_apps();
    let s = make_split(&ds, SplitKind::Genre, 3, None).unwrap();
    assert_eq!(s.train.len() + s.val.len() + s.test.len(), 10);
    assert!(!s.test.is_empty());
}

#[test]
fn context_split_holds_out_every_sampled_category_scene() {
    let ds = ten_apps();
    let cats = vec!["fish".to_string()];
    for seed in 0..10 {
        let s = make_split(&ds, SplitKind::ContextSensitive, seed, Some(&cats)).unwrap();
        assert!(s.test.contains(&"scene2".to_string()) && s.test.contains(&"scene7".to_string()));
        assert!(!s.train.iter().chain(&s.val).any(|id| id == "scene2" || id == "scene7"));
    }
}

#[test]
fn same_seed_same_manifest_bytes() {
    let ds = ten_apps();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    save_split(&make_split(&ds, SplitKind::App, 11, None).unwrap(), &a).unwrap();
    save_split(&make_split(&ds, SplitKind::App, 11, None).unwrap(), &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(load_split(&a).unwrap(), make_split(&ds, SplitKind::App, 11, None).unwrap());
}
