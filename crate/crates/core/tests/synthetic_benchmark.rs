//! Stage-level quality on a held-out synthetic split.

mod common;

use std::sync::OnceLock;

use scenetext::dataset::mine_region_patches;
use scenetext::eval::{classifier_accuracy, overlap_ratio};
use scenetext::filtering::{line_svm_filter, patch_svm_filter};
use scenetext::imaging::BoundingBox;
use scenetext::pipeline::{candidate_regions, detect, link_candidates, Models};
use scenetext::synth::{generate_synthetic_scene, SynthConfig};

use common::Bench;

const SEED: u64 = 1;

fn fixture() -> &'static (Bench, Models) {
    static CELL: OnceLock<(Bench, Models)> = OnceLock::new();
    CELL.get_or_init(|| {
        let bench = common::build(SEED, 60, 20);
        let models = common::train_models(&bench, 3);
        (bench, models)
    })
}

fn inside_fraction(b: &BoundingBox, gts: &[BoundingBox]) -> f64 {
    let best = gts
        .iter()
        .map(|g| b.intersection_area(g))
        .max()
        .unwrap_or(0);
    best as f64 / b.area() as f64
}

#[test]
fn patch_stage_keeps_text_regions() {
    let (bench, models) = fixture();
    let (mut text, mut kept) = (0usize, 0usize);
    for s in &bench.test {
        let gray = s.image.to_grayscale();
        let (_, geo) = candidate_regions(&s.image, &bench.config).unwrap();
        let truth: Vec<_> = geo
            .into_iter()
            .filter(|c| inside_fraction(&c.bbox(), &s.annotation.boxes) >= 0.8)
            .collect();
        text += truth.len();
        kept += patch_svm_filter(&gray, truth, &models.patch, &bench.config.patch)
            .unwrap()
            .len();
    }
    let recall = kept as f64 / text as f64;
    assert!(text > 100, "only {text} text regions in the test split");
    assert!(
        recall >= 0.9,
        "patch-stage recall {recall:.3} ({kept}/{text})"
    );
}

#[test]
fn line_verifier_is_precise() {
    let (bench, models) = fixture();
    let (mut accepted, mut correct) = (0usize, 0usize);
    for s in &bench.test {
        let gray = s.image.to_grayscale();
        let (_, geo) = candidate_regions(&s.image, &bench.config).unwrap();
        let kept = patch_svm_filter(&gray, geo, &models.patch, &bench.config.patch).unwrap();
        let lines = link_candidates(&kept, &bench.config);
        for l in line_svm_filter(&gray, lines, &models.line, &bench.config.hog).unwrap() {
            accepted += 1;
            if s.annotation
                .boxes
                .iter()
                .any(|g| overlap_ratio(g, &l.bbox) > 0.5)
            {
                correct += 1;
            }
        }
    }
    let precision = correct as f64 / accepted as f64;
    assert!(accepted > 0);
    assert!(
        precision >= 0.9,
        "line precision {precision:.3} ({correct}/{accepted})"
    );
}

#[test]
fn patch_classifier_generalises() {
    let (bench, models) = fixture();
    let mut held_out =
        scenetext::dataset::PatchDataset::new(bench.config.patch.width, bench.config.patch.height);
    for (i, s) in bench.test.iter().enumerate() {
        held_out.append(
            mine_region_patches(
                &s.image,
                &s.annotation,
                &bench.config,
                common::NEG_RATIO,
                1000 + i as u64,
            )
            .unwrap(),
        );
    }
    let acc = classifier_accuracy(&models.patch, &common::patch_data(&held_out)).unwrap();
    assert!(acc >= 0.95, "held-out patch accuracy {acc:.3}");
}

#[test]
fn three_line_scene_is_fully_detected() {
    let (bench, models) = fixture();
    let scene = generate_synthetic_scene(&SynthConfig {
        lines: (3, 3),
        distractors: (0, 0),
        seed: 7,
        ..SynthConfig::default()
    })
    .unwrap();
    assert_eq!(scene.annotation.boxes.len(), 3);
    let r = detect(&scene.image, "three", models, &bench.config).unwrap();
    assert_eq!(r.boxes.len(), 3, "detected {:?}", r.bboxes());
    for g in &scene.annotation.boxes {
        let best = r
            .bboxes()
            .iter()
            .map(|d| overlap_ratio(g, d))
            .fold(0.0, f64::max);
        assert!(best > 0.5, "line {g:?} best overlap {best:.3}");
    }
}

#[test]
fn detection_is_deterministic() {
    let (bench, models) = fixture();
    for s in bench.test.iter().take(5) {
        let a = detect(&s.image, &s.annotation.image_id, models, &bench.config).unwrap();
        let b = detect(&s.image, &s.annotation.image_id, models, &bench.config).unwrap();
        assert_eq!(a, b);
    }
}
