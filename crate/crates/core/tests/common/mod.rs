//! Seeded synthetic benchmark shared by the integration tests.

#![allow(dead_code)]

use scenetext::config::PipelineConfig;
use scenetext::dataset::{mine_line_windows, mine_region_patches, PatchDataset};
use scenetext::eval::{match_detections, EvalReport, ImageEval};
use scenetext::filtering::{standardize, window_features};
use scenetext::pipeline::{detect, Models};
use scenetext::svm::{train, KernelSpec, TrainConfig};
use scenetext::synth::{generate_synthetic_scene, scene_seed, SynthConfig, SynthScene};

pub struct Bench {
    pub config: PipelineConfig,
    pub train: Vec<SynthScene>,
    pub test: Vec<SynthScene>,
    pub patches: PatchDataset,
    pub lines: PatchDataset,
}

pub const NEG_RATIO: usize = 2;
pub const LINE_JITTER: usize = 2;

pub fn scene(seed: u64, index: usize) -> SynthScene {
    let mut s = generate_synthetic_scene(&SynthConfig {
        seed: scene_seed(seed, index as u64),
        ..SynthConfig::default()
    })
    .expect("default synth config is valid");
    s.annotation.image_id = format!("scene_{index:04}");
    s
}

/// Scenes `0..n_train` train, the next `n_test` test; mining seeds follow
/// the scene index.
pub fn build(seed: u64, n_train: usize, n_test: usize) -> Bench {
    let config = PipelineConfig::default();
    let train: Vec<SynthScene> = (0..n_train).map(|i| scene(seed, i)).collect();
    let test: Vec<SynthScene> = (n_train..n_train + n_test)
        .map(|i| scene(seed, i))
        .collect();
    let mut patches = PatchDataset::new(config.patch.width, config.patch.height);
    let mut lines = PatchDataset::new(config.hog.window_w, config.hog.window_h);
    for (i, s) in train.iter().enumerate() {
        let ms = scene_seed(seed, i as u64);
        patches
            .append(mine_region_patches(&s.image, &s.annotation, &config, NEG_RATIO, ms).unwrap());
        lines.append(
            mine_line_windows(&s.image, &s.annotation, &config, NEG_RATIO, LINE_JITTER, ms)
                .unwrap(),
        );
    }
    Bench {
        config,
        train,
        test,
        patches,
        lines,
    }
}

pub fn patch_data(set: &PatchDataset) -> Vec<(Vec<f64>, i8)> {
    set.labelled(|p| Ok(standardize(p.data()))).unwrap()
}

pub fn line_data(set: &PatchDataset, config: &PipelineConfig) -> Vec<(Vec<f64>, i8)> {
    set.labelled(|w| window_features(w, &config.hog)).unwrap()
}

pub fn train_models(bench: &Bench, degree: u32) -> Models {
    let cfg = &bench.config;
    let tc = TrainConfig::default();
    let mut patch = train(
        &patch_data(&bench.patches),
        KernelSpec::polynomial(degree, cfg.patch.len()),
        &tc,
    )
    .unwrap();
    patch.features = Some(cfg.patch.fingerprint());
    let mut line = train(
        &line_data(&bench.lines, cfg),
        KernelSpec::polynomial(degree, cfg.hog.descriptor_len()),
        &tc,
    )
    .unwrap();
    line.features = Some(cfg.hog.fingerprint());
    Models { patch, line }
}

pub fn evaluate(bench: &Bench, models: &Models, threshold: f64) -> EvalReport {
    let per_image = bench
        .test
        .iter()
        .map(|s| {
            let r = detect(&s.image, &s.annotation.image_id, models, &bench.config).unwrap();
            let m = match_detections(&s.annotation.boxes, &r.bboxes(), threshold);
            ImageEval {
                image_id: s.annotation.image_id.clone(),
                tp: m.tp,
                fp: m.fp,
                fn_: m.fn_,
            }
        })
        .collect();
    EvalReport::from_images(per_image)
}
