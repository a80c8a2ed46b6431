//! End-to-end detector: extraction, geometric and patch-SVM filtering,
//! linking and line verification.

use std::fmt;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::filtering::{geometric_filter, line_svm_filter, patch_svm_filter, RegionCandidate};
use crate::imaging::{BoundingBox, GrayImage, Image};
use crate::linking::{link_lines_with, TextLine};
use crate::mser::channel_enhanced_mser;
use crate::svm::SvmModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Mser,
    Geometric,
    PatchSvm,
    Linking,
    LineSvm,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Mser,
        Stage::Geometric,
        Stage::PatchSvm,
        Stage::Linking,
        Stage::LineSvm,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Stage::Mser => "mser",
            Stage::Geometric => "geometric",
            Stage::PatchSvm => "patch_svm",
            Stage::Linking => "linking",
            Stage::LineSvm => "line_svm",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Boxes surviving one stage, in that stage's output order.
#[derive(Debug, Clone, PartialEq)]
pub struct StageTrace {
    pub stage: Stage,
    pub boxes: Vec<BoundingBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectedBox {
    pub bbox: BoundingBox,
    /// Last stage the box passed.
    pub stage: Stage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub image_id: String,
    pub boxes: Vec<DetectedBox>,
    pub trace: Vec<StageTrace>,
}

impl DetectionResult {
    pub fn bboxes(&self) -> Vec<BoundingBox> {
        self.boxes.iter().map(|b| b.bbox).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub patch: SvmModel,
    pub line: SvmModel,
}

impl Models {
    /// Pass-through gates; useful for inspecting the unsupervised stages.
    pub fn accept_all(config: &PipelineConfig) -> Self {
        Models {
            patch: SvmModel::constant(config.patch.len(), true),
            line: SvmModel::constant(config.hog.descriptor_len(), true),
        }
    }
}

/// Rejects models whose feature layout disagrees with the configuration.
pub fn check_models(models: &Models, config: &PipelineConfig) -> Result<()> {
    config.validate()?;
    let checks = [
        (
            "patch",
            &models.patch,
            config.patch.len(),
            config.patch.fingerprint(),
        ),
        (
            "line",
            &models.line,
            config.hog.descriptor_len(),
            config.hog.fingerprint(),
        ),
    ];
    for (what, model, dim, fp) in checks {
        if model.dim != dim {
            return Err(Error::Config(format!(
                "{what} model has dimension {}, configuration yields {dim}",
                model.dim
            )));
        }
        if let Some(found) = &model.features {
            if *found != fp {
                return Err(Error::Config(format!(
                    "{what} model was trained on `{found}` features, configuration yields `{fp}`"
                )));
            }
        }
    }
    Ok(())
}

/// Extraction followed by the geometric gate; the regions both the detector
/// and training-data mining start from.
pub fn candidate_regions(
    img: &Image,
    config: &PipelineConfig,
) -> Result<(Vec<BoundingBox>, Vec<RegionCandidate>)> {
    let regions = channel_enhanced_mser(img, &config.mser);
    let mser_boxes = regions.iter().map(|r| r.bbox).collect();
    let candidates = regions
        .into_iter()
        .map(RegionCandidate::new)
        .collect::<Result<Vec<_>>>()?;
    Ok((mser_boxes, geometric_filter(candidates, &config.geometric)))
}

pub fn link_candidates(candidates: &[RegionCandidate], config: &PipelineConfig) -> Vec<TextLine> {
    let boxes: Vec<BoundingBox> = candidates.iter().map(|c| c.bbox()).collect();
    link_lines_with(&boxes, &config.link)
}

pub fn detect(
    img: &Image,
    image_id: &str,
    models: &Models,
    config: &PipelineConfig,
) -> Result<DetectionResult> {
    check_models(models, config)?;
    let gray: GrayImage = img.to_grayscale();
    let mut trace = Vec::with_capacity(Stage::ALL.len());

    let (mser_boxes, geo) = candidate_regions(img, config)?;
    trace.push(StageTrace {
        stage: Stage::Mser,
        boxes: mser_boxes,
    });
    trace.push(StageTrace {
        stage: Stage::Geometric,
        boxes: geo.iter().map(|c| c.bbox()).collect(),
    });

    let kept = patch_svm_filter(&gray, geo, &models.patch, &config.patch)?;
    trace.push(StageTrace {
        stage: Stage::PatchSvm,
        boxes: kept.iter().map(|c| c.bbox()).collect(),
    });

    let lines = link_candidates(&kept, config);
    trace.push(StageTrace {
        stage: Stage::Linking,
        boxes: lines.iter().map(|l| l.bbox).collect(),
    });

    let verified = line_svm_filter(&gray, lines, &models.line, &config.hog)?;
    let boxes: Vec<DetectedBox> = verified
        .iter()
        .map(|l| DetectedBox {
            bbox: l.bbox,
            stage: Stage::LineSvm,
        })
        .collect();
    trace.push(StageTrace {
        stage: Stage::LineSvm,
        boxes: boxes.iter().map(|b| b.bbox).collect(),
    });

    Ok(DetectionResult {
        image_id: image_id.to_string(),
        boxes,
        trace,
    })
}
