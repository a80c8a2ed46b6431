//! Overlap-ratio evaluation: a detection is a true positive when its
//! intersection-over-union with an unclaimed ground-truth box exceeds the
//! threshold (0.5 by default).

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::imaging::BoundingBox;
use crate::svm::SvmModel;

pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.5;

/// `Area(GT ∩ DT) / Area(GT ∪ DT)`.
pub fn overlap_ratio(gt: &BoundingBox, dt: &BoundingBox) -> f64 {
    let inter = gt.intersection_area(dt);
    let union = gt.area() + dt.area() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// Matched `(gt index, dt index)` pairs.
    pub assignment: Vec<(usize, usize)>,
}

/// Greedy one-to-one matching in descending overlap order; a pair counts only
/// when its ratio is strictly above `threshold`.
pub fn match_detections(gts: &[BoundingBox], dts: &[BoundingBox], threshold: f64) -> MatchResult {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (g, gt) in gts.iter().enumerate() {
        for (d, dt) in dts.iter().enumerate() {
            let r = overlap_ratio(gt, dt);
            if r > threshold {
                pairs.push((r, g, d));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut gt_used = vec![false; gts.len()];
    let mut dt_used = vec![false; dts.len()];
    let mut assignment = Vec::new();
    for (_, g, d) in pairs {
        if !gt_used[g] && !dt_used[d] {
            gt_used[g] = true;
            dt_used[d] = true;
            assignment.push((g, d));
        }
    }
    assignment.sort_unstable();
    let tp = assignment.len();
    MatchResult {
        tp,
        fp: dts.len() - tp,
        fn_: gts.len() - tp,
        assignment,
    }
}

/// Precision, recall and F-measure; each is 0 when its denominator is 0.
pub fn prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    (p, r, f_measure(p, r))
}

pub fn f_measure(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageEval {
    pub image_id: String,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub per_image: Vec<ImageEval>,
}

impl EvalReport {
    pub fn from_images(per_image: Vec<ImageEval>) -> Self {
        let (tp, fp, fn_) = per_image
            .iter()
            .fold((0, 0, 0), |(a, b, c), e| (a + e.tp, b + e.fp, c + e.fn_));
        let (precision, recall, f_measure) = prf(tp, fp, fn_);
        EvalReport {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f_measure,
            per_image,
        }
    }

    /// Evaluates `(image id, ground truth, detections)` triples.
    pub fn evaluate<'a, I>(images: I, threshold: f64) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a [BoundingBox], &'a [BoundingBox])>,
    {
        let per_image = images
            .into_iter()
            .map(|(id, gts, dts)| {
                let m = match_detections(gts, dts, threshold);
                ImageEval {
                    image_id: id.to_string(),
                    tp: m.tp,
                    fp: m.fp,
                    fn_: m.fn_,
                }
            })
            .collect();
        EvalReport::from_images(per_image)
    }

    /// Aligned plain-text table, one row per image plus a total.
    pub fn to_table(&self) -> String {
        let width = self
            .per_image
            .iter()
            .map(|e| e.image_id.len())
            .max()
            .unwrap_or(0)
            .max(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$} {:>5} {:>5} {:>5}",
            "image", "tp", "fp", "fn"
        );
        for e in &self.per_image {
            let _ = writeln!(
                out,
                "{:<width$} {:>5} {:>5} {:>5}",
                e.image_id, e.tp, e.fp, e.fn_
            );
        }
        let _ = writeln!(
            out,
            "{:<width$} {:>5} {:>5} {:>5}",
            "total", self.tp, self.fp, self.fn_
        );
        let _ = writeln!(
            out,
            "precision {:.4}  recall {:.4}  f-measure {:.4}",
            self.precision, self.recall, self.f_measure
        );
        out
    }

    pub fn to_key_values(&self) -> String {
        format!(
            "images={}\ntp={}\nfp={}\nfn={}\nprecision={:.6}\nrecall={:.6}\nf_measure={:.6}\n",
            self.per_image.len(),
            self.tp,
            self.fp,
            self.fn_,
            self.precision,
            self.recall,
            self.f_measure
        )
    }
}

/// Fraction of labelled vectors whose predicted sign matches the label.
pub fn classifier_accuracy(model: &SvmModel, labeled: &[(Vec<f64>, i8)]) -> Result<f64> {
    if labeled.is_empty() {
        return Err(Error::Argument("no labelled samples".into()));
    }
    let mut correct = 0usize;
    for (x, y) in labeled {
        if model.predict(x)? == *y {
            correct += 1;
        }
    }
    Ok(correct as f64 / labeled.len() as f64)
}
