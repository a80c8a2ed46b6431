//! Region and line gates: the geometric heuristic filter, the patch SVM on
//! 42×46 region crops, and the HOG line SVM applied after linking.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{compute_features, GeometricFeatures};
use crate::hog::{hog_descriptor, normalize_line_window, HogParams};
use crate::imaging::{BoundingBox, GrayImage, Image};
use crate::linking::TextLine;
use crate::mser::ExtremalRegion;
use crate::svm::SvmModel;

/// An extracted region together with its geometric description.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionCandidate {
    pub region: ExtremalRegion,
    pub features: GeometricFeatures,
}

impl RegionCandidate {
    pub fn new(region: ExtremalRegion) -> Result<Self> {
        let features = compute_features(&region)?;
        Ok(RegionCandidate { region, features })
    }

    pub fn bbox(&self) -> BoundingBox {
        self.region.bbox
    }
}

/// Inclusive accept intervals for each geometric feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricThresholds {
    pub aspect_min: f64,
    pub aspect_max: f64,
    pub eccentricity_max: f64,
    pub solidity_min: f64,
    pub extent_min: f64,
    pub extent_max: f64,
    pub euler_min: i32,
    pub stroke_cv_max: f64,
}

impl Default for GeometricThresholds {
    fn default() -> Self {
        GeometricThresholds {
            aspect_min: 0.1,
            aspect_max: 10.0,
            eccentricity_max: 0.995,
            solidity_min: 0.3,
            extent_min: 0.2,
            extent_max: 1.0,
            euler_min: -4,
            stroke_cv_max: 0.5,
        }
    }
}

impl GeometricThresholds {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.aspect_min,
            self.aspect_max,
            self.eccentricity_max,
            self.solidity_min,
            self.extent_min,
            self.extent_max,
            self.stroke_cv_max,
        ];
        if all.iter().any(|v| v.is_nan()) {
            return Err(Error::Config("geo: thresholds must not be NaN".into()));
        }
        if self.aspect_min > self.aspect_max {
            return Err(Error::Config("geo: aspect_min exceeds aspect_max".into()));
        }
        if self.extent_min > self.extent_max {
            return Err(Error::Config("geo: extent_min exceeds extent_max".into()));
        }
        Ok(())
    }

    pub fn accepts(&self, f: &GeometricFeatures) -> bool {
        (self.aspect_min..=self.aspect_max).contains(&f.aspect_ratio)
            && f.eccentricity <= self.eccentricity_max
            && f.solidity >= self.solidity_min
            && (self.extent_min..=self.extent_max).contains(&f.extent)
            && f.euler_number >= self.euler_min
            && f.stroke_width_cv <= self.stroke_cv_max
    }

    /// True when every interval of `self` lies inside the matching interval
    /// of `other`.
    pub fn is_within(&self, other: &GeometricThresholds) -> bool {
        self.aspect_min >= other.aspect_min
            && self.aspect_max <= other.aspect_max
            && self.eccentricity_max <= other.eccentricity_max
            && self.solidity_min >= other.solidity_min
            && self.extent_min >= other.extent_min
            && self.extent_max <= other.extent_max
            && self.euler_min >= other.euler_min
            && self.stroke_cv_max <= other.stroke_cv_max
    }
}

pub fn geometric_filter(
    candidates: Vec<RegionCandidate>,
    th: &GeometricThresholds,
) -> Vec<RegionCandidate> {
    candidates
        .into_iter()
        .filter(|c| th.accepts(&c.features))
        .collect()
}

/// Patch geometry for the region classifier, width first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchSpec {
    pub width: u32,
    pub height: u32,
}

impl Default for PatchSpec {
    fn default() -> Self {
        PatchSpec {
            width: 42,
            height: 46,
        }
    }
}

impl PatchSpec {
    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Config(
                "patch: width and height must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> String {
        format!("patch:{}x{}:zscore", self.width, self.height)
    }
}

/// Zero-mean, unit-variance raster of a patch; a constant patch maps to
/// zeros.
pub fn standardize(samples: &[u8]) -> Vec<f64> {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|&v| f64::from(v)).sum::<f64>() / n;
    let var = samples
        .iter()
        .map(|&v| (f64::from(v) - mean).powi(2))
        .sum::<f64>()
        / n;
    if var <= 0.0 {
        return vec![0.0; samples.len()];
    }
    let sd = var.sqrt();
    samples
        .iter()
        .map(|&v| (f64::from(v) - mean) / sd)
        .collect()
}

/// Crops `bbox` from a grayscale image and resizes it to the patch size.
pub fn patch_image(gray: &GrayImage, bbox: &BoundingBox, spec: &PatchSpec) -> Result<GrayImage> {
    Ok(gray.crop(bbox)?.resize_bilinear(spec.width, spec.height))
}

pub fn patch_features(gray: &GrayImage, bbox: &BoundingBox, spec: &PatchSpec) -> Result<Vec<f64>> {
    Ok(standardize(patch_image(gray, bbox, spec)?.data()))
}

pub fn extract_patch(img: &Image, region: &ExtremalRegion, spec: &PatchSpec) -> Result<Vec<f64>> {
    patch_features(&img.to_grayscale(), &region.bbox, spec)
}

fn check_dim(model: &SvmModel, expected: usize, what: &str) -> Result<()> {
    if model.dim != expected {
        return Err(Error::Config(format!(
            "{what} model expects {}-dimensional features, extractor produces {expected}",
            model.dim
        )));
    }
    Ok(())
}

pub fn patch_svm_filter(
    gray: &GrayImage,
    candidates: Vec<RegionCandidate>,
    model: &SvmModel,
    spec: &PatchSpec,
) -> Result<Vec<RegionCandidate>> {
    check_dim(model, spec.len(), "patch")?;
    let keep = candidates
        .par_iter()
        .map(|c| Ok(model.decision_value(&patch_features(gray, &c.bbox(), spec)?)? > 0.0))
        .collect::<Result<Vec<bool>>>()?;
    Ok(candidates
        .into_iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(c))
        .collect())
}

/// HOG descriptor of a line crop, rescaled so its squared norm equals its
/// length; an all-zero descriptor stays zero.
pub fn line_features(gray: &GrayImage, bbox: &BoundingBox, hp: &HogParams) -> Result<Vec<f64>> {
    window_features(&normalize_line_window(&gray.crop(bbox)?, hp), hp)
}

/// [`line_features`] of a crop already fitted to the HOG window.
pub fn window_features(window: &GrayImage, hp: &HogParams) -> Result<Vec<f64>> {
    let mut d = hog_descriptor(window, hp)?;
    let sq: f64 = d.iter().map(|v| v * v).sum();
    if sq > 0.0 {
        let k = (d.len() as f64 / sq).sqrt();
        d.iter_mut().for_each(|v| *v *= k);
    }
    Ok(d)
}

pub fn line_svm_filter(
    gray: &GrayImage,
    lines: Vec<TextLine>,
    model: &SvmModel,
    hp: &HogParams,
) -> Result<Vec<TextLine>> {
    hp.validate()?;
    check_dim(model, hp.descriptor_len(), "line")?;
    let keep = lines
        .par_iter()
        .map(|l| Ok(model.decision_value(&line_features(gray, &l.bbox, hp)?)? > 0.0))
        .collect::<Result<Vec<bool>>>()?;
    Ok(lines
        .into_iter()
        .zip(keep)
        .filter_map(|(l, k)| k.then_some(l))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Point;
    use crate::linking::link_lines;
    use proptest::prelude::*;

    fn candidate(points: Vec<Point>) -> RegionCandidate {
        RegionCandidate::new(ExtremalRegion::from_pixels(points).unwrap()).unwrap()
    }

    fn rect(x0: u32, y0: u32, w: u32, h: u32) -> Vec<Point> {
        (x0..x0 + w)
            .flat_map(|x| (y0..y0 + h).map(move |y| Point::new(x, y)))
            .collect()
    }

    #[test]
    fn square_kept_run_dropped() {
        let th = GeometricThresholds::default();
        let kept = geometric_filter(
            vec![candidate(rect(0, 0, 10, 10)), candidate(rect(0, 20, 50, 1))],
            &th,
        );
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].bbox(), BoundingBox::new(0, 0, 10, 10));
        assert!(geometric_filter(Vec::new(), &th).is_empty());
    }

    #[test]
    fn standardized_patch_statistics() {
        let spec = PatchSpec::default();
        assert_eq!(spec.len(), 1932);
        let gray = GrayImage::from_fn(42, 46, |x, y| ((x * 7 + y * 13) % 256) as u8);
        let v = patch_features(&gray, &BoundingBox::new(0, 0, 42, 46), &spec).unwrap();
        assert_eq!(v.len(), 1932);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
        assert!(mean.abs() <= 1e-9);
        assert!((var - 1.0).abs() <= 1e-6);

        let flat = GrayImage::filled(60, 60, 90);
        let z = patch_features(&flat, &BoundingBox::new(5, 5, 20, 9), &spec).unwrap();
        assert_eq!(z.len(), 1932);
        assert!(z.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn patch_outside_image() {
        let img = Image::from(GrayImage::filled(20, 20, 0));
        let region = ExtremalRegion::from_pixels(rect(15, 15, 5, 5)).unwrap();
        assert!(extract_patch(&img, &region, &PatchSpec::default()).is_ok());
        let mut outside = region.clone();
        outside.bbox = BoundingBox::new(18, 18, 5, 5);
        assert!(matches!(
            extract_patch(&img, &outside, &PatchSpec::default()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn constant_patch_models() {
        let gray = GrayImage::from_fn(60, 60, |x, y| ((x * y) % 256) as u8);
        let spec = PatchSpec::default();
        let cands = vec![
            candidate(rect(2, 2, 10, 10)),
            candidate(rect(30, 30, 8, 12)),
        ];
        let all =
            patch_svm_filter(&gray, cands.clone(), &SvmModel::constant(1932, true), &spec).unwrap();
        assert_eq!(all, cands);
        let none = patch_svm_filter(
            &gray,
            cands.clone(),
            &SvmModel::constant(1932, false),
            &spec,
        )
        .unwrap();
        assert!(none.is_empty());
        assert!(matches!(
            patch_svm_filter(&gray, cands, &SvmModel::constant(10, true), &spec),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn constant_line_models() {
        let gray = GrayImage::from_fn(120, 60, |x, y| ((x * 3 + y * 5) % 256) as u8);
        let hp = HogParams::default();
        let lines = link_lines(&[
            BoundingBox::new(10, 10, 10, 12),
            BoundingBox::new(24, 10, 10, 12),
            BoundingBox::new(60, 40, 8, 10),
            BoundingBox::new(70, 41, 8, 10),
        ]);
        assert_eq!(lines.len(), 2);
        let dim = hp.descriptor_len();
        let kept =
            line_svm_filter(&gray, lines.clone(), &SvmModel::constant(dim, true), &hp).unwrap();
        assert_eq!(kept, lines);
        assert!(
            line_svm_filter(&gray, lines.clone(), &SvmModel::constant(dim, false), &hp)
                .unwrap()
                .is_empty()
        );
        assert!(matches!(
            line_svm_filter(&gray, lines, &SvmModel::constant(1932, true), &hp),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn line_feature_norm() {
        let gray = GrayImage::from_fn(
            100,
            40,
            |x, y| if (x / 6 + y / 9) % 2 == 0 { 20 } else { 220 },
        );
        let hp = HogParams::default();
        let f = line_features(&gray, &BoundingBox::new(5, 5, 80, 30), &hp).unwrap();
        let sq: f64 = f.iter().map(|v| v * v).sum();
        assert!((sq - f.len() as f64).abs() < 1e-6);
        let flat = GrayImage::filled(100, 40, 3);
        let z = line_features(&flat, &BoundingBox::new(0, 0, 100, 40), &hp).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    fn arb_features() -> impl Strategy<Value = GeometricFeatures> {
        (
            1usize..500,
            0.01f64..20.0,
            0.0f64..1.0,
            0.0f64..=1.0,
            0.0f64..=1.0,
            -8i32..3,
            0.5f64..10.0,
            0.0f64..1.5,
        )
            .prop_map(
                |(area, ar, ecc, sol, ext, euler, swm, cv)| GeometricFeatures {
                    area,
                    aspect_ratio: ar,
                    eccentricity: ecc,
                    solidity: sol,
                    extent: ext,
                    euler_number: euler,
                    stroke_width_mean: swm,
                    stroke_width_cv: cv,
                },
            )
    }

    fn arb_pair() -> impl Strategy<Value = (GeometricThresholds, GeometricThresholds)> {
        let interval = |lo: f64, hi: f64| {
            (lo..hi, lo..hi).prop_map(|(a, b): (f64, f64)| if a <= b { (a, b) } else { (b, a) })
        };
        (
            (interval(0.01, 20.0), interval(0.01, 20.0)),
            (interval(0.0, 1.0), interval(0.0, 1.0)),
            (interval(0.0, 1.0), interval(0.0, 1.0)),
            (interval(0.0, 1.0), interval(0.0, 1.0)),
            (-8i32..3, -8i32..3),
            (interval(0.0, 1.5), interval(0.0, 1.5)),
        )
            .prop_map(|(ar, ecc, sol, ext, eu, cv)| {
                // The first interval lies inside the hull of both.
                let nest = |(a, b): ((f64, f64), (f64, f64))| ((a.0.min(b.0), a.1.max(b.1)), a);
                let (ar_o, ar_i) = nest(ar);
                let (ext_o, ext_i) = nest(ext);
                let loose = GeometricThresholds {
                    aspect_min: ar_o.0,
                    aspect_max: ar_o.1,
                    eccentricity_max: ecc.0 .1.max(ecc.1 .1),
                    solidity_min: sol.0 .0.min(sol.1 .0),
                    extent_min: ext_o.0,
                    extent_max: ext_o.1,
                    euler_min: eu.0.min(eu.1),
                    stroke_cv_max: cv.0 .1.max(cv.1 .1),
                };
                let tight = GeometricThresholds {
                    aspect_min: ar_i.0,
                    aspect_max: ar_i.1,
                    eccentricity_max: ecc.0 .1.min(ecc.1 .1),
                    solidity_min: sol.0 .0.max(sol.1 .0),
                    extent_min: ext_i.0,
                    extent_max: ext_i.1,
                    euler_min: eu.0.max(eu.1),
                    stroke_cv_max: cv.0 .1.min(cv.1 .1),
                };
                (loose, tight)
            })
    }

    proptest! {
        #[test]
        fn tighter_thresholds_keep_a_subset(
            (loose, tight) in arb_pair(),
            feats in proptest::collection::vec(arb_features(), 0..40),
        ) {
            prop_assert!(tight.is_within(&loose));
            let region = ExtremalRegion::from_pixels(vec![Point::new(0, 0)]).unwrap();
            let cands: Vec<RegionCandidate> = feats
                .iter()
                .map(|&features| RegionCandidate { region: region.clone(), features })
                .collect();
            let keep_loose: Vec<bool> = cands.iter().map(|c| loose.accepts(&c.features)).collect();
            let keep_tight: Vec<bool> = cands.iter().map(|c| tight.accepts(&c.features)).collect();
            for (l, t) in keep_loose.iter().zip(&keep_tight) {
                prop_assert!(!t || *l);
            }
            let kept = geometric_filter(cands.clone(), &tight);
            // Order-preserving subsequence of the input.
            let expected: Vec<GeometricFeatures> = cands
                .iter()
                .zip(&keep_tight)
                .filter(|(_, &k)| k)
                .map(|(c, _)| c.features)
                .collect();
            let got: Vec<GeometricFeatures> = kept.iter().map(|c| c.features).collect();
            prop_assert_eq!(got, expected);
        }
    }
}
