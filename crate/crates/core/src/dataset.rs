//! Ground-truth annotations, id manifests, and labelled patch sets for the
//! two classifiers.
//!
//! Annotation files hold one text-line box per line as `x y w h`; blank
//! lines and `#` comments are skipped. Detector output uses the same format.
//! A scene directory holds `images/<id>.ppm` and `gt/<id>.txt`.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::eval::overlap_ratio;
use crate::filtering::{patch_image, PatchSpec};
use crate::hog::normalize_line_window;
use crate::imaging::{read_image, write_image, BoundingBox, GrayImage, Image};
use crate::pipeline::{candidate_regions, link_candidates};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Annotation {
    pub image_id: String,
    pub boxes: Vec<BoundingBox>,
}

impl Annotation {
    pub fn new(image_id: impl Into<String>, boxes: Vec<BoundingBox>) -> Self {
        Annotation {
            image_id: image_id.into(),
            boxes,
        }
    }

    pub fn parse(image_id: &str, text: &str) -> Result<Self> {
        let mut boxes = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 4 {
                return Err(Error::parse(
                    i + 1,
                    format!("expected `x y w h`, got {} fields", toks.len()),
                ));
            }
            let mut v = [0u32; 4];
            for (slot, tok) in v.iter_mut().zip(&toks) {
                *slot = match tok.parse::<i64>() {
                    Ok(n) if n < 0 => {
                        return Err(Error::parse(i + 1, format!("negative value `{tok}`")))
                    }
                    Ok(n) => u32::try_from(n)
                        .map_err(|_| Error::parse(i + 1, format!("value `{tok}` too large")))?,
                    Err(_) => return Err(Error::parse(i + 1, format!("not an integer: `{tok}`"))),
                };
            }
            if v[2] == 0 || v[3] == 0 {
                return Err(Error::parse(i + 1, "box width and height must be positive"));
            }
            boxes.push(BoundingBox::new(v[0], v[1], v[2], v[3]));
        }
        Ok(Annotation::new(image_id, boxes))
    }

    pub fn to_text(&self) -> String {
        self.boxes
            .iter()
            .map(|b| format!("{} {} {} {}\n", b.x, b.y, b.w, b.h))
            .collect()
    }

    pub fn check_within(&self, width: u32, height: u32) -> Result<()> {
        match self.boxes.iter().find(|b| !b.fits_within(width, height)) {
            Some(b) => Err(Error::Argument(format!(
                "{}: box {b:?} outside {width}x{height} image",
                self.image_id
            ))),
            None => Ok(()),
        }
    }
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reads an annotation; the image id is the file stem.
pub fn load_annotation(path: impl AsRef<Path>) -> Result<Annotation> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Annotation::parse(&file_stem(path), &text).map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

pub fn save_annotation(path: impl AsRef<Path>, ann: &Annotation) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, ann.to_text()).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

pub fn write_manifest(path: impl AsRef<Path>, ids: &[String]) -> Result<()> {
    let path = path.as_ref();
    let text: String = ids.iter().map(|id| format!("{id}\n")).collect();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn image_path(root: &Path, id: &str) -> PathBuf {
    root.join("images").join(format!("{id}.ppm"))
}

pub fn gt_path(root: &Path, id: &str) -> PathBuf {
    root.join("gt").join(format!("{id}.txt"))
}

/// Ids of every `<id>.txt` annotation in a directory, sorted.
pub fn annotation_ids(dir: &Path) -> Result<Vec<String>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut ids = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "txt") && path.is_file() {
            ids.push(file_stem(&path));
        }
    }
    ids.sort();
    Ok(ids)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchRecord {
    /// `+1` text, `-1` non-text.
    pub label: i8,
    pub image_id: String,
    pub bbox: BoundingBox,
}

/// Labelled grayscale patches of one fixed size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchDataset {
    pub width: u32,
    pub height: u32,
    pub positives: Vec<GrayImage>,
    pub negatives: Vec<GrayImage>,
    /// Positives' records first, then negatives', each in patch order.
    pub manifest: Vec<PatchRecord>,
    /// Negatives that could not be placed.
    pub warnings: usize,
}

impl PatchDataset {
    pub fn new(width: u32, height: u32) -> Self {
        PatchDataset {
            width,
            height,
            positives: Vec::new(),
            negatives: Vec::new(),
            manifest: Vec::new(),
            warnings: 0,
        }
    }

    fn push(&mut self, label: i8, patch: GrayImage, image_id: &str, bbox: BoundingBox) {
        debug_assert_eq!((patch.width(), patch.height()), (self.width, self.height));
        let record = PatchRecord {
            label,
            image_id: image_id.to_string(),
            bbox,
        };
        if label > 0 {
            let at = self.positives.len();
            self.positives.push(patch);
            self.manifest.insert(at, record);
        } else {
            self.negatives.push(patch);
            self.manifest.push(record);
        }
    }

    pub fn append(&mut self, other: PatchDataset) {
        let (pos, neg): (Vec<PatchRecord>, Vec<PatchRecord>) =
            other.manifest.into_iter().partition(|r| r.label > 0);
        let at = self.positives.len();
        self.manifest.splice(at..at, pos);
        self.manifest.extend(neg);
        self.positives.extend(other.positives);
        self.negatives.extend(other.negatives);
        self.warnings += other.warnings;
    }

    /// Feature vectors with `+1`/`-1` labels, positives first.
    pub fn labelled<F>(&self, mut features: F) -> Result<Vec<(Vec<f64>, i8)>>
    where
        F: FnMut(&GrayImage) -> Result<Vec<f64>>,
    {
        let mut out = Vec::with_capacity(self.positives.len() + self.negatives.len());
        for p in &self.positives {
            out.push((features(p)?, 1));
        }
        for n in &self.negatives {
            out.push((features(n)?, -1));
        }
        Ok(out)
    }
}

fn sheet_path(dir: &Path, name: &str, class: &str) -> PathBuf {
    dir.join(format!("{name}_{class}.pgm"))
}

fn manifest_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}_manifest.txt"))
}

/// Stacks patches vertically into one grayscale sheet.
fn to_sheet(patches: &[GrayImage], w: u32, h: u32) -> Result<Image> {
    let mut data = Vec::with_capacity(patches.len() * (w * h) as usize);
    for p in patches {
        data.extend_from_slice(p.data());
    }
    Ok(Image::from(GrayImage::new(
        w,
        h * patches.len() as u32,
        data,
    )?))
}

fn from_sheet(sheet: &Image, w: u32, h: u32, count: usize, path: &Path) -> Result<Vec<GrayImage>> {
    if sheet.channels() != 1 || sheet.width() != w || sheet.height() as usize != h as usize * count
    {
        return Err(Error::Argument(format!(
            "{}: expected a {w}x{} grayscale sheet",
            path.display(),
            h as usize * count
        )));
    }
    let n = (w * h) as usize;
    sheet
        .data()
        .chunks(n)
        .map(|c| GrayImage::new(w, h, c.to_vec()))
        .collect()
}

/// Writes `<name>_pos.pgm`, `<name>_neg.pgm` and `<name>_manifest.txt`.
pub fn write_patch_set(dir: impl AsRef<Path>, name: &str, set: &PatchDataset) -> Result<()> {
    let dir = dir.as_ref();
    let mut text = format!("# {} {}x{}\n", name, set.width, set.height);
    for r in &set.manifest {
        text.push_str(&format!(
            "{:+} {} {} {} {} {}\n",
            r.label, r.image_id, r.bbox.x, r.bbox.y, r.bbox.w, r.bbox.h
        ));
    }
    let mpath = manifest_path(dir, name);
    std::fs::write(&mpath, text).map_err(|e| Error::io(&mpath, e))?;
    for (class, patches) in [("pos", &set.positives), ("neg", &set.negatives)] {
        let path = sheet_path(dir, name, class);
        if patches.is_empty() {
            if path.exists() {
                std::fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
            continue;
        }
        write_image(&path, &to_sheet(patches, set.width, set.height)?)?;
    }
    Ok(())
}

pub fn read_patch_set(dir: impl AsRef<Path>, name: &str) -> Result<PatchDataset> {
    let dir = dir.as_ref();
    let mpath = manifest_path(dir, name);
    let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let mut lines = text.lines().enumerate();
    let (w, h) = lines
        .next()
        .and_then(|(_, l)| l.strip_prefix('#'))
        .and_then(|l| l.split_whitespace().nth(1))
        .and_then(|s| s.split_once('x'))
        .and_then(|(a, b)| Some((a.parse::<u32>().ok()?, b.parse::<u32>().ok()?)))
        .ok_or_else(|| {
            Error::parse(
                1,
                format!("{}: expected `# <name> <w>x<h>` header", mpath.display()),
            )
        })?;
    let mut set = PatchDataset::new(w, h);
    for (i, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let bad = || Error::parse(i + 1, format!("{}: malformed record", mpath.display()));
        if toks.len() != 6 {
            return Err(bad());
        }
        let label = match toks[0] {
            "+1" => 1,
            "-1" => -1,
            _ => return Err(bad()),
        };
        let mut v = [0u32; 4];
        for (slot, t) in v.iter_mut().zip(&toks[2..]) {
            *slot = t.parse().map_err(|_| bad())?;
        }
        set.manifest.push(PatchRecord {
            label,
            image_id: toks[1].to_string(),
            bbox: BoundingBox::new(v[0], v[1], v[2], v[3]),
        });
    }
    let npos = set.manifest.iter().filter(|r| r.label > 0).count();
    let nneg = set.manifest.len() - npos;
    if set.manifest[..npos].iter().any(|r| r.label < 0) {
        return Err(Error::parse(
            0,
            format!("{}: positives must precede negatives", mpath.display()),
        ));
    }
    for (class, count) in [("pos", npos), ("neg", nneg)] {
        if count == 0 {
            continue;
        }
        let path = sheet_path(dir, name, class);
        let patches = from_sheet(&read_image(&path)?, w, h, count, &path)?;
        if class == "pos" {
            set.positives = patches;
        } else {
            set.negatives = patches;
        }
    }
    Ok(set)
}

const PLACEMENT_ATTEMPTS: usize = 200;

/// Random `w`x`h` box accepted by `ok`, or `None` after bounded retries.
fn place_box(
    rng: &mut ChaCha8Rng,
    img_w: u32,
    img_h: u32,
    w: u32,
    h: u32,
    ok: impl Fn(&BoundingBox) -> bool,
) -> Option<BoundingBox> {
    if w == 0 || h == 0 || w > img_w || h > img_h {
        return None;
    }
    (0..PLACEMENT_ATTEMPTS).find_map(|_| {
        let b = BoundingBox::new(
            rng.gen_range(0..=img_w - w),
            rng.gen_range(0..=img_h - h),
            w,
            h,
        );
        ok(&b).then_some(b)
    })
}

const MAX_NEGATIVE_OVERLAP: f64 = 0.1;

/// Ground-truth patches: each annotated box resized to the patch size, plus
/// `negatives_per_positive` random same-size crops per box whose overlap
/// ratio with every annotated box is at most 0.1.
pub fn extract_patches(
    img: &Image,
    ann: &Annotation,
    negatives_per_positive: usize,
    seed: u64,
    spec: &PatchSpec,
) -> Result<PatchDataset> {
    ann.check_within(img.width(), img.height())?;
    let gray = img.to_grayscale();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = PatchDataset::new(spec.width, spec.height);
    for b in &ann.boxes {
        set.push(1, patch_image(&gray, b, spec)?, &ann.image_id, *b);
    }
    for b in &ann.boxes {
        for _ in 0..negatives_per_positive {
            let placed = place_box(&mut rng, img.width(), img.height(), b.w, b.h, |c| {
                ann.boxes
                    .iter()
                    .all(|g| overlap_ratio(g, c) <= MAX_NEGATIVE_OVERLAP)
            });
            match placed {
                Some(c) => set.push(-1, patch_image(&gray, &c, spec)?, &ann.image_id, c),
                None => set.warnings += 1,
            }
        }
    }
    Ok(set)
}

fn inside_fraction(inner: &BoundingBox, outer: &BoundingBox) -> f64 {
    inner.intersection_area(outer) as f64 / inner.area() as f64
}

const REGION_INSIDE_MIN: f64 = 0.8;

/// Region-level patches mined from the detector's own candidates: regions
/// lying at least 80% inside an annotated line are text, regions touching no
/// annotated line are non-text. Non-text is capped at
/// `negatives_per_positive` per positive and topped up with random
/// positive-sized crops clear of every annotated line.
pub fn mine_region_patches(
    img: &Image,
    ann: &Annotation,
    config: &PipelineConfig,
    negatives_per_positive: usize,
    seed: u64,
) -> Result<PatchDataset> {
    ann.check_within(img.width(), img.height())?;
    let gray = img.to_grayscale();
    let spec = &config.patch;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (_, candidates) = candidate_regions(img, config)?;
    let mut set = PatchDataset::new(spec.width, spec.height);
    let mut pool = Vec::new();
    for c in &candidates {
        let b = c.bbox();
        if ann
            .boxes
            .iter()
            .any(|g| inside_fraction(&b, g) >= REGION_INSIDE_MIN)
        {
            set.push(1, patch_image(&gray, &b, spec)?, &ann.image_id, b);
        } else if ann.boxes.iter().all(|g| g.intersection_area(&b) == 0) {
            pool.push(b);
        }
    }
    let sizes: Vec<(u32, u32)> = set.manifest.iter().map(|r| (r.bbox.w, r.bbox.h)).collect();
    let wanted = negatives_per_positive * sizes.len().max(1);
    pool.shuffle(&mut rng);
    pool.truncate(wanted);
    for b in &pool {
        set.push(-1, patch_image(&gray, b, spec)?, &ann.image_id, *b);
    }
    for k in pool.len()..wanted {
        let (w, h) = sizes
            .get(k % sizes.len().max(1))
            .copied()
            .unwrap_or((20, 20));
        let clear = |c: &BoundingBox| ann.boxes.iter().all(|g| g.intersection_area(c) == 0);
        match place_box(&mut rng, img.width(), img.height(), w, h, clear) {
            Some(c) => set.push(-1, patch_image(&gray, &c, spec)?, &ann.image_id, c),
            None => set.warnings += 1,
        }
    }
    Ok(set)
}

const LINE_MATCH_MIN: f64 = 0.5;

/// Copy of `b` with each edge moved by up to `frac` of the box height,
/// clamped to the image.
fn jitter_box(
    rng: &mut ChaCha8Rng,
    b: &BoundingBox,
    frac: f64,
    img_w: u32,
    img_h: u32,
) -> BoundingBox {
    let m = (f64::from(b.h) * frac).round() as i64;
    let mut d = || if m == 0 { 0 } else { rng.gen_range(-m..=m) };
    let x0 = (i64::from(b.x) + d()).clamp(0, i64::from(img_w) - 1);
    let y0 = (i64::from(b.y) + d()).clamp(0, i64::from(img_h) - 1);
    let x1 = (i64::from(b.right()) + d()).clamp(x0 + 1, i64::from(img_w));
    let y1 = (i64::from(b.bottom()) + d()).clamp(y0 + 1, i64::from(img_h));
    BoundingBox::new(x0 as u32, y0 as u32, (x1 - x0) as u32, (y1 - y0) as u32)
}

const JITTER_FRACTION: f64 = 0.15;

/// Line windows for the HOG classifier. Text: every annotated line, `jitter`
/// copies of it with edges moved by up to 15% of its height, and each linked
/// candidate line overlapping an annotation by more than 0.5. Non-text:
/// linked lines overlapping every annotation by at most 0.1, capped and
/// topped up with random line-shaped crops clear of every annotated line.
pub fn mine_line_windows(
    img: &Image,
    ann: &Annotation,
    config: &PipelineConfig,
    negatives_per_positive: usize,
    jitter: usize,
    seed: u64,
) -> Result<PatchDataset> {
    ann.check_within(img.width(), img.height())?;
    let gray = img.to_grayscale();
    let hp = &config.hog;
    let window =
        |b: &BoundingBox| -> Result<GrayImage> { Ok(normalize_line_window(&gray.crop(b)?, hp)) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = PatchDataset::new(hp.window_w, hp.window_h);
    for b in &ann.boxes {
        set.push(1, window(b)?, &ann.image_id, *b);
        for _ in 0..jitter {
            let j = jitter_box(&mut rng, b, JITTER_FRACTION, img.width(), img.height());
            set.push(1, window(&j)?, &ann.image_id, j);
        }
    }
    let (_, candidates) = candidate_regions(img, config)?;
    let mut pool = Vec::new();
    for line in link_candidates(&candidates, config) {
        let best = ann
            .boxes
            .iter()
            .map(|g| overlap_ratio(g, &line.bbox))
            .fold(0.0, f64::max);
        if best > LINE_MATCH_MIN {
            set.push(1, window(&line.bbox)?, &ann.image_id, line.bbox);
        } else if best <= MAX_NEGATIVE_OVERLAP {
            pool.push(line.bbox);
        }
    }
    let wanted = negatives_per_positive * set.positives.len().max(1);
    pool.shuffle(&mut rng);
    pool.truncate(wanted);
    for b in &pool {
        set.push(-1, window(b)?, &ann.image_id, *b);
    }
    let heights: Vec<u32> = ann.boxes.iter().map(|b| b.h).collect();
    for k in pool.len()..wanted {
        let h = heights.get(k % heights.len().max(1)).copied().unwrap_or(24);
        let w = (f64::from(h) * rng.gen_range(2.0..6.0)).round() as u32;
        let clear = |c: &BoundingBox| ann.boxes.iter().all(|g| g.intersection_area(c) == 0);
        match place_box(&mut rng, img.width(), img.height(), w, h, clear) {
            Some(c) => set.push(-1, window(&c)?, &ann.image_id, c),
            None => set.warnings += 1,
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_annotations() {
        let a = Annotation::parse("x", "10 20 30 40\n").unwrap();
        assert_eq!(a.boxes, vec![BoundingBox::new(10, 20, 30, 40)]);
        let b = Annotation::parse("x", "# header\n\n1 2 3 4\n").unwrap();
        assert_eq!(b.boxes, vec![BoundingBox::new(1, 2, 3, 4)]);
        assert_eq!(Annotation::parse("x", &b.to_text()).unwrap(), b);
    }

    #[test]
    fn annotation_errors_carry_line_numbers() {
        for (text, line) in [
            ("1 2 3\n", 1),
            ("1 2 3 4\n# ok\n1 2 -3 4\n", 3),
            ("\n1 2 3 4.5\n", 2),
            ("1 2 0 4\n", 1),
            ("1 2 3 4 5\n", 1),
        ] {
            match Annotation::parse("x", text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    fn scene() -> (Image, Annotation) {
        let img = Image::from_rgb_fn(160, 120, |x, y| {
            let v = ((x * 7 + y * 3) % 200) as u8;
            [v, v / 2, 255 - v]
        });
        let ann = Annotation::new(
            "s",
            vec![
                BoundingBox::new(10, 10, 40, 12),
                BoundingBox::new(80, 50, 50, 14),
                BoundingBox::new(20, 90, 30, 10),
            ],
        );
        (img, ann)
    }

    #[test]
    fn gt_patches_count_and_overlap() {
        let (img, ann) = scene();
        let spec = PatchSpec::default();
        let set = extract_patches(&img, &ann, 2, 5, &spec).unwrap();
        assert_eq!(set.positives.len(), 3);
        assert_eq!(set.negatives.len(), 6);
        assert_eq!(set.warnings, 0);
        for r in set.manifest.iter().filter(|r| r.label < 0) {
            for g in &ann.boxes {
                assert!(overlap_ratio(g, &r.bbox) <= 0.1);
            }
        }
        assert!(set
            .positives
            .iter()
            .all(|p| (p.width(), p.height()) == (42, 46)));
        assert_eq!(extract_patches(&img, &ann, 2, 5, &spec).unwrap(), set);
    }

    #[test]
    fn unplaceable_negatives_are_counted() {
        let img = Image::from(GrayImage::filled(40, 20, 9));
        let ann = Annotation::new("t", vec![BoundingBox::new(0, 0, 40, 20)]);
        let set = extract_patches(&img, &ann, 2, 0, &PatchSpec::default()).unwrap();
        assert_eq!(set.positives.len(), 1);
        assert!(set.negatives.is_empty());
        assert_eq!(set.warnings, 2);
    }

    #[test]
    fn patch_set_round_trip() {
        let (img, ann) = scene();
        let set = extract_patches(&img, &ann, 2, 1, &PatchSpec::default()).unwrap();
        let dir = std::env::temp_dir().join(format!("scenetext-ps-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        write_patch_set(&dir, "patch", &set).unwrap();
        let mut back = read_patch_set(&dir, "patch").unwrap();
        back.warnings = set.warnings;
        assert_eq!(back, set);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn append_keeps_positives_first() {
        let (img, ann) = scene();
        let spec = PatchSpec::default();
        let mut a = extract_patches(&img, &ann, 1, 1, &spec).unwrap();
        let b = extract_patches(&img, &ann, 1, 2, &spec).unwrap();
        a.append(b);
        assert_eq!(a.positives.len(), 6);
        assert_eq!(a.negatives.len(), 6);
        assert!(a.manifest[..6].iter().all(|r| r.label > 0));
        assert!(a.manifest[6..].iter().all(|r| r.label < 0));
    }
}
