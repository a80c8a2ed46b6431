//! Geometric descriptors of a region mask: aspect ratio, eccentricity,
//! solidity, extent, Euler number and stroke-width statistics.

use crate::error::{Error, Result};
use crate::imaging::{BoundingBox, Point};
use crate::mser::ExtremalRegion;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricFeatures {
    pub area: usize,
    /// Bounding box width over height.
    pub aspect_ratio: f64,
    pub eccentricity: f64,
    pub solidity: f64,
    pub extent: f64,
    pub euler_number: i32,
    pub stroke_width_mean: f64,
    /// Standard deviation over mean of the sampled stroke widths.
    pub stroke_width_cv: f64,
}

impl GeometricFeatures {
    /// Feature dump line, fields in declaration order.
    pub fn dump_line(&self) -> String {
        format!(
            "{} {:.6} {:.6} {:.6} {:.6} {} {:.6} {:.6}",
            self.area,
            self.aspect_ratio,
            self.eccentricity,
            self.solidity,
            self.extent,
            self.euler_number,
            self.stroke_width_mean,
            self.stroke_width_cv
        )
    }
}

pub fn compute_features(region: &ExtremalRegion) -> Result<GeometricFeatures> {
    mask_features(&region.pixels)
}

/// Features of an arbitrary pixel set; duplicates are not allowed.
pub fn mask_features(mask: &[Point]) -> Result<GeometricFeatures> {
    let bbox = BoundingBox::enclosing(mask)
        .ok_or_else(|| Error::Argument("cannot describe an empty mask".into()))?;
    let grid = MaskGrid::new(mask, bbox);
    let (stroke_width_mean, stroke_width_cv) = grid.stroke_width_stats();
    Ok(GeometricFeatures {
        area: mask.len(),
        aspect_ratio: f64::from(bbox.w) / f64::from(bbox.h),
        eccentricity: eccentricity(mask),
        solidity: solidity(mask),
        extent: mask.len() as f64 / bbox.area() as f64,
        euler_number: grid.euler_number(),
        stroke_width_mean,
        stroke_width_cv,
    })
}

/// Eccentricity of the ellipse with the same second moments as the mask.
///
/// Pixels are treated as unit cells, so each axis variance carries the 1/12
/// of a uniform cell; a lone pixel is a circle and a one-pixel-wide run
/// stays just below 1.
pub fn eccentricity(mask: &[Point]) -> f64 {
    if mask.is_empty() {
        return 0.0;
    }
    let n = mask.len() as i128;
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0i128, 0i128, 0i128, 0i128, 0i128);
    for p in mask {
        let (x, y) = (i128::from(p.x), i128::from(p.y));
        sx += x;
        sy += y;
        sxx += x * x;
        syy += y * y;
        sxy += x * y;
    }
    // Exact integer central moments scaled by n^2.
    let n2 = (n * n) as f64;
    let a = (n * sxx - sx * sx) as f64 / n2 + 1.0 / 12.0;
    let c = (n * syy - sy * sy) as f64 / n2 + 1.0 / 12.0;
    let b = (n * sxy - sx * sy) as f64 / n2;
    let mean = (a + c) / 2.0;
    let half_diff = (a - c) / 2.0;
    let root = (half_diff * half_diff + b * b).sqrt();
    let major = mean + root;
    let minor = mean - root;
    if major <= 0.0 {
        return 0.0;
    }
    (1.0 - minor / major).max(0.0).sqrt()
}

/// Area over the area of the convex hull of the mask's pixel cells.
pub fn solidity(mask: &[Point]) -> f64 {
    let hull = hull_area_twice(mask);
    if hull == 0 {
        return 0.0;
    }
    (2 * mask.len() as i64) as f64 / hull as f64
}

/// Twice the area of the convex hull of all pixel-cell corners.
fn hull_area_twice(mask: &[Point]) -> i64 {
    let Some(bbox) = BoundingBox::enclosing(mask) else {
        return 0;
    };
    // Only the extreme cells of each row can contribute hull corners.
    let mut rows = vec![(u32::MAX, 0u32); bbox.h as usize];
    for p in mask {
        let r = &mut rows[(p.y - bbox.y) as usize];
        r.0 = r.0.min(p.x);
        r.1 = r.1.max(p.x);
    }
    let mut corners: Vec<(i64, i64)> = Vec::with_capacity(rows.len() * 4);
    for (dy, &(lo, hi)) in rows.iter().enumerate() {
        if lo == u32::MAX {
            continue;
        }
        let y = i64::from(bbox.y) + dy as i64;
        let (lo, hi) = (i64::from(lo), i64::from(hi) + 1);
        corners.extend_from_slice(&[(lo, y), (lo, y + 1), (hi, y), (hi, y + 1)]);
    }
    let hull = convex_hull(corners);
    let mut twice = 0i64;
    for i in 0..hull.len() {
        let (x0, y0) = hull[i];
        let (x1, y1) = hull[(i + 1) % hull.len()];
        twice += x0 * y1 - x1 * y0;
    }
    twice.abs()
}

/// Andrew's monotone chain; returns the hull counter-clockwise without
/// collinear points.
fn convex_hull(mut pts: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(pts.len() * 2);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// 4-connected components minus holes (8-connected background pockets).
pub fn euler_number(mask: &[Point]) -> i32 {
    match BoundingBox::enclosing(mask) {
        Some(bbox) => MaskGrid::new(mask, bbox).euler_number(),
        None => 0,
    }
}

/// Mean and coefficient of variation of stroke widths sampled on the ridge of
/// the Euclidean distance transform.
pub fn stroke_width_stats(mask: &[Point]) -> (f64, f64) {
    match BoundingBox::enclosing(mask) {
        Some(bbox) => MaskGrid::new(mask, bbox).stroke_width_stats(),
        None => (0.0, 0.0),
    }
}

/// Binary raster of a mask's bounding box with a one-cell background border.
struct MaskGrid {
    w: usize,
    h: usize,
    cells: Vec<bool>,
}

impl MaskGrid {
    fn new(mask: &[Point], bbox: BoundingBox) -> Self {
        let w = bbox.w as usize + 2;
        let h = bbox.h as usize + 2;
        let mut cells = vec![false; w * h];
        for p in mask {
            let x = (p.x - bbox.x) as usize + 1;
            let y = (p.y - bbox.y) as usize + 1;
            cells[y * w + x] = true;
        }
        MaskGrid { w, h, cells }
    }

    fn count_components(&self, value: bool, eight: bool) -> (usize, Vec<u32>) {
        let (w, h) = (self.w, self.h);
        let mut label = vec![u32::MAX; w * h];
        let mut count = 0usize;
        let mut stack = Vec::new();
        for s in 0..w * h {
            if self.cells[s] != value || label[s] != u32::MAX {
                continue;
            }
            label[s] = count as u32;
            stack.push(s);
            while let Some(p) = stack.pop() {
                let (x, y) = ((p % w) as isize, (p / w) as isize);
                for dy in -1isize..=1 {
                    for dx in -1isize..=1 {
                        if (dx == 0 && dy == 0) || (!eight && dx != 0 && dy != 0) {
                            continue;
                        }
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                            continue;
                        }
                        let q = ny as usize * w + nx as usize;
                        if self.cells[q] == value && label[q] == u32::MAX {
                            label[q] = count as u32;
                            stack.push(q);
                        }
                    }
                }
            }
            count += 1;
        }
        (count, label)
    }

    fn euler_number(&self) -> i32 {
        let (objects, _) = self.count_components(true, false);
        // The padded border is one background component; every other one is a hole.
        let (background, _) = self.count_components(false, true);
        objects as i32 - (background as i32 - 1)
    }

    /// Squared Euclidean distance from each cell to the nearest background
    /// cell centre (exact, separable lower-envelope transform).
    fn squared_distance(&self) -> Vec<f64> {
        let (w, h) = (self.w, self.h);
        let mut d: Vec<f64> = self
            .cells
            .iter()
            .map(|&fg| if fg { f64::INFINITY } else { 0.0 })
            .collect();
        let mut buf = vec![0.0; w.max(h)];
        let mut out = vec![0.0; w.max(h)];
        for x in 0..w {
            for y in 0..h {
                buf[y] = d[y * w + x];
            }
            lower_envelope(&buf[..h], &mut out[..h]);
            for y in 0..h {
                d[y * w + x] = out[y];
            }
        }
        for y in 0..h {
            buf[..w].copy_from_slice(&d[y * w..(y + 1) * w]);
            lower_envelope(&buf[..w], &mut out[..w]);
            d[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
        }
        d
    }

    fn stroke_width_stats(&self) -> (f64, f64) {
        let (w, h) = (self.w, self.h);
        let d2 = self.squared_distance();
        let mut widths = Vec::new();
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let i = y * w + x;
                if !self.cells[i] {
                    continue;
                }
                let ridge = (-1isize..=1).all(|dy| {
                    (-1isize..=1).all(|dx| {
                        let q = (y as isize + dy) as usize * w + (x as isize + dx) as usize;
                        d2[q] <= d2[i]
                    })
                });
                if ridge {
                    // Distance to the nearest background centre minus the half cell.
                    widths.push(2.0 * (d2[i].sqrt() - 0.5));
                }
            }
        }
        if widths.is_empty() {
            return (0.0, 0.0);
        }
        let n = widths.len() as f64;
        let mean = widths.iter().sum::<f64>() / n;
        let var = widths.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let cv = if mean > 0.0 { var.sqrt() / mean } else { 0.0 };
        (mean, cv)
    }
}

/// One-dimensional squared distance transform of a sampled function.
fn lower_envelope(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    let first = f.iter().position(|x| x.is_finite());
    let Some(first) = first else {
        out.fill(f64::INFINITY);
        return;
    };
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        let qf = q as f64;
        loop {
            let p = v[k] as f64;
            let s = ((f[q] + qf * qf) - (f[v[k]] + p * p)) / (2.0 * qf - 2.0 * p);
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        *o = (qf - p) * (qf - p) + f[v[k]];
    }
}
