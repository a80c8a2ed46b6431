//! Histogram of oriented gradients over a fixed-size line window.

use crate::error::{Error, Result};
use crate::imaging::GrayImage;

#[derive(Debug, Clone, PartialEq)]
pub struct HogParams {
    pub window_w: u32,
    pub window_h: u32,
    /// Cell side in pixels.
    pub cell: u32,
    /// Block side in cells.
    pub block: u32,
    /// Block stride in pixels; a whole number of cells.
    pub stride: u32,
    /// Unsigned orientation bins over [0, 180) degrees.
    pub bins: u32,
    /// L2-Hys clipping value.
    pub clip: f64,
}

impl Default for HogParams {
    fn default() -> Self {
        HogParams {
            window_w: 96,
            window_h: 32,
            cell: 8,
            block: 2,
            stride: 8,
            bins: 9,
            clip: 0.2,
        }
    }
}

const NORM_EPS: f64 = 1e-12;

impl HogParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("hog: {m}")));
        if self.cell == 0 || self.block == 0 || self.stride == 0 || self.bins == 0 {
            return bad("cell, block, stride and bins must be positive".into());
        }
        if self.window_w == 0 || self.window_h == 0 {
            return bad("window must be non-empty".into());
        }
        if self.window_w % self.cell != 0 || self.window_h % self.cell != 0 {
            return bad(format!(
                "window {}x{} is not divisible by cell {}",
                self.window_w, self.window_h, self.cell
            ));
        }
        if self.stride % self.cell != 0 {
            return bad(format!(
                "stride {} is not a multiple of cell {}",
                self.stride, self.cell
            ));
        }
        let (cx, cy) = (self.window_w / self.cell, self.window_h / self.cell);
        if self.block > cx || self.block > cy {
            return bad(format!(
                "{}-cell block does not fit a {cx}x{cy} cell grid",
                self.block
            ));
        }
        if !(self.clip > 0.0) {
            return bad("clip must be positive".into());
        }
        Ok(())
    }

    fn blocks(&self) -> (u32, u32) {
        let step = self.stride / self.cell;
        let cx = self.window_w / self.cell;
        let cy = self.window_h / self.cell;
        ((cx - self.block) / step + 1, (cy - self.block) / step + 1)
    }

    pub fn descriptor_len(&self) -> usize {
        let (bx, by) = self.blocks();
        (bx * by * self.block * self.block * self.bins) as usize
    }

    /// Identifies the descriptor layout in saved line models.
    pub fn fingerprint(&self) -> String {
        format!(
            "hog:{}x{}:c{}:b{}:s{}:n{}:clip{}",
            self.window_w, self.window_h, self.cell, self.block, self.stride, self.bins, self.clip
        )
    }
}

pub fn hog_descriptor(window: &GrayImage, params: &HogParams) -> Result<Vec<f64>> {
    params.validate()?;
    if window.width() != params.window_w || window.height() != params.window_h {
        return Err(Error::Argument(format!(
            "HOG window must be {}x{}, got {}x{}",
            params.window_w,
            params.window_h,
            window.width(),
            window.height()
        )));
    }
    let (w, h) = (params.window_w, params.window_h);
    let cells_x = (w / params.cell) as usize;
    let cells_y = (h / params.cell) as usize;
    let bins = params.bins as usize;
    let bin_width = 180.0 / f64::from(params.bins);

    let mut hist = vec![0.0f64; cells_x * cells_y * bins];
    for y in 0..h {
        for x in 0..w {
            let gx = f64::from(window.get((x + 1).min(w - 1), y))
                - f64::from(window.get(x.saturating_sub(1), y));
            let gy = f64::from(window.get(x, (y + 1).min(h - 1)))
                - f64::from(window.get(x, y.saturating_sub(1)));
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let mut angle = gy.atan2(gx).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            if angle >= 180.0 {
                angle -= 180.0;
            }
            // Bin b is centred on b * bin_width.
            let pos = angle / bin_width;
            let base = pos.floor();
            let frac = pos - base;
            let lo = base as usize % bins;
            let hi = (lo + 1) % bins;
            let cell = (y / params.cell) as usize * cells_x + (x / params.cell) as usize;
            hist[cell * bins + lo] += mag * (1.0 - frac);
            hist[cell * bins + hi] += mag * frac;
        }
    }

    let (blocks_x, blocks_y) = params.blocks();
    let step = (params.stride / params.cell) as usize;
    let block = params.block as usize;
    let mut out = Vec::with_capacity(params.descriptor_len());
    let mut v = Vec::with_capacity(block * block * bins);
    for by in 0..blocks_y as usize {
        for bx in 0..blocks_x as usize {
            v.clear();
            for cy in by * step..by * step + block {
                for cx in bx * step..bx * step + block {
                    let c = cy * cells_x + cx;
                    v.extend_from_slice(&hist[c * bins..(c + 1) * bins]);
                }
            }
            l2_hys(&mut v, params.clip);
            out.extend_from_slice(&v);
        }
    }
    Ok(out)
}

fn l2_hys(v: &mut [f64], clip: f64) {
    let norm = (v.iter().map(|x| x * x).sum::<f64>() + NORM_EPS * NORM_EPS).sqrt();
    for x in v.iter_mut() {
        *x = (*x / norm).min(clip);
    }
    let norm = (v.iter().map(|x| x * x).sum::<f64>() + NORM_EPS * NORM_EPS).sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
}

/// Fits a variable-size line crop to the HOG window: bilinear resize to the
/// window height keeping aspect, then centre-crop or edge-replicate pad to
/// the window width.
pub fn normalize_line_window(line_crop: &GrayImage, params: &HogParams) -> GrayImage {
    let (tw, th) = (params.window_w, params.window_h);
    let scaled_w = (f64::from(line_crop.width()) * f64::from(th) / f64::from(line_crop.height()))
        .round()
        .max(1.0) as u32;
    let resized = line_crop.resize_bilinear(scaled_w, th);
    if scaled_w == tw {
        return resized;
    }
    if scaled_w > tw {
        let off = (scaled_w - tw) / 2;
        GrayImage::from_fn(tw, th, |x, y| resized.get(x + off, y))
    } else {
        let left = i64::from((tw - scaled_w) / 2);
        let last = i64::from(scaled_w) - 1;
        GrayImage::from_fn(tw, th, |x, y| {
            let sx = (i64::from(x) - left).clamp(0, last);
            resized.get(sx as u32, y)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_length() {
        let p = HogParams::default();
        assert_eq!(p.descriptor_len(), 1188);
        let d = hog_descriptor(&GrayImage::filled(96, 32, 17), &p).unwrap();
        assert_eq!(d.len(), 1188);
        assert!(d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_window_size() {
        let p = HogParams::default();
        assert!(matches!(
            hog_descriptor(&GrayImage::filled(95, 32, 0), &p),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn vertical_edge_votes_into_the_horizontal_gradient_bin() {
        let p = HogParams::default();
        let img = GrayImage::from_fn(96, 32, |x, _| if x < 48 { 0 } else { 255 });
        let d = hog_descriptor(&img, &p).unwrap();
        let total: f64 = d.iter().sum();
        let bin0: f64 = d.iter().step_by(9).sum();
        assert!(total > 0.0);
        assert!(bin0 / total >= 0.9, "bin 0 share {}", bin0 / total);
    }

    #[test]
    fn block_norms_are_bounded() {
        let p = HogParams::default();
        let img = GrayImage::from_fn(96, 32, |x, y| ((x * x + 3 * y * x + 7 * y) % 251) as u8);
        let d = hog_descriptor(&img, &p).unwrap();
        for block in d.chunks(36) {
            let n: f64 = block.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(n <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn params_validation() {
        let p = HogParams {
            window_w: 90,
            ..HogParams::default()
        };
        assert!(matches!(p.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn line_window_identity_and_halving() {
        let p = HogParams::default();
        let crop = GrayImage::from_fn(96, 32, |x, y| (x + y) as u8);
        assert_eq!(normalize_line_window(&crop, &p), crop);
        let big = GrayImage::from_fn(192, 64, |x, y| ((x * 5 + y * 3) % 256) as u8);
        assert_eq!(normalize_line_window(&big, &p), big.resize_bilinear(96, 32));
    }

    #[test]
    fn narrow_crop_is_padded_with_edge_columns() {
        let p = HogParams::default();
        let crop = GrayImage::from_fn(40, 32, |x, y| (x * 6 + y) as u8);
        let win = normalize_line_window(&crop, &p);
        assert_eq!((win.width(), win.height()), (96, 32));
        let left = 28;
        for y in 0..32 {
            for x in 0..96 {
                let expected = if x < left {
                    crop.get(0, y)
                } else if x >= left + 40 {
                    crop.get(39, y)
                } else {
                    crop.get(x - left, y)
                };
                assert_eq!(win.get(x, y), expected);
            }
        }
    }

    #[test]
    fn wide_crop_is_centre_cropped() {
        let p = HogParams::default();
        let crop = GrayImage::from_fn(200, 32, |x, _| (x % 256) as u8);
        let win = normalize_line_window(&crop, &p);
        assert_eq!(win.get(0, 0), 52);
        assert_eq!(win.get(95, 31), 147);
    }
}
