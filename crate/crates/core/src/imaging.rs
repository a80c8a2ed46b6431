//! Raster types, colour conversion and binary PGM/PPM I/O.
//!
//! Samples are 8-bit. Multi-channel images are stored channel-planar
//! (all of plane 0, then plane 1, ...), each plane row-major with a
//! top-left origin and y growing downward.

use crate::error::{Error, Result};

/// Axis-aligned box in pixel coordinates, `x`/`y` the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BoundingBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BoundingBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        debug_assert!(w > 0 && h > 0, "bounding box must be non-empty");
        BoundingBox { x, y, w, h }
    }

    /// Exclusive right edge.
    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    /// Exclusive bottom edge.
    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> u64 {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        if x1 <= x0 || y1 <= y0 {
            0
        } else {
            u64::from(x1 - x0) * u64::from(y1 - y0)
        }
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        let x0 = self.x.min(other.x);
        let y0 = self.y.min(other.y);
        let x1 = self.right().max(other.right());
        let y1 = self.bottom().max(other.bottom());
        BoundingBox::new(x0, y0, x1 - x0, y1 - y0)
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.w > 0 && self.h > 0 && self.right() <= width && self.bottom() <= height
    }

    /// Twice the centre coordinates, kept integral so comparisons are exact.
    pub fn doubled_center(&self) -> (i64, i64) {
        (
            2 * i64::from(self.x) + i64::from(self.w),
            2 * i64::from(self.y) + i64::from(self.h),
        )
    }

    pub fn center(&self) -> (f64, f64) {
        (
            f64::from(self.x) + f64::from(self.w) / 2.0,
            f64::from(self.y) + f64::from(self.h) / 2.0,
        )
    }

    /// Tight bounds of a non-empty point set.
    pub fn enclosing(points: &[Point]) -> Option<BoundingBox> {
        let first = points.first()?;
        let (mut x0, mut y0, mut x1, mut y1) = (first.x, first.y, first.x, first.y);
        for p in &points[1..] {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x);
            y1 = y1.max(p.y);
        }
        Some(BoundingBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    pub x: u32,
    pub y: u32,
}

impl Point {
    pub fn new(x: u32, y: u32) -> Self {
        Point { x, y }
    }
}

/// Single-channel 8-bit raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width as usize * height as usize {
            return Err(Error::Argument(format!(
                "expected {} samples for {width}x{height}, got {}",
                width as usize * height as usize,
                data.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        GrayImage {
            width,
            height,
            data: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        self.data[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn crop(&self, bbox: &BoundingBox) -> Result<GrayImage> {
        if !bbox.fits_within(self.width, self.height) {
            return Err(Error::Argument(format!(
                "box {bbox:?} outside {}x{} image",
                self.width, self.height
            )));
        }
        Ok(GrayImage::from_fn(bbox.w, bbox.h, |x, y| {
            self.get(bbox.x + x, bbox.y + y)
        }))
    }

    /// Bilinear resampling with pixel-centre alignment and clamped borders.
    pub fn resize_bilinear(&self, width: u32, height: u32) -> GrayImage {
        assert!(
            width > 0 && height > 0,
            "target dimensions must be positive"
        );
        if width == self.width && height == self.height {
            return self.clone();
        }
        let sx = f64::from(self.width) / f64::from(width);
        let sy = f64::from(self.height) / f64::from(height);
        let max_x = f64::from(self.width - 1);
        let max_y = f64::from(self.height - 1);
        let xs: Vec<(u32, u32, f64)> = (0..width)
            .map(|x| axis_taps((f64::from(x) + 0.5) * sx - 0.5, max_x))
            .collect();
        GrayImage::from_fn(width, height, |x, y| {
            let (y0, y1, fy) = axis_taps((f64::from(y) + 0.5) * sy - 0.5, max_y);
            let (x0, x1, fx) = xs[x as usize];
            let top = f64::from(self.get(x0, y0)) * (1.0 - fx) + f64::from(self.get(x1, y0)) * fx;
            let bot = f64::from(self.get(x0, y1)) * (1.0 - fx) + f64::from(self.get(x1, y1)) * fx;
            round_sample(top * (1.0 - fy) + bot * fy)
        })
    }
}

fn axis_taps(src: f64, max: f64) -> (u32, u32, f64) {
    let s = src.clamp(0.0, max);
    let lo = s.floor();
    let hi = (lo + 1.0).min(max);
    (lo as u32, hi as u32, s - lo)
}

/// Round half up and clamp into the sample range.
#[inline]
pub(crate) fn round_sample(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// 8-bit raster with one or three channel-planar channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Argument(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::Argument(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(Error::Argument(format!(
                "expected {expected} samples, got {}",
                data.len()
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds a three-channel image from interleaved RGB triples.
    pub fn from_rgb_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let plane = width as usize * height as usize;
        let mut data = vec![0u8; plane * 3];
        for y in 0..height {
            for x in 0..width {
                let i = y as usize * width as usize + x as usize;
                let [r, g, b] = f(x, y);
                data[i] = r;
                data[plane + i] = g;
                data[2 * plane + i] = b;
            }
        }
        Image {
            width,
            height,
            channels: 3,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    fn plane_len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn plane(&self, idx: u8) -> &[u8] {
        let n = self.plane_len();
        &self.data[idx as usize * n..(idx as usize + 1) * n]
    }

    pub fn get(&self, x: u32, y: u32, channel: u8) -> u8 {
        self.plane(channel)[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, channel: u8, v: u8) {
        let n = self.plane_len();
        self.data[channel as usize * n + y as usize * self.width as usize + x as usize] = v;
    }

    /// BT.601 luma, rounded half up. One-channel images are copied.
    pub fn to_grayscale(&self) -> GrayImage {
        let data = if self.channels == 1 {
            self.data.clone()
        } else {
            let (r, g, b) = (self.plane(0), self.plane(1), self.plane(2));
            r.iter()
                .zip(g)
                .zip(b)
                .map(|((&r, &g), &b)| {
                    let luma = 299 * u32::from(r) + 587 * u32::from(g) + 114 * u32::from(b);
                    ((luma + 500) / 1000).min(255) as u8
                })
                .collect()
        };
        GrayImage {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn extract_channel(&self, idx: u8) -> Result<GrayImage> {
        if idx >= self.channels {
            return Err(Error::Argument(format!(
                "channel {idx} requested from a {}-channel image",
                self.channels
            )));
        }
        Ok(GrayImage {
            width: self.width,
            height: self.height,
            data: self.plane(idx).to_vec(),
        })
    }
}

impl From<GrayImage> for Image {
    fn from(g: GrayImage) -> Self {
        Image {
            width: g.width,
            height: g.height,
            channels: 1,
            data: g.data,
        }
    }
}

/// Free-function form of [`Image::to_grayscale`].
pub fn to_grayscale(img: &Image) -> GrayImage {
    img.to_grayscale()
}

/// Free-function form of [`Image::extract_channel`].
pub fn extract_channel(img: &Image, idx: u8) -> Result<GrayImage> {
    img.extract_channel(idx)
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    token_start: usize,
}

impl HeaderReader<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        self.token_start = start;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(if self.pos >= self.bytes.len() {
                Error::format(self.pos, format!("header ends before {what}"))
            } else {
                Error::format(self.pos, format!("expected decimal {what}"))
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(start, format!("{what} out of range")))
    }
}

/// Parses a binary PGM (P5) or PPM (P6) stream with maxval 255.
pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 {
        return Err(Error::format(0, "missing magic number"));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1u8,
        b"P6" => 3u8,
        _ => return Err(Error::format(0, "expected magic P5 or P6")),
    };
    let mut rd = HeaderReader {
        bytes,
        pos: 2,
        token_start: 2,
    };
    if rd.pos < bytes.len() && !bytes[rd.pos].is_ascii_whitespace() && bytes[rd.pos] != b'#' {
        return Err(Error::format(rd.pos, "expected whitespace after magic"));
    }
    let width = rd.number("width")?;
    let height = rd.number("height")?;
    let maxval = rd.number("maxval")?;
    let maxval_at = rd.token_start;
    if width == 0 || height == 0 {
        return Err(Error::format(maxval_at, "zero image dimension"));
    }
    if maxval != 255 {
        return Err(Error::format(
            maxval_at,
            format!("unsupported maxval {maxval}, only 255 is accepted"),
        ));
    }
    match bytes.get(rd.pos) {
        Some(b) if b.is_ascii_whitespace() => rd.pos += 1,
        Some(_) => return Err(Error::format(rd.pos, "expected whitespace after maxval")),
        None => return Err(Error::format(rd.pos, "truncated header")),
    }
    let plane = width as usize * height as usize;
    let need = plane * channels as usize;
    let payload = &bytes[rd.pos..];
    if payload.len() < need {
        return Err(Error::format(
            bytes.len(),
            format!(
                "truncated payload: expected {need} bytes, found {}",
                payload.len()
            ),
        ));
    }
    let data = if channels == 1 {
        payload[..need].to_vec()
    } else {
        let mut planar = vec![0u8; need];
        for (i, px) in payload[..need].chunks_exact(3).enumerate() {
            planar[i] = px[0];
            planar[plane + i] = px[1];
            planar[2 * plane + i] = px[2];
        }
        planar
    };
    Image::new(width, height, channels, data)
}

/// Serialises to P5 (one channel) or P6 (three channels), maxval 255.
pub fn encode_image(img: &Image) -> Vec<u8> {
    let magic = if img.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    if img.channels == 1 {
        out.extend_from_slice(&img.data);
    } else {
        let (r, g, b) = (img.plane(0), img.plane(1), img.plane(2));
        out.reserve(img.data.len());
        for i in 0..img.plane_len() {
            out.extend_from_slice(&[r[i], g[i], b[i]]);
        }
    }
    out
}

pub fn read_image(path: impl AsRef<std::path::Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_image(&bytes)
}

pub fn write_image(path: impl AsRef<std::path::Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_image(img)).map_err(|e| Error::io(path, e))
}
