//! Flat `key = value` pipeline configuration. Blank lines and `#` comments
//! are ignored; unknown keys are rejected.

use std::path::Path;

use crate::error::{Error, Result};
use crate::filtering::{GeometricThresholds, PatchSpec};
use crate::hog::HogParams;
use crate::linking::LinkRule;
use crate::mser::MserParams;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineConfig {
    pub mser: MserParams,
    pub geometric: GeometricThresholds,
    pub patch: PatchSpec,
    pub hog: HogParams,
    pub link: LinkRule,
}

fn value<T: std::str::FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::Config(format!("line {line}: invalid value `{raw}` for `{key}`")))
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.mser.validate()?;
        self.geometric.validate()?;
        self.patch.validate()?;
        self.hog.validate()?;
        let l = &self.link;
        if !(l.vertical_factor >= 0.0 && l.horizontal_factor >= 0.0) {
            return Err(Error::Config("link: factors must be non-negative".into()));
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, val) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {n}: expected `key = value`")))?;
            cfg.set(n, key, val)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, n: usize, key: &str, v: &str) -> Result<()> {
        match key {
            "mser.delta" => self.mser.delta = value(n, key, v)?,
            "mser.min_area" => self.mser.min_area = value(n, key, v)?,
            "mser.max_area_fraction" => self.mser.max_area_fraction = value(n, key, v)?,
            "mser.max_variation" => self.mser.max_variation = value(n, key, v)?,
            "mser.dedup_iou" => self.mser.dedup_iou = value(n, key, v)?,
            "mser.min_diversity" => self.mser.min_diversity = value(n, key, v)?,
            "geo.aspect_min" => self.geometric.aspect_min = value(n, key, v)?,
            "geo.aspect_max" => self.geometric.aspect_max = value(n, key, v)?,
            "geo.eccentricity_max" => self.geometric.eccentricity_max = value(n, key, v)?,
            "geo.solidity_min" => self.geometric.solidity_min = value(n, key, v)?,
            "geo.extent_min" => self.geometric.extent_min = value(n, key, v)?,
            "geo.extent_max" => self.geometric.extent_max = value(n, key, v)?,
            "geo.euler_min" => self.geometric.euler_min = value(n, key, v)?,
            "geo.stroke_cv_max" => self.geometric.stroke_cv_max = value(n, key, v)?,
            "patch.width" => self.patch.width = value(n, key, v)?,
            "patch.height" => self.patch.height = value(n, key, v)?,
            "hog.window_w" => self.hog.window_w = value(n, key, v)?,
            "hog.window_h" => self.hog.window_h = value(n, key, v)?,
            "hog.cell" => self.hog.cell = value(n, key, v)?,
            "hog.block" => self.hog.block = value(n, key, v)?,
            "hog.stride" => self.hog.stride = value(n, key, v)?,
            "hog.bins" => self.hog.bins = value(n, key, v)?,
            "hog.clip" => self.hog.clip = value(n, key, v)?,
            "link.vertical_factor" => self.link.vertical_factor = value(n, key, v)?,
            "link.horizontal_factor" => self.link.horizontal_factor = value(n, key, v)?,
            _ => return Err(Error::Config(format!("line {n}: unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Serializes every key; parsing the output yields an equal config.
    pub fn to_text(&self) -> String {
        let m = &self.mser;
        let g = &self.geometric;
        let h = &self.hog;
        let pairs: Vec<(&str, String)> = vec![
            ("mser.delta", m.delta.to_string()),
            ("mser.min_area", m.min_area.to_string()),
            ("mser.max_area_fraction", m.max_area_fraction.to_string()),
            ("mser.max_variation", m.max_variation.to_string()),
            ("mser.dedup_iou", m.dedup_iou.to_string()),
            ("mser.min_diversity", m.min_diversity.to_string()),
            ("geo.aspect_min", g.aspect_min.to_string()),
            ("geo.aspect_max", g.aspect_max.to_string()),
            ("geo.eccentricity_max", g.eccentricity_max.to_string()),
            ("geo.solidity_min", g.solidity_min.to_string()),
            ("geo.extent_min", g.extent_min.to_string()),
            ("geo.extent_max", g.extent_max.to_string()),
            ("geo.euler_min", g.euler_min.to_string()),
            ("geo.stroke_cv_max", g.stroke_cv_max.to_string()),
            ("patch.width", self.patch.width.to_string()),
            ("patch.height", self.patch.height.to_string()),
            ("hog.window_w", h.window_w.to_string()),
            ("hog.window_h", h.window_h.to_string()),
            ("hog.cell", h.cell.to_string()),
            ("hog.block", h.block.to_string()),
            ("hog.stride", h.stride.to_string()),
            ("hog.bins", h.bins.to_string()),
            ("hog.clip", h.clip.to_string()),
            (
                "link.vertical_factor",
                self.link.vertical_factor.to_string(),
            ),
            (
                "link.horizontal_factor",
                self.link.horizontal_factor.to_string(),
            ),
        ];
        pairs
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

pub fn read_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    PipelineConfig::parse(&text)
}
