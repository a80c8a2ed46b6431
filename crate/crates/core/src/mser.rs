//! Maximally stable extremal regions over a component tree, plus the
//! channel-enhanced variant that runs every colour plane in both polarities
//! and fuses the results.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{BoundingBox, GrayImage, Image, Point};

/// Which side of the threshold a region lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    /// Dark on bright: the region holds samples `<= level`.
    Dark,
    /// Bright on dark: the region holds samples `>= level`.
    Bright,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Dark => "dark",
            Polarity::Bright => "bright",
        })
    }
}

/// Plane a region was detected on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SourceChannel {
    Gray,
    Channel(u8),
}

impl fmt::Display for SourceChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceChannel::Gray => f.write_str("gray"),
            SourceChannel::Channel(0) => f.write_str("r"),
            SourceChannel::Channel(1) => f.write_str("g"),
            SourceChannel::Channel(2) => f.write_str("b"),
            SourceChannel::Channel(i) => write!(f, "c{i}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MserParams {
    /// Level offset used by the stability score.
    pub delta: u8,
    pub min_area: usize,
    /// Upper area gate as a fraction of the plane.
    pub max_area_fraction: f64,
    pub max_variation: f64,
    /// Mask IoU at or above which cross-channel detections are merged.
    pub dedup_iou: f64,
    /// Nested regions on one branch whose relative area difference is below
    /// this are treated as one region.
    pub min_diversity: f64,
}

impl Default for MserParams {
    fn default() -> Self {
        MserParams {
            delta: 5,
            min_area: 30,
            max_area_fraction: 0.25,
            max_variation: 0.5,
            dedup_iou: 0.7,
            min_diversity: 0.2,
        }
    }
}

impl MserParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("mser: {m}")));
        if self.delta < 1 {
            return bad("delta must be >= 1");
        }
        if self.min_area == 0 {
            return bad("min_area must be positive");
        }
        if !(self.max_area_fraction > 0.0 && self.max_area_fraction <= 1.0) {
            return bad("max_area_fraction must lie in (0, 1]");
        }
        if !(self.max_variation > 0.0) {
            return bad("max_variation must be positive");
        }
        if !(self.dedup_iou > 0.0 && self.dedup_iou <= 1.0) {
            return bad("dedup_iou must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.min_diversity) {
            return bad("min_diversity must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalRegion {
    /// Member pixels, sorted by `(x, y)`.
    pub pixels: Vec<Point>,
    pub bbox: BoundingBox,
    /// Threshold in the source plane's own intensity scale.
    pub level: u8,
    pub variation: f64,
    pub polarity: Polarity,
    pub source: SourceChannel,
}

impl ExtremalRegion {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    /// Builds a region from an arbitrary pixel set (sorted internally).
    pub fn from_pixels(mut pixels: Vec<Point>) -> Option<Self> {
        pixels.sort_unstable();
        pixels.dedup();
        let bbox = BoundingBox::enclosing(&pixels)?;
        Some(ExtremalRegion {
            pixels,
            bbox,
            level: 0,
            variation: 0.0,
            polarity: Polarity::Dark,
            source: SourceChannel::Gray,
        })
    }

    /// Debug line: `channel polarity level variation x y w h area`.
    pub fn dump_line(&self) -> String {
        format!(
            "{} {} {} {:.6} {} {} {} {} {}",
            self.source,
            self.polarity,
            self.level,
            self.variation,
            self.bbox.x,
            self.bbox.y,
            self.bbox.w,
            self.bbox.h,
            self.area()
        )
    }

    fn ordering_key(&self) -> (SourceChannel, Polarity, u8, Point) {
        (self.source, self.polarity, self.level, self.pixels[0])
    }
}

const NO_NODE: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    /// Level in the polarity-normalised domain (dark regions grow upward).
    level: u8,
    parent: u32,
    area: u32,
    /// Offset of this subtree's pixels in `ComponentTree::pixels`.
    start: u32,
    /// Largest child, which continues this node's branch downward.
    branch_child: u32,
}

/// Nesting hierarchy of the connected components of every threshold set of
/// one plane, 4-connected.
///
/// Levels are stored normalised so components always grow with the level:
/// for [`Polarity::Bright`] a normalised level `t` selects samples
/// `>= 255 - t`.
#[derive(Debug, Clone)]
pub struct ComponentTree {
    width: u32,
    height: u32,
    polarity: Polarity,
    source: SourceChannel,
    nodes: Vec<Node>,
    /// Pixel indices laid out so each node's subtree is contiguous.
    pixels: Vec<u32>,
}

fn find_root(zpar: &mut [u32], mut p: u32) -> u32 {
    while zpar[p as usize] != p {
        let gp = zpar[zpar[p as usize] as usize];
        zpar[p as usize] = gp;
        p = gp;
    }
    p
}

/// Builds the component tree of `plane` by union-find over pixels sorted by
/// level.
pub fn build_component_tree(plane: &GrayImage, polarity: Polarity) -> ComponentTree {
    let (w, h) = (plane.width() as usize, plane.height() as usize);
    let n = w * h;
    let values: Vec<u8> = match polarity {
        Polarity::Dark => plane.data().to_vec(),
        Polarity::Bright => plane.data().iter().map(|&v| 255 - v).collect(),
    };

    // Counting sort, ascending level, raster order within a level.
    let mut counts = [0usize; 257];
    for &v in &values {
        counts[v as usize + 1] += 1;
    }
    for i in 1..257 {
        counts[i] += counts[i - 1];
    }
    let mut order = vec![0u32; n];
    for (p, &v) in values.iter().enumerate() {
        order[counts[v as usize]] = p as u32;
        counts[v as usize] += 1;
    }

    let mut parent = vec![0u32; n];
    let mut zpar = vec![NO_NODE; n];
    for &p in &order {
        parent[p as usize] = p;
        zpar[p as usize] = p;
        let (x, y) = (p as usize % w, p as usize / w);
        let mut neighbours = [NO_NODE; 4];
        if x > 0 {
            neighbours[0] = p - 1;
        }
        if x + 1 < w {
            neighbours[1] = p + 1;
        }
        if y > 0 {
            neighbours[2] = p - w as u32;
        }
        if y + 1 < h {
            neighbours[3] = p + w as u32;
        }
        for q in neighbours {
            if q == NO_NODE || zpar[q as usize] == NO_NODE {
                continue;
            }
            let r = find_root(&mut zpar, q);
            if r != p {
                parent[r as usize] = p;
                zpar[r as usize] = p;
            }
        }
    }

    // Point every pixel at the canonical element of its level component.
    for &p in order.iter().rev() {
        let q = parent[p as usize];
        let pq = parent[q as usize];
        if values[pq as usize] == values[q as usize] {
            parent[p as usize] = pq;
        }
    }

    let root = *order.last().expect("plane is non-empty");
    let is_canonical =
        |p: u32| p == root || values[parent[p as usize] as usize] != values[p as usize];

    let mut node_of = vec![NO_NODE; n];
    let mut nodes: Vec<Node> = Vec::new();
    for &p in &order {
        if is_canonical(p) {
            node_of[p as usize] = nodes.len() as u32;
            nodes.push(Node {
                level: values[p as usize],
                parent: NO_NODE,
                area: 0,
                start: 0,
                branch_child: NO_NODE,
            });
        }
    }
    for &p in &order {
        if !is_canonical(p) {
            node_of[p as usize] = node_of[parent[p as usize] as usize];
        } else if p != root {
            let id = node_of[p as usize] as usize;
            nodes[id].parent = node_of[parent[p as usize] as usize];
        }
    }

    let mut own = vec![0u32; nodes.len()];
    for &id in &node_of {
        own[id as usize] += 1;
    }
    // Children always carry lower ids than their parents.
    for id in 0..nodes.len() {
        nodes[id].area += own[id];
        let parent = nodes[id].parent;
        if parent != NO_NODE {
            let area = nodes[id].area;
            let pnode = &mut nodes[parent as usize];
            pnode.area += area;
            let bc = pnode.branch_child;
            if bc == NO_NODE || nodes[bc as usize].area < area {
                nodes[parent as usize].branch_child = id as u32;
            }
        }
    }

    let mut cursor = vec![0u32; nodes.len()];
    for id in (0..nodes.len()).rev() {
        let parent = nodes[id].parent;
        if parent != NO_NODE {
            nodes[id].start = cursor[parent as usize];
            cursor[parent as usize] += nodes[id].area;
        }
        cursor[id] = nodes[id].start + own[id];
    }
    // Own pixels sit at the front of every node's range.
    let mut fill: Vec<u32> = nodes.iter().map(|n| n.start).collect();
    let mut pixels = vec![0u32; n];
    for (p, &id) in node_of.iter().enumerate() {
        pixels[fill[id as usize] as usize] = p as u32;
        fill[id as usize] += 1;
    }

    ComponentTree {
        width: plane.width(),
        height: plane.height(),
        polarity,
        source: SourceChannel::Gray,
        nodes,
        pixels,
    }
}

/// Identifier of a node within its [`ComponentTree`].
pub type NodeId = usize;

impl ComponentTree {
    pub fn with_source(mut self, source: SourceChannel) -> Self {
        self.source = source;
        self
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn source(&self) -> SourceChannel {
        self.source
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> NodeId {
        self.nodes.len() - 1
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        let p = self.nodes[id].parent;
        (p != NO_NODE).then_some(p as usize)
    }

    pub fn area(&self, id: NodeId) -> usize {
        self.nodes[id].area as usize
    }

    /// Normalised level at which the component first appears.
    pub fn level(&self, id: NodeId) -> u8 {
        self.nodes[id].level
    }

    /// Raster indices of every pixel in the component (unordered).
    pub fn node_pixels(&self, id: NodeId) -> &[u32] {
        let n = &self.nodes[id];
        &self.pixels[n.start as usize..(n.start + n.area) as usize]
    }

    /// Whether `inner` lies in the subtree of `outer` (or is it).
    pub fn is_descendant(&self, inner: NodeId, outer: NodeId) -> bool {
        let (a, b) = (&self.nodes[inner], &self.nodes[outer]);
        a.start >= b.start && a.start + a.area <= b.start + b.area
    }

    /// Components of the threshold set at normalised level `t`.
    pub fn cut(&self, t: u8) -> Vec<NodeId> {
        (0..self.nodes.len())
            .filter(|&id| {
                let n = &self.nodes[id];
                n.level <= t && (n.parent == NO_NODE || self.nodes[n.parent as usize].level > t)
            })
            .collect()
    }

    fn branch_child(&self, id: NodeId) -> Option<NodeId> {
        let c = self.nodes[id].branch_child;
        (c != NO_NODE).then_some(c as usize)
    }

    /// Minimum stability score over the levels a node spans, with the level
    /// attaining it.
    fn node_variation(&self, id: NodeId, delta: u8) -> (f64, u8) {
        let node = &self.nodes[id];
        let lo = node.level;
        let hi = match self.parent(id) {
            Some(p) => self.nodes[p].level - 1,
            None => u8::MAX,
        };
        let area = f64::from(node.area);
        let delta = i32::from(delta);

        // Branch below this node, down to the first level at or under lo - delta.
        let floor = i32::from(lo) - delta;
        let mut chain = Vec::new();
        let mut d = self.branch_child(id);
        while let Some(c) = d {
            chain.push(c);
            if i32::from(self.nodes[c].level) <= floor {
                break;
            }
            d = self.branch_child(c);
        }

        let mut ancestor = id;
        let mut best = (f64::INFINITY, lo);
        for t in lo..=hi {
            let up = (i32::from(t) + delta).min(255);
            while let Some(p) = self.parent(ancestor) {
                if i32::from(self.nodes[p].level) <= up {
                    ancestor = p;
                } else {
                    break;
                }
            }
            let down = i32::from(t) - delta;
            let below = if down >= i32::from(lo) {
                node.area
            } else {
                chain
                    .iter()
                    .find(|&&c| i32::from(self.nodes[c].level) <= down)
                    .map_or(0, |&c| self.nodes[c].area)
            };
            let v = f64::from(self.nodes[ancestor].area - below) / area;
            if v < best.0 {
                best = (v, t);
            }
        }
        best
    }

    fn region(&self, id: NodeId, variation: f64, level: u8) -> ExtremalRegion {
        let w = self.width;
        let mut pixels: Vec<Point> = self
            .node_pixels(id)
            .iter()
            .map(|&p| Point::new(p % w, p / w))
            .collect();
        pixels.sort_unstable();
        let bbox = BoundingBox::enclosing(&pixels).expect("components are non-empty");
        ExtremalRegion {
            pixels,
            bbox,
            level: match self.polarity {
                Polarity::Dark => level,
                Polarity::Bright => 255 - level,
            },
            variation,
            polarity: self.polarity,
            source: self.source,
        }
    }
}

/// Selects the maximally stable components of a tree.
pub fn stable_regions(tree: &ComponentTree, params: &MserParams) -> Vec<ExtremalRegion> {
    let n_pixels = tree.width as usize * tree.height as usize;
    let max_area = (params.max_area_fraction * n_pixels as f64).floor() as usize;
    let scores: Vec<(f64, u8)> = (0..tree.len())
        .map(|id| tree.node_variation(id, params.delta))
        .collect();

    let mut candidates: Vec<NodeId> = (0..tree.len())
        .filter(|&id| {
            let area = tree.area(id);
            let v = scores[id].0;
            area >= params.min_area
                && area <= max_area
                && v <= params.max_variation
                && tree.parent(id).map_or(true, |p| v <= scores[p].0)
                && tree.branch_child(id).map_or(true, |c| v <= scores[c].0)
        })
        .collect();
    candidates.sort_by(|&a, &b| {
        scores[a]
            .0
            .total_cmp(&scores[b].0)
            .then(tree.area(b).cmp(&tree.area(a)))
            .then(a.cmp(&b))
    });

    let keep_ratio = 1.0 - params.min_diversity;
    let mut accepted: Vec<NodeId> = Vec::new();
    for c in candidates {
        let duplicate = accepted.iter().any(|&a| {
            let (inner, outer) = if tree.is_descendant(c, a) {
                (c, a)
            } else if tree.is_descendant(a, c) {
                (a, c)
            } else {
                return false;
            };
            tree.area(inner) as f64 / tree.area(outer) as f64 > keep_ratio
        });
        if !duplicate {
            accepted.push(c);
        }
    }

    let mut regions: Vec<ExtremalRegion> = accepted
        .into_iter()
        .map(|id| tree.region(id, scores[id].0, scores[id].1))
        .collect();
    regions.sort_by(|a, b| a.ordering_key().cmp(&b.ordering_key()));
    regions
}

/// Intersection-over-union of two sorted pixel masks.
pub fn mask_iou(a: &[Point], b: &[Point]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Collapses regions whose masks overlap with IoU at or above `threshold`,
/// keeping the lower variation, then the larger area, then the lower source
/// channel. Output uses the stable ordering
/// `(source, polarity, level, leftmost-topmost pixel)`.
pub fn dedup_regions(mut regions: Vec<ExtremalRegion>, threshold: f64) -> Vec<ExtremalRegion> {
    regions.sort_by(|a, b| {
        a.variation
            .total_cmp(&b.variation)
            .then(b.area().cmp(&a.area()))
            .then(a.ordering_key().cmp(&b.ordering_key()))
    });
    let mut kept: Vec<ExtremalRegion> = Vec::new();
    for r in regions {
        let clash = kept.iter().any(|k| {
            let (small, large) = if k.area() < r.area() {
                (k.area(), r.area())
            } else {
                (r.area(), k.area())
            };
            if (small as f64) < threshold * large as f64 || k.bbox.intersection_area(&r.bbox) == 0 {
                return false;
            }
            mask_iou(&k.pixels, &r.pixels) >= threshold
        });
        if !clash {
            kept.push(r);
        }
    }
    kept.sort_by(|a, b| a.ordering_key().cmp(&b.ordering_key()));
    kept
}

/// Stable regions of every colour plane in both polarities, fused by mask-IoU
/// deduplication. One-channel images run their single plane.
pub fn channel_enhanced_mser(img: &Image, params: &MserParams) -> Vec<ExtremalRegion> {
    let planes: Vec<(SourceChannel, GrayImage)> = if img.channels() == 3 {
        (0..3)
            .map(|c| {
                (
                    SourceChannel::Channel(c),
                    img.extract_channel(c).expect("channel index in range"),
                )
            })
            .collect()
    } else {
        vec![(SourceChannel::Gray, img.to_grayscale())]
    };
    let runs: Vec<(usize, Polarity)> = (0..planes.len())
        .flat_map(|i| [(i, Polarity::Dark), (i, Polarity::Bright)])
        .collect();
    let all: Vec<ExtremalRegion> = runs
        .par_iter()
        .map(|&(i, polarity)| {
            let (source, plane) = &planes[i];
            let tree = build_component_tree(plane, polarity).with_source(*source);
            stable_regions(&tree, params)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    dedup_regions(all, params.dedup_iou)
}
