//! Groups character candidates into text lines with the centroid rule: two
//! candidates link when their centres differ vertically by at most the
//! smaller height and horizontally by at most twice the larger height.
//! Lines are the connected components of that relation.

use crate::imaging::BoundingBox;

#[derive(Debug, Clone, PartialEq)]
pub struct TextLine {
    /// Indices into the linked candidate list, right to left by centre x.
    pub members: Vec<usize>,
    pub bbox: BoundingBox,
    pub mean_height: f64,
}

/// Multipliers of the linking rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkRule {
    /// Allowed vertical centre offset, in units of the smaller height.
    pub vertical_factor: f64,
    /// Allowed horizontal centre offset, in units of the larger height.
    pub horizontal_factor: f64,
}

impl Default for LinkRule {
    fn default() -> Self {
        LinkRule {
            vertical_factor: 1.0,
            horizontal_factor: 2.0,
        }
    }
}

impl LinkRule {
    pub fn linkable(&self, a: &BoundingBox, b: &BoundingBox) -> bool {
        let (ax, ay) = a.doubled_center();
        let (bx, by) = b.doubled_center();
        let min_h = f64::from(a.h.min(b.h));
        let max_h = f64::from(a.h.max(b.h));
        // Doubled coordinates keep centres integral.
        ((ay - by).abs() as f64) <= 2.0 * self.vertical_factor * min_h
            && ((ax - bx).abs() as f64) <= 2.0 * self.horizontal_factor * max_h
    }
}

pub fn linkable(a: &BoundingBox, b: &BoundingBox) -> bool {
    LinkRule::default().linkable(a, b)
}

pub fn link_lines(regions: &[BoundingBox]) -> Vec<TextLine> {
    link_lines_with(regions, &LinkRule::default())
}

pub fn link_lines_with(regions: &[BoundingBox], rule: &LinkRule) -> Vec<TextLine> {
    let n = regions.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if rule.linkable(&regions[i], &regions[j]) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = find(&mut parent, i);
        groups[r].push(i);
    }
    let mut lines: Vec<TextLine> = groups
        .into_iter()
        .filter(|g| g.len() >= 2)
        .map(|mut members| {
            members.sort_by(|&a, &b| {
                let (ax, _) = regions[a].doubled_center();
                let (bx, _) = regions[b].doubled_center();
                bx.cmp(&ax).then(a.cmp(&b))
            });
            let bbox = members[1..]
                .iter()
                .fold(regions[members[0]], |acc, &m| acc.union(&regions[m]));
            let mean_height = members
                .iter()
                .map(|&m| f64::from(regions[m].h))
                .sum::<f64>()
                / members.len() as f64;
            TextLine {
                members,
                bbox,
                mean_height,
            }
        })
        .collect();
    lines.sort_by(|a, b| {
        (a.bbox.y, a.bbox.x)
            .cmp(&(b.bbox.y, b.bbox.x))
            .then(a.members.cmp(&b.members))
    });
    lines
}
