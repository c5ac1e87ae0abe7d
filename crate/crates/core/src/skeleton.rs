//! Topology-preserving thinning of the explored free region.
//!
//! The free region is eroded by the robot radius and then iteratively
//! peeled: a pixel is deleted when its neighbour ring passes four safety
//! conditions, so line ends and region connections survive. Deletions
//! within one pass are simultaneous; every test reads the pre-pass image.

use crate::grid::Grid;
use crate::morph::chamfer_distance;
use crate::occupancy::{CellClass, CellClassMap};
use crate::params::Params;

/// One bit per pixel; 1 is shape, 0 background. The image border is kept
/// at 0 so a pass needs no bounds checks around shape pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryImage {
    bits: Grid<bool>,
}

/// The 8 neighbours of a pixel, labelled counter-clockwise: P2 directly
/// above, P3 up-left, P4 left, P5 down-left, P6 below, P7 down-right,
/// P8 right, P9 up-right.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborRing(pub [bool; 8]);

/// Ring offsets in (dx, dy), y growing downwards, in P2..P9 order.
const RING: [(i64, i64); 8] = [
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
];

impl BinaryImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            bits: Grid::new(width, height, false),
        }
    }

    pub fn width(&self) -> usize {
        self.bits.width()
    }

    pub fn height(&self) -> usize {
        self.bits.height()
    }

    #[inline]
    pub fn get(&self, x: i64, y: i64) -> bool {
        self.bits.in_bounds(x, y) && *self.bits.get(x as usize, y as usize)
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits.set(x, y, v);
    }

    pub fn count_ones(&self) -> usize {
        self.bits.as_slice().iter().filter(|b| **b).count()
    }

    /// Shape pixels in row-major order.
    pub fn ones(&self) -> Vec<(usize, usize)> {
        self.bits
            .iter_cells()
            .filter(|(_, _, b)| **b)
            .map(|(x, y, _)| (x, y))
            .collect()
    }

    /// The neighbour ring around a pixel.
    pub fn ring(&self, x: usize, y: usize) -> NeighborRing {
        let mut bits = [false; 8];
        for (i, (dx, dy)) in RING.iter().enumerate() {
            bits[i] = self.get(x as i64 + dx, y as i64 + dy);
        }
        NeighborRing(bits)
    }

    /// Number of shape pixels among the 8 neighbours.
    pub fn neighbor_count(&self, x: usize, y: usize) -> u32 {
        nz(&self.ring(x, y))
    }

    pub fn force_border_zero(&mut self) {
        let (w, h) = (self.width(), self.height());
        if w == 0 || h == 0 {
            return;
        }
        for x in 0..w {
            self.bits.set(x, 0, false);
            self.bits.set(x, h - 1, false);
        }
        for y in 0..h {
            self.bits.set(0, y, false);
            self.bits.set(w - 1, y, false);
        }
    }
}

/// Number of 0-to-1 steps around the cyclic sequence P2..P9, P2.
pub fn z0(ring: &NeighborRing) -> u32 {
    let b = &ring.0;
    let mut count = 0;
    for i in 0..8 {
        if !b[i] && b[(i + 1) % 8] {
            count += 1;
        }
    }
    count
}

/// Number of shape pixels among the 8 neighbours.
pub fn nz(ring: &NeighborRing) -> u32 {
    ring.0.iter().filter(|b| **b).count() as u32
}

/// Erode the FREE region by the robot radius so every remaining pixel is a
/// place the robot can stand; the nearest non-FREE cell and the image edge
/// both count as obstacles. The border is forced to 0.
pub fn binarize(classmap: &CellClassMap, params: &Params) -> BinaryImage {
    let w = classmap.width();
    let h = classmap.height();
    let d = chamfer_distance(w, h, |x, y| classmap.class(x, y) != CellClass::Free);
    let threshold = params.radius_cells(classmap.cell_size()) + 0.5;
    let mut img = BinaryImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            // outside the image counts as non-FREE too
            let edge = (x.min(y).min(w - 1 - x).min(h - 1 - y) + 1) as f64;
            if d.get(x, y).min(edge) >= threshold {
                img.set(x, y, true);
            }
        }
    }
    img.force_border_zero();
    img
}

/// Whether the four deletion conditions all hold for the pixel, given the
/// per-pixel transition counts of the pre-pass image.
fn deletable(img: &BinaryImage, z0_map: &Grid<u32>, x: usize, y: usize, literal: bool) -> bool {
    let ring = img.ring(x, y);
    let n = nz(&ring);
    if !(2..=6).contains(&n) {
        return false;
    }
    if z0(&ring) != 1 {
        return false;
    }
    let p2 = ring.0[0];
    let p4 = ring.0[2];
    let p6 = ring.0[4];
    let p8 = ring.0[6];
    // the guard consults Z0 at the up / left neighbours
    let guard = |gx: i64, gy: i64| -> bool {
        let z = if z0_map.in_bounds(gx, gy) {
            *z0_map.get(gx as usize, gy as usize)
        } else {
            0
        };
        if literal {
            z < 1
        } else {
            z != 1
        }
    };
    let cond3 = !(p2 && p4 && p8) || guard(x as i64, y as i64 - 1);
    let cond4 = !(p2 && p4 && p6) || guard(x as i64 - 1, y as i64);
    cond3 && cond4
}

/// One simultaneous thinning pass: transition counts are computed for all
/// pixels first, then every shape pixel passing the four conditions is
/// deleted. Returns the new image and the deletion count.
pub fn thin_pass(img: &BinaryImage, params: &Params) -> (BinaryImage, usize) {
    let w = img.width();
    let h = img.height();
    let mut z0_map = Grid::new(w, h, 0u32);
    for y in 0..h {
        for x in 0..w {
            z0_map.set(x, y, z0(&img.ring(x, y)));
        }
    }
    let mut out = img.clone();
    let mut deletions = 0;
    for y in 0..h {
        for x in 0..w {
            if img.get(x as i64, y as i64)
                && deletable(img, &z0_map, x, y, params.thin_literal_guard)
            {
                out.set(x, y, false);
                deletions += 1;
            }
        }
    }
    (out, deletions)
}

/// Repeat thinning passes until a pass deletes nothing.
pub fn thin(img: &BinaryImage, params: &Params) -> BinaryImage {
    let mut current = img.clone();
    loop {
        let (next, deletions) = thin_pass(&current, params);
        current = next;
        if deletions == 0 {
            return current;
        }
    }
}

/// Count connected components: 8-connectivity of shape pixels when `shape`
/// is true, 4-connectivity of background pixels otherwise.
pub fn count_components(img: &BinaryImage, shape: bool) -> usize {
    let w = img.width();
    let h = img.height();
    let mut seen = Grid::new(w, h, false);
    let mut components = 0;
    let mut stack = Vec::new();
    for sy in 0..h {
        for sx in 0..w {
            if img.get(sx as i64, sy as i64) != shape || *seen.get(sx, sy) {
                continue;
            }
            components += 1;
            seen.set(sx, sy, true);
            stack.push((sx, sy));
            while let Some((x, y)) = stack.pop() {
                let offsets: &[(i64, i64)] = if shape {
                    &crate::grid::NEIGHBORS_8
                } else {
                    &crate::grid::NEIGHBORS_4
                };
                for (dx, dy) in offsets {
                    let nx = x as i64 + dx;
                    let ny = y as i64 + dy;
                    if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if img.get(nx as i64, ny as i64) == shape && !*seen.get(nx, ny) {
                        seen.set(nx, ny, true);
                        stack.push((nx, ny));
                    }
                }
            }
        }
    }
    components
}

/// Parse an ASCII fixture: `#` or `1` are shape pixels.
#[doc(hidden)]
pub fn image_from_rows(rows: &[&str]) -> BinaryImage {
    let h = rows.len();
    let w = rows[0].len();
    let mut img = BinaryImage::new(w, h);
    for (y, row) in rows.iter().enumerate() {
        for (x, ch) in row.chars().enumerate() {
            if ch == '#' || ch == '1' {
                img.set(x, y, true);
            }
        }
    }
    img
}
