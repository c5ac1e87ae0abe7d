//! Raster exports of every pipeline stage: binary PGM for grids and
//! graymaps, binary PPM for the graph overlay. Output is byte-stable for
//! a given input so renders can be diffed across runs.

use crate::explore_vi::CostMatrix;
use crate::geom::line_cells;
use crate::occupancy::{CellClass, CellClassMap, OccupancyGrid};
use crate::skeleton::BinaryImage;
use crate::topo_graph::NavGraph;

/// Encode an 8-bit binary PGM (P5).
pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), width * height);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Encode an 8-bit binary PPM (P6) from RGB triples.
pub fn encode_ppm(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    assert_eq!(rgb.len(), width * height * 3);
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(rgb);
    out
}

/// Occupancy belief: `round(255 * P(occ))`, never-observed cells exactly
/// 127.
pub fn render_grid(grid: &OccupancyGrid) -> Vec<u8> {
    let mut px = Vec::with_capacity(grid.width() * grid.height());
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            if grid.observed(x, y) {
                px.push((255.0 * grid.probability(x, y)).round() as u8);
            } else {
                px.push(127);
            }
        }
    }
    encode_pgm(grid.width(), grid.height(), &px)
}

/// Class map: FREE 255, UNKNOWN 127, OCCUPIED 0.
pub fn render_classmap(classmap: &CellClassMap) -> Vec<u8> {
    let mut px = Vec::with_capacity(classmap.width() * classmap.height());
    for y in 0..classmap.height() {
        for x in 0..classmap.width() {
            px.push(match classmap.class(x, y) {
                CellClass::Free => 255,
                CellClass::Unknown => 127,
                CellClass::Occupied => 0,
            });
        }
    }
    encode_pgm(classmap.width(), classmap.height(), &px)
}

/// Cost matrix: finite costs normalized into 1..=255 (near frontier =
/// dark), infinity rendered 0.
pub fn render_cost(cost: &CostMatrix) -> Vec<u8> {
    let mut max = 0.0f64;
    for y in 0..cost.height() {
        for x in 0..cost.width() {
            let v = cost.at(x, y);
            if v.is_finite() && v > max {
                max = v;
            }
        }
    }
    let mut px = Vec::with_capacity(cost.width() * cost.height());
    for y in 0..cost.height() {
        for x in 0..cost.width() {
            let v = cost.at(x, y);
            if v.is_finite() {
                let t = if max > 0.0 { v / max } else { 0.0 };
                px.push((1.0 + t * 254.0).round() as u8);
            } else {
                px.push(0);
            }
        }
    }
    encode_pgm(cost.width(), cost.height(), &px)
}

/// Skeleton overlay: eroded shape 80, skeleton 255, background 0.
pub fn render_skeleton(shape: &BinaryImage, skeleton: &BinaryImage) -> Vec<u8> {
    let w = shape.width();
    let h = shape.height();
    let mut px = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if skeleton.get(x as i64, y as i64) {
                px[i] = 255;
            } else if shape.get(x as i64, y as i64) {
                px[i] = 80;
            }
        }
    }
    encode_pgm(w, h, &px)
}

/// Graph overlay PPM: shape gray, skeleton dim blue, edges green lines,
/// nodes red 3x3 dots.
pub fn render_graph(shape: &BinaryImage, skeleton: &BinaryImage, graph: &NavGraph) -> Vec<u8> {
    let w = shape.width();
    let h = shape.height();
    let mut rgb = vec![0u8; w * h * 3];
    let mut put = |x: i64, y: i64, c: [u8; 3]| {
        if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
            let i = (y as usize * w + x as usize) * 3;
            rgb[i] = c[0];
            rgb[i + 1] = c[1];
            rgb[i + 2] = c[2];
        }
    };
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            if skeleton.get(x, y) {
                put(x, y, [60, 60, 120]);
            } else if shape.get(x, y) {
                put(x, y, [90, 90, 90]);
            }
        }
    }
    for e in &graph.edges {
        let a = &graph.nodes[e.a];
        let b = &graph.nodes[e.b];
        for (x, y) in line_cells(
            (a.x as i64, a.y as i64),
            (b.x as i64, b.y as i64),
        ) {
            put(x, y, [40, 220, 40]);
        }
    }
    for n in &graph.nodes {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                put(n.x as i64 + dx, n.y as i64 + dy, [230, 40, 40]);
            }
        }
    }
    encode_ppm(w, h, &rgb)
}
