//! Chamfer distance transform and radius erosion over cell grids.

use crate::grid::Grid;

/// 8-neighbourhood chamfer distance (axial 1, diagonal sqrt(2)) in cell
/// units from every cell to the nearest cell where `is_seed` holds.
/// Cells with no seed anywhere stay at infinity.
pub fn chamfer_distance(
    width: usize,
    height: usize,
    mut is_seed: impl FnMut(usize, usize) -> bool,
) -> Grid<f64> {
    let mut d = Grid::new(width, height, f64::INFINITY);
    for y in 0..height {
        for x in 0..width {
            if is_seed(x, y) {
                d.set(x, y, 0.0);
            }
        }
    }
    let diag = std::f64::consts::SQRT_2;
    // forward pass: upper-left half stencil
    for y in 0..height {
        for x in 0..width {
            let mut best = *d.get(x, y);
            if x > 0 {
                best = best.min(d.get(x - 1, y) + 1.0);
            }
            if y > 0 {
                best = best.min(d.get(x, y - 1) + 1.0);
                if x > 0 {
                    best = best.min(d.get(x - 1, y - 1) + diag);
                }
                if x + 1 < width {
                    best = best.min(d.get(x + 1, y - 1) + diag);
                }
            }
            d.set(x, y, best);
        }
    }
    // backward pass: lower-right half stencil
    for y in (0..height).rev() {
        for x in (0..width).rev() {
            let mut best = *d.get(x, y);
            if x + 1 < width {
                best = best.min(d.get(x + 1, y) + 1.0);
            }
            if y + 1 < height {
                best = best.min(d.get(x, y + 1) + 1.0);
                if x + 1 < width {
                    best = best.min(d.get(x + 1, y + 1) + diag);
                }
                if x > 0 {
                    best = best.min(d.get(x - 1, y + 1) + diag);
                }
            }
            d.set(x, y, best);
        }
    }
    d
}

/// Cells whose chamfer distance to the nearest obstacle leaves room for a
/// disc of `radius_cells`: the disc fits with its center anywhere inside
/// the cell when `distance >= radius_cells + 0.5`.
pub fn erode_by_radius(
    width: usize,
    height: usize,
    is_obstacle: impl FnMut(usize, usize) -> bool,
    radius_cells: f64,
) -> Grid<bool> {
    let d = chamfer_distance(width, height, is_obstacle);
    let threshold = radius_cells + 0.5;
    let mut out = Grid::new(width, height, false);
    for y in 0..height {
        for x in 0..width {
            out.set(x, y, *d.get(x, y) >= threshold);
        }
    }
    out
}
