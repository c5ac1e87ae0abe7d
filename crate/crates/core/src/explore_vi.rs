//! Baseline exploration controller: an iteratively relaxed cost matrix of
//! travel cost to the nearest frontier, turned into steering by blending
//! cost descent, heading inertia and scan-based obstacle avoidance.

use crate::geom::angle_diff;
use crate::grid::{Grid, NEIGHBORS_8};
use crate::morph::chamfer_distance;
use crate::occupancy::{CellClass, CellClassMap};
use crate::params::Params;
use crate::world::{Command, RobotState, SonarScan};

/// Per-cell travel cost (in step units) to the nearest frontier cell;
/// infinity where no frontier is reachable.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    cost: Grid<f64>,
    cell_size: f64,
}

impl CostMatrix {
    pub fn width(&self) -> usize {
        self.cost.width()
    }

    pub fn height(&self) -> usize {
        self.cost.height()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        *self.cost.get(x, y)
    }

    #[inline]
    pub fn at_checked(&self, x: i64, y: i64) -> f64 {
        if self.cost.in_bounds(x, y) {
            *self.cost.get(x as usize, y as usize)
        } else {
            f64::INFINITY
        }
    }

    /// The matrix is all-infinite when exploration has nowhere left to go.
    pub fn is_exhausted(&self) -> bool {
        self.cost.as_slice().iter().all(|c| c.is_infinite())
    }

    /// Total cell count: the paper-style entity count of this controller.
    pub fn entity_count(&self) -> usize {
        self.cost.len()
    }

    pub fn grid(&self) -> &Grid<f64> {
        &self.cost
    }
}

/// All FREE cells 8-adjacent to at least one UNKNOWN cell, row-major.
pub fn frontier_cells(classmap: &CellClassMap) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for y in 0..classmap.height() {
        for x in 0..classmap.width() {
            if classmap.class(x, y) != CellClass::Free {
                continue;
            }
            // only in-map UNKNOWN cells count; beyond the border there is
            // nothing to explore
            let adjacent_unknown = NEIGHBORS_8.iter().any(|(dx, dy)| {
                let nx = x as i64 + dx;
                let ny = y as i64 + dy;
                classmap.grid().in_bounds(nx, ny)
                    && classmap.class(nx as usize, ny as usize) == CellClass::Unknown
            });
            if adjacent_unknown {
                out.push((x, y));
            }
        }
    }
    out
}

/// FREE cells with disc clearance from OCCUPIED cells; where the relaxation
/// is allowed to travel.
fn traversable_mask(classmap: &CellClassMap, params: &Params) -> Grid<bool> {
    let d = chamfer_distance(classmap.width(), classmap.height(), |x, y| {
        classmap.class(x, y) == CellClass::Occupied
    });
    let threshold = params.radius_cells(classmap.cell_size()) + 0.5;
    let mut out = Grid::new(classmap.width(), classmap.height(), false);
    for y in 0..classmap.height() {
        for x in 0..classmap.width() {
            out.set(
                x,
                y,
                classmap.class(x, y) == CellClass::Free && *d.get(x, y) >= threshold,
            );
        }
    }
    out
}

/// Relax the Bellman fixed point over the 8-neighbourhood with repeated
/// raster and anti-raster sweeps. Frontier cells are the zero-cost sources;
/// an empty frontier yields an all-infinite matrix.
pub fn compute_cost_matrix(classmap: &CellClassMap, params: &Params) -> CostMatrix {
    let w = classmap.width();
    let h = classmap.height();
    let traversable = traversable_mask(classmap, params);
    let frontier = frontier_cells(classmap);

    // domain: traversable cells plus the frontier itself
    let mut domain = traversable;
    let mut cost = Grid::new(w, h, f64::INFINITY);
    for &(x, y) in &frontier {
        domain.set(x, y, true);
        cost.set(x, y, 0.0);
    }

    let step = |dx: i64, dy: i64| -> f64 {
        if dx != 0 && dy != 0 {
            params.step_diagonal
        } else {
            params.step_axial
        }
    };

    loop {
        let mut max_change: f64 = 0.0;
        // forward sweep
        for y in 0..h {
            for x in 0..w {
                if *domain.get(x, y) {
                    relax(&mut cost, &domain, x, y, w, h, &step, &mut max_change);
                }
            }
        }
        // backward sweep
        for y in (0..h).rev() {
            for x in (0..w).rev() {
                if *domain.get(x, y) {
                    relax(&mut cost, &domain, x, y, w, h, &step, &mut max_change);
                }
            }
        }
        if max_change < params.vi_epsilon {
            break;
        }
    }

    CostMatrix {
        cost,
        cell_size: classmap.cell_size(),
    }
}

#[inline]
#[allow(clippy::too_many_arguments)]
fn relax(
    cost: &mut Grid<f64>,
    domain: &Grid<bool>,
    x: usize,
    y: usize,
    w: usize,
    h: usize,
    step: &impl Fn(i64, i64) -> f64,
    max_change: &mut f64,
) {
    let mut best = *cost.get(x, y);
    for (dx, dy) in NEIGHBORS_8 {
        let nx = x as i64 + dx;
        let ny = y as i64 + dy;
        if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
            continue;
        }
        if !*domain.get(nx as usize, ny as usize) {
            continue;
        }
        let candidate = *cost.get(nx as usize, ny as usize) + step(dx, dy);
        if candidate < best {
            best = candidate;
        }
    }
    let old = *cost.get(x, y);
    if best < old {
        let change = if old.is_infinite() { best.max(1.0) } else { old - best };
        if change > *max_change {
            *max_change = change;
        }
        cost.set(x, y, best);
    }
}

/// Minimum range among the beams pointing within one beam width of the
/// given offset from the heading.
fn sector_min(scan: &SonarScan, offset: f64) -> f64 {
    let center = SonarScan::beam_at_offset(offset);
    let n = crate::world::BEAM_COUNT;
    let mut min = f64::INFINITY;
    for k in [center + n - 1, center, center + 1] {
        min = min.min(scan.ranges[k % n]);
    }
    min
}

/// Blend cost descent, heading inertia and obstacle proximity over the 8
/// neighbour directions and emit a velocity command toward the best one.
pub fn exploration_direction(
    cost: &CostMatrix,
    state: &RobotState,
    scan: &SonarScan,
    params: &Params,
) -> Command {
    let cs = cost.cell_size;
    let cx = (state.x / cs).floor() as i64;
    let cy = (state.y / cs).floor() as i64;

    let here = cost.at_checked(cx, cy);
    // off-matrix fallback so a transiently misclassified robot cell still
    // ranks its neighbours: pretend to sit one step above their minimum
    let here_eff = if here.is_finite() {
        here
    } else {
        let best_nbr = NEIGHBORS_8
            .iter()
            .map(|(dx, dy)| cost.at_checked(cx + dx, cy + dy))
            .fold(f64::INFINITY, f64::min);
        if best_nbr.is_infinite() {
            return Command::new(0.0, params.w_max); // lost: turn and rescan
        }
        best_nbr + params.step_axial
    };

    let mut best: Option<(f64, f64, f64)> = None; // (score, |turn|, turn)
    for (i, (dx, dy)) in NEIGHBORS_8.iter().enumerate() {
        let _ = i;
        let n = cost.at_checked(cx + dx, cy + dy);
        if n.is_infinite() {
            continue;
        }
        let drop = here_eff - n;
        let dir_angle = (*dy as f64).atan2(*dx as f64);
        let turn = angle_diff(dir_angle, state.heading);
        let clearance = sector_min(scan, turn);
        let penalty = (1.0 - clearance / params.sonar_range).max(0.0);
        let score = params.w_cost * drop + params.w_heading * turn.cos()
            - params.w_obstacle * penalty;
        let better = match best {
            None => true,
            Some((bs, bt, _)) => score > bs || (score == bs && turn.abs() < bt),
        };
        if better {
            best = Some((score, turn.abs(), turn));
        }
    }

    let Some((_, _, turn)) = best else {
        return Command::new(0.0, params.w_max);
    };

    // hard stop: chosen direction blocked close ahead -> rotate only
    if sector_min(scan, turn) < params.stop_distance {
        let w = if turn >= 0.0 { params.w_max } else { -params.w_max };
        return Command::new(0.0, w);
    }

    let v = params.v_max * turn.cos().max(0.0);
    let w = (turn / params.dt).clamp(-params.w_max, params.w_max);
    Command::new(v, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::occupancy::CellClassMap;

    fn classmap_from(rows: &[&str], cell_size: f64) -> CellClassMap {
        // '.' FREE, '#' OCCUPIED, '?' UNKNOWN
        let h = rows.len();
        let w = rows[0].len();
        let mut g = Grid::new(w, h, CellClass::Unknown);
        for (y, row) in rows.iter().enumerate() {
            for (x, ch) in row.chars().enumerate() {
                let c = match ch {
                    '.' => CellClass::Free,
                    '#' => CellClass::Occupied,
                    '?' => CellClass::Unknown,
                    _ => panic!("bad char"),
                };
                g.set(x, y, c);
            }
        }
        CellClassMap::from_grid(g, cell_size)
    }

    fn tiny_params(cell_size: f64) -> Params {
        // robot radius under half a cell so single-cell corridors are
        // traversable in unit fixtures
        Params {
            robot_radius: 0.3 * cell_size,
            noise_enabled: false,
            ..Params::default()
        }
    }

    #[test]
    fn frontier_of_uniform_maps_is_empty() {
        let all_unknown = classmap_from(&["???", "???"], 0.01);
        assert!(frontier_cells(&all_unknown).is_empty());
        let all_free = classmap_from(&["...", "..."], 0.01);
        assert!(frontier_cells(&all_free).is_empty());
    }

    #[test]
    fn frontier_is_the_boundary_row() {
        let cm = classmap_from(&["...", "...", "???"], 0.01);
        let f = frontier_cells(&cm);
        assert_eq!(f, vec![(0, 1), (1, 1), (2, 1)]);
    }

    #[test]
    fn corridor_costs_count_up_from_frontier() {
        // 1-wide free corridor; the unknown cell at the right end makes
        // its free neighbour the frontier
        let cm = classmap_from(&["######", "....?#", "######"], 0.01);
        let p = tiny_params(0.01);
        let m = compute_cost_matrix(&cm, &p);
        assert_eq!(m.at(3, 1), 0.0); // frontier
        assert_eq!(m.at(2, 1), 1.0);
        assert_eq!(m.at(1, 1), 2.0);
        assert_eq!(m.at(0, 1), 3.0);
        assert!(m.at(5, 1).is_infinite());
    }

    #[test]
    fn walled_off_cells_stay_infinite() {
        let cm = classmap_from(&["..#.?", "..#..", "#####"], 0.01);
        let p = tiny_params(0.01);
        let m = compute_cost_matrix(&cm, &p);
        // left block has no path to the frontier around the wall column
        assert!(m.at(0, 0).is_infinite());
        assert!(m.at(1, 1).is_infinite());
        assert!(m.at(3, 0).is_finite());
    }

    #[test]
    fn empty_frontier_is_exhausted_signal() {
        let cm = classmap_from(&["...", "...", "..."], 0.01);
        let p = tiny_params(0.01);
        let m = compute_cost_matrix(&cm, &p);
        assert!(m.is_exhausted());
    }

    #[test]
    fn matches_multisource_dijkstra_on_random_maps() {
        // oracle: binary-heap Dijkstra over the same traversable domain
        use std::cmp::Ordering;
        use std::collections::BinaryHeap;

        struct Item(f64, usize);
        impl PartialEq for Item {
            fn eq(&self, o: &Self) -> bool {
                self.0 == o.0 && self.1 == o.1
            }
        }
        impl Eq for Item {}
        impl PartialOrd for Item {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.cmp(o))
            }
        }
        impl Ord for Item {
            fn cmp(&self, o: &Self) -> Ordering {
                // min-heap by cost, then index for determinism
                o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
            }
        }

        fn dijkstra(cm: &CellClassMap, p: &Params) -> Grid<f64> {
            let w = cm.width();
            let h = cm.height();
            let trav = traversable_mask(cm, p);
            let mut domain = trav;
            let mut dist = Grid::new(w, h, f64::INFINITY);
            let mut heap = BinaryHeap::new();
            for (x, y) in frontier_cells(cm) {
                domain.set(x, y, true);
                dist.set(x, y, 0.0);
                heap.push(Item(0.0, y * w + x));
            }
            while let Some(Item(d, i)) = heap.pop() {
                let (x, y) = (i % w, i / w);
                if d > *dist.get(x, y) {
                    continue;
                }
                for (dx, dy) in NEIGHBORS_8 {
                    let nx = x as i64 + dx;
                    let ny = y as i64 + dy;
                    if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                        continue;
                    }
                    let (nx, ny) = (nx as usize, ny as usize);
                    if !*domain.get(nx, ny) {
                        continue;
                    }
                    let step = if dx != 0 && dy != 0 {
                        p.step_diagonal
                    } else {
                        p.step_axial
                    };
                    let nd = d + step;
                    if nd < *dist.get(nx, ny) {
                        dist.set(nx, ny, nd);
                        heap.push(Item(nd, ny * w + nx));
                    }
                }
            }
            dist
        }

        // deterministic xorshift map generator
        let mut z = 0xdeadbeefu64;
        let mut next = || {
            z ^= z << 13;
            z ^= z >> 7;
            z ^= z << 17;
            z
        };
        let p = tiny_params(0.01);
        for round in 0..60 {
            let w = 6 + (next() % 14) as usize;
            let h = 6 + (next() % 14) as usize;
            let mut g = Grid::new(w, h, CellClass::Unknown);
            for y in 0..h {
                for x in 0..w {
                    let r = next() % 100;
                    let c = if r < 55 {
                        CellClass::Free
                    } else if r < 75 {
                        CellClass::Occupied
                    } else {
                        CellClass::Unknown
                    };
                    g.set(x, y, c);
                }
            }
            let cm = CellClassMap::from_grid(g, 0.01);
            let fast = compute_cost_matrix(&cm, &p);
            let slow = dijkstra(&cm, &p);
            for y in 0..h {
                for x in 0..w {
                    let a = fast.at(x, y);
                    let b = *slow.get(x, y);
                    assert!(
                        (a.is_infinite() && b.is_infinite()) || a == b,
                        "round {round} cell ({x},{y}): {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn bellman_residual_is_zero_at_fixed_point() {
        let cm = classmap_from(&[
            "##########",
            "#........#",
            "#..##....#",
            "#..##..?.#",
            "#........#",
            "##########",
        ], 0.01);
        let p = tiny_params(0.01);
        let m = compute_cost_matrix(&cm, &p);
        let frontier: std::collections::HashSet<_> =
            frontier_cells(&cm).into_iter().collect();
        for y in 0..cm.height() {
            for x in 0..cm.width() {
                let c = m.at(x, y);
                if !c.is_finite() || frontier.contains(&(x, y)) {
                    continue;
                }
                let mut best = f64::INFINITY;
                for (dx, dy) in NEIGHBORS_8 {
                    let n = m.at_checked(x as i64 + dx, y as i64 + dy);
                    if n.is_finite() {
                        let step = if dx != 0 && dy != 0 {
                            p.step_diagonal
                        } else {
                            p.step_axial
                        };
                        best = best.min(n + step);
                    }
                }
                assert!((c - best).abs() < 1e-9, "residual at ({x},{y})");
            }
        }
    }

    #[test]
    fn step_cost_scaling_scales_costs() {
        let cm = classmap_from(&["######", "....?#", "######"], 0.01);
        let p = tiny_params(0.01);
        let mut scaled = p.clone();
        scaled.step_axial *= 3.0;
        scaled.step_diagonal *= 3.0;
        let a = compute_cost_matrix(&cm, &p);
        let b = compute_cost_matrix(&cm, &scaled);
        for y in 0..cm.height() {
            for x in 0..cm.width() {
                let (u, v) = (a.at(x, y), b.at(x, y));
                if u.is_finite() {
                    assert!((v - 3.0 * u).abs() < 1e-9);
                } else {
                    assert!(v.is_infinite());
                }
            }
        }
    }

    fn open_scan() -> SonarScan {
        SonarScan {
            ranges: [0.15; crate::world::BEAM_COUNT],
        }
    }

    #[test]
    fn descending_ahead_gives_full_speed() {
        let cm = classmap_from(&["######", "....?#", "######"], 0.01);
        let p = tiny_params(0.01);
        let m = compute_cost_matrix(&cm, &p);
        // robot in cell (1,1) heading +x; cost drops to the east
        let s = RobotState {
            x: 0.015,
            y: 0.015,
            heading: 0.0,
            radius: p.robot_radius,
        };
        let cmd = exploration_direction(&m, &s, &open_scan(), &p);
        assert_eq!(cmd.linear, p.v_max);
        assert_eq!(cmd.angular, 0.0);
    }

    #[test]
    fn flat_costs_keep_heading() {
        // all free, frontier everywhere unknown-adjacent is absent:
        // build a uniform finite field by hand
        let mut g = Grid::new(5, 5, CellClass::Free);
        g.set(4, 2, CellClass::Unknown);
        let cm = CellClassMap::from_grid(g, 0.01);
        let p = Params {
            w_heading: 0.0, // exercise the explicit tie-break
            ..tiny_params(0.01)
        };
        let mut m = compute_cost_matrix(&cm, &p);
        // flatten: every finite cell the same value
        for v in m.cost.as_mut_slice() {
            if v.is_finite() {
                *v = 2.0;
            }
        }
        let s = RobotState {
            x: 0.025,
            y: 0.025,
            heading: std::f64::consts::FRAC_PI_4, // exactly toward (1,1)
            radius: p.robot_radius,
        };
        let cmd = exploration_direction(&m, &s, &open_scan(), &p);
        assert_eq!(cmd.angular, 0.0, "smallest-turn tie-break keeps heading");
        assert_eq!(cmd.linear, p.v_max);
    }

    #[test]
    fn blocked_best_direction_rotates_only() {
        // dead-end corridor: descent points east but a wall sits 0.03m out
        let cm = classmap_from(&["######", "....?#", "######"], 0.01);
        let p = tiny_params(0.01);
        let m = compute_cost_matrix(&cm, &p);
        let s = RobotState {
            x: 0.015,
            y: 0.015,
            heading: 0.0,
            radius: p.robot_radius,
        };
        let mut scan = open_scan();
        scan.ranges[0] = 0.03;
        scan.ranges[1] = 0.03;
        scan.ranges[23] = 0.03;
        let cmd = exploration_direction(&m, &s, &scan, &p);
        assert_eq!(cmd.linear, 0.0);
        assert!(cmd.angular.abs() == p.w_max);
        // ledger weights: proximity term beats the largest possible drop
        let penalty = p.w_obstacle * (1.0 - 0.03 / p.sonar_range);
        assert!(penalty > p.w_cost * p.step_diagonal);
    }

    #[test]
    fn rescaled_weights_keep_argmax_direction() {
        let cm = classmap_from(&[
            "########",
            "#......#",
            "#......#",
            "#....?.#",
            "########",
        ], 0.01);
        let p = tiny_params(0.01);
        let k = 4.0;
        let mut scaled = p.clone();
        scaled.step_axial *= k;
        scaled.step_diagonal *= k;
        scaled.w_cost /= k;
        let a = compute_cost_matrix(&cm, &p);
        let b = compute_cost_matrix(&cm, &scaled);
        for (hx, hy, heading) in [(0.025, 0.015, 0.0), (0.015, 0.025, 1.2), (0.055, 0.025, -2.0)] {
            let s = RobotState {
                x: hx,
                y: hy,
                heading,
                radius: p.robot_radius,
            };
            let ca = exploration_direction(&a, &s, &open_scan(), &p);
            let cb = exploration_direction(&b, &s, &open_scan(), &scaled);
            assert!((ca.angular - cb.angular).abs() < 1e-9);
            assert!((ca.linear - cb.linear).abs() < 1e-9);
        }
    }
}
