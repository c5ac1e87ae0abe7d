//! Sonar evidence and its fusion into a global probabilistic grid.
//!
//! Each beam reading is converted to per-cell conditional probabilities
//! (low inside the beam, peaking at the measured range) which are folded
//! into per-cell log-odds. Log-odds makes the recursive Bayes update an
//! addition, so integration commutes up to clamping.

use thiserror::Error;

use crate::geom::line_cells;
use crate::grid::Grid;
use crate::morph::{chamfer_distance, erode_by_radius};
use crate::params::Params;
use crate::world::{RobotState, SonarScan, WorldMap, BEAM_COUNT};

/// Robot's map: per-cell occupancy belief in log-odds plus an
/// ever-observed mask.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    logodds: Grid<f64>,
    observed: Grid<bool>,
    cell_size: f64,
    clamp: f64,
}

/// Trichotomy of a cell after thresholding the belief.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    Free,
    Occupied,
    Unknown,
}

/// Classified view of an occupancy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CellClassMap {
    classes: Grid<CellClass>,
    cell_size: f64,
}

/// Evidence for one cell: grid coordinates and conditional probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellEvidence {
    pub x: i64,
    pub y: i64,
    pub p: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum IntegrateError {
    #[error("pose ({x}, {y}) outside the grid")]
    PoseOutOfBounds { x: f64, y: f64 },
}

impl OccupancyGrid {
    pub fn new(width: usize, height: usize, cell_size: f64, params: &Params) -> Self {
        Self {
            logodds: Grid::new(width, height, 0.0),
            observed: Grid::new(width, height, false),
            cell_size,
            clamp: params.logodds_clamp,
        }
    }

    /// Fresh grid with the same footprint as a world map.
    pub fn for_world(world: &WorldMap, params: &Params) -> Self {
        Self::new(world.width(), world.height(), world.cell_size(), params)
    }

    pub fn width(&self) -> usize {
        self.logodds.width()
    }

    pub fn height(&self) -> usize {
        self.logodds.height()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn logodds(&self, x: usize, y: usize) -> f64 {
        *self.logodds.get(x, y)
    }

    pub fn observed(&self, x: usize, y: usize) -> bool {
        *self.observed.get(x, y)
    }

    /// Occupancy probability of a cell; 0.5 while unobserved.
    pub fn probability(&self, x: usize, y: usize) -> f64 {
        let l = *self.logodds.get(x, y);
        1.0 / (1.0 + (-l).exp())
    }

    /// Fold one piece of conditional-probability evidence into a cell.
    pub fn apply_evidence(&mut self, x: usize, y: usize, p: f64) {
        debug_assert!(p > 0.0 && p < 1.0);
        let l = (p / (1.0 - p)).ln();
        let v = (*self.logodds.get(x, y) + l).clamp(-self.clamp, self.clamp);
        self.logodds.set(x, y, v);
        self.observed.set(x, y, true);
    }
}

/// Conditional occupancy probability for a cell at range `r` from the cone
/// apex given the beam `reading`. Returns `None` where the beam says
/// nothing (prior 0.5).
fn profile(r: f64, reading: f64, no_echo: bool, band: f64, params: &Params) -> Option<f64> {
    if no_echo {
        // max-range reading: free space along the whole beam, no band
        return (r <= reading - band).then_some(params.p_free);
    }
    if r < reading - band {
        Some(params.p_free)
    } else if r <= reading {
        // ramp up to the peak at the measured range
        let t = (r - (reading - band)) / band;
        Some(params.p_free + t * (params.p_occ_peak - params.p_free))
    } else if r <= reading + band {
        // decay back to the prior behind the measurement
        let t = (r - reading) / band;
        let p = params.p_occ_peak + t * (0.5 - params.p_occ_peak);
        (p != 0.5).then_some(p)
    } else {
        None
    }
}

/// Convert one reading into per-cell evidence. `origin` is the cone apex
/// (the robot edge point for real scans) and `origin.heading` the beam
/// axis; `cone_half_angle <= 0` degenerates to the cells crossed by the
/// axis ray.
pub fn inverse_sensor_model(
    reading: f64,
    origin: crate::geom::Pose,
    cone_half_angle: f64,
    cell_size: f64,
    params: &Params,
) -> Vec<CellEvidence> {
    let band = params.band_cells * cell_size;
    let no_echo = reading >= params.sonar_range - 1e-12;
    let reach = if no_echo { reading } else { reading + band };
    let mut out = Vec::new();

    if cone_half_angle <= 0.0 {
        let a = (
            (origin.x / cell_size).floor() as i64,
            (origin.y / cell_size).floor() as i64,
        );
        let bx = origin.x + reach * origin.heading.cos();
        let by = origin.y + reach * origin.heading.sin();
        let b = (
            (bx / cell_size).floor() as i64,
            (by / cell_size).floor() as i64,
        );
        for (cx, cy) in line_cells(a, b) {
            let mx = (cx as f64 + 0.5) * cell_size - origin.x;
            let my = (cy as f64 + 0.5) * cell_size - origin.y;
            let r = (mx * mx + my * my).sqrt();
            if r > reach {
                continue;
            }
            if let Some(p) = profile(r, reading, no_echo, band, params) {
                out.push(CellEvidence { x: cx, y: cy, p });
            }
        }
        return out;
    }

    // bounding box of the wedge hull (apex, both rim corners, axis tip),
    // padded one cell; the rim bulge is under a cell for this half-angle
    let mut min_x = origin.x;
    let mut max_x = origin.x;
    let mut min_y = origin.y;
    let mut max_y = origin.y;
    for a in [
        origin.heading - cone_half_angle,
        origin.heading,
        origin.heading + cone_half_angle,
    ] {
        let px = origin.x + reach * a.cos();
        let py = origin.y + reach * a.sin();
        min_x = min_x.min(px);
        max_x = max_x.max(px);
        min_y = min_y.min(py);
        max_y = max_y.max(py);
    }
    let x0 = ((min_x - cell_size) / cell_size).floor() as i64;
    let x1 = ((max_x + cell_size) / cell_size).floor() as i64;
    let y0 = ((min_y - cell_size) / cell_size).floor() as i64;
    let y1 = ((max_y + cell_size) / cell_size).floor() as i64;
    for cy in y0..=y1 {
        for cx in x0..=x1 {
            let mx = (cx as f64 + 0.5) * cell_size - origin.x;
            let my = (cy as f64 + 0.5) * cell_size - origin.y;
            let r = (mx * mx + my * my).sqrt();
            if r > reach {
                continue;
            }
            if r > 0.5 * cell_size {
                let bearing = my.atan2(mx);
                if crate::geom::angle_diff(bearing, origin.heading).abs() > cone_half_angle {
                    continue;
                }
            }
            if let Some(p) = profile(r, reading, no_echo, band, params) {
                out.push(CellEvidence { x: cx, y: cy, p });
            }
        }
    }
    out
}

/// Fuse a whole ring scan into the grid at the given pose. Evidence is
/// produced directly in world coordinates, so this is also the global
/// merge step.
pub fn integrate_scan(
    grid: &mut OccupancyGrid,
    state: &RobotState,
    scan: &SonarScan,
    params: &Params,
) -> Result<(), IntegrateError> {
    let cs = grid.cell_size;
    let in_x = state.x >= 0.0 && state.x < grid.width() as f64 * cs;
    let in_y = state.y >= 0.0 && state.y < grid.height() as f64 * cs;
    if !in_x || !in_y {
        return Err(IntegrateError::PoseOutOfBounds {
            x: state.x,
            y: state.y,
        });
    }

    for beam in 0..BEAM_COUNT {
        let angle = state.heading + SonarScan::beam_offset(beam);
        let apex = crate::geom::Pose::new(
            state.x + state.radius * angle.cos(),
            state.y + state.radius * angle.sin(),
            angle,
        );
        for ev in inverse_sensor_model(
            scan.ranges[beam],
            apex,
            params.cone_half_angle,
            cs,
            params,
        ) {
            if ev.x >= 0
                && ev.y >= 0
                && (ev.x as usize) < grid.width()
                && (ev.y as usize) < grid.height()
            {
                grid.apply_evidence(ev.x as usize, ev.y as usize, ev.p);
            }
        }
    }
    Ok(())
}

/// Threshold the belief into FREE / OCCUPIED / UNKNOWN.
pub fn classify(grid: &OccupancyGrid, params: &Params) -> CellClassMap {
    let mut classes = Grid::new(grid.width(), grid.height(), CellClass::Unknown);
    let occ_l = (params.occ_threshold / (1.0 - params.occ_threshold)).ln();
    let free_l = (params.free_threshold / (1.0 - params.free_threshold)).ln();
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            if !grid.observed(x, y) {
                continue;
            }
            let l = grid.logodds(x, y);
            if l >= occ_l {
                classes.set(x, y, CellClass::Occupied);
            } else if l <= free_l {
                classes.set(x, y, CellClass::Free);
            }
        }
    }
    CellClassMap {
        classes,
        cell_size: grid.cell_size,
    }
}

impl CellClassMap {
    pub fn from_grid(classes: Grid<CellClass>, cell_size: f64) -> Self {
        Self { classes, cell_size }
    }

    pub fn width(&self) -> usize {
        self.classes.width()
    }

    pub fn height(&self) -> usize {
        self.classes.height()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    #[inline]
    pub fn class(&self, x: usize, y: usize) -> CellClass {
        *self.classes.get(x, y)
    }

    #[inline]
    pub fn class_at(&self, x: i64, y: i64) -> CellClass {
        if !self.classes.in_bounds(x, y) {
            return CellClass::Unknown;
        }
        *self.classes.get(x as usize, y as usize)
    }

    pub fn grid(&self) -> &Grid<CellClass> {
        &self.classes
    }

    /// Chamfer distance (cells) to the nearest cell matching `pred`.
    pub fn distance_to(&self, pred: impl Fn(CellClass) -> bool) -> Grid<f64> {
        chamfer_distance(self.width(), self.height(), |x, y| {
            pred(*self.classes.get(x, y))
        })
    }
}

/// Ground-truth mask of cells the robot's center can actually visit:
/// free cells with disc clearance, flood-filled from the start cell.
pub fn reachable_free_mask(world: &WorldMap, robot_radius: f64) -> Grid<bool> {
    let radius_cells = robot_radius / world.cell_size();
    let eroded = erode_by_radius(
        world.width(),
        world.height(),
        |x, y| world.is_occupied(x as i64, y as i64),
        radius_cells,
    );
    let start = world.start_pose();
    let (sx, sy) = world.cell_of(start.x, start.y);
    let mut mask = Grid::new(world.width(), world.height(), false);
    if !eroded.in_bounds(sx, sy) || !*eroded.get(sx as usize, sy as usize) {
        return mask;
    }
    let mut stack = vec![(sx as usize, sy as usize)];
    mask.set(sx as usize, sy as usize, true);
    while let Some((x, y)) = stack.pop() {
        for (dx, dy) in crate::grid::NEIGHBORS_8 {
            let nx = x as i64 + dx;
            let ny = y as i64 + dy;
            if eroded.in_bounds(nx, ny)
                && *eroded.get(nx as usize, ny as usize)
                && !*mask.get(nx as usize, ny as usize)
            {
                mask.set(nx as usize, ny as usize, true);
                stack.push((nx as usize, ny as usize));
            }
        }
    }
    mask
}

#[derive(Debug, Error, PartialEq)]
pub enum CoverageError {
    #[error("class map is {cw}x{ch} but world is {ww}x{wh}")]
    DimensionMismatch {
        cw: usize,
        ch: usize,
        ww: usize,
        wh: usize,
    },
}

/// Fraction of truly-reachable free cells the map has classified FREE.
pub fn coverage(
    classmap: &CellClassMap,
    world: &WorldMap,
    robot_radius: f64,
) -> Result<f64, CoverageError> {
    let mask = reachable_free_mask(world, robot_radius);
    coverage_with_mask(classmap, &mask)
}

/// Same, against a precomputed reachability mask.
pub fn coverage_with_mask(
    classmap: &CellClassMap,
    mask: &Grid<bool>,
) -> Result<f64, CoverageError> {
    if classmap.width() != mask.width() || classmap.height() != mask.height() {
        return Err(CoverageError::DimensionMismatch {
            cw: classmap.width(),
            ch: classmap.height(),
            ww: mask.width(),
            wh: mask.height(),
        });
    }
    let mut total = 0usize;
    let mut seen = 0usize;
    for (x, y, reachable) in mask.iter_cells() {
        if *reachable {
            total += 1;
            if classmap.class(x, y) == CellClass::Free {
                seen += 1;
            }
        }
    }
    if total == 0 {
        return Ok(0.0);
    }
    Ok(seen as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Pose;
    use crate::world::{load_world, scan_ideal};

    fn params_quiet() -> Params {
        Params {
            noise_enabled: false,
            ..Params::default()
        }
    }

    fn room_doc(n: usize, cell_mm: f64) -> String {
        let side = n + 2;
        let mut doc = format!("cellsize_mm={cell_mm}\n");
        for y in 0..side {
            for x in 0..side {
                if x == 0 || y == 0 || x == side - 1 || y == side - 1 {
                    doc.push('#');
                } else if x == side / 2 && y == side / 2 {
                    doc.push('R');
                } else {
                    doc.push('.');
                }
            }
            doc.push('\n');
        }
        doc
    }

    #[test]
    fn no_echo_reading_gives_only_free_evidence() {
        let p = params_quiet();
        let ev = inverse_sensor_model(
            0.15,
            Pose::new(0.1, 0.1, 0.0),
            p.cone_half_angle,
            0.0088,
            &p,
        );
        assert!(!ev.is_empty());
        assert!(ev.iter().all(|e| e.p < 0.5));
    }

    #[test]
    fn profile_matches_pinned_values() {
        // cells on the beam axis: 0.75 at the reading, 0.30 well inside
        let p = params_quiet();
        let cs = 0.0088;
        let origin = Pose::new(0.5, 0.5, 0.0);
        let ev = inverse_sensor_model(0.10, origin, p.cone_half_angle, cs, &p);
        let at = |range: f64| -> f64 {
            let cx = ((origin.x + range) / cs).floor() as i64;
            let cy = (origin.y / cs).floor() as i64;
            ev.iter()
                .find(|e| e.x == cx && e.y == cy)
                .map(|e| e.p)
                .expect("cell should carry evidence")
        };
        // the cell containing the point at the measured range peaks near
        // 0.75; its center is within half a cell of the exact range
        let peak = at(0.10);
        assert!(peak > 0.6, "peak {peak}");
        assert!((at(0.05) - 0.30).abs() < 1e-12);
        // exact profile values at the exact ranges
        let band = p.band_cells * cs;
        assert_eq!(profile(0.10, 0.10, false, band, &p), Some(0.75));
        assert_eq!(profile(0.05, 0.10, false, band, &p), Some(0.30));
        assert_eq!(profile(0.10 + 2.0 * band, 0.10, false, band, &p), None);
    }

    #[test]
    fn degenerate_cone_returns_axis_cells() {
        let p = params_quiet();
        let cs = 0.01;
        let ev = inverse_sensor_model(0.10, Pose::new(0.105, 0.105, 0.0), 0.0, cs, &p);
        assert!(!ev.is_empty());
        // all returned cells lie on the axis row
        assert!(ev.iter().all(|e| e.y == 10));
        // a positive cone returns strictly more cells
        let ev_cone = inverse_sensor_model(
            0.10,
            Pose::new(0.105, 0.105, 0.0),
            p.cone_half_angle,
            cs,
            &p,
        );
        assert!(ev_cone.len() > ev.len());
    }

    #[test]
    fn uninformative_evidence_is_identity() {
        let p = params_quiet();
        let mut g = OccupancyGrid::new(4, 4, 0.01, &p);
        g.apply_evidence(1, 1, 0.5);
        assert_eq!(g.logodds(1, 1), 0.0);
    }

    #[test]
    fn two_point_nine_updates_match_odds_product() {
        let p = params_quiet();
        let mut g = OccupancyGrid::new(4, 4, 0.01, &p);
        g.apply_evidence(2, 2, 0.9);
        g.apply_evidence(2, 2, 0.9);
        // oracle: odds product (0.9/0.1)^2 with prior odds 1 -> 81/82
        assert!((g.probability(2, 2) - 81.0 / 82.0).abs() < 1e-12);
    }

    #[test]
    fn integration_rejects_out_of_bounds_pose() {
        let p = params_quiet();
        let mut g = OccupancyGrid::new(10, 10, 0.01, &p);
        let before = g.clone();
        let s = RobotState {
            x: 5.0,
            y: 0.05,
            heading: 0.0,
            radius: 0.0275,
        };
        let scan = SonarScan {
            ranges: [0.1; BEAM_COUNT],
        };
        assert!(integrate_scan(&mut g, &s, &scan, &p).is_err());
        assert_eq!(g, before);
    }

    #[test]
    fn scan_order_commutes_at_unclamped_cells() {
        let p = params_quiet();
        let doc = room_doc(30, 10.0);
        let w = load_world(&doc).unwrap();
        let mut poses = Vec::new();
        for i in 0..6 {
            let t = i as f64;
            poses.push(RobotState {
                x: 0.16 + 0.01 * t,
                y: 0.16 + 0.005 * t,
                heading: 0.4 * t,
                radius: 0.0275,
            });
        }
        let scans: Vec<_> = poses
            .iter()
            .map(|s| (s, scan_ideal(&w, s, p.sonar_range)))
            .collect();

        let mut forward = OccupancyGrid::for_world(&w, &p);
        for (s, scan) in &scans {
            integrate_scan(&mut forward, s, scan, &p).unwrap();
        }
        let mut reverse = OccupancyGrid::for_world(&w, &p);
        for (s, scan) in scans.iter().rev() {
            integrate_scan(&mut reverse, s, scan, &p).unwrap();
        }
        for y in 0..forward.height() {
            for x in 0..forward.width() {
                let a = forward.logodds(x, y);
                let b = reverse.logodds(x, y);
                if a.abs() < p.logodds_clamp - 1e-9 && b.abs() < p.logodds_clamp - 1e-9 {
                    assert!((a - b).abs() < 1e-9, "cell ({x},{y}): {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn monotone_occupied_evidence_until_clamp() {
        let p = params_quiet();
        let mut g = OccupancyGrid::new(3, 3, 0.01, &p);
        let mut last = 0.0;
        for _ in 0..40 {
            g.apply_evidence(1, 1, 0.75);
            let l = g.logodds(1, 1);
            assert!(l >= last);
            assert!(l <= p.logodds_clamp);
            last = l;
        }
        assert_eq!(last, p.logodds_clamp);
    }

    #[test]
    fn fresh_grid_classifies_all_unknown() {
        let p = params_quiet();
        let g = OccupancyGrid::new(8, 8, 0.01, &p);
        let cm = classify(&g, &p);
        assert!((0..8).all(|y| (0..8).all(|x| cm.class(x, y) == CellClass::Unknown)));
    }

    #[test]
    fn classify_thresholds() {
        let p = params_quiet();
        let mut g = OccupancyGrid::new(3, 3, 0.01, &p);
        // saturated belief -> OCCUPIED
        for _ in 0..50 {
            g.apply_evidence(0, 0, 0.9);
        }
        // observed but ambiguous -> UNKNOWN
        g.apply_evidence(1, 1, 0.6);
        g.apply_evidence(1, 1, 0.4);

        let cm = classify(&g, &p);
        assert_eq!(cm.class(0, 0), CellClass::Occupied);
        assert_eq!(cm.class(1, 1), CellClass::Unknown);
        assert_eq!(cm.class(2, 2), CellClass::Unknown);
    }

    #[test]
    fn stationary_burst_maps_walls_and_floor() {
        // small room fully inside sonar range; 200 noise-free scans
        let p = params_quiet();
        let doc = room_doc(20, 10.0); // 0.2 m across
        let w = load_world(&doc).unwrap();
        let s = RobotState::at(w.start_pose(), 0.0275);
        let mut g = OccupancyGrid::for_world(&w, &p);
        let scan = scan_ideal(&w, &s, p.sonar_range);
        for _ in 0..200 {
            integrate_scan(&mut g, &s, &scan, &p).unwrap();
        }
        let cm = classify(&g, &p);

        // oracle: each beam axis' hit cell must be OCCUPIED
        for beam in 0..BEAM_COUNT {
            let angle = s.heading + SonarScan::beam_offset(beam);
            let r = scan.ranges[beam];
            if r >= p.sonar_range {
                continue;
            }
            let hx = s.x + (s.radius + r + 1e-6) * angle.cos();
            let hy = s.y + (s.radius + r + 1e-6) * angle.sin();
            let (cx, cy) = w.cell_of(hx, hy);
            assert_eq!(
                cm.class_at(cx, cy),
                CellClass::Occupied,
                "beam {beam} hit cell ({cx},{cy})"
            );
        }

        // free cells well inside the measured ranges classify FREE
        let band = p.band_cells * w.cell_size();
        let mut checked = 0;
        for y in 0..w.height() {
            for x in 0..w.width() {
                if w.is_occupied(x as i64, y as i64) {
                    continue;
                }
                let mx = (x as f64 + 0.5) * w.cell_size() - s.x;
                let my = (y as f64 + 0.5) * w.cell_size() - s.y;
                let r = (mx * mx + my * my).sqrt() - s.radius;
                if r < 0.0 {
                    continue;
                }
                let bearing = my.atan2(mx);
                let beam = SonarScan::beam_at_offset(crate::geom::angle_diff(bearing, s.heading));
                if crate::geom::angle_diff(bearing, s.heading + SonarScan::beam_offset(beam))
                    .abs()
                    > p.cone_half_angle * 0.9
                {
                    continue; // cone edge, skip borderline cells
                }
                if r < scan.ranges[beam] - 2.0 * band {
                    assert_eq!(cm.class(x, y), CellClass::Free, "cell ({x},{y})");
                    checked += 1;
                }
            }
        }
        assert!(checked > 20, "oracle should cover interior cells");
    }

    #[test]
    fn coverage_counts_reachable_free_cells() {
        let p = params_quiet();
        let doc = room_doc(30, 10.0);
        let w = load_world(&doc).unwrap();
        // fresh grid -> zero
        let g = OccupancyGrid::for_world(&w, &p);
        let cm = classify(&g, &p);
        assert_eq!(coverage(&cm, &w, p.robot_radius).unwrap(), 0.0);

        // ground truth -> 1: mark every truly free cell FREE
        let mut classes = Grid::new(w.width(), w.height(), CellClass::Occupied);
        for y in 0..w.height() {
            for x in 0..w.width() {
                if !w.is_occupied(x as i64, y as i64) {
                    classes.set(x, y, CellClass::Free);
                }
            }
        }
        let truth = CellClassMap::from_grid(classes.clone(), w.cell_size());
        assert_eq!(coverage(&truth, &w, p.robot_radius).unwrap(), 1.0);

        // half of the reachable cells FREE, rest UNKNOWN -> 0.5
        let mask = reachable_free_mask(&w, p.robot_radius);
        let reachable: Vec<_> = mask
            .iter_cells()
            .filter(|(_, _, m)| **m)
            .map(|(x, y, _)| (x, y))
            .collect();
        let mut classes = Grid::new(w.width(), w.height(), CellClass::Unknown);
        for (i, (x, y)) in reachable.iter().enumerate() {
            if i % 2 == 0 {
                classes.set(*x, *y, CellClass::Free);
            }
        }
        let half = CellClassMap::from_grid(classes, w.cell_size());
        let c = coverage(&half, &w, p.robot_radius).unwrap();
        let expect = reachable.iter().enumerate().filter(|(i, _)| i % 2 == 0).count() as f64
            / reachable.len() as f64;
        assert!((c - expect).abs() < 1e-12);
    }

    #[test]
    fn coverage_rejects_dimension_mismatch() {
        let p = params_quiet();
        let doc = room_doc(10, 10.0);
        let w = load_world(&doc).unwrap();
        let g = OccupancyGrid::new(5, 5, 0.01, &p);
        let cm = classify(&g, &p);
        assert!(coverage(&cm, &w, p.robot_radius).is_err());
    }
}
