//! Deterministic simulated world: obstacle map loaded from a text document,
//! a disc-shaped differential-drive robot and a 24-beam raycast sonar ring.

use thiserror::Error;

use crate::geom::{noise_unit, Pose};
use crate::grid::Grid;
use crate::params::Params;

/// Number of sonar beams around the ring.
pub const BEAM_COUNT: usize = 24;

/// Ground-truth obstacle bitmap with metric cell size.
#[derive(Debug, Clone)]
pub struct WorldMap {
    occupied: Grid<bool>,
    cell_size: f64,
    start: Pose,
}

/// Robot pose plus its physical radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub radius: f64,
}

impl RobotState {
    pub fn at(pose: Pose, radius: f64) -> Self {
        Self {
            x: pose.x,
            y: pose.y,
            heading: pose.heading,
            radius,
        }
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.x, self.y, self.heading)
    }
}

/// One full ring of sonar readings.
#[derive(Debug, Clone, PartialEq)]
pub struct SonarScan {
    pub ranges: [f64; BEAM_COUNT],
}

impl SonarScan {
    /// Fixed angular offset of beam `k` from the robot heading.
    pub fn beam_offset(beam: usize) -> f64 {
        beam as f64 * std::f64::consts::TAU / BEAM_COUNT as f64
    }

    /// The beam whose direction is closest to `offset` radians from the
    /// heading.
    pub fn beam_at_offset(offset: f64) -> usize {
        let step = std::f64::consts::TAU / BEAM_COUNT as f64;
        let k = (offset.rem_euclid(std::f64::consts::TAU) / step).round() as usize;
        k % BEAM_COUNT
    }
}

/// A velocity command: forward speed (m/s) and turn rate (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub linear: f64,
    pub angular: f64,
}

impl Command {
    pub const STOP: Command = Command {
        linear: 0.0,
        angular: 0.0,
    };

    pub fn new(linear: f64, angular: f64) -> Self {
        Self { linear, angular }
    }
}

/// Result of one motion step.
#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub state: RobotState,
    /// True when the translation was truncated by wall contact.
    pub contact: bool,
}

/// Map document rejection, with 1-based line/column positions.
#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("empty map document")]
    Empty,
    #[error("missing or malformed header (expected `cellsize_mm=<number>`)")]
    BadHeader,
    #[error("line {line}: length {got} differs from first row length {want}")]
    RaggedLine { line: usize, got: usize, want: usize },
    #[error("line {line}, column {col}: unknown character `{ch}`")]
    UnknownChar { line: usize, col: usize, ch: char },
    #[error("no start cell `R` in map")]
    NoStart,
    #[error("line {line}, column {col}: second start cell `R`")]
    DuplicateStart { line: usize, col: usize },
    #[error("map must be at least 3x3 cells, got {width}x{height}")]
    TooSmall { width: usize, height: usize },
    #[error("line {line}, column {col}: boundary cell is not occupied")]
    UnclosedBoundary { line: usize, col: usize },
}

/// Parse a line-oriented map document. First line `cellsize_mm=<number>`,
/// then grid rows of `#` (occupied), `.` (free) and exactly one `R` (start).
pub fn load_world(text: &str) -> Result<WorldMap, MapError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(MapError::Empty)?;
    let cell_size = header
        .trim()
        .strip_prefix("cellsize_mm=")
        .and_then(|v| v.trim().parse::<f64>().ok())
        .filter(|v| *v > 0.0 && v.is_finite())
        .ok_or(MapError::BadHeader)?
        / 1000.0;

    let rows: Vec<&str> = lines.collect();
    if rows.is_empty() {
        return Err(MapError::Empty);
    }
    let width = rows[0].chars().count();
    let height = rows.len();

    let mut occupied = Grid::new(width.max(1), height, false);
    let mut start: Option<(usize, usize)> = None;
    for (y, row) in rows.iter().enumerate() {
        let got = row.chars().count();
        if got != width {
            return Err(MapError::RaggedLine {
                line: y + 2,
                got,
                want: width,
            });
        }
        for (x, ch) in row.chars().enumerate() {
            match ch {
                '#' => occupied.set(x, y, true),
                '.' => {}
                'R' => {
                    if let Some((sx, sy)) = start {
                        let _ = (sx, sy);
                        return Err(MapError::DuplicateStart {
                            line: y + 2,
                            col: x + 1,
                        });
                    }
                    start = Some((x, y));
                }
                _ => {
                    return Err(MapError::UnknownChar {
                        line: y + 2,
                        col: x + 1,
                        ch,
                    })
                }
            }
        }
    }

    if width < 3 || height < 3 {
        return Err(MapError::TooSmall { width, height });
    }
    for x in 0..width {
        for y in [0, height - 1] {
            if !*occupied.get(x, y) {
                return Err(MapError::UnclosedBoundary {
                    line: y + 2,
                    col: x + 1,
                });
            }
        }
    }
    for y in 0..height {
        for x in [0, width - 1] {
            if !*occupied.get(x, y) {
                return Err(MapError::UnclosedBoundary {
                    line: y + 2,
                    col: x + 1,
                });
            }
        }
    }

    let (sx, sy) = start.ok_or(MapError::NoStart)?;
    let start_pose = Pose::new(
        (sx as f64 + 0.5) * cell_size,
        (sy as f64 + 0.5) * cell_size,
        0.0,
    );
    Ok(WorldMap {
        occupied,
        cell_size,
        start: start_pose,
    })
}

impl WorldMap {
    pub fn width(&self) -> usize {
        self.occupied.width()
    }

    pub fn height(&self) -> usize {
        self.occupied.height()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn start_pose(&self) -> Pose {
        self.start
    }

    /// Total cell count, the value-iteration entity count.
    pub fn cell_count(&self) -> usize {
        self.occupied.len()
    }

    #[inline]
    pub fn is_occupied(&self, x: i64, y: i64) -> bool {
        if !self.occupied.in_bounds(x, y) {
            return true; // outside the map counts as solid
        }
        *self.occupied.get(x as usize, y as usize)
    }

    /// Cell containing a world point.
    pub fn cell_of(&self, x: f64, y: f64) -> (i64, i64) {
        (
            (x / self.cell_size).floor() as i64,
            (y / self.cell_size).floor() as i64,
        )
    }

    /// True when a robot disc at `(x, y)` with radius `r` overlaps no
    /// occupied cell. Touching contact (distance exactly `r`) is allowed.
    pub fn disc_free(&self, x: f64, y: f64, r: f64) -> bool {
        let cs = self.cell_size;
        let x0 = ((x - r) / cs).floor() as i64;
        let x1 = ((x + r) / cs).floor() as i64;
        let y0 = ((y - r) / cs).floor() as i64;
        let y1 = ((y + r) / cs).floor() as i64;
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                if !self.is_occupied(cx, cy) {
                    continue;
                }
                // distance from the disc center to the cell rectangle
                let rx0 = cx as f64 * cs;
                let ry0 = cy as f64 * cs;
                let dx = (rx0 - x).max(0.0).max(x - (rx0 + cs));
                let dy = (ry0 - y).max(0.0).max(y - (ry0 + cs));
                if dx * dx + dy * dy < r * r - 1e-15 {
                    return false;
                }
            }
        }
        true
    }

    /// Physical clearance from a point to the nearest occupied cell edge.
    pub fn clearance_at(&self, x: f64, y: f64, max: f64) -> f64 {
        let cs = self.cell_size;
        let x0 = ((x - max) / cs).floor() as i64;
        let x1 = ((x + max) / cs).floor() as i64;
        let y0 = ((y - max) / cs).floor() as i64;
        let y1 = ((y + max) / cs).floor() as i64;
        let mut best = max;
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                if !self.is_occupied(cx, cy) {
                    continue;
                }
                let rx0 = cx as f64 * cs;
                let ry0 = cy as f64 * cs;
                let dx = (rx0 - x).max(0.0).max(x - (rx0 + cs));
                let dy = (ry0 - y).max(0.0).max(y - (ry0 + cs));
                best = best.min((dx * dx + dy * dy).sqrt());
            }
        }
        best
    }
}

/// Geometric sonar ray: distance from the robot edge along beam `beam` to
/// the first occupied cell, clamped to `range_max`. Exact grid traversal,
/// no noise.
pub fn cast_sonar(world: &WorldMap, state: &RobotState, beam: usize, range_max: f64) -> f64 {
    debug_assert!(beam < BEAM_COUNT);
    let angle = state.heading + SonarScan::beam_offset(beam);
    let (dx, dy) = (angle.cos(), angle.sin());
    // the ray starts at the robot edge in the beam direction
    let ox = state.x + state.radius * dx;
    let oy = state.y + state.radius * dy;
    ray_distance(world, ox, oy, dx, dy, range_max)
}

/// Grid traversal along the ray `(ox, oy) + t (dx, dy)`; returns the `t` at
/// which the ray first enters an occupied cell, clamped to `max_t`.
fn ray_distance(world: &WorldMap, ox: f64, oy: f64, dx: f64, dy: f64, max_t: f64) -> f64 {
    let cs = world.cell_size;
    let (mut cx, mut cy) = world.cell_of(ox, oy);
    if world.is_occupied(cx, cy) {
        return 0.0;
    }

    let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
    let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
    // parametric distance to the next vertical / horizontal cell boundary
    let mut t_max_x = if dx != 0.0 {
        let next = if dx > 0.0 {
            (cx + 1) as f64 * cs
        } else {
            cx as f64 * cs
        };
        (next - ox) / dx
    } else {
        f64::INFINITY
    };
    let mut t_max_y = if dy != 0.0 {
        let next = if dy > 0.0 {
            (cy + 1) as f64 * cs
        } else {
            cy as f64 * cs
        };
        (next - oy) / dy
    } else {
        f64::INFINITY
    };
    let t_delta_x = if dx != 0.0 { cs / dx.abs() } else { f64::INFINITY };
    let t_delta_y = if dy != 0.0 { cs / dy.abs() } else { f64::INFINITY };

    loop {
        let t;
        if t_max_x < t_max_y {
            t = t_max_x;
            t_max_x += t_delta_x;
            cx += step_x;
        } else {
            t = t_max_y;
            t_max_y += t_delta_y;
            cy += step_y;
        }
        if t > max_t {
            return max_t;
        }
        if world.is_occupied(cx, cy) {
            return t;
        }
    }
}

/// One full noise-free ring scan.
pub fn scan_ideal(world: &WorldMap, state: &RobotState, range_max: f64) -> SonarScan {
    let mut ranges = [0.0; BEAM_COUNT];
    for (beam, slot) in ranges.iter_mut().enumerate() {
        *slot = cast_sonar(world, state, beam, range_max);
    }
    SonarScan { ranges }
}

/// One full ring scan, with the configured per-(seed, step, beam) uniform
/// noise when enabled, re-clamped to `[0, range_max]`.
pub fn scan_sonar(
    world: &WorldMap,
    state: &RobotState,
    params: &Params,
    seed: u64,
    step: u64,
) -> SonarScan {
    let mut scan = scan_ideal(world, state, params.sonar_range);
    if params.noise_enabled && params.sonar_noise > 0.0 {
        for (beam, r) in scan.ranges.iter_mut().enumerate() {
            let n = noise_unit(seed, step, beam as u32) * params.sonar_noise * *r;
            *r = (*r + n).clamp(0.0, params.sonar_range);
        }
    }
    scan
}

/// Integrate the unicycle kinematics for `dt` seconds. If the swept disc
/// would enter an occupied cell, the translation stops at the contact point;
/// the rotation always completes.
pub fn step_robot(world: &WorldMap, state: &RobotState, cmd: Command, dt: f64) -> StepOutcome {
    let final_heading = crate::geom::wrap_angle(state.heading + cmd.angular * dt);
    if cmd.linear == 0.0 {
        // rotation in place never collides
        let mut s = *state;
        s.heading = final_heading;
        return StepOutcome {
            state: s,
            contact: false,
        };
    }

    // position along the arc, parameterized by fraction of the step
    let pos_at = |f: f64| -> (f64, f64) {
        let t = f * dt;
        if cmd.angular.abs() < 1e-9 {
            (
                state.x + cmd.linear * t * state.heading.cos(),
                state.y + cmd.linear * t * state.heading.sin(),
            )
        } else {
            let th = state.heading + cmd.angular * t;
            let k = cmd.linear / cmd.angular;
            (
                state.x + k * (th.sin() - state.heading.sin()),
                state.y - k * (th.cos() - state.heading.cos()),
            )
        }
    };

    // march to bracket the first contact, then bisect
    const SAMPLES: usize = 16;
    let mut free_f = 0.0;
    let mut hit_f: Option<f64> = None;
    for i in 1..=SAMPLES {
        let f = i as f64 / SAMPLES as f64;
        let (px, py) = pos_at(f);
        if world.disc_free(px, py, state.radius) {
            free_f = f;
        } else {
            hit_f = Some(f);
            break;
        }
    }

    let reached = match hit_f {
        None => 1.0,
        Some(mut hi) => {
            let mut lo = free_f;
            for _ in 0..48 {
                let mid = 0.5 * (lo + hi);
                let (px, py) = pos_at(mid);
                if world.disc_free(px, py, state.radius) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        }
    };

    let (nx, ny) = pos_at(reached);
    let out = RobotState {
        x: nx,
        y: ny,
        heading: final_heading,
        radius: state.radius,
    };
    debug_assert!(world.disc_free(out.x, out.y, out.radius));
    StepOutcome {
        state: out,
        contact: hit_f.is_some(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn tiny_world() -> WorldMap {
        // center free cell in a closed 3x3 room, 100mm cells
        load_world("cellsize_mm=100\n###\n#R#\n###\n").unwrap()
    }

    /// A closed square room of `n` free cells across, 10mm cells, start in
    /// the middle.
    fn room(n: usize) -> WorldMap {
        let mut doc = String::from("cellsize_mm=10\n");
        let side = n + 2;
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
        load_world(&doc).unwrap()
    }

    #[test]
    fn minimal_legal_world() {
        let w = tiny_world();
        assert_eq!((w.width(), w.height()), (3, 3));
        let p = w.start_pose();
        assert!((p.x - 0.15).abs() < 1e-12 && (p.y - 0.15).abs() < 1e-12);
    }

    #[test]
    fn ragged_line_reported() {
        let err = load_world("cellsize_mm=10\n###\n##\n###\n").unwrap_err();
        assert_eq!(
            err,
            MapError::RaggedLine {
                line: 3,
                got: 2,
                want: 3
            }
        );
    }

    #[test]
    fn start_count_enforced() {
        assert_eq!(
            load_world("cellsize_mm=10\n###\n#.#\n###\n").unwrap_err(),
            MapError::NoStart
        );
        let err = load_world("cellsize_mm=10\n####\n#RR#\n####\n").unwrap_err();
        assert_eq!(err, MapError::DuplicateStart { line: 3, col: 4 });
    }

    #[test]
    fn unknown_char_and_boundary() {
        let err = load_world("cellsize_mm=10\n###\n#X#\n###\n").unwrap_err();
        assert_eq!(
            err,
            MapError::UnknownChar {
                line: 3,
                col: 2,
                ch: 'X'
            }
        );
        let err = load_world("cellsize_mm=10\n#.#\n#R#\n###\n").unwrap_err();
        assert_eq!(err, MapError::UnclosedBoundary { line: 2, col: 2 });
    }

    #[test]
    fn header_required() {
        assert_eq!(load_world("").unwrap_err(), MapError::Empty);
        assert_eq!(load_world("###\n#R#\n###\n").unwrap_err(), MapError::BadHeader);
    }

    #[test]
    fn table_scale_world() {
        // 170x170 at 8.8mm is the 2.25 m^2 benchmark footprint
        let mut doc = String::from("cellsize_mm=8.8\n");
        for y in 0..170 {
            for x in 0..170 {
                if x == 0 || y == 0 || x == 169 || y == 169 {
                    doc.push('#');
                } else if x == 85 && y == 85 {
                    doc.push('R');
                } else {
                    doc.push('.');
                }
            }
            doc.push('\n');
        }
        let w = load_world(&doc).unwrap();
        assert_eq!(w.cell_count(), 28900);
        let side_m = w.width() as f64 * w.cell_size();
        assert!((side_m - 1.496).abs() < 1e-9);
    }

    #[test]
    fn sonar_clamps_at_max_range() {
        let w = room(60); // 0.6 m across; free space everywhere near center
        let s = RobotState::at(w.start_pose(), 0.0275);
        for beam in 0..BEAM_COUNT {
            assert_eq!(cast_sonar(&w, &s, beam, 0.15), 0.15);
        }
    }

    #[test]
    fn sonar_direct_hit() {
        let w = room(60);
        // wall at x = 0.61 (left face of the boundary column); robot edge
        // 0.05m short of it, beam 0 pointing +x
        let s = RobotState {
            x: 0.61 - 0.05 - 0.0275,
            y: w.start_pose().y,
            heading: 0.0,
            radius: 0.0275,
        };
        let r = cast_sonar(&w, &s, 0, 0.15);
        assert!((r - 0.05).abs() < 1e-12, "got {r}");
    }

    #[test]
    fn square_room_scan_symmetry() {
        let w = room(21); // odd side, start exactly centered
        let s = RobotState::at(w.start_pose(), 0.0275);
        let scan = scan_ideal(&w, &s, 0.15);
        // 90 degrees = 6 beams; the room is square-symmetric
        for beam in 0..BEAM_COUNT {
            let rot = (beam + 6) % BEAM_COUNT;
            assert!(
                (scan.ranges[beam] - scan.ranges[rot]).abs() < 1e-9,
                "beam {beam} vs {rot}"
            );
        }
    }

    #[test]
    fn sonar_matches_marching_oracle() {
        // oracle: march the ray in tiny steps and bisect the first
        // occupied sample
        fn oracle(world: &WorldMap, state: &RobotState, beam: usize, max: f64) -> f64 {
            let angle = state.heading + SonarScan::beam_offset(beam);
            let (dx, dy) = (angle.cos(), angle.sin());
            let ox = state.x + state.radius * dx;
            let oy = state.y + state.radius * dy;
            let occupied_at = |t: f64| {
                let (cx, cy) = world.cell_of(ox + t * dx, oy + t * dy);
                world.is_occupied(cx, cy)
            };
            let dt = 1e-5;
            let mut t = 0.0;
            while t <= max {
                if occupied_at(t) {
                    let mut lo = (t - dt).max(0.0);
                    let mut hi = t;
                    for _ in 0..60 {
                        let mid = 0.5 * (lo + hi);
                        if occupied_at(mid) {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    return hi.min(max);
                }
                t += dt;
            }
            max
        }

        let w = room(30);
        for (px, py, heading) in [
            (0.16, 0.16, 0.3),
            (0.05, 0.21, 1.1),
            (0.25, 0.08, -2.0),
            (0.12, 0.27, 3.0),
        ] {
            let s = RobotState {
                x: px,
                y: py,
                heading,
                radius: 0.0275,
            };
            assert!(w.disc_free(s.x, s.y, s.radius));
            for beam in 0..BEAM_COUNT {
                let fast = cast_sonar(&w, &s, beam, 0.15);
                let slow = oracle(&w, &s, beam, 0.15);
                assert!(
                    (fast - slow).abs() < 1e-6,
                    "pose ({px},{py},{heading}) beam {beam}: {fast} vs {slow}"
                );
            }
        }
    }

    #[test]
    fn zero_command_is_identity() {
        let w = room(30);
        let s = RobotState::at(w.start_pose(), 0.0275);
        let out = step_robot(&w, &s, Command::STOP, 0.1);
        assert_eq!(out.state, s);
        assert!(!out.contact);
    }

    #[test]
    fn straight_line_displacement() {
        let w = room(60);
        let s = RobotState::at(w.start_pose(), 0.0275);
        let out = step_robot(&w, &s, Command::new(0.08, 0.0), 0.1);
        assert!((out.state.x - (s.x + 0.008)).abs() < 1e-12);
        assert!((out.state.y - s.y).abs() < 1e-12);
        assert!(!out.contact);
    }

    #[test]
    fn wall_contact_truncates() {
        let w = room(60);
        // robot edge 1mm from the east wall at x = 0.61
        let s = RobotState {
            x: 0.61 - 0.001 - 0.0275,
            y: w.start_pose().y,
            heading: 0.0,
            radius: 0.0275,
        };
        let out = step_robot(&w, &s, Command::new(0.08, 0.0), 0.1);
        assert!(out.contact);
        // moved forward but never past the wall
        assert!(out.state.x > s.x);
        assert!(out.state.x + out.state.radius <= 0.61 + 1e-9);
        assert!(w.disc_free(out.state.x, out.state.y, out.state.radius));
    }

    #[test]
    fn rotation_always_completes() {
        let w = room(60);
        let s = RobotState {
            x: 0.61 - 0.0005 - 0.0275,
            y: w.start_pose().y,
            heading: 0.0,
            radius: 0.0275,
        };
        let out = step_robot(&w, &s, Command::new(0.0, PI), 0.1);
        assert!((out.state.heading - FRAC_PI_2 * (PI * 0.1) / FRAC_PI_2).abs() < 1e-12);
        assert!(!out.contact);
    }

    #[test]
    fn heading_stays_normalized() {
        let w = room(30);
        let mut s = RobotState::at(w.start_pose(), 0.0275);
        for _ in 0..100 {
            s = step_robot(&w, &s, Command::new(0.0, 3.0), 0.1).state;
            assert!((-PI..PI).contains(&s.heading));
        }
    }

    #[test]
    fn random_commands_never_overlap_walls() {
        let w = room(40);
        let mut s = RobotState::at(w.start_pose(), 0.0275);
        // deterministic pseudo-random command tape
        let mut z = 0x12345u64;
        let mut next = || {
            z ^= z << 13;
            z ^= z >> 7;
            z ^= z << 17;
            (z >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..3000 {
            let v = (next() * 2.0 - 1.0) * 0.08;
            let wv = (next() * 2.0 - 1.0) * PI;
            s = step_robot(&w, &s, Command::new(v, wv), 0.1).state;
            assert!(w.disc_free(s.x, s.y, s.radius));
        }
    }

    #[test]
    fn noisy_scan_is_reproducible_and_bounded() {
        let w = room(30);
        let s = RobotState::at(w.start_pose(), 0.0275);
        let p = Params::default();
        let a = scan_sonar(&w, &s, &p, 7, 123);
        let b = scan_sonar(&w, &s, &p, 7, 123);
        assert_eq!(a, b);
        let c = scan_sonar(&w, &s, &p, 7, 124);
        assert_ne!(a, c);
        for r in a.ranges {
            assert!((0.0..=0.15).contains(&r));
        }
        // noise within +/-2% of the ideal reading
        let ideal = scan_ideal(&w, &s, 0.15);
        for (n, i) in a.ranges.iter().zip(ideal.ranges.iter()) {
            assert!((n - i).abs() <= 0.02 * i + 1e-12);
        }
    }
}
