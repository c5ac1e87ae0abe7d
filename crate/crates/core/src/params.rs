//! Tunable parameters for the whole pipeline, with the defaults used by the
//! bundled benchmarks. Every field can be overridden from a `key=value`
//! config file or a CLI flag of the same name.

use std::fmt;

use thiserror::Error;

/// All knobs in one place. Units are meters / seconds / cells as noted.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    // -- robot & world --
    /// Robot disc radius (m). Khepera-sized.
    pub robot_radius: f64,
    /// Forward speed limit (m/s).
    pub v_max: f64,
    /// Turn rate limit (rad/s).
    pub w_max: f64,
    /// Control period (s).
    pub dt: f64,
    /// Sonar range limit (m).
    pub sonar_range: f64,
    /// Sonar noise amplitude as a fraction of the reading.
    pub sonar_noise: f64,
    /// Enable sonar noise.
    pub noise_enabled: bool,

    // -- occupancy --
    /// Log-odds clamp magnitude.
    pub logodds_clamp: f64,
    /// Conditional probability assigned to cells well inside a beam.
    pub p_free: f64,
    /// Peak conditional probability at the measured range.
    pub p_occ_peak: f64,
    /// Occupied-band half-width, in multiples of the cell size.
    pub band_cells: f64,
    /// Sonar cone half-angle (rad). Beams tile the circle: 360/24/2 degrees.
    pub cone_half_angle: f64,
    /// P(occ) at or below which an observed cell classifies FREE.
    pub free_threshold: f64,
    /// P(occ) at or above which a cell classifies OCCUPIED.
    pub occ_threshold: f64,

    // -- value-iteration controller --
    /// Cost-drop weight in the direction blend.
    pub w_cost: f64,
    /// Heading-inertia weight.
    pub w_heading: f64,
    /// Obstacle-proximity weight.
    pub w_obstacle: f64,
    /// Range below which the chosen direction counts as blocked (m).
    pub stop_distance: f64,
    /// Controller steps between cost-matrix rebuilds.
    pub vi_rebuild_every: u32,
    /// Axial step cost in the relaxation.
    pub step_axial: f64,
    /// Diagonal step cost in the relaxation.
    pub step_diagonal: f64,
    /// Convergence threshold for the relaxation sweeps.
    pub vi_epsilon: f64,

    // -- skeleton / graph --
    /// Max chain deviation from the straight edge before splitting (px).
    pub split_limit: f64,
    /// Use the literal first-pixel-over-limit split instead of the
    /// max-deviation split.
    pub split_first_exceed: bool,
    /// Evaluate the neighbour-transition guards as the literal `< 1`
    /// instead of `!= 1`.
    pub thin_literal_guard: bool,
    /// Extra pruning margin added to the robot radius (cells).
    pub prune_extra_cells: u32,
    /// Chebyshev radius for goal-node selection (cells).
    pub goal_radius: u32,

    // -- alternating controller --
    /// Stagnation window length (control steps).
    pub stagnation_window: u32,
    /// Minimum coverage gain over the window before a graph is built.
    pub stagnation_delta: f64,
    /// Waypoint arrival tolerance, in multiples of the robot radius.
    pub waypoint_tol_radii: f64,
    /// Heading error above which the robot turns in place (rad).
    pub turn_in_place: f64,
    /// Path abandoned after this many steps without reaching a waypoint.
    pub follow_patience: u32,

    // -- harness --
    /// Coverage fraction at which a run terminates.
    pub coverage_target: f64,
    /// Steps between coverage evaluations.
    pub coverage_every: u32,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            robot_radius: 0.0275,
            v_max: 0.08,
            w_max: std::f64::consts::PI,
            dt: 0.1,
            sonar_range: 0.15,
            sonar_noise: 0.02,
            noise_enabled: true,

            logodds_clamp: 10.0,
            p_free: 0.30,
            p_occ_peak: 0.75,
            band_cells: 1.5,
            cone_half_angle: 7.5f64.to_radians(),
            free_threshold: 0.4,
            occ_threshold: 0.6,

            w_cost: 1.0,
            w_heading: 0.3,
            w_obstacle: 2.0,
            stop_distance: 0.04,
            vi_rebuild_every: 10,
            step_axial: 1.0,
            step_diagonal: std::f64::consts::SQRT_2,
            vi_epsilon: 1e-9,

            split_limit: 3.0,
            split_first_exceed: false,
            thin_literal_guard: false,
            prune_extra_cells: 2,
            goal_radius: 15,

            stagnation_window: 150,
            stagnation_delta: 0.005,
            waypoint_tol_radii: 1.5,
            turn_in_place: 30f64.to_radians(),
            follow_patience: 120,

            coverage_target: 0.95,
            coverage_every: 5,
        }
    }
}

/// Rejected parameter override.
#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("unknown parameter `{0}`")]
    UnknownKey(String),
    #[error("parameter `{key}`: bad value `{value}`")]
    BadValue { key: String, value: String },
    #[error("parameter `{key}` = {value} outside its range")]
    OutOfRange { key: String, value: f64 },
    #[error("config line {0}: expected `key=value`")]
    BadLine(usize),
}

impl Params {
    /// Robot radius expressed in cells of a grid with the given cell size.
    pub fn radius_cells(&self, cell_size: f64) -> f64 {
        self.robot_radius / cell_size
    }

    /// Pruning margin in whole cells: the robot radius rounded up plus the
    /// configured extra.
    pub fn prune_margin(&self, cell_size: f64) -> u32 {
        self.radius_cells(cell_size).ceil() as u32 + self.prune_extra_cells
    }

    /// Apply one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ParamError> {
        fn f(key: &str, value: &str) -> Result<f64, ParamError> {
            value.trim().parse::<f64>().map_err(|_| ParamError::BadValue {
                key: key.to_string(),
                value: value.to_string(),
            })
        }
        fn u(key: &str, value: &str) -> Result<u32, ParamError> {
            value.trim().parse::<u32>().map_err(|_| ParamError::BadValue {
                key: key.to_string(),
                value: value.to_string(),
            })
        }
        fn b(key: &str, value: &str) -> Result<bool, ParamError> {
            match value.trim() {
                "true" | "1" | "on" => Ok(true),
                "false" | "0" | "off" => Ok(false),
                _ => Err(ParamError::BadValue {
                    key: key.to_string(),
                    value: value.to_string(),
                }),
            }
        }
        fn positive(key: &str, v: f64) -> Result<f64, ParamError> {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(ParamError::OutOfRange {
                    key: key.to_string(),
                    value: v,
                })
            }
        }
        fn unit(key: &str, v: f64) -> Result<f64, ParamError> {
            if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                Err(ParamError::OutOfRange {
                    key: key.to_string(),
                    value: v,
                })
            }
        }

        match key {
            "robot_radius" => self.robot_radius = positive(key, f(key, value)?)?,
            "v_max" => self.v_max = positive(key, f(key, value)?)?,
            "w_max" => self.w_max = positive(key, f(key, value)?)?,
            "dt" => self.dt = positive(key, f(key, value)?)?,
            "sonar_range" => self.sonar_range = positive(key, f(key, value)?)?,
            "sonar_noise" => self.sonar_noise = unit(key, f(key, value)?)?,
            "noise_enabled" => self.noise_enabled = b(key, value)?,
            "logodds_clamp" => self.logodds_clamp = positive(key, f(key, value)?)?,
            "p_free" => self.p_free = unit(key, f(key, value)?)?,
            "p_occ_peak" => self.p_occ_peak = unit(key, f(key, value)?)?,
            "band_cells" => self.band_cells = positive(key, f(key, value)?)?,
            "cone_half_angle" => self.cone_half_angle = f(key, value)?,
            "free_threshold" => self.free_threshold = unit(key, f(key, value)?)?,
            "occ_threshold" => self.occ_threshold = unit(key, f(key, value)?)?,
            "w_cost" => self.w_cost = f(key, value)?,
            "w_heading" => self.w_heading = f(key, value)?,
            "w_obstacle" => self.w_obstacle = f(key, value)?,
            "stop_distance" => self.stop_distance = positive(key, f(key, value)?)?,
            "vi_rebuild_every" => self.vi_rebuild_every = u(key, value)?.max(1),
            "step_axial" => self.step_axial = positive(key, f(key, value)?)?,
            "step_diagonal" => self.step_diagonal = positive(key, f(key, value)?)?,
            "vi_epsilon" => self.vi_epsilon = positive(key, f(key, value)?)?,
            "split_limit" => self.split_limit = positive(key, f(key, value)?)?,
            "split_first_exceed" => self.split_first_exceed = b(key, value)?,
            "thin_literal_guard" => self.thin_literal_guard = b(key, value)?,
            "prune_extra_cells" => self.prune_extra_cells = u(key, value)?,
            "goal_radius" => self.goal_radius = u(key, value)?.max(1),
            "stagnation_window" => self.stagnation_window = u(key, value)?.max(1),
            "stagnation_delta" => self.stagnation_delta = unit(key, f(key, value)?)?,
            "waypoint_tol_radii" => self.waypoint_tol_radii = positive(key, f(key, value)?)?,
            "turn_in_place" => self.turn_in_place = positive(key, f(key, value)?)?,
            "follow_patience" => self.follow_patience = u(key, value)?.max(1),
            "coverage_target" => self.coverage_target = unit(key, f(key, value)?)?,
            "coverage_every" => self.coverage_every = u(key, value)?.max(1),
            _ => return Err(ParamError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Parse a whole `key=value` config document. Blank lines and `#`
    /// comments are skipped.
    pub fn apply_config(&mut self, text: &str) -> Result<(), ParamError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ParamError::BadLine(n + 1))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "robot_radius={}", self.robot_radius)?;
        writeln!(f, "v_max={}", self.v_max)?;
        writeln!(f, "dt={}", self.dt)?;
        writeln!(f, "sonar_range={}", self.sonar_range)?;
        writeln!(f, "noise_enabled={}", self.noise_enabled)?;
        writeln!(f, "split_limit={}", self.split_limit)?;
        writeln!(f, "goal_radius={}", self.goal_radius)?;
        writeln!(f, "stagnation_window={}", self.stagnation_window)?;
        write!(f, "stagnation_delta={}", self.stagnation_delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply() {
        let mut p = Params::default();
        p.set("split_limit", "4.5").unwrap();
        assert_eq!(p.split_limit, 4.5);
        p.set("noise_enabled", "off").unwrap();
        assert!(!p.noise_enabled);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut p = Params::default();
        assert_eq!(
            p.set("bogus", "1"),
            Err(ParamError::UnknownKey("bogus".into()))
        );
    }

    #[test]
    fn out_of_range_rejected() {
        let mut p = Params::default();
        assert!(matches!(
            p.set("coverage_target", "1.5"),
            Err(ParamError::OutOfRange { .. })
        ));
        assert!(matches!(
            p.set("v_max", "-1"),
            Err(ParamError::OutOfRange { .. })
        ));
    }

    #[test]
    fn config_document() {
        let mut p = Params::default();
        p.apply_config("# comment\n\nsplit_limit = 2\ngoal_radius=9\n")
            .unwrap();
        assert_eq!(p.split_limit, 2.0);
        assert_eq!(p.goal_radius, 9);
        assert!(matches!(
            p.apply_config("justakey\n"),
            Err(ParamError::BadLine(1))
        ));
    }

    #[test]
    fn prune_margin_rounds_radius_up() {
        let p = Params::default();
        // 27.5mm at 8.8mm cells = 3.125 cells -> ceil 4, plus 2.
        assert_eq!(p.prune_margin(0.0088), 6);
    }
}
