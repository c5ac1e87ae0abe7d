//! Experiment runner: drive either controller on a map, collect the
//! benchmark metrics, and emit CSV rows plus optional stage renders.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::explore_vi::{compute_cost_matrix, exploration_direction, CostMatrix};
use crate::navigate::{controller_step, ControllerState};
use crate::occupancy::{
    classify, coverage_with_mask, integrate_scan, reachable_free_mask, OccupancyGrid,
};
use crate::params::{ParamError, Params};
use crate::render;
use crate::topo_graph::build_graph;
use crate::world::{load_world, scan_sonar, step_robot, MapError, RobotState, WorldMap};

/// The five benchmark environments shipped with the crate.
pub const BUNDLED_MAPS: [(&str, &str); 5] = [
    ("open_room", include_str!("../maps/open_room.txt")),
    ("radial_maze", include_str!("../maps/radial_maze.txt")),
    ("maze", include_str!("../maps/maze.txt")),
    ("office", include_str!("../maps/office.txt")),
    ("aaai", include_str!("../maps/aaai.txt")),
];

/// Look up a bundled map document by name.
pub fn bundled_map(name: &str) -> Option<&'static str> {
    BUNDLED_MAPS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

/// Which exploration controller drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Controller {
    Vi,
    Topo,
}

impl fmt::Display for Controller {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Controller::Vi => write!(f, "vi"),
            Controller::Topo => write!(f, "topo"),
        }
    }
}

impl FromStr for Controller {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vi" => Ok(Controller::Vi),
            "topo" => Ok(Controller::Topo),
            other => Err(format!("unknown controller `{other}` (expected vi|topo)")),
        }
    }
}

/// Everything one run needs.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Bundled map name, or a filesystem path to a map document.
    pub map: String,
    pub controller: Controller,
    pub seed: u64,
    pub step_cap: u32,
    pub params: Params,
    /// When set, stage renders and the event log are written here.
    pub render_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(map: &str, controller: Controller, seed: u64) -> Self {
        Self {
            map: map.to_string(),
            controller,
            seed,
            step_cap: 50_000,
            params: Params::default(),
            render_dir: None,
        }
    }
}

/// Metrics of one finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub map: String,
    pub controller: Controller,
    pub seed: u64,
    /// Control steps until target coverage (total steps run if never
    /// reached).
    pub steps: u32,
    /// Simulated time, `steps * dt` seconds.
    pub sim_time_s: f64,
    /// Cost-matrix cell count (vi) or final graph node count (topo).
    pub entities: usize,
    pub coverage: f64,
    pub reached_target: bool,
    pub collisions: u32,
    /// Mean wall-clock milliseconds per planner rebuild; informational,
    /// excluded from the CSV so output stays byte-reproducible.
    pub planning_ms: f64,
}

pub const CSV_HEADER: &str = "map,controller,seed,steps,sim_time_s,entities,coverage";

impl MetricsRecord {
    /// The deterministic CSV projection.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.map,
            self.controller,
            self.seed,
            self.steps,
            self.sim_time_s,
            self.entities,
            self.coverage
        )
    }

    /// Parse a row produced by [`csv_row`](Self::csv_row).
    pub fn from_csv_row(row: &str) -> Option<MetricsRecord> {
        let mut it = row.split(',');
        let map = it.next()?.to_string();
        let controller = it.next()?.parse().ok()?;
        let seed = it.next()?.parse().ok()?;
        let steps = it.next()?.parse().ok()?;
        let sim_time_s = it.next()?.parse().ok()?;
        let entities = it.next()?.parse().ok()?;
        let coverage = it.next()?.parse().ok()?;
        if it.next().is_some() {
            return None;
        }
        Some(MetricsRecord {
            map,
            controller,
            seed,
            steps,
            sim_time_s,
            entities,
            coverage,
            reached_target: false,
            collisions: 0,
            planning_ms: 0.0,
        })
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("map `{0}` is neither bundled nor a readable file")]
    MapNotFound(String),
    #[error("map `{name}`: {source}")]
    MapInvalid {
        name: String,
        #[source]
        source: MapError,
    },
    #[error("invalid parameter: {0}")]
    BadParam(#[from] ParamError),
    #[error("step cap must be positive")]
    ZeroStepCap,
    #[error("start pose has no clearance for the robot disc")]
    StartBlocked,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Full output of one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: MetricsRecord,
    /// Controller event log lines (`step,mode,coverage,event`).
    pub events: Vec<String>,
    /// Final occupancy grid, for stage rendering.
    pub final_grid: OccupancyGrid,
    /// Final classification of the grid.
    pub final_classmap: crate::occupancy::CellClassMap,
}

fn load_map(name_or_path: &str) -> Result<(String, WorldMap), RunError> {
    if let Some(text) = bundled_map(name_or_path) {
        let world = load_world(text).map_err(|source| RunError::MapInvalid {
            name: name_or_path.to_string(),
            source,
        })?;
        return Ok((name_or_path.to_string(), world));
    }
    let path = std::path::Path::new(name_or_path);
    if !path.is_file() {
        return Err(RunError::MapNotFound(name_or_path.to_string()));
    }
    let text = std::fs::read_to_string(path)?;
    let world = load_world(&text).map_err(|source| RunError::MapInvalid {
        name: name_or_path.to_string(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| name_or_path.to_string());
    Ok((name, world))
}

/// Run one experiment to target coverage or the step cap. Deterministic
/// for a given `(config, seed)`.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput, RunError> {
    if config.step_cap == 0 {
        return Err(RunError::ZeroStepCap);
    }
    let params = &config.params;
    let (map_name, world) = load_map(&config.map)?;
    let start = world.start_pose();
    if !world.disc_free(start.x, start.y, params.robot_radius) {
        return Err(RunError::StartBlocked);
    }

    let mask = reachable_free_mask(&world, params.robot_radius);
    let mut grid = OccupancyGrid::for_world(&world, params);
    let mut state = RobotState::at(start, params.robot_radius);
    let mut ctrl = ControllerState::new();
    let mut cost: Option<CostMatrix> = None;

    let mut coverage = 0.0f64;
    let mut collisions = 0u32;
    let mut reached: Option<u32> = None;
    let mut steps_run = 0u32;
    let mut planning_ms_total = 0.0f64;
    let mut planning_rebuilds = 0u32;

    for step in 0..config.step_cap {
        steps_run = step + 1;
        let scan = scan_sonar(&world, &state, params, config.seed, step as u64);
        integrate_scan(&mut grid, &state, &scan, params)
            .expect("robot pose stays inside the world");

        if step % params.coverage_every == 0 {
            let cm = classify(&grid, params);
            coverage = coverage_with_mask(&cm, &mask).expect("same footprint");
            if coverage >= params.coverage_target {
                reached = Some(step + 1);
                break;
            }
        }

        let cmd = match config.controller {
            Controller::Vi => {
                if cost.is_none() || step % params.vi_rebuild_every == 0 {
                    let cm = classify(&grid, params);
                    let t0 = Instant::now();
                    cost = Some(compute_cost_matrix(&cm, params));
                    planning_ms_total += t0.elapsed().as_secs_f64() * 1e3;
                    planning_rebuilds += 1;
                }
                exploration_direction(cost.as_ref().unwrap(), &state, &scan, params)
            }
            Controller::Topo => {
                let plans_before = ctrl.plans_built;
                let t0 = Instant::now();
                let cmd = controller_step(
                    &mut ctrl, &state, &scan, &grid, coverage, step as u64, params,
                );
                if ctrl.plans_built > plans_before {
                    planning_ms_total += t0.elapsed().as_secs_f64() * 1e3;
                    planning_rebuilds += 1;
                }
                cmd
            }
        };

        let out = step_robot(&world, &state, cmd, params.dt);
        if out.contact {
            collisions += 1;
        }
        state = out.state;

        if ctrl.complete {
            break;
        }
    }

    // final classification for reporting and rendering
    let final_classmap = classify(&grid, params);
    coverage = coverage_with_mask(&final_classmap, &mask).expect("same footprint");
    if reached.is_none() && coverage >= params.coverage_target {
        reached = Some(steps_run);
    }

    let entities = match config.controller {
        Controller::Vi => world.cell_count(),
        Controller::Topo => {
            let t0 = Instant::now();
            let build = build_graph(&final_classmap, params);
            if planning_rebuilds == 0 {
                planning_ms_total += t0.elapsed().as_secs_f64() * 1e3;
                planning_rebuilds = 1;
            }
            build.graph.node_count()
        }
    };

    if let Some(dir) = &config.render_dir {
        std::fs::create_dir_all(dir)?;
        write_stage_renders(dir, &grid, &final_classmap, config.controller, params)?;
        let mut log = String::new();
        for e in &ctrl.events {
            log.push_str(&e.to_line());
            log.push('\n');
        }
        std::fs::write(dir.join("events.log"), log)?;
    }

    let steps = reached.unwrap_or(steps_run);
    let metrics = MetricsRecord {
        map: map_name,
        controller: config.controller,
        seed: config.seed,
        steps,
        sim_time_s: steps as f64 * params.dt,
        entities,
        coverage,
        reached_target: reached.is_some(),
        collisions,
        planning_ms: if planning_rebuilds > 0 {
            planning_ms_total / planning_rebuilds as f64
        } else {
            0.0
        },
    };
    Ok(RunOutput {
        metrics,
        events: ctrl.events.iter().map(|e| e.to_line()).collect(),
        final_grid: grid,
        final_classmap,
    })
}

/// Render one named stage of a finished run into `out`.
pub fn render_stage(
    grid: &OccupancyGrid,
    classmap: &crate::occupancy::CellClassMap,
    params: &Params,
    stage: &str,
) -> Result<Vec<u8>, String> {
    match stage {
        "grid" => Ok(render::render_grid(grid)),
        "classmap" => Ok(render::render_classmap(classmap)),
        "cost" => Ok(render::render_cost(&compute_cost_matrix(classmap, params))),
        "skeleton" => {
            let b = build_graph(classmap, params);
            Ok(render::render_skeleton(&b.eroded, &b.skeleton))
        }
        "graph" => {
            let b = build_graph(classmap, params);
            Ok(render::render_graph(&b.eroded, &b.skeleton, &b.graph))
        }
        other => Err(format!("unknown stage `{other}`")),
    }
}

fn write_stage_renders(
    dir: &std::path::Path,
    grid: &OccupancyGrid,
    classmap: &crate::occupancy::CellClassMap,
    controller: Controller,
    params: &Params,
) -> std::io::Result<()> {
    std::fs::write(dir.join("grid.pgm"), render::render_grid(grid))?;
    std::fs::write(dir.join("classmap.pgm"), render::render_classmap(classmap))?;
    match controller {
        Controller::Vi => {
            let cost = compute_cost_matrix(classmap, params);
            std::fs::write(dir.join("cost.pgm"), render::render_cost(&cost))?;
        }
        Controller::Topo => {
            let b = build_graph(classmap, params);
            std::fs::write(
                dir.join("skeleton.pgm"),
                render::render_skeleton(&b.eroded, &b.skeleton),
            )?;
            std::fs::write(
                dir.join("graph.ppm"),
                render::render_graph(&b.eroded, &b.skeleton, &b.graph),
            )?;
        }
    }
    Ok(())
}

/// One cell of a comparison sweep.
#[derive(Debug)]
pub struct CompareCell {
    pub map: String,
    pub controller: Controller,
    pub seed: u64,
    pub result: Result<MetricsRecord, RunError>,
}

/// Outcome of a full comparison sweep.
#[derive(Debug)]
pub struct CompareReport {
    pub cells: Vec<CompareCell>,
    /// Criterion flags evaluated over the sweep (see [`check_flags`]).
    pub flags: CheckFlags,
}

/// Pass/fail summary of the benchmark acceptance thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckFlags {
    /// Every run reached >= 95% coverage inside the cap with 0 contacts.
    pub full_exploration: bool,
    /// Topo node counts within [20, 300] and entity ratio >= 50 per map.
    pub entity_gap: bool,
    /// Maze-class maps: topo mean steps <= 85% of vi; open-class: <= 110%.
    pub time_profit: bool,
    /// Any run errored.
    pub had_errors: bool,
}

impl CheckFlags {
    pub fn all_pass(&self) -> bool {
        self.full_exploration && self.entity_gap && self.time_profit && !self.had_errors
    }
}

/// Maps where the topological controller is expected to win time.
pub const MAZE_CLASS: [&str; 3] = ["maze", "office", "aaai"];
/// Maps where it only must not lose badly.
pub const OPEN_CLASS: [&str; 2] = ["open_room", "radial_maze"];

/// Run both controllers over every `(map, seed)` cell, in parallel, and
/// evaluate the acceptance flags. Cell order in the report is
/// deterministic regardless of scheduling.
pub fn compare(maps: &[String], seeds: &[u64], params: &Params, step_cap: u32) -> CompareReport {
    let mut configs = Vec::new();
    for map in maps {
        for &controller in &[Controller::Vi, Controller::Topo] {
            for &seed in seeds {
                let mut c = ExperimentConfig::new(map, controller, seed);
                c.params = params.clone();
                c.step_cap = step_cap;
                configs.push(c);
            }
        }
    }
    let mut cells: Vec<(usize, CompareCell)> = configs
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let result = run(c).map(|o| o.metrics);
            (
                i,
                CompareCell {
                    map: c.map.clone(),
                    controller: c.controller,
                    seed: c.seed,
                    result,
                },
            )
        })
        .collect();
    cells.sort_by_key(|(i, _)| *i);
    let cells: Vec<CompareCell> = cells.into_iter().map(|(_, c)| c).collect();
    let flags = check_flags(&cells, params);
    CompareReport { cells, flags }
}

/// Mean steps per (map, controller) over the successful runs.
fn mean_steps(cells: &[CompareCell], map: &str, controller: Controller) -> Option<f64> {
    let steps: Vec<f64> = cells
        .iter()
        .filter(|c| c.map == map && c.controller == controller)
        .filter_map(|c| c.result.as_ref().ok())
        .map(|m| m.steps as f64)
        .collect();
    (!steps.is_empty()).then(|| steps.iter().sum::<f64>() / steps.len() as f64)
}

fn check_flags(cells: &[CompareCell], params: &Params) -> CheckFlags {
    let had_errors = cells.iter().any(|c| c.result.is_err());
    let full_exploration = !had_errors
        && cells.iter().all(|c| match &c.result {
            Ok(m) => m.reached_target && m.coverage >= params.coverage_target && m.collisions == 0,
            Err(_) => false,
        });

    let maps: Vec<String> = {
        let mut v: Vec<String> = cells.iter().map(|c| c.map.clone()).collect();
        v.sort();
        v.dedup();
        v
    };

    let mut entity_gap = true;
    for map in &maps {
        let vi_entities: Vec<usize> = cells
            .iter()
            .filter(|c| c.map == *map && c.controller == Controller::Vi)
            .filter_map(|c| c.result.as_ref().ok())
            .map(|m| m.entities)
            .collect();
        let topo_entities: Vec<usize> = cells
            .iter()
            .filter(|c| c.map == *map && c.controller == Controller::Topo)
            .filter_map(|c| c.result.as_ref().ok())
            .map(|m| m.entities)
            .collect();
        for &n in &topo_entities {
            if !(20..=300).contains(&n) {
                entity_gap = false;
            }
            for &cellcount in &vi_entities {
                if (cellcount as f64) < 50.0 * n as f64 {
                    entity_gap = false;
                }
            }
        }
        if topo_entities.is_empty() || vi_entities.is_empty() {
            entity_gap = false;
        }
    }

    let mut time_profit = true;
    for map in &maps {
        let (Some(vi), Some(topo)) = (
            mean_steps(cells, map, Controller::Vi),
            mean_steps(cells, map, Controller::Topo),
        ) else {
            time_profit = false;
            continue;
        };
        if MAZE_CLASS.contains(&map.as_str()) && topo > 0.85 * vi {
            time_profit = false;
        }
        if OPEN_CLASS.contains(&map.as_str()) && topo > 1.10 * vi {
            time_profit = false;
        }
    }

    CheckFlags {
        full_exploration,
        entity_gap,
        time_profit,
        had_errors,
    }
}

impl CompareReport {
    /// Per-run CSV document (header plus one row per successful run, in
    /// deterministic cell order).
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            if let Ok(m) = &c.result {
                out.push_str(&m.csv_row());
                out.push('\n');
            }
        }
        out
    }

    /// Human-readable per-map summary table.
    pub fn to_table(&self) -> String {
        let mut maps: Vec<String> = self.cells.iter().map(|c| c.map.clone()).collect();
        let mut seen = std::collections::HashSet::new();
        maps.retain(|m| seen.insert(m.clone()));

        let mut out = String::new();
        out.push_str(&format!(
            "{:<12} {:>9} {:>9} {:>10} {:>10} {:>9} {:>9} {:>8}\n",
            "map", "vi_steps", "topo_steps", "vi_time_s", "topo_time", "vi_ent", "topo_ent", "profit"
        ));
        for map in &maps {
            let vi = mean_steps(&self.cells, map, Controller::Vi);
            let topo = mean_steps(&self.cells, map, Controller::Topo);
            let ent = |ctl: Controller| -> String {
                let v: Vec<usize> = self
                    .cells
                    .iter()
                    .filter(|c| c.map == *map && c.controller == ctl)
                    .filter_map(|c| c.result.as_ref().ok())
                    .map(|m| m.entities)
                    .collect();
                if v.is_empty() {
                    "-".into()
                } else {
                    format!("{}", (v.iter().sum::<usize>() as f64 / v.len() as f64).round() as usize)
                }
            };
            let (vi_s, topo_s, vi_t, topo_t, profit) = match (vi, topo) {
                (Some(v), Some(t)) => (
                    format!("{v:.0}"),
                    format!("{t:.0}"),
                    format!("{:.1}", v * 0.1),
                    format!("{:.1}", t * 0.1),
                    format!("{:.1}%", 100.0 * (v - t) / v),
                ),
                _ => ("-".into(), "-".into(), "-".into(), "-".into(), "-".into()),
            };
            out.push_str(&format!(
                "{:<12} {:>9} {:>9} {:>10} {:>10} {:>9} {:>9} {:>8}\n",
                map,
                vi_s,
                topo_s,
                vi_t,
                topo_t,
                ent(Controller::Vi),
                ent(Controller::Topo),
                profit
            ));
        }
        out
    }
}
