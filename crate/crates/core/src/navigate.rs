//! Topological exploration controller: reactive straight-ahead motion
//! alternating with goal-directed graph navigation. When coverage stops
//! growing, the graph is rebuilt, a goal node near unexplored space is
//! chosen and an A* path is followed node by node.

use std::collections::VecDeque;

use thiserror::Error;

use crate::geom::{angle_diff, line_cells};
use crate::grid::Grid;
use crate::occupancy::{classify, CellClass, CellClassMap, OccupancyGrid};
use crate::params::Params;
use crate::topo_graph::{build_graph, NavGraph};
use crate::world::{Command, RobotState, SonarScan, BEAM_COUNT};

/// Controller behaviour mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    NormalMove,
    FollowPath,
}

/// One line of the controller event log: `step,mode,coverage,event`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerEvent {
    pub step: u64,
    pub mode: Mode,
    pub coverage: f64,
    pub event: String,
}

impl ControllerEvent {
    pub fn to_line(&self) -> String {
        let mode = match self.mode {
            Mode::NormalMove => "normal",
            Mode::FollowPath => "follow",
        };
        format!("{},{},{:.6},{}", self.step, mode, self.coverage, self.event)
    }
}

/// Alternating-controller state.
#[derive(Debug, Clone)]
pub struct ControllerState {
    pub mode: Mode,
    /// Remaining waypoints in meters; front is the next target.
    pub path: VecDeque<(f64, f64)>,
    coverage_history: VecDeque<f64>,
    steps_since_waypoint: u32,
    /// Node count of the most recently built graph.
    pub last_graph_nodes: Option<usize>,
    /// Number of graph builds so far.
    pub plans_built: u32,
    /// Set once exploration is reported complete.
    pub complete: bool,
    pub events: Vec<ControllerEvent>,
}

impl ControllerState {
    pub fn new() -> Self {
        Self {
            mode: Mode::NormalMove,
            path: VecDeque::new(),
            coverage_history: VecDeque::new(),
            steps_since_waypoint: 0,
            last_graph_nodes: None,
            plans_built: 0,
            complete: false,
            events: Vec::new(),
        }
    }
}

impl Default for ControllerState {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("no goal node is reachable")]
    NoPath,
}

/// Nodes of the graph with at least one UNKNOWN cell within the Chebyshev
/// radius.
pub fn select_goals(graph: &NavGraph, classmap: &CellClassMap, radius: u32) -> Vec<usize> {
    let w = classmap.width();
    let h = classmap.height();
    // chessboard distance to the nearest UNKNOWN cell
    let mut dist = Grid::new(w, h, u32::MAX);
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if classmap.class(x, y) == CellClass::Unknown {
                dist.set(x, y, 0);
                queue.push_back((x, y));
            }
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        let base = *dist.get(x, y);
        if base >= radius {
            continue; // no need to grow past the query radius
        }
        for (dx, dy) in crate::grid::NEIGHBORS_8 {
            let nx = x as i64 + dx;
            let ny = y as i64 + dy;
            if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if *dist.get(nx, ny) > base + 1 {
                dist.set(nx, ny, base + 1);
                queue.push_back((nx, ny));
            }
        }
    }
    graph
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| *dist.get(n.x, n.y) <= radius)
        .map(|(i, _)| i)
        .collect()
}

/// A* over the graph to the cheapest-to-reach goal. The heuristic is the
/// smallest Euclidean distance to any goal, which never overestimates, so
/// the result is a minimum-length path. Ties break on node id.
pub fn astar(graph: &NavGraph, start: usize, goals: &[usize]) -> Result<Vec<usize>, PlanError> {
    let (path, _) = astar_with_stats(graph, start, goals)?;
    Ok(path)
}

/// A* plus the number of expanded nodes (for heuristic sanity checks).
pub fn astar_with_stats(
    graph: &NavGraph,
    start: usize,
    goals: &[usize],
) -> Result<(Vec<usize>, usize), PlanError> {
    if graph.is_empty() {
        return Err(PlanError::EmptyGraph);
    }
    if goals.contains(&start) {
        return Ok((vec![start], 0));
    }
    let goal_pos: Vec<(f64, f64)> = goals
        .iter()
        .map(|&g| (graph.nodes[g].x as f64, graph.nodes[g].y as f64))
        .collect();
    if goal_pos.is_empty() {
        return Err(PlanError::NoPath);
    }
    let h = |n: usize| -> f64 {
        let nx = graph.nodes[n].x as f64;
        let ny = graph.nodes[n].y as f64;
        goal_pos
            .iter()
            .map(|(gx, gy)| ((nx - gx).powi(2) + (ny - gy).powi(2)).sqrt() * graph.cell_size)
            .fold(f64::INFINITY, f64::min)
    };

    let adj = graph.adjacency();
    let n = graph.node_count();
    let mut g_score = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut expanded = 0usize;

    // min-heap by (f, node id)
    use std::cmp::Ordering;
    #[derive(PartialEq)]
    struct Item(f64, usize);
    impl Eq for Item {}
    impl PartialOrd for Item {
        fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Item {
        fn cmp(&self, o: &Self) -> Ordering {
            o.0.total_cmp(&self.0).then(o.1.cmp(&self.1).reverse())
        }
    }
    let mut heap = std::collections::BinaryHeap::new();
    g_score[start] = 0.0;
    heap.push(Item(h(start), start));

    while let Some(Item(_, node)) = heap.pop() {
        if closed[node] {
            continue;
        }
        closed[node] = true;
        expanded += 1;
        if goals.contains(&node) {
            let mut path = vec![node];
            let mut cur = node;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                path.push(cur);
            }
            path.reverse();
            return Ok((path, expanded));
        }
        for &(edge_idx, other) in &adj[node] {
            if closed[other] {
                continue;
            }
            let candidate = g_score[node] + graph.edges[edge_idx].length;
            if candidate < g_score[other] {
                g_score[other] = candidate;
                parent[other] = node;
                heap.push(Item(candidate + h(other), other));
            }
        }
    }
    Err(PlanError::NoPath)
}

/// The graph node to start planning from: nearest with a FREE line of
/// sight to the robot cell, else nearest outright.
pub fn attach_robot(
    graph: &NavGraph,
    state: &RobotState,
    classmap: &CellClassMap,
) -> Result<usize, PlanError> {
    if graph.is_empty() {
        return Err(PlanError::EmptyGraph);
    }
    let cs = classmap.cell_size();
    let rc = ((state.x / cs).floor() as i64, (state.y / cs).floor() as i64);
    let visible = |nx: usize, ny: usize| -> bool {
        line_cells(rc, (nx as i64, ny as i64)).into_iter().all(|(x, y)| {
            classmap.class_at(x, y) == CellClass::Free || (x, y) == rc
        })
    };
    let dist2 = |nx: usize, ny: usize| -> f64 {
        let px = (nx as f64 + 0.5) * cs - state.x;
        let py = (ny as f64 + 0.5) * cs - state.y;
        px * px + py * py
    };
    let mut best_visible: Option<(f64, usize)> = None;
    let mut best_any: Option<(f64, usize)> = None;
    for (i, n) in graph.nodes.iter().enumerate() {
        let d = dist2(n.x, n.y);
        if best_any.map_or(true, |(bd, _)| d < bd) {
            best_any = Some((d, i));
        }
        if visible(n.x, n.y) && best_visible.map_or(true, |(bd, _)| d < bd) {
            best_visible = Some((d, i));
        }
    }
    Ok(best_visible.or(best_any).map(|(_, i)| i).expect("non-empty"))
}

/// Drive toward the head waypoint: pop it when within tolerance, turn in
/// place when badly misaligned, otherwise full speed with proportional
/// steering.
pub fn follow_path(
    state: &RobotState,
    path: &mut VecDeque<(f64, f64)>,
    tolerance: f64,
    params: &Params,
) -> (Command, bool) {
    let mut popped = false;
    while let Some(&(wx, wy)) = path.front() {
        let dx = wx - state.x;
        let dy = wy - state.y;
        if (dx * dx + dy * dy).sqrt() <= tolerance {
            path.pop_front();
            popped = true;
            continue;
        }
        let bearing = dy.atan2(dx);
        let err = angle_diff(bearing, state.heading);
        if err.abs() > params.turn_in_place {
            let w = if err >= 0.0 { params.w_max } else { -params.w_max };
            return (Command::new(0.0, w), popped);
        }
        let w = (err / params.dt).clamp(-params.w_max, params.w_max);
        return (Command::new(params.v_max, w), popped);
    }
    (Command::STOP, popped)
}

/// Reactive behaviour: straight ahead at full speed while the front sector
/// is clear, otherwise rotate away from the nearer side (ties turn left,
/// toward positive beam offsets).
pub fn normal_move(scan: &SonarScan, params: &Params) -> Command {
    // graded front-sector thresholds, widest straight ahead
    let clear = scan.ranges[0] > params.stop_distance + 0.01
        && scan.ranges[1] > params.stop_distance + 0.005
        && scan.ranges[BEAM_COUNT - 1] > params.stop_distance + 0.005
        && scan.ranges[2] > params.stop_distance
        && scan.ranges[BEAM_COUNT - 2] > params.stop_distance;
    if clear {
        return Command::new(params.v_max, 0.0);
    }
    let left_min = (1..=11).map(|k| scan.ranges[k]).fold(f64::INFINITY, f64::min);
    let right_min = (13..=23)
        .map(|k| scan.ranges[k])
        .fold(f64::INFINITY, f64::min);
    let w = if left_min >= right_min {
        params.w_max
    } else {
        -params.w_max
    };
    Command::new(0.0, w)
}

fn front_blocked(scan: &SonarScan, params: &Params) -> bool {
    let m = scan.ranges[0]
        .min(scan.ranges[1])
        .min(scan.ranges[BEAM_COUNT - 1]);
    m < params.stop_distance * 0.75
}

impl ControllerState {
    fn log(&mut self, step: u64, coverage: f64, event: impl Into<String>) {
        self.events.push(ControllerEvent {
            step,
            mode: self.mode,
            coverage,
            event: event.into(),
        });
    }

    fn to_normal(&mut self, step: u64, coverage: f64, why: &str) {
        self.mode = Mode::NormalMove;
        self.path.clear();
        self.coverage_history.clear();
        self.steps_since_waypoint = 0;
        self.log(step, coverage, why);
    }
}

/// One control decision of the alternating controller.
///
/// In NORMAL_MOVE the coverage history is tracked; once the gain over the
/// stagnation window falls under the threshold, the graph is built, the
/// robot attaches, goals are selected and an A* path switches the mode to
/// FOLLOW_PATH. The path is abandoned on blockage or timeout. Exploration
/// is complete when no goals remain and coverage reached the target.
pub fn controller_step(
    ctrl: &mut ControllerState,
    state: &RobotState,
    scan: &SonarScan,
    grid: &OccupancyGrid,
    coverage: f64,
    step: u64,
    params: &Params,
) -> Command {
    match ctrl.mode {
        Mode::NormalMove => {
            ctrl.coverage_history.push_back(coverage);
            if ctrl.coverage_history.len() > params.stagnation_window as usize {
                let _ = ctrl.coverage_history.pop_front();
            }
            let stagnated = ctrl.coverage_history.len() == params.stagnation_window as usize
                && coverage - ctrl.coverage_history.front().copied().unwrap_or(0.0)
                    < params.stagnation_delta;
            if stagnated {
                let classmap = classify(grid, params);
                let build = build_graph(&classmap, params);
                ctrl.plans_built += 1;
                ctrl.last_graph_nodes = Some(build.graph.node_count());
                let goals = select_goals(&build.graph, &classmap, params.goal_radius);
                if goals.is_empty() {
                    if coverage >= params.coverage_target {
                        ctrl.complete = true;
                        ctrl.log(step, coverage, "complete");
                        return Command::STOP;
                    }
                    ctrl.to_normal(step, coverage, "goal_none");
                } else {
                    match attach_robot(&build.graph, state, &classmap)
                        .and_then(|start| astar(&build.graph, start, &goals))
                    {
                        Ok(path_nodes) => {
                            let cs = build.graph.cell_size;
                            ctrl.path = path_nodes
                                .iter()
                                .map(|&n| {
                                    let node = &build.graph.nodes[n];
                                    (
                                        (node.x as f64 + 0.5) * cs,
                                        (node.y as f64 + 0.5) * cs,
                                    )
                                })
                                .collect();
                            ctrl.mode = Mode::FollowPath;
                            ctrl.coverage_history.clear();
                            ctrl.steps_since_waypoint = 0;
                            ctrl.log(
                                step,
                                coverage,
                                format!(
                                    "plan nodes={} goals={} path={}",
                                    build.graph.node_count(),
                                    goals.len(),
                                    ctrl.path.len()
                                ),
                            );
                        }
                        Err(e) => {
                            let why = match e {
                                PlanError::EmptyGraph => "plan_empty_graph",
                                PlanError::NoPath => "plan_no_path",
                            };
                            ctrl.to_normal(step, coverage, why);
                        }
                    }
                }
            }
            if ctrl.mode == Mode::FollowPath {
                // newly planned: start following immediately
                return follow_step(ctrl, state, scan, coverage, step, params);
            }
            normal_move(scan, params)
        }
        Mode::FollowPath => follow_step(ctrl, state, scan, coverage, step, params),
    }
}

fn follow_step(
    ctrl: &mut ControllerState,
    state: &RobotState,
    scan: &SonarScan,
    coverage: f64,
    step: u64,
    params: &Params,
) -> Command {
    debug_assert!(ctrl.mode == Mode::FollowPath);
    debug_assert!(!ctrl.path.is_empty(), "FOLLOW_PATH carries a path");
    if front_blocked(scan, params) {
        ctrl.to_normal(step, coverage, "path_blocked");
        return normal_move(scan, params);
    }
    let tolerance = params.waypoint_tol_radii * state.radius;
    let (cmd, popped) = follow_path(state, &mut ctrl.path, tolerance, params);
    if popped {
        ctrl.steps_since_waypoint = 0;
    } else {
        ctrl.steps_since_waypoint += 1;
        if ctrl.steps_since_waypoint > params.follow_patience {
            ctrl.to_normal(step, coverage, "path_timeout");
            return normal_move(scan, params);
        }
    }
    if ctrl.path.is_empty() {
        ctrl.to_normal(step, coverage, "path_done");
        return normal_move(scan, params);
    }
    cmd
}
