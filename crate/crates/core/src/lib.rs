//! Occupancy-grid exploration engine for a simulated sonar robot.
//!
//! A disc robot with a 24-beam sonar ring explores closed 2D rooms while
//! fusing range readings into a probabilistic occupancy grid. Two
//! exploration controllers are provided and benchmarked against each
//! other:
//!
//! - `explore_vi`: an iteratively relaxed cost matrix of travel cost to
//!   the nearest frontier, descended greedily, and
//! - `navigate` over `skeleton` + `topo_graph`: the explored free region
//!   is thinned to a one-pixel skeleton, chained into a node/edge graph,
//!   simplified by recursive max-deviation splitting, pruned near
//!   unexplored space, and traversed with A*.
//!
//! `harness` runs either controller on the bundled benchmark maps and
//! reports coverage, step counts and entity counts; `render` exports every
//! stage as PGM/PPM images.

pub mod explore_vi;
pub mod geom;
pub mod grid;
pub mod harness;
pub mod morph;
pub mod navigate;
pub mod occupancy;
pub mod params;
pub mod render;
pub mod skeleton;
pub mod topo_graph;
pub mod world;

pub use harness::{compare, run, Controller, ExperimentConfig, MetricsRecord};
pub use params::Params;
