//! Benchmark harness CLI: run one exploration experiment, compare both
//! controllers across maps and seeds, or render a pipeline stage.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use topogrid::harness::{self, compare, run, Controller, ExperimentConfig, CSV_HEADER};
use topogrid::Params;

#[derive(Parser)]
#[command(
    name = "topogrid",
    about = "Occupancy-grid exploration benchmarks: value-iteration vs topological-graph control"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct ParamArgs {
    /// Line-oriented key=value config file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Individual parameter overrides, e.g. -P split_limit=2 -P goal_radius=12
    #[arg(short = 'P', long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

impl ParamArgs {
    fn build(&self) -> Result<Params> {
        let mut p = Params::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            p.apply_config(&text)?;
        }
        for kv in &self.params {
            let (k, v) = kv
                .split_once('=')
                .with_context(|| format!("expected KEY=VALUE, got `{kv}`"))?;
            p.set(k.trim(), v)?;
        }
        Ok(p)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and print its metrics CSV.
    Run {
        /// Bundled map name (open_room, radial_maze, maze, office, aaai)
        /// or a path to a map file.
        #[arg(long)]
        map: String,
        /// Exploration controller: vi or topo.
        #[arg(long)]
        controller: Controller,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Step cap.
        #[arg(long, default_value_t = 50_000)]
        steps: u32,
        /// Write stage renders and the event log into this directory.
        #[arg(long)]
        render: Option<PathBuf>,
        /// Write the metrics CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Run both controllers over maps x seeds and print the comparison.
    Compare {
        /// Comma-separated map names/paths.
        #[arg(long, value_delimiter = ',')]
        maps: Vec<String>,
        /// Seeds: comma-separated values and/or a..b ranges (inclusive).
        #[arg(long, default_value = "1..5")]
        seeds: String,
        #[arg(long, default_value_t = 50_000)]
        steps: u32,
        /// Write the per-run CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit nonzero unless every acceptance flag passes.
        #[arg(long)]
        check: bool,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Run an experiment and write one rendered stage to a file.
    Render {
        #[arg(long)]
        map: String,
        #[arg(long)]
        controller: Controller,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 50_000)]
        steps: u32,
        /// grid | classmap | cost | skeleton | graph
        #[arg(long)]
        stage: String,
        /// Output file (.pgm for grid stages, .ppm for graph).
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
    },
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = a.trim().parse().context("bad seed range start")?;
            let b: u64 = b.trim().parse().context("bad seed range end")?;
            if b < a {
                bail!("seed range {part} is reversed");
            }
            seeds.extend(a..=b);
        } else {
            seeds.push(part.parse().context("bad seed")?);
        }
    }
    if seeds.is_empty() {
        bail!("no seeds given");
    }
    Ok(seeds)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Cmd::Run {
            map,
            controller,
            seed,
            steps,
            render,
            out,
            params,
        } => {
            let mut cfg = ExperimentConfig::new(&map, controller, seed);
            cfg.step_cap = steps;
            cfg.params = params.build()?;
            cfg.render_dir = render;
            let output = run(&cfg)?;
            let m = &output.metrics;
            let csv = format!("{CSV_HEADER}\n{}\n", m.csv_row());
            match out {
                Some(path) => std::fs::write(&path, &csv)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{csv}"),
            }
            eprintln!(
                "# coverage {:.4} in {} steps ({:.1}s sim), {} collisions, \
                 {:.2} ms/plan rebuild{}",
                m.coverage,
                m.steps,
                m.sim_time_s,
                m.collisions,
                m.planning_ms,
                if m.reached_target { "" } else { " [target NOT reached]" }
            );
            Ok(())
        }
        Cmd::Compare {
            maps,
            seeds,
            steps,
            out,
            check,
            params,
        } => {
            if maps.is_empty() {
                bail!("need at least one map");
            }
            let seeds = parse_seeds(&seeds)?;
            let p = params.build()?;
            let report = compare(&maps, &seeds, &p, steps);
            for cell in &report.cells {
                if let Err(e) = &cell.result {
                    eprintln!(
                        "# error: {} {} seed {}: {e}",
                        cell.map, cell.controller, cell.seed
                    );
                }
            }
            print!("{}", report.to_table());
            let csv = report.to_csv();
            match out {
                Some(path) => std::fs::write(&path, &csv)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{csv}"),
            }
            let f = &report.flags;
            eprintln!(
                "# flags: full_exploration={} entity_gap={} time_profit={} errors={}",
                f.full_exploration, f.entity_gap, f.time_profit, f.had_errors
            );
            if check && !f.all_pass() {
                bail!("acceptance flags failed");
            }
            Ok(())
        }
        Cmd::Render {
            map,
            controller,
            seed,
            steps,
            stage,
            out,
            params,
        } => {
            let mut cfg = ExperimentConfig::new(&map, controller, seed);
            cfg.step_cap = steps;
            cfg.params = params.build()?;
            let output = run(&cfg)?;
            let bytes = harness::render_stage(
                &output.final_grid,
                &output.final_classmap,
                &cfg.params,
                &stage,
            )
            .map_err(|e| anyhow::anyhow!(e))?;
            std::fs::write(&out, bytes)
                .with_context(|| format!("writing {}", out.display()))?;
            eprintln!("# wrote {}", out.display());
            Ok(())
        }
    }
}
