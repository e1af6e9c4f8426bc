//! `lidarprior`: build prior maps, run detection, evaluate, simulate, plot.
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 pipeline error.

mod commands;
mod config;
mod failure;
mod formats;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lidarprior::simgen::SimMode;

use config::RunConfig;
use failure::Failure;

#[derive(Parser)]
#[command(name = "lidarprior", version, about = "Prior-map background rejection for lidar")]
struct Cli {
    /// Run configuration (TOML) shared by all subcommands.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct ClusterFlags {
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    min_pts: Option<usize>,
    #[arg(long)]
    planarity_threshold: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Map,
    Drive,
}

#[derive(Subcommand)]
enum Command {
    /// Build a prior map from registered frames.
    Map {
        /// Manifest listing clouds and their pose track.
        manifest: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        cluster: ClusterFlags,
    },
    /// Reject background against a map and label what is left.
    Detect {
        #[arg(long)]
        map: PathBuf,
        manifest: PathBuf,
        #[arg(long, short)]
        out_dir: PathBuf,
        #[arg(long)]
        margin_ground: Option<f64>,
        #[arg(long)]
        margin_box: Option<f64>,
        #[command(flatten)]
        cluster: ClusterFlags,
        /// Also write per-frame wall times (not reproducible).
        #[arg(long)]
        timings: bool,
    },
    /// Score detections against simulator truth.
    Eval {
        detections: PathBuf,
        truth: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        iou: f64,
        /// Write the table here as well as to standard output.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic sequence with ground truth.
    Simgen {
        /// Scene spec (TOML); the built-in street scene when omitted.
        spec: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "drive")]
        mode: ModeArg,
    },
    /// Render a histogram or scan to SVG, or a labeled PLY to colors.
    Plot {
        input: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// For scans: also save the computed histogram.
        #[arg(long)]
        histogram_out: Option<PathBuf>,
    },
}

impl ClusterFlags {
    fn apply(&self, p: &mut lidarprior::clustering::ClusteringParams) {
        if let Some(v) = self.eps {
            p.eps = v;
        }
        if let Some(v) = self.min_pts {
            p.min_pts = v;
        }
        if let Some(v) = self.planarity_threshold {
            p.planarity_threshold = v;
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::input("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Pipeline(e.to_string()))?;
    }
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    cfg.apply_seed(cli.seed);
    match cli.command {
        Command::Map { manifest, out, cluster } => {
            cluster.apply(&mut cfg.mapping.clustering);
            cfg.validate()?;
            commands::map(&cfg, &manifest, &out)
        }
        Command::Detect { map, manifest, out_dir, margin_ground, margin_box, cluster, timings } => {
            cluster.apply(&mut cfg.detection.clustering);
            if let Some(m) = margin_ground {
                cfg.detection.ground_margin = m;
            }
            if let Some(m) = margin_box {
                cfg.detection.box_margin = m;
            }
            cfg.validate()?;
            commands::detect(&cfg, &map, &manifest, &out_dir, timings)
        }
        Command::Eval { detections, truth, iou, out } => {
            let table = commands::eval(&detections, &truth, iou)?;
            if let Some(p) = out {
                std::fs::write(&p, &table).map_err(|e| Failure::io(&p, e))?;
            }
            print!("{table}");
            Ok(())
        }
        Command::Simgen { spec, out, mode } => {
            let mode = match mode {
                ModeArg::Map => SimMode::Map,
                ModeArg::Drive => SimMode::Drive,
            };
            commands::simgen(spec.as_deref().or(cfg.scene.as_deref()), cfg.seed, &out, mode)
        }
        Command::Plot { input, out, histogram_out } => {
            plot::plot(&input, &out, &cfg.mapping.ground.vdisparity, histogram_out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lidarprior: {e}");
            e.exit_code()
        }
    }
}
