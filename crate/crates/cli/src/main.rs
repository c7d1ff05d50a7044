//! `depthgaze` command-line tool.
//!
//! Exit codes: 0 success (warnings allowed), 1 incomplete data or failed
//! records, 2 usage, configuration or file errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "depthgaze", version, about = "Depth-infused gaze target detection toolkit")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML run configuration; flags below override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads; 0 uses every core, 1 runs sequentially.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Depth units per stored sample.
    #[arg(long, global = true)]
    depth_scale: Option<f64>,
    #[arg(long, global = true)]
    sigma: Option<f64>,
    #[arg(long, global = true)]
    gamma1: Option<f64>,
    #[arg(long, global = true)]
    gamma2: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Back-project a depth map to an ASCII "x y z" point file.
    Project {
        #[arg(long)]
        depth: PathBuf,
        /// Defaults to `<out-dir>/<depth-stem>.xyz`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate one pseudo-label mask per annotation record.
    DismGen {
        #[arg(long)]
        annotations: PathBuf,
        /// A depth file shared by all records, or a directory of `<image-stem>.png|pgm`.
        #[arg(long)]
        depth: PathBuf,
    },
    /// Write image-plane and depth bins of every record to `bins.csv`.
    Bin {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        depth: PathBuf,
    },
    /// Score `<image-stem>_<index>_pred.png` heatmaps against the annotations.
    Eval {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Also write per-record metrics to `metrics.csv`.
        #[arg(long)]
        per_record: bool,
    },
    /// Predict gaze heatmaps and points.
    Pipeline {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        depth: PathBuf,
        /// Weight bundle file, or `baseline` for the pseudo-label centroid.
        #[arg(long)]
        weights: String,
        /// Scene image root; defaults to the annotation file's directory.
        #[arg(long)]
        images: Option<PathBuf>,
        /// Read `<image-stem>_<index>_dism.png` masks instead of generating them.
        #[arg(long)]
        dism: Option<PathBuf>,
    },
    /// Write a seeded synthetic dataset.
    Synth {
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 48)]
        height: usize,
        /// Also write uniform-random prediction heatmaps.
        #[arg(long)]
        random_predictions: bool,
    },
    /// Write a seeded random weight bundle for the fusion model.
    InitWeights {
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = cli.global;
    let overrides = Overrides {
        out_dir: g.out_dir,
        jobs: g.jobs,
        seed: g.seed,
        depth_scale: g.depth_scale,
        sigma: g.sigma,
        gamma1: g.gamma1,
        gamma2: g.gamma2,
    };
    let result = RunConfig::resolve(g.config.as_deref(), &overrides)
        .map_err(commands::Failure::from)
        .and_then(|cfg| match cli.command {
            Command::Project { depth, out } => commands::project(&cfg, &depth, out.as_deref()),
            Command::DismGen { annotations, depth } => commands::dism_gen(&cfg, &annotations, &depth),
            Command::Bin { annotations, depth } => commands::bin(&cfg, &annotations, &depth),
            Command::Eval {
                annotations,
                predictions,
                per_record,
            } => commands::eval(&cfg, &annotations, &predictions, per_record),
            Command::Pipeline {
                annotations,
                depth,
                weights,
                images,
                dism,
            } => commands::pipeline(
                &cfg,
                &annotations,
                &depth,
                &weights,
                images.as_deref(),
                dism.as_deref(),
            ),
            Command::Synth {
                count,
                width,
                height,
                random_predictions,
            } => commands::synth(&cfg, count, width, height, random_predictions),
            Command::InitWeights { out } => commands::init_weights(&cfg, &out),
        });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
