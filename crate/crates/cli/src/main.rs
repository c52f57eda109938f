//! `bridgenet` command-line driver.
//!
//! Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or configuration
//! error. Every output file is written to a temporary file and renamed into
//! place, so failures never leave partial outputs.

mod commands;
mod config;
mod error;
mod members;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use bridgenet::bridge::Endpoint;
use clap::{Parser, Subcommand, ValueEnum};

use commands::DataKind;
use error::CliResult;

#[derive(Parser)]
#[command(
    name = "bridgenet",
    version,
    about = "Bezier subspaces and bridge networks for fast ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Spirals,
    Blobs,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeedArg {
    A,
    B,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic classification dataset as CSV.
    GenData {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Samples per class.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        noise: f64,
        #[arg(long)]
        seed: u64,
        /// Feature dimension (blobs only).
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Minimum distance between cluster centers (blobs only).
        #[arg(long, default_value_t = 3.0)]
        separation: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a dataset CSV into train.csv, val.csv and test.csv.
    Split {
        #[arg(long)]
        data: PathBuf,
        /// Train, validation and test fractions, e.g. 0.6,0.2,0.2.
        #[arg(long)]
        ratios: String,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train one network from a fresh seed.
    TrainMode {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Training log CSV; defaults to <out>.log.csv.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Train the pin-point of a quadratic Bezier curve between two modes.
    TrainCurve {
        #[arg(long)]
        mode_a: PathBuf,
        #[arg(long)]
        mode_b: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        train: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Evaluate evenly spaced points along a curve.
    ScanCurve {
        #[arg(long)]
        curve: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
        /// Optional SVG line plot of NLL against r.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Distill a curve model into a type I or type II bridge.
    TrainBridge {
        /// 1 or 2; defaults to the config's bridge.kind.
        #[arg(long = "type")]
        kind: Option<u8>,
        #[arg(long)]
        curve: PathBuf,
        /// Curve position to imitate; defaults to the config's target_r.
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        train: PathBuf,
        /// Base mode checkpoints (1 for type I, 2 for type II); defaults to
        /// the curve's own endpoints.
        #[arg(long = "base")]
        bases: Vec<PathBuf>,
        /// Endpoint feeding a type I bridge.
        #[arg(long, value_enum, default_value = "a")]
        feed: FeedArg,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Evaluate an ensemble composition with calibrated metrics.
    Eval {
        /// Members: mode:<ckpt>, bezier:<curve>@<r>, bridge:<ckpt>[,base=<ckpt>]...
        #[arg(long, num_args = 1.., required = true)]
        members: Vec<String>,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        val: PathBuf,
        #[arg(long)]
        dee_baseline: Option<PathBuf>,
        /// Optional run config supplying eval.n_bins and eval.dee_baseline.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n_bins: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// NLL of DE-1..DE-M over prefixes of the given modes.
    DeeBaseline {
        #[arg(long, num_args = 1.., required = true)]
        modes: Vec<PathBuf>,
        #[arg(long)]
        test: PathBuf,
        /// Calibrate each prefix ensemble on this set before scoring.
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long, default_value_t = bridgenet::metrics::DEFAULT_BINS)]
        n_bins: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// R² and mean KL of candidates against a curve model.
    Correspondence {
        /// Curve checkpoint, optionally with @<r> (default 0.5).
        #[arg(long)]
        target_curve: String,
        #[arg(long)]
        bridge: PathBuf,
        /// Other bridge or curve checkpoints (curves accept @<r>).
        #[arg(long, num_args = 0..)]
        others: Vec<String>,
        /// Extra mode checkpoints to resolve bridge inputs.
        #[arg(long, num_args = 0..)]
        modes: Vec<PathBuf>,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the FLOPs report of a checkpoint.
    Flops {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        relative: Option<PathBuf>,
    },
}

fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::GenData {
            kind,
            n,
            classes,
            noise,
            seed,
            dim,
            separation,
            out,
        } => commands::gen_data(commands::GenData {
            kind: match kind {
                KindArg::Spirals => DataKind::Spirals,
                KindArg::Blobs => DataKind::Blobs,
            },
            n,
            classes,
            noise,
            seed,
            dim,
            separation,
            out,
        }),
        Command::Split {
            data,
            ratios,
            seed,
            out_dir,
        } => commands::split_data(&data, &ratios, seed, &out_dir),
        Command::TrainMode {
            config,
            train,
            val,
            seed,
            out,
            log,
        } => commands::train_mode(&config, &train, &val, seed, &out, log),
        Command::TrainCurve {
            mode_a,
            mode_b,
            config,
            train,
            seed,
            out,
            log,
        } => commands::train_curve(&mode_a, &mode_b, &config, &train, seed, &out, log),
        Command::ScanCurve {
            curve,
            data,
            grid,
            out,
            plot,
        } => commands::scan(&curve, &data, grid, &out, plot),
        Command::TrainBridge {
            kind,
            curve,
            r,
            width,
            alpha,
            config,
            train,
            bases,
            feed,
            seed,
            out,
            log,
        } => commands::train_bridge_cmd(commands::TrainBridge {
            kind,
            curve,
            r,
            width,
            alpha,
            config,
            train,
            bases,
            feed: match feed {
                FeedArg::A => Endpoint::A,
                FeedArg::B => Endpoint::B,
            },
            seed,
            out,
            log,
        }),
        Command::Eval {
            members,
            test,
            val,
            dee_baseline,
            config,
            n_bins,
            out,
        } => {
            let flops = commands::eval(commands::Eval {
                members,
                test,
                val,
                dee_baseline,
                config,
                n_bins,
                out,
            })?;
            println!("{flops}");
            Ok(())
        }
        Command::DeeBaseline {
            modes,
            test,
            val,
            n_bins,
            out,
        } => commands::dee_baseline(&modes, &test, val.as_deref(), n_bins, &out),
        Command::Correspondence {
            target_curve,
            bridge,
            others,
            modes,
            test,
            out,
        } => commands::correspondence(commands::Correspondence {
            target_curve,
            bridge,
            others,
            modes,
            test,
            out,
        }),
        Command::Flops { ckpt, relative } => {
            println!("{}", commands::flops(&ckpt, relative.as_deref())?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bridgenet: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
