//! roomsec command-line frontend.
//!
//! Exit codes: 0 success, 1 partial trial failure (an experiment finished
//! but some trials diverged), 2 usage or input errors.

mod commands;
mod common;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "roomsec",
    version,
    about = "Reverberation-robust sound event classification experiments"
)]
struct Cli {
    /// JSON run configuration; flags override individual keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output root (default: $ROOMSEC_OUT or ./runs).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the training and test RIR banks.
    GenRirs {
        /// Number of preset training rooms to use (1-9).
        #[arg(long)]
        rooms: Option<usize>,
        /// RIRs per training room.
        #[arg(long)]
        per_room: Option<usize>,
        /// RIRs per test room.
        #[arg(long)]
        test_per_room: Option<usize>,
        /// Bank generation seed (train bank).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Synthesize the event dataset and export it as WAV directories.
    GenDataset {
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        clips_per_class: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a single strategy on a single seed.
    Train {
        /// base | deconv | aug | cndt
        #[arg(long)]
        strategy: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Evaluate a checkpoint on the clean set or a test room.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// "clean" or a test-room id such as R068.
        #[arg(long, default_value = "clean")]
        room: String,
        /// none | delta | same-room-other-point (default chosen by mode).
        #[arg(long)]
        policy: Option<String>,
        /// Apply deconvolution preprocessing (unconditioned models).
        #[arg(long, default_value_t = false)]
        deconv: bool,
    },
    /// Run the full strategy-comparison experiment suite.
    Experiment {
        /// Comma-separated trial seeds, e.g. 1,2,3.
        #[arg(long)]
        seeds: Option<String>,
        /// Comma-separated subset of base,deconv,aug,cndt.
        #[arg(long)]
        strategies: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Fake-conditioning sweep for a conditioned checkpoint.
    FakeCond {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated test rooms (default: R027,R055,R134).
        #[arg(long)]
        test_rooms: Option<String>,
    },
    /// Summarize a bank, dataset, checkpoint, config or report file.
    Inspect { path: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = match common::Context::new(cli.config.as_deref(), cli.out.as_deref()) {
        Ok(ctx) => ctx,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };

    let result = match cli.command {
        Command::GenRirs {
            rooms,
            per_room,
            test_per_room,
            seed,
        } => commands::gen_rirs::run(ctx, rooms, per_room, test_per_room, seed),
        Command::GenDataset {
            classes,
            clips_per_class,
            seed,
        } => commands::gen_dataset::run(ctx, classes, clips_per_class, seed),
        Command::Train {
            strategy,
            seed,
            epochs,
        } => commands::train::run(ctx, &strategy, seed, epochs),
        Command::Eval {
            checkpoint,
            room,
            policy,
            deconv,
        } => commands::eval::run(ctx, &checkpoint, &room, policy.as_deref(), deconv),
        Command::Experiment {
            seeds,
            strategies,
            epochs,
        } => commands::experiment::run(ctx, seeds.as_deref(), strategies.as_deref(), epochs),
        Command::FakeCond {
            checkpoint,
            test_rooms,
        } => commands::fake_cond::run(ctx, &checkpoint, test_rooms.as_deref()),
        Command::Inspect { path } => commands::inspect::run(&path),
    };

    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
