//! Command-line front end: experiment runs, phantom/trajectory generation,
//! and the built-in invariant suite.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 bad configuration or
//! arguments, 3 every configured solver diverged or failed.

use clap::{Args, Parser, Subcommand};
use p2np::experiment::run_experiment;
use p2np::mri::io::write_trajectory_csv;
use p2np::mri::trajectory::{
    make_cartesian_mask, make_radial_trajectory, make_spiral_trajectory,
};
use p2np::pgm::{write_image_pgm, PgmMode};
use p2np::phantom::{make_phantom, PhantomKind, PhantomPhase};
use p2np::selfcheck::run_selfcheck;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "p2np", version, about = "Preconditioned plug-and-play MRI reconstruction")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every solver in a config file; write traces, images, and a summary.
    Run {
        /// Path to a `key = value` config file (grammar in the README).
        config: PathBuf,
    },
    /// Write a synthetic phantom as a 16-bit PGM image.
    Phantom(PhantomArgs),
    /// Write a sampling trajectory as a CSV of (k_x, k_y) pairs.
    Traj {
        #[command(subcommand)]
        kind: TrajCommand,
    },
    /// Run the built-in invariant suite.
    Check,
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// shepp-logan | blobs
    #[arg(long, default_value = "shepp-logan")]
    kind: String,
    /// none | smooth
    #[arg(long, default_value = "none")]
    phase: String,
    /// Seed for the blobs kind.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Subcommand)]
enum TrajCommand {
    Radial {
        #[arg(long, default_value_t = 21)]
        spokes: usize,
        #[arg(long, default_value_t = 64)]
        readout: usize,
        /// Golden-angle spoke spacing (uniform when disabled).
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        golden: bool,
        #[arg(short, long)]
        output: PathBuf,
    },
    Spiral {
        #[arg(long, default_value_t = 6)]
        interleaves: usize,
        #[arg(long, default_value_t = 256)]
        readout: usize,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    Cartesian {
        #[arg(long, default_value_t = 64)]
        nx: usize,
        #[arg(long, default_value_t = 64)]
        ny: usize,
        #[arg(long, default_value_t = 4.0)]
        accel: f64,
        #[arg(long, default_value_t = 0.08)]
        center: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn cmd_run(config: &PathBuf) -> ExitCode {
    let text = match std::fs::read_to_string(config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("p2np: cannot read {}: {e}", config.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match p2np::config::parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("p2np: {}: {e}", config.display());
            return ExitCode::from(2);
        }
    };
    match run_experiment(&cfg, text.as_bytes()) {
        Ok(report) => {
            print!("{}", report.summary_text);
            println!("outputs in {}", report.out_dir.display());
            if report.all_failed() {
                eprintln!("p2np: every solver diverged or failed");
                ExitCode::from(3)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("p2np: run failed: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_phantom(args: &PhantomArgs) -> ExitCode {
    let kind: PhantomKind = match args.kind.parse() {
        Ok(k) => k,
        Err(e) => {
            eprintln!("p2np: {e}");
            return ExitCode::from(2);
        }
    };
    let phase: PhantomPhase = match args.phase.parse() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("p2np: {e}");
            return ExitCode::from(2);
        }
    };
    let img = match make_phantom(args.size, kind, phase, args.seed) {
        Ok(img) => img,
        Err(e) => {
            eprintln!("p2np: {e}");
            return ExitCode::from(2);
        }
    };
    match write_image_pgm(&img, &args.output, PgmMode::Magnitude) {
        Ok(()) => {
            println!("wrote {}×{} phantom to {}", img.nx, img.ny, args.output.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("p2np: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_traj(kind: &TrajCommand) -> ExitCode {
    let (traj, output) = match kind {
        TrajCommand::Radial { spokes, readout, golden, output } => {
            (make_radial_trajectory(*spokes, *readout, *golden), output)
        }
        TrajCommand::Spiral { interleaves, readout, grid, output } => {
            (make_spiral_trajectory(*interleaves, *readout, *grid), output)
        }
        TrajCommand::Cartesian { nx, ny, accel, center, seed, output } => {
            if *accel < 1.0 || !(0.0..=1.0).contains(center) {
                eprintln!("p2np: need accel ≥ 1 and center ∈ [0, 1]");
                return ExitCode::from(2);
            }
            (make_cartesian_mask(*nx, *ny, *accel, *center, *seed), output)
        }
    };
    match write_trajectory_csv(output, &traj) {
        Ok(()) => {
            println!(
                "wrote {} {} samples to {}",
                traj.samples.len(),
                traj.kind.name(),
                output.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("p2np: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Command::Run { config } => cmd_run(&config),
        Command::Phantom(args) => cmd_phantom(&args),
        Command::Traj { kind } => cmd_traj(&kind),
        Command::Check => {
            let failures = run_selfcheck(&mut std::io::stdout());
            if failures == 0 {
                ExitCode::SUCCESS
            } else {
                eprintln!("p2np: {failures} check(s) failed");
                ExitCode::from(1)
            }
        }
    }
}
