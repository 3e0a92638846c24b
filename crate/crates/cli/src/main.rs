//! `catsim`: drives the simulation library from named presets or config
//! files and writes deterministic CSV artifacts plus a run manifest.

mod config;
mod output;
mod runner;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Usage problems: unknown preset or flag, malformed config, bad sweep.
const EXIT_USAGE: u8 = 2;
/// A run aborted mid-flight, e.g. a numeric invariant was violated.
const EXIT_RUN: u8 = 3;

#[derive(Parser)]
#[command(
    name = "catsim",
    version,
    about = "Cat-state generation in a driven qubit-oscillator system: \
             closed-form, closed, and open dynamics with phase-space output",
    after_help = "Exit codes: 0 success, 2 usage error, 3 run aborted \
                  (numeric invariant violation; see the manifest)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one preset or config file and write CSVs plus manifest.txt.
    Simulate(SimulateArgs),
    /// Print the preset catalog (stable-sorted) with resolved parameters.
    ListPresets,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Named preset from the catalog (see list-presets).
    #[arg(long)]
    preset: Option<String>,

    /// Config file with [system], [integrator], [sweep], [output] sections;
    /// frequencies and rates in units of g0.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Replace the sweep axis: parameter=v1,v2,... where parameter is one
    /// of gamma_q, kappa_r, nbar_q, nbar_r.
    #[arg(long)]
    sweep: Option<String>,

    /// Output directory (default "out", created if missing).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads for sweep points; 0 uses one per CPU.
    #[arg(long)]
    workers: Option<usize>,

    /// Integrator time step in 1/g0 (default: solver-specific).
    #[arg(long)]
    step: Option<f64>,

    /// Fock truncation, the highest retained oscillator level.
    #[arg(long)]
    truncation: Option<usize>,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::ListPresets => {
            print!("{}", runner::preset_catalog());
            ExitCode::SUCCESS
        }
        Command::Simulate(args) => {
            let spec = match build_spec(&args) {
                Ok(spec) => spec,
                Err(message) => {
                    eprintln!("error: {message}");
                    return ExitCode::from(EXIT_USAGE);
                }
            };
            match runner::run(&spec) {
                Ok(summary) => {
                    println!("{summary}");
                    ExitCode::SUCCESS
                }
                Err(runner::RunFailure::Usage(message)) => {
                    eprintln!("error: {message}");
                    ExitCode::from(EXIT_USAGE)
                }
                Err(runner::RunFailure::Aborted(message)) => {
                    eprintln!("error: {message}");
                    ExitCode::from(EXIT_RUN)
                }
            }
        }
    }
}

fn build_spec(args: &SimulateArgs) -> Result<config::RunSpec, String> {
    let mut spec = match (&args.preset, &args.config) {
        (Some(name), None) => config::from_preset(name)?,
        (None, Some(path)) => config::from_file(path)?,
        (None, None) => return Err("pass exactly one of --preset or --config".into()),
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    if let Some(flag) = &args.sweep {
        spec.sweep = Some(config::parse_sweep_flag(flag)?);
    }
    if let Some(out) = &args.out {
        spec.out_dir = out.clone();
    }
    if let Some(workers) = args.workers {
        spec.workers = workers;
    }
    if let Some(step) = args.step {
        if !(step > 0.0 && step.is_finite()) {
            return Err(format!("--step must be positive and finite, got {step}"));
        }
        spec.step = Some(step);
    }
    if let Some(n_d) = args.truncation {
        if n_d == 0 {
            return Err("--truncation must retain at least level 1".into());
        }
        spec.truncation = Some(n_d);
    }
    config::validate(&spec)?;
    Ok(spec)
}
