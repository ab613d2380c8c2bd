//! Configuration-driven front end for the `qmem` toolkit: simulations,
//! sweeps, fits, spectral-interferometry reconstruction and figures of
//! merit, each writing plot-ready CSV/JSON plus a run manifest.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::error::{exit, CliError, CliResult};
use crate::manifest::Outputs;

#[derive(Debug, Parser)]
#[command(name = "qmem", version, about = "Quantum-memory simulation and analysis")]
pub struct Cli {
    /// Run configuration (`[section]` headers with `key = value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "qmem-out")]
    pub out: PathBuf,
    /// Maximum worker threads for sweeps.
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Also write the recorded (z, τ) fields of a simulation.
    #[arg(long, global = true)]
    pub dump_fields: bool,
    /// Check the manifest in `--out` against the current files instead of
    /// running.
    #[arg(long, global = true)]
    pub verify: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Store (and retrieve) one signal pulse.
    Simulate {
        /// Override the control pulse area, in units of π.
        #[arg(long, value_name = "THETA")]
        control_area: Option<f64>,
    },
    /// Run a parameter sweep.
    Sweep {
        #[arg(value_enum)]
        kind: SweepKind,
    },
    /// Fit a model to a two-column CSV.
    Fit {
        #[arg(value_enum)]
        model: FitKind,
        #[arg(long, value_name = "CSV")]
        input: PathBuf,
    },
    /// Recover the signal phase from a spectral interferogram.
    Reconstruct,
    /// Figures of merit, collision kinetics and Doppler lifetime.
    Metrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Detuning,
    Area,
    #[value(name = "fig6-matrix")]
    Fig6Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitKind {
    Lifetime,
    LifetimeVsPressure,
    Linewidth,
    Snr,
    Visibility,
    FrequencyResponse,
}

impl Command {
    pub fn label(&self) -> String {
        fn name(v: impl ValueEnum) -> String {
            v.to_possible_value()
                .expect("no skipped variants")
                .get_name()
                .to_string()
        }
        match self {
            Command::Simulate { .. } => "simulate".into(),
            Command::Sweep { kind } => format!("sweep {}", name(*kind)),
            Command::Fit { model, .. } => format!("fit {}", name(*model)),
            Command::Reconstruct => "reconstruct".into(),
            Command::Metrics => "metrics".into(),
        }
    }
}

/// What a finished command reports; `code` is non-zero for runs that wrote
/// their outputs but only partly succeeded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub message: String,
}

impl Outcome {
    pub fn ok(message: impl Into<String>) -> Self {
        Self {
            code: exit::SUCCESS,
            message: message.into(),
        }
    }
}

pub struct Context<'a> {
    pub config: Option<&'a RunConfig>,
    pub out: &'a mut Outputs,
    pub dump_fields: bool,
}

pub fn run(cli: &Cli) -> CliResult<Outcome> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        // Fails only if the pool was already built, e.g. by an earlier call
        // in the same process; the first setting then stands.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let config = cli.config.as_deref().map(RunConfig::load).transpose()?;
    let label = cli.command.label();
    if cli.verify {
        let mismatches = manifest::verify(&cli.out, &label, config.as_ref().map(|c| c.hash()).as_deref())?;
        if mismatches.is_empty() {
            return Ok(Outcome::ok(format!("{}: manifest verified", cli.out.display())));
        }
        let list: Vec<String> = mismatches
            .iter()
            .map(|m| format!("{} ({})", m.path, m.reason))
            .collect();
        return Err(CliError::data(format!("manifest check failed: {}", list.join("; "))));
    }
    let start = Instant::now();
    let mut out = Outputs::new(&cli.out)?;
    if let Some(path) = &cli.config {
        out.input(path)?;
    }
    let mut ctx = Context {
        config: config.as_ref(),
        out: &mut out,
        dump_fields: cli.dump_fields,
    };
    let outcome = match &cli.command {
        Command::Simulate { control_area } => commands::simulate::run(&mut ctx, *control_area)?,
        Command::Sweep { kind } => commands::sweep::run(&mut ctx, *kind)?,
        Command::Fit { model, input } => commands::fit::run(&mut ctx, *model, input)?,
        Command::Reconstruct => commands::reconstruct::run(&mut ctx)?,
        Command::Metrics => commands::metrics::run(&mut ctx)?,
    };
    out.finish(&label, config.as_ref().map(RunConfig::hash), start.elapsed())?;
    Ok(outcome)
}
