//! `qsmc`: run, verify and sweep sampled-data sliding mode scenarios.
//!
//! Exit codes: 0 ok, 1 checks not met or i/o failure, 2 configuration error,
//! 3 surface assumption or stability not certified, 4 divergence.

mod commands;
mod scenario;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qsmc_core::controllers::ControllerKind;
use qsmc_core::experiments::{Metric, DEFAULT_LADDER};

use commands::CliError;
use scenario::{parse_number, Document, Overrides, ScenarioFile};

/// The lateral aircraft benchmark, used when `benchmark` gets no scenario.
const AIRCRAFT: &str = include_str!("../scenarios/aircraft.scenario");

#[derive(Parser)]
#[command(name = "qsmc", version, about = "Output-feedback quasi-sliding mode control of sampled-data systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one controller and write the trajectory.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Certify the surface and the closed-loop spectra.
    Verify {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Periods checked besides the scenario's own, e.g. "0.02,0.01,0.005".
        #[arg(long)]
        ladder: Option<String>,
    },
    /// Fit the order in T of a steady-state metric over a period ladder.
    Sweep {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ladder: Option<String>,
        /// s_bound, x_bound, u_peak or all.
        #[arg(long, default_value = "s_bound")]
        metric: String,
    },
    /// Run all four online controllers under one noise realization.
    Benchmark {
        /// Defaults to the built-in aircraft scenario.
        scenario: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// eq, m1, m2, mm1 or mm2.
    #[arg(long, value_parser = parse_controller)]
    controller: Option<ControllerKind>,
    /// Sampling period.
    #[arg(long = "T", value_name = "T")]
    period: Option<f64>,
    /// β = (1 − α)/T, held fixed when T changes.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Noise seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Uniform output-noise half-width; 0 disables noise.
    #[arg(long, value_name = "HALF_WIDTH")]
    noise: Option<f64>,
    /// Also write SVG plots of u, x and s.
    #[arg(long)]
    plot: bool,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn parse_controller(s: &str) -> Result<ControllerKind, String> {
    s.parse().map_err(|e: qsmc_core::Error| e.to_string())
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            controller: self.controller,
            period: self.period,
            beta: self.beta,
            alpha: self.alpha,
            horizon: self.horizon,
            seed: self.seed,
            noise: self.noise,
            out: self.out.clone(),
            plot: self.plot,
        }
    }
}

fn load(path: &Path, common: &Common) -> Result<ScenarioFile, CliError> {
    Ok(Document::load(path)?.build(&common.overrides())?)
}

fn parse_ladder(text: Option<&str>) -> Result<Vec<f64>, CliError> {
    match text {
        None => Ok(DEFAULT_LADDER.to_vec()),
        Some(t) => {
            t.split(',').map(|s| parse_number(s).map_err(|m| CliError::Config(format!("--ladder: {m}")))).collect()
        }
    }
}

fn parse_metrics(text: &str) -> Result<Vec<Metric>, CliError> {
    if text == "all" {
        return Ok(Metric::ALL.to_vec());
    }
    text.split(',').map(|m| m.trim().parse::<Metric>().map_err(CliError::from)).collect()
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { scenario, common } => commands::run(&load(&scenario, &common)?),
        Command::Verify { scenario, common, ladder } => {
            let sf = load(&scenario, &common)?;
            commands::verify(&sf, &parse_ladder(ladder.as_deref())?)
        }
        Command::Sweep { scenario, common, ladder, metric } => {
            let sf = load(&scenario, &common)?;
            commands::sweep(&sf, &parse_ladder(ladder.as_deref())?, &parse_metrics(&metric)?)
        }
        Command::Benchmark { scenario, common } => {
            let sf = match scenario {
                Some(p) => load(&p, &common)?,
                None => Document::parse(AIRCRAFT, Path::new(""), "aircraft")?.build(&common.overrides())?,
            };
            commands::benchmark(&sf)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qsmc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
