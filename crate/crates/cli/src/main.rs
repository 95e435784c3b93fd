//! `instvol` command-line pipeline: simulate markets, estimate γ and σ_I,
//! test the invariant, replay passive fills and evaluate forecasts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{load_config, load_json};
use crate::error::Result;
use crate::output::{Format, Staging};

#[derive(Debug, Parser)]
#[command(
    name = "instvol",
    version,
    about = "Instantaneous volatility and market invariant toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config file for the command.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for every random draw of the command.
    #[arg(long)]
    seed: Option<u64>,
    /// Format of tabular outputs.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Window length ΔT in seconds.
    #[arg(long)]
    window: Option<f64>,
}

#[derive(Debug, Args)]
struct Data {
    /// Instrument directory, or a directory of instrument directories.
    #[arg(long = "data", value_name = "DIR")]
    dirs: Vec<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic quote/trade files and a manifest.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Calibrate trade rates so that T_price equals T_volume.
        #[arg(long)]
        equilibrium: bool,
    },
    /// Per-window and per-day T_price, T_volume, γ and σ_I.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
    },
    /// Invariant report over daily estimates of one or more instruments.
    Invariant {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
    },
    /// Passive order fill simulation and the correction curve.
    Fillsim {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
    },
    /// Realized vs instantaneous vs GARCH volatility and the ξ grid.
    ForecastEval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate { common, .. }
            | Command::Estimate { common, .. }
            | Command::Invariant { common, .. }
            | Command::Fillsim { common, .. }
            | Command::ForecastEval { common, .. } => common,
        }
    }
}

fn run(cmd: Command) -> Result<Vec<PathBuf>> {
    let c = cmd.common();
    let config = c.config.as_deref();
    let mut stage = Staging::new(&c.out, c.format)?;
    match &cmd {
        Command::Simulate { equilibrium, .. } => commands::simulate::run(
            load_json(config)?,
            c.seed,
            c.window,
            *equilibrium,
            &mut stage,
        )?,
        Command::Estimate { data, .. } => {
            commands::estimate::run(load_config(config)?, &data.dirs, c.window, &mut stage)?
        }
        Command::Invariant { data, .. } => commands::invariant::run(
            load_config(config)?,
            &data.dirs,
            c.seed,
            c.window,
            &mut stage,
        )?,
        Command::Fillsim { data, .. } => {
            commands::fillsim::run(load_config(config)?, &data.dirs, c.window, &mut stage)?
        }
        Command::ForecastEval { data, .. } => {
            commands::forecast::run(load_config(config)?, &data.dirs, c.window, &mut stage)?
        }
    }
    stage.commit()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(files) => {
            for f in files {
                log::info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                msg.push_str(&format!("\n  caused by: {s}"));
                source = s.source();
            }
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}
