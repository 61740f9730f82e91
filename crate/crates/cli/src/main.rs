//! `cvqkd-coexist` command line front end.

mod commands;
mod output;
mod scenario;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use cvqkd_coexist::units::Reference;
use serde::Serialize;

use commands::PlotKind;
use output::{emit, metadata, Status};

/// Bad input: exit code 2.
#[derive(Debug)]
pub struct Validation(pub String);

impl fmt::Display for Validation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Validation {}

const EXIT_OTHER: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RefPoint {
    Alice,
    Bob,
}

#[derive(Parser)]
#[command(name = "cvqkd-coexist", version, about = "CV-QKD coexistence with classical DWDM channels")]
struct Cli {
    /// Scenario file (TOML); built-in defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-source excess-noise budget.
    Budget {
        #[arg(long, value_enum, default_value = "alice")]
        reference: RefPoint,
    },
    /// Secret key rate of the scenario.
    Keyrate {
        /// Pulses per estimation block; applies the worst-case excess-noise penalty.
        #[arg(long)]
        finite_size: Option<u64>,
        #[arg(long, default_value_t = 3.0)]
        sigmas: f64,
    },
    /// Sweep launch power or distance as set in the [sweep] section.
    Sweep,
    /// Greedy placement of classical channels on the grid.
    Allocate,
    /// Monte Carlo homodyne sessions and their parameter estimates.
    Simulate {
        /// Also dump the first run's block moments to this CSV.
        #[arg(long)]
        blocks: Option<PathBuf>,
    },
    /// Fit Raman coefficients to scattered-power measurements.
    FitRaman {
        #[arg(long)]
        measurements: PathBuf,
        /// Optical bandwidth of the measurement filter, nm.
        #[arg(long, default_value_t = 0.8)]
        band_nm: f64,
    },
    /// Print a matplotlib stub for a CSV produced by another command.
    PlotScript {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
    },
    /// Print the fully resolved scenario, including every default.
    Defaults,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Budget { .. } => "budget",
            Command::Keyrate { .. } => "keyrate",
            Command::Sweep => "sweep",
            Command::Allocate => "allocate",
            Command::Simulate { .. } => "simulate",
            Command::FitRaman { .. } => "fit-raman",
            Command::PlotScript { .. } => "plot-script",
            Command::Defaults => "defaults",
        }
    }
}

#[derive(Serialize)]
struct FitConfig<'a> {
    measurements: String,
    band_nm: f64,
    link: &'a cvqkd_coexist::units::FiberLink,
}

fn run(cli: Cli) -> Result<Status> {
    let Format::Csv = cli.format;
    let mut loaded = scenario::load(cli.scenario.as_deref())?;
    if let Some(seed) = cli.seed {
        loaded.file.seed = seed;
    }
    let seed = loaded.file.seed;
    let name = cli.command.name();
    let (report, header) = match &cli.command {
        Command::Budget { reference } => {
            let r = match reference {
                RefPoint::Alice => Reference::AtAlice,
                RefPoint::Bob => Reference::AtBob,
            };
            (commands::budget(&loaded, r)?, metadata(name, seed, &loaded.file)?)
        }
        Command::Keyrate { finite_size, sigmas } => (
            commands::keyrate(&loaded, *finite_size, *sigmas)?,
            metadata(name, seed, &loaded.file)?,
        ),
        Command::Sweep => (commands::sweep(&loaded)?, metadata(name, seed, &loaded.file)?),
        Command::Allocate => (commands::allocate_cmd(&loaded)?, metadata(name, seed, &loaded.file)?),
        Command::Simulate { blocks } => (
            commands::simulate(&loaded, seed, blocks.as_deref())?,
            metadata(name, seed, &loaded.file)?,
        ),
        Command::FitRaman { measurements, band_nm } => {
            let cfg = FitConfig {
                measurements: measurements.display().to_string(),
                band_nm: *band_nm,
                link: &loaded.file.link,
            };
            (
                commands::fit_raman(measurements, *band_nm, &loaded.file.link)?,
                metadata(name, seed, &cfg)?,
            )
        }
        Command::PlotScript { input, kind } => (commands::plot_script(input, *kind), String::new()),
        Command::Defaults => {
            let text = toml::to_string(&loaded.file)?;
            (
                output::Report {
                    body: text.into_bytes(),
                    summary: String::new(),
                    status: Status::Ok,
                    metadata: false,
                },
                String::new(),
            )
        }
    };
    emit(&header, &report, cli.out.as_deref())?;
    if !report.summary.is_empty() {
        eprintln!("{}", report.summary);
    }
    Ok(report.status)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use cvqkd_coexist::Error as E;
    for cause in err.chain() {
        if cause.is::<Validation>() || cause.is::<toml::de::Error>() {
            return EXIT_VALIDATION;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Infeasible(_) | E::InfeasibleBaseline { .. } => EXIT_INFEASIBLE,
                E::Calibration(_) | E::NonPhysical(_) => EXIT_OTHER,
                _ => EXIT_VALIDATION,
            };
        }
    }
    EXIT_OTHER
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Infeasible) => ExitCode::from(EXIT_INFEASIBLE),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
