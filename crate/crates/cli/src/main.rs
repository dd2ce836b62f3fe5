use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use netage_cli::commands;
use netage_cli::config::{LoadedConfig, SweepBlock};
use netage_cli::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "netage",
    version,
    about = "Age-of-infection SIS model on degree-heterogeneous networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] directory` (default `out/<config name>`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Basic reproduction number and disease-free state.
    R0(Common),
    /// Disease-free and endemic equilibria with the stability report.
    Equilibrium(Common),
    /// Demographic equilibrium of the node population.
    Demography(Common),
    /// Integrate the model forward in time.
    Simulate(Common),
    /// Threshold quantities over a grid of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter to vary, e.g. `infectivity.a`.
        #[arg(long, requires = "values")]
        param: Option<String>,
        /// Comma-separated grid values.
        #[arg(long, value_delimiter = ',', num_args = 0.., requires = "param")]
        values: Option<Vec<f64>>,
    },
    /// Run the diagnostic suite on the configured simulation.
    Validate(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::R0(c)
        | Command::Equilibrium(c)
        | Command::Demography(c)
        | Command::Simulate(c)
        | Command::Validate(c) => c,
        Command::Sweep { common, .. } => common,
    };
    let loaded = LoadedConfig::load(&common.config)?;
    let out = common
        .out
        .clone()
        .or_else(|| loaded.config.output.directory.as_ref().map(|d| loaded.base.join(d)))
        .unwrap_or_else(|| {
            let stem = common.config.file_stem().unwrap_or_default();
            PathBuf::from("out").join(stem)
        });
    let mut stdout = std::io::stdout().lock();
    match &cli.command {
        Command::R0(_) => commands::r0(&loaded, &out, &mut stdout),
        Command::Equilibrium(_) => commands::equilibrium(&loaded, &out, &mut stdout),
        Command::Demography(_) => commands::demography(&loaded, &out, &mut stdout),
        Command::Simulate(_) => commands::simulate(&loaded, &out, &mut stdout),
        Command::Validate(_) => commands::validate(&loaded, &out, &mut stdout),
        Command::Sweep { param, values, .. } => {
            let overrides = match (param, values) {
                (Some(p), Some(v)) => Some(SweepBlock {
                    parameter: p.clone(),
                    values: v.clone(),
                }),
                _ => None,
            };
            commands::sweep(&loaded, overrides, &out, &mut stdout)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("netage: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
