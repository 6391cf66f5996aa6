use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use exoshape::sim::Scenario;
use exoshape_cli::commands::{self, BodeMode, BodeSystem, SweepMetric};
use exoshape_cli::summary::RunSummary;
use exoshape_cli::{load_config, CliError};

#[derive(Parser)]
#[command(name = "exoshape", version, about = "Double compliance shaping for amplification exoskeletons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Summary JSON path; printed to stdout when absent.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    LockedOutput,
    DobHysteresis,
    CoupledHuman,
    Free,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::LockedOutput => Scenario::LockedOutput,
            ScenarioArg::DobHysteresis => Scenario::DobHysteresis,
            ScenarioArg::CoupledHuman => Scenario::CoupledHuman,
            ScenarioArg::Free => Scenario::Free,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize gains and write the gains file.
    Design(Common),
    /// Bode table of one system as CSV.
    Bode {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "c7")]
        system: BodeSystem,
        #[arg(long, value_enum, default_value = "nominal")]
        mode: BodeMode,
        /// Hz
        #[arg(long, default_value_t = 0.01)]
        fmin: f64,
        /// Hz
        #[arg(long, default_value_t = 1000.0)]
        fmax: f64,
        #[arg(long, default_value_t = 400)]
        points: usize,
    },
    /// Run a simulation scenario and write its trace CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Overrides `sim.scenario`.
        #[arg(long, value_enum)]
        scenario: Option<ScenarioArg>,
    },
    /// Evaluate a metric over values of one config parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Dotted path into the config, e.g. `design.alpha`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        metric: String,
    },
    /// Observer delay margin for the configured Q filter.
    DobCheck(Common),
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn emit_summary(common: &Common, summary: &RunSummary) -> Result<(), CliError> {
    match &common.summary {
        Some(p) => std::fs::write(p, summary.to_json()).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{}", summary.to_json());
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Design(c) => {
            let loaded = load_config(&c.config)?;
            let (gains, summary) = commands::cmd_design(&loaded)?;
            std::fs::write(&c.out, gains.to_json())?;
            emit_summary(&c, &summary)
        }
        Command::Bode {
            common,
            system,
            mode,
            fmin,
            fmax,
            points,
        } => {
            let loaded = load_config(&common.config)?;
            let (table, summary) = commands::cmd_bode(&loaded, system, mode, fmin, fmax, points)?;
            table.write_csv(create(&common.out)?)?;
            emit_summary(&common, &summary)
        }
        Command::Simulate { common, scenario } => {
            let loaded = load_config(&common.config)?;
            let (trace, summary) = commands::cmd_simulate(&loaded, scenario.map(Into::into))?;
            trace.write_csv(create(&common.out)?)?;
            emit_summary(&common, &summary)
        }
        Command::Sweep {
            common,
            param,
            values,
            metric,
        } => {
            let loaded = load_config(&common.config)?;
            let metric = SweepMetric::parse(&metric)?;
            let values = commands::parse_values(&values)?;
            let rows = commands::cmd_sweep(&loaded, &param, &values, metric)?;
            let mut out = create(&common.out)?;
            commands::write_sweep_csv(&mut out, &param, metric, &rows)?;
            out.flush()?;
            Ok(())
        }
        Command::DobCheck(c) => {
            let loaded = load_config(&c.config)?;
            let summary = commands::cmd_dob_check(&loaded)?;
            std::fs::write(&c.out, summary.to_json())?;
            emit_summary(&c, &summary)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
