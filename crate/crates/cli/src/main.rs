use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod expr;
mod report;

use commands::{CliError, Outcome, Overrides};
use report::{canonical_json, config_hash, csv_table, Envelope, SCHEMA_VERSION, TOOL_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ellipticity verdict (and elliptic exponent interval for dilations).
    Ellipticity(JobArgs),
    /// Analytic index with the topological cross-check where available.
    Index(JobArgs),
    /// Ellipticity and analytic index over a list of Sobolev exponents.
    SweepS(JobArgs),
    /// Schwartz space versus torus sections for the noncommutative torus.
    Nctorus(JobArgs),
    /// Transversal ellipticity and index for the circle action on the torus.
    Uniformize(JobArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ellipticity(_) => "ellipticity",
            Command::Index(_) => "index",
            Command::SweepS(_) => "sweep-s",
            Command::Nctorus(_) => "nctorus",
            Command::Uniformize(_) => "uniformize",
        }
    }

    fn args(&self) -> &JobArgs {
        match self {
            Command::Ellipticity(a) | Command::Index(a) | Command::SweepS(a) | Command::Nctorus(a) | Command::Uniformize(a) => a,
        }
    }
}

#[derive(Debug, Args)]
struct JobArgs {
    /// Job configuration (TOML).
    config: PathBuf,
    /// Truncation list, e.g. 32,64,128.
    #[arg(long, value_delimiter = ',')]
    trunc: Option<Vec<usize>>,
    /// Primary tolerance of the command (floor, threshold or residual bound).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(name = "gidx", version, about = "Ellipticity and index computations for operators associated with group actions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn run(command: &Command) -> Result<Outcome, CliError> {
    let cli = command.args();
    let path = &cli.config;
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| CliError::from(config::ConfigError::new("config", "not UTF-8")))?;
    let cfg = config::parse_config(&text)?;
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    }
    let ov = Overrides { trunc: cli.trunc.clone(), tol: cli.tol, seed: cli.seed };
    let outcome = match command {
        Command::Ellipticity(_) => commands::cmd_ellipticity(&cfg, &ov),
        Command::Index(_) => commands::cmd_index(&cfg, &ov),
        Command::SweepS(_) => commands::cmd_sweep_s(&cfg, &ov),
        Command::Nctorus(_) => commands::cmd_nctorus(&cfg, &ov),
        Command::Uniformize(_) => commands::cmd_uniformize(&cfg, &ov),
    }?;
    let text = match cli.format {
        Format::Json => {
            let env = Envelope {
                command: command.name().into(),
                config_hash: config_hash(&bytes),
                tool_version: TOOL_VERSION.into(),
                schema_version: SCHEMA_VERSION,
                seed: commands::seed(&cfg, &ov),
                status: outcome.status.name().into(),
                result: &outcome.result,
            };
            canonical_json(&env).map_err(|e| CliError::Io(e.to_string()))?
        }
        Format::Csv => csv_table(&outcome.csv_header, &outcome.csv_rows).map_err(|e| CliError::Io(e.to_string()))?,
    };
    match &cli.out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        None => print!("{text}"),
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(outcome) => {
            eprintln!("{}: {}", cli.command.name(), outcome.message);
            ExitCode::from(outcome.status.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
