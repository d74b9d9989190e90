//! Command-line front end: reproducible experiments over the `mixlab`
//! modules with CSV or JSON output.
//!
//! Every output carries the tool version and a SHA-256 hash of the resolved
//! configuration. Randomized commands (`couple`, `simulate`) refuse to run
//! without an explicit seed.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;
use output::{render, Format, Meta};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Model(mixlab::Error),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Model(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<mixlab::Error> for CliError {
    fn from(e: mixlab::Error) -> Self {
        CliError::Model(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Model(_) => 4,
            CliError::Io(_) => 5,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mixlab", version, about = "Mixing-time experiments for mean-field Glauber dynamics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Critical parameter values with solver residuals.
    Critical(CommonArgs),
    /// Contraction conditions for the update-law map (cwp, gcwp).
    Verify(CommonArgs),
    /// Exact lumped mixing times over a list of sizes, with growth fit.
    Mix(CommonArgs),
    /// Coupling-time Monte Carlo from a pair of starts.
    Couple(CommonArgs),
    /// A single seeded Glauber trajectory, recorded as spin counts.
    Simulate(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML experiment file; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// bc, cwp or gcwp.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub r: Option<f64>,
    /// Inverse temperature; comma-separated list for sweeps.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub beta: Vec<f64>,
    /// Blume-Capel interaction strength.
    #[arg(long = "K", value_delimiter = ',')]
    pub k: Vec<f64>,
    /// System size; comma-separated list for sweeps.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub mesh: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicas: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<u64>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub stride: Option<u64>,
    /// Iteration cap for exact mixing times.
    #[arg(long)]
    pub t_max: Option<u64>,
    /// Start preset: corners, equilibrium-vs-corner, shuffle (couple);
    /// corner, equilibrium (simulate).
    #[arg(long)]
    pub start: Option<String>,
    /// Explicit starting configuration as comma-separated labels.
    #[arg(long, value_delimiter = ',')]
    pub x: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub y: Option<Vec<usize>>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format; inferred from the `--out` extension, else the
    /// command's default.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl CommonArgs {
    fn flags(&self) -> ExperimentConfig {
        ExperimentConfig {
            model: self.model.clone(),
            q: self.q,
            r: self.r,
            beta: self.beta.clone(),
            k: self.k.clone(),
            n: self.n.clone(),
            eps: self.eps,
            mesh: self.mesh,
            seed: self.seed,
            replicas: self.replicas,
            max_steps: self.max_steps,
            steps: self.steps,
            stride: self.stride,
            t_max: self.t_max,
            start: self.start.clone(),
            x: self.x.clone(),
            y: self.y.clone(),
        }
    }

    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let base = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        Ok(base.merged(self.flags()))
    }
}

/// Runs one command, writes its output and returns the exit status.
pub fn run(cli: Cli) -> Result<i32, CliError> {
    let (name, args, default_format): (&str, &CommonArgs, Format) = match &cli.command {
        Command::Critical(a) => ("critical", a, Format::Csv),
        Command::Verify(a) => ("verify", a, Format::Json),
        Command::Mix(a) => ("mix", a, Format::Csv),
        Command::Couple(a) => ("couple", a, Format::Csv),
        Command::Simulate(a) => ("simulate", a, Format::Csv),
    };
    let cfg = args.resolve()?;
    let report = match name {
        "critical" => commands::critical(&cfg)?,
        "verify" => commands::verify(&cfg)?,
        "mix" => commands::mix(&cfg)?,
        "couple" => commands::couple(&cfg)?,
        _ => commands::simulate(&cfg)?,
    };
    let format = args.format.unwrap_or_else(|| match &args.out {
        Some(p) if p.extension().is_some_and(|e| e == "json") => Format::Json,
        Some(p) if p.extension().is_some_and(|e| e == "csv") => Format::Csv,
        _ => default_format,
    });
    let meta = Meta { command: name, config: &cfg, hash: cfg.hash(name) };
    let bytes = render(&report, format, &meta)?;
    match &args.out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes).map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    for note in report.notes.iter().filter(|n| n.starts_with("warning") || n.starts_with("refused")) {
        eprintln!("mixlab: {note}");
    }
    Ok(report.status)
}
