use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// What a command produced, renderable as either CSV or JSON.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Extra `# ...` lines placed after the provenance line of a CSV file.
    pub notes: Vec<String>,
    pub result: Value,
    /// Process exit status; nonzero marks a refusal or failed check.
    pub status: i32,
}

impl Report {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), ..Default::default() }
    }
}

pub struct Meta<'a> {
    pub command: &'a str,
    pub config: &'a ExperimentConfig,
    pub hash: String,
}

pub fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

pub fn fmt_opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn fmt_opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn render(report: &Report, format: Format, meta: &Meta) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => render_csv(report, meta),
        Format::Json => {
            // serde_json's map is ordered by key, so output is stable
            let doc = json!({
                "tool": "mixlab",
                "version": version(),
                "command": meta.command,
                "config_hash": meta.hash,
                "config": meta.config,
                "result": report.result,
            });
            let mut out = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

fn render_csv(report: &Report, meta: &Meta) -> Result<Vec<u8>, CliError> {
    let mut out = format!("# mixlab {} config={}\n", version(), meta.hash).into_bytes();
    for note in &report.notes {
        out.extend_from_slice(format!("# {note}\n").as_bytes());
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(&report.columns).map_err(io)?;
    for row in &report.rows {
        w.write_record(row).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}
