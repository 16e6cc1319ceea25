//! CSV and manifest writers. Numbers are written with 17 significant
//! digits and LF line endings so identical runs give identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{FnSpec, RunConfig};
use crate::error::{CliError, CliResult, Context};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const GIT_REV: &str = env!("ROBIN_CDE_GIT_REV");

/// A cell of a CSV row.
pub enum Cell<'a> {
    Num(f64),
    Int(usize),
    Text(&'a str),
}

impl Cell<'_> {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_f64(*v),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => (*s).to_owned(),
        }
    }
}

pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        // Canonical zero so -0.0 and 0.0 print the same.
        format!("{:.16e}", if v == 0.0 { 0.0 } else { v })
    }
}

/// Buffered CSV file with a fixed header.
pub struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl CsvOut {
    pub fn create(path: &Path, header: &[&str]) -> CliResult<Self> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        writer.write_record(header).map_err(|e| csv_error(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            writer,
        })
    }

    pub fn row(&mut self, cells: &[Cell]) -> CliResult<()> {
        let rendered: Vec<String> = cells.iter().map(Cell::render).collect();
        self.writer.write_record(&rendered).map_err(|e| csv_error(&self.path, e))
    }

    pub fn finish(mut self) -> CliResult<()> {
        self.writer.flush().context(|| format!("writing {}", self.path.display()))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::Io {
        context: format!("writing {}", path.display()),
        source: std::io::Error::other(e),
    }
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).context(|| format!("creating {}", dir.display()))
}

/// Table contents copied into the manifest.
#[derive(Debug, Serialize)]
pub struct TableRecord {
    pub file: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Summary of one series solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub modes_min: usize,
    pub modes_max: usize,
    /// Largest truncation bound over the sampled points.
    pub max_tail: f64,
    /// Interpolation defect of the tabulated exit, when it was computed.
    pub memo_defect: Option<f64>,
}

/// Everything needed to rerun a command.
#[derive(Debug, Serialize)]
pub struct Manifest<'a, R: Serialize> {
    pub program: &'static str,
    pub version: &'static str,
    pub git_rev: &'static str,
    pub command: &'a str,
    pub config: &'a RunConfig,
    pub tables: Vec<TableRecord>,
    pub results: R,
    pub files: Vec<String>,
}

impl<'a, R: Serialize> Manifest<'a, R> {
    pub fn new(command: &'a str, config: &'a RunConfig, results: R, files: &[&str]) -> Self {
        Self {
            program: "robin-cde",
            version: VERSION,
            git_rev: GIT_REV,
            command,
            config,
            tables: config
                .table_data()
                .into_iter()
                .map(|(file, x, y)| TableRecord { file, x, y })
                .collect(),
            results,
            files: files.iter().map(|f| (*f).to_owned()).collect(),
        }
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io {
            context: format!("serializing {}", path.display()),
            source: std::io::Error::other(e),
        })?;
        text.push('\n');
        fs::write(&path, text).context(|| format!("writing {}", path.display()))
    }
}

/// Short label of a function spec for reports.
pub fn describe(spec: &FnSpec) -> String {
    match spec {
        FnSpec::Constant { value } => format!("constant {value}"),
        FnSpec::Pulse { start, stop, level, .. } => format!("pulse {level} on [{start}, {stop}]"),
        FnSpec::Sinusoid { mean, amplitude, period, .. } => format!("sinusoid {mean} ± {amplitude}, period {period}"),
        FnSpec::Table { file } => format!("table {}", file.display()),
        FnSpec::Computed => "computed flux exit".into(),
    }
}
