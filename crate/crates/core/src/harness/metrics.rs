//! Metrics rows and their CSV / JSON encodings.
//!
//! Column order (CSV header, JSON field order):
//!
//! ```text
//! version, row_type, experiment, seed, n_seeds, checkpoint, window,
//! sample_mode, transfer_mode, disable_gate, disable_intensity,
//! auc, auc_stderr, l_y, l_di, l_da, wall_clock_seconds
//! ```
//!
//! `row_type` is `run` for one seed or `aggregate` for the mean over seeds;
//! `seed` is empty on aggregate rows and `auc_stderr` is empty on run rows.
//! Floats are written in shortest round-trip form.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EcatError, Result};

pub const METRICS_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowType {
    Run,
    Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub version: u32,
    pub row_type: RowType,
    pub experiment: String,
    pub seed: Option<u64>,
    pub n_seeds: u32,
    pub checkpoint: String,
    pub window: u32,
    pub sample_mode: String,
    pub transfer_mode: String,
    pub disable_gate: bool,
    pub disable_intensity: bool,
    pub auc: f64,
    pub auc_stderr: Option<f64>,
    pub l_y: f64,
    pub l_di: f64,
    pub l_da: f64,
    pub wall_clock_seconds: f64,
}

pub const CSV_COLUMNS: [&str; 17] = [
    "version",
    "row_type",
    "experiment",
    "seed",
    "n_seeds",
    "checkpoint",
    "window",
    "sample_mode",
    "transfer_mode",
    "disable_gate",
    "disable_intensity",
    "auc",
    "auc_stderr",
    "l_y",
    "l_di",
    "l_da",
    "wall_clock_seconds",
];

impl MetricsRow {
    /// Same cell (experiment, checkpoint, modes, flags), ignoring the seed.
    pub fn same_cell(&self, other: &MetricsRow) -> bool {
        self.experiment == other.experiment
            && self.checkpoint == other.checkpoint
            && self.window == other.window
            && self.sample_mode == other.sample_mode
            && self.transfer_mode == other.transfer_mode
            && self.disable_gate == other.disable_gate
            && self.disable_intensity == other.disable_intensity
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Standard error of the mean; 0 for fewer than two values.
pub fn std_error(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
    (var / v.len() as f64).sqrt()
}

/// One aggregate row per distinct cell of `runs`, in first-seen order.
pub fn aggregate(runs: &[MetricsRow]) -> Vec<MetricsRow> {
    let mut cells: Vec<Vec<&MetricsRow>> = Vec::new();
    for r in runs.iter().filter(|r| r.row_type == RowType::Run) {
        match cells.iter_mut().find(|c| c[0].same_cell(r)) {
            Some(c) => c.push(r),
            None => cells.push(vec![r]),
        }
    }
    cells
        .into_iter()
        .map(|c| {
            let col = |f: fn(&MetricsRow) -> f64| c.iter().map(|r| f(r)).collect::<Vec<_>>();
            let aucs = col(|r| r.auc);
            MetricsRow {
                version: METRICS_VERSION,
                row_type: RowType::Aggregate,
                seed: None,
                n_seeds: c.len() as u32,
                auc: mean(&aucs),
                auc_stderr: Some(std_error(&aucs)),
                l_y: mean(&col(|r| r.l_y)),
                l_di: mean(&col(|r| r.l_di)),
                l_da: mean(&col(|r| r.l_da)),
                wall_clock_seconds: col(|r| r.wall_clock_seconds).iter().sum(),
                ..c[0].clone()
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricsFormat {
    Csv,
    Json,
}

impl MetricsFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Ok(MetricsFormat::Csv),
            Some("json") => Ok(MetricsFormat::Json),
            _ => Err(EcatError::Format(format!("{}: expected a .csv or .json file", path.display()))),
        }
    }
}

pub fn to_csv_string(rows: &[MetricsRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| EcatError::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| EcatError::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| EcatError::Format(e.to_string()))
}

pub fn to_json_string(rows: &[MetricsRow]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(rows).map_err(|e| EcatError::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Write `rows` to `path`. Empty input is rejected.
pub fn emit(rows: &[MetricsRow], path: &Path, format: MetricsFormat) -> Result<()> {
    if rows.is_empty() {
        return Err(EcatError::Contract("refusing to emit an empty metrics table".into()));
    }
    let text = match format {
        MetricsFormat::Csv => to_csv_string(rows)?,
        MetricsFormat::Json => to_json_string(rows)?,
    };
    let mut f = std::fs::File::create(path).map_err(|e| EcatError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| EcatError::io(path, e))
}

pub fn parse_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| EcatError::Format(e.to_string()))?.clone();
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(EcatError::Format(format!(
            "unexpected metrics header: {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let rows = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<MetricsRow>, _>>()
        .map_err(|e| EcatError::Format(e.to_string()))?;
    check_versions(&rows)?;
    Ok(rows)
}

pub fn parse_json(text: &str) -> Result<Vec<MetricsRow>> {
    let rows: Vec<MetricsRow> = serde_json::from_str(text).map_err(|e| EcatError::Format(e.to_string()))?;
    check_versions(&rows)?;
    Ok(rows)
}

fn check_versions(rows: &[MetricsRow]) -> Result<()> {
    match rows.iter().find(|r| r.version != METRICS_VERSION) {
        Some(r) => Err(EcatError::Format(format!("unsupported metrics version {}", r.version))),
        None => Ok(()),
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| EcatError::io(path, e))?;
    match MetricsFormat::from_path(path)? {
        MetricsFormat::Csv => parse_csv(&text),
        MetricsFormat::Json => parse_json(&text),
    }
}
