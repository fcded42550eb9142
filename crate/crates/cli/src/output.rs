//! Result rows and their CSV / JSON encodings.
//!
//! Errors, projection errors and bound right-hand sides are relative to
//! `‖A‖_{S,T} = σ₁`. Absolute singular-value errors are not scaled. Product
//! counts are observed counters; the `refine_*` columns hold the part spent
//! on CholQR refinement passes.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Format};
use crate::CliError;

pub const SCHEMA: &str = "rgsvd-results/1";

/// Column order of the CSV encoding.
pub const HEADER: [&str; 44] = [
    "experiment",
    "matrix",
    "weights",
    "method",
    "m",
    "n",
    "k",
    "p",
    "q",
    "seed",
    "kappa_t",
    "kappa_eff",
    "precond",
    "rel_tol",
    "index",
    "rel_error",
    "best_possible",
    "projection_error",
    "sigma_exact",
    "sigma_hat",
    "sv_abs_error",
    "left_angle",
    "right_angle",
    "sensitivity",
    "sensitivity_exact",
    "bound_gap_dependent",
    "bound_gap_dependent_factored",
    "bound_gap_independent",
    "bound_prob_gap_dependent",
    "bound_prob_gap_independent",
    "per_sample_ok",
    "probabilistic_ok",
    "a_applies",
    "a_transposes",
    "s_applies",
    "s_solves",
    "t_applies",
    "t_solves",
    "refine_s_applies",
    "refine_s_solves",
    "refine_t_applies",
    "refine_t_solves",
    "wall_time_s",
    "version",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub experiment: String,
    pub matrix: String,
    pub weights: String,
    pub method: String,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub p: usize,
    pub q: usize,
    pub seed: u64,
    pub kappa_t: f64,
    /// Condition number entering the probabilistic bounds.
    pub kappa_eff: f64,
    pub precond: Option<String>,
    pub rel_tol: Option<f64>,
    /// Singular index or basis column for per-index rows.
    pub index: Option<usize>,
    pub rel_error: Option<f64>,
    pub best_possible: f64,
    pub projection_error: Option<f64>,
    pub sigma_exact: Option<f64>,
    pub sigma_hat: Option<f64>,
    pub sv_abs_error: Option<f64>,
    pub left_angle: Option<f64>,
    pub right_angle: Option<f64>,
    pub sensitivity: Option<f64>,
    pub sensitivity_exact: Option<f64>,
    pub bound_gap_dependent: Option<f64>,
    pub bound_gap_dependent_factored: Option<f64>,
    pub bound_gap_independent: Option<f64>,
    pub bound_prob_gap_dependent: Option<f64>,
    pub bound_prob_gap_independent: Option<f64>,
    pub per_sample_ok: Option<bool>,
    pub probabilistic_ok: Option<bool>,
    pub a_applies: u64,
    pub a_transposes: u64,
    pub s_applies: u64,
    pub s_solves: u64,
    pub t_applies: u64,
    pub t_solves: u64,
    pub refine_s_applies: u64,
    pub refine_s_solves: u64,
    pub refine_t_applies: u64,
    pub refine_t_solves: u64,
    pub wall_time_s: Option<f64>,
    pub version: String,
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn opt<T: ToString>(x: &Option<T>) -> String {
    x.as_ref().map(T::to_string).unwrap_or_default()
}

impl Row {
    fn fields(&self) -> [String; 44] {
        [
            self.experiment.clone(),
            self.matrix.clone(),
            self.weights.clone(),
            self.method.clone(),
            self.m.to_string(),
            self.n.to_string(),
            self.k.to_string(),
            self.p.to_string(),
            self.q.to_string(),
            self.seed.to_string(),
            num(self.kappa_t),
            num(self.kappa_eff),
            opt(&self.precond),
            opt_num(self.rel_tol),
            opt(&self.index),
            opt_num(self.rel_error),
            num(self.best_possible),
            opt_num(self.projection_error),
            opt_num(self.sigma_exact),
            opt_num(self.sigma_hat),
            opt_num(self.sv_abs_error),
            opt_num(self.left_angle),
            opt_num(self.right_angle),
            opt_num(self.sensitivity),
            opt_num(self.sensitivity_exact),
            opt_num(self.bound_gap_dependent),
            opt_num(self.bound_gap_dependent_factored),
            opt_num(self.bound_gap_independent),
            opt_num(self.bound_prob_gap_dependent),
            opt_num(self.bound_prob_gap_independent),
            opt(&self.per_sample_ok),
            opt(&self.probabilistic_ok),
            self.a_applies.to_string(),
            self.a_transposes.to_string(),
            self.s_applies.to_string(),
            self.s_solves.to_string(),
            self.t_applies.to_string(),
            self.t_solves.to_string(),
            self.refine_s_applies.to_string(),
            self.refine_s_solves.to_string(),
            self.refine_t_applies.to_string(),
            self.refine_t_solves.to_string(),
            opt_num(self.wall_time_s),
            self.version.clone(),
        ]
    }
}

/// Provenance stored alongside JSON rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub schema: String,
    pub version: String,
    pub rng: String,
    pub config: ExperimentConfig,
}

impl Metadata {
    pub fn new(config: &ExperimentConfig) -> Self {
        Metadata {
            schema: SCHEMA.into(),
            version: crate::VERSION.into(),
            rng: rgsvd::sampling::RNG_DESCRIPTION.into(),
            config: config.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsFile {
    pub metadata: Metadata,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

pub fn to_csv(rows: &[Row]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER)?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
}

pub fn from_csv(text: &str) -> Result<Vec<Row>, CliError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != HEADER {
        return Err(CliError::Output(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(CliError::from)).collect()
}

pub fn to_json(rows: &[Row], meta: &Metadata) -> Result<String, CliError> {
    let file = ResultsFile {
        metadata: meta.clone(),
        columns: HEADER.iter().map(|s| s.to_string()).collect(),
        rows: rows.to_vec(),
    };
    let mut s = serde_json::to_string_pretty(&file)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json(text: &str) -> Result<ResultsFile, CliError> {
    let file: ResultsFile = serde_json::from_str(text)?;
    if file.metadata.schema != SCHEMA {
        return Err(CliError::Output(format!("unsupported schema '{}'", file.metadata.schema)));
    }
    Ok(file)
}

pub fn encode(rows: &[Row], meta: &Metadata, format: Format) -> Result<String, CliError> {
    if rows.is_empty() {
        return Err(CliError::Output("no result rows to write".into()));
    }
    match format {
        Format::Csv => to_csv(rows),
        Format::Json => to_json(rows, meta),
    }
}

/// Writes `rows` to `path`, or to stdout when `path` is `None`. Nothing is
/// created when `rows` is empty.
pub fn emit_results(rows: &[Row], meta: &Metadata, format: Format, path: Option<&Path>) -> Result<(), CliError> {
    let text = encode(rows, meta, format)?;
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Output(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| CliError::Output(e.to_string()))
        }
    }
}

/// Format implied by a file extension, CSV otherwise.
pub fn format_for(path: Option<&Path>) -> Format {
    match path.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        _ => Format::Csv,
    }
}
