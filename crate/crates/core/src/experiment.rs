//! Seeded parameter sweeps and their CSV / JSON-lines output.
//!
//! Every cell gets its own seed `derive_seed(seed, [CELL, coordinates...])`,
//! cells run in parallel, and records come back in sorted cell order. Wall
//! clock columns are written as zero unless timing is switched on, so two
//! runs with the same configuration produce identical bytes.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{Map, Number};

use crate::circuit;
use crate::discrimination;
use crate::error::{Error, Result};
use crate::instances::{self, Field, ProblemKind};
use crate::learners::{self, Solver};
use crate::moments;
use crate::seed::{derive_seed, rng_for, tag};

/// Largest symmetric-basis dimension for which a haar-gap cell runs the
/// Monte Carlo cross-check. Cost per sample grows with the square of it.
pub const MC_DIM_LIMIT: usize = 64;

/// Largest `n` at which the encoding demo also evaluates the amplitude
/// encoding from dense density operators.
pub const ENCODING_DENSE_LIMIT: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    JsonLines,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json-lines" | "jsonl" | "json" => Ok(OutputFormat::JsonLines),
            other => Err(Error::invalid(format!("unknown output format {other:?}"))),
        }
    }
}

/// One sweep family and its parameter lists.
#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    /// Trace-norm gap between real and complex Haar moments per `(d, N)`.
    HaarGap { ds: Vec<usize>, copies: Vec<usize>, mc_samples: u64 },
    /// Minimal copies to separate the minus-sign pair, per `d`.
    CopiesSweep { ds: Vec<u64>, threshold: f64 },
    /// Repeated solves of freshly generated instances, per `n`.
    Trials { problem: ProblemKind, solver: Solver, ns: Vec<u32>, num_vectors: usize, trials: u64 },
    /// Product versus amplitude encoding of the minus-sign family, per `n`.
    EncodingDemo { ns: Vec<u32>, num_vectors: usize, trials: u64 },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::HaarGap { .. } => "haar-gap",
            Experiment::CopiesSweep { .. } => "copies-sweep",
            Experiment::Trials { .. } => "trials",
            Experiment::EncodingDemo { .. } => "encoding-demo",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    /// Record wall-clock columns. Off by default since it breaks byte
    /// identity between reruns.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, seed: u64) -> Self {
        ExperimentConfig { experiment, seed, out: None, format: OutputFormat::Csv, timing: false }
    }

    /// Whole-config checks. Per-cell problems are reported in the records.
    pub fn validate(&self) -> Result<()> {
        let empty = |what: &str| Err(Error::invalid(format!("{what} list is empty")));
        match &self.experiment {
            Experiment::HaarGap { ds, copies, .. } => {
                if ds.is_empty() {
                    return empty("d");
                }
                if copies.is_empty() {
                    return empty("N");
                }
            }
            Experiment::CopiesSweep { ds, threshold } => {
                if ds.is_empty() {
                    return empty("d");
                }
                if !threshold.is_finite() {
                    return Err(Error::invalid("threshold must be finite"));
                }
            }
            Experiment::Trials { ns, num_vectors, trials, .. } | Experiment::EncodingDemo { ns, num_vectors, trials } => {
                if ns.is_empty() {
                    return empty("n");
                }
                if *num_vectors == 0 || *trials == 0 {
                    return Err(Error::invalid("C and trials must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// A single CSV cell or JSON value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    UInt(u64),
    Float(f64),
    Text(String),
    Missing,
}

impl Value {
    /// Non-finite floats become [`Value::Missing`].
    pub fn float(x: f64) -> Value {
        if x.is_finite() { Value::Float(x) } else { Value::Missing }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::UInt(u) => Some(u as f64),
            Value::Float(x) => Some(x),
            _ => None,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Value::UInt(u) => serde_json::Value::from(*u),
            Value::Float(x) => Number::from_f64(*x).map_or(serde_json::Value::Null, serde_json::Value::Number),
            Value::Text(s) => serde_json::Value::from(s.as_str()),
            Value::Missing => serde_json::Value::Null,
        }
    }
}

impl From<u64> for Value {
    fn from(u: u64) -> Self {
        Value::UInt(u)
    }
}

impl From<usize> for Value {
    fn from(u: usize) -> Self {
        Value::UInt(u as u64)
    }
}

impl From<u32> for Value {
    fn from(u: u32) -> Self {
        Value::UInt(u as u64)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::float(x)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_owned())
    }
}

impl From<Option<f64>> for Value {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Value::Missing, Value::float)
    }
}

impl fmt::Display for Value {
    /// Floats print with 17 significant digits, which round-trips.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::UInt(u) => write!(f, "{u}"),
            Value::Float(x) => write!(f, "{x:.16e}"),
            Value::Text(s) => f.write_str(s),
            Value::Missing => Ok(()),
        }
    }
}

/// One row of a sweep. Columns are fixed per experiment; a failed cell
/// keeps its parameters and seed, leaves every measured column empty and
/// carries the message in `error`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub experiment: &'static str,
    pub fields: Vec<(&'static str, Value)>,
    pub error: Option<String>,
    violation: bool,
}

impl ResultRecord {
    fn build(
        experiment: &'static str,
        params: Vec<(&'static str, Value)>,
        measured_columns: &[&'static str],
        measured: Result<Vec<(&'static str, Value)>>,
        seed: u64,
    ) -> Self {
        let mut fields = params;
        let (error, violation) = match measured {
            Ok(values) => {
                debug_assert_eq!(values.iter().map(|(k, _)| *k).collect::<Vec<_>>(), measured_columns);
                fields.extend(values);
                (None, false)
            }
            Err(e) => {
                fields.extend(measured_columns.iter().map(|&k| (k, Value::Missing)));
                (Some(e.to_string()), e.is_violation())
            }
        };
        fields.push(("seed", Value::UInt(seed)));
        ResultRecord { experiment, fields, error, violation }
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.fields.iter().find(|(k, _)| *k == name).map(|(_, v)| v)
    }

    pub fn get_f64(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(Value::as_f64)
    }

    /// The cell failed a mathematical check rather than a budget or input
    /// check.
    pub fn is_violation(&self) -> bool {
        self.violation
    }

    pub fn columns(&self) -> Vec<&'static str> {
        self.fields.iter().map(|(k, _)| *k).chain(["error"]).collect()
    }
}

/// Runs every cell of the configured sweep.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    config.validate()?;
    let seed = config.seed;
    let timing = config.timing;
    let records = match &config.experiment {
        Experiment::HaarGap { ds, copies, mc_samples } => {
            let cells: Vec<(usize, usize)> =
                sorted(ds).into_iter().flat_map(|d| sorted(copies).into_iter().map(move |n| (d, n))).collect();
            cells.into_par_iter().map(|(d, n)| haar_gap_cell(d, n, *mc_samples, seed, timing)).collect()
        }
        Experiment::CopiesSweep { ds, threshold } => {
            sorted(ds).into_par_iter().map(|d| copies_cell(d, *threshold, seed, timing)).collect()
        }
        Experiment::Trials { problem, solver, ns, num_vectors, trials } => sorted(ns)
            .into_par_iter()
            .map(|n| trials_cell(*problem, *solver, n, *num_vectors, *trials, seed, timing))
            .collect(),
        Experiment::EncodingDemo { ns, num_vectors, trials } => {
            sorted(ns).into_par_iter().map(|n| encoding_cell(n, *num_vectors, *trials, seed)).collect()
        }
    };
    Ok(records)
}

fn sorted<T: Ord + Copy>(xs: &[T]) -> Vec<T> {
    let mut v = xs.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

fn seconds_since(start: Instant, timing: bool) -> f64 {
    if timing { start.elapsed().as_secs_f64() } else { 0.0 }
}

const HAAR_COLUMNS: &[&str] =
    &["sym_dim", "gap", "bound_two_term", "bound_final", "o_rest_min_eig", "mc_max_dev", "seconds"];

fn haar_gap_cell(d: usize, n: usize, mc_samples: u64, seed: u64, timing: bool) -> ResultRecord {
    let cell_seed = derive_seed(seed, &[tag::CELL, d as u64, n as u64]);
    let measured = (|| {
        let start = Instant::now();
        let report = moments::trace_norm_gap(d, n)?;
        let mc = if mc_samples > 0 && report.sym_dim <= MC_DIM_LIMIT {
            let est = moments::mc_moment(d, n, mc_samples, Field::Real, cell_seed)?;
            Some(est.max_deviation(&moments::real_moment(d, n)?)?)
        } else {
            None
        };
        Ok(vec![
            ("sym_dim", report.sym_dim.into()),
            ("gap", report.gap.into()),
            ("bound_two_term", report.bound_two_term.into()),
            ("bound_final", report.bound_final.into()),
            ("o_rest_min_eig", report.o_rest_min_eig.into()),
            ("mc_max_dev", mc.into()),
            ("seconds", seconds_since(start, timing).into()),
        ])
    })();
    ResultRecord::build("haar-gap", vec![("d", d.into()), ("N", n.into())], HAAR_COLUMNS, measured, seed)
}

const COPIES_COLUMNS: &[&str] = &["min_copies", "tracenorm_at_min", "tracenorm_below_min", "seconds"];

fn copies_cell(d: u64, threshold: f64, seed: u64, timing: bool) -> ResultRecord {
    let measured = (|| {
        let start = Instant::now();
        let n = discrimination::min_copies_minus_sign(d, threshold)?;
        let at = discrimination::ncopy_minus_sign_tracenorm(d, n)?;
        let below = discrimination::ncopy_minus_sign_tracenorm(d, n - 1)?;
        Ok(vec![
            ("min_copies", n.into()),
            ("tracenorm_at_min", at.into()),
            ("tracenorm_below_min", below.into()),
            ("seconds", seconds_since(start, timing).into()),
        ])
    })();
    let params = vec![("d", d.into()), ("threshold", threshold.into())];
    ResultRecord::build("copies-sweep", params, COPIES_COLUMNS, measured, seed)
}

const TRIAL_COLUMNS: &[&str] = &[
    "successes",
    "success_rate",
    "max_sample_calls",
    "max_query_calls",
    "max_norm_calls",
    "min_query_calls",
    "elapsed_ns",
];

fn trials_cell(problem: ProblemKind, solver: Solver, n: u32, c: usize, trials: u64, seed: u64, timing: bool) -> ResultRecord {
    let cell_seed = derive_seed(seed, &[tag::CELL, n as u64]);
    let measured = learners::run_trials(problem, solver, n, c, trials, cell_seed).map(|s| {
        vec![
            ("successes", s.successes.into()),
            ("success_rate", s.success_rate().into()),
            ("max_sample_calls", s.max_calls.sample_calls.into()),
            ("max_query_calls", s.max_calls.query_calls.into()),
            ("max_norm_calls", s.max_calls.norm_calls.into()),
            ("min_query_calls", s.min_calls.query_calls.into()),
            ("elapsed_ns", if timing { s.total_elapsed_ns } else { 0 }.into()),
        ]
    });
    let params = vec![
        ("problem", problem.name().into()),
        ("solver", solver.name().into()),
        ("n", n.into()),
        ("C", c.into()),
        ("trials", trials.into()),
    ];
    ResultRecord::build("trials", params, TRIAL_COLUMNS, measured, seed)
}

const ENCODING_COLUMNS: &[&str] =
    &["product_successes", "product_success_rate", "amplitude_helstrom", "amplitude_helstrom_dense"];

/// Outcome of product-encoded solves on fresh instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProductTrials {
    pub trials: u64,
    pub successes: u64,
}

/// Product-encodes `trials` seeded unnormalized minus-sign instances and
/// solves each from one copy per object.
pub fn product_encoding_trials(n: u32, num_vectors: usize, trials: u64, seed: u64) -> Result<ProductTrials> {
    let wins = (0..trials)
        .into_par_iter()
        .map(|t| {
            let inst_seed = derive_seed(seed, &[tag::TRIAL, t]);
            let inst = instances::gen_unnormalized_minus(n, num_vectors, inst_seed)?;
            let encoded = circuit::product_encode_instance(&inst)?;
            let mut rng = rng_for(inst_seed, &[tag::TRIAL]);
            let report = circuit::solve_product_encoding(&encoded, &mut rng)?;
            inst.verify_answer(report.answer)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(ProductTrials { trials, successes: wins.iter().filter(|&&w| w).count() as u64 })
}

fn encoding_cell(n: u32, c: usize, trials: u64, seed: u64) -> ResultRecord {
    let cell_seed = derive_seed(seed, &[tag::CELL, n as u64]);
    let measured = (|| {
        let product = product_encoding_trials(n, c, trials, cell_seed)?;
        let dense = if n <= ENCODING_DENSE_LIMIT { Some(circuit::amplitude_single_copy_success_dense(n)?) } else { None };
        Ok(vec![
            ("product_successes", product.successes.into()),
            ("product_success_rate", (product.successes as f64 / trials as f64).into()),
            ("amplitude_helstrom", circuit::amplitude_single_copy_success(n).into()),
            ("amplitude_helstrom_dense", dense.into()),
        ])
    })();
    let params = vec![("n", n.into()), ("C", c.into()), ("trials", trials.into())];
    ResultRecord::build("encoding-demo", params, ENCODING_COLUMNS, measured, seed)
}

/// Renders records as CSV (header plus one line per record) or JSON-lines.
pub fn render_records(records: &[ResultRecord], format: OutputFormat) -> Result<String> {
    let mut out = Vec::new();
    write_to(records, format, &mut out)?;
    Ok(String::from_utf8(out).expect("records render as UTF-8"))
}

fn write_to<W: Write>(records: &[ResultRecord], format: OutputFormat, sink: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
            if let Some(first) = records.first() {
                w.write_record(first.columns())?;
            }
            for r in records {
                let mut row: Vec<String> = r.fields.iter().map(|(_, v)| v.to_string()).collect();
                row.push(r.error.clone().unwrap_or_default());
                w.write_record(&row)?;
            }
            w.flush()?;
        }
        OutputFormat::JsonLines => {
            let mut sink = sink;
            for r in records {
                let mut obj = Map::new();
                obj.insert("experiment".into(), r.experiment.into());
                for (k, v) in &r.fields {
                    obj.insert((*k).into(), v.to_json());
                }
                obj.insert("error".into(), r.error.clone().map_or(serde_json::Value::Null, Into::into));
                serde_json::to_writer(&mut sink, &obj)?;
                sink.write_all(b"\n")?;
            }
            sink.flush()?;
        }
    }
    Ok(())
}

/// Writes records to `path`, or to standard output when `path` is `None`.
pub fn write_records(records: &[ResultRecord], format: OutputFormat, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            let file = std::io::BufWriter::new(std::fs::File::create(p)?);
            write_to(records, format, file)
        }
        None => write_to(records, format, std::io::stdout().lock()),
    }
}
