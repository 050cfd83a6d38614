//! Replication harness for the simulated models.
//!
//! Replication `r` of a run seeded with `S` uses seed `S + r` for data
//! generation, the train/test split and the cross-validation folds, so any
//! single replication can be rerun in isolation.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataio::{load_json, save_json};
use crate::error::{KosError, Result};
use crate::kernels::KernelSpec;
use crate::model::{error_rate, train, DataSet};
use crate::simdata::{stratified_split, SimModel, DEFAULT_TRAIN_FRACTION};
use crate::solver::FitConfig;
use crate::tuning::{tune, GammaChoice, Sigma2Choice, TuningPlan, TuningReport, DEFAULT_FOLDS};

pub const ROWS_FILE: &str = "rows.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MAX_FAILURE_RATE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Kos,
    SparseKos,
    /// Sparse KOS with the ridge parameter chosen by GCV instead of
    /// Stabilization.
    SparseKosGcv,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Kos, Method::SparseKos, Method::SparseKosGcv];

    pub fn name(self) -> &'static str {
        match self {
            Self::Kos => "kos",
            Self::SparseKos => "sparse_kos",
            Self::SparseKosGcv => "sparse_kos_gcv",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = KosError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| KosError::Format(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub model: SimModel,
    pub replications: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub folds: usize,
    pub compare_gcv: bool,
    pub fit: FitConfig,
}

impl BenchmarkConfig {
    pub fn new(model: SimModel, replications: usize, seed: u64) -> Self {
        Self {
            model,
            replications,
            seed,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            folds: DEFAULT_FOLDS,
            compare_gcv: false,
            fit: FitConfig::default(),
        }
    }

    pub fn methods(&self) -> Vec<Method> {
        if self.compare_gcv {
            Method::ALL.to_vec()
        } else {
            vec![Method::Kos, Method::SparseKos]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub replication: usize,
    pub seed: u64,
    pub method: Method,
    pub sigma2: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub test_error: f64,
    /// 1-based indices of the nonzero weights.
    pub nonzero_weight_indices: Vec<usize>,
    pub w_values: Vec<f64>,
}

const ROW_HEADER: [&str; 9] = [
    "replication",
    "seed",
    "method",
    "sigma2",
    "gamma",
    "lambda",
    "test_error",
    "nonzero_weight_indices",
    "w_values",
];

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

fn split_list<T: FromStr>(cell: &str, what: &str) -> Result<Vec<T>> {
    if cell.is_empty() {
        return Ok(Vec::new());
    }
    cell.split(';')
        .map(|v| {
            v.parse()
                .map_err(|_| KosError::Format(format!("bad {what} entry `{v}`")))
        })
        .collect()
}

fn parse_cell<T: FromStr>(cell: &str, what: &str) -> Result<T> {
    cell.parse()
        .map_err(|_| KosError::Format(format!("bad {what} value `{cell}`")))
}

impl BenchmarkRow {
    fn record(&self) -> [String; 9] {
        [
            self.replication.to_string(),
            self.seed.to_string(),
            self.method.to_string(),
            self.sigma2.to_string(),
            self.gamma.to_string(),
            self.lambda.to_string(),
            self.test_error.to_string(),
            join(&self.nonzero_weight_indices),
            join(&self.w_values),
        ]
    }

    fn from_record(record: &csv::StringRecord) -> Result<Self> {
        if record.len() != ROW_HEADER.len() {
            return Err(KosError::Format(format!(
                "benchmark row has {} fields, expected {}",
                record.len(),
                ROW_HEADER.len()
            )));
        }
        let row = Self {
            replication: parse_cell(&record[0], "replication")?,
            seed: parse_cell(&record[1], "seed")?,
            method: record[2].parse()?,
            sigma2: parse_cell(&record[3], "sigma2")?,
            gamma: parse_cell(&record[4], "gamma")?,
            lambda: parse_cell(&record[5], "lambda")?,
            test_error: parse_cell(&record[6], "test_error")?,
            nonzero_weight_indices: split_list(&record[7], "nonzero_weight_indices")?,
            w_values: split_list(&record[8], "w_values")?,
        };
        let expected: Vec<usize> = nonzero_indices(&row.w_values);
        if expected != row.nonzero_weight_indices {
            return Err(KosError::Format(format!(
                "replication {}: nonzero indices disagree with the weights",
                row.replication
            )));
        }
        Ok(row)
    }
}

fn nonzero_indices(w: &[f64]) -> Vec<usize> {
    w.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(j, _)| j + 1)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedReplication {
    pub replication: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub replications: usize,
    pub mean_error: f64,
    /// Sample standard deviation of the test errors.
    pub std_error: f64,
    /// Per feature, the fraction of replications with a nonzero weight.
    pub selection_frequency: Vec<f64>,
    pub mean_abs_weight: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub model: u32,
    pub seed: u64,
    pub replications_requested: usize,
    pub failed: Vec<FailedReplication>,
    pub methods: Vec<MethodSummary>,
}

impl BenchmarkSummary {
    pub fn failure_rate(&self) -> f64 {
        if self.replications_requested == 0 {
            0.0
        } else {
            self.failed.len() as f64 / self.replications_requested as f64
        }
    }

    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    pub summary: BenchmarkSummary,
}

impl BenchmarkReport {
    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &BenchmarkRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    pub fn exceeds_failure_budget(&self) -> bool {
        self.summary.failure_rate() > MAX_FAILURE_RATE
    }
}

fn summarize_method(method: Method, rows: &[&BenchmarkRow]) -> Option<MethodSummary> {
    let first = rows.first()?;
    let p = first.w_values.len();
    let r = rows.len() as f64;
    let mean_error = rows.iter().map(|row| row.test_error).sum::<f64>() / r;
    let std_error = if rows.len() > 1 {
        let ss: f64 = rows.iter().map(|row| (row.test_error - mean_error).powi(2)).sum();
        (ss / (r - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut selected = vec![0usize; p];
    let mut abs_sum = vec![0.0; p];
    for row in rows {
        for (j, v) in row.w_values.iter().enumerate().take(p) {
            if *v != 0.0 {
                selected[j] += 1;
            }
            abs_sum[j] += v.abs();
        }
    }
    Some(MethodSummary {
        method,
        replications: rows.len(),
        mean_error,
        std_error,
        selection_frequency: selected.iter().map(|&c| c as f64 / r).collect(),
        mean_abs_weight: abs_sum.iter().map(|s| s / r).collect(),
    })
}

/// Summary statistics derived from the per-replication rows.
pub fn summarize(
    rows: &[BenchmarkRow],
    model: u32,
    seed: u64,
    replications_requested: usize,
    failed: Vec<FailedReplication>,
) -> BenchmarkSummary {
    let methods = Method::ALL
        .into_iter()
        .filter_map(|m| {
            let subset: Vec<&BenchmarkRow> = rows.iter().filter(|r| r.method == m).collect();
            summarize_method(m, &subset)
        })
        .collect();
    BenchmarkSummary {
        model,
        seed,
        replications_requested,
        failed,
        methods,
    }
}

fn test_error_row(
    replication: usize,
    seed: u64,
    method: Method,
    trainset: &DataSet,
    testset: &DataSet,
    report: &TuningReport,
    base: &FitConfig,
    sparse: bool,
) -> Result<BenchmarkRow> {
    let spec = KernelSpec::gaussian(report.sigma2_selected)?;
    let lambda = if sparse { report.lambda_selected } else { 0.0 };
    let config = base.with_gamma(report.gamma_selected).with_lambda(lambda);
    let model = train(trainset, &config, &spec, sparse)?;
    let test_error = error_rate(&model, testset)?;
    let w_values = model.w.as_array().to_vec();
    Ok(BenchmarkRow {
        replication,
        seed,
        method,
        sigma2: report.sigma2_selected,
        gamma: report.gamma_selected,
        lambda,
        test_error,
        nonzero_weight_indices: nonzero_indices(&w_values),
        w_values,
    })
}

/// Runs one replication and returns its rows in method order.
pub fn run_replication(config: &BenchmarkConfig, replication: usize) -> Result<Vec<BenchmarkRow>> {
    let seed = config.seed.wrapping_add(replication as u64);
    let data = config.model.generate(seed)?;
    let (trainset, testset) = stratified_split(&data, config.train_fraction, seed)?;
    let spec_template = KernelSpec::gaussian(1.0)?;
    let mut plan = TuningPlan::auto(seed);
    plan.folds = config.folds;
    let report = tune(&trainset, &plan, &config.fit, &spec_template)?;
    log::debug!(
        "replication {replication}: sigma2 {} gamma {} lambda {}",
        report.sigma2_selected,
        report.gamma_selected,
        report.lambda_selected
    );

    let mut rows = vec![
        test_error_row(replication, seed, Method::Kos, &trainset, &testset, &report, &config.fit, false)?,
        test_error_row(replication, seed, Method::SparseKos, &trainset, &testset, &report, &config.fit, true)?,
    ];
    if config.compare_gcv {
        let gcv_plan = TuningPlan {
            sigma2: Sigma2Choice::Fixed(report.sigma2_selected),
            gamma: GammaChoice::Gcv,
            ..plan
        };
        let gcv_report = tune(&trainset, &gcv_plan, &config.fit, &spec_template)?;
        rows.push(test_error_row(
            replication,
            seed,
            Method::SparseKosGcv,
            &trainset,
            &testset,
            &gcv_report,
            &config.fit,
            true,
        )?);
    }
    Ok(rows)
}

/// Runs every replication in order. A failing replication is recorded in the
/// summary and contributes no rows.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    if config.replications == 0 {
        return Err(KosError::InvalidParameter {
            name: "replications",
            reason: "must be at least 1".into(),
        });
    }
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for r in 0..config.replications {
        match run_replication(config, r) {
            Ok(mut replication_rows) => rows.append(&mut replication_rows),
            Err(e) => {
                log::warn!("replication {r} failed: {e}");
                failed.push(FailedReplication {
                    replication: r,
                    seed: config.seed.wrapping_add(r as u64),
                    error: e.to_string(),
                });
            }
        }
        log::info!("replication {}/{} done", r + 1, config.replications);
    }
    let summary = summarize(&rows, config.model.id(), config.seed, config.replications, failed);
    Ok(BenchmarkReport { rows, summary })
}

pub fn rows_path(dir: &Path) -> PathBuf {
    dir.join(ROWS_FILE)
}

pub fn summary_path(dir: &Path) -> PathBuf {
    dir.join(SUMMARY_FILE)
}

pub fn write_rows(rows: &[BenchmarkRow], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(ROW_HEADER)?;
    for row in rows {
        writer.write_record(row.record())?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<BenchmarkRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    if header.iter().ne(ROW_HEADER) {
        return Err(KosError::Format(format!(
            "{}: unexpected benchmark header",
            path.display()
        )));
    }
    reader
        .records()
        .map(|rec| BenchmarkRow::from_record(&rec?))
        .collect()
}

/// Writes `rows.csv` and `summary.json` into `dir`, creating it if needed.
pub fn save_benchmark(report: &BenchmarkReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_rows(&report.rows, &rows_path(dir))?;
    save_json(&report.summary, &summary_path(dir))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn summaries_agree(a: &MethodSummary, b: &MethodSummary) -> bool {
    a.method == b.method
        && a.replications == b.replications
        && close(a.mean_error, b.mean_error)
        && close(a.std_error, b.std_error)
        && a.selection_frequency.len() == b.selection_frequency.len()
        && a.mean_abs_weight.len() == b.mean_abs_weight.len()
        && a.selection_frequency.iter().zip(&b.selection_frequency).all(|(x, y)| close(*x, *y))
        && a.mean_abs_weight.iter().zip(&b.mean_abs_weight).all(|(x, y)| close(*x, *y))
}

/// Loads a saved report and checks that its summary follows from its rows.
pub fn load_benchmark(dir: &Path) -> Result<BenchmarkReport> {
    let rows = read_rows(&rows_path(dir))?;
    let saved: BenchmarkSummary = load_json(&summary_path(dir))?;
    let recomputed = summarize(
        &rows,
        saved.model,
        saved.seed,
        saved.replications_requested,
        saved.failed.clone(),
    );
    let consistent = recomputed.methods.len() == saved.methods.len()
        && recomputed
            .methods
            .iter()
            .zip(&saved.methods)
            .all(|(a, b)| summaries_agree(a, b));
    if !consistent {
        return Err(KosError::Format(format!(
            "{}: summary does not match the rows",
            dir.display()
        )));
    }
    Ok(BenchmarkReport { rows, summary: saved })
}
