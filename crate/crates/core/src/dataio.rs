//! File formats.
//!
//! Datasets are delimited text with one row per sample and a label column.
//! Models and tuning reports are JSON documents; floats are written in the
//! shortest form that round-trips an `f64`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{KosError, Result};
use crate::kernels::{self, KernelSpec, WeightVector};
use crate::model::{make_scores, DataSet, Model, ScoreVector, DEGENERACY_TOL};
use crate::solver::{FitConfig, SolverTrace};
use crate::tuning::TuningReport;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    /// 0-based column position.
    Index(usize),
}

impl LabelColumn {
    /// Interprets a command-line value: a header name, or a 0-based index.
    pub fn parse(value: &str) -> Self {
        match value.parse::<usize>() {
            Ok(i) => Self::Index(i),
            Err(_) => Self::Name(value.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    pub label_column: LabelColumn,
    pub delimiter: u8,
    pub has_header: bool,
}

impl CsvSchema {
    pub fn new(label_column: LabelColumn) -> Self {
        Self {
            label_column,
            delimiter: b',',
            has_header: true,
        }
    }
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self::new(LabelColumn::Name("label".into()))
    }
}

/// Raw cells of a delimited file.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn ncols(&self) -> usize {
        self.header
            .as_ref()
            .map(Vec::len)
            .or_else(|| self.rows.first().map(Vec::len))
            .unwrap_or(0)
    }

    fn column_name(&self, j: usize) -> String {
        match &self.header {
            Some(h) => h[j].clone(),
            None => format!("#{j}"),
        }
    }

    /// Position of a label column, if the table has it.
    pub fn find_column(&self, column: &LabelColumn) -> Option<usize> {
        match column {
            LabelColumn::Name(name) => self.header.as_ref()?.iter().position(|h| h == name),
            LabelColumn::Index(i) => {
                // a header that literally names the column wins over the index
                if let Some(pos) = self
                    .header
                    .as_ref()
                    .and_then(|h| h.iter().position(|c| *c == i.to_string()))
                {
                    return Some(pos);
                }
                (*i < self.ncols()).then_some(*i)
            }
        }
    }

    /// Numeric matrix of every column except `skip`.
    pub fn features(&self, skip: Option<usize>, path: &str) -> Result<Array2<f64>> {
        let cols: Vec<usize> = (0..self.ncols()).filter(|&j| Some(j) != skip).collect();
        if cols.is_empty() {
            return Err(KosError::Format(format!("{path}: no feature columns")));
        }
        let mut x = Array2::<f64>::zeros((self.rows.len(), cols.len()));
        for (r, row) in self.rows.iter().enumerate() {
            for (c, &j) in cols.iter().enumerate() {
                let cell = &row[j];
                let v: f64 = cell.parse().map_err(|_| KosError::ParseCell {
                    path: path.to_string(),
                    row: r + 1,
                    column: self.column_name(j),
                    value: cell.clone(),
                })?;
                if !v.is_finite() {
                    return Err(KosError::ParseCell {
                        path: path.to_string(),
                        row: r + 1,
                        column: self.column_name(j),
                        value: cell.clone(),
                    });
                }
                x[[r, c]] = v;
            }
        }
        Ok(x)
    }
}

pub fn read_table(path: &Path, delimiter: u8, has_header: bool) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header = if has_header {
        let h: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        if h.is_empty() || (h.len() == 1 && h[0].is_empty()) {
            return Err(KosError::Format(format!("{}: empty file", path.display())));
        }
        Some(h)
    } else {
        None
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        rows.push(record?.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(KosError::Format(format!("{}: no data rows", path.display())));
    }
    Ok(Table { header, rows })
}

pub fn read_dataset(path: &Path, schema: &CsvSchema) -> Result<DataSet> {
    let table = read_table(path, schema.delimiter, schema.has_header)?;
    let shown = path.display().to_string();
    if !schema.has_header && matches!(schema.label_column, LabelColumn::Name(_)) {
        return Err(KosError::Format(format!(
            "{shown}: a named label column needs a header row"
        )));
    }
    let label_pos = table.find_column(&schema.label_column).ok_or_else(|| {
        KosError::Format(format!("{shown}: label column {:?} not found", schema.label_column))
    })?;
    let x = table.features(Some(label_pos), &shown)?;
    let labels: Vec<String> = table.rows.iter().map(|r| r[label_pos].clone()).collect();
    DataSet::new(x, &labels)
}

/// Writes `f1,...,fp,label` with 17 significant digits per value.
pub fn write_dataset(data: &DataSet, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header: Vec<String> = (1..=data.p()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    writer.write_record(&header)?;
    for i in 0..data.n() {
        let mut record: Vec<String> = data.x().row(i).iter().map(|v| format!("{v:.16e}")).collect();
        record.push(data.label(i).to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes `row,projection,predicted_label`, rows numbered from 0.
pub fn write_predictions(labels: &[String], projections: &[f64], path: &Path) -> Result<()> {
    if labels.len() != projections.len() {
        return Err(KosError::DimensionMismatch {
            context: "predictions",
            expected: labels.len(),
            actual: projections.len(),
        });
    }
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    writer.write_record(["row", "projection", "predicted_label"])?;
    for (i, (label, p)) in labels.iter().zip(projections).enumerate() {
        writer.write_record([i.to_string(), p.to_string(), label.clone()])?;
    }
    writer.flush()?;
    Ok(())
}

/// On-disk model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub w: Vec<f64>,
    pub alpha: Vec<f64>,
    pub spec: KernelSpec,
    pub theta: [f64; 2],
    pub x_train: Vec<Vec<f64>>,
    pub column_means_raw: Vec<f64>,
    pub kernel_column_means: Vec<f64>,
    pub centroids: [f64; 2],
    pub class_labels: [String; 2],
    pub class_counts: [usize; 2],
    pub config_used: FitConfig,
    pub sparse: bool,
    pub degenerate: bool,
    pub trace: Option<SolverTrace>,
    pub tuning: TuningReport,
    pub label_column: Option<String>,
}

const MODEL_FIELDS: &[&str] = &[
    "format_version",
    "w",
    "alpha",
    "spec",
    "theta",
    "x_train",
    "column_means_raw",
    "kernel_column_means",
    "centroids",
    "class_labels",
    "class_counts",
    "config_used",
    "sparse",
    "degenerate",
    "trace",
    "tuning",
    "label_column",
];

impl From<&Model> for ModelFile {
    fn from(m: &Model) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            w: m.w.as_array().to_vec(),
            alpha: m.alpha.to_vec(),
            spec: m.spec,
            theta: m.theta.theta,
            x_train: m.x_train.rows().into_iter().map(|r| r.to_vec()).collect(),
            column_means_raw: m.column_means_raw.to_vec(),
            kernel_column_means: m.kernel_column_means.to_vec(),
            centroids: m.centroids,
            class_labels: m.class_labels.clone(),
            class_counts: m.class_counts,
            config_used: m.config_used,
            sparse: m.sparse,
            degenerate: m.degenerate,
            trace: m.trace.clone(),
            tuning: m.tuning.clone(),
            label_column: m.label_column.clone(),
        }
    }
}

fn invalid(field: &'static str, reason: impl Into<String>) -> KosError {
    KosError::InvalidModel {
        field,
        reason: reason.into(),
    }
}

fn check_close(field: &'static str, stored: &[f64], expected: &Array1<f64>, tol: f64) -> Result<()> {
    if stored.len() != expected.len() {
        return Err(invalid(field, format!("length {} != {}", stored.len(), expected.len())));
    }
    for (a, b) in stored.iter().zip(expected.iter()) {
        if !((a - b).abs() <= tol * b.abs().max(1.0)) {
            return Err(invalid(field, format!("stored {a} disagrees with recomputed {b}")));
        }
    }
    Ok(())
}

impl ModelFile {
    /// Validates every invariant and rebuilds the in-memory model.
    pub fn into_model(self) -> Result<Model> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(KosError::VersionMismatch {
                found: self.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        self.spec
            .validate()
            .map_err(|e| invalid("spec", e.to_string()))?;
        self.config_used
            .validate()
            .map_err(|e| invalid("config_used", e.to_string()))?;

        let n = self.x_train.len();
        if n < 2 {
            return Err(invalid("x_train", format!("needs at least 2 rows, has {n}")));
        }
        let p = self.x_train[0].len();
        if p == 0 || self.x_train.iter().any(|r| r.len() != p) {
            return Err(invalid("x_train", "rows must be non-empty and of equal length"));
        }
        let x_train = Array2::from_shape_vec((n, p), self.x_train.concat())
            .map_err(|e| invalid("x_train", e.to_string()))?;
        if x_train.iter().any(|v| !v.is_finite()) {
            return Err(invalid("x_train", "non-finite value"));
        }
        if self.w.len() != p {
            return Err(invalid("w", format!("length {} != feature count {p}", self.w.len())));
        }
        let w = WeightVector::new(Array1::from(self.w)).map_err(|e| invalid("w", e.to_string()))?;
        if self.alpha.len() != n {
            return Err(invalid(
                "alpha",
                format!("length {} != training size {n}", self.alpha.len()),
            ));
        }
        if self.alpha.iter().any(|v| !v.is_finite()) {
            return Err(invalid("alpha", "non-finite value"));
        }
        if self.class_counts[0] + self.class_counts[1] != n {
            return Err(invalid("class_counts", "counts do not sum to the training size"));
        }
        let theta = make_scores(self.class_counts[0], self.class_counts[1])
            .map_err(|e| invalid("class_counts", e.to_string()))?;
        for k in 0..2 {
            if (theta.theta[k] - self.theta[k]).abs() > 1e-12 * theta.theta[k].abs().max(1.0) {
                return Err(invalid("theta", "scores disagree with the class counts"));
            }
        }
        if self.class_labels[0] == self.class_labels[1] {
            return Err(invalid("class_labels", "the two labels must differ"));
        }
        if self.centroids.iter().any(|c| !c.is_finite()) {
            return Err(invalid("centroids", "non-finite value"));
        }
        let gap_degenerate = (self.centroids[0] - self.centroids[1]).abs() <= DEGENERACY_TOL;
        if gap_degenerate != self.degenerate {
            return Err(invalid("degenerate", "flag disagrees with the centroid gap"));
        }

        let column_means = x_train.mean_axis(ndarray::Axis(0)).expect("n >= 2");
        check_close("column_means_raw", &self.column_means_raw, &column_means, 1e-12)?;
        let km = kernels::kernel_matrix(x_train.view(), &w, &self.spec)
            .map_err(|e| invalid("x_train", e.to_string()))?;
        check_close("kernel_column_means", &self.kernel_column_means, &km.column_means, 1e-10)?;

        Ok(Model {
            w,
            alpha: Array1::from(self.alpha),
            spec: self.spec,
            theta: ScoreVector { theta: self.theta },
            x_train,
            column_means_raw: Array1::from(self.column_means_raw),
            kernel_column_means: Array1::from(self.kernel_column_means),
            centroids: self.centroids,
            class_labels: self.class_labels,
            class_counts: self.class_counts,
            config_used: self.config_used,
            sparse: self.sparse,
            degenerate: self.degenerate,
            trace: self.trace,
            tuning: self.tuning,
            label_column: self.label_column,
        })
    }
}

pub fn model_to_json(model: &Model) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelFile::from(model))?)
}

/// Parses a model document, returning it together with the names of any
/// unrecognized top-level fields (which are ignored).
pub fn model_from_json(text: &str) -> Result<(Model, Vec<String>)> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let object = value
        .as_object()
        .ok_or_else(|| KosError::Format("model document must be a JSON object".into()))?;
    if let Some(v) = object.get("format_version").and_then(|v| v.as_u64()) {
        if v != MODEL_FORMAT_VERSION as u64 {
            return Err(KosError::VersionMismatch {
                found: v as u32,
                expected: MODEL_FORMAT_VERSION,
            });
        }
    }
    let unknown: Vec<String> = object
        .keys()
        .filter(|k| !MODEL_FIELDS.contains(&k.as_str()))
        .cloned()
        .collect();
    for k in &unknown {
        log::warn!("ignoring unknown model field `{k}`");
    }
    let file: ModelFile = serde_json::from_value(value)?;
    Ok((file.into_model()?, unknown))
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(model_to_json(model)?.as_bytes())?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(path)?;
    Ok(model_from_json(&text)?.0)
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_report(report: &TuningReport, path: &Path) -> Result<()> {
    save_json(report, path)
}

pub fn load_report(path: &Path) -> Result<TuningReport> {
    load_json(path)
}
