//! Two-class datasets, optimal scores, and the trained classifier.

use std::cmp::Ordering;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{ensure_finite, KosError, Result};
use crate::kernels::{self, KernelSpec, WeightVector};
use crate::solver::{self, FitConfig, SolverTrace};
use crate::tuning::TuningReport;

/// Centroid gaps at or below this mark a fit as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Orders labels numerically when both parse as numbers, otherwise
/// lexicographically.
pub fn compare_labels(a: &str, b: &str) -> Ordering {
    match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
        (Ok(x), Ok(y)) if x.is_finite() && y.is_finite() && x != y => {
            x.partial_cmp(&y).expect("finite")
        }
        _ => a.cmp(b),
    }
}

/// Feature matrix with exactly two classes. Class 0 ("class 1") is the
/// smaller label in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    x: Array2<f64>,
    classes: Vec<usize>,
    class_labels: [String; 2],
    counts: [usize; 2],
}

impl DataSet {
    pub fn new(x: Array2<f64>, labels: &[String]) -> Result<Self> {
        if labels.len() != x.nrows() {
            return Err(KosError::DimensionMismatch {
                context: "labels",
                expected: x.nrows(),
                actual: labels.len(),
            });
        }
        let mut distinct: Vec<String> = Vec::new();
        for l in labels {
            if !distinct.contains(l) {
                distinct.push(l.clone());
            }
        }
        distinct.sort_by(|a, b| compare_labels(a, b));
        if distinct.len() != 2 {
            return Err(KosError::LabelCount(distinct));
        }
        let classes = labels
            .iter()
            .map(|l| usize::from(*l != distinct[0]))
            .collect();
        let class_labels = [distinct[0].clone(), distinct[1].clone()];
        Self::from_classes(x, classes, class_labels)
    }

    /// Builds a dataset from class indices (0 or 1) and their label names.
    pub fn from_classes(
        x: Array2<f64>,
        classes: Vec<usize>,
        class_labels: [String; 2],
    ) -> Result<Self> {
        if classes.len() != x.nrows() {
            return Err(KosError::DimensionMismatch {
                context: "classes",
                expected: x.nrows(),
                actual: classes.len(),
            });
        }
        if x.ncols() == 0 {
            return Err(KosError::InvalidParameter {
                name: "x",
                reason: "dataset has no feature columns".into(),
            });
        }
        ensure_finite(x.iter(), "dataset features")?;
        let mut counts = [0usize; 2];
        for &c in &classes {
            if c > 1 {
                return Err(KosError::InvalidParameter {
                    name: "classes",
                    reason: format!("class index {c} is not 0 or 1"),
                });
            }
            counts[c] += 1;
        }
        for (k, &count) in counts.iter().enumerate() {
            if count == 0 {
                return Err(KosError::EmptyClass(k + 1));
            }
        }
        Ok(Self {
            x,
            classes,
            class_labels,
            counts,
        })
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn class_labels(&self) -> &[String; 2] {
        &self.class_labels
    }

    pub fn counts(&self) -> [usize; 2] {
        self.counts
    }

    pub fn label(&self, i: usize) -> &str {
        &self.class_labels[self.classes[i]]
    }

    pub fn labels(&self) -> Vec<String> {
        (0..self.n()).map(|i| self.label(i).to_string()).collect()
    }

    pub fn column_means(&self) -> Array1<f64> {
        self.x.mean_axis(Axis(0)).expect("non-empty dataset")
    }

    /// Column-centered copy of the features.
    pub fn centered_x(&self) -> Array2<f64> {
        &self.x - &self.column_means().insert_axis(Axis(0))
    }

    /// Rows at `indices`, keeping the parent's label names.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let x = self.x.select(Axis(0), indices);
        let classes = indices.iter().map(|&i| self.classes[i]).collect();
        Self::from_classes(x, classes, self.class_labels.clone())
    }

    /// Keeps only the listed feature columns.
    pub fn select_features(&self, columns: &[usize]) -> Result<Self> {
        Self::from_classes(
            self.x.select(Axis(1), columns),
            self.classes.clone(),
            self.class_labels.clone(),
        )
    }

    /// Same samples with the class label names exchanged.
    pub fn with_swapped_labels(&self) -> Self {
        let [a, b] = self.class_labels.clone();
        let labels: Vec<String> = self
            .classes
            .iter()
            .map(|&c| if c == 0 { b.clone() } else { a.clone() })
            .collect();
        Self::new(self.x.clone(), &labels).expect("two labels remain two labels")
    }
}

/// Optimal scores for the two classes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreVector {
    pub theta: [f64; 2],
}

impl ScoreVector {
    /// `Y theta`: each sample's class score.
    pub fn targets(&self, classes: &[usize]) -> Array1<f64> {
        classes.iter().map(|&c| self.theta[c]).collect()
    }
}

pub fn make_scores(n1: usize, n2: usize) -> Result<ScoreVector> {
    if n1 == 0 {
        return Err(KosError::EmptyClass(1));
    }
    if n2 == 0 {
        return Err(KosError::EmptyClass(2));
    }
    let (a, b) = (n1 as f64, n2 as f64);
    Ok(ScoreVector {
        theta: [(b / a).sqrt(), -(a / b).sqrt()],
    })
}

/// A trained (sparse) kernel optimal scoring classifier.
#[derive(Debug, Clone)]
pub struct Model {
    pub w: WeightVector,
    pub alpha: Array1<f64>,
    pub spec: KernelSpec,
    pub theta: ScoreVector,
    pub x_train: Array2<f64>,
    pub column_means_raw: Array1<f64>,
    pub kernel_column_means: Array1<f64>,
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

/// Fits KOS (`sparse = false`, weights fixed at one) or sparse KOS.
pub fn train(data: &DataSet, config: &FitConfig, spec: &KernelSpec, sparse: bool) -> Result<Model> {
    config.validate()?;
    spec.validate()?;
    let [n1, n2] = data.counts();
    let theta = make_scores(n1, n2)?;
    let y_theta = theta.targets(data.classes());
    let x = data.x();

    let (w, alpha, trace, config_used) = if sparse {
        let fit = solver::fit_sparse_kos(x, y_theta.view(), config, spec)?;
        (fit.w, fit.alpha, Some(fit.trace), *config)
    } else {
        let alpha = solver::fit_kos(x, y_theta.view(), config.gamma, spec)?;
        (WeightVector::ones(data.p()), alpha, None, config.with_lambda(0.0))
    };

    let km = kernels::kernel_matrix(x, &w, spec)?;
    let mut model = Model {
        w,
        alpha,
        spec: *spec,
        theta,
        x_train: data.x().to_owned(),
        column_means_raw: data.column_means(),
        kernel_column_means: km.column_means.clone(),
        centroids: [0.0; 2],
        class_labels: data.class_labels().clone(),
        class_counts: [n1, n2],
        config_used,
        sparse,
        degenerate: false,
        trace,
        tuning: TuningReport::fixed(spec.sigma2, config_used.gamma, config_used.lambda),
        label_column: None,
    };

    let centered_alpha = model.centered_alpha();
    let mut sums = [0.0; 2];
    for (row, &c) in km.k.rows().into_iter().zip(data.classes()) {
        let row = row.to_owned();
        sums[c] += (&row - &model.kernel_column_means).dot(&centered_alpha);
    }
    model.centroids = [sums[0] / n1 as f64, sums[1] / n2 as f64];
    model.degenerate = (model.centroids[0] - model.centroids[1]).abs() <= DEGENERACY_TOL;
    Ok(model)
}

impl Model {
    pub fn n_train(&self) -> usize {
        self.x_train.nrows()
    }

    pub fn p(&self) -> usize {
        self.x_train.ncols()
    }

    pub fn with_tuning(mut self, tuning: TuningReport) -> Self {
        self.tuning = tuning;
        self
    }

    fn centered_alpha(&self) -> Array1<f64> {
        let mean = self.alpha.sum() / self.alpha.len() as f64;
        self.alpha.mapv(|a| a - mean)
    }

    /// Projected discriminant value of a new point.
    pub fn project(&self, x: ArrayView1<f64>) -> Result<f64> {
        let k = kernels::cross_kernel(self.x_train.view(), x, &self.w, &self.spec)?;
        Ok((&k - &self.kernel_column_means).dot(&self.centered_alpha()))
    }

    pub fn project_all(&self, x: ArrayView2<f64>) -> Result<Vec<f64>> {
        let centered_alpha = self.centered_alpha();
        x.rows()
            .into_iter()
            .map(|row| {
                let k = kernels::cross_kernel(self.x_train.view(), row, &self.w, &self.spec)?;
                Ok((&k - &self.kernel_column_means).dot(&centered_alpha))
            })
            .collect()
    }

    /// Class index (0 or 1) of the nearest projected centroid; ties go to 0.
    pub fn class_of_projection(&self, projection: f64) -> Result<usize> {
        if self.degenerate {
            return Err(KosError::DegenerateModel);
        }
        let d0 = (projection - self.centroids[0]).abs();
        let d1 = (projection - self.centroids[1]).abs();
        Ok(usize::from(d1 < d0))
    }

    pub fn classify_index(&self, x: ArrayView1<f64>) -> Result<usize> {
        if self.degenerate {
            return Err(KosError::DegenerateModel);
        }
        self.class_of_projection(self.project(x)?)
    }

    pub fn classify(&self, x: ArrayView1<f64>) -> Result<&str> {
        Ok(self.class_labels[self.classify_index(x)?].as_str())
    }

    /// Number of misclassified samples in `test`.
    pub fn misclassified(&self, test: &DataSet) -> Result<usize> {
        if self.degenerate {
            return Err(KosError::DegenerateModel);
        }
        let projections = self.project_all(test.x())?;
        let mut wrong = 0;
        for (i, p) in projections.into_iter().enumerate() {
            let predicted = &self.class_labels[self.class_of_projection(p)?];
            if predicted != test.label(i) {
                wrong += 1;
            }
        }
        Ok(wrong)
    }
}

pub fn error_rate(model: &Model, test: &DataSet) -> Result<f64> {
    if test.n() == 0 {
        return Err(KosError::TooFewSamples {
            required: 1,
            actual: 0,
        });
    }
    Ok(model.misclassified(test)? as f64 / test.n() as f64)
}
