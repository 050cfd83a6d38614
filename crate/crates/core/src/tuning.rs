//! Parameter selection: bandwidth by cross-validated distance quantiles,
//! ridge penalty by kernel-matrix Stabilization (GCV as a comparator), and
//! sparsity penalty by cross-validation over a grid ending at `lambda_max`.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KosError, Result};
use crate::kernels::{self, KernelSpec, WeightVector};
use crate::linalg::{symmetrize, Cholesky};
use crate::model::{self, make_scores, DataSet};
use crate::solver::{self, FitConfig};

pub const DEFAULT_FOLDS: usize = 5;
pub const GAMMA_MIN: f64 = 1e-6;
pub const GAMMA_MAX: f64 = 1e6;
pub const LAMBDA_GRID_LEN: usize = 20;
pub const LAMBDA_GRID_FLOOR: f64 = 1e-10;

/// Quantile levels of the between-class squared distances, as percentages.
pub const SIGMA2_QUANTILES_PCT: [u64; 5] = [5, 10, 20, 30, 50];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSource {
    CrossValidated,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMethod {
    Stabilization,
    Gcv,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileCandidate {
    pub level: f64,
    pub value: f64,
}

/// Everything the tuning pipeline evaluated and chose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub sigma2_source: ParamSource,
    pub sigma2_grid: Vec<QuantileCandidate>,
    pub sigma2_cv_errors: Vec<f64>,
    pub sigma2_selected: f64,
    pub gamma_method: GammaMethod,
    pub t_tilde: Option<f64>,
    pub t_hat: Option<f64>,
    pub gamma_selected: f64,
    pub lambda_source: ParamSource,
    pub lambda_grid: Vec<f64>,
    pub lambda_cv_errors: Vec<f64>,
    pub lambda_max: Option<f64>,
    pub lambda_selected: f64,
    pub folds: usize,
    pub seed: u64,
}

impl TuningReport {
    /// Report for parameters supplied directly, with no search performed.
    pub fn fixed(sigma2: f64, gamma: f64, lambda: f64) -> Self {
        Self {
            sigma2_source: ParamSource::Fixed,
            sigma2_grid: Vec::new(),
            sigma2_cv_errors: Vec::new(),
            sigma2_selected: sigma2,
            gamma_method: GammaMethod::Fixed,
            t_tilde: None,
            t_hat: None,
            gamma_selected: gamma,
            lambda_source: ParamSource::Fixed,
            lambda_grid: Vec::new(),
            lambda_cv_errors: Vec::new(),
            lambda_max: None,
            lambda_selected: lambda,
            folds: 0,
            seed: 0,
        }
    }

    pub fn any_cross_validation(&self) -> bool {
        self.sigma2_source == ParamSource::CrossValidated
            || self.lambda_source == ParamSource::CrossValidated
    }
}

/// Fold index for every sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub assignments: Vec<usize>,
    pub k: usize,
}

impl FoldPlan {
    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] != fold)
            .collect()
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len())
            .filter(|&i| self.assignments[i] == fold)
            .collect()
    }
}

/// Stratified k-fold plan: each class is shuffled with the seeded generator
/// and dealt round-robin across folds.
pub fn make_folds(classes: &[usize], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(KosError::InvalidParameter {
            name: "folds",
            reason: format!("need at least 2 folds, got {k}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0usize; classes.len()];
    for class in 0..2 {
        let mut members: Vec<usize> = (0..classes.len()).filter(|&i| classes[i] == class).collect();
        if members.len() < k {
            return Err(KosError::ClassTooSmall {
                size: members.len(),
                parts: k,
            });
        }
        members.shuffle(&mut rng);
        for (pos, &i) in members.iter().enumerate() {
            assignments[i] = pos % k;
        }
    }
    Ok(FoldPlan { assignments, k })
}

/// Lower nearest-rank quantile: the `ceil(q m)`-th smallest of `m` sorted
/// values, with `q = pct / 100` evaluated in integers.
fn nearest_rank(sorted: &[f64], pct: u64) -> f64 {
    let m = sorted.len() as u64;
    let rank = (pct * m).div_ceil(100).max(1);
    sorted[(rank - 1) as usize]
}

pub fn sigma2_candidates(data: &DataSet) -> Result<Vec<QuantileCandidate>> {
    let x = data.x();
    let classes = data.classes();
    let first: Vec<usize> = (0..data.n()).filter(|&i| classes[i] == 0).collect();
    let second: Vec<usize> = (0..data.n()).filter(|&i| classes[i] == 1).collect();
    let mut d2 = Vec::with_capacity(first.len() * second.len());
    for &i in &first {
        for &j in &second {
            let diff = &x.row(i) - &x.row(j);
            d2.push(diff.dot(&diff));
        }
    }
    d2.sort_by(f64::total_cmp);
    SIGMA2_QUANTILES_PCT
        .iter()
        .map(|&pct| {
            let level = pct as f64 / 100.0;
            let value = nearest_rank(&d2, pct);
            if value > 0.0 {
                Ok(QuantileCandidate { level, value })
            } else {
                Err(KosError::ZeroQuantile { level })
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stabilization {
    pub gamma: f64,
    pub t_tilde: f64,
    pub t_hat: f64,
}

/// Ridge penalty from shrinking `(CKC)^2` toward `CKC + eps I`.
pub fn gamma_stabilization(kc: ArrayView2<f64>) -> Result<Stabilization> {
    let n = kc.nrows();
    if n < 3 {
        return Err(KosError::TooFewSamples {
            required: 3,
            actual: n,
        });
    }
    let frob2: f64 = kc.iter().map(|v| v * v).sum();
    if frob2 == 0.0 {
        return Err(KosError::DegenerateKernel);
    }
    let diag2: f64 = kc.diag().iter().map(|v| v * v).sum();
    let nf = n as f64;
    let t_tilde = nf / (nf - 2.0) * (diag2 - frob2 / nf) / frob2;
    let t_hat = t_tilde.clamp(0.0, 1.0);
    let gamma = stabilization_gamma(t_hat);
    Ok(Stabilization {
        gamma,
        t_tilde,
        t_hat,
    })
}

/// `t / (1 - t)` clamped to `[GAMMA_MIN, GAMMA_MAX]`.
pub fn stabilization_gamma(t_hat: f64) -> f64 {
    let raw = if t_hat >= 1.0 {
        f64::INFINITY
    } else {
        t_hat / (1.0 - t_hat)
    };
    raw.clamp(GAMMA_MIN, GAMMA_MAX)
}

/// 25 log-spaced ridge values from 1e-8 to 1e4.
pub fn default_gcv_grid() -> Vec<f64> {
    (0..25).map(|i| 10f64.powf(-8.0 + 0.5 * i as f64)).collect()
}

/// GCV score `n |(I - S) y|^2 / tr(I - S)^2` with the ridge smoother
/// `S = KC {(KC)^2 + n gamma (KC + eps I)}^-1 KC`.
pub fn gcv_score(
    kc: ArrayView2<f64>,
    kc_squared: ArrayView2<f64>,
    y_theta: ArrayView1<f64>,
    epsilon: f64,
    gamma: f64,
) -> Result<f64> {
    let n = y_theta.len();
    let ridge = n as f64 * gamma;
    let mut system = kc_squared.to_owned();
    system.scaled_add(ridge, &kc);
    for i in 0..n {
        system[[i, i]] += ridge * epsilon;
    }
    symmetrize(&mut system);
    let chol = Cholesky::factor(system.view())?;
    let z = chol.solve_matrix(kc);
    // tr(KC Z) without forming the product
    let trace_s: f64 = (0..n).map(|i| kc.row(i).dot(&z.column(i))).sum();
    let alpha = chol.solve(kc.dot(&y_theta).view());
    let resid = &y_theta - &kc.dot(&alpha);
    let df = n as f64 - trace_s;
    Ok(n as f64 * resid.dot(&resid) / (df * df))
}

/// Grid minimizer of the GCV score; ties go to the smaller ridge value.
pub fn gamma_gcv(
    kc: ArrayView2<f64>,
    y_theta: ArrayView1<f64>,
    epsilon: f64,
    gamma_grid: &[f64],
) -> Result<f64> {
    if gamma_grid.is_empty() {
        return Err(KosError::InvalidParameter {
            name: "gamma_grid",
            reason: "empty grid".into(),
        });
    }
    let mut grid = gamma_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let kc_squared = kc.dot(&kc);
    let mut best = (f64::INFINITY, grid[0]);
    for &gamma in &grid {
        let score = gcv_score(kc, kc_squared.view(), y_theta, epsilon, gamma)?;
        if score < best.0 {
            best = (score, gamma);
        }
    }
    Ok(best.1)
}

/// `LAMBDA_GRID_LEN` evenly spaced values in `[1e-10 lambda_max, lambda_max]`
/// with `lambda_max = 2 |beta|_inf`.
pub fn lambda_grid(beta_first: ArrayView1<f64>) -> Vec<f64> {
    let lambda_max = 2.0 * beta_first.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    if lambda_max == 0.0 {
        log::warn!("first linearization has beta = 0; lambda grid collapses to {{0}}");
        return vec![0.0];
    }
    let lo = LAMBDA_GRID_FLOOR * lambda_max;
    let step = (lambda_max - lo) / (LAMBDA_GRID_LEN - 1) as f64;
    let mut grid: Vec<f64> = (0..LAMBDA_GRID_LEN).map(|i| lo + step * i as f64).collect();
    grid[LAMBDA_GRID_LEN - 1] = lambda_max;
    grid
}

/// Stabilization ridge for a dataset at unit weights.
pub fn stabilization_for(data: &DataSet, spec: &KernelSpec) -> Result<Stabilization> {
    let km = kernels::kernel_matrix(data.x(), &WeightVector::ones(data.p()), spec)?;
    gamma_stabilization(km.kc.view())
}

fn targets(data: &DataSet) -> Result<Array1<f64>> {
    let [n1, n2] = data.counts();
    Ok(make_scores(n1, n2)?.targets(data.classes()))
}

/// Held-out errors of a fitted model; a degenerate model gets every held-out
/// sample wrong.
fn held_out_errors(model: &model::Model, test: &DataSet) -> Result<usize> {
    if model.degenerate {
        Ok(test.n())
    } else {
        model.misclassified(test)
    }
}

fn split(data: &DataSet, plan: &FoldPlan, fold: usize) -> Result<(DataSet, DataSet)> {
    Ok((
        data.subset(&plan.train_indices(fold))?,
        data.subset(&plan.test_indices(fold))?,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sigma2Selection {
    pub grid: Vec<QuantileCandidate>,
    pub cv_errors: Vec<f64>,
    pub selected: f64,
}

/// Cross-validates KOS (unit weights, lambda = 0, per-fold Stabilization
/// ridge) over the bandwidth candidates. Ties go to the smaller bandwidth.
pub fn select_sigma2(
    data: &DataSet,
    config_template: &FitConfig,
    spec_template: &KernelSpec,
    plan: &FoldPlan,
) -> Result<Sigma2Selection> {
    if data.n() < 10 {
        return Err(KosError::TooFewSamples {
            required: 10,
            actual: data.n(),
        });
    }
    let grid = sigma2_candidates(data)?;
    let folds: Vec<(DataSet, DataSet)> = (0..plan.k)
        .map(|f| split(data, plan, f))
        .collect::<Result<_>>()?;
    let mut cv_errors = Vec::with_capacity(grid.len());
    for candidate in &grid {
        let spec = spec_template.with_sigma2(candidate.value)?;
        let mut wrong = 0usize;
        for (train, test) in &folds {
            let stab = stabilization_for(train, &spec)?;
            let config = config_template.with_gamma(stab.gamma).with_lambda(0.0);
            let m = model::train(train, &config, &spec, false)?;
            wrong += held_out_errors(&m, test)?;
        }
        cv_errors.push(wrong as f64 / data.n() as f64);
    }
    let selected = argmin_prefer_smaller_value(&grid.iter().map(|c| c.value).collect::<Vec<_>>(), &cv_errors);
    Ok(Sigma2Selection {
        grid,
        cv_errors,
        selected,
    })
}

fn argmin_prefer_smaller_value(values: &[f64], errors: &[f64]) -> f64 {
    let mut best = 0;
    for i in 1..values.len() {
        if errors[i] < errors[best] || (errors[i] == errors[best] && values[i] < values[best]) {
            best = i;
        }
    }
    values[best]
}

fn argmin_prefer_larger_value(values: &[f64], errors: &[f64]) -> f64 {
    let mut best = 0;
    for i in 1..values.len() {
        if errors[i] < errors[best] || (errors[i] == errors[best] && values[i] > values[best]) {
            best = i;
        }
    }
    values[best]
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaSelection {
    pub grid: Vec<f64>,
    pub cv_errors: Vec<f64>,
    pub lambda_max: f64,
    pub selected: f64,
}

/// Cross-validates sparse KOS over the lambda grid at fixed bandwidth and
/// ridge. Ties go to the larger lambda.
pub fn select_lambda(
    data: &DataSet,
    config_template: &FitConfig,
    spec: &KernelSpec,
    plan: &FoldPlan,
) -> Result<LambdaSelection> {
    let y_theta = targets(data)?;
    let first = solver::first_linearization(data.x(), y_theta.view(), config_template.gamma, spec)?;
    let grid = lambda_grid(first.beta.view());
    let lambda_max = *grid.last().expect("grid is never empty");
    let folds: Vec<(DataSet, DataSet)> = (0..plan.k)
        .map(|f| split(data, plan, f))
        .collect::<Result<_>>()?;
    let mut cv_errors = Vec::with_capacity(grid.len());
    for &lambda in &grid {
        let config = config_template.with_lambda(lambda);
        let mut wrong = 0usize;
        for (train, test) in &folds {
            let m = model::train(train, &config, spec, true)?;
            wrong += held_out_errors(&m, test)?;
        }
        cv_errors.push(wrong as f64 / data.n() as f64);
    }
    let selected = argmin_prefer_larger_value(&grid, &cv_errors);
    Ok(LambdaSelection {
        grid,
        cv_errors,
        lambda_max,
        selected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma2Choice {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaChoice {
    Stabilization,
    Gcv,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaChoice {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningPlan {
    pub sigma2: Sigma2Choice,
    pub gamma: GammaChoice,
    pub lambda: LambdaChoice,
    pub folds: usize,
    pub seed: u64,
}

impl TuningPlan {
    pub fn auto(seed: u64) -> Self {
        Self {
            sigma2: Sigma2Choice::Auto,
            gamma: GammaChoice::Stabilization,
            lambda: LambdaChoice::Auto,
            folds: DEFAULT_FOLDS,
            seed,
        }
    }

    pub fn needs_folds(&self) -> bool {
        self.sigma2 == Sigma2Choice::Auto || self.lambda == LambdaChoice::Auto
    }
}

/// Runs the selection pipeline in order: bandwidth, ridge, then sparsity.
/// The same stratified fold plan serves both cross-validations.
pub fn tune(
    data: &DataSet,
    plan: &TuningPlan,
    config_template: &FitConfig,
    spec_template: &KernelSpec,
) -> Result<TuningReport> {
    let folds = if plan.needs_folds() {
        Some(make_folds(data.classes(), plan.folds, plan.seed)?)
    } else {
        None
    };
    let mut report = TuningReport::fixed(spec_template.sigma2, config_template.gamma, 0.0);
    report.seed = plan.seed;
    report.folds = if folds.is_some() { plan.folds } else { 0 };

    match plan.sigma2 {
        Sigma2Choice::Fixed(s) => report.sigma2_selected = s,
        Sigma2Choice::Auto => {
            let sel = select_sigma2(data, config_template, spec_template, folds.as_ref().expect("folds"))?;
            report.sigma2_source = ParamSource::CrossValidated;
            report.sigma2_grid = sel.grid;
            report.sigma2_cv_errors = sel.cv_errors;
            report.sigma2_selected = sel.selected;
        }
    }
    let spec = spec_template.with_sigma2(report.sigma2_selected)?;

    match plan.gamma {
        GammaChoice::Fixed(g) => {
            report.gamma_method = GammaMethod::Fixed;
            report.gamma_selected = g;
        }
        GammaChoice::Stabilization => {
            let stab = stabilization_for(data, &spec)?;
            report.gamma_method = GammaMethod::Stabilization;
            report.t_tilde = Some(stab.t_tilde);
            report.t_hat = Some(stab.t_hat);
            report.gamma_selected = stab.gamma;
        }
        GammaChoice::Gcv => {
            let km = kernels::kernel_matrix(data.x(), &WeightVector::ones(data.p()), &spec)?;
            let y_theta = targets(data)?;
            report.gamma_method = GammaMethod::Gcv;
            report.gamma_selected =
                gamma_gcv(km.kc.view(), y_theta.view(), spec.epsilon, &default_gcv_grid())?;
        }
    }
    let config = config_template.with_gamma(report.gamma_selected);
    config.validate()?;

    match plan.lambda {
        LambdaChoice::Fixed(l) => report.lambda_selected = l,
        LambdaChoice::Auto => {
            let sel = select_lambda(data, &config, &spec, folds.as_ref().expect("folds"))?;
            report.lambda_source = ParamSource::CrossValidated;
            report.lambda_grid = sel.grid;
            report.lambda_cv_errors = sel.cv_errors;
            report.lambda_max = Some(sel.lambda_max);
            report.lambda_selected = sel.selected;
        }
    }
    Ok(report)
}
