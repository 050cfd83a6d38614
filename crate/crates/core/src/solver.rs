//! Alternating minimization for sparse kernel optimal scoring.
//!
//! The coefficient step is the closed-form ridge solve
//! `alpha = {(CKC)^2 + n gamma (CKC + eps I)}^{-1} CKC y_theta`.
//! The weight step linearizes `K_w` around the current weights, which turns
//! the problem in `w` into a box-constrained lasso
//! `min 1/2 w'Qw - beta'w + lambda/2 |w|_1` solved by cyclic coordinate
//! descent.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, KosError, Result};
use crate::kernels::{self, KernelMatrices, KernelSpec, WeightVector};
use crate::linalg::{symmetrize, Cholesky};

/// Objective increases above this are treated as a failed weight step.
pub const MONOTONICITY_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub outer_tol: f64,
    pub max_outer_iter: usize,
    pub cd_tol: f64,
    pub max_cd_sweeps: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            lambda: 0.0,
            outer_tol: 1e-5,
            max_outer_iter: 100,
            cd_tol: 1e-6,
            max_cd_sweeps: 1000,
        }
    }
}

impl FitConfig {
    pub fn new(gamma: f64, lambda: f64) -> Result<Self> {
        let config = Self {
            gamma,
            lambda,
            ..Self::default()
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(KosError::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return bad("gamma", "must be positive and finite");
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad("lambda", "must be non-negative and finite");
        }
        if !(self.outer_tol > 0.0) {
            return bad("outer_tol", "must be positive");
        }
        if !(self.cd_tol > 0.0) {
            return bad("cd_tol", "must be positive");
        }
        if self.max_outer_iter == 0 {
            return bad("max_outer_iter", "must be at least 1");
        }
        if self.max_cd_sweeps == 0 {
            return bad("max_cd_sweeps", "must be at least 1");
        }
        Ok(())
    }
}

/// Box-constrained lasso in the weights: `1/2 w'Qw - beta'w + lambda/2 |w|_1`.
#[derive(Debug, Clone)]
pub struct LinearizedSubproblem {
    pub q: Array2<f64>,
    pub beta: Array1<f64>,
    pub lambda: f64,
}

impl LinearizedSubproblem {
    pub fn objective(&self, w: ArrayView1<f64>) -> f64 {
        0.5 * w.dot(&self.q.dot(&w)) - self.beta.dot(&w)
            + 0.5 * self.lambda * w.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Smallest penalty at which the zero vector is optimal.
    pub fn lambda_max(&self) -> f64 {
        2.0 * self.beta.iter().fold(0.0f64, |m, b| m.max(b.abs()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub objective_per_iter: Vec<f64>,
    pub outer_iters: usize,
    pub converged: bool,
    pub monotonicity_violations: usize,
    /// Outer iterations whose coordinate descent hit the sweep cap.
    pub cd_unconverged: usize,
}

#[derive(Debug, Clone)]
pub struct CoordinateDescentResult {
    pub w: WeightVector,
    pub sweeps: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct SparseFit {
    pub w: WeightVector,
    pub alpha: Array1<f64>,
    pub trace: SolverTrace,
}

fn check_square(kc: ArrayView2<f64>, n: usize) -> Result<()> {
    if kc.nrows() != n || kc.ncols() != n {
        return Err(KosError::DimensionMismatch {
            context: "centered kernel matrix",
            expected: n,
            actual: kc.nrows().max(kc.ncols()),
        });
    }
    Ok(())
}

/// Closed-form coefficient update for a fixed (double-centered) kernel.
pub fn solve_alpha(
    kc: ArrayView2<f64>,
    y_theta: ArrayView1<f64>,
    gamma: f64,
    epsilon: f64,
) -> Result<Array1<f64>> {
    let n = y_theta.len();
    check_square(kc, n)?;
    if !(gamma > 0.0 && epsilon > 0.0) {
        return Err(KosError::InvalidParameter {
            name: "gamma/epsilon",
            reason: format!("both must be positive, got {gamma} and {epsilon}"),
        });
    }
    let mut system = kc.dot(&kc);
    let ridge = n as f64 * gamma;
    system.scaled_add(ridge, &kc);
    for i in 0..n {
        system[[i, i]] += ridge * epsilon;
    }
    symmetrize(&mut system);
    let rhs = kc.dot(&y_theta);
    let chol = Cholesky::factor(system.view())?;
    let alpha = chol.solve(rhs.view());
    ensure_finite(alpha.iter(), "alpha")?;
    Ok(alpha)
}

/// Objective value given a precomputed double-centered kernel for `w`.
pub(crate) fn objective_with_kc(
    kc: ArrayView2<f64>,
    w: &WeightVector,
    alpha: ArrayView1<f64>,
    y_theta: ArrayView1<f64>,
    gamma: f64,
    lambda: f64,
    epsilon: f64,
) -> Result<f64> {
    let n = y_theta.len() as f64;
    let kc_alpha = kc.dot(&alpha);
    let residual = &y_theta - &kc_alpha;
    let fit = residual.dot(&residual) / n;
    let ridge = gamma * (alpha.dot(&kc_alpha) + epsilon * alpha.dot(&alpha));
    let value = fit + lambda * w.l1_norm() + ridge;
    if !value.is_finite() {
        return Err(KosError::NonFinite("objective"));
    }
    Ok(value)
}

/// `n^-1 |y_theta - CK_wC alpha|^2 + lambda |w|_1 + gamma alpha'(CK_wC + eps I) alpha`.
pub fn objective(
    w: &WeightVector,
    alpha: ArrayView1<f64>,
    x: ArrayView2<f64>,
    y_theta: ArrayView1<f64>,
    config: &FitConfig,
    spec: &KernelSpec,
) -> Result<f64> {
    check_sample_dims(x, y_theta, alpha)?;
    let km = kernels::kernel_matrix(x, w, spec)?;
    objective_with_kc(
        km.kc.view(),
        w,
        alpha,
        y_theta,
        config.gamma,
        config.lambda,
        spec.epsilon,
    )
}

fn check_sample_dims(
    x: ArrayView2<f64>,
    y_theta: ArrayView1<f64>,
    alpha: ArrayView1<f64>,
) -> Result<()> {
    for (context, len) in [("y_theta", y_theta.len()), ("alpha", alpha.len())] {
        if len != x.nrows() {
            return Err(KosError::DimensionMismatch {
                context,
                expected: x.nrows(),
                actual: len,
            });
        }
    }
    Ok(())
}

pub(crate) fn subproblem_with_kernel(
    x: ArrayView2<f64>,
    w_prev: &WeightVector,
    alpha: ArrayView1<f64>,
    y_theta: ArrayView1<f64>,
    km: &KernelMatrices,
    gamma: f64,
    lambda: f64,
    spec: &KernelSpec,
) -> LinearizedSubproblem {
    let n = x.nrows() as f64;
    let t = kernels::gradient_matrix_with_gram(x, w_prev, alpha, &km.k, spec);
    let col_means = t.sum_axis(Axis(0)) / n;
    let ct = &t - &col_means.insert_axis(Axis(0));

    let mut q = ct.t().dot(&ct) / n;
    symmetrize(&mut q);

    // T'C v = (CT)' v since C is symmetric and idempotent
    let inner = &y_theta - &km.kc.dot(&alpha) + ct.dot(w_prev.as_array());
    let beta = ct.t().dot(&inner) / n - ct.t().dot(&alpha) * (0.5 * gamma);
    LinearizedSubproblem { q, beta, lambda }
}

/// Linearizes the objective in `w` around `w_prev` for fixed `alpha`.
pub fn build_subproblem(
    x: ArrayView2<f64>,
    w_prev: &WeightVector,
    alpha: ArrayView1<f64>,
    y_theta: ArrayView1<f64>,
    config: &FitConfig,
    spec: &KernelSpec,
) -> Result<LinearizedSubproblem> {
    check_sample_dims(x, y_theta, alpha)?;
    let km = kernels::kernel_matrix(x, w_prev, spec)?;
    let sub = subproblem_with_kernel(
        x,
        w_prev,
        alpha,
        y_theta,
        &km,
        config.gamma,
        config.lambda,
        spec,
    );
    ensure_finite(sub.q.iter().chain(sub.beta.iter()), "linearized subproblem")?;
    Ok(sub)
}

#[inline]
fn soft_threshold(v: f64, t: f64) -> f64 {
    let m = v.abs() - t;
    if m > 0.0 {
        v.signum() * m
    } else {
        0.0
    }
}

/// Cyclic coordinate descent on the box-constrained lasso.
///
/// Each coordinate takes its exact one-dimensional minimizer over `[-1, 1]`.
/// If the zero vector already satisfies the optimality conditions
/// (`lambda >= 2 |beta|_inf`) it is returned directly.
pub fn coordinate_descent(
    sub: &LinearizedSubproblem,
    w_init: &WeightVector,
    cd_tol: f64,
    max_cd_sweeps: usize,
) -> CoordinateDescentResult {
    let p = sub.beta.len();
    assert_eq!(w_init.len(), p, "w_init length must match the subproblem");
    if sub.lambda >= sub.lambda_max() {
        return CoordinateDescentResult {
            w: WeightVector::zeros(p),
            sweeps: 0,
            converged: true,
        };
    }

    let half_lambda = 0.5 * sub.lambda;
    let q = &sub.q;
    let mut w = w_init.as_array().to_vec();
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < max_cd_sweeps {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for k in 0..p {
            let mut r = sub.beta[k];
            for i in 0..p {
                if i != k {
                    r -= q[[k, i]] * w[i];
                }
            }
            let qkk = q[[k, k]];
            let updated = if qkk > 0.0 {
                (soft_threshold(r, half_lambda) / qkk).clamp(-1.0, 1.0)
            } else if r.abs() > half_lambda {
                r.signum()
            } else {
                0.0
            };
            max_change = max_change.max((updated - w[k]).abs());
            w[k] = updated;
        }
        if max_change < cd_tol {
            converged = true;
            break;
        }
    }
    CoordinateDescentResult {
        w: WeightVector::new(Array1::from(w)).expect("coordinate updates stay in the box"),
        sweeps,
        converged,
    }
}

fn check_two_class_targets(y_theta: ArrayView1<f64>) -> Result<()> {
    if y_theta.iter().all(|&v| v == y_theta[0]) {
        return Err(KosError::EmptyClass(if y_theta[0] >= 0.0 { 2 } else { 1 }));
    }
    Ok(())
}

/// Non-sparse kernel optimal scoring: the ridge solve with `w = 1`.
pub fn fit_kos(
    x: ArrayView2<f64>,
    y_theta: ArrayView1<f64>,
    gamma: f64,
    spec: &KernelSpec,
) -> Result<Array1<f64>> {
    if y_theta.len() != x.nrows() {
        return Err(KosError::DimensionMismatch {
            context: "y_theta",
            expected: x.nrows(),
            actual: y_theta.len(),
        });
    }
    check_two_class_targets(y_theta)?;
    let km = kernels::kernel_matrix(x, &WeightVector::ones(x.ncols()), spec)?;
    solve_alpha(km.kc.view(), y_theta, gamma, spec.epsilon)
}

/// Linearization at `w = 1` with the ridge-solve coefficients; its `beta`
/// does not depend on lambda and sets the top of the lambda grid.
pub fn first_linearization(
    x: ArrayView2<f64>,
    y_theta: ArrayView1<f64>,
    gamma: f64,
    spec: &KernelSpec,
) -> Result<LinearizedSubproblem> {
    let w = WeightVector::ones(x.ncols());
    let km = kernels::kernel_matrix(x, &w, spec)?;
    let alpha = solve_alpha(km.kc.view(), y_theta, gamma, spec.epsilon)?;
    Ok(subproblem_with_kernel(
        x, &w, alpha.view(), y_theta, &km, gamma, 0.0, spec,
    ))
}

/// Alternates the closed-form coefficient update with the linearized weight
/// update, starting from `w = 1`, until the objective decrease drops below
/// `outer_tol`.
///
/// A weight step that raises the objective by more than
/// [`MONOTONICITY_SLACK`] relative to the previous outer iterate is
/// rejected: the previous weights are kept together with the coefficients
/// just solved for them, and iteration stops because every later iterate
/// would repeat the same step.
pub fn fit_sparse_kos(
    x: ArrayView2<f64>,
    y_theta: ArrayView1<f64>,
    config: &FitConfig,
    spec: &KernelSpec,
) -> Result<SparseFit> {
    config.validate()?;
    spec.validate()?;
    if y_theta.len() != x.nrows() {
        return Err(KosError::DimensionMismatch {
            context: "y_theta",
            expected: x.nrows(),
            actual: y_theta.len(),
        });
    }
    check_two_class_targets(y_theta)?;

    let p = x.ncols();
    let mut w = WeightVector::ones(p);
    let mut km = kernels::kernel_matrix(x, &w, spec)?;
    let mut alpha = Array1::<f64>::zeros(x.nrows());
    let mut trace = SolverTrace::default();
    let mut previous: Option<f64> = None;

    for _ in 0..config.max_outer_iter {
        trace.outer_iters += 1;
        alpha = solve_alpha(km.kc.view(), y_theta, config.gamma, spec.epsilon)?;

        let sub = subproblem_with_kernel(
            x,
            &w,
            alpha.view(),
            y_theta,
            &km,
            config.gamma,
            config.lambda,
            spec,
        );
        ensure_finite(sub.q.iter().chain(sub.beta.iter()), "linearized subproblem")?;
        let cd = coordinate_descent(&sub, &w, config.cd_tol, config.max_cd_sweeps);
        if !cd.converged {
            trace.cd_unconverged += 1;
        }

        let km_next = kernels::kernel_matrix(x, &cd.w, spec)?;
        let value = objective_with_kc(
            km_next.kc.view(),
            &cd.w,
            alpha.view(),
            y_theta,
            config.gamma,
            config.lambda,
            spec.epsilon,
        )?;

        if let Some(prev) = previous {
            if value > prev + MONOTONICITY_SLACK {
                trace.monotonicity_violations += 1;
                let kept = objective_with_kc(
                    km.kc.view(),
                    &w,
                    alpha.view(),
                    y_theta,
                    config.gamma,
                    config.lambda,
                    spec.epsilon,
                )?;
                trace.objective_per_iter.push(kept);
                trace.converged = prev - kept < config.outer_tol;
                return Ok(SparseFit { w, alpha, trace });
            }
        }

        w = cd.w;
        km = km_next;
        trace.objective_per_iter.push(value);
        if let Some(prev) = previous {
            if prev - value < config.outer_tol {
                trace.converged = true;
                break;
            }
        }
        previous = Some(value);
    }
    Ok(SparseFit { w, alpha, trace })
}
