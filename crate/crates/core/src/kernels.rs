//! Weighted Gaussian kernels.
//!
//! Every kernel here is evaluated on Hadamard-weighted inputs, so
//! `k_w(x, x') = exp(-sigma^-2 * sum_l w_l^2 (x_l - x'_l)^2)`. A zero weight
//! removes the corresponding feature entirely.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, KosError, Result};

pub const DEFAULT_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
}

/// Kernel family, bandwidth `sigma2` and the ridge stabilizer `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub sigma2: f64,
    pub epsilon: f64,
}

impl KernelSpec {
    pub fn gaussian(sigma2: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, sigma2, DEFAULT_EPSILON)
    }

    pub fn new(family: KernelFamily, sigma2: f64, epsilon: f64) -> Result<Self> {
        let spec = Self {
            family,
            sigma2,
            epsilon,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_sigma2(self, sigma2: f64) -> Result<Self> {
        Self::new(self.family, sigma2, self.epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(KosError::InvalidParameter {
                name: "sigma2",
                reason: format!("must be positive and finite, got {}", self.sigma2),
            });
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(KosError::InvalidParameter {
                name: "epsilon",
                reason: format!("must be positive and finite, got {}", self.epsilon),
            });
        }
        Ok(())
    }
}

/// Feature weights, each constrained to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Array1<f64>);

impl WeightVector {
    pub fn new(w: Array1<f64>) -> Result<Self> {
        ensure_finite(w.iter(), "weight vector")?;
        if let Some(bad) = w.iter().find(|v| v.abs() > 1.0) {
            return Err(KosError::InvalidParameter {
                name: "w",
                reason: format!("weights must lie in [-1, 1], got {bad}"),
            });
        }
        Ok(Self(w))
    }

    pub fn ones(p: usize) -> Self {
        Self(Array1::ones(p))
    }

    pub fn zeros(p: usize) -> Self {
        Self(Array1::zeros(p))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_array(&self) -> &Array1<f64> {
        &self.0
    }

    pub fn view(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.0
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    /// 0-based indices of the features with a nonzero weight.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Weighted kernel matrix, its double-centered version and its column means.
#[derive(Debug, Clone)]
pub struct KernelMatrices {
    pub k: Array2<f64>,
    pub kc: Array2<f64>,
    pub column_means: Array1<f64>,
}

fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(KosError::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}

/// Squared weighted distance scaled by the bandwidth.
#[inline]
fn scaled_sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>, w2: &[f64], sigma2: f64) -> f64 {
    let mut acc = 0.0;
    for ((&ai, &bi), &wi) in a.iter().zip(b.iter()).zip(w2) {
        let d = ai - bi;
        acc += wi * d * d;
    }
    acc / sigma2
}

fn squared_weights(w: &WeightVector) -> Vec<f64> {
    w.0.iter().map(|v| v * v).collect()
}

pub fn eval_kernel(
    x: ArrayView1<f64>,
    x2: ArrayView1<f64>,
    w: &WeightVector,
    spec: &KernelSpec,
) -> Result<f64> {
    check_len("eval_kernel: second point", x.len(), x2.len())?;
    check_len("eval_kernel: weights", x.len(), w.len())?;
    ensure_finite(x.iter().chain(x2.iter()), "eval_kernel input")?;
    let w2 = squared_weights(w);
    Ok(match spec.family {
        KernelFamily::Gaussian => (-scaled_sq_dist(x, x2, &w2, spec.sigma2)).exp(),
    })
}

/// Weighted kernel matrix only, upper triangle computed once and mirrored.
pub(crate) fn weighted_gram(
    x: ArrayView2<f64>,
    w: &WeightVector,
    spec: &KernelSpec,
) -> Array2<f64> {
    let n = x.nrows();
    let w2 = squared_weights(w);
    let mut k = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        k[[i, i]] = 1.0;
        let xi = x.row(i);
        for j in (i + 1)..n {
            let v = match spec.family {
                KernelFamily::Gaussian => (-scaled_sq_dist(xi, x.row(j), &w2, spec.sigma2)).exp(),
            };
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    k
}

/// `C K C` with `C = I - 11'/n`, computed by subtracting row and column
/// means and adding back the grand mean.
pub fn double_center(k: &Array2<f64>) -> Array2<f64> {
    let n = k.nrows() as f64;
    let row_means = k.sum_axis(Axis(1)) / n;
    let col_means = k.sum_axis(Axis(0)) / n;
    let grand = col_means.sum() / n;
    let mut kc = k.clone();
    for ((i, j), v) in kc.indexed_iter_mut() {
        *v = *v - row_means[i] - col_means[j] + grand;
    }
    kc
}

pub fn kernel_matrix(
    x: ArrayView2<f64>,
    w: &WeightVector,
    spec: &KernelSpec,
) -> Result<KernelMatrices> {
    let n = x.nrows();
    if n < 2 {
        return Err(KosError::TooFewSamples {
            required: 2,
            actual: n,
        });
    }
    check_len("kernel_matrix: weights", x.ncols(), w.len())?;
    ensure_finite(x.iter(), "kernel_matrix input")?;
    let k = weighted_gram(x, w, spec);
    Ok(matrices_from_gram(k))
}

pub(crate) fn matrices_from_gram(k: Array2<f64>) -> KernelMatrices {
    let column_means = k.sum_axis(Axis(0)) / k.nrows() as f64;
    let kc = double_center(&k);
    KernelMatrices {
        k,
        kc,
        column_means,
    }
}

pub fn cross_kernel(
    x_train: ArrayView2<f64>,
    x_new: ArrayView1<f64>,
    w: &WeightVector,
    spec: &KernelSpec,
) -> Result<Array1<f64>> {
    check_len("cross_kernel: new point", x_train.ncols(), x_new.len())?;
    check_len("cross_kernel: weights", x_train.ncols(), w.len())?;
    ensure_finite(x_new.iter(), "cross_kernel input")?;
    let w2 = squared_weights(w);
    Ok(x_train
        .rows()
        .into_iter()
        .map(|xi| match spec.family {
            KernelFamily::Gaussian => (-scaled_sq_dist(xi, x_new, &w2, spec.sigma2)).exp(),
        })
        .collect())
}

/// Linearization matrix `T` (n x p):
/// `T[i, l] = sum_m (C alpha)_m * d k(w x_i, w x_m) / d w_l`.
pub fn gradient_matrix(
    x: ArrayView2<f64>,
    w: &WeightVector,
    alpha: ArrayView1<f64>,
    spec: &KernelSpec,
) -> Result<Array2<f64>> {
    check_len("gradient_matrix: weights", x.ncols(), w.len())?;
    check_len("gradient_matrix: alpha", x.nrows(), alpha.len())?;
    ensure_finite(x.iter().chain(alpha.iter()), "gradient_matrix input")?;
    let k = weighted_gram(x, w, spec);
    Ok(gradient_matrix_with_gram(x, w, alpha, &k, spec))
}

pub(crate) fn gradient_matrix_with_gram(
    x: ArrayView2<f64>,
    w: &WeightVector,
    alpha: ArrayView1<f64>,
    k: &Array2<f64>,
    spec: &KernelSpec,
) -> Array2<f64> {
    let (n, p) = x.dim();
    let mean = alpha.sum() / n as f64;
    let centered: Vec<f64> = alpha.iter().map(|a| a - mean).collect();
    let mut t = Array2::<f64>::zeros((n, p));
    match spec.family {
        KernelFamily::Gaussian => {
            // d/dw_l exp(-s^-2 sum w^2 d^2) = -2 s^-2 w_l d_l^2 k
            let scale: Vec<f64> = w.0.iter().map(|wl| -2.0 * wl / spec.sigma2).collect();
            let mut acc = vec![0.0; p];
            for i in 0..n {
                acc.iter_mut().for_each(|a| *a = 0.0);
                let xi = x.row(i);
                for m in 0..n {
                    let c = centered[m] * k[[i, m]];
                    if c == 0.0 {
                        continue;
                    }
                    let xm = x.row(m);
                    for l in 0..p {
                        let d = xi[l] - xm[l];
                        acc[l] += c * d * d;
                    }
                }
                for l in 0..p {
                    t[[i, l]] = scale[l] * acc[l];
                }
            }
        }
    }
    t
}
