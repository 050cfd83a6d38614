#![allow(dead_code)]

pub mod oracle;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oracle::Matrix;

pub fn to_rows(a: &Array2<f64>) -> Matrix {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn from_rows(m: &Matrix) -> Array2<f64> {
    let n = m.len();
    let p = m.first().map_or(0, Vec::len);
    Array2::from_shape_vec((n, p), m.concat()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize, half_width: f64) -> Array2<f64> {
    Array2::from_shape_fn((n, p), |_| rng.random_range(-half_width..half_width))
}

/// Balanced-ish optimal-scoring targets with both classes present.
pub fn random_targets(rng: &mut ChaCha8Rng, n: usize) -> (Vec<usize>, Array1<f64>) {
    let mut classes: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
    classes[0] = 0;
    classes[n - 1] = 1;
    let n1 = classes.iter().filter(|&&c| c == 0).count() as f64;
    let n2 = n as f64 - n1;
    let theta = [(n2 / n1).sqrt(), -(n1 / n2).sqrt()];
    let y = classes.iter().map(|&c| theta[c]).collect();
    (classes, y)
}

/// Random symmetric positive semi-definite `p x p` matrix `A'A / k`.
pub fn random_psd(rng: &mut ChaCha8Rng, p: usize, rank: usize) -> Matrix {
    let a: Matrix = (0..rank)
        .map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let at = oracle::transpose(&a);
    let mut q = oracle::matmul(&at, &a);
    for row in q.iter_mut() {
        for v in row.iter_mut() {
            *v /= rank as f64;
        }
    }
    q
}

/// Eigenvalues of `C ((CKC)^2 + n gamma (CKC + eps I))^-1 CKC C`, the map
/// from centered targets to coefficients.
pub fn influence_eigenvalues(ckc: &Matrix, gamma: f64, eps: f64) -> Vec<f64> {
    let n = ckc.len();
    let mut m = oracle::matmul(ckc, ckc);
    for i in 0..n {
        for j in 0..n {
            m[i][j] += n as f64 * gamma * ckc[i][j];
        }
        m[i][i] += n as f64 * gamma * eps;
    }
    let c = oracle::centering_matrix(n);
    let a = oracle::generic_inverse_times(&m, ckc).unwrap();
    let mut a = oracle::matmul(&oracle::matmul(&c, &a), &c);
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (a[i][j] + a[j][i]);
            a[i][j] = avg;
            a[j][i] = avg;
        }
    }
    oracle::eigs_symmetric(&a).unwrap()
}
