//! Brute-force reference implementations.
//!
//! Everything here works on plain `Vec`s and shares no code with the library,
//! so agreement between the two is evidence rather than tautology.

pub type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, Copy)]
pub struct OracleTolerance {
    pub abs: f64,
    pub rel: f64,
}

impl OracleTolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        assert!(abs >= 0.0 && rel >= 0.0, "tolerances must be non-negative");
        assert!(abs > 0.0 || rel > 0.0, "at least one tolerance must be positive");
        Self { abs, rel }
    }

    pub fn close(&self, actual: f64, expected: f64) -> bool {
        (actual - expected).abs() <= self.abs + self.rel * expected.abs()
    }
}

pub fn identity(n: usize) -> Matrix {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let inner = b.len();
    let cols = b[0].len();
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn matvec(a: &Matrix, v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

pub fn transpose(a: &Matrix) -> Matrix {
    (0..a[0].len())
        .map(|j| a.iter().map(|row| row[j]).collect())
        .collect()
}

pub fn frobenius(a: &Matrix) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Gaussian elimination with partial pivoting. Returns the solution and the
/// max-norm residual `|Ax - b|`.
pub fn generic_solve(a: &Matrix, b: &[f64]) -> Result<(Vec<f64>, f64), String> {
    let n = a.len();
    if b.len() != n || a.iter().any(|r| r.len() != n) {
        return Err("generic_solve: shape mismatch".into());
    }
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut m: Matrix = a.iter().zip(b).map(|(r, bi)| {
        let mut row = r.clone();
        row.push(*bi);
        row
    }).collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[pivot][col].abs() <= f64::EPSILON * scale * n as f64 {
            return Err(format!("generic_solve: singular at column {col}"));
        }
        m.swap(col, pivot);
        for i in col + 1..n {
            let f = m[i][col] / m[col][col];
            if f != 0.0 {
                for j in col..=n {
                    m[i][j] -= f * m[col][j];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    let residual = matvec(a, &x)
        .iter()
        .zip(b)
        .map(|(ax, bi)| (ax - bi).abs())
        .fold(0.0, f64::max);
    Ok((x, residual))
}

pub fn generic_inverse_times(a: &Matrix, b: &Matrix) -> Result<Matrix, String> {
    let cols: Vec<Vec<f64>> = transpose(b)
        .iter()
        .map(|col| generic_solve(a, col).map(|(x, _)| x))
        .collect::<Result<_, _>>()?;
    Ok(transpose(&cols))
}

/// Centering matrix `I - 11'/n`, built explicitly.
pub fn centering_matrix(n: usize) -> Matrix {
    let mut c = identity(n);
    for row in c.iter_mut() {
        for v in row.iter_mut() {
            *v -= 1.0 / n as f64;
        }
    }
    c
}

/// Weighted Gaussian Gram matrix straight from the definition.
pub fn gaussian_gram(x: &Matrix, w: &[f64], sigma2: f64) -> Matrix {
    x.iter()
        .map(|xi| {
            x.iter()
                .map(|xm| {
                    let d: f64 = xi
                        .iter()
                        .zip(xm)
                        .zip(w)
                        .map(|((a, b), wl)| (wl * (a - b)).powi(2))
                        .sum();
                    (-d / sigma2).exp()
                })
                .collect()
        })
        .collect()
}

/// `C K C` with `C` materialized.
pub fn explicit_ckc(k: &Matrix) -> Matrix {
    let c = centering_matrix(k.len());
    matmul(&matmul(&c, k), &c)
}

/// Coefficients from the normal equations, solved by `generic_solve`.
pub fn explicit_alpha(ckc: &Matrix, y: &[f64], gamma: f64, eps: f64) -> Result<Vec<f64>, String> {
    let n = ckc.len();
    let mut m = matmul(ckc, ckc);
    let ridge = n as f64 * gamma;
    for i in 0..n {
        for j in 0..n {
            m[i][j] += ridge * ckc[i][j];
        }
        m[i][i] += ridge * eps;
    }
    generic_solve(&m, &matvec(ckc, y)).map(|(x, _)| x)
}

/// `0.5 w'Qw - beta'w + (lambda/2) |w|_1`.
pub fn subproblem_objective(q: &Matrix, beta: &[f64], lambda: f64, w: &[f64]) -> f64 {
    let qw = matvec(q, w);
    let quad: f64 = w.iter().zip(&qw).map(|(a, b)| a * b).sum();
    let lin: f64 = w.iter().zip(beta).map(|(a, b)| a * b).sum();
    0.5 * quad - lin + 0.5 * lambda * w.iter().map(|v| v.abs()).sum::<f64>()
}

/// Exhaustive search over `[-1, 1]^p` (p <= 3) at `step`, then a local
/// pattern search starting at `step / 100`.
pub fn grid_minimize_w(q: &Matrix, beta: &[f64], lambda: f64, step: f64) -> Result<(Vec<f64>, f64), String> {
    let p = beta.len();
    if p == 0 || p > 3 {
        return Err(format!("grid_minimize_w supports 1 <= p <= 3, got {p}"));
    }
    let ticks = (2.0 / step).round() as usize;
    let axis: Vec<f64> = (0..=ticks).map(|t| (-1.0 + t as f64 * step).clamp(-1.0, 1.0)).collect();
    let mut best = vec![0.0; p];
    let mut best_val = subproblem_objective(q, beta, lambda, &best);
    let total = axis.len().pow(p as u32);
    let mut w = vec![0.0; p];
    for code in 0..total {
        let mut c = code;
        for wl in w.iter_mut() {
            *wl = axis[c % axis.len()];
            c /= axis.len();
        }
        let v = subproblem_objective(q, beta, lambda, &w);
        if v < best_val {
            best_val = v;
            best.clone_from(&w);
        }
    }
    let mut h = step / 100.0;
    while h > 1e-10 {
        let mut improved = true;
        while improved {
            improved = false;
            for l in 0..p {
                for dir in [-1.0, 1.0] {
                    let mut cand = best.clone();
                    cand[l] = (cand[l] + dir * h).clamp(-1.0, 1.0);
                    let v = subproblem_objective(q, beta, lambda, &cand);
                    if v < best_val {
                        best_val = v;
                        best = cand;
                        improved = true;
                    }
                }
            }
        }
        h /= 2.0;
    }
    Ok((best, best_val))
}

/// Central differences, one coordinate at a time.
pub fn finite_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|l| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[l] += h;
            down[l] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

/// Cyclic Jacobi rotations. Returns ascending eigenvalues and the matching
/// eigenvectors as columns.
pub fn eigs_symmetric_with_vectors(a: &Matrix) -> Result<(Vec<f64>, Matrix), String> {
    let n = a.len();
    if n > 20 {
        return Err(format!("eigs_symmetric supports n <= 20, got {n}"));
    }
    for i in 0..n {
        for j in 0..i {
            if (a[i][j] - a[j][i]).abs() > 1e-12 * (1.0 + a[i][j].abs()) {
                return Err("eigs_symmetric: matrix is not symmetric".into());
            }
        }
    }
    let mut m = a.clone();
    let mut v = identity(n);
    let norm = frobenius(a).max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * norm {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q] == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i][i].total_cmp(&m[j][j]));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = (0..n).map(|k| order.iter().map(|&i| v[k][i]).collect()).collect();
    Ok((values, vectors))
}

pub fn eigs_symmetric(a: &Matrix) -> Result<Vec<f64>, String> {
    eigs_symmetric_with_vectors(a).map(|(values, _)| values)
}

/// Nearest-rank quantile by sorting: the `ceil(level * m)`-th smallest value.
pub fn quantile_nearest_rank(values: &[f64], level: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((level * sorted.len() as f64) - 1e-12).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Pairwise squared distances `|x_i - x_j|^2` for `i < j`.
pub fn pairwise_sq_distances(x: &Matrix) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            out.push(x[i].iter().zip(&x[j]).map(|(a, b)| (a - b).powi(2)).sum());
        }
    }
    out
}
