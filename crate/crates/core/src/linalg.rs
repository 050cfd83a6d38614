//! Dense Cholesky factorization for the symmetric positive-definite systems
//! that appear in the coefficient update.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{KosError, Result};

/// Lower-triangular factor `L` with `A = L L'`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Array2<f64>,
    // transpose of `l`, kept so back substitution walks contiguous rows
    lt: Array2<f64>,
}

impl Cholesky {
    /// Factors a symmetric matrix; only the lower triangle of `a` is read.
    pub fn factor(a: ArrayView2<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(KosError::DimensionMismatch {
                context: "cholesky: square matrix",
                expected: n,
                actual: a.ncols(),
            });
        }
        // row-major lower factor, rows are contiguous
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let lj = &mut l[j * n..(j + 1) * n];
            let d = a[[j, j]] - dot(&lj[..j], &lj[..j]);
            if !(d > 0.0 && d.is_finite()) {
                return Err(KosError::NotPositiveDefinite { pivot: d, row: j });
            }
            let djj = d.sqrt();
            lj[j] = djj;
            for i in (j + 1)..n {
                let (upper, lower) = l.split_at_mut(i * n);
                let lj = &upper[j * n..j * n + j];
                let li = &mut lower[..n];
                li[j] = (a[[i, j]] - dot(&li[..j], lj)) / djj;
            }
        }
        let l = Array2::from_shape_vec((n, n), l).expect("square factor");
        let lt = l.t().as_standard_layout().into_owned();
        Ok(Self { l, lt })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn solve(&self, b: ArrayView1<f64>) -> Array1<f64> {
        let n = self.dim();
        let l = self.l.as_slice().expect("standard layout");
        let lt = self.lt.as_slice().expect("standard layout");
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &l[i * n..i * n + i];
            y[i] = (y[i] - dot(row, &y[..i])) / l[i * n + i];
        }
        for i in (0..n).rev() {
            let row = &lt[i * n + i + 1..(i + 1) * n];
            y[i] = (y[i] - dot(row, &y[i + 1..])) / lt[i * n + i];
        }
        Array1::from(y)
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros(b.raw_dim());
        for (j, col) in b.columns().into_iter().enumerate() {
            out.column_mut(j).assign(&self.solve(col));
        }
        out
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Averages `a` with its transpose in place.
pub(crate) fn symmetrize(a: &mut Array2<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn solves_small_spd_system() {
        let a = array![[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]];
        let b = array![1.0, -2.0, 0.5];
        let x = Cholesky::factor(a.view()).unwrap().solve(b.view());
        let r = a.dot(&x) - &b;
        assert!(r.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn rejects_indefinite_matrix() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        match Cholesky::factor(a.view()) {
            Err(KosError::NotPositiveDefinite { pivot, row }) => {
                assert_eq!(row, 1);
                assert!(pivot < 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn matrix_solve_matches_vector_solve() {
        let a = array![[3.0, 1.0], [1.0, 2.0]];
        let b = array![[1.0, 0.0], [0.0, 1.0]];
        let chol = Cholesky::factor(a.view()).unwrap();
        let inv = chol.solve_matrix(b.view());
        let id = a.dot(&inv);
        assert!((id[[0, 0]] - 1.0).abs() < 1e-15 && id[[0, 1]].abs() < 1e-15);
    }
}
