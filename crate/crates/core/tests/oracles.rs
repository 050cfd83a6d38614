mod support;

use support::oracle::*;

#[test]
fn solve_identity_returns_rhs() {
    let (x, res) = generic_solve(&identity(3), &[1.0, -2.0, 3.5]).unwrap();
    assert_eq!(x, vec![1.0, -2.0, 3.5]);
    assert_eq!(res, 0.0);
}

#[test]
fn solve_diagonal_hand_case() {
    let (x, _) = generic_solve(&vec![vec![2.0, 0.0], vec![0.0, 4.0]], &[2.0, 8.0]).unwrap();
    assert_eq!(x, vec![1.0, 2.0]);
}

#[test]
fn solve_needs_pivoting() {
    let a = vec![vec![0.0, 1.0], vec![1.0, 1.0]];
    let (x, res) = generic_solve(&a, &[2.0, 3.0]).unwrap();
    assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    assert!(res < 1e-15);
}

#[test]
fn solve_rejects_singular() {
    let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
    assert!(generic_solve(&a, &[1.0, 2.0]).is_err());
}

#[test]
fn eigenvalues_of_diagonal_and_swap() {
    let d = vec![vec![3.0, 0.0, 0.0], vec![0.0, -1.0, 0.0], vec![0.0, 0.0, 2.0]];
    assert_eq!(eigs_symmetric(&d).unwrap(), vec![-1.0, 2.0, 3.0]);
    let s = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
    let e = eigs_symmetric(&s).unwrap();
    assert!((e[0] + 1.0).abs() < 1e-14 && (e[1] - 1.0).abs() < 1e-14);
}

#[test]
fn eigen_reconstruction_is_accurate() {
    let mut rng = support::rng(5);
    for n in [2, 5, 12, 20] {
        let a = support::random_psd(&mut rng, n, n + 1);
        let (values, v) = eigs_symmetric_with_vectors(&a).unwrap();
        let lambda: Matrix = (0..n)
            .map(|i| (0..n).map(|j| if i == j { values[i] } else { 0.0 }).collect())
            .collect();
        let back = matmul(&matmul(&v, &lambda), &transpose(&v));
        let err: Matrix = back
            .iter()
            .zip(&a)
            .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x - y).collect())
            .collect();
        assert!(frobenius(&err) <= 1e-10 * frobenius(&a));
        assert!(values.iter().all(|&l| l >= -1e-10));
    }
    assert!(eigs_symmetric(&identity(21)).is_err());
}

#[test]
fn finite_differences_of_simple_functions() {
    let g = finite_diff(|x| 3.0 * x[0] * x[0] - x[0] * x[1] + 2.0, &[1.0, 2.0], 1e-4);
    assert!((g[0] - 4.0).abs() < 1e-8);
    assert!((g[1] + 1.0).abs() < 1e-8);
    let z = finite_diff(|_| 7.0, &[0.3, -0.1, 5.0], 1e-5);
    assert!(z.iter().all(|v| *v == 0.0));
}

#[test]
fn grid_minimizer_clips_identity_problem() {
    let q = identity(2);
    let (w, _) = grid_minimize_w(&q, &[0.4, 3.0], 0.0, 0.01).unwrap();
    assert!((w[0] - 0.4).abs() < 1e-6);
    assert_eq!(w[1], 1.0);
}

#[test]
fn grid_minimizer_zero_above_threshold() {
    let q = vec![vec![2.0, 0.5], vec![0.5, 1.0]];
    let beta = [0.3, -0.7];
    let (w, v) = grid_minimize_w(&q, &beta, 1.4, 0.01).unwrap();
    assert_eq!(w, vec![0.0, 0.0]);
    assert_eq!(v, 0.0);
}

#[test]
fn grid_minimizer_limits_dimension() {
    assert!(grid_minimize_w(&identity(4), &[0.0; 4], 0.0, 0.5).is_err());
}

#[test]
fn nearest_rank_quantiles() {
    let v = [5.0, 1.0, 4.0, 2.0, 3.0];
    assert_eq!(quantile_nearest_rank(&v, 0.05), 1.0);
    assert_eq!(quantile_nearest_rank(&v, 0.2), 1.0);
    assert_eq!(quantile_nearest_rank(&v, 0.5), 3.0);
    assert_eq!(quantile_nearest_rank(&v, 1.0), 5.0);
}

#[test]
fn explicit_centering_annihilates_constants() {
    let c = centering_matrix(4);
    let v = matvec(&c, &[2.0; 4]);
    assert!(v.iter().all(|x| x.abs() < 1e-15));
}

#[test]
fn tolerance_rules() {
    let t = OracleTolerance::new(0.0, 1e-8);
    assert!(t.close(1.0 + 1e-9, 1.0));
    assert!(!t.close(1.0 + 1e-7, 1.0));
}

#[test]
#[should_panic]
fn tolerance_cannot_be_all_zero() {
    OracleTolerance::new(0.0, 0.0);
}
