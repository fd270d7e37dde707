use dmp_core::linalg::{cholesky, invert, sign_test, DenseMatrix, LinalgError, Lu, SignMode, SignVerdict};
use dmp_core::scalar::ratio;
use dmp_core::{Matrix, Rational64, RationalMatrix};
use proptest::prelude::*;

fn rat(rows: &[&[(i64, i64)]]) -> RationalMatrix {
    RationalMatrix::from_rows(&rows.iter().map(|r| r.iter().map(|&(p, q)| ratio(p, q)).collect()).collect::<Vec<_>>()).unwrap()
}

#[test]
fn two_by_two_inverse_exact_and_float() {
    let b = rat(&[&[(2, 1), (-1, 1)], &[(-1, 1), (2, 1)]]);
    let inv = invert(&b).unwrap();
    assert_eq!(inv.matrix, rat(&[&[(2, 3), (1, 3)], &[(1, 3), (2, 3)]]));
    assert_eq!(inv.residual, Rational64::from_integer(0));

    let f = Matrix::from_rows(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap();
    let fi = invert(&f).unwrap();
    let expect = [[2.0 / 3.0, 1.0 / 3.0], [1.0 / 3.0, 2.0 / 3.0]];
    for i in 0..2 {
        for j in 0..2 {
            assert!((fi.matrix[(i, j)] - expect[i][j]).abs() < 1e-15);
        }
    }
    assert!(fi.residual < 1e-15);
}

#[test]
fn f32_inverse_close_to_f64() {
    let f = DenseMatrix::<f32>::from_rows(&[vec![4.0, -1.0, 0.0], vec![-1.0, 4.0, -1.0], vec![0.0, -1.0, 4.0]]).unwrap();
    let inv = invert(&f).unwrap();
    assert!(inv.residual < 1e-6);
    assert!((inv.matrix[(0, 0)] - 15.0 / 56.0).abs() < 1e-6);
}

#[test]
fn singular_matrix_rejected() {
    let f = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
    assert!(matches!(Lu::factor(&f), Err(LinalgError::Singular { step: 1, .. })));
    let r = rat(&[&[(1, 1), (2, 1)], &[(2, 1), (4, 1)]]);
    assert!(matches!(Lu::factor(&r), Err(LinalgError::Singular { .. })));
    let z = Matrix::zeros(2, 2);
    assert!(Lu::factor(&z).is_err());
}

#[test]
fn nearly_singular_below_relative_pivot_threshold() {
    let f = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0 + 1e-15]]).unwrap();
    assert!(Lu::factor(&f).is_err());
    let g = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0 + 1e-10]]).unwrap();
    assert!(Lu::factor(&g).is_ok());
}

#[test]
fn sign_tests_on_reference_matrices() {
    let id = Matrix::identity(3);
    let r = sign_test(&id, SignMode::Pos, 1e-12);
    assert_eq!(r.verdict, SignVerdict::Indefinite);
    assert_eq!(r.worst().unwrap().0, 0.0);
    assert_eq!(sign_test(&id, SignMode::Nonneg, 1e-12).verdict, SignVerdict::Nonnegative);

    let z = Matrix::zeros(2, 3);
    assert_eq!(sign_test(&z, SignMode::Nonpos, 1e-12).verdict, SignVerdict::Nonpositive);
    assert_eq!(sign_test(&z, SignMode::Neg, 1e-12).verdict, SignVerdict::Indefinite);

    // inverse of the coarse 3x3 block, exactly
    let a = rat(&[&[(4, 1), (-1, 1), (-1, 1)], &[(-1, 1), (4, 1), (0, 1)], &[(-1, 1), (0, 1), (4, 1)]]);
    let inv = Lu::factor(&a).unwrap().inverse();
    let rep = sign_test(&inv, SignMode::Pos, Rational64::from_integer(0));
    assert_eq!(rep.verdict, SignVerdict::StrictlyPositive);
    assert_eq!(rep.min_entry.unwrap().0, ratio(1, 56));
    assert_eq!(rep.max_entry.unwrap().0, ratio(2, 7));

    let neg = Matrix::from_rows(&[vec![-1.0, -2.0]]).unwrap();
    assert_eq!(sign_test(&neg, SignMode::Neg, 1e-12).verdict, SignVerdict::StrictlyNegative);
}

#[test]
fn empty_matrix_passes_vacuously() {
    let e = Matrix::zeros(3, 0);
    for mode in [SignMode::Pos, SignMode::Nonneg, SignMode::Neg, SignMode::Nonpos] {
        let r = sign_test(&e, mode, 1e-12);
        assert!(r.passed());
        assert!(r.worst().is_none());
    }
}

#[test]
fn determinant_and_solve_exact() {
    let a = rat(&[&[(0, 1), (1, 1)], &[(1, 1), (0, 1)]]);
    let lu = Lu::factor(&a).unwrap();
    assert_eq!(lu.determinant(), Rational64::from_integer(-1));
    assert_eq!(lu.solve(&[ratio(3, 1), ratio(5, 2)]).unwrap(), vec![ratio(5, 2), ratio(3, 1)]);
}

#[test]
fn cholesky_of_spd_and_failure_of_indefinite() {
    let a = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
    let l = cholesky(&a).unwrap();
    let back = l.matmul(&l.transpose()).unwrap();
    assert!(back.max_abs_diff(&a).unwrap() < 1e-15);
    let b = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
    assert_eq!(cholesky(&b), Err(LinalgError::NotPositiveDefinite(1)));
}

#[test]
fn submatrix_and_dimension_errors() {
    let a = Matrix::from_fn(3, 3, |i, j| (3 * i + j) as f64);
    let s = a.submatrix(&[2, 0], &[1]).unwrap();
    assert_eq!(s.to_rows(), vec![vec![7.0], vec![1.0]]);
    assert!(matches!(a.submatrix(&[3], &[0]), Err(LinalgError::IndexOutOfRange { index: 3, dim: 3 })));
    assert!(a.matmul(&Matrix::zeros(2, 2)).is_err());
    assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
}

fn dominant(n: usize, entries: &[f64]) -> Matrix {
    let mut m = Matrix::from_fn(n, n, |i, j| entries[(i * n + j) % entries.len()]);
    for i in 0..n {
        let s: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
        m[(i, i)] = s + 1.0;
    }
    m
}

proptest! {
    #[test]
    fn inverse_residual_small(n in 1usize..8, entries in prop::collection::vec(-5.0f64..5.0, 1..64)) {
        let m = dominant(n, &entries);
        let inv = invert(&m).unwrap();
        prop_assert!(inv.residual < 1e-12);
        let back = inv.matrix.matmul(&m).unwrap();
        prop_assert!(back.max_abs_diff(&Matrix::identity(n)).unwrap() < 1e-12);
    }

    #[test]
    fn rational_inverse_is_exact(n in 1usize..5, entries in prop::collection::vec(-6i64..6, 1..25)) {
        let mut m = RationalMatrix::from_fn(n, n, |i, j| Rational64::from_integer(entries[(i * n + j) % entries.len()]));
        for i in 0..n {
            m[(i, i)] = m[(i, i)] + Rational64::from_integer(40);
        }
        let inv = invert(&m).unwrap();
        prop_assert_eq!(inv.matrix.matmul(&m).unwrap(), RationalMatrix::identity(n));
    }

    #[test]
    fn widening_tolerance_is_monotone(entries in prop::collection::vec(-1.0f64..1.0, 1..20), t1 in 0.0f64..0.5, t2 in 0.0f64..0.5) {
        let m = Matrix::from_fn(1, entries.len(), |_, j| entries[j]);
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        for mode in [SignMode::Nonneg, SignMode::Nonpos] {
            if sign_test(&m, mode, lo).passed() {
                prop_assert!(sign_test(&m, mode, hi).passed());
            }
        }
        for mode in [SignMode::Pos, SignMode::Neg] {
            if sign_test(&m, mode, hi).passed() {
                prop_assert!(sign_test(&m, mode, lo).passed());
            }
        }
    }

    #[test]
    fn verdict_consistent_with_extremes(entries in prop::collection::vec(-1.0f64..1.0, 1..20), tol in 0.0f64..0.3) {
        let m = Matrix::from_fn(1, entries.len(), |_, j| entries[j]);
        let tau = tol * m.max_abs();
        let min = entries.iter().copied().fold(f64::INFINITY, f64::min);
        let max = entries.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(sign_test(&m, SignMode::Pos, tol).passed(), min > tau);
        prop_assert_eq!(sign_test(&m, SignMode::Nonneg, tol).passed(), min >= -tau);
        prop_assert_eq!(sign_test(&m, SignMode::Neg, tol).passed(), max < -tau);
        prop_assert_eq!(sign_test(&m, SignMode::Nonpos, tol).passed(), max <= tau);
    }
}
