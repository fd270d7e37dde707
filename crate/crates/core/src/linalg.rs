//! Dense matrices, pivoted LU, inverses and entrywise sign tests.
//!
//! Everything here is generic over [`Scalar`], so the same code runs in
//! floating point and in exact rational arithmetic.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{abs, lit, to_f64, Real, Scalar};

/// Errors raised by the dense linear algebra layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular: pivot {pivot:e} at step {step} is below the threshold {threshold:e}")]
    Singular { step: usize, pivot: f64, threshold: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("matrix is not positive definite (step {0})")]
    NotPositiveDefinite(usize),
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from rows; all rows must have equal length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(LinalgError::Dimension("ragged rows".into()));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.iter().flatten().copied().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> DenseMatrix<U> {
        DenseMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn to_f64(&self) -> DenseMatrix<f64> {
        self.map(to_f64)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Largest absolute entry; zero for an empty matrix.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| if abs(x) > m { abs(x) } else { m })
    }

    /// Infinity norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|i| self.row(i).iter().fold(T::zero(), |s, &x| s + abs(x)))
            .fold(T::zero(), |m, s| if s > m { s } else { m })
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    pub fn add(&self, other: &Self) -> Result<Self, LinalgError> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, LinalgError> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self, LinalgError> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(LinalgError::Dimension(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] = out.data[i * other.cols + j] + a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[T]) -> Result<Vec<T>, LinalgError> {
        if x.len() != self.cols {
            return Err(LinalgError::Dimension(format!("vector of length {} for {} columns", x.len(), self.cols)));
        }
        Ok((0..self.rows).map(|i| self.row(i).iter().zip(x).fold(T::zero(), |s, (&a, &b)| s + a * b)).collect())
    }

    /// Extracts the block with the given row and column index lists.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Result<Self, LinalgError> {
        for &r in rows {
            if r >= self.rows {
                return Err(LinalgError::IndexOutOfRange { index: r, dim: self.rows });
            }
        }
        for &c in cols {
            if c >= self.cols {
                return Err(LinalgError::IndexOutOfRange { index: c, dim: self.cols });
            }
        }
        Ok(Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])]))
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T, LinalgError> {
        Ok(self.sub(other)?.max_abs())
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| abs(self[(i, j)] - self[(j, i)]) <= tol))
    }

    pub fn min_entry(&self) -> Option<(T, (usize, usize))> {
        self.extreme(|a, b| a < b)
    }

    pub fn max_entry(&self) -> Option<(T, (usize, usize))> {
        self.extreme(|a, b| a > b)
    }

    fn extreme(&self, better: impl Fn(T, T) -> bool) -> Option<(T, (usize, usize))> {
        let mut best: Option<(T, (usize, usize))> = None;
        for (k, &x) in self.data.iter().enumerate() {
            if best.map_or(true, |(b, _)| better(x, b)) {
                best = Some((x, (k / self.cols, k % self.cols)));
            }
        }
        best
    }
}

impl<T> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for DenseMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        if self.cols > 0 {
            for row in self.data.chunks(self.cols) {
                writeln!(f, "  {row:?}")?;
            }
        }
        write!(f, "]")
    }
}

/// LU factorization with partial pivoting, `P B = L U`.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
    parity_odd: bool,
}

impl<T: Scalar> Lu<T> {
    /// Factorizes a square matrix. Fails when a pivot falls below
    /// `T::pivot_tolerance() * max|B|`.
    pub fn factor(b: &DenseMatrix<T>) -> Result<Self, LinalgError> {
        if !b.is_square() {
            return Err(LinalgError::Dimension(format!("LU of a {}x{} matrix", b.rows, b.cols)));
        }
        let n = b.rows;
        let threshold = T::pivot_tolerance() * b.max_abs();
        let mut lu = b.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut parity_odd = false;
        for k in 0..n {
            let mut p = k;
            let mut best = abs(lu[(k, k)]);
            for i in k + 1..n {
                let v = abs(lu[(i, k)]);
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= threshold {
                return Err(LinalgError::Singular { step: k, pivot: to_f64(best), threshold: to_f64(threshold) });
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                parity_odd = !parity_odd;
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                if factor == T::zero() {
                    continue;
                }
                for j in k + 1..n {
                    lu[(i, j)] = lu[(i, j)] - factor * lu[(k, j)];
                }
            }
        }
        Ok(Self { lu, perm, parity_odd })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>, LinalgError> {
        let n = self.dim();
        if rhs.len() != n {
            return Err(LinalgError::Dimension(format!("right-hand side of length {} for order {n}", rhs.len())));
        }
        let mut x: Vec<T> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            x[i] = row[..i].iter().zip(&x[..i]).fold(x[i], |s, (&l, &xj)| s - l * xj);
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s = row[i + 1..].iter().zip(&x[i + 1..]).fold(x[i], |s, (&u, &xj)| s - u * xj);
            x[i] = s / row[i];
        }
        Ok(x)
    }

    /// Solves for every column of `rhs`.
    pub fn solve_matrix(&self, rhs: &DenseMatrix<T>) -> Result<DenseMatrix<T>, LinalgError> {
        let mut out = DenseMatrix::zeros(rhs.rows, rhs.cols);
        for j in 0..rhs.cols {
            let x = self.solve(&rhs.column(j))?;
            for (i, v) in x.into_iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }

    pub fn inverse(&self) -> DenseMatrix<T> {
        self.solve_matrix(&DenseMatrix::identity(self.dim())).expect("square identity has matching size")
    }

    pub fn determinant(&self) -> T {
        let d = (0..self.dim()).fold(T::one(), |d, i| d * self.lu[(i, i)]);
        if self.parity_odd {
            -d
        } else {
            d
        }
    }
}

/// Inverse together with the residual `max|B B^{-1} - I|`.
#[derive(Debug, Clone)]
pub struct Inverse<T> {
    pub matrix: DenseMatrix<T>,
    pub residual: T,
}

/// Inverts a square matrix via pivoted LU.
pub fn invert<T: Scalar>(b: &DenseMatrix<T>) -> Result<Inverse<T>, LinalgError> {
    let matrix = Lu::factor(b)?.inverse();
    let residual = b.matmul(&matrix)?.max_abs_diff(&DenseMatrix::identity(b.rows))?;
    Ok(Inverse { matrix, residual })
}

/// Infinity-norm condition number `|B|_inf |B^{-1}|_inf`.
pub fn condition_inf<T: Scalar>(b: &DenseMatrix<T>) -> Result<T, LinalgError> {
    Ok(b.norm_inf() * Lu::factor(b)?.inverse().norm_inf())
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<T: Real>(b: &DenseMatrix<T>) -> Result<DenseMatrix<T>, LinalgError> {
    if !b.is_square() {
        return Err(LinalgError::Dimension("Cholesky of a non-square matrix".into()));
    }
    let n = b.rows;
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = b[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if d <= T::zero() {
            return Err(LinalgError::NotPositiveDefinite(j));
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = b[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// The entrywise sign property being asked for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignMode {
    /// Every entry `> tau`.
    Pos,
    /// Every entry `>= -tau`.
    Nonneg,
    /// Every entry `< -tau`.
    Neg,
    /// Every entry `<= tau`.
    Nonpos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignVerdict {
    StrictlyPositive,
    Nonnegative,
    StrictlyNegative,
    Nonpositive,
    Indefinite,
}

/// Outcome of [`sign_test`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignReport<T> {
    pub mode: SignMode,
    pub verdict: SignVerdict,
    /// `tol_rel * max|B|`.
    pub threshold: T,
    pub min_entry: Option<(T, (usize, usize))>,
    pub max_entry: Option<(T, (usize, usize))>,
}

impl<T: Scalar> SignReport<T> {
    pub fn passed(&self) -> bool {
        self.verdict != SignVerdict::Indefinite
    }

    /// The entry that decides the verdict: the minimum for `Pos`/`Nonneg`,
    /// the maximum for `Neg`/`Nonpos`.
    pub fn worst(&self) -> Option<(T, (usize, usize))> {
        match self.mode {
            SignMode::Pos | SignMode::Nonneg => self.min_entry,
            SignMode::Neg | SignMode::Nonpos => self.max_entry,
        }
    }
}

/// Entrywise sign test with threshold `tau = tol_rel * max|B|`.
///
/// An empty matrix passes vacuously.
pub fn sign_test<T: Scalar>(b: &DenseMatrix<T>, mode: SignMode, tol_rel: T) -> SignReport<T> {
    let threshold = tol_rel * b.max_abs();
    let min_entry = b.min_entry();
    let max_entry = b.max_entry();
    let ok = match mode {
        SignMode::Pos => min_entry.map_or(true, |(v, _)| v > threshold),
        SignMode::Nonneg => min_entry.map_or(true, |(v, _)| v >= -threshold),
        SignMode::Neg => max_entry.map_or(true, |(v, _)| v < -threshold),
        SignMode::Nonpos => max_entry.map_or(true, |(v, _)| v <= threshold),
    };
    let verdict = if !ok {
        SignVerdict::Indefinite
    } else {
        match mode {
            SignMode::Pos => SignVerdict::StrictlyPositive,
            SignMode::Nonneg => SignVerdict::Nonnegative,
            SignMode::Neg => SignVerdict::StrictlyNegative,
            SignMode::Nonpos => SignVerdict::Nonpositive,
        }
    };
    SignReport { mode, verdict, threshold, min_entry, max_entry }
}

/// Relative difference `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_diff<T: Scalar>(a: T, b: T, floor: T) -> T {
    let scale = crate::scalar::max(crate::scalar::max(abs(a), abs(b)), floor);
    abs(a - b) / scale
}

/// Singular values of a real matrix, largest first.
pub fn singular_values(b: &DenseMatrix<f64>) -> Vec<f64> {
    let m = nalgebra::DMatrix::from_fn(b.rows(), b.cols(), |i, j| b[(i, j)]);
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Default tolerance as `T` from an `f64` override.
pub fn tol_or_default<T: Scalar>(tol: Option<f64>) -> T {
    tol.map_or_else(T::default_tolerance, lit)
}
