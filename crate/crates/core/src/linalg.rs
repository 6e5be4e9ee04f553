//! Small dense matrices for the linear-quadratic oracles.
//!
//! Sizes here are desk scale (a handful of states), so everything is a plain
//! row-major `Vec` with textbook algorithms: Gaussian elimination with partial
//! pivoting, cyclic Jacobi for symmetric eigenvalues and a normalized
//! repeated-squaring estimate of the spectral radius.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Pivots with magnitude below this are treated as singular.
pub const PIVOT_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is singular to working precision (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("ragged rows: expected {expected} columns, row {row} has {found}")]
    Ragged { row: usize, expected: usize, found: usize },
}

/// Row-major dense matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<T>>", into = "Vec<Vec<T>>")]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.to_rows()).finish()
    }
}

impl<T: Scalar> TryFrom<Vec<Vec<T>>> for Matrix<T> {
    type Error = LinalgError;

    fn try_from(rows: Vec<Vec<T>>) -> Result<Self, Self::Error> {
        Matrix::from_rows(&rows)
    }
}

impl<T: Scalar> From<Matrix<T>> for Vec<Vec<T>> {
    fn from(m: Matrix<T>) -> Self {
        m.to_rows()
    }
}

impl<T: Scalar> Matrix<T> {
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

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self, LinalgError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(LinalgError::Ragged { row: i, expected: cols, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    /// 1x1 matrix.
    pub fn scalar(x: T) -> Self {
        Self { rows: 1, cols: 1, data: vec![x] }
    }

    pub fn column(v: &[T]) -> Self {
        Self { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn diagonal(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>, LinalgError> {
        if self.cols != v.len() {
            return Err(LinalgError::Dimension(format!(
                "cannot apply {}x{} to a vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|i| crate::scalar::dot(self.row(i), v)).collect())
    }

    /// `vᵀ M v` for square `M`.
    pub fn quadratic_form(&self, v: &[T]) -> Result<T, LinalgError> {
        let mv = self.matvec(v)?;
        Ok(crate::scalar::dot(v, &mv))
    }

    fn same_shape(&self, rhs: &Self, op: &str) -> Result<(), LinalgError> {
        if self.shape() != rhs.shape() {
            return Err(LinalgError::Dimension(format!(
                "cannot {op} {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, rhs: &Self) -> Result<Self, LinalgError> {
        self.same_shape(rhs, "add")?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        })
    }

    pub fn try_sub(&self, rhs: &Self) -> Result<Self, LinalgError> {
        self.same_shape(rhs, "subtract")?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        })
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    /// Induced infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|i| self.row(i).iter().fold(T::zero(), |s, &x| s + x.abs()))
            .fold(T::zero(), T::max)
    }

    /// `(M + Mᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        let t = self.transpose();
        let half = T::lit(0.5);
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&t.data).map(|(&a, &b)| (a + b) * half).collect(),
        }
    }

    /// Largest `|M - Mᵀ|` entry.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..self.cols.min(self.rows) {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Copies a block into `self` at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Self) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        let mut out = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                out[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        out
    }

    /// Horizontal concatenation `[self rhs]`.
    pub fn hstack(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if self.rows != rhs.rows {
            return Err(LinalgError::Dimension("hstack row counts differ".into()));
        }
        let mut out = Self::zeros(self.rows, self.cols + rhs.cols);
        out.set_block(0, 0, self);
        out.set_block(0, self.cols, rhs);
        Ok(out)
    }

    /// Vertical concatenation `[self; rhs]`.
    pub fn vstack(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if self.cols != rhs.cols {
            return Err(LinalgError::Dimension("vstack column counts differ".into()));
        }
        let mut out = Self::zeros(self.rows + rhs.rows, self.cols);
        out.set_block(0, 0, self);
        out.set_block(self.rows, 0, rhs);
        Ok(out)
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &Self) -> Self {
        let mut out = Self::zeros(self.rows * rhs.rows, self.cols * rhs.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                for k in 0..rhs.rows {
                    for l in 0..rhs.cols {
                        out[(i * rhs.rows + k, j * rhs.cols + l)] = a * rhs[(k, l)];
                    }
                }
            }
        }
        out
    }

    /// Solves `self · X = rhs` by Gaussian elimination with partial pivoting.
    ///
    /// Fails when the largest available pivot in a column is below [`PIVOT_THRESHOLD`].
    pub fn solve(&self, rhs: &Self) -> Result<Self, LinalgError> {
        if !self.is_square() || self.rows != rhs.rows {
            return Err(LinalgError::Dimension(format!(
                "cannot solve {}x{} system with {}x{} right-hand side",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let n = self.rows;
        let m = rhs.cols;
        let mut a = self.clone();
        let mut b = rhs.clone();
        let threshold = T::lit(PIVOT_THRESHOLD);
        for col in 0..n {
            let mut best = col;
            for r in col + 1..n {
                if a[(r, col)].abs() > a[(best, col)].abs() {
                    best = r;
                }
            }
            let pivot = a[(best, col)];
            if !(pivot.abs() >= threshold) {
                return Err(LinalgError::Singular { column: col, pivot: pivot.as_f64() });
            }
            if best != col {
                a.swap_rows(best, col);
                b.swap_rows(best, col);
            }
            for r in col + 1..n {
                let factor = a[(r, col)] / pivot;
                if factor == T::zero() {
                    continue;
                }
                a[(r, col)] = T::zero();
                for c in col + 1..n {
                    let v = a[(col, c)];
                    a[(r, c)] -= factor * v;
                }
                for c in 0..m {
                    let v = b[(col, c)];
                    b[(r, c)] -= factor * v;
                }
            }
        }
        for col in (0..n).rev() {
            let pivot = a[(col, col)];
            for c in 0..m {
                let mut acc = b[(col, c)];
                for k in col + 1..n {
                    acc -= a[(col, k)] * b[(k, c)];
                }
                b[(col, c)] = acc / pivot;
            }
        }
        Ok(b)
    }

    pub fn inverse(&self) -> Result<Self, LinalgError> {
        self.solve(&Self::identity(self.rows))
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        for c in 0..self.cols {
            self.data.swap(i * self.cols + c, j * self.cols + c);
        }
    }

    /// Eigenvalues of a symmetric matrix (ascending) by cyclic Jacobi rotations.
    pub fn symmetric_eigenvalues(&self) -> Result<Vec<T>, LinalgError> {
        let (vals, _) = self.symmetric_eigen()?;
        Ok(vals)
    }

    /// Eigen-decomposition of a symmetric matrix: ascending eigenvalues and the
    /// matching orthonormal eigenvectors stored as columns.
    pub fn symmetric_eigen(&self) -> Result<(Vec<T>, Self), LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::Dimension("eigenvalues need a square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.symmetrized();
        let mut v = Self::identity(n);
        let eps = T::epsilon();
        for _sweep in 0..100 {
            let mut off = T::zero();
            for i in 0..n {
                for j in i + 1..n {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
            let scale = a.max_abs().max(T::min_positive_value());
            if off.sqrt() <= eps * scale * T::lit(1e-3) {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
        let vals = order.iter().map(|&i| a[(i, i)]).collect();
        let mut vecs = Self::zeros(n, n);
        for (new, &old) in order.iter().enumerate() {
            for k in 0..n {
                vecs[(k, new)] = v[(k, old)];
            }
        }
        Ok((vals, vecs))
    }

    /// Smallest eigenvalue of the symmetric part.
    pub fn min_symmetric_eigenvalue(&self) -> Result<T, LinalgError> {
        Ok(self.symmetric_eigenvalues()?.first().copied().unwrap_or_else(T::zero))
    }

    /// Principal square root of a symmetric positive semidefinite matrix.
    /// Slightly negative eigenvalues from round-off are clamped to zero.
    pub fn psd_sqrt(&self) -> Result<Self, LinalgError> {
        let (vals, vecs) = self.symmetric_eigen()?;
        let n = self.rows;
        let mut out = Self::zeros(n, n);
        for (k, &lambda) in vals.iter().enumerate() {
            let s = lambda.max(T::zero()).sqrt();
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] += s * vecs[(i, k)] * vecs[(j, k)];
                }
            }
        }
        Ok(out)
    }

    /// Spectral radius via Gelfand's formula `ρ = lim ‖Aᵏ‖^{1/k}` with
    /// normalized repeated squaring (k = 2⁶⁰).
    pub fn spectral_radius(&self) -> Result<T, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::Dimension("spectral radius needs a square matrix".into()));
        }
        let norm = self.norm_inf();
        if norm == T::zero() {
            return Ok(T::zero());
        }
        let mut m = self.scale(T::one() / norm);
        let mut log_scale = norm.ln();
        let mut power = T::one();
        for _ in 0..60 {
            let sq = m.matmul(&m)?;
            let n2 = sq.norm_inf();
            if n2 == T::zero() || !n2.is_finite() {
                return Ok(T::zero());
            }
            power *= T::lit(2.0);
            log_scale = log_scale * T::lit(2.0) + n2.ln();
            m = sq.scale(T::one() / n2);
        }
        Ok((log_scale / power).exp())
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

// Operator forms panic on shape mismatch; the `try_*` methods report it instead.
impl<T: Scalar> Add for &Matrix<T> {
    type Output = Matrix<T>;
    fn add(self, rhs: Self) -> Matrix<T> {
        self.try_add(rhs).expect("matrix add shape mismatch")
    }
}

impl<T: Scalar> Sub for &Matrix<T> {
    type Output = Matrix<T>;
    fn sub(self, rhs: Self) -> Matrix<T> {
        self.try_sub(rhs).expect("matrix sub shape mismatch")
    }
}

impl<T: Scalar> Mul for &Matrix<T> {
    type Output = Matrix<T>;
    fn mul(self, rhs: Self) -> Matrix<T> {
        self.matmul(rhs).expect("matrix mul shape mismatch")
    }
}

/// Solves a complex linear system `a · X = b` (both row-major, `a` is n×n, `b` is n×m)
/// by Gaussian elimination with partial pivoting.
pub fn complex_solve<T: Scalar>(
    n: usize,
    a: &mut [Complex<T>],
    m: usize,
    b: &mut [Complex<T>],
) -> Result<(), LinalgError> {
    let threshold = T::lit(PIVOT_THRESHOLD);
    for col in 0..n {
        let mut best = col;
        for r in col + 1..n {
            if a[r * n + col].norm() > a[best * n + col].norm() {
                best = r;
            }
        }
        let pivot = a[best * n + col];
        if !(pivot.norm() >= threshold) {
            return Err(LinalgError::Singular { column: col, pivot: pivot.norm().as_f64() });
        }
        if best != col {
            for c in 0..n {
                a.swap(best * n + c, col * n + c);
            }
            for c in 0..m {
                b.swap(best * m + c, col * m + c);
            }
        }
        for r in col + 1..n {
            let factor = a[r * n + col] / pivot;
            for c in col..n {
                let v = a[col * n + c];
                a[r * n + c] = a[r * n + c] - factor * v;
            }
            for c in 0..m {
                let v = b[col * m + c];
                b[r * m + c] = b[r * m + c] - factor * v;
            }
        }
    }
    for col in (0..n).rev() {
        let pivot = a[col * n + col];
        for c in 0..m {
            let mut acc = b[col * m + c];
            for k in col + 1..n {
                acc = acc - a[col * n + k] * b[k * m + c];
            }
            b[col * m + c] = acc / pivot;
        }
    }
    Ok(())
}
