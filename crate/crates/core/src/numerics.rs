//! Small dense linear algebra: the vector and matrix carriers used by every
//! other module, an LU solver with partial pivoting, a certificate-based
//! Schur stability test and the Laplacian pseudo-solve.
//!
//! Everything here is sized for desk-scale networks (a few hundred nodes at
//! most). Storage is dense and row-major.

use std::fmt;
use std::ops::{Deref, DerefMut, Index, IndexMut};

use crate::error::{Error, Result};

/// Tolerances shared by the numerical routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericPolicy {
    /// Pivots below `pivot_rel * max|M_ij|` are treated as zero.
    pub pivot_rel: f64,
    /// A power norm must fall below `1 - stable_margin` to certify stability.
    pub stable_margin: f64,
    /// A power norm above this is taken as a growth certificate.
    pub growth_limit: f64,
    /// Number of repeated squarings tried by the stability test.
    pub squarings: u32,
    /// Allowed `|1ᵀ rhs|`, relative to `max(1, ‖rhs‖₁)`, for the pseudo-solve.
    pub balance_tol: f64,
    /// Row/column sums below `1 - deficiency_tol` mark a deficiency node.
    pub deficiency_tol: f64,
    /// Tolerance for stochastic vectors and probability vectors.
    pub stochastic_tol: f64,
}

impl Default for NumericPolicy {
    fn default() -> Self {
        NumericPolicy {
            pivot_rel: 1e-13,
            stable_margin: 1e-10,
            growth_limit: 1e9,
            squarings: 30,
            balance_tol: 1e-10,
            deficiency_tol: 1e-12,
            stochastic_tol: 1e-12,
        }
    }
}

/// A dense real vector.
#[derive(Clone, Default, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(n: usize) -> Self {
        Vector(vec![0.0; n])
    }

    pub fn filled(n: usize, value: f64) -> Self {
        Vector(vec![value; n])
    }

    pub fn ones(n: usize) -> Self {
        Self::filled(n, 1.0)
    }

    /// The `i`-th canonical basis vector of length `n`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v[i] = 1.0;
        v
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.0.is_empty() {
            0.0
        } else {
            self.sum() / self.0.len() as f64
        }
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn norm_1(&self) -> f64 {
        self.0.iter().map(|x| x.abs()).sum()
    }

    pub fn norm_2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        assert_eq!(self.len(), other.len(), "dot: length mismatch");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn add(&self, other: &Vector) -> Vector {
        assert_eq!(self.len(), other.len(), "add: length mismatch");
        self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        assert_eq!(self.len(), other.len(), "sub: length mismatch");
        self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()
    }

    pub fn scale(&self, factor: f64) -> Vector {
        self.0.iter().map(|a| a * factor).collect()
    }

    /// `self += factor * other`
    pub fn axpy(&mut self, factor: f64, other: &Vector) {
        assert_eq!(self.len(), other.len(), "axpy: length mismatch");
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += factor * b;
        }
    }

    /// Largest entrywise absolute difference.
    pub fn max_abs_diff(&self, other: &Vector) -> f64 {
        assert_eq!(self.len(), other.len(), "max_abs_diff: length mismatch");
        self.0
            .iter()
            .zip(&other.0)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Subtracts the mean from every entry.
    pub fn demeaned(&self) -> Vector {
        let mean = self.mean();
        self.0.iter().map(|x| x - mean).collect()
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl From<&[f64]> for Vector {
    fn from(v: &[f64]) -> Self {
        Vector(v.to_vec())
    }
}

impl<const N: usize> From<[f64; N]> for Vector {
    fn from(v: [f64; N]) -> Self {
        Vector(v.to_vec())
    }
}

impl FromIterator<f64> for Vector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Vector(iter.into_iter().collect())
    }
}

impl IntoIterator for Vector {
    type Item = f64;
    type IntoIter = std::vec::IntoIter<f64>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

/// A dense row-major real matrix.
///
/// Arithmetic helpers panic on shape mismatch; the public operations of the
/// other modules validate shapes up front and report [`Error::DimensionMismatch`].
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dims("matrix shape", 1, 0));
        }
        if data.len() != rows * cols {
            return Err(Error::dims("matrix data", rows * cols, data.len()));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Builds a matrix from rows of equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::dims("matrix row", cols, r.len()));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self::from_fn(n, n, |i, j| if i == j { d[i] } else { 0.0 })
    }

    /// The rank-one matrix `a bᵀ`.
    pub fn outer(a: &[f64], b: &[f64]) -> Self {
        Self::from_fn(a.len(), b.len(), |i, j| a[i] * b[j])
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

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn diag(&self) -> Vector {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    fn zip_with(&self, other: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> DenseMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "matrix shape mismatch"
        );
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        }
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul: inner dimension mismatch");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vector {
        assert_eq!(self.cols, x.len(), "mul_vec: dimension mismatch");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn row_sums(&self) -> Vector {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vector {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, a) in sums.iter_mut().zip(self.row(i)) {
                *s += a;
            }
        }
        sums.into()
    }

    /// Induced ∞-norm: largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|a| a.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Induced 1-norm: largest absolute column sum.
    pub fn norm_1(&self) -> f64 {
        let mut sums = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (s, a) in sums.iter_mut().zip(self.row(i)) {
                *s += a.abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "matrix shape mismatch"
        );
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub(crate) fn require_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// LU factorization with partial pivoting, `PA = LU` packed in one matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(m: &DenseMatrix, policy: &NumericPolicy) -> Result<Lu> {
        let n = m.require_square()?;
        let threshold = policy.pivot_rel * m.max_abs();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let (pivot_row, pivot) = (col..n)
                .map(|r| (r, lu[(r, col)].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= threshold || pivot == 0.0 {
                return Err(Error::SingularMatrix { pivot, threshold });
            }
            if pivot_row != col {
                perm.swap(pivot_row, col);
                for j in 0..n {
                    lu.data.swap(pivot_row * n + j, col * n + j);
                }
            }
            let p = lu[(col, col)];
            for r in col + 1..n {
                let factor = lu[(r, col)] / p;
                lu[(r, col)] = factor;
                if factor != 0.0 {
                    for j in col + 1..n {
                        let upd = factor * lu[(col, j)];
                        lu[(r, j)] -= upd;
                    }
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vector {
        let n = self.perm.len();
        assert_eq!(rhs.len(), n, "Lu::solve: dimension mismatch");
        let mut y: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[(i, j)] * y[j]).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[(i, j)] * y[j]).sum();
            y[i] = (y[i] - s) / self.lu[(i, i)];
        }
        y.into()
    }
}

impl NumericPolicy {
    /// Solves `M y = rhs` by partial-pivoting elimination followed by one
    /// step of iterative refinement.
    pub fn linear_solve(&self, m: &DenseMatrix, rhs: &[f64]) -> Result<Vector> {
        let n = m.require_square()?;
        if rhs.len() != n {
            return Err(Error::dims("linear_solve rhs", n, rhs.len()));
        }
        if !m.is_finite() || rhs.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("linear_solve input"));
        }
        let lu = Lu::factor(m, self)?;
        let mut y = lu.solve(rhs);
        let residual: Vector = m
            .mul_vec(&y)
            .iter()
            .zip(rhs)
            .map(|(my, r)| r - my)
            .collect();
        let correction = lu.solve(&residual);
        y.axpy(1.0, &correction);
        if !y.is_finite() {
            return Err(Error::NonFinite("linear_solve output"));
        }
        Ok(y)
    }

    /// Certificate-based Schur stability test by repeated squaring.
    ///
    /// `ρ(M) ≤ ‖M^k‖^(1/k)` for any induced norm, so a power with norm below
    /// one proves stability. Powers whose norm exceeds `growth_limit` are
    /// reported as evidence of instability.
    ///
    /// Each squaring adds rounding error that compounds with the exponent, so
    /// the computed norm is padded by a running bound on the distance between
    /// the computed and the exact power before it is compared with one.
    pub fn spectral_radius_estimate(&self, m: &DenseMatrix) -> Result<StabilityVerdict> {
        let n = m.require_square()?;
        let unit = f64::EPSILON / 2.0;
        let gamma = n as f64 * unit / (1.0 - n as f64 * unit);
        let mut power = m.clone();
        let mut exponent: u64 = 1;
        // Error bounds in the ∞- and 1-norms; the input itself is exact.
        let (mut err_inf, mut err_1) = (0.0_f64, 0.0_f64);
        for j in 0..=self.squarings {
            let (c_inf, c_1) = (power.norm_inf(), power.norm_1());
            let norm = c_inf.min(c_1);
            if !norm.is_finite() {
                return Ok(StabilityVerdict::Unstable {
                    power: exponent,
                    norm,
                });
            }
            let certified = (c_inf + err_inf).min(c_1 + err_1);
            if certified < 1.0 - self.stable_margin {
                return Ok(StabilityVerdict::Stable {
                    bound: certified.powf(1.0 / exponent as f64),
                    power: exponent,
                });
            }
            if norm > self.growth_limit {
                return Ok(StabilityVerdict::Unstable {
                    power: exponent,
                    norm,
                });
            }
            if j < self.squarings {
                // ‖fl(CC) - TT‖ ≤ e(2‖C‖ + e) + γ_n ‖C‖²
                err_inf = err_inf * (2.0 * c_inf + err_inf) + gamma * c_inf * c_inf;
                err_1 = err_1 * (2.0 * c_1 + err_1) + gamma * c_1 * c_1;
                power = power.matmul(&power);
                exponent = exponent.saturating_mul(2);
            }
        }
        Ok(StabilityVerdict::Inconclusive)
    }

    /// Minimum-norm solution of `L x = rhs` for a connected-graph Laplacian.
    ///
    /// Solves `(L + 11ᵀ/n) y = rhs` and returns `y - mean(y) 1`.
    pub fn laplacian_pseudo_solve(&self, laplacian: &DenseMatrix, rhs: &[f64]) -> Result<Vector> {
        let n = laplacian.require_square()?;
        if rhs.len() != n {
            return Err(Error::dims("laplacian_pseudo_solve rhs", n, rhs.len()));
        }
        let scale = laplacian.max_abs().max(1.0);
        let row_sum_err = laplacian.row_sums().norm_inf();
        let asym = laplacian.max_abs_diff(&laplacian.transpose());
        if row_sum_err > 1e-12 * scale || asym > 1e-12 * scale {
            return Err(Error::InvariantViolation(
                "matrix is not a symmetric Laplacian (L1 != 0 or L != Lᵀ)".into(),
            ));
        }
        let sum: f64 = rhs.iter().sum();
        let magnitude: f64 = rhs.iter().map(|x| x.abs()).sum();
        if sum.abs() > self.balance_tol * magnitude.max(1.0) {
            return Err(Error::NotBalanced { sum });
        }
        let inv_n = 1.0 / n as f64;
        let regularized = DenseMatrix::from_fn(n, n, |i, j| laplacian[(i, j)] + inv_n);
        let y = self.linear_solve(&regularized, rhs)?;
        Ok(y.demeaned())
    }
}

/// Outcome of [`spectral_radius_estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StabilityVerdict {
    /// `ρ(M) ≤ bound < 1`, certified by `‖M^power‖ < 1`.
    Stable { bound: f64, power: u64 },
    /// `‖M^power‖ = norm` exceeded the growth limit.
    Unstable { power: u64, norm: f64 },
    Inconclusive,
}

impl StabilityVerdict {
    pub fn is_stable(&self) -> bool {
        matches!(self, StabilityVerdict::Stable { .. })
    }
}

pub fn linear_solve(m: &DenseMatrix, rhs: &[f64]) -> Result<Vector> {
    NumericPolicy::default().linear_solve(m, rhs)
}

pub fn spectral_radius_estimate(m: &DenseMatrix) -> Result<StabilityVerdict> {
    NumericPolicy::default().spectral_radius_estimate(m)
}

pub fn laplacian_pseudo_solve(laplacian: &DenseMatrix, rhs: &[f64]) -> Result<Vector> {
    NumericPolicy::default().laplacian_pseudo_solve(laplacian, rhs)
}
