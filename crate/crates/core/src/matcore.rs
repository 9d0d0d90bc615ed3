//! Dense symmetric-matrix algebra shared by every solver.
//!
//! [`SymMatrix`] symmetrizes once at construction, so downstream code can rely
//! on exact symmetry. Matrix functions go through [`sym_eigen`], whose output
//! is ordered and sign-normalized so every derived quantity is deterministic.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative tolerance under which a negative eigenvalue is treated as zero by `sqrt`.
pub const PSD_CLIP_TOL: f64 = 1e-10;

/// Magnitude below which an eigenvector component counts as zero for sign fixing.
const SIGN_EPS: f64 = 1e-12;

/// A real symmetric `n x n` matrix, `n >= 1`, with finite entries.
#[derive(Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SymMatrix{}", self.inner)
    }
}

impl SymMatrix {
    /// Builds from a square matrix, replacing it by `(M + M^T) / 2`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidInput(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidInput("matrix has dimension 0".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        Ok(Self::symmetrized(m))
    }

    pub(crate) fn symmetrized(mut m: DMatrix<f64>) -> Self {
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        SymMatrix { inner: m }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionError {
                expected: n,
                found: bad.len(),
            });
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(n, n, f))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix {
            inner: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            inner: DMatrix::zeros(n, n),
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn n(&self) -> usize {
        self.inner.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .map(|i| self.inner.row(i).iter().copied().collect())
            .collect()
    }

    /// Entrywise map; `f` receives `(i, j, value)` and must be symmetric in `(i, j)`.
    pub fn map_entries(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Result<Self> {
        let n = self.n();
        Self::new(DMatrix::from_fn(n, n, |i, j| f(i, j, self.inner[(i, j)])))
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix::symmetrized(&self.inner * c)
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        check_dims(self, other)?;
        Ok(SymMatrix::symmetrized(&self.inner + &other.inner))
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        check_dims(self, other)?;
        Ok(SymMatrix::symmetrized(&self.inner - &other.inner))
    }

    /// `self + c * I`.
    pub fn shifted(&self, c: f64) -> SymMatrix {
        let mut m = self.inner.clone();
        for i in 0..self.n() {
            m[(i, i)] += c;
        }
        SymMatrix { inner: m }
    }

    /// `self * inner * self`, symmetrized.
    pub fn congruence(&self, inner: &SymMatrix) -> Result<SymMatrix> {
        check_dims(self, inner)?;
        Ok(SymMatrix::symmetrized(
            &self.inner * &inner.inner * &self.inner,
        ))
    }

    /// Smallest eigenvalue floor accepted by `log` and `invsqrt`.
    pub fn eig_floor(&self) -> f64 {
        1e-12 * f64::max(1.0, self.trace() / self.n() as f64)
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.inner
            .iter()
            .zip(other.inner.iter())
            .fold(0.0, |acc, (a, b)| f64::max(acc, (a - b).abs()))
    }
}

fn check_dims(a: &SymMatrix, b: &SymMatrix) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::DimensionError {
            expected: a.n(),
            found: b.n(),
        });
    }
    Ok(())
}

/// Eigenvalues in nonincreasing order with matching unit eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenPair {
    pub fn min_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn max_value(&self) -> f64 {
        self.values[0]
    }

    /// Reassembles `Q f(Λ) Q^T`.
    pub fn reassemble(&self, mut f: impl FnMut(f64) -> f64) -> SymMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.values[j]);
        }
        debug_assert_eq!(scaled.ncols(), n);
        SymMatrix::symmetrized(scaled * self.vectors.transpose())
    }
}

/// Symmetric eigendecomposition with sorted values and a fixed sign convention:
/// the first component of each eigenvector exceeding `1e-12` in magnitude is positive.
pub fn sym_eigen(m: &SymMatrix) -> Result<EigenPair> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let n = m.n();
    let eig = SymmetricEigen::new(m.inner.clone());
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps the solver's order among exact ties
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).clone_owned();
        let pivot = col
            .iter()
            .copied()
            .find(|v| v.abs() > SIGN_EPS)
            .unwrap_or(0.0);
        if pivot < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    Ok(EigenPair { values, vectors })
}

/// Scalar functions that can be lifted to symmetric matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatFn {
    Sqrt,
    InvSqrt,
    Log,
    Exp,
}

/// Applies `f` through the eigendecomposition of `m`.
///
/// `Sqrt` clips eigenvalues in `[-PSD_CLIP_TOL * max(1, |λ|max), 0)` to zero and
/// rejects anything more negative. `Log` and `InvSqrt` require every eigenvalue to
/// reach [`SymMatrix::eig_floor`].
pub fn mat_fn(m: &SymMatrix, f: MatFn) -> Result<SymMatrix> {
    let eig = sym_eigen(m)?;
    apply_to_eigen(m, &eig, f)
}

pub(crate) fn apply_to_eigen(m: &SymMatrix, eig: &EigenPair, f: MatFn) -> Result<SymMatrix> {
    let min = eig.min_value();
    match f {
        MatFn::Sqrt => {
            let scale = f64::max(1.0, eig.max_value().abs().max(min.abs()));
            if min < -PSD_CLIP_TOL * scale {
                return Err(Error::InvalidInput(format!(
                    "square root of a matrix with eigenvalue {min:e}"
                )));
            }
            Ok(eig.reassemble(|v| v.max(0.0).sqrt()))
        }
        MatFn::InvSqrt | MatFn::Log => {
            let floor = m.eig_floor();
            if min < floor {
                return Err(Error::SingularMatrix {
                    min_eigenvalue: min,
                    floor,
                });
            }
            Ok(if f == MatFn::Log {
                eig.reassemble(f64::ln)
            } else {
                eig.reassemble(|v| 1.0 / v.sqrt())
            })
        }
        MatFn::Exp => {
            let out = eig.reassemble(f64::exp);
            if !out.is_finite() {
                return Err(Error::InvalidInput("matrix exponential overflowed".into()));
            }
            Ok(out)
        }
    }
}

/// `tr(X^T Y)`.
pub fn frobenius_inner(x: &SymMatrix, y: &SymMatrix) -> Result<f64> {
    check_dims(x, y)?;
    Ok(x.inner.iter().zip(y.inner.iter()).map(|(a, b)| a * b).sum())
}

/// True iff the smallest eigenvalue is at least `-tol`.
pub fn is_psd(m: &SymMatrix, tol: f64) -> Result<bool> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidInput(format!("tolerance {tol} must be >= 0")));
    }
    Ok(sym_eigen(m)?.min_value() >= -tol)
}
