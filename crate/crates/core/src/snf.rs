//! Similarity Network Fusion through the cross diffusion process.
//!
//! Each layer keeps a status matrix `P_l` (globally normalized similarities) and a
//! sparse local kernel `Q_l` (row-normalized over the `k` nearest neighbours). One
//! step replaces every `P_l` by `Q_l * mean_{h != l}(P_h) * Q_l^T`, all layers
//! updated from the same snapshot. After convergence the status matrices are
//! averaged and rescaled into a similarity matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{FusionMethod, FusionResult};
use crate::matcore::SymMatrix;

/// How the initial status matrices are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatusNormalization {
    /// Divide by the sum of all entries.
    #[default]
    Global,
    /// Divide each row by its sum.
    RowStochastic,
}

/// How the averaged status matrix is turned into the output monoplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reweight {
    /// Divide by the largest off-diagonal entry, clip to `[0, 1]`, unit diagonal.
    #[default]
    MaxOffDiagonal,
    /// Return the averaged status matrix untouched.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnfConfig {
    pub k: usize,
    pub epsilon: f64,
    pub max_iter: usize,
    #[serde(default)]
    pub normalization: StatusNormalization,
    #[serde(default)]
    pub reweight: Reweight,
}

impl SnfConfig {
    /// Defaults for `n` nodes: `k = max(1, round(n / 3))`, `epsilon = 1e-6`, 100 iterations.
    pub fn for_size(n: usize) -> Self {
        let k = ((n as f64 / 3.0).round() as usize).max(1);
        SnfConfig {
            k: k.min(n.saturating_sub(1)).max(1),
            epsilon: 1e-6,
            max_iter: 100,
            normalization: StatusNormalization::Global,
            reweight: Reweight::MaxOffDiagonal,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "fusion needs at least 2 nodes, got {n}"
            )));
        }
        if self.k < 1 || self.k > n - 1 {
            return Err(Error::InvalidParameter(format!(
                "k = {} must lie in [1, {}]",
                self.k,
                n - 1
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {} must be positive",
                self.epsilon
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "max_iter must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Cross diffusion state: current status matrices and the fixed local kernels.
#[derive(Debug, Clone)]
pub struct StatusMatrices {
    pub p: Vec<DMatrix<f64>>,
    pub q: Vec<DMatrix<f64>>,
    pub t: usize,
    /// `residuals[t][l] = |P_{l,t+1} - P_{l,t}|_F`.
    pub residuals: Vec<Vec<f64>>,
}

impl StatusMatrices {
    pub fn new(p: Vec<DMatrix<f64>>, q: Vec<DMatrix<f64>>) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::DimensionError {
                expected: p.len(),
                found: q.len(),
            });
        }
        if p.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "cross diffusion needs at least 2 layers, got {}",
                p.len()
            )));
        }
        let n = p[0].nrows();
        for m in p.iter().chain(&q) {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionError {
                    expected: n,
                    found: m.nrows(),
                });
            }
        }
        Ok(StatusMatrices {
            p,
            q,
            t: 0,
            residuals: Vec::new(),
        })
    }

    pub fn layers(&self) -> usize {
        self.p.len()
    }

    /// Largest per-layer residual of the most recent step.
    pub fn last_residual(&self) -> Option<f64> {
        self.residuals
            .last()
            .map(|r| r.iter().copied().fold(0.0, f64::max))
    }
}

/// `p_ij = s_ij / sum_{k,h} s_kh`.
pub fn global_normalize(s: &SymMatrix) -> Result<DMatrix<f64>> {
    let total: f64 = s.as_matrix().iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput("similarity matrix sums to zero".into()));
    }
    Ok(s.as_matrix() / total)
}

/// `p_ij = s_ij / sum_h s_ih`; rows summing to zero stay zero.
pub fn row_normalize(s: &SymMatrix) -> Result<DMatrix<f64>> {
    let mut p = s.as_matrix().clone();
    if !(p.iter().sum::<f64>() > 0.0) {
        return Err(Error::InvalidInput("similarity matrix sums to zero".into()));
    }
    for mut row in p.row_iter_mut() {
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row /= total;
        }
    }
    Ok(p)
}

/// The `k` most similar nodes to `i`, excluding `i`; ties go to the smaller index.
pub fn nearest_neighbors(s: &SymMatrix, i: usize, k: usize) -> Vec<usize> {
    let mut cand: Vec<usize> = (0..s.n()).filter(|&j| j != i).collect();
    cand.sort_by(|&a, &b| s.get(i, b).total_cmp(&s.get(i, a)).then(a.cmp(&b)));
    cand.truncate(k);
    cand
}

/// Local kernel from the k-nearest-neighbour graph.
///
/// Returns the kernel and the rows whose neighbour similarities were all zero;
/// those rows are left at zero.
pub fn local_normalize(s: &SymMatrix, k: usize) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let n = s.n();
    if k < 1 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must lie in [1, {}]",
            n.saturating_sub(1)
        )));
    }
    let mut q = DMatrix::zeros(n, n);
    let mut empty = Vec::new();
    for i in 0..n {
        let nbrs = nearest_neighbors(s, i, k);
        let total: f64 = nbrs.iter().map(|&j| s.get(i, j)).sum();
        if total > 0.0 {
            for &j in &nbrs {
                q[(i, j)] = s.get(i, j) / total;
            }
        } else {
            empty.push(i);
        }
    }
    Ok((q, empty))
}

/// One synchronous cross diffusion step over all layers.
pub fn cdp_step(mut state: StatusMatrices) -> Result<StatusMatrices> {
    let m = state.layers();
    if m < 2 {
        return Err(Error::InvalidInput(
            "cross diffusion needs at least 2 layers".into(),
        ));
    }
    let n = state.p[0].nrows();
    let scale = 1.0 / (m - 1) as f64;
    let mut next = Vec::with_capacity(m);
    let mut residuals = Vec::with_capacity(m);
    for l in 0..m {
        let mut others = DMatrix::zeros(n, n);
        for (h, p) in state.p.iter().enumerate() {
            if h != l {
                others += p;
            }
        }
        others *= scale;
        let q = &state.q[l];
        let updated = q * others * q.transpose();
        let updated = (&updated + updated.transpose()) * 0.5;
        residuals.push((&updated - &state.p[l]).norm());
        next.push(updated);
    }
    state.p = next;
    state.t += 1;
    state.residuals.push(residuals);
    Ok(state)
}

/// Rescales an averaged status matrix into `[0, 1]` with a unit diagonal.
pub fn reweight_monoplex(avg: &DMatrix<f64>) -> Result<SymMatrix> {
    let n = avg.nrows();
    let mut max_off = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                max_off = max_off.max(avg[(i, j)]);
            }
        }
    }
    SymMatrix::from_fn(n, |i, j| {
        if i == j {
            1.0
        } else if max_off > 0.0 {
            (avg[(i, j)] / max_off).clamp(0.0, 1.0)
        } else {
            0.0
        }
    })
}

/// Builds the initial state for `layers`.
pub fn initial_state(
    layers: &[SymMatrix],
    cfg: &SnfConfig,
) -> Result<(StatusMatrices, Vec<Vec<usize>>)> {
    let first = layers
        .first()
        .ok_or_else(|| Error::InvalidInput("no layers to fuse".into()))?;
    let n = first.n();
    cfg.validate(n)?;
    if let Some(bad) = layers.iter().find(|l| l.n() != n) {
        return Err(Error::DimensionError {
            expected: n,
            found: bad.n(),
        });
    }
    let mut p = Vec::with_capacity(layers.len());
    let mut q = Vec::with_capacity(layers.len());
    let mut empty = Vec::with_capacity(layers.len());
    for s in layers {
        p.push(match cfg.normalization {
            StatusNormalization::Global => global_normalize(s)?,
            StatusNormalization::RowStochastic => row_normalize(s)?,
        });
        let (kernel, rows) = local_normalize(s, cfg.k)?;
        q.push(kernel);
        empty.push(rows);
    }
    Ok((StatusMatrices::new(p, q)?, empty))
}

/// Runs cross diffusion to convergence and returns the re-weighted monoplex.
///
/// Stops at the first `T` with `max_l |P_{l,T+1} - P_{l,T}|_F < epsilon` and averages
/// the `P_{l,T}`. Hitting `max_iter` is reported through `converged = false`.
pub fn snf_fuse(layers: &[SymMatrix], cfg: &SnfConfig) -> Result<FusionResult> {
    let (mut state, _) = initial_state(layers, cfg)?;
    let mut converged = false;
    let mut history = Vec::new();
    let mut current = state.p.clone();
    for _ in 0..cfg.max_iter {
        let previous = std::mem::take(&mut current);
        state = cdp_step(state)?;
        let r = state.last_residual().unwrap_or(0.0);
        if !r.is_finite() {
            return Err(Error::InvalidInput(
                "cross diffusion produced non-finite values".into(),
            ));
        }
        history.push(r);
        if r < cfg.epsilon {
            converged = true;
            current = previous;
            break;
        }
        current = state.p.clone();
    }
    let iterations = if converged {
        history.len() - 1
    } else {
        history.len()
    };

    let m = current.len() as f64;
    let n = current[0].nrows();
    let mut avg = DMatrix::zeros(n, n);
    for p in &current {
        avg += p;
    }
    avg /= m;

    let monoplex = match cfg.reweight {
        Reweight::MaxOffDiagonal => reweight_monoplex(&avg)?,
        Reweight::Raw => SymMatrix::new(avg)?,
    };
    Ok(FusionResult {
        method: FusionMethod::Snf,
        monoplex,
        iterations,
        converged,
        residual: history.last().copied().unwrap_or(0.0),
        residuals: history,
        weights: None,
    })
}
