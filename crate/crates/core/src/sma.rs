//! Similarity Matrix Average: RV-coefficient layer weights and weighted
//! barycenters under the Frobenius, Riemannian (affine-invariant) and
//! Wasserstein (Bures) metrics.
//!
//! The Frobenius barycenter is the weighted arithmetic mean. The other two are
//! fixed points of nonlinear matrix equations and are computed iteratively from
//! the arithmetic mean:
//!
//! * Riemannian: `X <- X^{1/2} exp(sum_l w_l log(X^{-1/2} S_l X^{-1/2})) X^{1/2}`,
//!   stopped once `|sum_l w_l log(X^{1/2} S_l^{-1} X^{1/2})|_F <= tol * m`.
//! * Wasserstein: `X <- X^{-1/2} (sum_l w_l (X^{1/2} S_l X^{1/2})^{1/2})^2 X^{-1/2}`,
//!   stopped once `|X - sum_l w_l (X^{1/2} S_l X^{1/2})^{1/2}|_F <= tol`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{FusionMethod, FusionResult};
use crate::matcore::{
    apply_to_eigen, frobenius_inner, mat_fn, sym_eigen, MatFn, SymMatrix, PSD_CLIP_TOL,
};

/// Eigenvalue gap under which the leading eigenvalue of an RV matrix counts as repeated.
pub const SPECTRAL_GAP_TOL: f64 = 1e-10;

/// Negative weights down to this magnitude are rounding noise and get zeroed.
const WEIGHT_NOISE: f64 = 1e-12;

/// Pairwise RV coefficients between layers.
#[derive(Debug, Clone, PartialEq)]
pub struct RvMatrix {
    values: SymMatrix,
}

impl RvMatrix {
    /// Wraps a precomputed coefficient matrix; the diagonal must be exactly 1.
    pub fn new(values: SymMatrix) -> Result<Self> {
        if (0..values.n()).any(|i| values.get(i, i) != 1.0) {
            return Err(Error::InvalidInput("RV matrix diagonal must be 1".into()));
        }
        Ok(RvMatrix { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(SymMatrix::from_rows(rows)?)
    }

    pub fn m(&self) -> usize {
        self.values.n()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.values
    }
}

/// Nonnegative layer weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector {
    w: Vec<f64>,
}

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidInput("weight vector is empty".into()));
        }
        if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "weights must be nonnegative: {w:?}"
            )));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(WeightVector { w })
    }

    pub fn uniform(m: usize) -> Result<Self> {
        Self::new(vec![1.0 / m as f64; m])
    }

    /// Normalizes a nonnegative direction to unit sum, zeroing rounding-level negatives.
    fn from_direction(mut v: Vec<f64>) -> Result<Self> {
        let total: f64 = v.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidInput("weight direction sums to zero".into()));
        }
        for x in v.iter_mut() {
            *x /= total;
            if *x < 0.0 && *x >= -WEIGHT_NOISE {
                *x = 0.0;
            }
        }
        let total: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= total);
        Self::new(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Which rule assigns layer weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightsMode {
    #[serde(rename = "uniform")]
    Uniform,
    /// Normalized leading eigenvector of the RV matrix.
    #[serde(rename = "rv-pc")]
    RvLeadingEigenvector,
    /// Normalized off-diagonal row sums of the RV matrix.
    #[serde(rename = "rv-rowsum")]
    RvRowsum,
}

impl WeightsMode {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightsMode::Uniform => "uniform",
            WeightsMode::RvLeadingEigenvector => "rv-pc",
            WeightsMode::RvRowsum => "rv-rowsum",
        }
    }

    /// The pairing used when no mode is requested.
    pub fn default_for(metric: Metric) -> Self {
        match metric {
            Metric::Frobenius => WeightsMode::RvLeadingEigenvector,
            Metric::Riemannian | Metric::Wasserstein => WeightsMode::RvRowsum,
        }
    }
}

impl std::str::FromStr for WeightsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(WeightsMode::Uniform),
            "rv-pc" | "rv-leading-eigenvector" => Ok(WeightsMode::RvLeadingEigenvector),
            "rv-rowsum" => Ok(WeightsMode::RvRowsum),
            other => Err(Error::InvalidParameter(format!(
                "unknown weights mode `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Frobenius,
    Riemannian,
    Wasserstein,
}

impl Metric {
    pub fn method(self) -> FusionMethod {
        match self {
            Metric::Frobenius => FusionMethod::SmaFrobenius,
            Metric::Riemannian => FusionMethod::SmaRiemannian,
            Metric::Wasserstein => FusionMethod::SmaWasserstein,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarycenterConfig {
    pub metric: Metric,
    pub tol: f64,
    pub max_iter: usize,
    /// Relative diagonal loading for layers below the eigenvalue floor; 0 disables it.
    pub jitter: f64,
}

impl BarycenterConfig {
    pub fn new(metric: Metric) -> Self {
        BarycenterConfig {
            metric,
            tol: 1e-10,
            max_iter: 1000,
            jitter: match metric {
                Metric::Riemannian => 1e-8,
                _ => 0.0,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tol = {} must be positive",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "max_iter must be at least 1".into(),
            ));
        }
        if !(self.jitter >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "jitter = {} must be >= 0",
                self.jitter
            )));
        }
        Ok(())
    }
}

fn check_layers(layers: &[SymMatrix]) -> Result<usize> {
    let first = layers
        .first()
        .ok_or_else(|| Error::InvalidInput("no layers to average".into()))?;
    let n = first.n();
    if let Some(bad) = layers.iter().find(|l| l.n() != n) {
        return Err(Error::DimensionError {
            expected: n,
            found: bad.n(),
        });
    }
    Ok(n)
}

fn check_weights(layers: &[SymMatrix], w: &WeightVector) -> Result<()> {
    if w.len() != layers.len() {
        return Err(Error::DimensionError {
            expected: layers.len(),
            found: w.len(),
        });
    }
    Ok(())
}

/// `r_ij = <S_i, S_j>_F / (|S_i|_F |S_j|_F)`.
pub fn rv_matrix(layers: &[SymMatrix]) -> Result<RvMatrix> {
    check_layers(layers)?;
    let m = layers.len();
    if m < 2 {
        return Err(Error::InvalidInput(format!(
            "RV matrix needs at least 2 layers, got {m}"
        )));
    }
    let norms: Vec<f64> = layers.iter().map(SymMatrix::frobenius_norm).collect();
    if let Some(l) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::InvalidInput(format!("layer {l} is the zero matrix")));
    }
    let mut rows = vec![vec![1.0; m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            let r =
                (frobenius_inner(&layers[i], &layers[j])? / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            rows[i][j] = r;
            rows[j][i] = r;
        }
    }
    RvMatrix::from_rows(&rows)
}

/// Leading eigenvector of `R` scaled to unit sum.
pub fn weights_frobenius(r: &RvMatrix) -> Result<WeightVector> {
    let eig = sym_eigen(r.as_sym())?;
    if r.m() > 1 {
        let gap = eig.values[0] - eig.values[1];
        if gap <= SPECTRAL_GAP_TOL {
            return Err(Error::DegenerateSpectrum { gap });
        }
    }
    let q: Vec<f64> = eig.vectors.column(0).iter().copied().collect();
    let sum: f64 = q.iter().sum();
    if sum.abs() <= WEIGHT_NOISE {
        return Err(Error::InvalidInput(
            "leading eigenvector sums to zero".into(),
        ));
    }
    // 1^T q > 0
    let q: Vec<f64> = if sum < 0.0 {
        q.iter().map(|v| -v).collect()
    } else {
        q
    };
    WeightVector::from_direction(q)
}

/// `(R - I) 1` scaled to unit sum.
pub fn weights_rowsum(r: &RvMatrix) -> Result<WeightVector> {
    let m = r.m();
    let sums: Vec<f64> = (0..m)
        .map(|i| (0..m).filter(|&j| j != i).map(|j| r.get(i, j)).sum())
        .collect();
    if !(sums.iter().sum::<f64>() > 0.0) {
        return Err(Error::InvalidInput(
            "RV matrix has no positive off-diagonal mass".into(),
        ));
    }
    WeightVector::from_direction(sums)
}

/// Weights for `layers` under `mode`.
pub fn layer_weights(layers: &[SymMatrix], mode: WeightsMode) -> Result<WeightVector> {
    match mode {
        WeightsMode::Uniform => WeightVector::uniform(layers.len()),
        WeightsMode::RvLeadingEigenvector => weights_frobenius(&rv_matrix(layers)?),
        WeightsMode::RvRowsum => weights_rowsum(&rv_matrix(layers)?),
    }
}

fn weighted_sum(layers: &[SymMatrix], w: &WeightVector) -> Result<SymMatrix> {
    let mut acc = nalgebra::DMatrix::zeros(layers[0].n(), layers[0].n());
    for (s, &wl) in layers.iter().zip(w.as_slice()) {
        acc += s.as_matrix() * wl;
    }
    SymMatrix::new(acc)
}

/// Weighted arithmetic mean `sum_l w_l S_l`.
pub fn barycenter_frobenius(layers: &[SymMatrix], w: &WeightVector) -> Result<FusionResult> {
    check_layers(layers)?;
    check_weights(layers, w)?;
    Ok(FusionResult {
        method: FusionMethod::SmaFrobenius,
        monoplex: weighted_sum(layers, w)?,
        iterations: 0,
        converged: true,
        residual: 0.0,
        residuals: Vec::new(),
        weights: Some(w.clone()),
    })
}

/// Applies diagonal loading to layers whose smallest eigenvalue is below the floor.
///
/// Without jitter such layers are rejected when `require_pd`, and otherwise only
/// checked for positive semidefiniteness.
fn regularize(layers: &[SymMatrix], jitter: f64, require_pd: bool) -> Result<Vec<SymMatrix>> {
    layers
        .iter()
        .map(|s| {
            let eig = sym_eigen(s)?;
            let floor = s.eig_floor();
            let min = eig.min_value();
            if min >= floor {
                return Ok(s.clone());
            }
            if jitter > 0.0 {
                let level = s.trace() / s.n() as f64;
                let loaded = s.shifted(jitter * if level > 0.0 { level } else { 1.0 });
                let min = sym_eigen(&loaded)?.min_value();
                if min < loaded.eig_floor() {
                    return Err(Error::SingularMatrix {
                        min_eigenvalue: min,
                        floor: loaded.eig_floor(),
                    });
                }
                return Ok(loaded);
            }
            if require_pd {
                return Err(Error::SingularMatrix {
                    min_eigenvalue: min,
                    floor,
                });
            }
            let scale = f64::max(1.0, eig.max_value().abs());
            if min < -PSD_CLIP_TOL * scale {
                return Err(Error::InvalidInput(format!(
                    "layer is not positive semidefinite (eigenvalue {min:e})"
                )));
            }
            Ok(s.clone())
        })
        .collect()
}

/// Square root and inverse square root from one eigendecomposition.
fn sqrt_pair(x: &SymMatrix) -> Result<(SymMatrix, SymMatrix)> {
    let eig = sym_eigen(x)?;
    Ok((
        apply_to_eigen(x, &eig, MatFn::Sqrt)?,
        apply_to_eigen(x, &eig, MatFn::InvSqrt)?,
    ))
}

/// Weighted Karcher mean under the affine-invariant metric.
pub fn barycenter_riemannian(
    layers: &[SymMatrix],
    w: &WeightVector,
    cfg: &BarycenterConfig,
) -> Result<FusionResult> {
    check_layers(layers)?;
    check_weights(layers, w)?;
    cfg.validate()?;
    let layers = regularize(layers, cfg.jitter, true)?;
    let m = layers.len() as f64;

    let mut x = weighted_sum(&layers, w)?;
    let mut residuals = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    loop {
        let (root, inv_root) = sqrt_pair(&x)?;
        let mut grad = nalgebra::DMatrix::zeros(x.n(), x.n());
        for (s, &wl) in layers.iter().zip(w.as_slice()) {
            if wl == 0.0 {
                continue;
            }
            let whitened = inv_root.congruence(s)?;
            grad += mat_fn(&whitened, MatFn::Log)?.as_matrix() * wl;
        }
        let grad = SymMatrix::new(grad)?;
        // log(X^{1/2} S^{-1} X^{1/2}) = -log(X^{-1/2} S X^{-1/2})
        let r = grad.frobenius_norm();
        residuals.push(r);
        if r <= cfg.tol * m {
            converged = true;
            break;
        }
        if iterations == cfg.max_iter {
            break;
        }
        x = root.congruence(&mat_fn(&grad, MatFn::Exp)?)?;
        iterations += 1;
    }
    Ok(FusionResult {
        method: FusionMethod::SmaRiemannian,
        monoplex: x,
        iterations,
        converged,
        residual: *residuals.last().unwrap_or(&0.0),
        residuals,
        weights: Some(w.clone()),
    })
}

/// Weighted Bures-Wasserstein barycenter.
pub fn barycenter_wasserstein(
    layers: &[SymMatrix],
    w: &WeightVector,
    cfg: &BarycenterConfig,
) -> Result<FusionResult> {
    check_layers(layers)?;
    check_weights(layers, w)?;
    cfg.validate()?;
    let layers = regularize(layers, cfg.jitter, false)?;

    let mut x = weighted_sum(&layers, w)?;
    let mut residuals = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    loop {
        let (root, inv_root) = sqrt_pair(&x)?;
        let mut t = nalgebra::DMatrix::zeros(x.n(), x.n());
        for (s, &wl) in layers.iter().zip(w.as_slice()) {
            if wl == 0.0 {
                continue;
            }
            t += mat_fn(&root.congruence(s)?, MatFn::Sqrt)?.as_matrix() * wl;
        }
        let t = SymMatrix::new(t)?;
        let r = (x.as_matrix() - t.as_matrix()).norm();
        residuals.push(r);
        if r <= cfg.tol {
            converged = true;
            break;
        }
        if iterations == cfg.max_iter {
            break;
        }
        let half = inv_root.as_matrix() * t.as_matrix();
        x = SymMatrix::new(&half * half.transpose())?;
        iterations += 1;
    }
    Ok(FusionResult {
        method: FusionMethod::SmaWasserstein,
        monoplex: x,
        iterations,
        converged,
        residual: *residuals.last().unwrap_or(&0.0),
        residuals,
        weights: Some(w.clone()),
    })
}

/// Dispatches on `cfg.metric`.
pub fn barycenter(
    layers: &[SymMatrix],
    w: &WeightVector,
    cfg: &BarycenterConfig,
) -> Result<FusionResult> {
    match cfg.metric {
        Metric::Frobenius => barycenter_frobenius(layers, w),
        Metric::Riemannian => barycenter_riemannian(layers, w, cfg),
        Metric::Wasserstein => barycenter_wasserstein(layers, w, cfg),
    }
}
