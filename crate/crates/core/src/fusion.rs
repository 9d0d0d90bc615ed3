use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::SymMatrix;
use crate::simbuild::{SimilarityKind, SimilarityLayer};
use crate::sma::WeightVector;

/// Slack allowed when an iterative barycenter drifts just outside `[0, 1]`.
pub const RANGE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FusionMethod {
    #[serde(rename = "snf")]
    Snf,
    #[serde(rename = "sma-f")]
    SmaFrobenius,
    #[serde(rename = "sma-r")]
    SmaRiemannian,
    #[serde(rename = "sma-w")]
    SmaWasserstein,
}

impl FusionMethod {
    pub const ALL: [FusionMethod; 4] = [
        FusionMethod::Snf,
        FusionMethod::SmaFrobenius,
        FusionMethod::SmaRiemannian,
        FusionMethod::SmaWasserstein,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionMethod::Snf => "snf",
            FusionMethod::SmaFrobenius => "sma-f",
            FusionMethod::SmaRiemannian => "sma-r",
            FusionMethod::SmaWasserstein => "sma-w",
        }
    }
}

impl fmt::Display for FusionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FusionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FusionMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown fusion method `{s}`")))
    }
}

/// A monoplex together with the solver diagnostics that produced it.
#[derive(Debug, Clone)]
pub struct FusionResult {
    pub method: FusionMethod,
    pub monoplex: SymMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// Final convergence measure; zero for closed-form methods.
    pub residual: f64,
    /// Per-iteration convergence measure.
    pub residuals: Vec<f64>,
    pub weights: Option<WeightVector>,
}

impl FusionResult {
    /// Attaches labels, pulling entries within [`RANGE_SLACK`] of `[0, 1]` back into range.
    pub fn to_layer(&self, labels: Vec<String>) -> Result<SimilarityLayer> {
        let clipped = self.monoplex.map_entries(|_, _, v| {
            if (-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&v) {
                v.clamp(0.0, 1.0)
            } else {
                // left as is so validation reports it
                v
            }
        })?;
        SimilarityLayer::new(labels, clipped, SimilarityKind::External)
    }
}
