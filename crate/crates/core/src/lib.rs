//! Integration of multiplex similarity networks into a single monoplex.
//!
//! Layers are built with [`simbuild`], fused with [`snf`] or averaged with the
//! barycenters in [`sma`], and compared and clustered with [`netanalysis`].
//! [`pipeline`] ties these together for abundance tables on disk.

pub mod error;
pub mod fusion;
pub mod matcore;
pub mod netanalysis;
pub mod pipeline;
pub mod simbuild;
pub mod sma;
pub mod snf;

pub use error::{Error, Result};
pub use fusion::{FusionMethod, FusionResult};
pub use matcore::SymMatrix;
pub use simbuild::{Multiplex, SimilarityKind, SimilarityLayer};
