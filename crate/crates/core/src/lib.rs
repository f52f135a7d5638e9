//! Sparse spike-and-slab Gibbs sampling for linear and binary regression.
//!
//! Fixed effects use a collapsed inclusion draw per coordinate followed by a
//! joint Gaussian draw over the active set. Grouped effects share a slab
//! variance that is switched on and off with an envelope-based two-state
//! chain. Draws are streamed to compact sparse chain files, and an optional
//! equi-energy ladder mixes across tempered replicas.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dist;
pub mod engine;
pub mod error;
pub mod fixed;
pub mod group;
pub mod harness;
pub mod model;
pub mod noise;
pub mod slice;
pub mod store;
pub mod tempering;

pub use error::{Error, Result};
pub use group::{GroupEigen, GroupTauPrior, SwitchEnvelope};
pub use model::{ActiveSet, DesignMatrix, ObservationWeights, ResidCorrelation, XtXCache};

pub use engine::{ModelData, Response, RunConfig, RunOutcome};
pub use noise::NoiseKind;
pub use store::{SparseChainReader, SparseChainRecord, SparseChainWriter};
