//! Design matrix, observation weights and the cross-product caches that the
//! samplers read from.

mod active;
mod cache;
mod design;
pub mod io;
mod resid;

pub use active::ActiveSet;
pub use cache::XtXCache;
pub use design::{DesignMatrix, ObservationWeights};
pub use resid::ResidCorrelation;
