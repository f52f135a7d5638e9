//! Grouped effects: a shared slab variance per group that is switched on and
//! off by a two-state chain built from inverse-gamma envelopes of the
//! collapsed group density f2.

mod density;
mod eigen;
mod envelope;
mod switch;
mod transform;

pub use density::{f2_eval, find_mode, GroupDensity, GroupTauPrior, ModeResult};
pub use eigen::{group_eigen_reduce, GroupEigen};
pub use envelope::{build_envelope, EnvelopeOptions, InvGammaDensity, SwitchEnvelope};
pub use switch::{switch_step, SwitchState, SwitchStep};
pub use transform::ZeroSumTransform;
