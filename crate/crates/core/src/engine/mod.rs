//! Model assembly, the per-chain sweep and multi-chain runs over a
//! temperature ladder.

mod config;
mod data;
mod plan;
mod sampler;

pub use config::{
    BetaHyper, FixedEffectPrior, GroupDef, InvGammaHyper, PiOverride, RunConfig, RunPlan, SamplerOptions,
    Sigma2Prior,
};
pub use data::{ColumnKind, GroupLayout, ModelData, Response, SingletonSlab};
pub use plan::{
    chain_stream, run, ChainArchive, ChainOutcome, ChainRecorder, MergeSource, RunOutcome, StoredState,
};
pub use sampler::{ChainSampler, SweepStats, MIP_STORE_THRESHOLD};
