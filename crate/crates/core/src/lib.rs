//! Sequentially interacting Markov chain Monte Carlo.
//!
//! A sequence of unnormalized targets `gamma_1, ..., gamma_P` over paths of
//! growing length is sampled by `P` interacting independence samplers. The
//! crate also provides a particle filter baseline, the benchmark
//! state-space models and exact finite-state checks of the sampler kernels.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod oracle;
pub mod path;
pub mod rng;
pub mod sampler;
pub mod serde_ext;
pub mod smc;
pub mod ssm;
pub mod target;

pub use error::{Error, Result};
pub use path::Path;
pub use sampler::{
    AccrualStop, Checkpoint, Interaction, NormConstEstimates, Simcmc, SimcmcConfig, Storage, StorageMode,
};
pub use smc::{run_smc, stratified_resample, ParticlePopulation};
pub use target::{acceptance_ratio, Model, ProposalFamily, TargetSequence, WeightBoundDiagnostic};
