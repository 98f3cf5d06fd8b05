//! Exact finite-state checks of the SIMCMC kernels.
//!
//! On a tabulated target sequence every object the sampler approximates can
//! be enumerated: the normalized targets, the normalizing constants, the
//! level-`n` independence kernels built from an arbitrary proposal
//! marginal `mu`, and the invariant distribution of those kernels.

mod discrete;
mod kernel;

pub use discrete::{flat_index, unflatten, DiscreteTargetSequence};
pub use kernel::{
    build_kernel_matrix, contraction_check, enumerate_exact, expected_acceptance, identity_check,
    independence_rate_bound, invariant_distribution, random_marginal, stationarity_residual, verify_instances,
    ContractionReport, ExactTables, KernelVerification,
};
