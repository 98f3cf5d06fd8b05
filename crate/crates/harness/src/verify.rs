//! Exact checks of the level kernels on random enumerable targets.

use std::time::Instant;

use serde::Serialize;
use simcmc::oracle::verify_instances;

use crate::config::config_hash;
use crate::error::{HarnessError, Result};
use crate::report::{CheckOutcome, RunReport, Timing};

/// Largest alphabet and horizon of the random instances.
pub const MAX_ALPHABET: usize = 4;
pub const MAX_HORIZON: usize = 3;
pub const TOLERANCE: f64 = 1e-12;

#[derive(Serialize)]
struct VerifyParams {
    instances: usize,
    seed: u64,
    max_alphabet: usize,
    max_horizon: usize,
}

fn at_most(name: &str, value: f64, max: f64) -> CheckOutcome {
    CheckOutcome {
        name: name.to_string(),
        passed: value <= max,
        skipped: false,
        detail: format!("{value:.3e} (max {max:.0e})"),
    }
}

pub fn verify_kernel(instances: usize, seed: u64) -> Result<RunReport> {
    if instances == 0 {
        return Err(HarnessError::config("instances", "must be at least 1"));
    }
    let start = Instant::now();
    let params = VerifyParams {
        instances,
        seed,
        max_alphabet: MAX_ALPHABET,
        max_horizon: MAX_HORIZON,
    };
    let k = verify_instances(instances, seed, MAX_ALPHABET, MAX_HORIZON)?;
    let mut report = RunReport::new("verify-kernel", "verify-kernel", config_hash(&params));
    report.checks = vec![
        at_most("kernel rows sum to one", k.max_row_sum_error, TOLERANCE),
        at_most("stationarity residual", k.max_stationarity_residual, TOLERANCE),
        at_most(
            "invariant law at the exact input equals the target",
            k.max_fixed_point_residual,
            TOLERANCE,
        ),
        at_most("normalizing-constant identity", k.max_identity_residual, TOLERANCE),
        at_most(
            "distance to stationarity within the analytic rate",
            k.max_bound_excess,
            TOLERANCE,
        ),
        CheckOutcome {
            name: "geometric contraction".into(),
            passed: k.all_monotone && k.max_rho_envelope < 1.0,
            skipped: false,
            detail: format!(
                "envelope rate {:.4}, fitted rate {:.4}, monotone {}",
                k.max_rho_envelope, k.max_rho_fit, k.all_monotone
            ),
        },
    ];
    report.kernel = Some(k);
    report.timing = Some(Timing {
        total_seconds: start.elapsed().as_secs_f64(),
        per_arm_seconds: vec![],
    });
    Ok(report)
}
