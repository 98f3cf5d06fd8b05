//! Replicated log-likelihood experiments on a fixed dataset.

use std::time::Instant;

use simcmc::rng::{mix_seed, streams, substream, SimRng};
use simcmc::smc::run_smc;
use simcmc::ssm::{
    kalman_log_likelihood, prior_path, simulate, Filtering, Kitagawa, LinearGaussianOptimal, LinearGaussianSpec,
};
use simcmc::{Interaction, Model, Path, Simcmc, SimcmcConfig, StorageMode};

use crate::config::{Algorithm, Arm, Check, ExperimentConfig, ModelConfig, Proposal};
use crate::error::Result;
use crate::report::{Cell, CheckOutcome, RunReport, SignMassReport, Timing, Truth};
use crate::stats::{mean, rmse_to};

/// Per-block indicator of a positive state.
type SignFn<'a, B> = &'a dyn Fn(&B) -> f64;

/// What one replication produces.
struct Replicate {
    log_z: f64,
    acceptance: Option<Vec<f64>>,
    /// Per-level mass on positive states, when requested.
    positive: Option<Vec<f64>>,
}

fn positive_part(x: &f64) -> f64 {
    (*x > 0.0) as u8 as f64
}

fn run_one<M: Model>(
    model: &M,
    algorithm: Algorithm,
    samples: usize,
    seed: u64,
    burn_in: u64,
    init: &dyn Fn(&mut SimRng) -> Path<M::Block>,
    sign: Option<SignFn<'_, M::Block>>,
) -> Result<Replicate> {
    let horizon = model.horizon();
    match algorithm {
        Algorithm::Smc => {
            let mut positive = sign.map(|_| Vec::with_capacity(horizon));
            let fin = run_smc(model, samples, StorageMode::Auto, seed, |pop| {
                if let (Some(out), Some(f)) = (positive.as_mut(), sign) {
                    out.push(pop.expectation(f));
                }
            })?;
            Ok(Replicate {
                log_z: fin.log_likelihood(),
                acceptance: None,
                positive,
            })
        }
        Algorithm::Simcmc | Algorithm::SimcmcParallel => {
            let cfg = SimcmcConfig {
                seed,
                burn_in,
                interaction: if algorithm == Algorithm::Simcmc {
                    Interaction::Sequential
                } else {
                    Interaction::ParallelLagged
                },
                ..SimcmcConfig::default()
            };
            let mut rng = substream(seed, streams::INITIAL_PATH);
            let mut s = Simcmc::nested(model, cfg, init(&mut rng))?;
            s.run(samples as u64);
            let positive = match sign {
                Some(f) => Some(
                    (1..=horizon)
                        .map(|n| s.expectation(n, f))
                        .collect::<simcmc::Result<Vec<_>>>()?,
                ),
                None => None,
            };
            Ok(Replicate {
                log_z: s.norm_const_estimates()?.log_normalizer[horizon - 1],
                acceptance: Some(s.acceptance_rates()?),
                positive,
            })
        }
    }
}

/// Runs every arm at every sample size and scores it against the truth.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let mut report = RunReport::new(&config.name, "run-experiment", crate::config::config_hash(config));
    let mut per_arm = Vec::new();
    let mut reference_positive = None;
    let mut arm_positive = None;

    match &config.model {
        ModelConfig::LinearGaussian {
            dim,
            sigma_v,
            sigma_w,
            horizon,
            matrix_seed,
            data_seed,
        } => {
            let spec = LinearGaussianSpec::random(*dim, *sigma_v, *sigma_w, *matrix_seed)?;
            let data = simulate(&spec, *horizon, *data_seed);
            let ys: Vec<Vec<f64>> = data
                .observations
                .iter()
                .cloned()
                .map(|y| y.expect("complete"))
                .collect();
            let truth = kalman_log_likelihood(&spec, &ys)?;
            report.truth = Some(Truth {
                source: "kalman".into(),
                log_likelihood: truth,
            });
            let prior = Filtering::new(spec.clone(), data.observations.clone());
            let optimal = LinearGaussianOptimal::new(spec.clone(), ys);
            let init = |rng: &mut SimRng| prior_path(&spec, *horizon, rng);
            for (a, arm) in config.arms.iter().enumerate() {
                let t0 = Instant::now();
                for &n in &config.sample_sizes {
                    let cell = match arm.proposal {
                        Proposal::Prior => replicate_cell(config, a, arm, n, truth, &prior, &init, None)?,
                        Proposal::Optimal => replicate_cell(config, a, arm, n, truth, &optimal, &init, None)?,
                    };
                    report.cells.push(cell.0);
                }
                per_arm.push((arm.label(), t0.elapsed().as_secs_f64()));
            }
        }
        ModelConfig::Kitagawa {
            sigma_v2,
            sigma_w2,
            horizon,
            data_seed,
        } => {
            let ssm = Kitagawa::new(*sigma_v2, *sigma_w2);
            let data = simulate(&ssm, *horizon, *data_seed);
            let model = Filtering::new(ssm.clone(), data.observations);
            let reference = config.reference.as_ref().expect("validated");
            let t0 = Instant::now();
            let mut ref_positive = Vec::with_capacity(*horizon);
            let fin = run_smc(&model, reference.particles, StorageMode::Auto, reference.seed, |pop| {
                ref_positive.push(pop.expectation(positive_part));
            })?;
            per_arm.push(("reference".to_string(), t0.elapsed().as_secs_f64()));
            let truth = fin.log_likelihood();
            report.truth = Some(Truth {
                source: "smc-reference".into(),
                log_likelihood: truth,
            });
            reference_positive = Some(ref_positive);
            let init = |rng: &mut SimRng| prior_path(&ssm, *horizon, rng);
            for (a, arm) in config.arms.iter().enumerate() {
                let t0 = Instant::now();
                for &n in &config.sample_sizes {
                    let wanted = config
                        .sign_mass
                        .as_ref()
                        .is_some_and(|s| s.arm == arm.label() && s.samples == n);
                    let sign: Option<&dyn Fn(&f64) -> f64> = if wanted { Some(&positive_part) } else { None };
                    let (cell, positive) = replicate_cell(config, a, arm, n, truth, &model, &init, sign)?;
                    if wanted {
                        arm_positive = positive;
                    }
                    report.cells.push(cell);
                }
                per_arm.push((arm.label(), t0.elapsed().as_secs_f64()));
            }
        }
    }

    if let (Some(cfg), Some(reference), Some(arm)) = (&config.sign_mass, reference_positive, arm_positive) {
        let bimodal_times: Vec<usize> = reference
            .iter()
            .enumerate()
            .filter(|(_, p)| p.min(1.0 - **p) >= cfg.reference_min)
            .map(|(i, _)| i + 1)
            .collect();
        let worst = bimodal_times
            .iter()
            .map(|&t| arm[t - 1].min(1.0 - arm[t - 1]))
            .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.min(m))));
        report.sign_mass = Some(SignMassReport {
            arm: cfg.arm.clone(),
            samples: cfg.samples,
            reference_positive: reference,
            arm_positive: arm,
            bimodal_times,
            worst_minority_mass: worst,
        });
    }

    report.checks = config.checks.iter().map(|c| evaluate(c, config, &report)).collect();
    report.timing = Some(Timing {
        total_seconds: start.elapsed().as_secs_f64(),
        per_arm_seconds: per_arm,
    });
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn replicate_cell<M: Model>(
    config: &ExperimentConfig,
    arm_index: usize,
    arm: &Arm,
    samples: usize,
    truth: f64,
    model: &M,
    init: &dyn Fn(&mut SimRng) -> Path<M::Block>,
    sign: Option<SignFn<'_, M::Block>>,
) -> Result<(Cell, Option<Vec<f64>>)> {
    let mut estimates = Vec::with_capacity(config.replications);
    let mut acceptance: Option<Vec<f64>> = None;
    let mut positive: Option<Vec<f64>> = None;
    for r in 0..config.replications {
        let seed = mix_seed(config.seed, &[arm_index as u64, samples as u64, r as u64]);
        let rep = run_one(model, arm.algorithm, samples, seed, config.burn_in, init, sign)?;
        estimates.push(rep.log_z);
        accumulate(&mut acceptance, rep.acceptance);
        accumulate(&mut positive, rep.positive);
    }
    let reps = config.replications as f64;
    let scale = |v: Option<Vec<f64>>| v.map(|v| v.into_iter().map(|x| x / reps).collect::<Vec<f64>>());
    let cell = Cell {
        arm: arm.label(),
        samples,
        rmse: rmse_to(&estimates, truth)?,
        mean_estimate: mean(&estimates),
        estimates,
        acceptance: scale(acceptance),
    };
    Ok((cell, scale(positive)))
}

fn accumulate(total: &mut Option<Vec<f64>>, add: Option<Vec<f64>>) {
    if let Some(add) = add {
        match total {
            Some(t) => t.iter_mut().zip(add).for_each(|(a, b)| *a += b),
            None => *total = Some(add),
        }
    }
}

fn evaluate(check: &Check, config: &ExperimentConfig, report: &RunReport) -> CheckOutcome {
    let rmse = |arm: &str, n: usize| report.cell(arm, n).map(|c| c.rmse).unwrap_or(f64::NAN);
    match check {
        Check::RmseAtMost { arm, samples, max } => {
            let v = rmse(arm, *samples);
            CheckOutcome {
                name: format!("rmse {arm} N={samples} <= {max}"),
                passed: v <= *max,
                skipped: false,
                detail: format!("rmse {v:.4}"),
            }
        }
        Check::RmseBetween { arm, samples, min, max } => {
            let v = rmse(arm, *samples);
            CheckOutcome {
                name: format!("rmse {arm} N={samples} in [{min}, {max}]"),
                passed: *min <= v && v <= *max,
                skipped: false,
                detail: format!("rmse {v:.4}"),
            }
        }
        Check::RmseDecreases { arm, from, to } => {
            let (a, b) = (rmse(arm, *from), rmse(arm, *to));
            CheckOutcome {
                name: format!("rmse {arm} N={to} < N={from}"),
                passed: b < a,
                skipped: false,
                detail: format!("{a:.4} -> {b:.4}"),
            }
        }
        Check::SignMassPreserved => {
            let cfg = config.sign_mass.as_ref().expect("validated");
            match &report.sign_mass {
                Some(s) if s.bimodal_times.is_empty() => CheckOutcome {
                    name: "sign bimodality preserved".into(),
                    passed: true,
                    skipped: true,
                    detail: "reference is never bimodal".into(),
                },
                Some(s) => {
                    let worst = s.worst_minority_mass.unwrap_or(f64::NAN);
                    CheckOutcome {
                        name: "sign bimodality preserved".into(),
                        passed: worst >= cfg.min_mass,
                        skipped: false,
                        detail: format!(
                            "{} bimodal times, worst minority mass {worst:.3} (need {})",
                            s.bimodal_times.len(),
                            cfg.min_mass
                        ),
                    }
                }
                None => CheckOutcome {
                    name: "sign bimodality preserved".into(),
                    passed: false,
                    skipped: false,
                    detail: "no sign-mass data".into(),
                },
            }
        }
    }
}
