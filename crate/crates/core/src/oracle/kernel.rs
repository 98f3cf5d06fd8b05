use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::discrete::DiscreteTargetSequence;
use crate::error::{Error, Result};
use crate::rng::substream;

/// Exact normalized targets of a tabulated sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactTables {
    /// `pi[n-1]` over the flattened level-`n` paths.
    pub pi: Vec<Vec<f64>>,
    /// `z[n-1] = Z_n`.
    pub z: Vec<f64>,
    /// `pi_ratio[n-1][prefix] = pi_n(x_{1:n-1}) / pi_{n-1}(x_{1:n-1})` for `n >= 2`;
    /// empty at level 1. Zero where both marginals vanish.
    pub pi_ratio: Vec<Vec<f64>>,
    /// `pi_cond[n-1][index] = pi_n(x_{1:n}) / pi_n(x_{1:n-1})`, the conditional of
    /// the last block under `pi_n`; zero where the marginal vanishes.
    pub pi_cond: Vec<Vec<f64>>,
}

pub fn enumerate_exact(dts: &DiscreteTargetSequence) -> Result<ExactTables> {
    let k = dts.alphabet();
    let horizon = crate::target::TargetSequence::horizon(dts);
    let mut pi = Vec::with_capacity(horizon);
    let mut z = Vec::with_capacity(horizon);
    let mut pi_ratio = Vec::with_capacity(horizon);
    let mut pi_cond = Vec::with_capacity(horizon);
    for n in 1..=horizon {
        let g = dts.gamma_table(n);
        let zn: f64 = g.iter().sum();
        if !(zn > 0.0) {
            return Err(Error::ZeroMass { level: n });
        }
        let p: Vec<f64> = g.iter().map(|v| v / zn).collect();
        let marginal: Vec<f64> = p.chunks(k).map(|row| row.iter().sum()).collect();
        let cond: Vec<f64> = p
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                let m = marginal[j / k];
                if m > 0.0 {
                    v / m
                } else {
                    0.0
                }
            })
            .collect();
        let ratio = if n == 1 {
            Vec::new()
        } else {
            let prev: &Vec<f64> = &pi[n - 2];
            marginal
                .iter()
                .zip(prev)
                .enumerate()
                .map(|(j, (&m, &pp))| {
                    if pp > 0.0 {
                        Ok(m / pp)
                    } else if m == 0.0 {
                        Ok(0.0)
                    } else {
                        Err(Error::InvalidArgument(format!(
                            "level {n}: prefix {j} has mass under pi_n but not pi_{}",
                            n - 1
                        )))
                    }
                })
                .collect::<Result<Vec<f64>>>()?
        };
        pi.push(p);
        z.push(zn);
        pi_ratio.push(ratio);
        pi_cond.push(cond);
    }
    Ok(ExactTables {
        pi,
        z,
        pi_ratio,
        pi_cond,
    })
}

fn check_marginal(dts: &DiscreteTargetSequence, n: usize, mu: &[f64]) -> Result<()> {
    let size = dts.alphabet().pow((n - 1) as u32);
    if mu.len() != size {
        return Err(Error::InvalidArgument(format!(
            "mu must have {size} entries at level {n}"
        )));
    }
    if mu.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument("mu must be nonnegative".into()));
    }
    let s: f64 = mu.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::BadWeights { sum: s });
    }
    let prev = dts.gamma_table(n - 1);
    if mu.iter().zip(prev).any(|(&m, &g)| m > 0.0 && g == 0.0) {
        return Err(Error::InvalidArgument(format!(
            "mu puts mass outside the level-{} support",
            n - 1
        )));
    }
    Ok(())
}

/// Proposal mass `(mu x q_n)(y)` (or `q_1(y)`) over the level-`n` paths.
fn proposal_mass(dts: &DiscreteTargetSequence, n: usize, mu: Option<&[f64]>) -> Vec<f64> {
    let k = dts.alphabet();
    let q = dts.proposal_table(n);
    match (n, mu) {
        (1, _) => q.to_vec(),
        (_, Some(mu)) => q.iter().enumerate().map(|(j, &qv)| mu[j / k] * qv).collect(),
        (_, None) => unreachable!("checked by caller"),
    }
}

fn alpha(w_from: f64, w_to: f64) -> f64 {
    if w_from == 0.0 {
        1.0
    } else {
        (w_to / w_from).min(1.0)
    }
}

/// The level-`n` kernel as a row-stochastic matrix over flattened paths.
///
/// Level 1 is the independence sampler with proposal `q_1`; for `n >= 2` the
/// proposal is `mu x q_n` and `mu` is required.
pub fn build_kernel_matrix(dts: &DiscreteTargetSequence, n: usize, mu: Option<&[f64]>) -> Result<DMatrix<f64>> {
    let horizon = crate::target::TargetSequence::horizon(dts);
    if n == 0 || n > horizon {
        return Err(Error::LevelOutOfRange { level: n, horizon });
    }
    if n >= 2 {
        let mu = mu.ok_or_else(|| Error::InvalidArgument("levels >= 2 need mu".into()))?;
        check_marginal(dts, n, mu)?;
    }
    let r = proposal_mass(dts, n, mu);
    let size = r.len();
    let w: Vec<f64> = (0..size).map(|j| dts.weight_at(n, j)).collect();
    let mut kmat = DMatrix::<f64>::zeros(size, size);
    for x in 0..size {
        // rejection mass summed term by term so it stays non-negative
        let mut rejected = 0.0;
        for y in 0..size {
            let a = alpha(w[x], w[y]);
            kmat[(x, y)] = a * r[y];
            rejected += (1.0 - a) * r[y];
        }
        kmat[(x, x)] += rejected;
    }
    Ok(kmat)
}

/// `omega_n(mu) = pi_{n/n-1} (mu x pibar_n) / mu(pi_{n/n-1})`, or `pi_1` at level 1.
pub fn invariant_distribution(tables: &ExactTables, k: usize, n: usize, mu: Option<&[f64]>) -> Result<Vec<f64>> {
    if n == 1 {
        return Ok(tables.pi[0].clone());
    }
    let mu = mu.ok_or_else(|| Error::InvalidArgument("levels >= 2 need mu".into()))?;
    let ratio = &tables.pi_ratio[n - 1];
    let cond = &tables.pi_cond[n - 1];
    let norm: f64 = mu.iter().zip(ratio).map(|(m, r)| m * r).sum();
    if !(norm > 0.0) {
        return Err(Error::ZeroMass { level: n });
    }
    Ok(cond
        .iter()
        .enumerate()
        .map(|(j, &c)| ratio[j / k] * mu[j / k] * c / norm)
        .collect())
}

/// `max_j |(omega K)_j - omega_j|`.
pub fn stationarity_residual(kernel: &DMatrix<f64>, omega: &[f64]) -> f64 {
    let size = omega.len();
    (0..size)
        .map(|j| {
            let s: f64 = (0..size).map(|i| omega[i] * kernel[(i, j)]).sum();
            (s - omega[j]).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    /// `tv[m-1] = max_x || K^m(x, .) - omega ||_tv` for `m = 1..`.
    pub tv: Vec<f64>,
    /// Least-squares geometric rate fitted to `log tv`.
    pub rho_fit: f64,
    /// Smallest `rho` with `tv(m) <= tv(1) rho^(m-1)` on the resolvable range.
    pub rho_envelope: f64,
    /// `tv` never increases.
    pub monotone: bool,
}

/// Distances below this are indistinguishable from rounding.
const TV_FLOOR: f64 = 1e-13;

/// Total-variation distances of `K^m` from `omega`, maximized over start states.
pub fn contraction_check(kernel: &DMatrix<f64>, omega: &[f64], max_steps: usize) -> ContractionReport {
    let size = omega.len();
    let mut power = kernel.clone();
    let mut tv = Vec::with_capacity(max_steps);
    for m in 1..=max_steps {
        if m > 1 {
            power = &power * kernel;
        }
        let worst = (0..size)
            .map(|x| 0.5 * (0..size).map(|y| (power[(x, y)] - omega[y]).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        tv.push(worst);
    }
    let monotone = tv.windows(2).all(|p| p[1] <= p[0] + 1e-14);

    let resolvable: Vec<(f64, f64)> = tv
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > TV_FLOOR)
        .map(|(i, &d)| ((i + 1) as f64, d.ln()))
        .collect();
    let rho_fit = if resolvable.len() < 2 {
        0.0
    } else {
        let nf = resolvable.len() as f64;
        let mx = resolvable.iter().map(|p| p.0).sum::<f64>() / nf;
        let my = resolvable.iter().map(|p| p.1).sum::<f64>() / nf;
        let sxy: f64 = resolvable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = resolvable.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxy / sxx).exp()
    };
    let rho_envelope = if tv[0] <= TV_FLOOR {
        0.0
    } else {
        tv.iter()
            .enumerate()
            .skip(1)
            .filter(|(_, &d)| d > TV_FLOOR)
            .map(|(i, &d)| (d / tv[0]).powf(1.0 / i as f64))
            .fold(0.0, f64::max)
    };
    ContractionReport {
        tv,
        rho_fit,
        rho_envelope,
        monotone,
    }
}

/// Uniform ergodicity rate of an independence sampler:
/// `1 - (mu x q)(w) / sup w`, which bounds `tv(m) <= rate^m`.
pub fn independence_rate_bound(dts: &DiscreteTargetSequence, n: usize, mu: Option<&[f64]>) -> f64 {
    let r = proposal_mass(dts, n, mu);
    let w: Vec<f64> = (0..r.len()).map(|j| dts.weight_at(n, j)).collect();
    let mean: f64 = r.iter().zip(&w).map(|(a, b)| a * b).sum();
    let sup = r
        .iter()
        .zip(&w)
        .filter(|(&a, _)| a > 0.0)
        .map(|(_, &b)| b)
        .fold(0.0, f64::max);
    1.0 - mean / sup
}

/// `|Z_n / Z_{n-1} - sum w_n (pi_{n-1} x q_n)|` per level (with `Z_0 = 1`).
pub fn identity_check(dts: &DiscreteTargetSequence) -> Result<Vec<f64>> {
    let tables = enumerate_exact(dts)?;
    let k = dts.alphabet();
    let horizon = tables.z.len();
    Ok((1..=horizon)
        .map(|n| {
            let lhs = if n == 1 {
                tables.z[0]
            } else {
                tables.z[n - 1] / tables.z[n - 2]
            };
            let q = dts.proposal_table(n);
            let rhs: f64 = (0..q.len())
                .map(|j| {
                    let base = if n == 1 { 1.0 } else { tables.pi[n - 2][j / k] };
                    if base == 0.0 {
                        0.0
                    } else {
                        dts.weight_at(n, j) * base * q[j]
                    }
                })
                .sum();
            (lhs - rhs).abs()
        })
        .collect())
}

/// Stationary acceptance probability of the level-`n` chain when its proposal
/// marginal has converged: `E_{x ~ pi_n, y ~ pi_{n-1} x q_n} alpha(x, y)`.
pub fn expected_acceptance(dts: &DiscreteTargetSequence, tables: &ExactTables, n: usize) -> f64 {
    let mu = if n == 1 {
        None
    } else {
        Some(tables.pi[n - 2].as_slice())
    };
    let r = proposal_mass(dts, n, mu);
    let w: Vec<f64> = (0..r.len()).map(|j| dts.weight_at(n, j)).collect();
    let pi = &tables.pi[n - 1];
    (0..r.len())
        .filter(|&x| pi[x] > 0.0)
        .map(|x| pi[x] * (0..r.len()).map(|y| r[y] * alpha(w[x], w[y])).sum::<f64>())
        .sum()
}

/// A random pmf over level-`n-1` paths supported inside `S_{n-1}`.
pub fn random_marginal<R: Rng + ?Sized>(dts: &DiscreteTargetSequence, n: usize, rng: &mut R) -> Vec<f64> {
    let prev = dts.gamma_table(n - 1);
    let mut mu: Vec<f64> = prev
        .iter()
        .map(|&g| if g > 0.0 { rng.random_range(0.01..1.0) } else { 0.0 })
        .collect();
    let s: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|v| *v /= s);
    mu
}

/// Summary of the randomized kernel verification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelVerification {
    pub instances: usize,
    pub kernels_checked: usize,
    pub max_row_sum_error: f64,
    pub max_stationarity_residual: f64,
    pub max_fixed_point_residual: f64,
    pub max_identity_residual: f64,
    pub max_rho_fit: f64,
    pub max_rho_envelope: f64,
    /// Largest excess of `tv(m)` over the analytic bound `rate^m`.
    pub max_bound_excess: f64,
    pub all_monotone: bool,
}

/// Runs every exact check on `instances` random tabulated sequences with
/// alphabet size in `2..=max_k` and horizon in `2..=max_horizon`.
pub fn verify_instances(instances: usize, seed: u64, max_k: usize, max_horizon: usize) -> Result<KernelVerification> {
    let mut rng = substream(seed, 0);
    let mut out = KernelVerification {
        instances,
        kernels_checked: 0,
        max_row_sum_error: 0.0,
        max_stationarity_residual: 0.0,
        max_fixed_point_residual: 0.0,
        max_identity_residual: 0.0,
        max_rho_fit: 0.0,
        max_rho_envelope: 0.0,
        max_bound_excess: f64::NEG_INFINITY,
        all_monotone: true,
    };
    for inst in 0..instances {
        let k = rng.random_range(2..=max_k.max(2));
        let horizon = rng.random_range(2..=max_horizon.max(2));
        // every other instance carries zero-mass cells
        let zero_prob = if inst % 2 == 0 { 0.0 } else { 0.2 };
        let dts = DiscreteTargetSequence::random(k, horizon, zero_prob, &mut rng);
        let tables = enumerate_exact(&dts)?;
        for r in identity_check(&dts)? {
            out.max_identity_residual = out.max_identity_residual.max(r);
        }
        for n in 1..=horizon {
            let mu = (n >= 2).then(|| random_marginal(&dts, n, &mut rng));
            let kmat = build_kernel_matrix(&dts, n, mu.as_deref())?;
            for row in kmat.row_iter() {
                out.max_row_sum_error = out.max_row_sum_error.max((row.sum() - 1.0).abs());
            }
            let omega = invariant_distribution(&tables, k, n, mu.as_deref())?;
            out.max_stationarity_residual = out.max_stationarity_residual.max(stationarity_residual(&kmat, &omega));
            let report = contraction_check(&kmat, &omega, 20);
            out.all_monotone &= report.monotone;
            out.max_rho_fit = out.max_rho_fit.max(report.rho_fit);
            out.max_rho_envelope = out.max_rho_envelope.max(report.rho_envelope);
            let rate = independence_rate_bound(&dts, n, mu.as_deref());
            for (i, &d) in report.tv.iter().enumerate() {
                out.max_bound_excess = out.max_bound_excess.max(d - rate.powi(i as i32 + 1));
            }
            out.kernels_checked += 1;

            if n >= 2 {
                let exact_prev = tables.pi[n - 2].as_slice();
                let kmat = build_kernel_matrix(&dts, n, Some(exact_prev))?;
                let omega = invariant_distribution(&tables, k, n, Some(exact_prev))?;
                let fixed = omega
                    .iter()
                    .zip(&tables.pi[n - 1])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                out.max_fixed_point_residual = out.max_fixed_point_residual.max(fixed);
                out.max_stationarity_residual = out.max_stationarity_residual.max(stationarity_residual(&kmat, &omega));
                out.kernels_checked += 1;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> DiscreteTargetSequence {
        DiscreteTargetSequence::new(
            2,
            vec![vec![0.3, 0.7], vec![0.2, 0.5, 0.9, 0.1]],
            vec![vec![0.4, 0.6], vec![0.25, 0.75, 0.5, 0.5]],
        )
        .unwrap()
    }

    #[test]
    fn flat_sequence_tables() {
        let d = DiscreteTargetSequence::flat(3, 3);
        let t = enumerate_exact(&d).unwrap();
        assert_eq!(t.z, vec![3.0, 9.0, 27.0]);
        assert!(t.pi[2].iter().all(|&p| (p - 1.0 / 27.0).abs() < 1e-15));
        for n in 2..=3 {
            assert!(t.pi_ratio[n - 1].iter().all(|&r| (r - 1.0).abs() < 1e-12));
        }
        for r in identity_check(&d).unwrap() {
            assert!(r < 1e-12);
        }
    }

    #[test]
    fn two_state_normalizer_is_sum_over_paths() {
        let t = enumerate_exact(&two_state()).unwrap();
        assert!((t.z[1] - (0.2 + 0.5 + 0.9 + 0.1)).abs() < 1e-15);
        assert!((t.z[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn matched_proposal_gives_identical_rows() {
        // gamma_1 = q_1 and gamma_2 = gamma_1 q_2: all weights equal one
        let q1 = vec![0.3, 0.7];
        let q2 = vec![0.2, 0.8, 0.6, 0.4];
        let g2: Vec<f64> = (0..4).map(|j| q1[j / 2] * q2[j]).collect();
        let d = DiscreteTargetSequence::new(2, vec![q1.clone(), g2], vec![q1.clone(), q2]).unwrap();
        let t = enumerate_exact(&d).unwrap();
        let kmat = build_kernel_matrix(&d, 2, Some(&t.pi[0])).unwrap();
        for x in 1..4 {
            for y in 0..4 {
                assert!((kmat[(x, y)] - kmat[(0, y)]).abs() < 1e-15);
            }
        }
        let omega = invariant_distribution(&t, 2, 2, Some(&t.pi[0])).unwrap();
        let report = contraction_check(&kmat, &omega, 5);
        assert!(report.tv[0] < 1e-15);
    }

    #[test]
    fn rows_sum_to_one_on_random_instances() {
        for seed in 0..100 {
            let mut rng = substream(seed, 7);
            let d = DiscreteTargetSequence::random(3, 3, 0.15, &mut rng);
            for n in 1..=3 {
                let mu = (n >= 2).then(|| random_marginal(&d, n, &mut rng));
                let kmat = build_kernel_matrix(&d, n, mu.as_deref()).unwrap();
                for row in kmat.row_iter() {
                    assert!((row.sum() - 1.0).abs() < 1e-12);
                    assert!(row.iter().all(|&v| v >= 0.0));
                }
            }
        }
    }

    #[test]
    fn omega_is_stationary_and_fixed_point_holds() {
        let mut rng = substream(11, 1);
        let d = DiscreteTargetSequence::random(4, 3, 0.1, &mut rng);
        let t = enumerate_exact(&d).unwrap();
        for n in 2..=3 {
            let mu = random_marginal(&d, n, &mut rng);
            let kmat = build_kernel_matrix(&d, n, Some(&mu)).unwrap();
            let omega = invariant_distribution(&t, 4, n, Some(&mu)).unwrap();
            assert!(stationarity_residual(&kmat, &omega) < 1e-12);
            let omega_exact = invariant_distribution(&t, 4, n, Some(&t.pi[n - 2])).unwrap();
            for (a, b) in omega_exact.iter().zip(&t.pi[n - 1]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn geometric_envelope_below_one() {
        let mut rng = substream(5, 2);
        let d = DiscreteTargetSequence::random(3, 2, 0.0, &mut rng);
        let t = enumerate_exact(&d).unwrap();
        let mu = random_marginal(&d, 2, &mut rng);
        let kmat = build_kernel_matrix(&d, 2, Some(&mu)).unwrap();
        let omega = invariant_distribution(&t, 3, 2, Some(&mu)).unwrap();
        let report = contraction_check(&kmat, &omega, 20);
        assert!(report.monotone);
        assert!(report.rho_fit < 1.0 && report.rho_envelope < 1.0);
        for (i, &d) in report.tv.iter().enumerate().skip(1) {
            assert!(d <= report.tv[0] * report.rho_envelope.powi(i as i32) + 1e-15);
        }
        let rate = independence_rate_bound(&d, 2, Some(&mu));
        for (i, &dist) in report.tv.iter().enumerate() {
            assert!(dist <= rate.powi(i as i32 + 1) + 1e-12);
        }
    }

    #[test]
    fn identity_holds_with_zero_cells() {
        let d = DiscreteTargetSequence::new(
            2,
            vec![
                vec![1.0, 0.0],
                vec![0.4, 0.0, 0.0, 0.0],
                vec![0.1, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            ],
            vec![vec![0.5, 0.5], vec![0.5; 4], vec![0.5; 8]],
        )
        .unwrap();
        for r in identity_check(&d).unwrap() {
            assert!(r < 1e-12);
        }
        let mut rng = substream(1, 1);
        for _ in 0..20 {
            let d = DiscreteTargetSequence::random(3, 3, 0.3, &mut rng);
            for r in identity_check(&d).unwrap() {
                assert!(r < 1e-12);
            }
        }
    }

    #[test]
    fn mu_outside_support_rejected() {
        let d = DiscreteTargetSequence::new(
            2,
            vec![vec![1.0, 0.0], vec![1.0, 1.0, 0.0, 0.0]],
            vec![vec![0.5, 0.5], vec![0.5; 4]],
        )
        .unwrap();
        assert!(build_kernel_matrix(&d, 2, Some(&[0.5, 0.5])).is_err());
        assert!(build_kernel_matrix(&d, 2, Some(&[1.0, 0.0])).is_ok());
        assert!(build_kernel_matrix(&d, 2, None).is_err());
    }
}
