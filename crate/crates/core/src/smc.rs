//! Sequential Monte Carlo with stratified resampling at every step.

use rand::Rng;

use crate::error::{Error, Result};
use crate::path::Path;
use crate::rng::{streams, substream};
use crate::sampler::{Storage, StorageMode};
use crate::target::Model;

/// A weighted particle population at one level.
#[derive(Clone, Debug)]
pub struct ParticlePopulation<B> {
    level: usize,
    particles: Vec<Path<B>>,
    weights: Vec<f64>,
    log_likelihood: f64,
}

impl<B: Clone> ParticlePopulation<B> {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn particles(&self) -> &[Path<B>] {
        &self.particles
    }

    /// Normalized weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Running `log Zhat_n`.
    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Weighted average of `f(x_n)`.
    pub fn expectation<F: Fn(&B) -> f64>(&self, f: F) -> f64 {
        self.particles
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p.last()))
            .sum()
    }

    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }
}

/// Extends every particle with `q_n` and reweights by `w_n`.
///
/// The log-likelihood increment is the log of the mean unnormalized weight
/// under the incoming (normalized) weights. Fails with `Degenerate` when all
/// new weights vanish.
pub fn propagate<M: Model, R: Rng + ?Sized>(
    model: &M,
    previous: Option<&ParticlePopulation<M::Block>>,
    n_particles: usize,
    storage: Storage,
    rng: &mut R,
) -> Result<ParticlePopulation<M::Block>> {
    if n_particles == 0 {
        return Err(Error::InvalidArgument("need at least one particle".into()));
    }
    let level = previous.map_or(1, |p| p.level + 1);
    if level > model.horizon() {
        return Err(Error::LevelOutOfRange {
            level,
            horizon: model.horizon(),
        });
    }
    let mut particles = Vec::with_capacity(n_particles);
    let mut log_w = Vec::with_capacity(n_particles);
    let mut prior_w = Vec::with_capacity(n_particles);
    match previous {
        None => {
            for _ in 0..n_particles {
                let p = Path::root(model.sample(1, None, rng));
                log_w.push(model.log_weight(&p));
                particles.push(p);
                prior_w.push(1.0 / n_particles as f64);
            }
        }
        Some(prev) => {
            if prev.len() != n_particles {
                return Err(Error::InvalidArgument(format!(
                    "population size changed from {} to {n_particles}",
                    prev.len()
                )));
            }
            for (parent, &w) in prev.particles.iter().zip(&prev.weights) {
                let base = match storage {
                    Storage::FullPath => parent.clone(),
                    Storage::MarginalOnly => parent.detach(),
                };
                let x = model.sample(level, Some(&base), rng);
                let p = base.extend(x);
                log_w.push(model.log_weight(&p));
                particles.push(p);
                prior_w.push(w);
            }
        }
    }
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > f64::NEG_INFINITY) || max.is_nan() {
        return Err(Error::Degenerate { level });
    }
    let unnorm: Vec<f64> = log_w.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = unnorm.iter().zip(&prior_w).map(|(u, w)| u * w).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Degenerate { level });
    }
    let weights = unnorm.iter().zip(&prior_w).map(|(u, w)| u * w / total).collect();
    let base_ll = previous.map_or(0.0, |p| p.log_likelihood);
    Ok(ParticlePopulation {
        level,
        particles,
        weights,
        log_likelihood: base_ll + max + total.ln(),
    })
}

/// Stratified resampling: `u_k = (k + U_k) / N` with independent uniforms,
/// inverted through the cumulative weights.
///
/// Weights must be finite, non-negative and sum to one within `1e-9`.
pub fn stratified_resample<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one draw".into()));
    }
    let sum: f64 = weights.iter().sum();
    if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::BadWeights { sum });
    }
    let last_positive = weights
        .iter()
        .rposition(|&w| w > 0.0)
        .ok_or(Error::BadWeights { sum })?;
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    let mut cum = weights[0];
    for k in 0..n {
        let u = (k as f64 + rng.random::<f64>()) / n as f64;
        while (u >= cum || weights[j] == 0.0) && j < last_positive {
            j += 1;
            cum += weights[j];
        }
        out.push(j);
    }
    Ok(out)
}

/// Stratified resampling of a population to equal weights.
pub fn resample<B: Clone, R: Rng + ?Sized>(
    population: &ParticlePopulation<B>,
    rng: &mut R,
) -> Result<ParticlePopulation<B>> {
    let n = population.len();
    let idx = stratified_resample(&population.weights, n, rng)?;
    Ok(ParticlePopulation {
        level: population.level,
        particles: idx.into_iter().map(|i| population.particles[i].clone()).collect(),
        weights: vec![1.0 / n as f64; n],
        log_likelihood: population.log_likelihood,
    })
}

/// One propagate-reweight-resample step.
pub fn smc_step<M: Model, R: Rng + ?Sized>(
    model: &M,
    previous: Option<&ParticlePopulation<M::Block>>,
    n_particles: usize,
    storage: Storage,
    rng: &mut R,
) -> Result<ParticlePopulation<M::Block>> {
    resample(&propagate(model, previous, n_particles, storage, rng)?, rng)
}

/// Runs SMC through every level. The observer sees each weighted population
/// before it is resampled. Returns the final resampled population, whose
/// `log_likelihood` is `log Zhat_P`.
pub fn run_smc<M: Model, F: FnMut(&ParticlePopulation<M::Block>)>(
    model: &M,
    n_particles: usize,
    storage: StorageMode,
    seed: u64,
    mut observe: F,
) -> Result<ParticlePopulation<M::Block>> {
    let storage = storage.resolve(model)?;
    let mut rng = substream(seed, streams::SMC);
    let mut pop: Option<ParticlePopulation<M::Block>> = None;
    for _ in 0..model.horizon() {
        let weighted = propagate(model, pop.as_ref(), n_particles, storage, &mut rng)?;
        observe(&weighted);
        pop = Some(resample(&weighted, &mut rng)?);
    }
    pop.ok_or_else(|| Error::InvalidArgument("model has no levels".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_bad_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            stratified_resample(&[0.5, 0.6], 3, &mut rng),
            Err(Error::BadWeights { .. })
        ));
        assert!(matches!(
            stratified_resample(&[1.5, -0.5], 3, &mut rng),
            Err(Error::BadWeights { .. })
        ));
        assert!(matches!(
            stratified_resample(&[f64::NAN, 1.0], 3, &mut rng),
            Err(Error::BadWeights { .. })
        ));
        assert!(stratified_resample(&[1.0], 0, &mut rng).is_err());
    }

    #[test]
    fn never_picks_zero_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = [0.0, 0.5, 0.0, 0.5, 0.0];
        for _ in 0..200 {
            for i in stratified_resample(&w, 7, &mut rng).unwrap() {
                assert!(w[i] > 0.0);
            }
        }
    }

    proptest! {
        // One uniform per stratum keeps every count within 2 of N w_j
        // (only the systematic variant guarantees floor/ceil).
        #[test]
        fn counts_stay_near_expected(raw in prop::collection::vec(0.0f64..1.0, 1..12), n in 1usize..60, seed: u64) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let idx = stratified_resample(&w, n, &mut rng).unwrap();
            prop_assert_eq!(idx.len(), n);
            let mut counts = vec![0usize; w.len()];
            for i in idx { counts[i] += 1; }
            for (c, wj) in counts.iter().zip(&w) {
                prop_assert!((*c as f64 - n as f64 * wj).abs() < 2.0);
            }
        }
    }
}
