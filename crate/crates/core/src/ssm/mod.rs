//! State-space models as target sequences.
//!
//! The level-`n` target is the joint `p(x_{1:n}, y_{1:n})`:
//! `mu(x_1) g(x_1, y_1) prod_k f(x_{k-1}, x_k) g(x_k, y_k)`, with missing
//! observations contributing a factor of one.

mod kalman;
mod kitagawa;
mod linear_gaussian;
mod segments;
mod tracking;

pub use kalman::{kalman_filter, kalman_log_likelihood, KalmanStep};
pub use kitagawa::{kitagawa_transition_mean, Kitagawa};
pub use linear_gaussian::{
    optimal_log_weight, optimal_moments, optimal_proposal_lg, sinkhorn, LinearGaussianOptimal, LinearGaussianSpec,
    OptimalDraw,
};
pub use segments::ArrivalSegments;
pub use tracking::{bearing, wrap_angle, Tracking, TrackingSpec, TrackingState};

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::path::Path;
use crate::rng::{streams, substream};
use crate::target::{Model, ProposalFamily, TargetSequence};

/// `log N(x; mean, var)`.
pub fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * ((2.0 * PI * var).ln() + d * d / var)
}

pub trait StateSpaceModel: Sync {
    type State: Clone + std::fmt::Debug + Send + Sync;
    type Obs: Clone + std::fmt::Debug + Send + Sync;

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;
    fn log_initial(&self, x: &Self::State) -> f64;

    /// Draws `x_n` given `x_{n-1}`.
    fn sample_transition<R: Rng + ?Sized>(&self, n: usize, prev: &Self::State, rng: &mut R) -> Self::State;
    fn log_transition(&self, n: usize, prev: &Self::State, x: &Self::State) -> f64;

    fn sample_observation<R: Rng + ?Sized>(&self, n: usize, x: &Self::State, rng: &mut R) -> Self::Obs;
    fn log_observation(&self, n: usize, x: &Self::State, y: &Self::Obs) -> f64;

    /// `sup_x log g(x, y)`, when known.
    fn log_observation_bound(&self) -> Option<f64> {
        None
    }

    /// Whether `y_n` is recorded; called once per time index in order with a
    /// dedicated schedule stream.
    fn observed_at<R: Rng + ?Sized>(&self, _n: usize, _rng: &mut R) -> bool {
        true
    }
}

/// A simulated trajectory together with its observations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset<S, O> {
    pub seed: u64,
    pub states: Vec<S>,
    pub observations: Vec<Option<O>>,
}

impl<S, O> Dataset<S, O> {
    pub fn horizon(&self) -> usize {
        self.states.len()
    }

    /// One-based indices of recorded observations.
    pub fn observed_times(&self) -> Vec<usize> {
        self.observations
            .iter()
            .enumerate()
            .filter_map(|(i, y)| y.as_ref().map(|_| i + 1))
            .collect()
    }
}

/// What `simulate` writes to disk: the model parameters and the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile<P, S, O> {
    pub model: P,
    pub dataset: Dataset<S, O>,
}

pub fn simulate<M: StateSpaceModel>(model: &M, horizon: usize, seed: u64) -> Dataset<M::State, M::Obs> {
    let mut rng = substream(seed, streams::SIMULATION);
    let mut schedule = substream(seed, streams::SCHEDULE);
    let mut states = Vec::with_capacity(horizon);
    let mut observations = Vec::with_capacity(horizon);
    for n in 1..=horizon {
        let x = match states.last() {
            None => model.sample_initial(&mut rng),
            Some(prev) => model.sample_transition(n, prev, &mut rng),
        };
        let y = model.sample_observation(n, &x, &mut rng);
        observations.push(model.observed_at(n, &mut schedule).then_some(y));
        states.push(x);
    }
    Dataset {
        seed,
        states,
        observations,
    }
}

/// Draws a path of length `horizon` from the prior dynamics.
pub fn prior_path<M: StateSpaceModel, R: Rng + ?Sized>(model: &M, horizon: usize, rng: &mut R) -> Path<M::State> {
    let mut path = Path::root(model.sample_initial(rng));
    for n in 2..=horizon {
        let x = model.sample_transition(n, path.last(), rng);
        path = path.extend(x);
    }
    path
}

/// Filtering targets with the prior as proposal: `q_1 = mu`, `q_n = f`, so
/// `w_n = g(x_n, y_n)`.
#[derive(Clone, Debug)]
pub struct Filtering<M: StateSpaceModel> {
    model: M,
    observations: Vec<Option<M::Obs>>,
}

impl<M: StateSpaceModel> Filtering<M> {
    pub fn new(model: M, observations: Vec<Option<M::Obs>>) -> Self {
        Filtering { model, observations }
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn observations(&self) -> &[Option<M::Obs>] {
        &self.observations
    }

    /// The same model with observations dropped where `keep(n)` is false.
    pub fn masked<F: Fn(usize) -> bool>(&self, keep: F) -> Self
    where
        M: Clone,
    {
        let observations = self
            .observations
            .iter()
            .enumerate()
            .map(|(i, y)| if keep(i + 1) { y.clone() } else { None })
            .collect();
        Filtering {
            model: self.model.clone(),
            observations,
        }
    }

    fn log_obs(&self, n: usize, x: &M::State) -> f64 {
        self.observations[n - 1]
            .as_ref()
            .map_or(0.0, |y| self.model.log_observation(n, x, y))
    }
}

impl<M: StateSpaceModel> TargetSequence for Filtering<M> {
    type Block = M::State;

    fn horizon(&self) -> usize {
        self.observations.len()
    }

    fn log_gamma(&self, path: &Path<M::State>) -> f64 {
        let xs = path.to_vec().expect("log_gamma needs the full path");
        let mut lg = self.model.log_initial(&xs[0]) + self.log_obs(1, &xs[0]);
        for n in 2..=xs.len() {
            if lg == f64::NEG_INFINITY {
                break;
            }
            lg += self.model.log_transition(n, &xs[n - 2], &xs[n - 1]) + self.log_obs(n, &xs[n - 1]);
        }
        lg
    }
}

impl<M: StateSpaceModel> ProposalFamily<M::State> for Filtering<M> {
    fn sample<R: Rng + ?Sized>(&self, n: usize, prefix: Option<&Path<M::State>>, rng: &mut R) -> M::State {
        match prefix {
            None => self.model.sample_initial(rng),
            Some(p) => self.model.sample_transition(n, p.last(), rng),
        }
    }

    fn log_density(&self, n: usize, prefix: Option<&Path<M::State>>, x: &M::State) -> f64 {
        match prefix {
            None => self.model.log_initial(x),
            Some(p) => self.model.log_transition(n, p.last(), x),
        }
    }
}

impl<M: StateSpaceModel> Model for Filtering<M> {
    fn log_weight(&self, path: &Path<M::State>) -> f64 {
        self.log_obs(path.level(), path.last())
    }

    fn markov(&self) -> bool {
        true
    }

    fn log_weight_bound(&self, n: usize) -> Option<f64> {
        match self.observations.get(n - 1)? {
            Some(_) => self.model.log_observation_bound(),
            None => Some(0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gamma_factorizes() {
        let model = Kitagawa::new(5.0, 1.0);
        let data = simulate(&model, 6, 3);
        let mut obs = data.observations.clone();
        obs[3] = None;
        let target = Filtering::new(model.clone(), obs.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let path = prior_path(&model, 6, &mut rng);
        let xs = path.to_vec().unwrap();
        let mut p = Some(&path);
        while let Some(cur) = p {
            let n = cur.level();
            if n >= 2 {
                let lhs = target.log_gamma(cur) - target.log_gamma(cur.prefix().unwrap());
                let mut rhs = model.log_transition(n, &xs[n - 2], &xs[n - 1]);
                if let Some(y) = &obs[n - 1] {
                    rhs += model.log_observation(n, &xs[n - 1], y);
                }
                assert!((lhs - rhs).abs() < 1e-10, "n={n}");
                // prior proposal: the weight is g, or one without an observation
                let expected = obs[n - 1]
                    .as_ref()
                    .map_or(0.0, |y| model.log_observation(n, &xs[n - 1], y));
                assert!((target.log_weight(cur) - expected).abs() < 1e-12);
                assert!((crate::target::log_weight(&target, n, cur).unwrap() - expected).abs() < 1e-10);
            }
            p = cur.prefix();
        }
        assert_eq!(target.log_weight_bound(4), Some(0.0));
    }

    #[test]
    fn masking_drops_observations() {
        let model = Kitagawa::new(5.0, 1.0);
        let data = simulate(&model, 8, 1);
        let target = Filtering::new(model, data.observations);
        let masked = target.masked(|n| n % 4 == 0);
        let kept: Vec<bool> = masked.observations().iter().map(Option::is_some).collect();
        assert_eq!(kept, vec![false, false, false, true, false, false, false, true]);
    }

    #[test]
    fn simulation_is_seeded() {
        let model = Kitagawa::new(5.0, 1.0);
        assert_eq!(simulate(&model, 20, 9), simulate(&model, 20, 9));
        assert_ne!(simulate(&model, 20, 9), simulate(&model, 20, 10));
    }

    #[test]
    fn log_normal_matches_formula() {
        assert!((log_normal(0.0, 0.0, 1.0) + 0.5 * (2.0 * PI).ln()).abs() < 1e-15);
        assert!((log_normal(3.0, 1.0, 4.0) - (-0.5 * (8.0 * PI).ln() - 0.5)).abs() < 1e-15);
    }
}
