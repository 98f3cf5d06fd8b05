//! Linear Gaussian model with isotropic noise and a doubly stochastic
//! transition matrix, plus its optimal proposal.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{log_normal, Filtering, StateSpaceModel};
use crate::error::{Error, Result};
use crate::path::Path;
use crate::rng::{streams, substream};
use crate::target::{Model, ProposalFamily, TargetSequence};

/// Alternating row and column normalization of a positive matrix.
/// Stops after `max_iter` rounds or once every row sum is within `tol` of one.
pub fn sinkhorn(mut m: DMatrix<f64>, max_iter: usize, tol: f64) -> DMatrix<f64> {
    for _ in 0..max_iter {
        for mut c in m.column_iter_mut() {
            let s = c.sum();
            c /= s;
        }
        for mut r in m.row_iter_mut() {
            let s = r.sum();
            r /= s;
        }
        let col_err = m.column_iter().map(|c| (c.sum() - 1.0).abs()).fold(0.0, f64::max);
        if col_err <= tol {
            break;
        }
    }
    m
}

/// `X_n = A X_{n-1} + sigma_v V_n`, `Y_n = X_n + sigma_w W_n`, `X_1 ~ N(0, I)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearGaussianSpec {
    pub a: DMatrix<f64>,
    pub sigma_v: f64,
    pub sigma_w: f64,
}

impl LinearGaussianSpec {
    pub fn new(a: DMatrix<f64>, sigma_v: f64, sigma_w: f64) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::InvalidArgument("A must be square and non-empty".into()));
        }
        if !(sigma_v > 0.0 && sigma_w > 0.0) {
            return Err(Error::InvalidArgument("noise scales must be positive".into()));
        }
        let off = a
            .row_iter()
            .map(|r| r.sum())
            .chain(a.column_iter().map(|c| c.sum()))
            .any(|s| (s - 1.0).abs() > 1e-10);
        if off || a.iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidArgument("A must be doubly stochastic".into()));
        }
        Ok(LinearGaussianSpec { a, sigma_v, sigma_w })
    }

    /// Sinkhorn-normalized uniform random matrix drawn from `seed`.
    pub fn random(d: usize, sigma_v: f64, sigma_w: f64, seed: u64) -> Result<Self> {
        let mut rng = substream(seed, streams::MODEL_PARAMETERS);
        let raw = DMatrix::from_fn(d, d, |_, _| rng.random_range(0.05..1.0));
        Self::new(sinkhorn(raw, 100, 1e-12), sigma_v, sigma_w)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|i| (0..d).map(|j| self.a[(i, j)] * x[j]).sum()).collect()
    }

    fn gaussian<R: Rng + ?Sized>(mean: &[f64], sd: f64, rng: &mut R) -> Vec<f64> {
        mean.iter()
            .map(|m| m + sd * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    fn log_iso(x: &[f64], mean: &[f64], var: f64) -> f64 {
        x.iter().zip(mean).map(|(a, b)| log_normal(*a, *b, var)).sum()
    }
}

impl StateSpaceModel for LinearGaussianSpec {
    type State = Vec<f64>;
    type Obs = Vec<f64>;

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        Self::gaussian(&vec![0.0; self.dim()], 1.0, rng)
    }

    fn log_initial(&self, x: &Vec<f64>) -> f64 {
        Self::log_iso(x, &vec![0.0; self.dim()], 1.0)
    }

    fn sample_transition<R: Rng + ?Sized>(&self, _n: usize, prev: &Vec<f64>, rng: &mut R) -> Vec<f64> {
        Self::gaussian(&self.apply(prev), self.sigma_v, rng)
    }

    fn log_transition(&self, _n: usize, prev: &Vec<f64>, x: &Vec<f64>) -> f64 {
        Self::log_iso(x, &self.apply(prev), self.sigma_v * self.sigma_v)
    }

    fn sample_observation<R: Rng + ?Sized>(&self, _n: usize, x: &Vec<f64>, rng: &mut R) -> Vec<f64> {
        Self::gaussian(x, self.sigma_w, rng)
    }

    fn log_observation(&self, _n: usize, x: &Vec<f64>, y: &Vec<f64>) -> f64 {
        Self::log_iso(y, x, self.sigma_w * self.sigma_w)
    }

    fn log_observation_bound(&self) -> Option<f64> {
        let v = self.sigma_w * self.sigma_w;
        Some(-0.5 * self.dim() as f64 * (2.0 * std::f64::consts::PI * v).ln())
    }
}

/// Prior mean and variance of `x_n` given the previous state.
fn prior_moments(spec: &LinearGaussianSpec, prev: Option<&[f64]>) -> (Vec<f64>, f64) {
    match prev {
        None => (vec![0.0; spec.dim()], 1.0),
        Some(x) => (spec.apply(x), spec.sigma_v * spec.sigma_v),
    }
}

/// Mean and (isotropic) variance of `x_n | x_{n-1}, y_n`.
pub fn optimal_moments(spec: &LinearGaussianSpec, prev: Option<&[f64]>, y: &[f64]) -> (Vec<f64>, f64) {
    let (m, v) = prior_moments(spec, prev);
    let w = spec.sigma_w * spec.sigma_w;
    let s2 = 1.0 / (1.0 / v + 1.0 / w);
    let mean = m.iter().zip(y).map(|(mi, yi)| s2 * (mi / v + yi / w)).collect();
    (mean, s2)
}

/// `log p(y_n | x_{n-1})`, the weight under the optimal proposal.
pub fn optimal_log_weight(spec: &LinearGaussianSpec, prev: Option<&[f64]>, y: &[f64]) -> f64 {
    let (m, v) = prior_moments(spec, prev);
    let var = v + spec.sigma_w * spec.sigma_w;
    y.iter().zip(&m).map(|(yi, mi)| log_normal(*yi, *mi, var)).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimalDraw {
    pub sample: Vec<f64>,
    pub log_density: f64,
    pub log_weight: f64,
}

pub fn optimal_proposal_lg<R: Rng + ?Sized>(
    spec: &LinearGaussianSpec,
    prev: Option<&[f64]>,
    y: &[f64],
    rng: &mut R,
) -> OptimalDraw {
    let (mean, s2) = optimal_moments(spec, prev, y);
    let sample = LinearGaussianSpec::gaussian(&mean, s2.sqrt(), rng);
    OptimalDraw {
        log_density: LinearGaussianSpec::log_iso(&sample, &mean, s2),
        log_weight: optimal_log_weight(spec, prev, y),
        sample,
    }
}

/// Linear Gaussian filtering targets with the optimal proposal
/// `q_n(x_{n-1}, x_n) ∝ f(x_{n-1}, x_n) g(x_n, y_n)`.
#[derive(Clone, Debug)]
pub struct LinearGaussianOptimal {
    target: Filtering<LinearGaussianSpec>,
}

impl LinearGaussianOptimal {
    /// Every observation must be present.
    pub fn new(spec: LinearGaussianSpec, observations: Vec<Vec<f64>>) -> Self {
        LinearGaussianOptimal {
            target: Filtering::new(spec, observations.into_iter().map(Some).collect()),
        }
    }

    pub fn spec(&self) -> &LinearGaussianSpec {
        self.target.model()
    }

    fn y(&self, n: usize) -> &[f64] {
        self.target.observations()[n - 1]
            .as_deref()
            .expect("observations are complete")
    }
}

impl TargetSequence for LinearGaussianOptimal {
    type Block = Vec<f64>;

    fn horizon(&self) -> usize {
        self.target.horizon()
    }

    fn log_gamma(&self, path: &Path<Vec<f64>>) -> f64 {
        self.target.log_gamma(path)
    }
}

impl ProposalFamily<Vec<f64>> for LinearGaussianOptimal {
    fn sample<R: Rng + ?Sized>(&self, n: usize, prefix: Option<&Path<Vec<f64>>>, rng: &mut R) -> Vec<f64> {
        let (mean, s2) = optimal_moments(self.spec(), prefix.map(|p| p.last().as_slice()), self.y(n));
        LinearGaussianSpec::gaussian(&mean, s2.sqrt(), rng)
    }

    fn log_density(&self, n: usize, prefix: Option<&Path<Vec<f64>>>, x: &Vec<f64>) -> f64 {
        let (mean, s2) = optimal_moments(self.spec(), prefix.map(|p| p.last().as_slice()), self.y(n));
        LinearGaussianSpec::log_iso(x, &mean, s2)
    }

    fn weight_independent_of_last(&self) -> bool {
        true
    }
}

impl Model for LinearGaussianOptimal {
    fn log_weight(&self, path: &Path<Vec<f64>>) -> f64 {
        let n = path.level();
        optimal_log_weight(self.spec(), path.prefix().map(|p| p.last().as_slice()), self.y(n))
    }

    fn prefix_log_weight(&self, n: usize, prefix: Option<&Path<Vec<f64>>>) -> Option<f64> {
        Some(optimal_log_weight(
            self.spec(),
            prefix.map(|p| p.last().as_slice()),
            self.y(n),
        ))
    }

    fn markov(&self) -> bool {
        true
    }

    fn log_weight_bound(&self, n: usize) -> Option<f64> {
        let v = if n == 1 { 1.0 } else { self.spec().sigma_v.powi(2) };
        let var = v + self.spec().sigma_w.powi(2);
        Some(-0.5 * self.spec().dim() as f64 * (2.0 * std::f64::consts::PI * var).ln())
    }
}
