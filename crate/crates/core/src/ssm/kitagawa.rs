//! The scalar nonlinear benchmark with a sign-ambiguous quadratic observation.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{log_normal, StateSpaceModel};

/// `x/2 + 25x/(1+x^2) + 8 cos(1.2 n)`.
pub fn kitagawa_transition_mean(x: f64, n: usize) -> f64 {
    x / 2.0 + 25.0 * x / (1.0 + x * x) + 8.0 * (1.2 * n as f64).cos()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kitagawa {
    pub sigma_v2: f64,
    pub sigma_w2: f64,
    #[serde(default = "default_initial_var")]
    pub initial_var: f64,
}

fn default_initial_var() -> f64 {
    5.0
}

impl Kitagawa {
    pub fn new(sigma_v2: f64, sigma_w2: f64) -> Self {
        Kitagawa {
            sigma_v2,
            sigma_w2,
            initial_var: default_initial_var(),
        }
    }
}

impl StateSpaceModel for Kitagawa {
    type State = f64;
    type Obs = f64;

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.initial_var.sqrt() * rng.sample::<f64, _>(StandardNormal)
    }

    fn log_initial(&self, x: &f64) -> f64 {
        log_normal(*x, 0.0, self.initial_var)
    }

    fn sample_transition<R: Rng + ?Sized>(&self, n: usize, prev: &f64, rng: &mut R) -> f64 {
        kitagawa_transition_mean(*prev, n) + self.sigma_v2.sqrt() * rng.sample::<f64, _>(StandardNormal)
    }

    fn log_transition(&self, n: usize, prev: &f64, x: &f64) -> f64 {
        log_normal(*x, kitagawa_transition_mean(*prev, n), self.sigma_v2)
    }

    fn sample_observation<R: Rng + ?Sized>(&self, _n: usize, x: &f64, rng: &mut R) -> f64 {
        x * x / 20.0 + self.sigma_w2.sqrt() * rng.sample::<f64, _>(StandardNormal)
    }

    fn log_observation(&self, _n: usize, x: &f64, y: &f64) -> f64 {
        log_normal(*y, x * x / 20.0, self.sigma_w2)
    }

    fn log_observation_bound(&self) -> Option<f64> {
        Some(-0.5 * (2.0 * std::f64::consts::PI * self.sigma_w2).ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssm::{simulate, Filtering};
    use crate::target::Model;

    #[test]
    fn mean_at_zero_state() {
        assert_eq!(kitagawa_transition_mean(0.0, 1), 8.0 * 1.2f64.cos());
        assert!((kitagawa_transition_mean(1.0, 1) - (0.5 + 12.5 + 8.0 * 1.2f64.cos())).abs() < 1e-14);
    }

    #[test]
    fn observation_is_sign_symmetric() {
        let m = Kitagawa::new(5.0, 5.0);
        assert_eq!(m.log_observation(3, &2.5, &0.7), m.log_observation(3, &-2.5, &0.7));
    }

    #[test]
    fn weights_respect_declared_bound() {
        let m = Kitagawa::new(5.0, 2.0);
        let data = simulate(&m, 30, 4);
        let target = Filtering::new(m.clone(), data.observations.clone());
        let bound = target.log_weight_bound(1).unwrap();
        for (x, y) in data.states.iter().zip(&data.observations) {
            for dx in [-3.0, -0.1, 0.0, 0.4, 2.0] {
                assert!(m.log_observation(1, &(x + dx), y.as_ref().unwrap()) <= bound);
            }
        }
        // the bound is attained where x^2/20 = y
        let y = 1.8;
        let x = (20.0f64 * y).sqrt();
        assert!((m.log_observation(1, &x, &y) - bound).abs() < 1e-12);
    }
}
