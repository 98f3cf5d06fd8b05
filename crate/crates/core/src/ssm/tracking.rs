//! Constant-velocity target observed through noisy bearings at random times.
//!
//! State `(x^1, x^2, x^3, x^4)`: horizontal position and velocity, then
//! vertical position and velocity. The sensor sits at the origin.

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector4};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::StateSpaceModel;
use crate::error::{Error, Result};

pub type TrackingState = [f64; 4];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackingSpec {
    /// Sampling interval `T`.
    pub interval: f64,
    /// Multiplier of the white-noise-acceleration covariance.
    pub process_scale: f64,
    pub bearing_var: f64,
    /// Observations at multiples of `period` are always recorded.
    pub period: usize,
    /// Chance of recording an observation at any other time.
    pub arrival_prob: f64,
    pub initial_mean: TrackingState,
    pub initial_sd: TrackingState,
}

impl Default for TrackingSpec {
    fn default() -> Self {
        TrackingSpec {
            interval: 1.0,
            process_scale: 5.0,
            bearing_var: 1e-2,
            period: 4,
            arrival_prob: 0.25,
            initial_mean: [10.0, 0.0, 10.0, 0.0],
            initial_sd: [1.0, 1.0, 1.0, 1.0],
        }
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Noise-free bearing of the target from the origin, quadrant-resolved.
pub fn bearing(x: &TrackingState) -> Result<f64> {
    if x[0] == 0.0 && x[2] == 0.0 {
        return Err(Error::OriginBearing);
    }
    Ok(x[2].atan2(x[0]))
}

/// `log N(d; 0, var)`, allowing `var == 0` as a point mass.
fn log_gauss(d: f64, var: f64) -> f64 {
    if var > 0.0 {
        -0.5 * ((2.0 * PI * var).ln() + d * d / var)
    } else if d == 0.0 {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tracking {
    spec: TrackingSpec,
    transition: Matrix4<f64>,
    chol: Matrix4<f64>,
    /// `None` when the process noise vanishes.
    precision: Option<Matrix4<f64>>,
    log_norm: f64,
}

impl Tracking {
    pub fn new(spec: TrackingSpec) -> Result<Self> {
        let t = spec.interval;
        if !(t > 0.0) || spec.process_scale < 0.0 || spec.bearing_var < 0.0 || spec.period == 0 {
            return Err(Error::InvalidArgument("invalid tracking parameters".into()));
        }
        if !(0.0..=1.0).contains(&spec.arrival_prob) || spec.initial_sd.iter().any(|s| *s < 0.0) {
            return Err(Error::InvalidArgument("invalid tracking parameters".into()));
        }
        #[rustfmt::skip]
        let transition = Matrix4::new(
            1.0, t, 0.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 1.0, t,
            0.0, 0.0, 0.0, 1.0,
        );
        let (a, b, c) = (t.powi(3) / 3.0, t * t / 2.0, t);
        #[rustfmt::skip]
        let cov = Matrix4::new(
            a, b, 0.0, 0.0,
            b, c, 0.0, 0.0,
            0.0, 0.0, a, b,
            0.0, 0.0, b, c,
        ) * spec.process_scale;
        let (chol, precision, log_norm) = if spec.process_scale > 0.0 {
            let ch = cov
                .cholesky()
                .ok_or(Error::InvalidArgument("process covariance".into()))?;
            let log_det = 2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let l = ch.l();
            (l, Some(ch.inverse()), -0.5 * (4.0 * (2.0 * PI).ln() + log_det))
        } else {
            (Matrix4::zeros(), None, 0.0)
        };
        Ok(Tracking {
            spec,
            transition,
            chol,
            precision,
            log_norm,
        })
    }

    pub fn spec(&self) -> &TrackingSpec {
        &self.spec
    }

    pub fn transition_matrix(&self) -> &Matrix4<f64> {
        &self.transition
    }

    pub fn predict(&self, x: &TrackingState) -> TrackingState {
        (self.transition * Vector4::from(*x)).into()
    }

    /// `F^steps x`, the noise-free prediction `steps` intervals ahead.
    pub fn predict_ahead(&self, x: &TrackingState, steps: usize) -> TrackingState {
        let mut out = *x;
        for _ in 0..steps {
            out = self.predict(&out);
        }
        out
    }
}

impl StateSpaceModel for Tracking {
    type State = TrackingState;
    type Obs = f64;

    fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> TrackingState {
        let mut x = self.spec.initial_mean;
        for (xi, sd) in x.iter_mut().zip(&self.spec.initial_sd) {
            *xi += sd * rng.sample::<f64, _>(StandardNormal);
        }
        x
    }

    fn log_initial(&self, x: &TrackingState) -> f64 {
        (0..4)
            .map(|i| log_gauss(x[i] - self.spec.initial_mean[i], self.spec.initial_sd[i].powi(2)))
            .sum()
    }

    fn sample_transition<R: Rng + ?Sized>(&self, _n: usize, prev: &TrackingState, rng: &mut R) -> TrackingState {
        let z = Vector4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        (self.transition * Vector4::from(*prev) + self.chol * z).into()
    }

    fn log_transition(&self, _n: usize, prev: &TrackingState, x: &TrackingState) -> f64 {
        let d = Vector4::from(*x) - self.transition * Vector4::from(*prev);
        match &self.precision {
            Some(p) => self.log_norm - 0.5 * d.dot(&(p * d)),
            None if d.iter().all(|v| *v == 0.0) => 0.0,
            None => f64::NEG_INFINITY,
        }
    }

    fn sample_observation<R: Rng + ?Sized>(&self, _n: usize, x: &TrackingState, rng: &mut R) -> f64 {
        let b = bearing(x).unwrap_or(0.0);
        wrap_angle(b + self.spec.bearing_var.sqrt() * rng.sample::<f64, _>(StandardNormal))
    }

    fn log_observation(&self, _n: usize, x: &TrackingState, y: &f64) -> f64 {
        let b = bearing(x).unwrap_or(0.0);
        log_gauss(wrap_angle(y - b), self.spec.bearing_var)
    }

    fn log_observation_bound(&self) -> Option<f64> {
        (self.spec.bearing_var > 0.0).then(|| -0.5 * (2.0 * PI * self.spec.bearing_var).ln())
    }

    fn observed_at<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> bool {
        let u: f64 = rng.random();
        n.is_multiple_of(self.spec.period) || u < self.spec.arrival_prob
    }
}
