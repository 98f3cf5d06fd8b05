//! Target sequences, proposal families and incremental weights.
//!
//! All densities live in the log domain. A zero density is `f64::NEG_INFINITY`.

use std::fmt::Debug;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::Path;

/// Unnormalized targets `gamma_1, ..., gamma_P` over paths of growing length.
pub trait TargetSequence {
    type Block: Clone + Debug + Send + Sync;

    /// Number of levels `P`.
    fn horizon(&self) -> usize;

    /// `log gamma_n(path)` for `n = path.level()`. Needs a complete path.
    fn log_gamma(&self, path: &Path<Self::Block>) -> f64;

    fn in_support(&self, path: &Path<Self::Block>) -> bool {
        self.log_gamma(path) > f64::NEG_INFINITY
    }
}

/// Proposals `q_1(x_1)` and `q_n(x_{1:n-1}, x_n)`.
pub trait ProposalFamily<B> {
    /// Draw the level-`n` block given the prefix (`None` at level 1).
    fn sample<R: Rng + ?Sized>(&self, n: usize, prefix: Option<&Path<B>>, rng: &mut R) -> B;

    fn log_density(&self, n: usize, prefix: Option<&Path<B>>, x: &B) -> f64;

    /// True when `w_n` does not depend on the proposed block.
    fn weight_independent_of_last(&self) -> bool {
        false
    }
}

/// A target sequence paired with its proposals: what the samplers consume.
pub trait Model: TargetSequence + ProposalFamily<<Self as TargetSequence>::Block> + Sync {
    /// `log w_n(path)`, with `w_1 = gamma_1 / q_1` and
    /// `w_n = gamma_n / (gamma_{n-1} q_n)`.
    ///
    /// Models whose weight only involves the last two blocks override this
    /// so that it works on paths whose deep prefix was dropped.
    fn log_weight(&self, path: &Path<Self::Block>) -> f64 {
        let n = path.level();
        let lg = self.log_gamma(path);
        if lg == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let prefix = path.prefix();
        let lq = self.log_density(n, prefix, path.last());
        let lg_prev = prefix.map_or(0.0, |p| self.log_gamma(p));
        lg - lg_prev - lq
    }

    /// The weight as a function of the prefix alone, when the proposal makes
    /// it so. Lets the sampler decide acceptance before drawing the block.
    fn prefix_log_weight(&self, _n: usize, _prefix: Option<&Path<Self::Block>>) -> Option<f64> {
        None
    }

    /// True when `w_n` and `q_n` depend only on `(x_{n-1}, x_n)`, so that
    /// only the last block of each state needs storing.
    fn markov(&self) -> bool {
        false
    }

    /// A declared bound on `log w_n`, if one is known.
    fn log_weight_bound(&self, _n: usize) -> Option<f64> {
        None
    }
}

impl<M: TargetSequence + ?Sized> TargetSequence for &M {
    type Block = M::Block;
    fn horizon(&self) -> usize {
        (**self).horizon()
    }
    fn log_gamma(&self, path: &Path<Self::Block>) -> f64 {
        (**self).log_gamma(path)
    }
    fn in_support(&self, path: &Path<Self::Block>) -> bool {
        (**self).in_support(path)
    }
}

impl<B, M: ProposalFamily<B> + ?Sized> ProposalFamily<B> for &M {
    fn sample<R: Rng + ?Sized>(&self, n: usize, prefix: Option<&Path<B>>, rng: &mut R) -> B {
        (**self).sample(n, prefix, rng)
    }
    fn log_density(&self, n: usize, prefix: Option<&Path<B>>, x: &B) -> f64 {
        (**self).log_density(n, prefix, x)
    }
    fn weight_independent_of_last(&self) -> bool {
        (**self).weight_independent_of_last()
    }
}

impl<M: Model + ?Sized> Model for &M {
    fn log_weight(&self, path: &Path<Self::Block>) -> f64 {
        (**self).log_weight(path)
    }
    fn prefix_log_weight(&self, n: usize, prefix: Option<&Path<Self::Block>>) -> Option<f64> {
        (**self).prefix_log_weight(n, prefix)
    }
    fn markov(&self) -> bool {
        (**self).markov()
    }
    fn log_weight_bound(&self, n: usize) -> Option<f64> {
        (**self).log_weight_bound(n)
    }
}

fn check_level(n: usize, horizon: usize) -> Result<()> {
    if n == 0 || n > horizon {
        return Err(Error::LevelOutOfRange { level: n, horizon });
    }
    Ok(())
}

/// Checked `log w_n(path)`.
///
/// Requires the path and (for `n >= 2`) its prefix to lie in the supports,
/// and the last block to have positive proposal density.
pub fn log_weight<M: Model>(model: &M, n: usize, path: &Path<M::Block>) -> Result<f64> {
    check_level(n, model.horizon())?;
    if path.level() != n {
        return Err(Error::InvalidArgument(format!(
            "path has {} blocks, expected {n}",
            path.level()
        )));
    }
    if !model.in_support(path) {
        return Err(Error::OutOfSupport { level: n });
    }
    if let Some(prefix) = path.prefix() {
        if !model.in_support(prefix) {
            return Err(Error::OutOfSupport { level: n - 1 });
        }
    }
    if model.log_density(n, path.prefix(), path.last()) == f64::NEG_INFINITY {
        return Err(Error::OutOfSupport { level: n });
    }
    Ok(model.log_weight(path))
}

/// `true` iff `log gamma_n(path) > -inf`.
pub fn check_support<T: TargetSequence>(target: &T, n: usize, path: &Path<T::Block>) -> Result<bool> {
    check_level(n, target.horizon())?;
    if path.level() != n {
        return Err(Error::InvalidArgument(format!(
            "path has {} blocks, expected {n}",
            path.level()
        )));
    }
    Ok(target.in_support(path))
}

/// `1 ∧ exp(lw_proposed - lw_current)`, without overflow.
///
/// A proposed weight of zero never moves; a current weight of zero always does.
pub fn acceptance_ratio(lw_proposed: f64, lw_current: f64) -> f64 {
    if lw_proposed == f64::NEG_INFINITY {
        return 0.0;
    }
    if lw_current == f64::NEG_INFINITY {
        return 1.0;
    }
    let delta = lw_proposed - lw_current;
    if delta >= 0.0 {
        1.0
    } else if delta.is_nan() {
        0.0
    } else {
        delta.exp()
    }
}

/// Running maxima of observed weights, checked against optional declared bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightBoundDiagnostic {
    max_weight: Vec<f64>,
    bound: Vec<Option<f64>>,
    violated: Vec<bool>,
}

impl WeightBoundDiagnostic {
    pub fn new(horizon: usize) -> Self {
        WeightBoundDiagnostic {
            max_weight: vec![0.0; horizon],
            bound: vec![None; horizon],
            violated: vec![false; horizon],
        }
    }

    pub fn with_bounds(bounds: Vec<Option<f64>>) -> Self {
        let p = bounds.len();
        WeightBoundDiagnostic {
            max_weight: vec![0.0; p],
            bound: bounds,
            violated: vec![false; p],
        }
    }

    /// Pulls declared bounds from the model, where it has them.
    pub fn for_model<M: Model>(model: &M) -> Self {
        let bounds = (1..=model.horizon())
            .map(|n| model.log_weight_bound(n).map(f64::exp))
            .collect();
        Self::with_bounds(bounds)
    }

    pub fn observe(&mut self, n: usize, w: f64) {
        let i = n - 1;
        if w > self.max_weight[i] {
            self.max_weight[i] = w;
        }
        if let Some(b) = self.bound[i] {
            if w > b {
                self.violated[i] = true;
            }
        }
    }

    pub fn observe_log(&mut self, n: usize, lw: f64) {
        self.observe(n, lw.exp());
    }

    pub fn max_weight(&self, n: usize) -> f64 {
        self.max_weight[n - 1]
    }

    pub fn bound(&self, n: usize) -> Option<f64> {
        self.bound[n - 1]
    }

    pub fn violated(&self, n: usize) -> bool {
        self.violated[n - 1]
    }

    pub fn any_violation(&self) -> bool {
        self.violated.iter().any(|&v| v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equal_weights_accept() {
        assert_eq!(acceptance_ratio(-3.0, -3.0), 1.0);
        assert_eq!(acceptance_ratio(1e300, -1e300), 1.0);
    }

    #[test]
    fn quarter_ratio() {
        let r = acceptance_ratio(2.0 - 4f64.ln(), 2.0);
        assert!((r - 0.25).abs() < 1e-15);
        assert_eq!(acceptance_ratio(f64::NEG_INFINITY, 0.0), 0.0);
        assert_eq!(acceptance_ratio(0.0, f64::NEG_INFINITY), 1.0);
        assert_eq!(acceptance_ratio(-1e308, 1e308), 0.0);
    }

    #[test]
    fn diagnostic_monotone_and_flags() {
        let mut d = WeightBoundDiagnostic::with_bounds(vec![None, Some(3.0)]);
        d.observe(1, 2.0);
        d.observe(1, 1.5);
        assert_eq!(d.max_weight(1), 2.0);
        assert!(!d.violated(1));
        d.observe(2, 3.0);
        assert!(!d.violated(2));
        d.observe(2, 3.5);
        assert!(d.violated(2));
        assert!(d.any_violation());
    }

    proptest! {
        #[test]
        fn ratio_is_monotone_in_proposed(a in -50.0f64..50.0, b in -50.0f64..50.0, c in -50.0f64..50.0) {
            prop_assert_eq!(acceptance_ratio(a, a), 1.0);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(acceptance_ratio(lo, c) <= acceptance_ratio(hi, c));
            let r = acceptance_ratio(a, c);
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }
}
