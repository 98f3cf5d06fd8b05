//! Error summaries and the paired sign test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{HarnessError, Result};

/// Root mean squared error between paired estimates and truths.
pub fn rmse(estimates: &[f64], truths: &[f64]) -> Result<f64> {
    if estimates.len() != truths.len() {
        return Err(HarnessError::LengthMismatch {
            left: estimates.len(),
            right: truths.len(),
        });
    }
    if estimates.is_empty() {
        return Err(HarnessError::Empty);
    }
    let sse: f64 = estimates.iter().zip(truths).map(|(e, t)| (e - t).powi(2)).sum();
    Ok((sse / estimates.len() as f64).sqrt())
}

/// RMSE of replicated estimates of a single true value.
pub fn rmse_to(estimates: &[f64], truth: f64) -> Result<f64> {
    rmse(estimates, &vec![truth; estimates.len()])
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Pairs closer than this (relative, or absolute below one) count as ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// One-sided paired sign test of "first < second".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    /// Pairs where the first value is smaller.
    pub wins: u64,
    pub losses: u64,
    pub ties: u64,
    /// `P(Bin(wins + losses, 1/2) >= wins)`; `None` when every pair is tied.
    pub p_value: Option<f64>,
}

impl SignTest {
    pub fn new(first: &[f64], second: &[f64]) -> Result<Self> {
        if first.len() != second.len() {
            return Err(HarnessError::LengthMismatch {
                left: first.len(),
                right: second.len(),
            });
        }
        let (mut wins, mut losses, mut ties) = (0u64, 0u64, 0u64);
        for (a, b) in first.iter().zip(second) {
            if (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs()).max(1.0) {
                ties += 1;
            } else if a < b {
                wins += 1;
            } else {
                losses += 1;
            }
        }
        let n = wins + losses;
        let p_value = (n > 0).then(|| {
            let bin = Binomial::new(0.5, n).expect("valid binomial");
            if wins == 0 {
                1.0
            } else {
                bin.sf(wins - 1)
            }
        });
        Ok(SignTest {
            wins,
            losses,
            ties,
            p_value,
        })
    }

    pub fn significant(&self, level: f64) -> bool {
        self.p_value.is_some_and(|p| p < level)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[3.0], &[1.0]).unwrap(), 2.0);
        assert!(matches!(
            rmse(&[1.0], &[1.0, 2.0]),
            Err(HarnessError::LengthMismatch { .. })
        ));
        assert!(matches!(rmse(&[], &[]), Err(HarnessError::Empty)));
    }

    #[test]
    fn rmse_matches_two_pass_computation() {
        let est = [1.2, 0.7, 1.9, 1.1, 0.4];
        let truth = 1.0;
        // pass one: squared deviations; pass two: their mean
        let dev: Vec<f64> = est.iter().map(|e| (e - truth) * (e - truth)).collect();
        let mut total = 0.0;
        for d in &dev {
            total += d;
        }
        let expected = (total / 5.0f64).sqrt();
        assert!((rmse_to(&est, truth).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn sign_test_tail() {
        // 15 of 20 wins: P(X >= 15) = 21700 / 2^20
        let first = [0.0; 20];
        let mut second = [1.0; 20];
        for s in second.iter_mut().take(5) {
            *s = -1.0;
        }
        let t = SignTest::new(&first, &second).unwrap();
        assert_eq!((t.wins, t.losses, t.ties), (15, 5, 0));
        assert!((t.p_value.unwrap() - 21700.0 / 1048576.0).abs() < 1e-12);
        assert!(t.significant(0.05));
        let t = SignTest::new(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(t.p_value, None);
        assert!(!t.significant(0.05));
    }

    #[test]
    fn slope_of_a_line() {
        assert!((slope(&[1.0, 2.0, 3.0], &[2.0, 0.0, -2.0]) + 2.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn rmse_is_nonnegative_and_shift_invariant(xs in prop::collection::vec(-1e3f64..1e3, 1..30), shift in -10.0f64..10.0) {
            let truths: Vec<f64> = xs.iter().map(|x| x * 0.5).collect();
            let r = rmse(&xs, &truths).unwrap();
            prop_assert!(r >= 0.0);
            let xs2: Vec<f64> = xs.iter().map(|x| x + shift).collect();
            let t2: Vec<f64> = truths.iter().map(|t| t + shift).collect();
            prop_assert!((rmse(&xs2, &t2).unwrap() - r).abs() <= 1e-9 * (1.0 + r));
        }
    }
}
