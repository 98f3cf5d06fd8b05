//! Exact filtering for the linear Gaussian model.

use nalgebra::{DMatrix, DVector};

use super::LinearGaussianSpec;
use crate::error::{Error, Result};

/// Filtered moments after assimilating `y_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct KalmanStep {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// `log p(y_n | y_{1:n-1})`.
    pub log_increment: f64,
}

/// Predict/update recursion in covariance form.
pub fn kalman_filter(spec: &LinearGaussianSpec, ys: &[Vec<f64>]) -> Result<Vec<KalmanStep>> {
    let d = spec.dim();
    let eye = DMatrix::<f64>::identity(d, d);
    let r = &eye * spec.sigma_w.powi(2);
    let q = &eye * spec.sigma_v.powi(2);
    let mut mean = DVector::<f64>::zeros(d);
    let mut cov = eye.clone();
    let mut out = Vec::with_capacity(ys.len());
    for (step, y) in ys.iter().enumerate() {
        if step > 0 {
            mean = &spec.a * &mean;
            cov = &spec.a * &cov * spec.a.transpose() + &q;
        }
        let y = DVector::from_column_slice(y);
        let s = &cov + &r;
        let chol = s.clone().cholesky().ok_or(Error::NumericalFailure { step: step + 1 })?;
        let e = &y - &mean;
        let s_inv_e = chol.solve(&e);
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let log_increment = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + e.dot(&s_inv_e));
        // K = P S^{-1}
        let gain = chol.solve(&cov).transpose();
        mean += &gain * &e;
        cov = &cov - &gain * &s * gain.transpose();
        cov = (&cov + cov.transpose()) * 0.5;
        out.push(KalmanStep {
            mean: mean.clone(),
            cov: cov.clone(),
            log_increment,
        });
    }
    Ok(out)
}

/// `log p(y_{1:n})`.
pub fn kalman_log_likelihood(spec: &LinearGaussianSpec, ys: &[Vec<f64>]) -> Result<f64> {
    Ok(kalman_filter(spec, ys)?.iter().map(|s| s.log_increment).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssm::log_normal;

    #[test]
    fn one_step_marginal() {
        let spec = LinearGaussianSpec::new(DMatrix::identity(1, 1), 3.0, 0.7).unwrap();
        let ll = kalman_log_likelihood(&spec, &[vec![1.3]]).unwrap();
        assert!((ll - log_normal(1.3, 0.0, 1.0 + 0.49)).abs() < 1e-14);
    }

    #[test]
    fn filtered_mean_for_scalar_identity() {
        let spec = LinearGaussianSpec::new(DMatrix::identity(1, 1), 1.0, 1.0).unwrap();
        let steps = kalman_filter(&spec, &[vec![2.0]]).unwrap();
        assert!((steps[0].mean[0] - 1.0).abs() < 1e-15);
        assert!((steps[0].cov[(0, 0)] - 0.5).abs() < 1e-15);
    }
}
