//! Gaussian pseudo-observations for non-Gaussian likelihoods.
//!
//! A second-order Taylor expansion of a log-likelihood term `L_i(f_i)` turns
//! it into a Gaussian observation with location `z_i = f_i - L'_i/L''_i` and
//! variance `-1/L''_i`. For the Bernoulli-logit model the curvature is
//! `L'' = s(f)(s(f) - 1)`, so points on the classification boundary carry
//! pseudo-variance exactly 4 and all others more; plugging `sigma = 2` into
//! the Gaussian shrinkage formulas therefore overestimates the prior mean of
//! m_eff, erring toward slightly stronger shrinkage.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Observation model for the regression target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LikelihoodKind {
    Gaussian,
    BernoulliLogit,
}

impl LikelihoodKind {
    pub fn name(&self) -> &'static str {
        match self {
            LikelihoodKind::Gaussian => "gaussian",
            LikelihoodKind::BernoulliLogit => "bernoulli-logit",
        }
    }
}

/// Location and variance of one Gaussian pseudo-observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoObservation {
    pub z: f64,
    pub var: f64,
}

/// Beyond this the logistic curvature underflows in double precision, so
/// `f` is clamped before computing second derivatives.
const F_CLAMP: f64 = 35.0;

#[inline]
pub(crate) fn sigmoid(f: f64) -> f64 {
    if f >= 0.0 {
        1.0 / (1.0 + (-f).exp())
    } else {
        let e = f.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(f)) without overflow.
#[inline]
pub(crate) fn log1p_exp(f: f64) -> f64 {
    f.max(0.0) + (-f.abs()).exp().ln_1p()
}

fn check_binary(y: f64) -> Result<()> {
    if y != 0.0 && y != 1.0 {
        return Err(Error::invalid(format!("binary target must be 0 or 1, got {y}")));
    }
    Ok(())
}

/// Bernoulli-logit log likelihood and its first two derivatives in `f`:
/// `L = y f - log(1 + e^f)`, `L' = y - s(f)`, `L'' = s(f)(s(f) - 1)`.
pub fn logistic_loglik_derivs(f: f64, y: f64) -> Result<(f64, f64, f64)> {
    check_binary(y)?;
    if !f.is_finite() {
        return Err(Error::NonFinite {
            component: "logistic_loglik_derivs f",
        });
    }
    let s = sigmoid(f);
    let value = y * f - log1p_exp(f);
    Ok((value, y - s, s * (s - 1.0)))
}

/// Gaussian pseudo-observation for one Bernoulli-logit data point.
///
/// The variance is minimized at `f = 0` with value exactly 4. `|f|` is
/// clamped at 35 so the curvature never underflows to zero.
pub fn pseudo_observation(f: f64, y: f64, kind: LikelihoodKind) -> Result<PseudoObservation> {
    if kind != LikelihoodKind::BernoulliLogit {
        return Err(Error::invalid(
            "pseudo observations are defined for the bernoulli-logit likelihood; \
             the gaussian likelihood is already gaussian",
        ));
    }
    check_binary(y)?;
    if !f.is_finite() {
        return Err(Error::NonFinite {
            component: "pseudo_observation f",
        });
    }
    let fc = f.clamp(-F_CLAMP, F_CLAMP);
    let (_, d1, d2) = logistic_loglik_derivs(fc, y)?;
    Ok(PseudoObservation {
        z: fc - d1 / d2,
        var: -1.0 / d2,
    })
}

/// The plug-in noise deviation for logistic models: the pseudo-variance on
/// the classification boundary is 4, so `sigma = 2`. Using it in the
/// Gaussian m_eff formulas overestimates the prior mean of m_eff.
pub fn logistic_sigma_plugin() -> f64 {
    2.0
}

/// Conditional posterior of the coefficients given hyperparameters and
/// Gaussian (pseudo-)observations:
///
/// ```text
/// cov  = (tau^-2 Lambda^-1 + X^T W X)^-1       W = diag(1/var_i)
/// mean = cov X^T W z
/// ```
///
/// The mean is computed in this precision form rather than through
/// `(X^T W X)^-1`, which does not exist when D > n; the two coincide
/// whenever both are defined.
pub fn approx_conditional_posterior(
    x: &Array2<f64>,
    pseudo: &[PseudoObservation],
    lambdas: &[f64],
    tau: f64,
) -> Result<(Array1<f64>, Array2<f64>)> {
    let (n, d) = x.dim();
    if pseudo.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} pseudo-observations for {n} rows",
            pseudo.len()
        )));
    }
    if lambdas.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "{} local scales for {d} columns",
            lambdas.len()
        )));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid(format!("tau must be positive, got {tau}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { component: "design matrix" });
    }
    for p in pseudo {
        if !(p.z.is_finite() && p.var.is_finite() && p.var > 0.0) {
            return Err(Error::NonFinite {
                component: "pseudo-observation",
            });
        }
    }
    for &l in lambdas {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::invalid(format!("lambda must be positive, got {l}")));
        }
    }

    // A = X^T W X + diag(1/(tau^2 lambda_j^2)), b = X^T W z.
    let mut a = Array2::<f64>::zeros((d, d));
    let mut b = Array1::<f64>::zeros(d);
    for i in 0..n {
        let w = 1.0 / pseudo[i].var;
        for j in 0..d {
            let xij = x[[i, j]];
            b[j] += xij * w * pseudo[i].z;
            for k in 0..=j {
                a[[j, k]] += xij * w * x[[i, k]];
            }
        }
    }
    for j in 0..d {
        for k in 0..j {
            a[[k, j]] = a[[j, k]];
        }
        a[[j, j]] += 1.0 / (tau * tau * lambdas[j] * lambdas[j]);
    }
    let (mean, cov) = linalg::spd_solve_and_inverse(&a, &b)?;
    Ok((mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn boundary_values() {
        let (l, d1, d2) = logistic_loglik_derivs(0.0, 1.0).unwrap();
        assert!((l + std::f64::consts::LN_2).abs() < 1e-15);
        assert!((d1 - 0.5).abs() < 1e-15);
        assert!((d2 + 0.25).abs() < 1e-15);
        // The curvature does not depend on y.
        let (_, _, d2_zero) = logistic_loglik_derivs(0.0, 0.0).unwrap();
        assert_eq!(d2, d2_zero);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let h = 1e-5;
        for &y in &[0.0, 1.0] {
            let mut f = -10.0;
            while f <= 10.0 {
                let (_, d1, d2) = logistic_loglik_derivs(f, y).unwrap();
                let (lp, d1p, _) = logistic_loglik_derivs(f + h, y).unwrap();
                let (lm, d1m, _) = logistic_loglik_derivs(f - h, y).unwrap();
                let fd1 = (lp - lm) / (2.0 * h);
                let fd2 = (d1p - d1m) / (2.0 * h);
                assert!(
                    ((fd1 - d1) / d1.abs().max(1e-3)).abs() < 1e-6,
                    "f={f} y={y}: d1 {d1} vs fd {fd1}"
                );
                assert!(
                    ((fd2 - d2) / d2.abs().max(1e-3)).abs() < 1e-6,
                    "f={f} y={y}: d2 {d2} vs fd {fd2}"
                );
                f += 0.25;
            }
        }
    }

    #[test]
    fn pseudo_observation_boundary_and_symmetry() {
        let p = pseudo_observation(0.0, 1.0, LikelihoodKind::BernoulliLogit).unwrap();
        assert!((p.z - 2.0).abs() < 1e-15);
        assert!((p.var - 4.0).abs() < 1e-15);
        let p = pseudo_observation(0.0, 0.0, LikelihoodKind::BernoulliLogit).unwrap();
        assert!((p.z + 2.0).abs() < 1e-15);
        assert!((p.var - 4.0).abs() < 1e-15);
    }

    #[test]
    fn pseudo_variance_frozen_value_at_f2() {
        // 1/(s(2)(1 - s(2))), arbitrary-precision value.
        let p = pseudo_observation(2.0, 1.0, LikelihoodKind::BernoulliLogit).unwrap();
        assert!((p.var - 9.524391382167263).abs() < 1e-12, "{}", p.var);
    }

    #[test]
    fn pseudo_variance_minimized_at_zero_and_symmetric() {
        let mut f = -10.0;
        let mut min_var = f64::INFINITY;
        let mut min_f = f64::NAN;
        while f <= 10.0 {
            let v = pseudo_observation(f, 1.0, LikelihoodKind::BernoulliLogit)
                .unwrap()
                .var;
            let v_neg = pseudo_observation(-f, 0.0, LikelihoodKind::BernoulliLogit)
                .unwrap()
                .var;
            assert!((v - v_neg).abs() < 1e-9 * v);
            assert!(v >= 4.0 - 1e-12);
            if v < min_var {
                min_var = v;
                min_f = f;
            }
            f += 0.01;
        }
        assert!((min_var - 4.0).abs() < 1e-12);
        assert!(min_f.abs() < 1e-9);
        // var at f = +-1 strictly exceeds 4.
        let v1 = pseudo_observation(1.0, 1.0, LikelihoodKind::BernoulliLogit)
            .unwrap()
            .var;
        assert!(v1 > 4.0);
        assert!((v1 - logistic_sigma_plugin().powi(2)).abs() > 0.1);
    }

    #[test]
    fn plugin_is_two_and_consistent_with_boundary_variance() {
        assert_eq!(logistic_sigma_plugin(), 2.0);
        let p = pseudo_observation(0.0, 1.0, LikelihoodKind::BernoulliLogit).unwrap();
        assert_eq!(p.var, logistic_sigma_plugin() * logistic_sigma_plugin());
    }

    #[test]
    fn extreme_f_saturates_instead_of_overflowing() {
        let p = pseudo_observation(500.0, 1.0, LikelihoodKind::BernoulliLogit).unwrap();
        assert!(p.var.is_finite() && p.var > 0.0);
        assert!(p.z.is_finite());
    }

    #[test]
    fn gaussian_kind_is_rejected() {
        assert!(pseudo_observation(0.0, 1.0, LikelihoodKind::Gaussian).is_err());
        assert!(pseudo_observation(0.0, 0.5, LikelihoodKind::BernoulliLogit).is_err());
    }

    #[test]
    fn conditional_posterior_matches_frozen_brute_force_oracle() {
        // Fixed D = 2, n = 5 instance; expected values from a dense
        // arbitrary-precision inversion of the same system.
        let x = array![
            [0.4, -1.2],
            [1.1, 0.3],
            [-0.5, 0.9],
            [2.0, -0.7],
            [-1.3, 0.6]
        ];
        let z = [0.8, -0.4, 1.5, 0.1, -2.0];
        let vars = [4.0, 9.2, 5.5, 4.1, 7.3];
        let pseudo: Vec<PseudoObservation> = z
            .iter()
            .zip(&vars)
            .map(|(&z, &var)| PseudoObservation { z, var })
            .collect();
        let (mean, cov) = approx_conditional_posterior(&x, &pseudo, &[0.7, 2.4], 0.5).unwrap();
        let expect_mean = [0.023258272328086023, -0.12660695757938762];
        let expect_cov = [
            [0.10736520057314678, 0.047778744128456469],
            [0.047778744128456469, 0.74572807954939099],
        ];
        for j in 0..2 {
            assert!(
                ((mean[j] - expect_mean[j]) / expect_mean[j]).abs() < 1e-10,
                "mean[{j}] = {}",
                mean[j]
            );
            for k in 0..2 {
                assert!(
                    ((cov[[j, k]] - expect_cov[j][k]) / expect_cov[j][k]).abs() < 1e-10,
                    "cov[{j},{k}] = {}",
                    cov[[j, k]]
                );
            }
        }
    }

    #[test]
    fn no_shrinkage_limit_returns_pseudo_targets() {
        // tau -> infinity with X = I and unit variances: mean -> z.
        let x = Array2::<f64>::eye(3);
        let pseudo: Vec<PseudoObservation> = [1.0, -2.0, 0.5]
            .iter()
            .map(|&z| PseudoObservation { z, var: 1.0 })
            .collect();
        let (mean, _) = approx_conditional_posterior(&x, &pseudo, &[1.0, 1.0, 1.0], 1e8).unwrap();
        for (m, p) in mean.iter().zip(&pseudo) {
            assert!((m - p.z).abs() < 1e-10);
        }
    }

    #[test]
    fn gaussian_case_reduces_to_closed_form_shrinkage() {
        // With X^T X = n I and var_i = sigma^2, the posterior mean is
        // (1 - kappa_j) betahat_j coefficient-wise.
        let n = 4usize;
        // Orthogonal columns with squared norm n.
        let x = array![[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]];
        let sigma = 1.3;
        let y = [0.7, -0.2, 1.1, 0.4];
        let pseudo: Vec<PseudoObservation> = y
            .iter()
            .map(|&z| PseudoObservation { z, var: sigma * sigma })
            .collect();
        let lambdas = [0.6, 1.9];
        let tau = 0.8;
        let (mean, _) = approx_conditional_posterior(&x, &pseudo, &lambdas, tau).unwrap();
        let scale = crate::shrinkage::DesignScale::new(n, 2, sigma).unwrap();
        for j in 0..2 {
            let beta_hat: f64 =
                (0..n).map(|i| x[[i, j]] * y[i]).sum::<f64>() / n as f64;
            let kappa = crate::shrinkage::shrinkage_factor(lambdas[j], tau, &scale).unwrap();
            let expect = (1.0 - kappa) * beta_hat;
            assert!(
                ((mean[j] - expect) / expect).abs() < 1e-12,
                "j={j}: {} vs {expect}",
                mean[j]
            );
        }
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let x = Array2::<f64>::eye(3);
        let pseudo = vec![PseudoObservation { z: 0.0, var: 1.0 }; 2];
        assert!(approx_conditional_posterior(&x, &pseudo, &[1.0; 3], 1.0).is_err());
        let pseudo = vec![PseudoObservation { z: 0.0, var: 1.0 }; 3];
        assert!(approx_conditional_posterior(&x, &pseudo, &[1.0; 2], 1.0).is_err());
    }
}
