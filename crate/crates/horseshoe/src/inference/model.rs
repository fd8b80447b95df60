//! Joint log posterior and exact gradient in the unconstrained space.
//!
//! The coefficient block uses the non-centered parametrization
//! `beta_j = z_j * lambda_j * tau` with `z_j ~ N(0,1)`, which decouples the
//! hierarchy scales from the coefficient draws. All positive parameters are
//! sampled on the log scale with their Jacobian terms included; the
//! reference prior `p(sigma^2) ~ 1/sigma^2` is exactly flat in `log sigma`
//! and contributes no term.

use ndarray::{Array1, Array2};

use super::{ModelSpec, ParamLayout};
use crate::error::{Error, Result};
use crate::glm::{log1p_exp, sigmoid, LikelihoodKind};

const LN_2PI: f64 = 1.8378770664093453;

/// The additive pieces of the joint log density; kept separate so a
/// non-finite evaluation can name the offending component.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogPosteriorTerms {
    pub likelihood: f64,
    pub z_prior: f64,
    pub lambda_prior: f64,
    pub tau_prior: f64,
    pub intercept_prior: f64,
}

impl LogPosteriorTerms {
    pub fn total(&self) -> f64 {
        self.likelihood + self.z_prior + self.lambda_prior + self.tau_prior + self.intercept_prior
    }

    pub fn first_non_finite(&self) -> Option<&'static str> {
        [
            (self.likelihood, "likelihood"),
            (self.z_prior, "z prior"),
            (self.lambda_prior, "lambda prior"),
            (self.tau_prior, "tau prior"),
            (self.intercept_prior, "intercept prior"),
        ]
        .iter()
        .find(|(v, _)| !v.is_finite())
        .map(|&(_, name)| name)
    }
}

/// A fully-specified sampling target: model spec plus training data.
pub(crate) struct Model {
    pub spec: ModelSpec,
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub layout: ParamLayout,
}

impl Model {
    pub fn new(spec: ModelSpec, x: Array2<f64>, y: Array1<f64>) -> Result<Self> {
        spec.validate()?;
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows vs {} targets",
                x.nrows(),
                y.len()
            )));
        }
        if x.ncols() != spec.prior.scale.d {
            return Err(Error::DimensionMismatch(format!(
                "design has {} columns but the prior config says D = {}",
                x.ncols(),
                spec.prior.scale.d
            )));
        }
        if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { component: "data" });
        }
        let layout = ParamLayout::for_spec(&spec, x.ncols());
        Ok(Model { spec, x, y, layout })
    }

    /// Unpacks constrained values from the unconstrained vector.
    /// Returns (lambda_j closure inputs are handled by caller via layout).
    #[inline]
    fn tau_value(&self, theta: &[f64], sigma: f64) -> f64 {
        match self.layout.tau {
            Some(idx) => theta[idx].exp(),
            None => {
                let base = self.spec.prior.tau_prior.scale;
                if self.spec.prior.couple_tau_to_sigma {
                    base * sigma
                } else {
                    base
                }
            }
        }
    }

    #[inline]
    fn sigma_value(&self, theta: &[f64]) -> f64 {
        match self.layout.sigma {
            Some(idx) => theta[idx].exp(),
            None => self.spec.fixed_sigma.unwrap_or(1.0),
        }
    }

    /// Log posterior terms and gradient. `grad` must have `layout.len`
    /// entries and is overwritten.
    pub fn logp_grad_terms(&self, theta: &[f64], grad: &mut [f64]) -> LogPosteriorTerms {
        debug_assert_eq!(theta.len(), self.layout.len);
        debug_assert_eq!(grad.len(), self.layout.len);
        grad.iter_mut().for_each(|g| *g = 0.0);

        let layout = &self.layout;
        let d = layout.d;
        let n = self.x.nrows();
        let prior = &self.spec.prior;

        let sigma = self.sigma_value(theta);
        let tau = self.tau_value(theta, sigma);
        let lambda_fixed = prior.lambda_prior.scale;
        let lambda = |j: usize| -> f64 {
            match layout.lambda {
                Some(off) => theta[off + j].exp(),
                None => lambda_fixed,
            }
        };
        let intercept = layout.intercept.map_or(0.0, |idx| theta[idx]);

        // Linear predictor f = X beta + intercept with beta_j = z_j lambda_j tau.
        let mut beta = Array1::<f64>::zeros(d);
        for j in 0..d {
            beta[j] = theta[j] * lambda(j) * tau;
        }
        let mut f = self.x.dot(&beta);
        if intercept != 0.0 {
            f.mapv_inplace(|v| v + intercept);
        }

        // Likelihood and its derivative in f (and in log sigma for gaussian).
        let mut likelihood = 0.0;
        let mut dll_df = Array1::<f64>::zeros(n);
        let mut dll_dlogsigma = 0.0;
        match self.spec.likelihood {
            LikelihoodKind::Gaussian => {
                let inv_var = 1.0 / (sigma * sigma);
                let mut ssr = 0.0;
                for i in 0..n {
                    let r = self.y[i] - f[i];
                    ssr += r * r;
                    dll_df[i] = r * inv_var;
                }
                likelihood =
                    -0.5 * n as f64 * LN_2PI - n as f64 * sigma.ln() - 0.5 * ssr * inv_var;
                dll_dlogsigma = -(n as f64) + ssr * inv_var;
            }
            LikelihoodKind::BernoulliLogit => {
                for i in 0..n {
                    let fi = f[i];
                    likelihood += self.y[i] * fi - log1p_exp(fi);
                    dll_df[i] = self.y[i] - sigmoid(fi);
                }
            }
        }

        // Chain rule through beta: g_beta = X^T dll/df.
        let g_beta = self.x.t().dot(&dll_df);
        let mut sum_gbeta_beta = 0.0;
        for j in 0..d {
            sum_gbeta_beta += g_beta[j] * beta[j];
        }

        // z block: likelihood pull plus standard normal prior.
        let mut z_prior = -0.5 * d as f64 * LN_2PI;
        for j in 0..d {
            let z = theta[j];
            z_prior -= 0.5 * z * z;
            grad[j] = g_beta[j] * lambda(j) * tau - z;
        }

        // Local scales: half prior density plus log-Jacobian, when sampled.
        let mut lambda_prior_term = 0.0;
        if let Some(off) = layout.lambda {
            for j in 0..d {
                let l = lambda(j);
                lambda_prior_term += prior.lambda_prior.log_density_unchecked(l) + l.ln();
                grad[off + j] =
                    g_beta[j] * beta[j] + l * prior.lambda_prior.dlog_density_dx(l) + 1.0;
            }
        }

        // Global scale: prior evaluated at the effective (possibly
        // sigma-coupled) scale, plus log-Jacobian.
        let mut tau_prior_term = 0.0;
        if let Some(idx) = layout.tau {
            let eff = prior.tau_prior_at_sigma(sigma);
            tau_prior_term = eff.log_density_unchecked(tau) + tau.ln();
            let dtau = tau * eff.dlog_density_dx(tau);
            grad[idx] = sum_gbeta_beta + dtau + 1.0;
            // Scale coupling: d/dlog(sigma) of log p(tau | a sigma) = -(tau p'/p + 1).
            if prior.couple_tau_to_sigma {
                if let Some(sidx) = layout.sigma {
                    grad[sidx] -= dtau + 1.0;
                }
            }
        } else if prior.couple_tau_to_sigma {
            // Fixed tau proportional to sigma: beta depends on log sigma.
            if let Some(sidx) = layout.sigma {
                grad[sidx] += sum_gbeta_beta;
            }
        }

        // Noise scale: p(sigma^2) ~ 1/sigma^2 is flat in log sigma, so only
        // the likelihood contributes.
        if let Some(sidx) = layout.sigma {
            grad[sidx] += dll_dlogsigma;
        }

        // Intercept: weakly informative normal prior.
        let mut intercept_prior = 0.0;
        if let Some(idx) = layout.intercept {
            let sd = self.spec.intercept_prior_sd;
            intercept_prior = -0.5 * (intercept / sd) * (intercept / sd) - sd.ln() - 0.5 * LN_2PI;
            grad[idx] = dll_df.sum() - intercept / (sd * sd);
        }

        LogPosteriorTerms {
            likelihood,
            z_prior,
            lambda_prior: lambda_prior_term,
            tau_prior: tau_prior_term,
            intercept_prior,
        }
    }

    /// Reconstructs constrained parameters from an unconstrained draw:
    /// (beta, lambda, tau, sigma, intercept).
    pub fn constrain(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>, f64, f64, Option<f64>) {
        let sigma = self.sigma_value(theta);
        let tau = self.tau_value(theta, sigma);
        let d = self.layout.d;
        let lambda: Vec<f64> = (0..d)
            .map(|j| match self.layout.lambda {
                Some(off) => theta[off + j].exp(),
                None => self.spec.prior.lambda_prior.scale,
            })
            .collect();
        let beta: Vec<f64> = (0..d).map(|j| theta[j] * lambda[j] * tau).collect();
        let intercept = self.layout.intercept.map(|idx| theta[idx]);
        (beta, lambda, tau, sigma, intercept)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{HyperpriorSpec, RngStream};
    use crate::prior_design::PriorConfig;
    use crate::shrinkage::DesignScale;
    use ndarray::Array2;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn toy_model(
        likelihood: LikelihoodKind,
        tau_prior: HyperpriorSpec,
        lambda_prior: HyperpriorSpec,
        couple: bool,
        fixed_sigma: Option<f64>,
        include_intercept: bool,
        n: usize,
        d: usize,
        seed: u64,
    ) -> Model {
        let mut rng = RngStream::new(seed, 0).rng();
        let x = Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal));
        let y = Array1::from_shape_fn(n, |i| match likelihood {
            LikelihoodKind::Gaussian => {
                x[[i, 0]] * 1.5 + rng.sample::<f64, _>(StandardNormal)
            }
            LikelihoodKind::BernoulliLogit => {
                let p = sigmoid(x[[i, 0]] * 1.5);
                if rng.gen::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
        });
        let mut prior = PriorConfig::with_tau_prior(
            tau_prior,
            DesignScale::new(n.max(1), d, 1.0).unwrap(),
        );
        prior.lambda_prior = lambda_prior;
        prior.couple_tau_to_sigma = couple;
        let mut spec = ModelSpec::new(likelihood, prior);
        spec.include_intercept = include_intercept;
        spec.fixed_sigma = fixed_sigma;
        Model::new(spec, x, y).unwrap()
    }

    fn finite_difference_check(model: &Model, seed: u64, points: usize) {
        let len = model.layout.len;
        let mut rng = RngStream::new(seed, 1).rng();
        for _ in 0..points {
            let theta: Vec<f64> = (0..len)
                .map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let mut grad = vec![0.0; len];
            model.logp_grad_terms(&theta, &mut grad);
            let mut scratch = vec![0.0; len];
            for k in 0..len {
                let h = 1e-5 * theta[k].abs().max(1.0);
                let mut tp = theta.clone();
                tp[k] += h;
                let fp = model.logp_grad_terms(&tp, &mut scratch).total();
                tp[k] -= 2.0 * h;
                let fm = model.logp_grad_terms(&tp, &mut scratch).total();
                let fd = (fp - fm) / (2.0 * h);
                let rel = (fd - grad[k]).abs() / grad[k].abs().max(fd.abs()).max(1e-3);
                assert!(
                    rel < 1e-5,
                    "coord {k}: analytic {} vs fd {fd} (rel {rel})",
                    grad[k]
                );
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences_gaussian() {
        let m = toy_model(
            LikelihoodKind::Gaussian,
            HyperpriorSpec::half_cauchy(0.1).unwrap(),
            HyperpriorSpec::half_cauchy(1.0).unwrap(),
            false,
            None,
            true,
            12,
            5,
            1,
        );
        finite_difference_check(&m, 10, 5);
    }

    #[test]
    fn gradient_matches_finite_differences_logistic() {
        let m = toy_model(
            LikelihoodKind::BernoulliLogit,
            HyperpriorSpec::half_normal(0.2).unwrap(),
            HyperpriorSpec::half_cauchy(1.0).unwrap(),
            false,
            None,
            true,
            12,
            5,
            2,
        );
        finite_difference_check(&m, 11, 5);
    }

    #[test]
    fn gradient_matches_finite_differences_coupled_tau() {
        let m = toy_model(
            LikelihoodKind::Gaussian,
            HyperpriorSpec::half_t(3.0, 0.05).unwrap(),
            HyperpriorSpec::half_t(2.0, 1.0).unwrap(),
            true,
            None,
            false,
            12,
            5,
            3,
        );
        finite_difference_check(&m, 12, 5);
    }

    #[test]
    fn gradient_matches_finite_differences_fixed_coupled_tau() {
        // Fixed tau proportional to sigma: the likelihood feels sigma
        // through beta as well.
        let m = toy_model(
            LikelihoodKind::Gaussian,
            HyperpriorSpec::fixed(0.3).unwrap(),
            HyperpriorSpec::half_cauchy(1.0).unwrap(),
            true,
            None,
            true,
            10,
            4,
            4,
        );
        assert!(m.layout.tau.is_none());
        assert!(m.layout.sigma.is_some());
        finite_difference_check(&m, 13, 5);
    }

    #[test]
    fn zero_data_posterior_is_pure_prior() {
        let m = toy_model(
            LikelihoodKind::Gaussian,
            HyperpriorSpec::half_cauchy(1.0).unwrap(),
            HyperpriorSpec::half_cauchy(1.0).unwrap(),
            false,
            Some(1.0),
            false,
            0,
            2,
            5,
        );
        let theta = vec![0.3, -0.7, 0.2, -0.1, 0.4];
        assert_eq!(theta.len(), m.layout.len);
        let mut grad = vec![0.0; m.layout.len];
        let terms = m.logp_grad_terms(&theta, &mut grad);
        assert_eq!(terms.likelihood, 0.0);
        assert!(terms.total().is_finite());
        finite_difference_check(&m, 14, 3);
    }

    #[test]
    fn constrain_round_trip() {
        let m = toy_model(
            LikelihoodKind::Gaussian,
            HyperpriorSpec::half_cauchy(0.1).unwrap(),
            HyperpriorSpec::half_cauchy(1.0).unwrap(),
            false,
            None,
            true,
            8,
            3,
            6,
        );
        // theta = [z(3), log lambda(3), log tau, log sigma, intercept]
        let theta = vec![1.0, -2.0, 0.5, 0.1, 0.2, -0.3, -1.0, 0.4, 2.5];
        let (beta, lambda, tau, sigma, intercept) = m.constrain(&theta);
        assert_eq!(intercept, Some(2.5));
        assert!((tau - (-1.0f64).exp()).abs() < 1e-15);
        assert!((sigma - 0.4f64.exp()).abs() < 1e-15);
        for j in 0..3 {
            assert!((lambda[j] - theta[3 + j].exp()).abs() < 1e-15);
            assert!((beta[j] - theta[j] * lambda[j] * tau).abs() < 1e-15);
        }
    }
}
