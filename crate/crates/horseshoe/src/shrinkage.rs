//! Closed-form shrinkage machinery for the horseshoe prior.
//!
//! Under an (approximately) orthogonal design with standardized predictors,
//! the conditional posterior mean of coefficient j is `(1 - kappa_j) * bhat_j`
//! with shrinkage factor
//!
//! ```text
//! kappa_j = 1 / (1 + n sigma^-2 tau^2 lambda_j^2)
//! ```
//!
//! Everything in this module depends on the inputs only through the compound
//! quantity `u = sigma^-1 tau sqrt(n)`, which is used throughout to avoid
//! overflow at extreme values of tau. The effective number of nonzero
//! coefficients is `m_eff = sum_j (1 - kappa_j)`; its prior mean and variance
//! given tau have closed forms that this module exposes, together with the
//! reference value `tau_0` that centers the prior for m_eff on a guess `p0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Problem dimensions and noise scale entering the shrinkage formulas.
///
/// For logistic models `sigma` is the plug-in pseudo-noise deviation
/// (see [`crate::glm::logistic_sigma_plugin`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignScale {
    /// Number of observations.
    pub n: usize,
    /// Number of predictors.
    pub d: usize,
    /// Noise standard deviation.
    pub sigma: f64,
}

impl DesignScale {
    pub fn new(n: usize, d: usize, sigma: f64) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::invalid("DesignScale requires n >= 1 and d >= 1"));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!(
                "DesignScale requires sigma > 0, got {sigma}"
            )));
        }
        Ok(DesignScale { n, d, sigma })
    }

    /// The compound quantity `u = sigma^-1 tau sqrt(n)`.
    #[inline]
    pub fn u(&self, tau: f64) -> f64 {
        tau * (self.n as f64).sqrt() / self.sigma
    }
}

/// Per-coefficient shrinkage factors and the implied effective model size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageProfile {
    /// Shrinkage factor per coefficient, each in [0, 1].
    pub kappa: Vec<f64>,
    /// Effective number of nonzero coefficients, `sum_j (1 - kappa_j)`.
    pub m_eff: f64,
}

impl ShrinkageProfile {
    /// Builds a profile from local scales at a given global scale.
    pub fn from_lambdas(lambdas: &[f64], tau: f64, scale: &DesignScale) -> Result<Self> {
        if lambdas.len() != scale.d {
            return Err(Error::DimensionMismatch(format!(
                "{} local scales for d = {}",
                lambdas.len(),
                scale.d
            )));
        }
        let kappa: Vec<f64> = lambdas
            .iter()
            .map(|&l| shrinkage_factor(l, tau, scale))
            .collect::<Result<_>>()?;
        let m_eff = kappa.iter().map(|k| 1.0 - k).sum();
        Ok(ShrinkageProfile { kappa, m_eff })
    }
}

/// First two moments of a scalar quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

#[inline]
pub(crate) fn kappa_from_t(t: f64) -> f64 {
    // t = u * lambda; kappa = 1 / (1 + t^2), safe for t = 0 and t = inf.
    let t2 = t * t;
    if t2.is_infinite() {
        0.0
    } else {
        1.0 / (1.0 + t2)
    }
}

#[inline]
pub(crate) fn kappa_complement_from_t(t: f64) -> f64 {
    // 1 - kappa = t^2 / (1 + t^2), computed without cancellation.
    let t2 = t * t;
    if t2.is_infinite() {
        1.0
    } else {
        t2 / (1.0 + t2)
    }
}

/// Shrinkage factor `kappa = 1 / (1 + n sigma^-2 tau^2 lambda^2)`.
///
/// `tau = 0` or `lambda = 0` yields complete shrinkage (kappa = 1) by
/// continuous extension.
pub fn shrinkage_factor(lambda: f64, tau: f64, scale: &DesignScale) -> Result<f64> {
    if !lambda.is_finite() && !(lambda.is_infinite() && lambda > 0.0) {
        return Err(Error::NonFinite {
            component: "shrinkage_factor lambda",
        });
    }
    if !tau.is_finite() {
        return Err(Error::NonFinite {
            component: "shrinkage_factor tau",
        });
    }
    if lambda < 0.0 || tau < 0.0 {
        return Err(Error::invalid("lambda and tau must be nonnegative"));
    }
    if lambda == 0.0 || tau == 0.0 {
        return Ok(1.0);
    }
    Ok(kappa_from_t(scale.u(tau) * lambda))
}

/// Prior density of the shrinkage factor under half-Cauchy local scales:
///
/// ```text
/// p(kappa | tau, sigma) = (1/pi) * u / ((u^2 - 1) kappa + 1) * 1 / sqrt(kappa (1 - kappa))
/// ```
///
/// Defined on the open interval (0, 1); the endpoint singularities are
/// integrable and the density integrates to one for every `u > 0`.
pub fn kappa_prior_density(kappa: f64, tau: f64, scale: &DesignScale) -> Result<f64> {
    if !(kappa.is_finite() && kappa > 0.0 && kappa < 1.0) {
        return Err(Error::invalid(format!(
            "kappa must lie strictly inside (0, 1), got {kappa}"
        )));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::invalid(format!("tau must be positive, got {tau}")));
    }
    let u = scale.u(tau);
    let denom = (u * u - 1.0) * kappa + 1.0;
    Ok(u / (std::f64::consts::PI * denom * (kappa.sqrt() * (1.0 - kappa).sqrt())))
}

/// Prior mean and variance of the shrinkage factor:
/// `E[kappa] = 1/(1+u)`, `Var[kappa] = u / (2 (1+u)^2)` with
/// `u = sigma^-1 tau sqrt(n)`. The variance never exceeds 1/8.
///
/// `tau = 0` returns the complete-shrinkage limit (mean 1, variance 0).
pub fn kappa_moments(tau: f64, scale: &DesignScale) -> Result<Moments> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(Error::invalid(format!(
            "tau must be finite and nonnegative, got {tau}"
        )));
    }
    let u = scale.u(tau);
    Ok(Moments {
        mean: 1.0 / (1.0 + u),
        variance: u / (2.0 * (1.0 + u) * (1.0 + u)),
    })
}

/// Prior mean and variance of the effective number of nonzero coefficients:
/// `E[m_eff] = u/(1+u) * D`, `Var[m_eff] = u/(2(1+u)^2) * D`.
pub fn meff_moments(tau: f64, scale: &DesignScale) -> Result<Moments> {
    let kappa = kappa_moments(tau, scale)?;
    let d = scale.d as f64;
    Ok(Moments {
        mean: (1.0 - kappa.mean) * d,
        variance: kappa.variance * d,
    })
}

/// Reference value `tau_0 = p0/(D - p0) * sigma/sqrt(n)`, the unique tau for
/// which the prior mean of m_eff equals the guess `p0`.
///
/// `p0` may be non-integer; it parametrizes a mean, not a count.
pub fn tau_reference(p0: f64, scale: &DesignScale) -> Result<f64> {
    let d = scale.d as f64;
    if !(p0.is_finite() && p0 > 0.0 && p0 < d) {
        return Err(Error::invalid(format!(
            "p0 must lie in (0, D) = (0, {d}), got {p0}"
        )));
    }
    Ok(p0 / (d - p0) * scale.sigma / (scale.n as f64).sqrt())
}

/// Reference value for the identity design (`X = I`, one observation per
/// coefficient), where `tau_0 = p0/(D - p0) * sigma`.
pub fn tau_reference_identity(p0: f64, d: usize, sigma: f64) -> Result<f64> {
    tau_reference(p0, &DesignScale::new(1, d, sigma)?)
}

/// The oracle global scale `tau* = p*/n` for the normal-means model, optimal
/// up to a log factor when the true number of nonzeros `p*` is known.
pub fn tau_oracle_vanderpas(p_star: usize, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    if p_star == 0 || p_star > n {
        return Err(Error::invalid(format!(
            "p_star must lie in 1..=n = 1..={n}, got {p_star}"
        )));
    }
    Ok(p_star as f64 / n as f64)
}
