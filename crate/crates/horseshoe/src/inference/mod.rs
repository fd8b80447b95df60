//! Full Bayesian inference for horseshoe linear and logistic regression.
//!
//! The sampler is Hamiltonian Monte Carlo on the non-centered
//! parametrization: raw coefficient scores `z_j ~ N(0,1)` with
//! `beta_j = z_j lambda_j tau`, all positive scales on the log scale with
//! Jacobians, dual-averaging step-size adaptation during warmup, and a
//! per-draw divergence flag. Chains run independently in parallel and the
//! result is deterministic given the seed.

mod diagnostics;
mod draws;
mod hmc;
mod model;

pub use diagnostics::{ess_bulk, split_rhat};
pub use draws::{Diagnostics, DrawsSummary, ParameterSummary, PosteriorDraws};

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::distributions::RngStream;
use crate::error::{Error, Result};
use crate::glm::{sigmoid, LikelihoodKind};
use crate::prior_design::{PriorConfig, Quantile, SUMMARY_PERCENTILES};
use crate::shrinkage::{kappa_from_t, DesignScale, ShrinkageProfile};
use crate::stats;

use self::hmc::HmcTarget;
use self::model::Model;

/// Model definition: likelihood, hyperpriors, and intercept handling.
///
/// The intercept is excluded from shrinkage and given a weakly informative
/// normal prior; Gaussian models use the reference prior
/// `p(sigma^2) ~ 1/sigma^2` unless `fixed_sigma` pins the noise scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub likelihood: LikelihoodKind,
    pub prior: PriorConfig,
    /// Standard deviation of the N(0, sd^2) intercept prior.
    pub intercept_prior_sd: f64,
    pub include_intercept: bool,
    /// Pins sigma for Gaussian models; `None` samples it.
    pub fixed_sigma: Option<f64>,
}

impl ModelSpec {
    pub fn new(likelihood: LikelihoodKind, prior: PriorConfig) -> Self {
        ModelSpec {
            likelihood,
            prior,
            intercept_prior_sd: 10.0,
            include_intercept: true,
            fixed_sigma: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.intercept_prior_sd.is_finite() && self.intercept_prior_sd > 0.0) {
            return Err(Error::invalid("intercept_prior_sd must be positive"));
        }
        if let Some(s) = self.fixed_sigma {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::invalid("fixed_sigma must be positive"));
            }
            if self.likelihood == LikelihoodKind::BernoulliLogit {
                return Err(Error::invalid(
                    "fixed_sigma applies only to the gaussian likelihood",
                ));
            }
        }
        if self.prior.couple_tau_to_sigma && self.likelihood == LikelihoodKind::BernoulliLogit {
            return Err(Error::invalid(
                "couple_tau_to_sigma requires a gaussian likelihood; \
                 use the sigma = 2 plug-in for logistic models",
            ));
        }
        Ok(())
    }

    /// Whether the noise scale is a sampled parameter.
    fn samples_sigma(&self) -> bool {
        self.likelihood == LikelihoodKind::Gaussian && self.fixed_sigma.is_none()
    }
}

/// Sampler configuration. `iterations` counts per-chain transitions
/// including warmup; the first `warmup_fraction` are discarded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerSettings {
    pub chains: usize,
    pub iterations: usize,
    pub warmup_fraction: f64,
    pub target_accept: f64,
    pub max_leapfrog: usize,
    pub seed: u64,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        SamplerSettings {
            chains: 4,
            iterations: 1000,
            warmup_fraction: 0.5,
            target_accept: 0.99,
            max_leapfrog: 128,
            seed: 0,
        }
    }
}

impl SamplerSettings {
    fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.iterations < 2 || self.max_leapfrog == 0 {
            return Err(Error::invalid("chains, iterations, max_leapfrog must be positive"));
        }
        if !(self.warmup_fraction > 0.0 && self.warmup_fraction < 1.0) {
            return Err(Error::invalid("warmup_fraction must lie in (0, 1)"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::invalid("target_accept must lie in (0, 1)"));
        }
        Ok(())
    }

    fn warmup(&self) -> usize {
        ((self.iterations as f64 * self.warmup_fraction).round() as usize)
            .clamp(1, self.iterations - 1)
    }
}

/// Offsets of the parameter blocks in the unconstrained vector
/// `[z(0..d), log lambda?, log tau?, log sigma?, intercept?]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ParamLayout {
    pub d: usize,
    pub lambda: Option<usize>,
    pub tau: Option<usize>,
    pub sigma: Option<usize>,
    pub intercept: Option<usize>,
    pub len: usize,
}

impl ParamLayout {
    fn for_spec(spec: &ModelSpec, d: usize) -> Self {
        let mut next = d;
        let lambda = (!spec.prior.lambda_prior.is_fixed()).then(|| {
            let off = next;
            next += d;
            off
        });
        let tau = (!spec.prior.tau_prior.is_fixed()).then(|| {
            let off = next;
            next += 1;
            off
        });
        let sigma = spec.samples_sigma().then(|| {
            let off = next;
            next += 1;
            off
        });
        let intercept = spec.include_intercept.then(|| {
            let off = next;
            next += 1;
            off
        });
        ParamLayout {
            d,
            lambda,
            tau,
            sigma,
            intercept,
            len: next,
        }
    }
}

impl HmcTarget for Model {
    fn dim(&self) -> usize {
        self.layout.len
    }

    fn logp_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        self.logp_grad_terms(theta, grad).total()
    }
}

impl Model {
    /// Draws an initial unconstrained point: `z` and the intercept from
    /// N(0, 0.1^2), log scales at their prior medians, `log sigma` at
    /// `log sd(y)`. Retries the random entries until the log posterior is
    /// finite, up to `max_redraws` times.
    fn initial_point(&self, rng: &mut rand_chacha::ChaCha8Rng, max_redraws: usize) -> Result<Vec<f64>> {
        let layout = &self.layout;
        let sigma_init = self.spec.fixed_sigma.unwrap_or_else(|| {
            if self.y.len() >= 2 {
                let v = stats::sample_variance(&self.y.to_vec()).sqrt();
                if v.is_finite() && v > 0.0 {
                    v
                } else {
                    1.0
                }
            } else {
                1.0
            }
        });
        let mut theta = vec![0.0; layout.len];
        if let Some(off) = layout.lambda {
            let m = self.spec.prior.lambda_prior.median().max(1e-10);
            for j in 0..layout.d {
                theta[off + j] = m.ln();
            }
        }
        if let Some(idx) = layout.tau {
            let eff = self.spec.prior.tau_prior_at_sigma(sigma_init);
            theta[idx] = eff.median().max(1e-300).ln();
        }
        if let Some(idx) = layout.sigma {
            theta[idx] = sigma_init.ln();
        }
        let mut grad = vec![0.0; layout.len];
        for _ in 0..max_redraws {
            for j in 0..layout.d {
                theta[j] = 0.1 * rng.sample::<f64, _>(StandardNormal);
            }
            if let Some(idx) = layout.intercept {
                theta[idx] = 0.1 * rng.sample::<f64, _>(StandardNormal);
            }
            if self.logp_grad(&theta, &mut grad).is_finite() {
                return Ok(theta);
            }
        }
        Err(Error::BadInitialPoint(max_redraws))
    }
}

/// Joint log posterior and exact gradient in the unconstrained space
/// `[z_j, log lambda_j, log tau, log sigma, intercept]` (blocks present
/// according to the spec). Uses the training rows of `data`.
///
/// A non-finite evaluation is reported with the offending component named.
pub fn log_posterior_and_gradient(
    spec: &ModelSpec,
    data: &Dataset,
    theta: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let (x, y) = data.train();
    let model = Model::new(spec.clone(), x, y)?;
    if theta.len() != model.layout.len {
        return Err(Error::DimensionMismatch(format!(
            "theta has {} entries, model expects {}",
            theta.len(),
            model.layout.len
        )));
    }
    let mut grad = vec![0.0; model.layout.len];
    let terms = model.logp_grad_terms(theta, &mut grad);
    if let Some(component) = terms.first_non_finite() {
        return Err(Error::NonFinite { component });
    }
    Ok((terms.total(), grad))
}

pub(crate) fn compute_diagnostics(draws: &PosteriorDraws) -> Diagnostics {
    let names = draws.parameter_names();
    let mut rhat = Vec::with_capacity(names.len());
    let mut ess = Vec::with_capacity(names.len());
    for name in &names {
        let values: Vec<f64> = match name.as_str() {
            "tau" => draws.tau.clone(),
            "sigma" => draws.sigma.clone().unwrap(),
            "intercept" => draws.intercept.clone().unwrap(),
            other => {
                if let Some(j) = other.strip_prefix("beta.") {
                    let j: usize = j.parse().unwrap();
                    draws.beta.column(j - 1).to_vec()
                } else {
                    let j: usize = other.strip_prefix("lambda.").unwrap().parse().unwrap();
                    draws.lambda.column(j - 1).to_vec()
                }
            }
        };
        let chains = draws.by_chain(&values);
        rhat.push(split_rhat(&chains));
        ess.push(ess_bulk(&chains));
    }
    Diagnostics {
        names,
        rhat,
        ess,
        divergences: draws.divergences(),
    }
}

/// Samples the posterior with HMC. Chains run in parallel on private RNG
/// streams (`stream id = chain index`); identical settings and seed give
/// bit-identical draws.
pub fn fit(spec: &ModelSpec, data: &Dataset, settings: &SamplerSettings) -> Result<PosteriorDraws> {
    settings.validate()?;
    let (x, y) = data.train();
    let model = Model::new(spec.clone(), x, y)?;
    let warmup = settings.warmup();
    let keep = settings.iterations - warmup;

    let chain_outputs: Vec<Result<hmc::ChainOutput>> = (0..settings.chains)
        .into_par_iter()
        .map(|chain| {
            let mut rng = RngStream::new(settings.seed, chain as u64).rng();
            let init = model.initial_point(&mut rng, 100)?;
            Ok(hmc::run_chain(
                &model,
                init,
                settings.iterations,
                warmup,
                settings.target_accept,
                settings.max_leapfrog,
                &mut rng,
            ))
        })
        .collect();

    let d = model.layout.d;
    let total = keep * settings.chains;
    let mut beta = Array2::<f64>::zeros((total, d));
    let mut lambda = Array2::<f64>::zeros((total, d));
    let mut tau = Vec::with_capacity(total);
    let mut sigma = model.layout.sigma.map(|_| Vec::with_capacity(total));
    let mut intercept = model.layout.intercept.map(|_| Vec::with_capacity(total));
    let mut chain_ids = Vec::with_capacity(total);
    let mut iterations = Vec::with_capacity(total);
    let mut divergent = Vec::with_capacity(total);

    for (chain, output) in chain_outputs.into_iter().enumerate() {
        let output = output?;
        if output.divergent.iter().all(|&dv| dv) {
            return Err(Error::AllDivergent(chain));
        }
        for (it, (theta, &dv)) in output.draws.iter().zip(&output.divergent).enumerate() {
            let row = chain * keep + it;
            let (b, l, t, s, ic) = model.constrain(theta);
            for j in 0..d {
                beta[[row, j]] = b[j];
                lambda[[row, j]] = l[j];
            }
            tau.push(t);
            if let Some(v) = sigma.as_mut() {
                v.push(s);
            }
            if let (Some(v), Some(icv)) = (intercept.as_mut(), ic) {
                v.push(icv);
            }
            chain_ids.push(chain);
            iterations.push(it);
            divergent.push(dv);
        }
    }

    let mut draws = PosteriorDraws {
        beta,
        lambda,
        tau,
        sigma,
        intercept,
        chain: chain_ids,
        iteration: iterations,
        divergent,
        likelihood: spec.likelihood,
        fixed_sigma: spec.fixed_sigma,
        n_chains: settings.chains,
        diagnostics: Diagnostics {
            names: vec![],
            rhat: vec![],
            ess: vec![],
            divergences: 0,
        },
    };
    draws.diagnostics = compute_diagnostics(&draws);
    Ok(draws)
}

/// Posterior shrinkage: per-draw shrinkage factors and m_eff, with a
/// quantile summary of the m_eff sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorShrinkage {
    pub profiles: Vec<ShrinkageProfile>,
    pub meff: Vec<f64>,
    pub meff_mean: f64,
    pub meff_quantiles: Vec<Quantile>,
}

/// Evaluates the shrinkage profile for every posterior draw.
///
/// The noise scale entering `kappa` is the per-draw sigma for Gaussian
/// models (the fixed value when sigma was pinned); logistic models plug in
/// sigma = 2, which is known to overestimate m_eff slightly.
pub fn posterior_shrinkage_profile(
    draws: &PosteriorDraws,
    scale: &DesignScale,
) -> Result<PosteriorShrinkage> {
    if draws.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if draws.d() != scale.d {
        return Err(Error::DimensionMismatch(format!(
            "draws have D = {}, scale says D = {}",
            draws.d(),
            scale.d
        )));
    }
    let sqrt_n = (scale.n as f64).sqrt();
    let mut profiles = Vec::with_capacity(draws.len());
    let mut meff = Vec::with_capacity(draws.len());
    for i in 0..draws.len() {
        let sigma = match draws.likelihood {
            LikelihoodKind::BernoulliLogit => crate::glm::logistic_sigma_plugin(),
            LikelihoodKind::Gaussian => match &draws.sigma {
                Some(v) => v[i],
                None => draws.fixed_sigma.unwrap_or(scale.sigma),
            },
        };
        let u = draws.tau[i] * sqrt_n / sigma;
        let kappa: Vec<f64> = (0..draws.d())
            .map(|j| kappa_from_t(u * draws.lambda[[i, j]]))
            .collect();
        let m: f64 = kappa.iter().map(|k| 1.0 - k).sum();
        meff.push(m);
        profiles.push(ShrinkageProfile { kappa, m_eff: m });
    }
    let mut sorted = meff.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let meff_quantiles = SUMMARY_PERCENTILES
        .iter()
        .map(|&p| Quantile {
            percent: p,
            value: stats::quantile_sorted(&sorted, p / 100.0),
        })
        .collect();
    Ok(PosteriorShrinkage {
        meff_mean: stats::mean(&meff),
        profiles,
        meff,
        meff_quantiles,
    })
}

/// Posterior predictions for new rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSummary {
    /// Posterior mean prediction per row: E[f] for Gaussian models, the
    /// draw-averaged event probability for logistic models.
    pub mean: Vec<f64>,
    /// Log predictive density per row (requires targets).
    pub lpd: Option<Vec<f64>>,
    /// Mean log predictive density over rows.
    pub mlpd: Option<f64>,
    /// Mean squared error of the mean predictions (requires targets).
    pub mse: Option<f64>,
}

/// Draw-averaged predictions: the predictive density of each target is the
/// average over draws of the per-draw density (Gaussian with that draw's
/// sigma, or the Bernoulli-logit probability), then logged.
///
/// `x_new` must be standardized with the training statistics and have the
/// training column count.
pub fn predict(
    draws: &PosteriorDraws,
    x_new: &Array2<f64>,
    y_new: Option<&Array1<f64>>,
) -> Result<PredictiveSummary> {
    if draws.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if x_new.ncols() != draws.d() {
        return Err(Error::DimensionMismatch(format!(
            "x_new has {} columns, model has {}",
            x_new.ncols(),
            draws.d()
        )));
    }
    if let Some(y) = y_new {
        if y.len() != x_new.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} targets for {} rows",
                y.len(),
                x_new.nrows()
            )));
        }
    }
    let s = draws.len();
    let n = x_new.nrows();
    // f[draw, row] = intercept + x_new . beta
    let mut f = x_new.dot(&draws.beta.t()); // n x s
    if let Some(ic) = &draws.intercept {
        for row in 0..n {
            for k in 0..s {
                f[[row, k]] += ic[k];
            }
        }
    }
    let gaussian_sigma = |k: usize| -> f64 {
        match &draws.sigma {
            Some(v) => v[k],
            None => draws.fixed_sigma.unwrap_or(1.0),
        }
    };

    let mut mean = Vec::with_capacity(n);
    for row in 0..n {
        let avg = match draws.likelihood {
            LikelihoodKind::Gaussian => (0..s).map(|k| f[[row, k]]).sum::<f64>() / s as f64,
            LikelihoodKind::BernoulliLogit => {
                (0..s).map(|k| sigmoid(f[[row, k]])).sum::<f64>() / s as f64
            }
        };
        mean.push(avg);
    }

    let (lpd, mlpd, mse) = if let Some(y) = y_new {
        let mut lpd = Vec::with_capacity(n);
        let mut log_dens = vec![0.0; s];
        for row in 0..n {
            for (k, ld) in log_dens.iter_mut().enumerate() {
                *ld = match draws.likelihood {
                    LikelihoodKind::Gaussian => {
                        let sigma = gaussian_sigma(k);
                        let r = (y[row] - f[[row, k]]) / sigma;
                        -0.5 * (2.0 * std::f64::consts::PI).ln() - sigma.ln() - 0.5 * r * r
                    }
                    LikelihoodKind::BernoulliLogit => {
                        let t = if y[row] == 1.0 { f[[row, k]] } else { -f[[row, k]] };
                        -crate::glm::log1p_exp(-t)
                    }
                };
            }
            lpd.push(stats::log_sum_exp(&log_dens) - (s as f64).ln());
        }
        let mlpd = stats::mean(&lpd);
        let mse = y
            .iter()
            .zip(&mean)
            .map(|(yi, mi)| (yi - mi) * (yi - mi))
            .sum::<f64>()
            / n as f64;
        (Some(lpd), Some(mlpd), Some(mse))
    } else {
        (None, None, None)
    };

    Ok(PredictiveSummary { mean, lpd, mlpd, mse })
}
