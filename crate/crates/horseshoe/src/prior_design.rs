//! Prior design for the global shrinkage parameter: translate a guess `p0`
//! for the number of relevant predictors into a hyperprior for `tau`, and
//! simulate the prior that any such choice imposes on the effective model
//! size `m_eff`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::distributions::{HyperpriorFamily, HyperpriorSpec, RngStream};
use crate::error::{Error, Result};
use crate::shrinkage::{kappa_complement_from_t, tau_reference, DesignScale};
use crate::stats;

/// Shard size for parallel prior simulation; draw `k` of a request always
/// lands in shard `k / SHARD_DRAWS` regardless of thread count.
const SHARD_DRAWS: usize = 8192;

/// Hyperprior configuration for a horseshoe model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Prior for the global scale `tau`.
    pub tau_prior: HyperpriorSpec,
    /// Prior for the local scales `lambda_j` (half-Cauchy(1) by default).
    pub lambda_prior: HyperpriorSpec,
    /// The guess for the number of relevant predictors, when the config was
    /// built from one.
    pub p0: Option<f64>,
    /// Dimensions and noise scale the config refers to.
    pub scale: DesignScale,
    /// When true, the effective scale of `tau_prior` is multiplied by the
    /// current noise level during inference (the `scale_global * sigma`
    /// convention); the stored scale should then be referenced to sigma = 1.
    pub couple_tau_to_sigma: bool,
}

impl PriorConfig {
    /// A config with an explicit `tau` prior and default half-Cauchy(1)
    /// local scales, bypassing the `p0` elicitation.
    pub fn with_tau_prior(tau_prior: HyperpriorSpec, scale: DesignScale) -> Self {
        PriorConfig {
            tau_prior,
            lambda_prior: HyperpriorSpec::half_cauchy(1.0).expect("valid scale"),
            p0: None,
            scale,
            couple_tau_to_sigma: false,
        }
    }

    /// Marks the global scale as coupled to the noise level. The stored
    /// `tau_prior.scale` must be referenced to sigma = 1.
    pub fn coupled_to_sigma(mut self) -> Self {
        self.couple_tau_to_sigma = true;
        self
    }

    /// The `tau` prior at a given noise level: scaled by `sigma` when
    /// coupling is on, unchanged otherwise.
    pub fn tau_prior_at_sigma(&self, sigma: f64) -> HyperpriorSpec {
        if self.couple_tau_to_sigma {
            self.tau_prior.scaled_by(sigma)
        } else {
            self.tau_prior
        }
    }
}

/// Builds a [`PriorConfig`] whose `tau` prior has scale
/// `tau_0 = p0/(D - p0) * sigma/sqrt(n)`, so that the implied prior for
/// `m_eff` is centered near `p0`. `df` is required for the half-t family.
///
/// The noise level in `scale` is taken as given: pass the plug-in value
/// (e.g. 2 for logistic models) or sigma = 1 followed by
/// [`PriorConfig::coupled_to_sigma`] when `tau` should track an inferred
/// noise level.
pub fn make_prior_config(
    p0: f64,
    scale: DesignScale,
    family: HyperpriorFamily,
    df: Option<f64>,
) -> Result<PriorConfig> {
    let tau0 = tau_reference(p0, &scale)?;
    Ok(PriorConfig {
        tau_prior: HyperpriorSpec::from_family(family, tau0, df)?,
        lambda_prior: HyperpriorSpec::half_cauchy(1.0)?,
        p0: Some(p0),
        scale,
        couple_tau_to_sigma: false,
    })
}

/// Monte-Carlo draws from the prior of the effective model size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeffPriorSample {
    /// m_eff per draw, each in [0, D].
    pub draws: Vec<f64>,
    /// The tau draw behind each m_eff draw.
    pub tau_draws: Vec<f64>,
    /// Number of predictors the draws refer to.
    pub d: usize,
}

/// Simulates the prior on `m_eff` imposed by a [`PriorConfig`]: draw
/// `tau` from its prior and `lambda_1..lambda_D` i.i.d. from the local
/// prior, form the shrinkage factors, and accumulate `sum_j (1 - kappa_j)`.
///
/// Draws are sharded across worker threads; shard `k` uses stream
/// `rng.stream + k`, and results are concatenated in shard order, so the
/// output is independent of the thread count.
pub fn sample_meff_prior(
    config: &PriorConfig,
    num_draws: usize,
    rng: RngStream,
) -> Result<MeffPriorSample> {
    if num_draws == 0 {
        return Err(Error::invalid("num_draws must be at least 1"));
    }
    let tau_prior = config.tau_prior_at_sigma(config.scale.sigma);
    let d = config.scale.d;
    let shards = num_draws.div_ceil(SHARD_DRAWS);
    let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let lo = shard * SHARD_DRAWS;
            let hi = (lo + SHARD_DRAWS).min(num_draws);
            let mut r = rng.substream(shard as u64).rng();
            let mut meff = Vec::with_capacity(hi - lo);
            let mut taus = Vec::with_capacity(hi - lo);
            for _ in lo..hi {
                let tau = tau_prior.sample(&mut r);
                let u = config.scale.u(tau);
                let mut m = 0.0;
                for _ in 0..d {
                    let lambda = config.lambda_prior.sample(&mut r);
                    m += kappa_complement_from_t(u * lambda);
                }
                meff.push(m);
                taus.push(tau);
            }
            (meff, taus)
        })
        .collect();
    let mut draws = Vec::with_capacity(num_draws);
    let mut tau_draws = Vec::with_capacity(num_draws);
    for (m, t) in parts {
        draws.extend(m);
        tau_draws.extend(t);
    }
    Ok(MeffPriorSample {
        draws,
        tau_draws,
        d,
    })
}

/// One histogram bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: u64,
}

/// A named quantile of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantile {
    /// Probability level in percent (1, 5, 25, 50, 75, 95, 99).
    pub percent: f64,
    pub value: f64,
}

/// Histogram plus summary statistics of an `m_eff` prior sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeffSummary {
    pub histogram: Vec<HistogramBin>,
    pub mean: f64,
    #[serde(rename = "var")]
    pub variance: f64,
    pub quantiles: Vec<Quantile>,
}

pub const SUMMARY_PERCENTILES: [f64; 7] = [1.0, 5.0, 25.0, 50.0, 75.0, 95.0, 99.0];

/// Summarizes an `m_eff` sample with an equal-width histogram over [0, D]
/// and the standard quantile table.
pub fn summarize_meff(sample: &MeffPriorSample, bins: usize) -> Result<MeffSummary> {
    if sample.draws.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if bins == 0 {
        return Err(Error::invalid("bins must be at least 1"));
    }
    let d = sample.d as f64;
    let width = d / bins as f64;
    let mut histogram: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            left: i as f64 * width,
            right: (i + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &m in &sample.draws {
        // Draws at exactly D fall into the last bin.
        let idx = ((m / width) as usize).min(bins - 1);
        histogram[idx].count += 1;
    }
    let mut sorted = sample.draws.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantiles = SUMMARY_PERCENTILES
        .iter()
        .map(|&p| Quantile {
            percent: p,
            value: stats::quantile_sorted(&sorted, p / 100.0),
        })
        .collect();
    Ok(MeffSummary {
        histogram,
        mean: stats::mean(&sample.draws),
        variance: stats::sample_variance(&sample.draws),
        quantiles,
    })
}

impl MeffSummary {
    /// Writes the histogram as CSV with columns `bin_left,bin_right,count`.
    pub fn write_histogram_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_left,bin_right,count")?;
        for b in &self.histogram {
            writeln!(w, "{},{},{}", b.left, b.right, b.count)?;
        }
        Ok(())
    }

    /// Serializes mean / var / quantiles (and the histogram) as JSON.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
