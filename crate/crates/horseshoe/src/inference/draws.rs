//! Posterior draw storage, diagnostics summaries, and export formats.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::glm::LikelihoodKind;
use crate::prior_design::Quantile;

/// MCMC output: one row per kept draw across all chains, in chain-major
/// order, plus per-parameter convergence diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    /// Regression coefficients, `draws x D`.
    pub beta: Array2<f64>,
    /// Local scales, `draws x D`.
    pub lambda: Array2<f64>,
    /// Global scale per draw.
    pub tau: Vec<f64>,
    /// Noise scale per draw (sampled Gaussian models only).
    pub sigma: Option<Vec<f64>>,
    /// Intercept per draw, when the model includes one.
    pub intercept: Option<Vec<f64>>,
    /// Chain id per draw.
    pub chain: Vec<usize>,
    /// Post-warmup iteration index per draw (within its chain).
    pub iteration: Vec<usize>,
    /// Divergence flag per draw.
    pub divergent: Vec<bool>,
    pub likelihood: LikelihoodKind,
    /// The plug-in noise value for Gaussian models with fixed sigma.
    pub fixed_sigma: Option<f64>,
    pub n_chains: usize,
    pub diagnostics: Diagnostics,
}

/// Per-parameter split R-hat and bulk ESS, plus the divergence count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub names: Vec<String>,
    pub rhat: Vec<f64>,
    pub ess: Vec<f64>,
    pub divergences: usize,
}

impl Diagnostics {
    pub fn max_rhat(&self) -> f64 {
        self.rhat.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_ess(&self) -> f64 {
        self.ess.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn rhat_for(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.rhat[i])
    }

    pub fn ess_for(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.ess[i])
    }
}

/// Summary row for one parameter in the JSON export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub quantiles: Vec<Quantile>,
    pub rhat: f64,
    pub ess: f64,
}

/// JSON summary of a posterior sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawsSummary {
    pub parameters: Vec<ParameterSummary>,
    pub divergences: usize,
    pub n_draws: usize,
    pub n_chains: usize,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn d(&self) -> usize {
        self.beta.ncols()
    }

    /// Number of divergent post-warmup transitions.
    pub fn divergences(&self) -> usize {
        self.divergent.iter().filter(|&&d| d).count()
    }

    /// Column names in CSV export order, after the bookkeeping columns.
    pub fn parameter_names(&self) -> Vec<String> {
        let d = self.d();
        let mut names: Vec<String> = (1..=d).map(|j| format!("beta.{j}")).collect();
        names.extend((1..=d).map(|j| format!("lambda.{j}")));
        names.push("tau".to_string());
        if self.sigma.is_some() {
            names.push("sigma".to_string());
        }
        if self.intercept.is_some() {
            names.push("intercept".to_string());
        }
        names
    }

    fn parameter_column(&self, name: &str) -> Vec<f64> {
        let s = self.len();
        if let Some(j) = name.strip_prefix("beta.") {
            let j: usize = j.parse().unwrap();
            return (0..s).map(|i| self.beta[[i, j - 1]]).collect();
        }
        if let Some(j) = name.strip_prefix("lambda.") {
            let j: usize = j.parse().unwrap();
            return (0..s).map(|i| self.lambda[[i, j - 1]]).collect();
        }
        match name {
            "tau" => self.tau.clone(),
            "sigma" => self.sigma.clone().expect("sigma column requested"),
            "intercept" => self.intercept.clone().expect("intercept column requested"),
            other => panic!("unknown parameter {other}"),
        }
    }

    /// Groups one parameter's draws by chain, preserving iteration order.
    pub(crate) fn by_chain(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let mut chains = vec![Vec::new(); self.n_chains];
        for (v, &c) in values.iter().zip(&self.chain) {
            chains[c].push(*v);
        }
        chains
    }

    /// One CSV row per draw: `chain,iteration,divergent,<parameters...>`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let names = self.parameter_names();
        writeln!(w, "chain,iteration,divergent,{}", names.join(","))?;
        let columns: Vec<Vec<f64>> = names.iter().map(|n| self.parameter_column(n)).collect();
        for i in 0..self.len() {
            write!(
                w,
                "{},{},{}",
                self.chain[i], self.iteration[i], self.divergent[i] as u8
            )?;
            for col in &columns {
                write!(w, ",{}", col[i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Means, sds, quantiles, R-hat, and ESS for every parameter.
    pub fn summary(&self) -> DrawsSummary {
        let names = self.parameter_names();
        let parameters = names
            .iter()
            .map(|name| {
                let values = self.parameter_column(name);
                let mut sorted = values.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let quantiles = crate::prior_design::SUMMARY_PERCENTILES
                    .iter()
                    .map(|&p| Quantile {
                        percent: p,
                        value: crate::stats::quantile_sorted(&sorted, p / 100.0),
                    })
                    .collect();
                ParameterSummary {
                    name: name.clone(),
                    mean: crate::stats::mean(&values),
                    sd: crate::stats::sample_variance(&values).sqrt(),
                    quantiles,
                    rhat: self.diagnostics.rhat_for(name).unwrap_or(f64::NAN),
                    ess: self.diagnostics.ess_for(name).unwrap_or(f64::NAN),
                }
            })
            .collect();
        DrawsSummary {
            parameters,
            divergences: self.divergences(),
            n_draws: self.len(),
            n_chains: self.n_chains,
        }
    }

    /// Rebuilds a draw container from a CSV produced by [`Self::write_csv`].
    /// Diagnostics are recomputed from the stored chains.
    pub fn read_csv<R: std::io::Read>(
        reader: R,
        likelihood: LikelihoodKind,
        fixed_sigma: Option<f64>,
    ) -> Result<Self> {
        let mut csv_reader = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = csv_reader.headers()?.iter().map(String::from).collect();
        let d = headers.iter().filter(|h| h.starts_with("beta.")).count();
        if d == 0 {
            return Err(Error::invalid("no beta columns in draws CSV"));
        }
        let has_sigma = headers.iter().any(|h| h == "sigma");
        let has_intercept = headers.iter().any(|h| h == "intercept");
        let col = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::invalid(format!("missing column {name}")))
        };
        let chain_col = col("chain")?;
        let iter_col = col("iteration")?;
        let div_col = col("divergent")?;
        let beta_cols: Vec<usize> = (1..=d)
            .map(|j| col(&format!("beta.{j}")))
            .collect::<Result<_>>()?;
        let lambda_cols: Vec<usize> = (1..=d)
            .map(|j| col(&format!("lambda.{j}")))
            .collect::<Result<_>>()?;
        let tau_col = col("tau")?;

        let mut beta = Vec::new();
        let mut lambda = Vec::new();
        let mut tau = Vec::new();
        let mut sigma = Vec::new();
        let mut intercept = Vec::new();
        let mut chain = Vec::new();
        let mut iteration = Vec::new();
        let mut divergent = Vec::new();
        for record in csv_reader.records() {
            let r = record?;
            let get = |c: usize| -> f64 { r[c].parse().unwrap_or(f64::NAN) };
            chain.push(get(chain_col) as usize);
            iteration.push(get(iter_col) as usize);
            divergent.push(get(div_col) != 0.0);
            for &c in &beta_cols {
                beta.push(get(c));
            }
            for &c in &lambda_cols {
                lambda.push(get(c));
            }
            tau.push(get(tau_col));
            if has_sigma {
                sigma.push(get(col("sigma")?));
            }
            if has_intercept {
                intercept.push(get(col("intercept")?));
            }
        }
        let s = tau.len();
        if s == 0 {
            return Err(Error::EmptyDataset);
        }
        let n_chains = chain.iter().max().map_or(1, |m| m + 1);
        let mut draws = PosteriorDraws {
            beta: Array2::from_shape_vec((s, d), beta)
                .map_err(|e| Error::invalid(e.to_string()))?,
            lambda: Array2::from_shape_vec((s, d), lambda)
                .map_err(|e| Error::invalid(e.to_string()))?,
            tau,
            sigma: has_sigma.then_some(sigma),
            intercept: has_intercept.then_some(intercept),
            chain,
            iteration,
            divergent,
            likelihood,
            fixed_sigma,
            n_chains,
            diagnostics: Diagnostics {
                names: vec![],
                rhat: vec![],
                ess: vec![],
                divergences: 0,
            },
        };
        draws.diagnostics = super::compute_diagnostics(&draws);
        Ok(draws)
    }
}
