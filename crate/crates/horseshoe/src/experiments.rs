//! Experiment runners: the m_eff prior report, single-model fits, the
//! normal-means benchmark, and the p0 sweep, plus manifests and file
//! output.
//!
//! Every runner is deterministic given its seed. Result CSV/JSON files
//! contain no volatile values; wall-clock times are kept in memory and
//! written separately to `timings.txt` so repeated runs with the same seed
//! produce byte-identical CSV/JSON artifacts.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;

use crate::data::{generate_normal_means, Dataset, Standardization, Task};
use crate::distributions::{HyperpriorFamily, HyperpriorSpec, RngStream};
use crate::error::{Error, Result};
use crate::glm::{log1p_exp, logistic_sigma_plugin, LikelihoodKind};
use crate::inference::{
    fit, posterior_shrinkage_profile, predict, ModelSpec, PosteriorDraws, SamplerSettings,
};
use crate::lasso::lasso_cv;
use crate::prior_design::{
    make_prior_config, sample_meff_prior, summarize_meff, MeffSummary, PriorConfig, Quantile,
};
use crate::shrinkage::{tau_reference, DesignScale};
use crate::stats;

/// Writes a file atomically: the content lands under a temporary name and
/// is renamed into place.
pub fn write_atomic(path: &Path, content: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Run manifest: everything needed to reproduce the artifact bit-for-bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub crate_version: String,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(experiment: &str, config: serde_json::Value, seed: u64, outputs: Vec<String>) -> Self {
        Manifest {
            experiment: experiment.to_string(),
            config,
            seed,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join("manifest.json"), serde_json::to_string_pretty(self)?.as_bytes())
    }
}

/// Writes wall-clock timings as plain text (deliberately not CSV/JSON:
/// timing is the one non-reproducible output).
pub fn write_timings(dir: &Path, timings: &[(String, f64)]) -> Result<()> {
    let mut text = String::new();
    for (label, secs) in timings {
        text.push_str(&format!("{label}\t{secs:.3}s\n"));
    }
    write_atomic(&dir.join("timings.txt"), text.as_bytes())
}

/// Spreads a cell index into an independent seed.
fn cell_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ 0x9E3779B97F4A7C15u64.wrapping_mul(index.wrapping_add(1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// The standard scale/coupling convention per task: regression couples the
/// tau scale to the inferred sigma (stored scale referenced to sigma = 1);
/// classification plugs in sigma = 2.
pub fn prior_config_for_task(
    task: Task,
    p0: f64,
    n: usize,
    d: usize,
    family: HyperpriorFamily,
    df: Option<f64>,
) -> Result<PriorConfig> {
    match task {
        Task::Regression => Ok(make_prior_config(
            p0,
            DesignScale::new(n, d, 1.0)?,
            family,
            df,
        )?
        .coupled_to_sigma()),
        Task::Classification => make_prior_config(
            p0,
            DesignScale::new(n, d, logistic_sigma_plugin())?,
            family,
            df,
        ),
    }
}

// ---------------------------------------------------------------------------
// m_eff prior report
// ---------------------------------------------------------------------------

/// Configuration of the prior-design report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeffReportArgs {
    pub d: usize,
    pub n: usize,
    pub sigma: f64,
    pub p0: f64,
    pub draws: usize,
    pub bins: usize,
    pub seed: u64,
}

impl MeffReportArgs {
    pub fn new(d: usize, n: usize, sigma: f64, p0: f64) -> Self {
        MeffReportArgs {
            d,
            n,
            sigma,
            p0,
            draws: 100_000,
            bins: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeffReportEntry {
    pub label: String,
    pub summary: MeffSummary,
}

/// The m_eff prior imposed by the standard menu of tau priors:
/// fixed tau_0, half-normal(tau_0), half-Cauchy(tau_0), half-Cauchy(1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeffPriorReport {
    pub tau0: f64,
    pub args: MeffReportArgs,
    pub entries: Vec<MeffReportEntry>,
}

pub fn run_meff_prior_report(args: &MeffReportArgs) -> Result<MeffPriorReport> {
    let scale = DesignScale::new(args.n, args.d, args.sigma)?;
    let tau0 = tau_reference(args.p0, &scale)?;
    let menu: Vec<(String, HyperpriorSpec)> = vec![
        ("fixed-tau0".into(), HyperpriorSpec::fixed(tau0)?),
        ("half-normal-tau0".into(), HyperpriorSpec::half_normal(tau0)?),
        ("half-cauchy-tau0".into(), HyperpriorSpec::half_cauchy(tau0)?),
        ("half-cauchy-1".into(), HyperpriorSpec::half_cauchy(1.0)?),
    ];
    let entries = menu
        .into_iter()
        .enumerate()
        .map(|(i, (label, tau_prior))| {
            let config = PriorConfig::with_tau_prior(tau_prior, scale);
            // Non-overlapping stream block per menu entry (draw sharding
            // consumes one stream per shard).
            let stream = RngStream::new(args.seed, (i as u64) << 32);
            let sample = sample_meff_prior(&config, args.draws, stream)?;
            let summary = summarize_meff(&sample, args.bins)?;
            Ok(MeffReportEntry { label, summary })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeffPriorReport {
        tau0,
        args: args.clone(),
        entries,
    })
}

impl MeffPriorReport {
    /// Writes one histogram CSV per prior plus a JSON summary; returns the
    /// file names written.
    pub fn write_files(&self, dir: &Path) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir)?;
        let mut outputs = Vec::new();
        for entry in &self.entries {
            let name = format!("meff_prior_{}.csv", entry.label);
            let mut buf = Vec::new();
            entry.summary.write_histogram_csv(&mut buf)?;
            write_atomic(&dir.join(&name), &buf)?;
            outputs.push(name);
        }
        let name = "meff_prior_summary.json".to_string();
        write_atomic(&dir.join(&name), serde_json::to_string_pretty(self)?.as_bytes())?;
        outputs.push(name);
        Ok(outputs)
    }
}

// ---------------------------------------------------------------------------
// Single fit
// ---------------------------------------------------------------------------

/// Arguments of a single-model fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitArgs {
    /// Prior guess for the number of relevant predictors. `None` uses the
    /// legacy default tau ~ half-Cauchy(1).
    pub p0: Option<f64>,
    pub family: HyperpriorFamily,
    pub df: Option<f64>,
    pub test_fraction: f64,
    pub settings: SamplerSettings,
}

impl Default for FitArgs {
    fn default() -> Self {
        FitArgs {
            p0: None,
            family: HyperpriorFamily::HalfCauchy,
            df: None,
            test_fraction: 0.2,
            settings: SamplerSettings::default(),
        }
    }
}

/// Everything needed to score new data with a saved fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub spec: ModelSpec,
    pub task: Task,
    pub columns: Vec<String>,
    pub standardization: Option<Standardization>,
}

/// Metrics and diagnostics of one fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub likelihood: LikelihoodKind,
    pub family: String,
    pub p0: Option<f64>,
    pub tau_prior_scale: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub d: usize,
    pub seed: u64,
    pub meff_mean: f64,
    pub meff_quantiles: Vec<Quantile>,
    pub mlpd: Option<f64>,
    pub mse: Option<f64>,
    pub max_rhat: f64,
    pub min_ess: f64,
    pub divergences: usize,
    #[serde(skip)]
    pub wall_time_s: f64,
}

pub struct FitOutcome {
    pub report: FitReport,
    pub draws: PosteriorDraws,
    pub descriptor: ModelDescriptor,
}

/// Splits, standardizes, fits, and scores a dataset.
pub fn run_fit(data: &Dataset, args: &FitArgs) -> Result<FitOutcome> {
    let start = Instant::now();
    let prepared = data.split_and_standardize(args.test_fraction, args.settings.seed)?;
    let (x_train, _) = prepared.train();
    let n_train = x_train.nrows();
    let d = prepared.d();
    let likelihood = match prepared.task {
        Task::Regression => LikelihoodKind::Gaussian,
        Task::Classification => LikelihoodKind::BernoulliLogit,
    };
    let prior = match args.p0 {
        Some(p0) => prior_config_for_task(prepared.task, p0, n_train, d, args.family, args.df)?,
        None => {
            let sigma = match prepared.task {
                Task::Regression => 1.0,
                Task::Classification => logistic_sigma_plugin(),
            };
            let config = PriorConfig::with_tau_prior(
                HyperpriorSpec::half_cauchy(1.0)?,
                DesignScale::new(n_train, d, sigma)?,
            );
            config
        }
    };
    let tau_prior_scale = prior.tau_prior.scale;
    let family = prior.tau_prior.family.name().to_string();
    let spec = ModelSpec::new(likelihood, prior);
    let draws = fit(&spec, &prepared, &args.settings)?;

    let meff_scale = DesignScale::new(
        n_train.max(1),
        d,
        match likelihood {
            LikelihoodKind::Gaussian => 1.0,
            LikelihoodKind::BernoulliLogit => logistic_sigma_plugin(),
        },
    )?;
    let shrinkage = posterior_shrinkage_profile(&draws, &meff_scale)?;

    let (x_test, y_test) = prepared.test();
    let (mlpd, mse) = if x_test.nrows() > 0 {
        let p = predict(&draws, &x_test, Some(&y_test))?;
        (p.mlpd, p.mse)
    } else {
        (None, None)
    };

    let report = FitReport {
        likelihood,
        family,
        p0: args.p0,
        tau_prior_scale,
        n_train,
        n_test: x_test.nrows(),
        d,
        seed: args.settings.seed,
        meff_mean: shrinkage.meff_mean,
        meff_quantiles: shrinkage.meff_quantiles.clone(),
        mlpd,
        mse,
        max_rhat: draws.diagnostics.max_rhat(),
        min_ess: draws.diagnostics.min_ess(),
        divergences: draws.divergences(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let descriptor = ModelDescriptor {
        spec,
        task: prepared.task,
        columns: prepared.columns.clone(),
        standardization: prepared.standardization.clone(),
    };
    Ok(FitOutcome {
        report,
        draws,
        descriptor,
    })
}

// ---------------------------------------------------------------------------
// Shared result rows
// ---------------------------------------------------------------------------

/// One summary row of an experiment table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_star: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    pub cells: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meff_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mlpd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mlpd_se: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse_se: Option<f64>,
    pub divergences: usize,
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// Summary table of an experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<ExperimentRow>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// Normal-means (van der Pas) benchmark
// ---------------------------------------------------------------------------

/// Prior choices compared in the normal-means benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VanderpasPrior {
    /// Fixed tau = p*/(D - p*) * sigma with the oracle guess p0 = p*;
    /// tau inherits a distribution through the unknown sigma.
    OracleTau0,
    /// The legacy default tau ~ half-Cauchy(0, 1).
    HalfCauchyOne,
}

impl VanderpasPrior {
    pub fn label(&self) -> &'static str {
        match self {
            VanderpasPrior::OracleTau0 => "oracle-tau0",
            VanderpasPrior::HalfCauchyOne => "half-cauchy-1",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VanderpasArgs {
    pub n: usize,
    pub p_stars: Vec<usize>,
    pub amplitudes: Vec<f64>,
    pub replications: usize,
    pub priors: Vec<VanderpasPrior>,
    pub settings: SamplerSettings,
}

impl VanderpasArgs {
    pub fn new(n: usize, p_stars: Vec<usize>, amplitudes: Vec<f64>, replications: usize) -> Self {
        VanderpasArgs {
            n,
            p_stars,
            amplitudes,
            replications,
            priors: vec![VanderpasPrior::OracleTau0, VanderpasPrior::HalfCauchyOne],
            settings: SamplerSettings::default(),
        }
    }
}

/// One (prior, p*, A, replication) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VanderpasCell {
    pub prior: String,
    pub p_star: usize,
    pub amplitude: f64,
    pub replication: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    pub divergences: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VanderpasResult {
    pub args: VanderpasArgs,
    pub cells: Vec<VanderpasCell>,
    pub summary: ExperimentResult,
}

/// Builds the normal-means model spec for one prior choice. The identity
/// design means the kappa formulas apply with n = 1 per coefficient, and
/// the model has no intercept; sigma is inferred under p(sigma^2) ~ 1/sigma^2.
fn vanderpas_spec(prior: VanderpasPrior, n: usize, p_star: usize) -> Result<ModelSpec> {
    let scale = DesignScale::new(1, n, 1.0)?;
    let config = match prior {
        VanderpasPrior::OracleTau0 => {
            let ratio = p_star as f64 / (n - p_star) as f64;
            let mut c = PriorConfig::with_tau_prior(HyperpriorSpec::fixed(ratio)?, scale)
                .coupled_to_sigma();
            c.p0 = Some(p_star as f64);
            c
        }
        VanderpasPrior::HalfCauchyOne => {
            PriorConfig::with_tau_prior(HyperpriorSpec::half_cauchy(1.0)?, scale)
        }
    };
    let mut spec = ModelSpec::new(LikelihoodKind::Gaussian, config);
    spec.include_intercept = false;
    Ok(spec)
}

/// Runs the normal-means benchmark: for each (p*, A, replication) draw a
/// dataset, fit every prior, and record the mean squared error between the
/// posterior mean and the true coefficient vector. Cells run in parallel;
/// failures are recorded per cell rather than aborting the sweep.
pub fn run_vanderpas_experiment(args: &VanderpasArgs) -> Result<VanderpasResult> {
    if args.replications == 0 || args.p_stars.is_empty() || args.amplitudes.is_empty() {
        return Err(Error::invalid("empty normal-means grid"));
    }
    for &p in &args.p_stars {
        if p == 0 || p >= args.n {
            return Err(Error::invalid(format!("p_star {p} out of range for n {}", args.n)));
        }
    }
    struct CellPlan {
        prior: VanderpasPrior,
        p_star: usize,
        amplitude: f64,
        replication: usize,
        data_seed: u64,
        fit_seed: u64,
    }
    let mut plans = Vec::new();
    let mut idx = 0u64;
    for &p_star in &args.p_stars {
        for &a in &args.amplitudes {
            for rep in 0..args.replications {
                // One dataset per (p*, A, rep), shared by the priors.
                let data_seed = cell_seed(args.settings.seed, idx);
                for &prior in &args.priors {
                    plans.push(CellPlan {
                        prior,
                        p_star,
                        amplitude: a,
                        replication: rep,
                        data_seed,
                        fit_seed: cell_seed(args.settings.seed, (idx << 8) + prior as u64 + 1),
                    });
                }
                idx += 1;
            }
        }
    }

    let cells: Vec<VanderpasCell> = plans
        .par_iter()
        .map(|plan| {
            let start = Instant::now();
            let outcome = (|| -> Result<(f64, usize)> {
                let problem =
                    generate_normal_means(args.n, plan.p_star, plan.amplitude, plan.data_seed)?;
                let spec = vanderpas_spec(plan.prior, args.n, plan.p_star)?;
                let mut settings = args.settings;
                settings.seed = plan.fit_seed;
                let draws = fit(&spec, &problem.data, &settings)?;
                let d = draws.d();
                let mut mse = 0.0;
                for j in 0..d {
                    let col = draws.beta.column(j);
                    let mean = col.sum() / col.len() as f64;
                    let err = mean - problem.beta_true[j];
                    mse += err * err;
                }
                Ok((mse / d as f64, draws.divergences()))
            })();
            let (mse, divergences, error) = match outcome {
                Ok((mse, dv)) => (Some(mse), dv, None),
                Err(e) => (None, 0, Some(e.to_string())),
            };
            VanderpasCell {
                prior: plan.prior.label().to_string(),
                p_star: plan.p_star,
                amplitude: plan.amplitude,
                replication: plan.replication,
                mse,
                divergences,
                error,
                wall_time_s: start.elapsed().as_secs_f64(),
            }
        })
        .collect();

    // Per-signal MSE table: one row per (prior, p*, A).
    let mut rows = Vec::new();
    for &prior in &args.priors {
        for &p_star in &args.p_stars {
            for &a in &args.amplitudes {
                let group: Vec<&VanderpasCell> = cells
                    .iter()
                    .filter(|c| {
                        c.prior == prior.label() && c.p_star == p_star && c.amplitude == a
                    })
                    .collect();
                let mses: Vec<f64> = group.iter().filter_map(|c| c.mse).collect();
                rows.push(ExperimentRow {
                    label: prior.label().to_string(),
                    p0: None,
                    p_star: Some(p_star),
                    amplitude: Some(a),
                    cells: mses.len(),
                    meff_mean: None,
                    mlpd: None,
                    mlpd_se: None,
                    mse: (!mses.is_empty()).then(|| stats::mean(&mses)),
                    mse_se: (mses.len() > 1).then(|| stats::standard_error(&mses)),
                    divergences: group.iter().map(|c| c.divergences).sum(),
                    wall_time_s: group.iter().map(|c| c.wall_time_s).sum(),
                });
            }
        }
    }

    Ok(VanderpasResult {
        args: args.clone(),
        cells,
        summary: ExperimentResult { rows },
    })
}

impl VanderpasResult {
    pub fn write_files(&self, dir: &Path) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir)?;
        let mut cells_csv = String::from("prior,p_star,amplitude,replication,mse,divergences,error\n");
        for c in &self.cells {
            cells_csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                c.prior,
                c.p_star,
                c.amplitude,
                c.replication,
                fmt_opt(c.mse),
                c.divergences,
                c.error.as_deref().unwrap_or(""),
            ));
        }
        write_atomic(&dir.join("vanderpas_cells.csv"), cells_csv.as_bytes())?;

        let mut table = String::from("prior,p_star,amplitude,replications,mean_mse,se_mse,divergences\n");
        for r in &self.summary.rows {
            table.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.label,
                r.p_star.unwrap(),
                r.amplitude.unwrap(),
                r.cells,
                fmt_opt(r.mse),
                fmt_opt(r.mse_se),
                r.divergences,
            ));
        }
        write_atomic(&dir.join("vanderpas_mse.csv"), table.as_bytes())?;
        write_atomic(
            &dir.join("vanderpas_summary.json"),
            serde_json::to_string_pretty(&self.summary)?.as_bytes(),
        )?;
        Ok(vec![
            "vanderpas_cells.csv".into(),
            "vanderpas_mse.csv".into(),
            "vanderpas_summary.json".into(),
        ])
    }
}

// ---------------------------------------------------------------------------
// p0 sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepArgs {
    pub p0_grid: Vec<f64>,
    pub families: Vec<HyperpriorFamily>,
    pub splits: usize,
    pub test_fraction: f64,
    pub lasso_folds: usize,
    pub lasso_grid: usize,
    pub settings: SamplerSettings,
}

impl SweepArgs {
    pub fn new(p0_grid: Vec<f64>, families: Vec<HyperpriorFamily>, splits: usize) -> Self {
        SweepArgs {
            p0_grid,
            families,
            splits,
            test_fraction: 0.2,
            lasso_folds: 10,
            lasso_grid: 100,
            settings: SamplerSettings::default(),
        }
    }
}

/// One (family, p0, split) fit, or a LASSO baseline row (p0 absent).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCell {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    pub split: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meff_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mlpd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    pub divergences: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub args: SweepArgs,
    pub cells: Vec<SweepCell>,
    pub summary: ExperimentResult,
}

fn lasso_cell(data: &Dataset, args: &SweepArgs, split: usize, seed: u64) -> SweepCell {
    let start = Instant::now();
    let kind = match data.task {
        Task::Regression => LikelihoodKind::Gaussian,
        Task::Classification => LikelihoodKind::BernoulliLogit,
    };
    let outcome = (|| -> Result<(Option<f64>, Option<f64>)> {
        let fit = lasso_cv(data, kind, args.lasso_folds, args.lasso_grid, seed)?;
        let (x_test, y_test) = data.test();
        if x_test.nrows() == 0 {
            return Ok((None, None));
        }
        let f = fit.linear_predictor(&x_test)?;
        let (mlpd, mse) = match kind {
            LikelihoodKind::Gaussian => match fit.noise_variance {
                Some(var) => {
                    let lpd: Vec<f64> = f
                        .iter()
                        .zip(y_test.iter())
                        .map(|(fi, yi)| {
                            let r = yi - fi;
                            -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * r * r / var
                        })
                        .collect();
                    let mse = f
                        .iter()
                        .zip(y_test.iter())
                        .map(|(fi, yi)| (yi - fi) * (yi - fi))
                        .sum::<f64>()
                        / y_test.len() as f64;
                    (Some(stats::mean(&lpd)), Some(mse))
                }
                None => (None, None),
            },
            LikelihoodKind::BernoulliLogit => {
                let lpd: Vec<f64> = f
                    .iter()
                    .zip(y_test.iter())
                    .map(|(fi, yi)| {
                        let t = if *yi == 1.0 { *fi } else { -*fi };
                        -log1p_exp(-t)
                    })
                    .collect();
                let mse = f
                    .iter()
                    .zip(y_test.iter())
                    .map(|(fi, yi)| {
                        let p = crate::glm::sigmoid(*fi);
                        (yi - p) * (yi - p)
                    })
                    .sum::<f64>()
                    / y_test.len() as f64;
                (Some(stats::mean(&lpd)), Some(mse))
            }
        };
        Ok((mlpd, mse))
    })();
    let (mlpd, mse, error) = match outcome {
        Ok((mlpd, mse)) => (mlpd, mse, None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    SweepCell {
        label: "lasso".to_string(),
        p0: None,
        split,
        meff_mean: None,
        mlpd,
        mse,
        divergences: 0,
        error,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}

/// Sweeps the prior guess p0 over a grid for each hyperprior family,
/// repeating over random train/test splits, with a cross-validated LASSO
/// baseline per split. Cells run in parallel and failures are recorded per
/// cell.
pub fn run_p0_sweep(data: &Dataset, args: &SweepArgs) -> Result<SweepResult> {
    if args.p0_grid.is_empty() || args.families.is_empty() || args.splits == 0 {
        return Err(Error::invalid("empty sweep grid"));
    }
    let likelihood = match data.task {
        Task::Regression => LikelihoodKind::Gaussian,
        Task::Classification => LikelihoodKind::BernoulliLogit,
    };

    // Prepare splits up front; each split is shared by every configuration.
    let splits: Vec<Dataset> = (0..args.splits)
        .map(|s| data.split_and_standardize(args.test_fraction, cell_seed(args.settings.seed, s as u64)))
        .collect::<Result<_>>()?;

    struct Plan {
        family: HyperpriorFamily,
        p0: f64,
        split: usize,
        fit_seed: u64,
    }
    let mut plans = Vec::new();
    let mut idx = 1000u64;
    for &family in &args.families {
        for &p0 in &args.p0_grid {
            for split in 0..args.splits {
                plans.push(Plan {
                    family,
                    p0,
                    split,
                    fit_seed: cell_seed(args.settings.seed, idx),
                });
                idx += 1;
            }
        }
    }

    let mut cells: Vec<SweepCell> = plans
        .par_iter()
        .map(|plan| {
            let start = Instant::now();
            let prepared = &splits[plan.split];
            let outcome = (|| -> Result<(f64, Option<f64>, Option<f64>, usize)> {
                let (x_train, _) = prepared.train();
                let n_train = x_train.nrows();
                let d = prepared.d();
                let prior = prior_config_for_task(
                    prepared.task,
                    plan.p0,
                    n_train,
                    d,
                    plan.family,
                    None,
                )?;
                let spec = ModelSpec::new(likelihood, prior);
                let mut settings = args.settings;
                settings.seed = plan.fit_seed;
                let draws = fit(&spec, prepared, &settings)?;
                let meff_scale = DesignScale::new(
                    n_train,
                    d,
                    match likelihood {
                        LikelihoodKind::Gaussian => 1.0,
                        LikelihoodKind::BernoulliLogit => logistic_sigma_plugin(),
                    },
                )?;
                let shrinkage = posterior_shrinkage_profile(&draws, &meff_scale)?;
                let (x_test, y_test) = prepared.test();
                let (mlpd, mse) = if x_test.nrows() > 0 {
                    let p = predict(&draws, &x_test, Some(&y_test))?;
                    (p.mlpd, p.mse)
                } else {
                    (None, None)
                };
                Ok((shrinkage.meff_mean, mlpd, mse, draws.divergences()))
            })();
            let (meff_mean, mlpd, mse, divergences, error) = match outcome {
                Ok((m, l, s, dv)) => (Some(m), l, s, dv, None),
                Err(e) => (None, None, None, 0, Some(e.to_string())),
            };
            SweepCell {
                label: plan.family.name().to_string(),
                p0: Some(plan.p0),
                split: plan.split,
                meff_mean,
                mlpd,
                mse,
                divergences,
                error,
                wall_time_s: start.elapsed().as_secs_f64(),
            }
        })
        .collect();

    // LASSO baseline, one row per split.
    for (split, prepared) in splits.iter().enumerate() {
        cells.push(lasso_cell(
            prepared,
            args,
            split,
            cell_seed(args.settings.seed, 5000 + split as u64),
        ));
    }

    // Summary rows per (family, p0) plus one for the baseline.
    let mut rows = Vec::new();
    for &family in &args.families {
        for &p0 in &args.p0_grid {
            let group: Vec<&SweepCell> = cells
                .iter()
                .filter(|c| c.label == family.name() && c.p0 == Some(p0))
                .collect();
            let meffs: Vec<f64> = group.iter().filter_map(|c| c.meff_mean).collect();
            let mlpds: Vec<f64> = group.iter().filter_map(|c| c.mlpd).collect();
            let mses: Vec<f64> = group.iter().filter_map(|c| c.mse).collect();
            rows.push(ExperimentRow {
                label: family.name().to_string(),
                p0: Some(p0),
                p_star: None,
                amplitude: None,
                cells: group.len(),
                meff_mean: (!meffs.is_empty()).then(|| stats::mean(&meffs)),
                mlpd: (!mlpds.is_empty()).then(|| stats::mean(&mlpds)),
                mlpd_se: (mlpds.len() > 1).then(|| stats::standard_error(&mlpds)),
                mse: (!mses.is_empty()).then(|| stats::mean(&mses)),
                mse_se: (mses.len() > 1).then(|| stats::standard_error(&mses)),
                divergences: group.iter().map(|c| c.divergences).sum(),
                wall_time_s: group.iter().map(|c| c.wall_time_s).sum(),
            });
        }
    }
    let lasso_cells: Vec<&SweepCell> = cells.iter().filter(|c| c.label == "lasso").collect();
    let mlpds: Vec<f64> = lasso_cells.iter().filter_map(|c| c.mlpd).collect();
    let mses: Vec<f64> = lasso_cells.iter().filter_map(|c| c.mse).collect();
    rows.push(ExperimentRow {
        label: "lasso".to_string(),
        p0: None,
        p_star: None,
        amplitude: None,
        cells: lasso_cells.len(),
        meff_mean: None,
        mlpd: (!mlpds.is_empty()).then(|| stats::mean(&mlpds)),
        mlpd_se: (mlpds.len() > 1).then(|| stats::standard_error(&mlpds)),
        mse: (!mses.is_empty()).then(|| stats::mean(&mses)),
        mse_se: (mses.len() > 1).then(|| stats::standard_error(&mses)),
        divergences: 0,
        wall_time_s: lasso_cells.iter().map(|c| c.wall_time_s).sum(),
    });

    Ok(SweepResult {
        args: args.clone(),
        cells,
        summary: ExperimentResult { rows },
    })
}

impl SweepResult {
    pub fn write_files(&self, dir: &Path) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir)?;
        let mut cells_csv = String::from("label,p0,split,meff_mean,mlpd,mse,divergences,error\n");
        for c in &self.cells {
            cells_csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                c.label,
                fmt_opt(c.p0),
                c.split,
                fmt_opt(c.meff_mean),
                fmt_opt(c.mlpd),
                fmt_opt(c.mse),
                c.divergences,
                c.error.as_deref().unwrap_or(""),
            ));
        }
        write_atomic(&dir.join("sweep_cells.csv"), cells_csv.as_bytes())?;

        let mut table =
            String::from("label,p0,cells,meff_mean,mlpd,mlpd_se,mse,mse_se,divergences\n");
        for r in &self.summary.rows {
            table.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.label,
                fmt_opt(r.p0),
                r.cells,
                fmt_opt(r.meff_mean),
                fmt_opt(r.mlpd),
                fmt_opt(r.mlpd_se),
                fmt_opt(r.mse),
                fmt_opt(r.mse_se),
                r.divergences,
            ));
        }
        write_atomic(&dir.join("sweep_summary.csv"), table.as_bytes())?;
        write_atomic(
            &dir.join("sweep_summary.json"),
            serde_json::to_string_pretty(&self.summary)?.as_bytes(),
        )?;
        Ok(vec![
            "sweep_cells.csv".into(),
            "sweep_summary.csv".into(),
            "sweep_summary.json".into(),
        ])
    }
}

// ---------------------------------------------------------------------------
// Synthetic dataset helpers (used by the examples and acceptance tests)
// ---------------------------------------------------------------------------

/// Sparse synthetic regression/classification data: `signals` coefficients
/// equal `amplitude`, the rest zero, standard normal predictors.
pub fn generate_sparse_dataset(
    task: Task,
    n: usize,
    d: usize,
    signals: usize,
    amplitude: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<Dataset> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    if signals > d {
        return Err(Error::invalid("more signals than predictors"));
    }
    let mut rng = RngStream::new(seed, 0).rng();
    let x = Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal));
    let f = Array1::from_shape_fn(n, |i| {
        (0..signals).map(|j| amplitude * x[[i, j]]).sum::<f64>()
    });
    let y = match task {
        Task::Regression => Array1::from_shape_fn(n, |i| {
            f[i] + noise_sd * rng.sample::<f64, _>(StandardNormal)
        }),
        Task::Classification => Array1::from_shape_fn(n, |i| {
            if rng.gen::<f64>() < crate::glm::sigmoid(f[i]) {
                1.0
            } else {
                0.0
            }
        }),
    };
    Dataset::new(x, y, task)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_settings(seed: u64) -> SamplerSettings {
        SamplerSettings {
            chains: 2,
            iterations: 200,
            target_accept: 0.9,
            seed,
            ..SamplerSettings::default()
        }
    }

    #[test]
    fn meff_report_covers_the_menu_and_centers_fixed_tau0() {
        let mut args = MeffReportArgs::new(10, 100, 1.0, 5.0);
        args.draws = 50_000;
        let report = run_meff_prior_report(&args).unwrap();
        assert!((report.tau0 - 0.1).abs() < 1e-12);
        let labels: Vec<&str> = report.entries.iter().map(|e| e.label.as_str()).collect();
        assert_eq!(
            labels,
            vec!["fixed-tau0", "half-normal-tau0", "half-cauchy-tau0", "half-cauchy-1"]
        );
        let fixed = &report.entries[0].summary;
        // Analytic variance at u = tau0 sqrt(n): Eq-form SE over the draws.
        let scale = DesignScale::new(100, 10, 1.0).unwrap();
        let analytic = crate::shrinkage::meff_moments(report.tau0, &scale).unwrap();
        let se = (analytic.variance / args.draws as f64).sqrt();
        assert!((fixed.mean - 5.0).abs() < 3.0 * se, "mean {}", fixed.mean);
        // D = 1: all mass within [0, 1].
        let args = MeffReportArgs {
            draws: 5000,
            ..MeffReportArgs::new(1, 50, 1.0, 0.5)
        };
        let report = run_meff_prior_report(&args).unwrap();
        for e in &report.entries {
            let total: u64 = e.summary.histogram.iter().map(|b| b.count).sum();
            assert_eq!(total, 5000);
        }
    }

    #[test]
    fn meff_report_files_are_deterministic(){
        let args = MeffReportArgs {
            draws: 2000,
            ..MeffReportArgs::new(10, 50, 1.0, 3.0)
        };
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        run_meff_prior_report(&args).unwrap().write_files(dir1.path()).unwrap();
        run_meff_prior_report(&args).unwrap().write_files(dir2.path()).unwrap();
        for name in ["meff_prior_fixed-tau0.csv", "meff_prior_summary.json"] {
            let a = std::fs::read(dir1.path().join(name)).unwrap();
            let b = std::fs::read(dir2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs");
        }
    }

    #[test]
    fn run_fit_produces_complete_report() {
        let data = generate_sparse_dataset(Task::Regression, 40, 8, 2, 2.0, 1.0, 3).unwrap();
        let args = FitArgs {
            p0: Some(2.0),
            family: HyperpriorFamily::HalfCauchy,
            settings: quick_settings(5),
            ..FitArgs::default()
        };
        let outcome = run_fit(&data, &args).unwrap();
        assert_eq!(outcome.report.n_train + outcome.report.n_test, 40);
        assert!(outcome.report.mlpd.is_some());
        assert!(outcome.report.meff_mean > 0.0);
        assert!(outcome.report.max_rhat.is_finite());
        assert!(outcome.descriptor.standardization.is_some());
        // Regression fits couple tau to sigma with a sigma = 1 reference scale.
        assert!(outcome.descriptor.spec.prior.couple_tau_to_sigma);
    }

    #[test]
    fn vanderpas_runner_row_counts_and_determinism() {
        let mut args = VanderpasArgs::new(20, vec![3], vec![6.0], 3);
        args.settings = quick_settings(9);
        let result = run_vanderpas_experiment(&args).unwrap();
        // 2 priors x 1 p* x 1 A x 3 reps cells; 2 summary rows.
        assert_eq!(result.cells.len(), 6);
        assert_eq!(result.summary.rows.len(), 2);
        for row in &result.summary.rows {
            assert_eq!(row.cells, 3);
            assert!(row.mse.unwrap().is_finite());
        }
        let again = run_vanderpas_experiment(&args).unwrap();
        assert_eq!(
            serde_json::to_string(&result.summary).unwrap(),
            serde_json::to_string(&again.summary).unwrap()
        );
    }

    #[test]
    fn sweep_runner_single_cell_and_lasso_row() {
        let data =
            generate_sparse_dataset(Task::Classification, 40, 10, 2, 2.0, 1.0, 7).unwrap();
        let mut args = SweepArgs::new(vec![2.0], vec![HyperpriorFamily::HalfNormal], 1);
        args.settings = quick_settings(11);
        args.lasso_folds = 4;
        args.lasso_grid = 20;
        let result = run_p0_sweep(&data, &args).unwrap();
        // One horseshoe cell plus one lasso cell; two summary rows.
        assert_eq!(result.cells.len(), 2);
        assert_eq!(result.summary.rows.len(), 2);
        let hs = &result.summary.rows[0];
        assert_eq!(hs.label, "half-normal");
        assert!(hs.meff_mean.unwrap() > 0.0);
        assert!(hs.mlpd.unwrap().is_finite());
        let lasso = result.summary.rows.last().unwrap();
        assert_eq!(lasso.label, "lasso");
        assert!(lasso.mlpd.unwrap().is_finite());
    }

    #[test]
    fn written_files_exclude_wall_time_and_are_reproducible() {
        let mut args = VanderpasArgs::new(15, vec![2], vec![4.0], 2);
        args.settings = quick_settings(13);
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        run_vanderpas_experiment(&args).unwrap().write_files(dir1.path()).unwrap();
        run_vanderpas_experiment(&args).unwrap().write_files(dir2.path()).unwrap();
        for name in ["vanderpas_cells.csv", "vanderpas_mse.csv", "vanderpas_summary.json"] {
            let a = std::fs::read(dir1.path().join(name)).unwrap();
            let b = std::fs::read(dir2.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
            assert!(!String::from_utf8(a).unwrap().contains("wall"));
        }
    }

    #[test]
    fn manifest_and_timings_helpers() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = Manifest::new(
            "design",
            serde_json::json!({"d": 10}),
            7,
            vec!["a.csv".into()],
        );
        manifest.write(dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
        assert!(text.contains("\"experiment\": \"design\""));
        write_timings(dir.path(), &[("fit".into(), 1.25)]).unwrap();
        let text = std::fs::read_to_string(dir.path().join("timings.txt")).unwrap();
        assert!(text.contains("fit\t1.250s"));
    }
}

