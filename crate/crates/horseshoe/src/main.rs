//! Thin command-line front end over the library: prior design reports,
//! model fitting and prediction, the p0 sweep, the normal-means benchmark,
//! and the LASSO baseline. All computation lives in the library; this
//! binary parses arguments, merges the optional config file, runs the
//! requested experiment, and writes the artifacts.

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

use horseshoe::data::{load_csv, Dataset, Task};
use horseshoe::distributions::HyperpriorFamily;
use horseshoe::experiments::{
    run_fit, run_meff_prior_report, run_p0_sweep, run_vanderpas_experiment, write_atomic,
    write_timings, FitArgs, Manifest, MeffReportArgs, ModelDescriptor, SweepArgs, VanderpasArgs,
};
use horseshoe::inference::{predict, PosteriorDraws, SamplerSettings};
use horseshoe::lasso::{lasso_cv, lasso_path_fit};

#[derive(Parser)]
#[command(
    name = "horseshoe",
    version,
    about = "Sparse Bayesian regression with the horseshoe prior"
)]
struct Cli {
    /// JSON config file overriding built-in defaults (CLI flags win).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: $HORSESHOE_OUT_DIR or ./horseshoe-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Number of MCMC chains.
    #[arg(long, global = true)]
    chains: Option<usize>,
    /// Per-chain iterations including warmup.
    #[arg(long, global = true)]
    iterations: Option<usize>,
    /// Fraction of iterations discarded as warmup.
    #[arg(long, global = true)]
    warmup_fraction: Option<f64>,
    /// Dual-averaging acceptance target.
    #[arg(long, global = true)]
    target_accept: Option<f64>,
    /// Cap on leapfrog steps per transition.
    #[arg(long, global = true)]
    max_leapfrog: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute tau_0 for a prior guess p0 and write the implied m_eff
    /// prior histograms for the standard menu of tau priors.
    Design {
        /// Number of predictors D.
        #[arg(long = "D", visible_alias = "d")]
        d: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p0: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Monte-Carlo draws per prior.
        #[arg(long)]
        draws: Option<usize>,
        /// Histogram bins over [0, D].
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Fit a horseshoe model to a CSV dataset and write draws + report.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Target column name.
        #[arg(long)]
        target: String,
        /// regression | classification
        #[arg(long)]
        task: String,
        /// Prior guess for the number of relevant predictors; omitting it
        /// uses the legacy default tau ~ half-Cauchy(1).
        #[arg(long)]
        p0: Option<f64>,
        /// fixed | half-normal | half-cauchy | half-t
        #[arg(long, default_value = "half-cauchy")]
        family: String,
        /// Degrees of freedom (half-t only).
        #[arg(long)]
        df: Option<f64>,
        #[arg(long)]
        test_fraction: Option<f64>,
    },
    /// Score a new CSV with a saved fit (model.json + draws.csv).
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        draws: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Target column for held-out metrics, when present in the CSV.
        #[arg(long)]
        target: Option<String>,
    },
    /// Sweep the prior guess p0 over a grid, with a LASSO baseline.
    SweepP0 {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long)]
        task: String,
        /// Comma-separated p0 grid.
        #[arg(long, value_delimiter = ',')]
        p0_grid: Vec<f64>,
        /// Comma-separated hyperprior families for tau.
        #[arg(long, value_delimiter = ',', default_value = "half-normal,half-cauchy")]
        families: Vec<String>,
        #[arg(long)]
        splits: Option<usize>,
        #[arg(long)]
        test_fraction: Option<f64>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Normal-means benchmark: oracle tau_0 vs half-Cauchy(1).
    Vanderpas {
        #[arg(long)]
        n: usize,
        /// Comma-separated true support sizes.
        #[arg(long = "p-star", value_delimiter = ',')]
        p_star: Vec<usize>,
        /// Comma-separated signal amplitudes.
        #[arg(long = "A", visible_alias = "amplitudes", value_delimiter = ',')]
        amplitudes: Vec<f64>,
        #[arg(long)]
        reps: usize,
    },
    /// Cross-validated LASSO fit (or a single-penalty fit with --penalty).
    Lasso {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long)]
        task: String,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        grid: Option<usize>,
        /// Fit at this penalty instead of cross-validating.
        #[arg(long)]
        penalty: Option<f64>,
        #[arg(long)]
        test_fraction: Option<f64>,
    },
}

/// Optional JSON config file; unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    chains: Option<usize>,
    iterations: Option<usize>,
    warmup_fraction: Option<f64>,
    target_accept: Option<f64>,
    max_leapfrog: Option<usize>,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    draws: Option<usize>,
    bins: Option<usize>,
    test_fraction: Option<f64>,
    splits: Option<usize>,
    folds: Option<usize>,
    grid: Option<usize>,
}

struct Resolved {
    settings: SamplerSettings,
    out_dir: PathBuf,
    draws: usize,
    bins: usize,
    test_fraction: f64,
    splits: usize,
    folds: usize,
    grid: usize,
}

fn resolve(cli: &Cli) -> anyhow::Result<Resolved> {
    let file: FileConfig = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| "invalid config")?
        }
        None => FileConfig::default(),
    };
    let defaults = SamplerSettings::default();
    let settings = SamplerSettings {
        chains: cli.chains.or(file.chains).unwrap_or(defaults.chains),
        iterations: cli.iterations.or(file.iterations).unwrap_or(defaults.iterations),
        warmup_fraction: cli
            .warmup_fraction
            .or(file.warmup_fraction)
            .unwrap_or(defaults.warmup_fraction),
        target_accept: cli
            .target_accept
            .or(file.target_accept)
            .unwrap_or(defaults.target_accept),
        max_leapfrog: cli
            .max_leapfrog
            .or(file.max_leapfrog)
            .unwrap_or(defaults.max_leapfrog),
        seed: cli.seed.or(file.seed).unwrap_or(defaults.seed),
    };
    let out_dir = cli
        .out
        .clone()
        .or(file.out_dir)
        .or_else(|| std::env::var_os("HORSESHOE_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("horseshoe-out"));
    Ok(Resolved {
        settings,
        out_dir,
        draws: file.draws.unwrap_or(100_000),
        bins: file.bins.unwrap_or(50),
        test_fraction: file.test_fraction.unwrap_or(0.2),
        splits: file.splits.unwrap_or(10),
        folds: file.folds.unwrap_or(10),
        grid: file.grid.unwrap_or(100),
    })
}

fn load(path: &Path, target: &str, task: &str) -> anyhow::Result<Dataset> {
    let task = Task::parse(task)?;
    Ok(load_csv(path, target, task)?)
}

fn parse_families(names: &[String]) -> anyhow::Result<Vec<HyperpriorFamily>> {
    names
        .iter()
        .map(|n| Ok(HyperpriorFamily::parse(n)?))
        .collect()
}

fn kind_for(task: Task) -> horseshoe::glm::LikelihoodKind {
    match task {
        Task::Regression => horseshoe::glm::LikelihoodKind::Gaussian,
        Task::Classification => horseshoe::glm::LikelihoodKind::BernoulliLogit,
    }
}

fn main() {
    if let Err(err) = run() {
        // Machine-readable error record on stderr.
        eprintln!("{}", serde_json::json!({ "error": err.to_string() }));
        std::process::exit(1);
    }
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let resolved = resolve(&cli)?;
    let dir = &resolved.out_dir;
    std::fs::create_dir_all(dir)?;
    let started = Instant::now();

    match &cli.command {
        Command::Design { d, n, p0, sigma, draws, bins } => {
            let args = MeffReportArgs {
                d: *d,
                n: *n,
                sigma: *sigma,
                p0: *p0,
                draws: draws.unwrap_or(resolved.draws),
                bins: bins.unwrap_or(resolved.bins),
                seed: resolved.settings.seed,
            };
            let report = run_meff_prior_report(&args)?;
            println!("tau0 = {:.4e}", report.tau0);
            for entry in &report.entries {
                println!(
                    "{:<18} mean m_eff = {:.3}, median = {:.3}",
                    entry.label,
                    entry.summary.mean,
                    entry
                        .summary
                        .quantiles
                        .iter()
                        .find(|q| q.percent == 50.0)
                        .map(|q| q.value)
                        .unwrap_or(f64::NAN)
                );
            }
            let outputs = report.write_files(dir)?;
            Manifest::new("design", serde_json::to_value(&args)?, args.seed, outputs).write(dir)?;
            write_timings(dir, &[("design".into(), started.elapsed().as_secs_f64())])?;
        }

        Command::Fit { data, target, task, p0, family, df, test_fraction } => {
            let dataset = load(data, target, task)?;
            let args = FitArgs {
                p0: *p0,
                family: HyperpriorFamily::parse(family)?,
                df: *df,
                test_fraction: test_fraction.unwrap_or(resolved.test_fraction),
                settings: resolved.settings,
            };
            let outcome = run_fit(&dataset, &args)?;
            println!(
                "fit: n_train={} n_test={} D={} | mean m_eff = {:.3} | MLPD = {} | max R-hat = {:.4} | divergences = {}",
                outcome.report.n_train,
                outcome.report.n_test,
                outcome.report.d,
                outcome.report.meff_mean,
                outcome
                    .report
                    .mlpd
                    .map(|v| format!("{v:.4}"))
                    .unwrap_or_else(|| "n/a".into()),
                outcome.report.max_rhat,
                outcome.report.divergences,
            );
            let mut draws_csv = Vec::new();
            outcome.draws.write_csv(&mut draws_csv)?;
            write_atomic(&dir.join("draws.csv"), &draws_csv)?;
            write_atomic(
                &dir.join("draws_summary.json"),
                serde_json::to_string_pretty(&outcome.draws.summary())?.as_bytes(),
            )?;
            write_atomic(
                &dir.join("report.json"),
                serde_json::to_string_pretty(&outcome.report)?.as_bytes(),
            )?;
            write_atomic(
                &dir.join("model.json"),
                serde_json::to_string_pretty(&outcome.descriptor)?.as_bytes(),
            )?;
            let outputs = vec![
                "draws.csv".into(),
                "draws_summary.json".into(),
                "report.json".into(),
                "model.json".into(),
            ];
            Manifest::new("fit", serde_json::to_value(&args)?, args.settings.seed, outputs)
                .write(dir)?;
            write_timings(dir, &[("fit".into(), outcome.report.wall_time_s)])?;
        }

        Command::Predict { model, draws, data, target } => {
            let descriptor: ModelDescriptor =
                serde_json::from_str(&std::fs::read_to_string(model)?)?;
            let draws_file = std::fs::File::open(draws)?;
            let posterior = PosteriorDraws::read_csv(
                draws_file,
                descriptor.spec.likelihood,
                descriptor.spec.fixed_sigma,
            )?;
            let dataset = match target {
                Some(t) => load(
                    data,
                    t,
                    match descriptor.task {
                        Task::Regression => "regression",
                        Task::Classification => "classification",
                    },
                )?,
                None => {
                    // No target column: every CSV column is a feature. Load
                    // with the first column standing in as the target, then
                    // put it back.
                    let text = std::fs::read_to_string(data)?;
                    let header = text.lines().next().unwrap_or_default().to_string();
                    let first = header.split(',').next().unwrap_or_default().trim().to_string();
                    let partial = load_csv(data, &first, Task::Regression)?;
                    let mut x = ndarray::Array2::zeros((partial.n(), partial.d() + 1));
                    for i in 0..partial.n() {
                        x[[i, 0]] = partial.y[i];
                        for j in 0..partial.d() {
                            x[[i, j + 1]] = partial.x[[i, j]];
                        }
                    }
                    let mut columns = vec![first];
                    columns.extend(partial.columns.clone());
                    let mut ds =
                        Dataset::new(x, ndarray::Array1::zeros(partial.n()), Task::Regression)?;
                    ds.columns = columns;
                    ds
                }
            };
            // Align feature columns with the training layout.
            let mut x = ndarray::Array2::zeros((dataset.n(), descriptor.columns.len()));
            for (jt, name) in descriptor.columns.iter().enumerate() {
                let js = dataset
                    .columns
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| anyhow!("prediction data is missing column {name:?}"))?;
                for i in 0..dataset.n() {
                    x[[i, jt]] = dataset.x[[i, js]];
                }
            }
            let x = match &descriptor.standardization {
                Some(stats) => Dataset::apply_standardization(stats, &x)?,
                None => x,
            };
            let y = target.as_ref().map(|_| dataset.y.clone());
            let summary = predict(&posterior, &x, y.as_ref())?;

            let mut csv = String::from(if y.is_some() {
                "row,prediction,target,lpd\n"
            } else {
                "row,prediction\n"
            });
            for i in 0..summary.mean.len() {
                match (&y, &summary.lpd) {
                    (Some(y), Some(lpd)) => {
                        csv.push_str(&format!("{},{},{},{}\n", i, summary.mean[i], y[i], lpd[i]))
                    }
                    _ => csv.push_str(&format!("{},{}\n", i, summary.mean[i])),
                }
            }
            write_atomic(&dir.join("predictions.csv"), csv.as_bytes())?;
            let mut outputs = vec!["predictions.csv".to_string()];
            if y.is_some() {
                write_atomic(
                    &dir.join("metrics.json"),
                    serde_json::to_string_pretty(&serde_json::json!({
                        "mlpd": summary.mlpd,
                        "mse": summary.mse,
                    }))?
                    .as_bytes(),
                )?;
                outputs.push("metrics.json".into());
                println!(
                    "predict: {} rows | MLPD = {:.4} | MSE = {:.4}",
                    summary.mean.len(),
                    summary.mlpd.unwrap_or(f64::NAN),
                    summary.mse.unwrap_or(f64::NAN)
                );
            } else {
                println!("predict: {} rows", summary.mean.len());
            }
            Manifest::new(
                "predict",
                serde_json::json!({
                    "model": model.display().to_string(),
                    "draws": draws.display().to_string(),
                    "data": data.display().to_string(),
                }),
                resolved.settings.seed,
                outputs,
            )
            .write(dir)?;
            write_timings(dir, &[("predict".into(), started.elapsed().as_secs_f64())])?;
        }

        Command::SweepP0 {
            data,
            target,
            task,
            p0_grid,
            families,
            splits,
            test_fraction,
            folds,
            grid,
        } => {
            let dataset = load(data, target, task)?;
            let args = SweepArgs {
                p0_grid: p0_grid.clone(),
                families: parse_families(families)?,
                splits: splits.unwrap_or(resolved.splits),
                test_fraction: test_fraction.unwrap_or(resolved.test_fraction),
                lasso_folds: folds.unwrap_or(resolved.folds),
                lasso_grid: grid.unwrap_or(resolved.grid),
                settings: resolved.settings,
            };
            let result = run_p0_sweep(&dataset, &args)?;
            for row in &result.summary.rows {
                println!(
                    "{:<12} p0={:<8} mean m_eff={:<10} MLPD={}",
                    row.label,
                    row.p0.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
                    row.meff_mean
                        .map(|v| format!("{v:.3}"))
                        .unwrap_or_else(|| "-".into()),
                    row.mlpd
                        .map(|v| format!("{v:.4}"))
                        .unwrap_or_else(|| "-".into()),
                );
            }
            let outputs = result.write_files(dir)?;
            Manifest::new("sweep-p0", serde_json::to_value(&args)?, args.settings.seed, outputs)
                .write(dir)?;
            let mut timings: Vec<(String, f64)> = result
                .summary
                .rows
                .iter()
                .map(|r| {
                    (
                        format!(
                            "{} p0={}",
                            r.label,
                            r.p0.map(|v| v.to_string()).unwrap_or_else(|| "-".into())
                        ),
                        r.wall_time_s,
                    )
                })
                .collect();
            timings.push(("total".into(), started.elapsed().as_secs_f64()));
            write_timings(dir, &timings)?;
        }

        Command::Vanderpas { n, p_star, amplitudes, reps } => {
            let mut args = VanderpasArgs::new(*n, p_star.clone(), amplitudes.clone(), *reps);
            args.settings = resolved.settings;
            let result = run_vanderpas_experiment(&args)?;
            for row in &result.summary.rows {
                println!(
                    "{:<14} p*={:<4} A={:<5} mean MSE = {:.4} (se {})",
                    row.label,
                    row.p_star.unwrap(),
                    row.amplitude.unwrap(),
                    row.mse.unwrap_or(f64::NAN),
                    row.mse_se
                        .map(|v| format!("{v:.4}"))
                        .unwrap_or_else(|| "-".into()),
                );
            }
            let outputs = result.write_files(dir)?;
            Manifest::new("vanderpas", serde_json::to_value(&args)?, args.settings.seed, outputs)
                .write(dir)?;
            let mut timings: Vec<(String, f64)> = result
                .summary
                .rows
                .iter()
                .map(|r| {
                    (
                        format!("{} p*={} A={}", r.label, r.p_star.unwrap(), r.amplitude.unwrap()),
                        r.wall_time_s,
                    )
                })
                .collect();
            timings.push(("total".into(), started.elapsed().as_secs_f64()));
            write_timings(dir, &timings)?;
        }

        Command::Lasso { data, target, task, folds, grid, penalty, test_fraction } => {
            let dataset = load(data, target, task)?;
            let prepared = dataset.split_and_standardize(
                test_fraction.unwrap_or(resolved.test_fraction),
                resolved.settings.seed,
            )?;
            let kind = kind_for(prepared.task);
            let fit = match penalty {
                Some(p) => lasso_path_fit(&prepared, kind, *p)?,
                None => lasso_cv(
                    &prepared,
                    kind,
                    folds.unwrap_or(resolved.folds),
                    grid.unwrap_or(resolved.grid),
                    resolved.settings.seed,
                )?,
            };
            println!(
                "lasso: penalty = {:.5e}, active set = {}, noise variance = {}",
                fit.penalty,
                fit.p_lasso,
                fit.noise_variance
                    .map(|v| format!("{v:.4}"))
                    .unwrap_or_else(|| "n/a".into()),
            );
            write_atomic(&dir.join("lasso_fit.json"), fit.to_json()?.as_bytes())?;
            Manifest::new(
                "lasso",
                serde_json::json!({
                    "data": data.display().to_string(),
                    "target": target,
                    "task": task,
                    "penalty": penalty,
                    "folds": folds.unwrap_or(resolved.folds),
                    "grid": grid.unwrap_or(resolved.grid),
                }),
                resolved.settings.seed,
                vec!["lasso_fit.json".into()],
            )
            .write(dir)?;
            write_timings(dir, &[("lasso".into(), started.elapsed().as_secs_f64())])?;
        }
    }
    Ok(())
}
