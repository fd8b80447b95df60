//! Dataset ingestion, train/test splitting, standardization, and synthetic
//! generators.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::distributions::RngStream;
use crate::error::{Error, Result};

/// Whether the target is continuous or binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Regression,
    Classification,
}

impl Task {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            other => Err(Error::invalid(format!("unknown task {other:?}"))),
        }
    }
}

/// Per-column statistics used to standardize predictors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

/// Train/test membership by row index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// A supervised dataset: predictors, targets, and (after
/// [`Dataset::split_and_standardize`]) the standardization statistics and
/// split indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub task: Task,
    /// Feature column names (from the CSV header, or synthesized).
    pub columns: Vec<String>,
    pub standardization: Option<Standardization>,
    pub split: Option<Split>,
}

impl Dataset {
    /// An empty row count is allowed (prior-only inference); a dataset
    /// must still have at least one feature column.
    pub fn new(x: Array2<f64>, y: Array1<f64>, task: Task) -> Result<Self> {
        if x.ncols() == 0 {
            return Err(Error::EmptyDataset);
        }
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows vs {} targets",
                x.nrows(),
                y.len()
            )));
        }
        if task == Task::Classification {
            for (i, &v) in y.iter().enumerate() {
                if v != 0.0 && v != 1.0 {
                    return Err(Error::NonBinaryTarget(v, i));
                }
            }
        }
        let columns = (0..x.ncols()).map(|j| format!("x{}", j + 1)).collect();
        Ok(Dataset {
            x,
            y,
            task,
            columns,
            standardization: None,
            split: None,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    fn rows(&self, idx: &[usize]) -> (Array2<f64>, Array1<f64>) {
        let x = self.x.select(Axis(0), idx);
        let y = Array1::from_iter(idx.iter().map(|&i| self.y[i]));
        (x, y)
    }

    /// Training rows (the whole dataset when no split is set).
    pub fn train(&self) -> (Array2<f64>, Array1<f64>) {
        match &self.split {
            Some(s) => self.rows(&s.train),
            None => (self.x.clone(), self.y.clone()),
        }
    }

    /// Held-out rows; empty when no split is set.
    pub fn test(&self) -> (Array2<f64>, Array1<f64>) {
        match &self.split {
            Some(s) => self.rows(&s.test),
            None => (
                Array2::zeros((0, self.d())),
                Array1::zeros(0),
            ),
        }
    }

    /// Splits off `test_fraction` of the rows by a seeded permutation
    /// (stratified by class for classification) and standardizes every
    /// column with the training-portion mean and standard deviation.
    ///
    /// Errors if any column is constant on the training portion.
    pub fn split_and_standardize(&self, test_fraction: f64, seed: u64) -> Result<Dataset> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "test_fraction must lie in (0, 1), got {test_fraction}"
            )));
        }
        let n = self.n();
        let mut rng = RngStream::new(seed, 0).rng();
        let mut test: Vec<usize> = Vec::new();
        match self.task {
            Task::Regression => {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.shuffle(&mut rng);
                let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
                test.extend(&idx[..n_test]);
            }
            Task::Classification => {
                // Per-class permutation keeps both classes in the training set.
                for class in [0.0, 1.0] {
                    let mut idx: Vec<usize> =
                        (0..n).filter(|&i| self.y[i] == class).collect();
                    let n_class = idx.len();
                    idx.shuffle(&mut rng);
                    let n_test =
                        ((test_fraction * n_class as f64).round() as usize).min(n_class.saturating_sub(1));
                    test.extend(&idx[..n_test]);
                }
            }
        }
        test.sort_unstable();
        let train: Vec<usize> = (0..n).filter(|i| test.binary_search(i).is_err()).collect();
        self.standardize_with_split(Split { train, test })
    }

    /// Standardizes with the statistics of the given training rows.
    pub fn standardize_with_split(&self, split: Split) -> Result<Dataset> {
        let d = self.d();
        let n_train = split.train.len();
        if n_train < 2 {
            return Err(Error::invalid("training split needs at least 2 rows"));
        }
        let mut means = vec![0.0; d];
        let mut sds = vec![0.0; d];
        for j in 0..d {
            let mut sum = 0.0;
            for &i in &split.train {
                sum += self.x[[i, j]];
            }
            let mean = sum / n_train as f64;
            let mut ss = 0.0;
            for &i in &split.train {
                let c = self.x[[i, j]] - mean;
                ss += c * c;
            }
            let sd = (ss / (n_train - 1) as f64).sqrt();
            if sd == 0.0 || !sd.is_finite() {
                return Err(Error::ConstantColumn(self.columns[j].clone()));
            }
            means[j] = mean;
            sds[j] = sd;
        }
        let mut x = self.x.clone();
        for j in 0..d {
            for i in 0..self.n() {
                x[[i, j]] = (x[[i, j]] - means[j]) / sds[j];
            }
        }
        Ok(Dataset {
            x,
            y: self.y.clone(),
            task: self.task,
            columns: self.columns.clone(),
            standardization: Some(Standardization { means, sds }),
            split: Some(split),
        })
    }

    /// Applies existing standardization statistics to a new predictor
    /// matrix (e.g. test data scored by a saved model).
    pub fn apply_standardization(stats: &Standardization, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != stats.means.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} columns vs {} standardization statistics",
                x.ncols(),
                stats.means.len()
            )));
        }
        let mut out = x.clone();
        for j in 0..x.ncols() {
            for i in 0..x.nrows() {
                out[[i, j]] = (out[[i, j]] - stats.means[j]) / stats.sds[j];
            }
        }
        Ok(out)
    }
}

/// Loads a rectangular numeric CSV with a header row. The named target
/// column becomes `y`; all remaining columns become predictors.
/// Standardization is deferred until [`Dataset::split_and_standardize`].
pub fn load_csv(path: impl AsRef<Path>, target: &str, task: Task) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path.as_ref())?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| Error::MissingTargetColumn(target.to_string()))?;
    let columns: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != target_idx)
        .map(|(_, h)| h.clone())
        .collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut y: Vec<f64> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(headers.len() - 1);
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::CsvCell {
                row: row_idx + 2, // 1-based, counting the header line
                column: headers[j].clone(),
                message: format!("not numeric: {cell:?}"),
            })?;
            if j == target_idx {
                y.push(value);
            } else {
                row.push(value);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = rows[0].len();
    if d == 0 {
        return Err(Error::invalid("CSV has no feature columns besides the target"));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let x = Array2::from_shape_vec((y.len(), d), flat)
        .map_err(|e| Error::invalid(format!("shape error: {e}")))?;
    if task == Task::Classification {
        for (i, &v) in y.iter().enumerate() {
            if v != 0.0 && v != 1.0 {
                return Err(Error::NonBinaryTarget(v, i + 2));
            }
        }
    }
    let mut ds = Dataset::new(x, Array1::from(y), task)?;
    ds.columns = columns;
    Ok(ds)
}

/// A normal-means problem: identity design, targets equal to the signal
/// plus unit Gaussian noise, and the true coefficient vector kept for
/// error measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMeansProblem {
    pub data: Dataset,
    pub beta_true: Array1<f64>,
}

/// Generates the normal-means benchmark: `y_i = beta_i + eps_i` with
/// `eps ~ N(0,1)`, where `beta` has `p_star` entries equal to `amplitude`
/// at seed-permuted positions and zeros elsewhere. The design matrix is the
/// n-by-n identity; this path intentionally bypasses standardization.
pub fn generate_normal_means(
    n: usize,
    p_star: usize,
    amplitude: f64,
    seed: u64,
) -> Result<NormalMeansProblem> {
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    if p_star > n {
        return Err(Error::invalid(format!("p_star = {p_star} exceeds n = {n}")));
    }
    let mut rng = RngStream::new(seed, 0).rng();
    let mut positions: Vec<usize> = (0..n).collect();
    positions.shuffle(&mut rng);
    let mut beta = Array1::<f64>::zeros(n);
    for &pos in positions.iter().take(p_star) {
        beta[pos] = amplitude;
    }
    let y = Array1::from_iter(
        beta.iter()
            .map(|&b| b + rng.sample::<f64, _>(StandardNormal)),
    );
    let data = Dataset::new(Array2::eye(n), y, Task::Regression)?;
    Ok(NormalMeansProblem {
        data,
        beta_true: beta,
    })
}
