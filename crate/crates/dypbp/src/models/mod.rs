//! Regression models over encoded datasets and the evaluation metrics.
//!
//! Three regressors predict the beneficialness score: ordinary least
//! squares, k-nearest-neighbors, and a bagged random forest. Splits are
//! chronological (the data is a time series), and reports carry the mean
//! absolute error with its distributional context.

mod forest;
mod knn;
mod linear;

use std::fmt;

use thiserror::Error;

pub use forest::ForestParams;
pub use knn::KnnParams;
pub use linear::LinearParams;

use crate::features::Dataset;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training set is empty")]
    EmptyTraining,
    #[error("dataset too small to split: {n} rows at fraction {fraction}")]
    TooSmallToSplit { n: usize, fraction: f64 },
    #[error("train_fraction {0} not in (0, 1)")]
    InvalidFraction(f64),
    #[error("k = {k} exceeds the {n} training rows")]
    KTooLarge { k: usize, n: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidParam(String),
    #[error("schema fingerprint mismatch: model was trained on different columns")]
    SchemaMismatch,
    #[error("length mismatch: {predictions} predictions vs {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("cannot evaluate zero samples")]
    EmptyEvaluation,
    #[error("linear solve failed: {0}")]
    SolveFailed(String),
}

/// The model families under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Linear,
    Knn,
    Forest,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Knn => "knn",
            ModelKind::Forest => "forest",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" => Ok(ModelKind::Linear),
            "knn" => Ok(ModelKind::Knn),
            "forest" => Ok(ModelKind::Forest),
            other => Err(format!("unknown model {other:?}; expected linear|knn|forest")),
        }
    }
}

#[derive(Debug)]
pub(crate) enum ModelInner {
    Linear(linear::LinearModel),
    Knn(knn::KnnModel),
    Forest(forest::ForestModel),
}

/// A fitted model bound to the schema it was trained on.
#[derive(Debug)]
pub struct TrainedModel {
    pub(crate) fingerprint: String,
    pub(crate) inner: ModelInner,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self.inner {
            ModelInner::Linear(_) => ModelKind::Linear,
            ModelInner::Knn(_) => ModelKind::Knn,
            ModelInner::Forest(_) => ModelKind::Forest,
        }
    }

    /// Original-space coefficients (intercept, per-column slopes); linear
    /// models only.
    pub fn linear_coefficients(&self) -> Option<(f64, Vec<f64>)> {
        match &self.inner {
            ModelInner::Linear(m) => Some(m.original_coefficients()),
            _ => None,
        }
    }
}

/// One prediction per row, order preserving. The dataset must carry the
/// same columns the model was trained on.
pub fn predict(model: &TrainedModel, rows: &Dataset) -> Result<Vec<f64>, ModelError> {
    if rows.fingerprint() != model.fingerprint {
        return Err(ModelError::SchemaMismatch);
    }
    Ok(match &model.inner {
        ModelInner::Linear(m) => m.predict(&rows.rows),
        ModelInner::Knn(m) => m.predict(&rows.rows),
        ModelInner::Forest(m) => m.predict(&rows.rows),
    })
}

/// Ordinary least squares with intercept; see [`linear`] for the numerics.
pub fn fit_linear(train: &Dataset, ridge_eps: f64) -> Result<TrainedModel, ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptyTraining);
    }
    if ridge_eps < 0.0 {
        return Err(ModelError::InvalidParam(format!("ridge_eps must be >= 0, got {ridge_eps}")));
    }
    Ok(TrainedModel {
        fingerprint: train.fingerprint(),
        inner: ModelInner::Linear(linear::LinearModel::fit(train, ridge_eps)?),
    })
}

/// Mean-of-k-nearest-neighbors regression on Euclidean distance over raw
/// columns by default, or standardized ones.
pub fn fit_knn(train: &Dataset, k: usize, standardize: bool) -> Result<TrainedModel, ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptyTraining);
    }
    if k == 0 {
        return Err(ModelError::InvalidParam("k must be >= 1".into()));
    }
    if k > train.len() {
        return Err(ModelError::KTooLarge { k, n: train.len() });
    }
    Ok(TrainedModel {
        fingerprint: train.fingerprint(),
        inner: ModelInner::Knn(knn::KnnModel::fit(train, k, standardize)),
    })
}

/// Bagged regression trees, fully deterministic given the seed.
pub fn fit_forest(train: &Dataset, params: &ForestParams) -> Result<TrainedModel, ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptyTraining);
    }
    params.validate()?;
    Ok(TrainedModel {
        fingerprint: train.fingerprint(),
        inner: ModelInner::Forest(forest::ForestModel::fit(train, params)),
    })
}

fn slice_dataset(dataset: &Dataset, range: std::ops::Range<usize>) -> Dataset {
    Dataset {
        schema: dataset.schema.clone(),
        column_names: dataset.column_names.clone(),
        rows: dataset.rows[range.clone()].to_vec(),
        labels: dataset.labels[range.clone()].to_vec(),
        window_ends: dataset.window_ends[range.clone()].to_vec(),
        peers: dataset.peers[range].to_vec(),
        remembrance_included: dataset.remembrance_included,
    }
}

/// Splits at the `ceil(n * fraction)`-th row in chronological order; no
/// shuffling. Both halves must end up non-empty.
pub fn split_chronological(
    dataset: &Dataset,
    train_fraction: f64,
) -> Result<(Dataset, Dataset), ModelError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(ModelError::InvalidFraction(train_fraction));
    }
    let n = dataset.len();
    let split = (n as f64 * train_fraction).ceil() as usize;
    if split == 0 || split >= n {
        return Err(ModelError::TooSmallToSplit { n, fraction: train_fraction });
    }
    Ok((slice_dataset(dataset, 0..split), slice_dataset(dataset, split..n)))
}

/// Retains the training rows whose window end falls within `duration_s` of
/// the first row's window end. May return an empty dataset when the input
/// is empty; callers treat that as insufficient data.
pub fn truncate_training(train: &Dataset, duration_s: f64) -> Dataset {
    if train.is_empty() {
        return slice_dataset(train, 0..0);
    }
    let cutoff = train.window_ends[0] + duration_s;
    let keep = train.window_ends.partition_point(|end| *end <= cutoff);
    slice_dataset(train, 0..keep)
}

/// Per-configuration evaluation metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub w_block: f64,
    pub remembrance: bool,
    /// None means the full training split was used.
    pub train_duration_s: Option<f64>,
}

/// Error metrics over a prediction batch: MAE, absolute-error quartiles,
/// and a normal-approximation 95% confidence interval for the MAE.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mae: f64,
    pub median_abs_err: f64,
    pub q1: f64,
    pub q3: f64,
    pub ci95_lo: f64,
    pub ci95_hi: f64,
    pub n: usize,
    pub config: Option<RunConfig>,
}

impl EvalReport {
    pub fn with_config(mut self, config: RunConfig) -> Self {
        self.config = Some(config);
        self
    }
}

// Quantile by linear interpolation at position (n - 1) * p over a sorted
// slice.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Computes MAE and its error-distribution context from paired predictions
/// and labels.
///
/// MAE here is the mean of |label - prediction|; signed mean deviation
/// would let over- and under-estimates cancel and is not what "average
/// deviation" means for accuracy comparisons.
pub fn evaluate(predictions: &[f64], labels: &[f64]) -> Result<EvalReport, ModelError> {
    if predictions.len() != labels.len() {
        return Err(ModelError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    if predictions.is_empty() {
        return Err(ModelError::EmptyEvaluation);
    }
    let mut abs_errors: Vec<f64> =
        predictions.iter().zip(labels).map(|(p, l)| (p - l).abs()).collect();
    let n = abs_errors.len();
    let mae = abs_errors.iter().sum::<f64>() / n as f64;
    abs_errors.sort_by(f64::total_cmp);

    let std = if n > 1 {
        let var =
            abs_errors.iter().map(|e| (e - mae) * (e - mae)).sum::<f64>() / (n - 1) as f64;
        var.sqrt()
    } else {
        0.0
    };
    let half = 1.96 * std / (n as f64).sqrt();

    Ok(EvalReport {
        mae,
        median_abs_err: quantile_sorted(&abs_errors, 0.5),
        q1: quantile_sorted(&abs_errors, 0.25),
        q3: quantile_sorted(&abs_errors, 0.75),
        ci95_lo: mae - half,
        ci95_hi: mae + half,
        n,
        config: None,
    })
}

#[cfg(test)]
pub(crate) fn dataset_from(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> Dataset {
    use crate::features::FeatureSchema;
    let width = rows.first().map(Vec::len).unwrap_or(0);
    let names: Vec<String> = (0..width).map(|i| format!("f{i}")).collect();
    Dataset {
        schema: FeatureSchema { numeric: names.clone(), categorical: Vec::new() },
        column_names: names,
        window_ends: (0..rows.len()).map(|i| i as f64).collect(),
        peers: vec!["p".to_owned(); rows.len()],
        rows,
        labels,
        remembrance_included: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ten_rows() -> Dataset {
        dataset_from((0..10).map(|i| vec![i as f64]).collect(), (0..10).map(|i| i as f64).collect())
    }

    #[test]
    fn split_takes_the_ceiling() {
        let (train, test) = split_chronological(&ten_rows(), 0.8).unwrap();
        assert_eq!(train.len(), 8);
        assert_eq!(test.len(), 2);
    }

    #[test]
    fn split_preserves_chronological_order() {
        let (train, test) = split_chronological(&ten_rows(), 0.5).unwrap();
        for ds in [&train, &test] {
            for pair in ds.window_ends.windows(2) {
                assert!(pair[0] <= pair[1]);
            }
        }
        assert!(train.window_ends.last().unwrap() <= test.window_ends.first().unwrap());
    }

    #[test]
    fn split_of_one_row_fails() {
        let single = dataset_from(vec![vec![1.0]], vec![1.0]);
        assert!(matches!(
            split_chronological(&single, 0.8),
            Err(ModelError::TooSmallToSplit { .. })
        ));
    }

    #[test]
    fn truncate_covering_everything_is_identity() {
        let ds = ten_rows();
        let kept = truncate_training(&ds, 1e9);
        assert_eq!(kept.len(), ds.len());
    }

    #[test]
    fn truncate_keeps_the_prefix_window() {
        let ds = ten_rows();
        // window_ends are 0..9 seconds; 4.0 s keeps rows 0..=4.
        let kept = truncate_training(&ds, 4.0);
        assert_eq!(kept.len(), 5);
    }

    #[test]
    fn truncate_below_the_first_gap_keeps_one_row() {
        let ds = ten_rows();
        let kept = truncate_training(&ds, 0.5);
        assert_eq!(kept.len(), 1);
    }

    #[test]
    fn evaluate_basic_errors() {
        let report = evaluate(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).unwrap();
        assert!((report.mae - 2.0).abs() < 1e-12);
        assert!((report.median_abs_err - 2.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_perfect_predictions() {
        let report = evaluate(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(report.mae, 0.0);
        assert_eq!(report.q3, 0.0);
        assert_eq!(report.ci95_lo, 0.0);
        assert_eq!(report.ci95_hi, 0.0);
    }

    // Reference quantile: direct linear interpolation over the sorted
    // sample, independent of the implementation above.
    fn reference_quantile(values: &[f64], p: f64) -> f64 {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        if lo + 1 < sorted.len() {
            sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
        } else {
            sorted[lo]
        }
    }

    #[test]
    fn evaluate_skewed_errors_match_the_reference_quantiles() {
        let errors = [0.0, 0.0, 0.0, 4.0];
        let report = evaluate(&errors, &[0.0; 4]).unwrap();
        assert!((report.mae - 1.0).abs() < 1e-12);
        assert_eq!(report.median_abs_err, reference_quantile(&errors, 0.5));
        assert_eq!(report.median_abs_err, 0.0);
        assert_eq!(report.q3, reference_quantile(&errors, 0.75));
        assert_eq!(report.q3, 1.0);
        assert!(report.q1 <= report.median_abs_err && report.median_abs_err <= report.q3);
        assert!(report.ci95_lo <= report.mae && report.mae <= report.ci95_hi);
    }

    #[test]
    fn evaluate_is_permutation_invariant() {
        let preds = [3.0, 1.0, 4.0, 1.5];
        let labels = [2.0, 1.0, 5.0, 0.5];
        let a = evaluate(&preds, &labels).unwrap();
        let b = evaluate(&[1.5, 4.0, 1.0, 3.0], &[0.5, 5.0, 1.0, 2.0]).unwrap();
        assert_eq!(a.mae, b.mae);
        assert_eq!(a.median_abs_err, b.median_abs_err);
        assert_eq!(a.q1, b.q1);
        assert_eq!(a.q3, b.q3);
    }

    #[test]
    fn evaluate_rejects_mismatched_lengths() {
        assert!(matches!(
            evaluate(&[1.0], &[1.0, 2.0]),
            Err(ModelError::LengthMismatch { .. })
        ));
        assert!(matches!(evaluate(&[], &[]), Err(ModelError::EmptyEvaluation)));
    }

    #[test]
    fn predict_on_empty_rows_is_empty() {
        let train = ten_rows();
        let model = fit_linear(&train, 1e-8).unwrap();
        let empty = slice_dataset(&train, 0..0);
        assert!(predict(&model, &empty).unwrap().is_empty());
    }

    #[test]
    fn predict_rejects_foreign_schemas() {
        let train = ten_rows();
        let model = fit_linear(&train, 1e-8).unwrap();
        let other = dataset_from(vec![vec![1.0, 2.0]], vec![0.0]);
        assert!(matches!(predict(&model, &other), Err(ModelError::SchemaMismatch)));
    }
}
