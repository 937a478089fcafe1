//! End-to-end drivers: trace -> samples -> encoded datasets -> fitted
//! models -> evaluation reports, plus the experiment-grid sweep.
//!
//! The encoder is always fitted on the training split only, so categorical
//! vocabularies never leak from test data. Splits are chronological; the
//! training prefix can additionally be truncated to a duration to study how
//! much trace time a model needs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::features::{
    encode, extract_windows_with, fit_encoder, mutual_information, ExtractOptions, FeatureError,
    MIRanking, MeasurementSample,
};
use crate::models::{
    evaluate, fit_forest, fit_knn, fit_linear, predict, truncate_training, EvalReport,
    ForestParams, KnnParams, LinearParams, ModelError, ModelKind, RunConfig, TrainedModel,
};
use crate::scoring::{ScoreConfig, ScoreError};
use crate::seed::mix_seed;
use crate::sensor::SensorError;
use crate::simulator::{simulate, GroundTruth, Scenario, SimError};
use crate::trace::{
    export_peer_csv, read_events, write_events, ObservationEvent, TraceError, TraceWarning,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("trace failed validation with {violations} violations; first: {first}")]
    InvalidTrace { violations: usize, first: String },
    #[error("not enough data: {0}")]
    NotEnoughData(String),
}

impl PipelineError {
    /// Process exit code policy: 2 for data problems, 3 for internal
    /// failures. (Usage errors exit 1 before any pipeline runs.)
    pub fn exit_code(&self) -> u8 {
        match self {
            PipelineError::Model(ModelError::SolveFailed(_)) => 3,
            _ => 2,
        }
    }
}

/// Loads a trace leniently and rejects it if validation finds violations.
pub fn load_trace(path: &Path) -> Result<(Vec<ObservationEvent>, Vec<TraceWarning>), PipelineError> {
    let outcome = read_events(path)?;
    Ok((outcome.events, outcome.warnings))
}

/// Validation gate shared by the analysis commands.
pub fn require_clean(events: &[ObservationEvent]) -> Result<(), PipelineError> {
    let report = crate::trace::validate_trace(events);
    if let Some(first) = report.violations.first() {
        return Err(PipelineError::InvalidTrace {
            violations: report.violations.len(),
            first: format!("line {}: {} ({})", first.line, first.rule, first.description),
        });
    }
    Ok(())
}

/// Simulates a scenario and writes the trace; returns the events and the
/// ground truth for callers that want them.
pub fn simulate_to_file(
    scenario: &Scenario,
    out: &Path,
) -> Result<(Vec<ObservationEvent>, GroundTruth), PipelineError> {
    let (events, truth) = simulate(scenario)?;
    write_events(out, &events)?;
    Ok((events, truth))
}

/// Scores a trace and writes one CSV per peer identity into `dir`.
pub fn score_to_peer_csvs(
    events: &[ObservationEvent],
    config: &ScoreConfig,
    options: &ExtractOptions,
    dir: &Path,
) -> Result<Vec<PathBuf>, PipelineError> {
    require_clean(events)?;
    let samples = extract_windows_with(events, config, options)?;
    Ok(export_peer_csv(&samples, dir)?)
}

/// Extracts and encodes a whole trace into one machine-readable CSV: the
/// encoded columns (vocabulary fitted on the full trace) plus the label.
pub fn featurize_csv(
    events: &[ObservationEvent],
    config: &ScoreConfig,
    options: &ExtractOptions,
    include_remembrance: bool,
) -> Result<String, PipelineError> {
    require_clean(events)?;
    let samples = extract_windows_with(events, config, options)?;
    let schema = fit_encoder(&samples)?;
    let dataset = encode(&schema, &samples, include_remembrance)?;

    let mut out = String::from("peer,");
    out.push_str(&dataset.column_names.join(","));
    out.push_str(",label\n");
    for (i, row) in dataset.rows.iter().enumerate() {
        out.push_str(&dataset.peers[i]);
        for value in row {
            out.push(',');
            out.push_str(&value.to_string());
        }
        out.push(',');
        out.push_str(&dataset.labels[i].to_string());
        out.push('\n');
    }
    Ok(out)
}

/// Extracts, encodes (remembrance column included on request), and ranks
/// every encoded column by mutual information with the label.
pub fn rank_features(
    events: &[ObservationEvent],
    config: &ScoreConfig,
    options: &ExtractOptions,
    include_remembrance: bool,
    bins: usize,
) -> Result<MIRanking, PipelineError> {
    require_clean(events)?;
    let samples = extract_windows_with(events, config, options)?;
    let schema = fit_encoder(&samples)?;
    let dataset = encode(&schema, &samples, include_remembrance)?;
    Ok(mutual_information(&dataset, bins)?)
}

/// Chronological sample split at the ceil(n * fraction) boundary, applied
/// before encoding so the vocabulary is fitted on training data only.
pub fn split_samples(
    samples: &[MeasurementSample],
    train_fraction: f64,
) -> Result<(&[MeasurementSample], &[MeasurementSample]), PipelineError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(PipelineError::Model(ModelError::InvalidFraction(train_fraction)));
    }
    let n = samples.len();
    let split = (n as f64 * train_fraction).ceil() as usize;
    if split == 0 || split >= n {
        return Err(PipelineError::NotEnoughData(format!(
            "{n} samples cannot produce non-empty splits at fraction {train_fraction}"
        )));
    }
    Ok((&samples[..split], &samples[split..]))
}

/// Hyperparameters for every model family; the sweep and the train/eval
/// commands pick the ones matching the requested kind.
#[derive(Debug, Clone, Default)]
pub struct ModelHyperparams {
    pub linear: LinearParams,
    pub knn: KnnParams,
    pub forest: ForestParams,
}

/// Fits the requested model kind; `seed` overrides the forest seed so grid
/// cells stay independently reproducible.
pub fn fit_model(
    train: &crate::features::Dataset,
    kind: ModelKind,
    params: &ModelHyperparams,
    seed: u64,
) -> Result<TrainedModel, ModelError> {
    match kind {
        ModelKind::Linear => fit_linear(train, params.linear.ridge_eps),
        ModelKind::Knn => fit_knn(train, params.knn.k, params.knn.standardize),
        ModelKind::Forest => {
            let forest = ForestParams { seed, ..params.forest.clone() };
            fit_forest(train, &forest)
        }
    }
}

/// Pooled MAE by default; per-peer mode averages per-peer MAEs instead and
/// reports the quartiles and confidence interval over the per-peer values.
pub fn evaluate_mode(
    predictions: &[f64],
    labels: &[f64],
    peers: &[String],
    per_peer: bool,
) -> Result<EvalReport, ModelError> {
    if !per_peer {
        return evaluate(predictions, labels);
    }
    let mut grouped: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for ((p, l), peer) in predictions.iter().zip(labels).zip(peers) {
        let entry = grouped.entry(peer).or_insert((0.0, 0));
        entry.0 += (p - l).abs();
        entry.1 += 1;
    }
    let per_peer_maes: Vec<f64> =
        grouped.values().map(|(sum, n)| sum / *n as f64).collect();
    evaluate(&per_peer_maes, &vec![0.0; per_peer_maes.len()])
}

/// Evaluation settings shared by `train`, `eval`, and the sweep cells.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub train_fraction: f64,
    pub remembrance: bool,
    pub include_timestamp: bool,
    /// Truncate the training prefix to this many trace seconds.
    pub train_duration_s: Option<f64>,
    /// Average MAE per peer instead of pooling all samples.
    pub per_peer: bool,
    pub seed: u64,
    pub params: ModelHyperparams,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            remembrance: true,
            include_timestamp: true,
            train_duration_s: None,
            per_peer: false,
            seed: 0,
            params: ModelHyperparams::default(),
        }
    }
}

/// Outcome of fitting and evaluating one configuration.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: EvalReport,
    pub train_rows: usize,
    pub test_rows: usize,
}

/// Full single-configuration pipeline: score, split, encode, fit, predict
/// the held-out suffix, evaluate.
pub fn eval_single(
    events: &[ObservationEvent],
    config: &ScoreConfig,
    kind: ModelKind,
    options: &EvalOptions,
) -> Result<EvalOutcome, PipelineError> {
    require_clean(events)?;
    let extract = ExtractOptions { include_timestamp: options.include_timestamp };
    let samples = extract_windows_with(events, config, &extract)?;
    let (train_samples, test_samples) = split_samples(&samples, options.train_fraction)?;

    let schema = fit_encoder(train_samples)?;
    let mut train = encode(&schema, train_samples, options.remembrance)?;
    let test = encode(&schema, test_samples, options.remembrance)?;
    if let Some(duration) = options.train_duration_s {
        train = truncate_training(&train, duration);
    }
    if train.is_empty() {
        return Err(PipelineError::NotEnoughData("empty training prefix".into()));
    }

    let model = fit_model(&train, kind, &options.params, options.seed)?;
    let predictions = predict(&model, &test)?;
    let report = evaluate_mode(&predictions, &test.labels, &test.peers, options.per_peer)?
        .with_config(RunConfig {
            model: kind,
            w_block: config.w_block,
            remembrance: options.remembrance,
            train_duration_s: options.train_duration_s,
        });
    Ok(EvalOutcome { report, train_rows: train.len(), test_rows: test.len() })
}

/// Like [`eval_single`] but evaluated on the training rows themselves;
/// used by the `train` command as a fit sanity check.
pub fn train_single(
    events: &[ObservationEvent],
    config: &ScoreConfig,
    kind: ModelKind,
    options: &EvalOptions,
) -> Result<EvalOutcome, PipelineError> {
    require_clean(events)?;
    let extract = ExtractOptions { include_timestamp: options.include_timestamp };
    let samples = extract_windows_with(events, config, &extract)?;
    let (train_samples, _) = split_samples(&samples, options.train_fraction)?;
    let schema = fit_encoder(train_samples)?;
    let mut train = encode(&schema, train_samples, options.remembrance)?;
    if let Some(duration) = options.train_duration_s {
        train = truncate_training(&train, duration);
    }
    if train.is_empty() {
        return Err(PipelineError::NotEnoughData("empty training prefix".into()));
    }
    let model = fit_model(&train, kind, &options.params, options.seed)?;
    let predictions = predict(&model, &train)?;
    let report = evaluate_mode(&predictions, &train.labels, &train.peers, options.per_peer)?
        .with_config(RunConfig {
            model: kind,
            w_block: config.w_block,
            remembrance: options.remembrance,
            train_duration_s: options.train_duration_s,
        });
    let rows = train.len();
    Ok(EvalOutcome { report, train_rows: rows, test_rows: 0 })
}

/// The experiment cross-product.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub w_block: Vec<f64>,
    pub remembrance: Vec<bool>,
    pub models: Vec<ModelKind>,
    pub train_durations_s: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            w_block: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            remembrance: vec![false, true],
            models: vec![ModelKind::Linear, ModelKind::Forest],
            train_durations_s: vec![40.0, 200.0, 1_000.0, 5_000.0, 25_000.0, 125_000.0],
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.w_block.is_empty()
            || self.remembrance.is_empty()
            || self.models.is_empty()
            || self.train_durations_s.is_empty()
        {
            return Err(PipelineError::InvalidGrid("every grid axis needs at least one value".into()));
        }
        if let Some(w) = self.w_block.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(PipelineError::InvalidGrid(format!("w_block {w} not in [0, 1]")));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.w_block.len() * self.remembrance.len() * self.models.len() * self.train_durations_s.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepStatus {
    Ok,
    InsufficientData,
}

impl SweepStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepStatus::Ok => "ok",
            SweepStatus::InsufficientData => "insufficient_data",
        }
    }
}

/// One grid cell's result row.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub report: EvalReport,
    pub status: SweepStatus,
}

fn empty_report(config: RunConfig) -> EvalReport {
    EvalReport {
        mae: f64::NAN,
        median_abs_err: f64::NAN,
        q1: f64::NAN,
        q3: f64::NAN,
        ci95_lo: f64::NAN,
        ci95_hi: f64::NAN,
        n: 0,
        config: Some(config),
    }
}

/// Runs the whole grid. Cells sharing a `w_block` value share one scoring
/// and extraction pass; per-cell seeds derive from (seed, cell index) so
/// the parallel schedule cannot affect results. Rows come back sorted by
/// (model, w_block, remembrance, duration).
pub fn run_sweep(
    events: &[ObservationEvent],
    base_config: &ScoreConfig,
    grid: &SweepGrid,
    options: &EvalOptions,
) -> Result<Vec<SweepRow>, PipelineError> {
    grid.validate()?;
    require_clean(events)?;

    let extract = ExtractOptions { include_timestamp: options.include_timestamp };
    let n_rem = grid.remembrance.len();
    let n_dur = grid.train_durations_s.len();
    let n_mod = grid.models.len();

    let groups: Result<Vec<Vec<SweepRow>>, PipelineError> = grid
        .w_block
        .par_iter()
        .enumerate()
        .map(|(wi, &w_block)| {
            let config = ScoreConfig { w_block, ..base_config.clone() };
            let samples = extract_windows_with(events, &config, &extract)?;
            let (train_samples, test_samples) = split_samples(&samples, options.train_fraction)?;
            let schema = fit_encoder(train_samples)?;

            let mut rows = Vec::with_capacity(n_rem * n_dur * n_mod);
            for (ri, &remembrance) in grid.remembrance.iter().enumerate() {
                let train_full = encode(&schema, train_samples, remembrance)?;
                let test = encode(&schema, test_samples, remembrance)?;
                for (di, &duration) in grid.train_durations_s.iter().enumerate() {
                    let train = truncate_training(&train_full, duration);
                    for (mi, &kind) in grid.models.iter().enumerate() {
                        let cell_index = ((wi * n_rem + ri) * n_dur + di) * n_mod + mi;
                        let cell_seed = mix_seed(options.seed, cell_index as u64);
                        let run = RunConfig {
                            model: kind,
                            w_block,
                            remembrance,
                            train_duration_s: Some(duration),
                        };
                        let insufficient = train.is_empty()
                            || (kind == ModelKind::Knn && options.params.knn.k > train.len());
                        if insufficient {
                            rows.push(SweepRow {
                                report: empty_report(run),
                                status: SweepStatus::InsufficientData,
                            });
                            continue;
                        }
                        let model = fit_model(&train, kind, &options.params, cell_seed)?;
                        let predictions = predict(&model, &test)?;
                        let report =
                            evaluate_mode(&predictions, &test.labels, &test.peers, options.per_peer)?
                                .with_config(run);
                        rows.push(SweepRow { report, status: SweepStatus::Ok });
                    }
                }
            }
            Ok(rows)
        })
        .collect();

    let mut rows: Vec<SweepRow> = groups?.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        let ca = a.report.config.as_ref().expect("sweep rows carry configs");
        let cb = b.report.config.as_ref().expect("sweep rows carry configs");
        ca.model
            .cmp(&cb.model)
            .then(ca.w_block.total_cmp(&cb.w_block))
            .then(ca.remembrance.cmp(&cb.remembrance))
            .then(
                ca.train_duration_s
                    .unwrap_or(f64::INFINITY)
                    .total_cmp(&cb.train_duration_s.unwrap_or(f64::INFINITY)),
            )
    });
    Ok(rows)
}

/// Stable header of the sweep report CSV.
pub const SWEEP_CSV_HEADER: &str =
    "model,w_B,remembrance,train_duration_s,mae,median,q1,q3,ci95_lo,ci95_hi,n,status";

fn report_csv_fields(report: &EvalReport) -> String {
    let config = report.config.as_ref().expect("report carries a config");
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        config.model,
        config.w_block,
        if config.remembrance { "on" } else { "off" },
        config.train_duration_s.map(|d| d.to_string()).unwrap_or_default(),
        report.mae,
        report.median_abs_err,
        report.q1,
        report.q3,
        report.ci95_lo,
        report.ci95_hi,
        report.n
    )
}

/// One CSV row per configuration, matching [`SWEEP_CSV_HEADER`].
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&report_csv_fields(&row.report));
        out.push(',');
        out.push_str(row.status.as_str());
        out.push('\n');
    }
    out
}

/// Single-report CSV (header + one row) for the eval/train commands.
pub fn report_csv(report: &EvalReport) -> String {
    format!("{SWEEP_CSV_HEADER}\n{},ok\n", report_csv_fields(report))
}

/// Per-model comparison of MAE with vs without remembrance, averaged over
/// the other grid axes.
pub fn sweep_summary(rows: &[SweepRow]) -> String {
    let mut buckets: BTreeMap<ModelKind, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for row in rows {
        if row.status != SweepStatus::Ok {
            continue;
        }
        let config = row.report.config.as_ref().unwrap();
        let bucket = buckets.entry(config.model).or_default();
        if config.remembrance {
            bucket.0.push(row.report.mae);
        } else {
            bucket.1.push(row.report.mae);
        }
    }
    let mean = |v: &[f64]| -> Option<f64> {
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let mut out = String::from("model        mae_with_remembrance  mae_without  without/with\n");
    for (model, (with, without)) in &buckets {
        let line = match (mean(with), mean(without)) {
            (Some(w), Some(wo)) => {
                format!("{model:<12} {w:<21.6e} {wo:<12.6e} {:.3e}\n", wo / w)
            }
            (Some(w), None) => format!("{model:<12} {w:<21.6e} {:<12} -\n", "-"),
            (None, Some(wo)) => format!("{model:<12} {:<21} {wo:<12.6e} -\n", "-"),
            (None, None) => continue,
        };
        out.push_str(&line);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::FEE_SCALE_10K_SATOSHI;

    fn small_trace() -> Vec<ObservationEvent> {
        let scenario = Scenario {
            duration_s: 240.0,
            max_concurrent_peers: 4,
            tx_rate_per_s: 2.0,
            seed: 77,
            ..Default::default()
        };
        simulate(&scenario).unwrap().0
    }

    fn fast_config() -> ScoreConfig {
        ScoreConfig {
            window_seconds: 5.0,
            fee_scale: FEE_SCALE_10K_SATOSHI,
            ..Default::default()
        }
    }

    #[test]
    fn sweep_emits_one_row_per_cell() {
        let events = small_trace();
        let grid = SweepGrid {
            w_block: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            remembrance: vec![false, true],
            models: vec![ModelKind::Linear, ModelKind::Knn],
            train_durations_s: vec![40.0, 200.0, 1_000.0, 5_000.0, 25_000.0, 125_000.0],
        };
        assert_eq!(grid.cell_count(), 120);
        let rows = run_sweep(&events, &fast_config(), &grid, &EvalOptions::default()).unwrap();
        assert_eq!(rows.len(), 120);

        let csv = sweep_csv(&rows);
        assert!(csv.starts_with(SWEEP_CSV_HEADER));
        assert_eq!(csv.lines().count(), 121);
    }

    #[test]
    fn sweep_rows_are_sorted_and_deterministic() {
        let events = small_trace();
        let grid = SweepGrid {
            w_block: vec![0.5, 0.0],
            remembrance: vec![true, false],
            models: vec![ModelKind::Forest, ModelKind::Linear],
            train_durations_s: vec![1_000.0, 40.0],
        };
        let options = EvalOptions {
            params: ModelHyperparams {
                forest: ForestParams { trees: 10, ..Default::default() },
                ..Default::default()
            },
            ..Default::default()
        };
        let a = run_sweep(&events, &fast_config(), &grid, &options).unwrap();
        let b = run_sweep(&events, &fast_config(), &grid, &options).unwrap();
        assert_eq!(sweep_csv(&a), sweep_csv(&b));

        let configs: Vec<(ModelKind, f64, bool, f64)> = a
            .iter()
            .map(|r| {
                let c = r.report.config.as_ref().unwrap();
                (c.model, c.w_block, c.remembrance, c.train_duration_s.unwrap())
            })
            .collect();
        let mut sorted = configs.clone();
        sorted.sort_by(|x, y| {
            x.0.cmp(&y.0)
                .then(x.1.total_cmp(&y.1))
                .then(x.2.cmp(&y.2))
                .then(x.3.total_cmp(&y.3))
        });
        assert_eq!(configs, sorted);
    }

    #[test]
    fn remembrance_gap_shows_up_in_the_summary() {
        let events = small_trace();
        let grid = SweepGrid {
            w_block: vec![0.5],
            remembrance: vec![false, true],
            models: vec![ModelKind::Linear],
            train_durations_s: vec![1e6],
        };
        let rows = run_sweep(&events, &fast_config(), &grid, &EvalOptions::default()).unwrap();
        let with = rows.iter().find(|r| r.report.config.as_ref().unwrap().remembrance).unwrap();
        let without = rows.iter().find(|r| !r.report.config.as_ref().unwrap().remembrance).unwrap();
        assert!(with.report.mae < without.report.mae);

        let summary = sweep_summary(&rows);
        assert!(summary.contains("linear"));
    }

    #[test]
    fn eval_single_produces_a_configured_report() {
        let events = small_trace();
        let outcome =
            eval_single(&events, &fast_config(), ModelKind::Linear, &EvalOptions::default())
                .unwrap();
        let config = outcome.report.config.as_ref().unwrap();
        assert_eq!(config.model, ModelKind::Linear);
        assert!(outcome.train_rows > 0 && outcome.test_rows > 0);
        assert!(outcome.report.mae.is_finite());
    }

    #[test]
    fn per_peer_averaging_changes_the_pooling() {
        let preds = vec![1.0, 1.0, 5.0];
        let labels = vec![0.0, 0.0, 0.0];
        let peers = vec!["a".to_owned(), "a".to_owned(), "b".to_owned()];
        let pooled = evaluate_mode(&preds, &labels, &peers, false).unwrap();
        let per_peer = evaluate_mode(&preds, &labels, &peers, true).unwrap();
        assert!((pooled.mae - 7.0 / 3.0).abs() < 1e-12);
        assert!((per_peer.mae - 3.0).abs() < 1e-12);
        assert_eq!(per_peer.n, 2);
    }

    #[test]
    fn invalid_grid_axes_are_rejected() {
        let events = small_trace();
        let grid = SweepGrid { w_block: vec![], ..Default::default() };
        assert!(matches!(
            run_sweep(&events, &fast_config(), &grid, &EvalOptions::default()),
            Err(PipelineError::InvalidGrid(_))
        ));
        let grid = SweepGrid { w_block: vec![1.5], ..Default::default() };
        assert!(run_sweep(&events, &fast_config(), &grid, &EvalOptions::default()).is_err());
    }

    #[test]
    fn unvalidated_traces_are_refused() {
        use crate::trace::{EventPayload, PeerKey};
        let events = vec![ObservationEvent::new(
            1.0,
            PeerKey::outbound("a", 1),
            EventPayload::Block { hash: "ab".repeat(32), height: 1 },
        )];
        assert!(matches!(
            eval_single(&events, &fast_config(), ModelKind::Linear, &EvalOptions::default()),
            Err(PipelineError::InvalidTrace { .. })
        ));
    }
}
