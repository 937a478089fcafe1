//! Feature extraction, encoding, and mutual-information ranking.
//!
//! [`extract_windows`] turns a trace into one [`MeasurementSample`] per
//! (peer, window), carrying the behavioral features observed up to the
//! window end together with the remembrance value (the peer's score at the
//! previous measurement) and the label (the score after the window).
//!
//! Missing numeric signals (no ping yet, no fee filter yet) are recorded as
//! the sentinel [`MISSING_NUMERIC`] rather than imputed. Categorical
//! features are one-hot encoded against a vocabulary frozen on training
//! data; tokens unseen at encode time produce an all-zeros block.
//!
//! Height-offset features are signed peer-minus-local differences, where
//! the local reference height is the running maximum over every peer's
//! height reports seen so far in the trace.

use std::collections::{BTreeMap, HashMap};
use std::net::{Ipv4Addr, Ipv6Addr};

use thiserror::Error;

use crate::scoring::{drive_trace, ScoreConfig, ScoreError, TraceSink, WindowRecord};
use crate::trace::{Direction, EventKind, EventPayload, ObservationEvent};

/// Sentinel for numeric features with no signal yet.
pub const MISSING_NUMERIC: f64 = -1.0;

/// Token used when a session has not produced a generic message yet.
pub const NO_COMMAND: &str = "none";

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("bins must be at least 2, got {0}")]
    InvalidBins(usize),
    #[error("k out of range: {k} not in 1..={len}")]
    KOutOfRange { k: usize, len: usize },
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// One (peer, window) measurement row before encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSample {
    /// Remembrance identity of the peer.
    pub peer: String,
    pub window_end: f64,
    pub numeric: BTreeMap<String, f64>,
    pub categorical: BTreeMap<String, String>,
    /// Score at the previous measurement.
    pub remembrance: f64,
    /// Score after this window: the training label.
    pub label: f64,
    /// True for the short window closed by disconnect or trace end.
    pub partial: bool,
}

impl MeasurementSample {
    #[cfg(test)]
    pub(crate) fn for_tests(peer: &str, window_end: f64, remembrance: f64, label: f64) -> Self {
        let mut numeric = BTreeMap::new();
        numeric.insert("timestamp".to_owned(), window_end);
        let mut categorical = BTreeMap::new();
        categorical.insert("direction".to_owned(), "outbound".to_owned());
        Self {
            peer: peer.to_owned(),
            window_end,
            numeric,
            categorical,
            remembrance,
            label,
            partial: false,
        }
    }
}

/// Extraction switches.
#[derive(Debug, Clone)]
pub struct ExtractOptions {
    /// The raw window-end timestamp is a strong but leaky feature under
    /// chronological splits; callers can drop it.
    pub include_timestamp: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self { include_timestamp: true }
    }
}

fn address_family(address: &str) -> &'static str {
    if address.parse::<Ipv4Addr>().is_ok() {
        "ipv4"
    } else if address.parse::<Ipv6Addr>().is_ok() || address.contains(':') {
        "ipv6"
    } else {
        "host"
    }
}

struct SessionFeatureState {
    connected_at: f64,
    direction: Direction,
    address: String,
    ping_rtt_ms: Option<f64>,
    proto_ping_rtt_ms: Option<f64>,
    headers_height: Option<u64>,
    block_height: Option<u64>,
    addr_accepted: u64,
    last_tx_ts: Option<f64>,
    min_fee_rate: Option<f64>,
    last_command: Option<String>,
    window_counts: HashMap<EventKind, u64>,
}

impl SessionFeatureState {
    fn open(connected_at: f64, direction: Direction, address: String) -> Self {
        Self {
            connected_at,
            direction,
            address,
            ping_rtt_ms: None,
            proto_ping_rtt_ms: None,
            headers_height: None,
            block_height: None,
            addr_accepted: 0,
            last_tx_ts: None,
            min_fee_rate: None,
            last_command: None,
            window_counts: HashMap::new(),
        }
    }
}

struct FeatureSink {
    options: ExtractOptions,
    sessions: HashMap<String, SessionFeatureState>,
    node_headers_height: Option<u64>,
    node_block_height: Option<u64>,
    config: ScoreConfig,
    samples: Vec<MeasurementSample>,
}

fn offset_feature(peer_height: Option<u64>, node_height: Option<u64>) -> f64 {
    match (peer_height, node_height) {
        (Some(peer), Some(node)) => peer as f64 - node as f64,
        _ => MISSING_NUMERIC,
    }
}

impl FeatureSink {
    fn new(config: ScoreConfig, options: ExtractOptions) -> Self {
        Self {
            options,
            sessions: HashMap::new(),
            node_headers_height: None,
            node_block_height: None,
            config,
            samples: Vec::new(),
        }
    }

    fn bump_node_headers(&mut self, height: u64) {
        self.node_headers_height = Some(self.node_headers_height.map_or(height, |h| h.max(height)));
    }

    fn bump_node_blocks(&mut self, height: u64) {
        self.node_block_height = Some(self.node_block_height.map_or(height, |h| h.max(height)));
    }
}

impl TraceSink for FeatureSink {
    fn window_closed(&mut self, record: &WindowRecord) {
        let connection_count = self.sessions.len() as f64;
        let Some(state) = self.sessions.get_mut(&record.identity) else {
            return;
        };

        let mut numeric = BTreeMap::new();
        if self.options.include_timestamp {
            numeric.insert("timestamp".to_owned(), record.window_end);
        }
        numeric.insert("connection_count".to_owned(), connection_count);
        numeric.insert(
            "connection_duration_s".to_owned(),
            record.window_end - state.connected_at,
        );
        numeric.insert(
            "ping_rtt_ms".to_owned(),
            state.ping_rtt_ms.unwrap_or(MISSING_NUMERIC),
        );
        numeric.insert(
            "proto_ping_rtt_ms".to_owned(),
            state.proto_ping_rtt_ms.unwrap_or(MISSING_NUMERIC),
        );
        numeric.insert(
            "header_height_offset".to_owned(),
            offset_feature(state.headers_height, self.node_headers_height),
        );
        numeric.insert(
            "block_height_offset".to_owned(),
            offset_feature(state.block_height, self.node_block_height),
        );
        numeric.insert("addr_accepted_count".to_owned(), state.addr_accepted as f64);
        numeric.insert(
            "time_since_last_tx_ms".to_owned(),
            state
                .last_tx_ts
                .map(|ts| (record.window_end - ts) * 1e3)
                .unwrap_or(MISSING_NUMERIC),
        );
        numeric.insert(
            "min_fee_rate".to_owned(),
            state.min_fee_rate.unwrap_or(MISSING_NUMERIC),
        );
        numeric.insert("novel_block_count".to_owned(), record.novel_blocks as f64);
        numeric.insert("novel_fee_total".to_owned(), record.novel_fee);

        let count = |counts: &HashMap<EventKind, u64>, kind: EventKind| {
            counts.get(&kind).copied().unwrap_or(0) as f64
        };
        let counts = &state.window_counts;
        numeric.insert("msg_count_block".to_owned(), count(counts, EventKind::Block));
        numeric.insert("msg_count_tx".to_owned(), count(counts, EventKind::Tx));
        numeric.insert("msg_count_ping_rtt".to_owned(), count(counts, EventKind::PingRtt));
        numeric.insert(
            "msg_count_proto_ping_rtt".to_owned(),
            count(counts, EventKind::ProtoPingRtt),
        );
        numeric.insert("msg_count_addr".to_owned(), count(counts, EventKind::Addr));
        numeric.insert(
            "msg_count_headers_height".to_owned(),
            count(counts, EventKind::HeadersHeight),
        );
        numeric.insert(
            "msg_count_block_height".to_owned(),
            count(counts, EventKind::BlockHeight),
        );
        numeric.insert("msg_count_feefilter".to_owned(), count(counts, EventKind::FeeFilter));
        numeric.insert("msg_count_other".to_owned(), count(counts, EventKind::Msg));

        let mut categorical = BTreeMap::new();
        categorical.insert(
            "direction".to_owned(),
            match state.direction {
                Direction::Inbound => "inbound".to_owned(),
                Direction::Outbound => "outbound".to_owned(),
            },
        );
        categorical.insert(
            "last_msg_command".to_owned(),
            state.last_command.clone().unwrap_or_else(|| NO_COMMAND.to_owned()),
        );
        categorical.insert("address_family".to_owned(), address_family(&state.address).to_owned());

        state.window_counts.clear();

        self.samples.push(MeasurementSample {
            peer: record.identity.clone(),
            window_end: record.window_end,
            numeric,
            categorical,
            remembrance: record.score_before,
            label: record.score_after,
            partial: record.partial,
        });
    }

    fn event_applied(&mut self, event: &ObservationEvent) {
        let identity = self.config.identity_of(&event.peer);

        // Node-local running maxima are fed by every peer's height reports.
        match &event.payload {
            EventPayload::Block { height, .. } | EventPayload::BlockHeight { height } => {
                self.bump_node_blocks(*height)
            }
            EventPayload::HeadersHeight { height } => self.bump_node_headers(*height),
            _ => {}
        }

        match &event.payload {
            EventPayload::Connect => {
                self.sessions.insert(
                    identity,
                    SessionFeatureState::open(
                        event.ts,
                        event.peer.direction,
                        event.peer.address.clone(),
                    ),
                );
                return;
            }
            EventPayload::Disconnect { .. } => {
                self.sessions.remove(&identity);
                return;
            }
            _ => {}
        }

        let Some(state) = self.sessions.get_mut(&identity) else {
            return;
        };
        match &event.payload {
            EventPayload::Block { height, .. } => {
                state.block_height = Some(state.block_height.map_or(*height, |h| h.max(*height)));
            }
            EventPayload::Tx { .. } => state.last_tx_ts = Some(event.ts),
            EventPayload::PingRtt { rtt_ms } => state.ping_rtt_ms = Some(*rtt_ms),
            EventPayload::ProtoPingRtt { rtt_ms } => state.proto_ping_rtt_ms = Some(*rtt_ms),
            EventPayload::Addr { count } => state.addr_accepted += count,
            EventPayload::HeadersHeight { height } => state.headers_height = Some(*height),
            EventPayload::BlockHeight { height } => state.block_height = Some(*height),
            EventPayload::FeeFilter { min_fee_rate } => state.min_fee_rate = Some(*min_fee_rate),
            EventPayload::Msg { command } => state.last_command = Some(command.clone()),
            EventPayload::Connect | EventPayload::Disconnect { .. } => unreachable!(),
        }
        *state.window_counts.entry(event.kind()).or_insert(0) += 1;
    }
}

/// Extracts one sample per (peer, window) with default options.
pub fn extract_windows(
    events: &[ObservationEvent],
    config: &ScoreConfig,
) -> Result<Vec<MeasurementSample>, FeatureError> {
    extract_windows_with(events, config, &ExtractOptions::default())
}

/// Extracts one sample per (peer, window), scoring the trace and snapshotting
/// the behavioral feature state at every window close.
pub fn extract_windows_with(
    events: &[ObservationEvent],
    config: &ScoreConfig,
    options: &ExtractOptions,
) -> Result<Vec<MeasurementSample>, FeatureError> {
    let mut sink = FeatureSink::new(config.clone(), options.clone());
    drive_trace(events, config, &mut sink)?;
    Ok(sink.samples)
}

/// Ordered numeric feature names plus per-categorical vocabularies, frozen
/// after fitting on training samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    pub numeric: Vec<String>,
    /// (feature name, lexicographically ordered vocabulary).
    pub categorical: Vec<(String, Vec<String>)>,
}

impl FeatureSchema {
    /// Number of encoded columns before the optional remembrance column.
    pub fn width(&self) -> usize {
        self.numeric.len() + self.categorical.iter().map(|(_, vocab)| vocab.len()).sum::<usize>()
    }

    /// Encoded column names in row order.
    pub fn column_names(&self, include_remembrance: bool) -> Vec<String> {
        let mut names = self.numeric.clone();
        for (feature, vocab) in &self.categorical {
            for token in vocab {
                names.push(format!("{feature}={token}"));
            }
        }
        if include_remembrance {
            names.push("remembrance".to_owned());
        }
        names
    }
}

/// Learns the numeric column set and categorical vocabularies from training
/// samples.
pub fn fit_encoder(samples: &[MeasurementSample]) -> Result<FeatureSchema, FeatureError> {
    if samples.is_empty() {
        return Err(FeatureError::EmptyInput("fit_encoder needs at least one sample"));
    }
    let mut numeric: Vec<String> = Vec::new();
    let mut vocabularies: BTreeMap<String, Vec<String>> = BTreeMap::new();
    {
        let mut seen_numeric: BTreeMap<&str, ()> = BTreeMap::new();
        let mut seen_tokens: BTreeMap<&str, BTreeMap<&str, ()>> = BTreeMap::new();
        for sample in samples {
            for name in sample.numeric.keys() {
                seen_numeric.insert(name, ());
            }
            for (name, token) in &sample.categorical {
                seen_tokens.entry(name).or_default().insert(token, ());
            }
        }
        numeric.extend(seen_numeric.keys().map(|s| s.to_string()));
        for (name, tokens) in seen_tokens {
            vocabularies.insert(name.to_owned(), tokens.keys().map(|s| s.to_string()).collect());
        }
    }
    Ok(FeatureSchema { numeric, categorical: vocabularies.into_iter().collect() })
}

/// Encoded, model-ready rows.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub schema: FeatureSchema,
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub window_ends: Vec<f64>,
    pub peers: Vec<String>,
    pub remembrance_included: bool,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.column_names.len()
    }

    /// Identity string for model/schema compatibility checks.
    pub fn fingerprint(&self) -> String {
        self.column_names.join(";")
    }

    /// Index range of the one-hot block, used to skip binning for binary
    /// columns.
    pub fn one_hot_range(&self) -> std::ops::Range<usize> {
        self.schema.numeric.len()..self.schema.width()
    }
}

/// Encodes samples against a fitted schema. Numeric columns are copied,
/// categoricals one-hot expanded (unseen tokens produce all zeros), and the
/// remembrance value is appended as the final column when requested.
pub fn encode(
    schema: &FeatureSchema,
    samples: &[MeasurementSample],
    include_remembrance: bool,
) -> Result<Dataset, FeatureError> {
    let width = schema.width() + usize::from(include_remembrance);
    let mut rows = Vec::with_capacity(samples.len());
    let mut labels = Vec::with_capacity(samples.len());
    let mut window_ends = Vec::with_capacity(samples.len());
    let mut peers = Vec::with_capacity(samples.len());

    for sample in samples {
        let mut row = Vec::with_capacity(width);
        for name in &schema.numeric {
            let value = sample.numeric.get(name).ok_or_else(|| {
                FeatureError::SchemaMismatch(format!("sample missing numeric feature {name}"))
            })?;
            row.push(*value);
        }
        for (feature, vocab) in &schema.categorical {
            let token = sample.categorical.get(feature).ok_or_else(|| {
                FeatureError::SchemaMismatch(format!("sample missing categorical feature {feature}"))
            })?;
            let hit = vocab.binary_search(token).ok();
            for (i, _) in vocab.iter().enumerate() {
                row.push(if hit == Some(i) { 1.0 } else { 0.0 });
            }
        }
        if include_remembrance {
            row.push(sample.remembrance);
        }
        rows.push(row);
        labels.push(sample.label);
        window_ends.push(sample.window_end);
        peers.push(sample.peer.clone());
    }

    Ok(Dataset {
        schema: schema.clone(),
        column_names: schema.column_names(include_remembrance),
        rows,
        labels,
        window_ends,
        peers,
        remembrance_included: include_remembrance,
    })
}

/// Feature ranking by mutual information with the label, in bits, sorted
/// non-increasing with lexicographic tie-break.
#[derive(Debug, Clone, PartialEq)]
pub struct MIRanking {
    pub entries: Vec<(String, f64)>,
}

impl MIRanking {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Equal-frequency bin assignment. Values tied with a bin edge fall into
/// the lower bin; duplicate edges collapse so heavily tied columns use
/// fewer bins.
fn quantile_bins(values: &[f64], bins: usize) -> Vec<u32> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges = Vec::with_capacity(bins - 1);
    for i in 1..bins {
        let p = i as f64 / bins as f64;
        let pos = p * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        let edge = sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
        edges.push(edge);
    }
    edges.dedup_by(|a, b| a == b);
    values
        .iter()
        .map(|v| edges.partition_point(|e| e < v) as u32)
        .collect()
}

fn binary_bins(values: &[f64]) -> Vec<u32> {
    values.iter().map(|v| u32::from(*v != 0.0)).collect()
}

fn mutual_information_bits(x: &[u32], y: &[u32]) -> f64 {
    let n = x.len() as f64;
    let mut joint: HashMap<(u32, u32), f64> = HashMap::new();
    let mut mx: HashMap<u32, f64> = HashMap::new();
    let mut my: HashMap<u32, f64> = HashMap::new();
    for (&a, &b) in x.iter().zip(y) {
        *joint.entry((a, b)).or_insert(0.0) += 1.0;
        *mx.entry(a).or_insert(0.0) += 1.0;
        *my.entry(b).or_insert(0.0) += 1.0;
    }
    let mut mi = 0.0;
    for ((a, b), c) in joint {
        let p = c / n;
        let px = mx[&a] / n;
        let py = my[&b] / n;
        mi += p * (p / (px * py)).log2();
    }
    mi.max(0.0)
}

/// Ranks every encoded column by its empirical mutual information with the
/// label. Continuous columns and the label are discretized into `bins`
/// equal-frequency bins; one-hot columns are used as-is.
pub fn mutual_information(dataset: &Dataset, bins: usize) -> Result<MIRanking, FeatureError> {
    if bins < 2 {
        return Err(FeatureError::InvalidBins(bins));
    }
    if dataset.is_empty() {
        return Err(FeatureError::EmptyInput("mutual_information needs a non-empty dataset"));
    }
    let one_hot = dataset.one_hot_range();
    let label_bins = quantile_bins(&dataset.labels, bins);

    let mut column = vec![0.0; dataset.len()];
    let mut entries: Vec<(String, f64)> = Vec::with_capacity(dataset.width());
    for (j, name) in dataset.column_names.iter().enumerate() {
        for (i, row) in dataset.rows.iter().enumerate() {
            column[i] = row[j];
        }
        let feature_bins = if one_hot.contains(&j) {
            binary_bins(&column)
        } else {
            quantile_bins(&column, bins)
        };
        entries.push((name.clone(), mutual_information_bits(&feature_bins, &label_bins)));
    }
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(MIRanking { entries })
}

/// First `k` feature names of a ranking.
pub fn select_top_k(ranking: &MIRanking, k: usize) -> Result<Vec<String>, FeatureError> {
    if k == 0 || k > ranking.len() {
        return Err(FeatureError::KOutOfRange { k, len: ranking.len() });
    }
    Ok(ranking.entries[..k].iter().map(|(name, _)| name.clone()).collect())
}
