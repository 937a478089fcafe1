//! Per-peer beneficialness scoring.
//!
//! Each peer accumulates a score from the previously unseen blocks and
//! transaction fees it delivers. Over one measurement window a peer collects
//! a novel-block count and a novel-fee sum; at the window close the score
//! advances by the weighted recurrence
//!
//! ```text
//! increment mode:  s  <-  s + gamma * (w_block * blocks + w_tx * fees)
//! prior mode:      s  <-  gamma * s + (w_block * blocks + w_tx * fees)
//! ```
//!
//! with `w_tx = 1 - w_block`. Novelty is node-global: only the first
//! delivery of a hash, across all peers, counts. Redundant deliveries leave
//! every accumulator unchanged.
//!
//! Scores survive disconnection. On DISCONNECT the engine checkpoints the
//! peer state into a remembrance store keyed by the peer's remembrance
//! identity (address, or address:port); a later CONNECT of the same
//! identity resumes from the checkpointed score instead of zero.
//!
//! # Window policy
//!
//! [`score_trace`] aligns windows to each session start with stride
//! `window_seconds`. A window spans `[start, start + window_seconds)`; an
//! event with a timestamp exactly on a boundary counts toward the next
//! window. Windows across peers close in global (end, identity) order.
//! A DISCONNECT closes a final short window, flagged partial, covering
//! whatever accumulated since the last boundary. Sessions still open when
//! the trace ends are flushed the same way at the final event timestamp and
//! checkpointed, as if disconnected there.

use std::collections::{BinaryHeap, HashMap, HashSet};
use std::cmp::Reverse;

use thiserror::Error;

use crate::trace::{EventKind, EventPayload, ObservationEvent, PeerKey};

/// Paper-literal fee unit: raw satoshi.
pub const FEE_SCALE_SATOSHI: f64 = 1.0;

/// Preset divisor that brings typical per-window fee sums to the same
/// magnitude as block counts.
pub const FEE_SCALE_10K_SATOSHI: f64 = 1e4;

/// Where the decay factor applies in the recurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayMode {
    /// `s + gamma * increment`; scores are monotone non-decreasing.
    Increment,
    /// `gamma * s + increment`; gamma < 1 makes idle scores decay.
    Prior,
}

/// How a [`PeerKey`] maps onto a remembrance identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentityMode {
    /// Identity is the address alone, so reconnects from ephemeral ports
    /// resume their score.
    AddressOnly,
    /// Identity is `address:port`; a new port is a new peer.
    AddressAndPort,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreConfig {
    /// Decay factor in `[0, 1]`.
    pub gamma: f64,
    /// Block weight in `[0, 1]`; the transaction weight is always
    /// `1 - w_block` and cannot be set independently.
    pub w_block: f64,
    /// Divisor applied to raw satoshi fees before weighting.
    pub fee_scale: f64,
    /// Measurement interval between window closes.
    pub window_seconds: f64,
    pub decay_mode: DecayMode,
    pub identity_mode: IdentityMode,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            w_block: 0.5,
            fee_scale: FEE_SCALE_SATOSHI,
            window_seconds: 1.0,
            decay_mode: DecayMode::Increment,
            identity_mode: IdentityMode::AddressOnly,
        }
    }
}

impl ScoreConfig {
    /// Derived transaction-fee weight.
    pub fn w_tx(&self) -> f64 {
        1.0 - self.w_block
    }

    pub fn validate(&self) -> Result<(), ScoreError> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(ScoreError::InvalidConfig(format!(
                "gamma out of range: {} not in [0, 1]",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.w_block) {
            return Err(ScoreError::InvalidConfig(format!(
                "w_block out of range: {} not in [0, 1]",
                self.w_block
            )));
        }
        if self.fee_scale <= 0.0 || !self.fee_scale.is_finite() {
            return Err(ScoreError::InvalidConfig(format!(
                "fee_scale must be positive, got {}",
                self.fee_scale
            )));
        }
        if self.window_seconds <= 0.0 || !self.window_seconds.is_finite() {
            return Err(ScoreError::InvalidConfig(format!(
                "window_seconds must be positive, got {}",
                self.window_seconds
            )));
        }
        Ok(())
    }

    /// Remembrance identity of a peer under this configuration.
    pub fn identity_of(&self, peer: &PeerKey) -> String {
        match self.identity_mode {
            IdentityMode::AddressOnly => peer.address.clone(),
            IdentityMode::AddressAndPort => format!("{}:{}", peer.address, peer.port),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("session error: {0}")]
    Session(String),
    #[error("events out of order at ts {ts}")]
    OutOfOrder { ts: f64 },
}

/// Snapshot of one peer's score around a window close.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreState {
    pub identity: String,
    /// Score at the previous measurement time.
    pub score_prev: f64,
    /// Score after the latest update.
    pub score_curr: f64,
    pub last_update: f64,
}

/// Accumulated sensing measurements for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowMeasurement {
    /// Count of previously unseen blocks delivered in the window.
    pub novel_blocks: u64,
    /// Sum of previously unseen transaction fees, after `fee_scale`.
    pub novel_fee: f64,
    pub window_start: f64,
    pub window_end: f64,
}

/// One (peer, window) row emitted by [`score_trace`].
#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    pub identity: String,
    pub peer: PeerKey,
    pub window_start: f64,
    pub window_end: f64,
    /// Score before this window's update: the remembrance value.
    pub score_before: f64,
    /// Score after this window's update: the label.
    pub score_after: f64,
    pub novel_blocks: u64,
    pub novel_fee: f64,
    /// True for the short window closed by a disconnect or trace end.
    pub partial: bool,
}

#[derive(Debug)]
struct Session {
    peer: PeerKey,
    window_start: f64,
    score_prev: f64,
    score_curr: f64,
    novel_blocks: u64,
    novel_fee: f64,
    serial: u64,
}

/// Stateful scoring engine: novelty ledger, remembrance store, and the
/// open-session accumulators.
///
/// Event application must be serialized in timestamp order (single logical
/// writer); lookups are read-only. Concurrent open sessions that map to the
/// same remembrance identity are rejected as nested sessions.
#[derive(Debug)]
pub struct ScoreEngine {
    config: ScoreConfig,
    seen_blocks: HashSet<String>,
    seen_txs: HashSet<String>,
    store: HashMap<String, ScoreState>,
    sessions: HashMap<String, Session>,
    next_serial: u64,
}

impl ScoreEngine {
    pub fn new(config: ScoreConfig) -> Result<Self, ScoreError> {
        config.validate()?;
        Ok(Self {
            config,
            seen_blocks: HashSet::new(),
            seen_txs: HashSet::new(),
            store: HashMap::new(),
            sessions: HashMap::new(),
            next_serial: 0,
        })
    }

    pub fn config(&self) -> &ScoreConfig {
        &self.config
    }

    pub fn identity_of(&self, peer: &PeerKey) -> String {
        self.config.identity_of(peer)
    }

    pub fn open_session_count(&self) -> usize {
        self.sessions.len()
    }

    /// Last checkpointed score for an identity, or 0 if never seen.
    pub fn remembrance_lookup(&self, identity: &str) -> f64 {
        self.store.get(identity).map(|s| s.score_curr).unwrap_or(0.0)
    }

    /// Applies one observation. CONNECT opens a session resuming from the
    /// remembrance store; DISCONNECT checkpoints and closes it; BLOCK and TX
    /// feed the novelty accumulators; other kinds are telemetry and leave
    /// the score state untouched.
    pub fn observe(&mut self, event: &ObservationEvent) -> Result<(), ScoreError> {
        let identity = self.identity_of(&event.peer);
        match &event.payload {
            EventPayload::Connect => {
                if self.sessions.contains_key(&identity) {
                    return Err(ScoreError::Session(format!(
                        "nested session: {identity} connected twice"
                    )));
                }
                let resumed = self.remembrance_lookup(&identity);
                let serial = self.next_serial;
                self.next_serial += 1;
                self.sessions.insert(
                    identity,
                    Session {
                        peer: event.peer.clone(),
                        window_start: event.ts,
                        score_prev: resumed,
                        score_curr: resumed,
                        novel_blocks: 0,
                        novel_fee: 0.0,
                        serial,
                    },
                );
            }
            EventPayload::Disconnect { .. } => {
                let session = self.sessions.remove(&identity).ok_or_else(|| {
                    ScoreError::Session(format!("disconnect without session for {identity}"))
                })?;
                self.store.insert(
                    identity.clone(),
                    ScoreState {
                        identity,
                        score_prev: session.score_prev,
                        score_curr: session.score_curr,
                        last_update: event.ts,
                    },
                );
            }
            EventPayload::Block { hash, .. } => {
                self.open_session(&identity)?;
                if self.seen_blocks.insert(hash.clone()) {
                    self.sessions.get_mut(&identity).unwrap().novel_blocks += 1;
                }
            }
            EventPayload::Tx { hash, fee, .. } => {
                self.open_session(&identity)?;
                if self.seen_txs.insert(hash.clone()) {
                    let scaled = *fee as f64 / self.config.fee_scale;
                    self.sessions.get_mut(&identity).unwrap().novel_fee += scaled;
                }
            }
            _ => {
                self.open_session(&identity)?;
            }
        }
        Ok(())
    }

    /// Closes the current window of `peer` at time `t`, advancing the score
    /// and resetting the accumulators.
    pub fn close_window(
        &mut self,
        peer: &PeerKey,
        t: f64,
    ) -> Result<(ScoreState, WindowMeasurement), ScoreError> {
        let identity = self.identity_of(peer);
        let record = self.close_window_by_identity(&identity, t, false)?;
        Ok((
            ScoreState {
                identity: record.identity,
                score_prev: record.score_before,
                score_curr: record.score_after,
                last_update: t,
            },
            WindowMeasurement {
                novel_blocks: record.novel_blocks,
                novel_fee: record.novel_fee,
                window_start: record.window_start,
                window_end: record.window_end,
            },
        ))
    }

    fn open_session(&self, identity: &str) -> Result<&Session, ScoreError> {
        self.sessions.get(identity).ok_or_else(|| {
            ScoreError::Session(format!("activity outside session for {identity}"))
        })
    }

    fn open_session_mut(&mut self, identity: &str) -> Result<&mut Session, ScoreError> {
        self.sessions.get_mut(identity).ok_or_else(|| {
            ScoreError::Session(format!("activity outside session for {identity}"))
        })
    }

    fn close_window_by_identity(
        &mut self,
        identity: &str,
        t: f64,
        partial: bool,
    ) -> Result<WindowRecord, ScoreError> {
        let config = self.config.clone();
        let session = self.open_session_mut(identity)?;
        if t < session.window_start {
            return Err(ScoreError::Session(format!(
                "close at {t} precedes window start {} for {identity}",
                session.window_start
            )));
        }
        let increment =
            config.w_block * session.novel_blocks as f64 + config.w_tx() * session.novel_fee;
        let updated = match config.decay_mode {
            DecayMode::Increment => session.score_curr + config.gamma * increment,
            DecayMode::Prior => config.gamma * session.score_curr + increment,
        };
        let record = WindowRecord {
            identity: identity.to_owned(),
            peer: session.peer.clone(),
            window_start: session.window_start,
            window_end: t,
            score_before: session.score_curr,
            score_after: updated,
            novel_blocks: session.novel_blocks,
            novel_fee: session.novel_fee,
            partial,
        };
        session.score_prev = session.score_curr;
        session.score_curr = updated;
        session.novel_blocks = 0;
        session.novel_fee = 0.0;
        session.window_start = t;
        Ok(record)
    }

    /// Checkpoints an open session without a DISCONNECT event; used when a
    /// trace ends with sessions still open.
    fn checkpoint_open(&mut self, identity: &str, t: f64) {
        if let Some(session) = self.sessions.remove(identity) {
            self.store.insert(
                identity.to_owned(),
                ScoreState {
                    identity: identity.to_owned(),
                    score_prev: session.score_prev,
                    score_curr: session.score_curr,
                    last_update: t,
                },
            );
        }
    }
}

/// Receives the driver's per-event and per-window callbacks in processing
/// order: a window close always fires before the event that triggered it is
/// applied.
pub(crate) trait TraceSink {
    fn window_closed(&mut self, record: &WindowRecord);
    fn event_applied(&mut self, _event: &ObservationEvent) {}
}

// Min-heap key for pending window boundaries; f64 boundaries are finite by
// construction so total_cmp gives a real ordering.
#[derive(PartialEq)]
struct Boundary {
    at: f64,
    identity: String,
    serial: u64,
}

impl Eq for Boundary {}

impl Ord for Boundary {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.at
            .total_cmp(&other.at)
            .then_with(|| self.identity.cmp(&other.identity))
            .then_with(|| self.serial.cmp(&other.serial))
    }
}

impl PartialOrd for Boundary {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Replays a whole trace through an engine, closing windows on the
/// per-session stride and flushing open sessions at the final event
/// timestamp. Returns the engine so callers can inspect final state.
pub(crate) fn drive_trace<S: TraceSink>(
    events: &[ObservationEvent],
    config: &ScoreConfig,
    sink: &mut S,
) -> Result<ScoreEngine, ScoreError> {
    let mut engine = ScoreEngine::new(config.clone())?;
    let stride = config.window_seconds;
    let mut pending: BinaryHeap<Reverse<Boundary>> = BinaryHeap::new();
    let mut serials: HashMap<String, u64> = HashMap::new();
    let mut prev_ts = f64::NEG_INFINITY;

    let close_due = |engine: &mut ScoreEngine,
                         pending: &mut BinaryHeap<Reverse<Boundary>>,
                         serials: &HashMap<String, u64>,
                         up_to: f64,
                         sink: &mut S|
     -> Result<(), ScoreError> {
        while let Some(Reverse(next)) = pending.peek() {
            if next.at > up_to {
                break;
            }
            let Reverse(next) = pending.pop().unwrap();
            // Stale entries from sessions that have since closed.
            if serials.get(&next.identity) != Some(&next.serial) {
                continue;
            }
            let record = engine.close_window_by_identity(&next.identity, next.at, false)?;
            sink.window_closed(&record);
            pending.push(Reverse(Boundary {
                at: next.at + stride,
                identity: next.identity,
                serial: next.serial,
            }));
        }
        Ok(())
    };

    for event in events {
        if event.ts < prev_ts {
            return Err(ScoreError::OutOfOrder { ts: event.ts });
        }
        prev_ts = event.ts;

        close_due(&mut engine, &mut pending, &serials, event.ts, sink)?;

        if event.kind() == EventKind::Disconnect {
            let identity = engine.identity_of(&event.peer);
            if let Some(session) = engine.sessions.get(&identity) {
                // Fold whatever accumulated since the last boundary into a
                // flagged partial window before the checkpoint.
                if event.ts > session.window_start
                    || session.novel_blocks > 0
                    || session.novel_fee != 0.0
                {
                    let record = engine.close_window_by_identity(&identity, event.ts, true)?;
                    sink.window_closed(&record);
                }
                serials.remove(&identity);
            }
        }

        engine.observe(event)?;
        sink.event_applied(event);

        if event.kind() == EventKind::Connect {
            let identity = engine.identity_of(&event.peer);
            let serial = engine.sessions[&identity].serial;
            serials.insert(identity.clone(), serial);
            pending.push(Reverse(Boundary { at: event.ts + stride, identity, serial }));
        }
    }

    if prev_ts.is_finite() {
        close_due(&mut engine, &mut pending, &serials, prev_ts, sink)?;
        let mut open: Vec<String> = engine.sessions.keys().cloned().collect();
        open.sort();
        for identity in open {
            let session = &engine.sessions[&identity];
            if prev_ts > session.window_start
                || session.novel_blocks > 0
                || session.novel_fee != 0.0
            {
                let record = engine.close_window_by_identity(&identity, prev_ts, true)?;
                sink.window_closed(&record);
            }
            engine.checkpoint_open(&identity, prev_ts);
        }
    }
    Ok(engine)
}

struct CollectSink {
    records: Vec<WindowRecord>,
}

impl TraceSink for CollectSink {
    fn window_closed(&mut self, record: &WindowRecord) {
        self.records.push(record.clone());
    }
}

/// Scores a whole trace, returning one record per (peer, window) in window
/// close order. The trace must be well-formed (see
/// [`crate::trace::validate_trace`]); session violations surface as errors.
pub fn score_trace(
    events: &[ObservationEvent],
    config: &ScoreConfig,
) -> Result<Vec<WindowRecord>, ScoreError> {
    let mut sink = CollectSink { records: Vec::new() };
    drive_trace(events, config, &mut sink)?;
    Ok(sink.records)
}

/// Like [`score_trace`], additionally returning the engine in its final
/// state (open sessions flushed and checkpointed) for remembrance lookups.
pub fn score_trace_final(
    events: &[ObservationEvent],
    config: &ScoreConfig,
) -> Result<(Vec<WindowRecord>, ScoreEngine), ScoreError> {
    let mut sink = CollectSink { records: Vec::new() };
    let engine = drive_trace(events, config, &mut sink)?;
    Ok((sink.records, engine))
}
