//! Synthetic trace generation with controllable ground truth.
//!
//! The simulator produces traces shaped like a private node's view of the
//! network: a bounded set of outbound peers that churn and reconnect, block
//! arrivals roughly every ten minutes, a steady transaction stream, and
//! telemetry chatter (pings, addr batches, height reports, fee filters).
//!
//! Every network-wide block or transaction is first delivered by one
//! connected peer, chosen by per-peer quality weights, and then echoed by a
//! random subset of the others after a short delay; the echoes are the
//! redundant deliveries the novelty rule must ignore. Per-peer expected
//! beneficialness is therefore known by construction and returned as
//! [`GroundTruth`].
//!
//! Generation is deterministic: the same scenario and seed produce a
//! byte-identical trace. Independent RNG streams (lifecycle, block clock,
//! tx clock, delivery assignment, per-session telemetry) keep the clocks
//! stable when unrelated parameters change.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp, Gamma, LogNormal, Normal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::{DecayMode, ScoreConfig};
use crate::seed::mix_seed;
use crate::trace::{quantize_ts, Direction, EventPayload, ObservationEvent, PeerKey};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("failed to read scenario {path}: {reason}")]
    Load { path: String, reason: String },
    #[error("expected_scores requires increment decay mode")]
    RequiresIncrementMode,
}

/// Simulation parameters; all fields have Mainnet-shaped defaults and can
/// be overridden from a TOML file or the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// Simulated wall-clock length in seconds.
    pub duration_s: f64,
    /// Outbound connection slots; a private node keeps at most 10.
    pub max_concurrent_peers: usize,
    /// Poisson rate of peers trying to take a free slot.
    pub peer_arrival_rate: f64,
    /// Median of the log-normal session duration for a median-quality peer.
    pub session_median_s: f64,
    /// Log-normal shape parameter of session durations.
    pub session_sigma: f64,
    /// Fraction of sessions that barely connect before dropping.
    pub short_lived_fraction: f64,
    /// Typical length of those near-zero sessions.
    pub short_session_s: f64,
    /// Mean of the exponential block inter-arrival time.
    pub block_interval_s: f64,
    /// Network-wide transactions per second.
    pub tx_rate_per_s: f64,
    /// Gamma shape for per-peer first-delivery propensity weights; the
    /// weights act as Dirichlet components over whoever is connected.
    pub quality_alpha: f64,
    pub rtt_base_min_ms: f64,
    pub rtt_base_max_ms: f64,
    pub rtt_jitter_ms: f64,
    /// Probability that another connected peer echoes a delivery.
    pub echo_fraction: f64,
    /// Mean of the exponential echo delay after the first delivery.
    pub echo_delay_mean_s: f64,
    /// Median transaction fee in satoshi (log-normal).
    pub fee_median_sat: f64,
    pub fee_sigma: f64,
    /// Chain height at simulation start.
    pub base_height: u64,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            duration_s: 21_600.0,
            max_concurrent_peers: 10,
            peer_arrival_rate: 0.02,
            session_median_s: 1_200.0,
            session_sigma: 1.0,
            short_lived_fraction: 0.15,
            short_session_s: 0.5,
            block_interval_s: 600.0,
            tx_rate_per_s: 5.0,
            quality_alpha: 1.0,
            rtt_base_min_ms: 20.0,
            rtt_base_max_ms: 300.0,
            rtt_jitter_ms: 8.0,
            echo_fraction: 0.35,
            echo_delay_mean_s: 0.2,
            fee_median_sat: 1_000.0,
            fee_sigma: 1.0,
            base_height: 800_000,
            seed: 42,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let reject = |field: &str, detail: String| -> Result<(), SimError> {
            Err(SimError::InvalidScenario(format!("{field}: {detail}")))
        };
        if self.duration_s < 0.0 || !self.duration_s.is_finite() {
            return reject("duration_s", format!("{} must be >= 0", self.duration_s));
        }
        if self.max_concurrent_peers == 0 {
            return reject("max_concurrent_peers", "must be >= 1".into());
        }
        for (field, value) in [
            ("session_median_s", self.session_median_s),
            ("short_session_s", self.short_session_s),
            ("block_interval_s", self.block_interval_s),
            ("quality_alpha", self.quality_alpha),
            ("fee_median_sat", self.fee_median_sat),
            ("echo_delay_mean_s", self.echo_delay_mean_s),
        ] {
            if value <= 0.0 || !value.is_finite() {
                return reject(field, format!("{value} must be > 0"));
            }
        }
        for (field, value) in [
            ("peer_arrival_rate", self.peer_arrival_rate),
            ("tx_rate_per_s", self.tx_rate_per_s),
            ("session_sigma", self.session_sigma),
            ("rtt_jitter_ms", self.rtt_jitter_ms),
            ("fee_sigma", self.fee_sigma),
        ] {
            if value < 0.0 || !value.is_finite() {
                return reject(field, format!("{value} must be >= 0"));
            }
        }
        for (field, value) in
            [("short_lived_fraction", self.short_lived_fraction), ("echo_fraction", self.echo_fraction)]
        {
            if !(0.0..=1.0).contains(&value) {
                return reject(field, format!("{value} must be in [0, 1]"));
            }
        }
        if self.rtt_base_min_ms <= 0.0 || self.rtt_base_max_ms < self.rtt_base_min_ms {
            return reject(
                "rtt_base_ms",
                format!("need 0 < min <= max, got {}..{}", self.rtt_base_min_ms, self.rtt_base_max_ms),
            );
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let scenario: Scenario = toml::from_str(text)
            .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Load {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    /// Mean of the log-normal fee distribution.
    pub fn mean_tx_fee_sat(&self) -> f64 {
        self.fee_median_sat * (self.fee_sigma * self.fee_sigma / 2.0).exp()
    }
}

/// Per-peer quality weights and per-hash first-delivery assignments; the
/// oracle side of a simulated trace.
#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    /// Raw (unnormalized) quality weight per peer address. The effective
    /// first-delivery probability at any instant is the weight divided by
    /// the sum over currently connected peers.
    pub peer_quality: BTreeMap<String, f64>,
    /// hash -> (address of first deliverer, delivery timestamp).
    pub first_deliveries: HashMap<String, (String, f64)>,
}

struct Profile {
    address: String,
    quality: f64,
    rtt_base_ms: f64,
    header_lag: u64,
    block_lag: u64,
    fee_rate: f64,
}

#[derive(Clone)]
struct SessionSpec {
    profile: usize,
    start: f64,
    end: f64,
}

// Pending lifecycle steps, ordered by (time, seq) for determinism.
#[derive(PartialEq)]
struct Lifecycle {
    at: f64,
    seq: u64,
    kind: LifecycleKind,
}

#[derive(PartialEq, Eq)]
enum LifecycleKind {
    Arrival,
    Departure { profile: usize },
}

impl Eq for Lifecycle {}

impl Ord for Lifecycle {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.at.total_cmp(&other.at).then_with(|| self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for Lifecycle {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

// Event classes order same-timestamp lines so sessions stay well-formed:
// CONNECT first, DISCONNECT last.
const RANK_CONNECT: u8 = 0;
const RANK_ACTIVITY: u8 = 1;
const RANK_DISCONNECT: u8 = 2;

struct Draft {
    ts: f64,
    rank: u8,
    seq: u64,
    peer: PeerKey,
    payload: EventPayload,
}

struct TraceAssembler {
    drafts: Vec<Draft>,
}

impl TraceAssembler {
    fn push(&mut self, ts: f64, rank: u8, peer: PeerKey, payload: EventPayload) {
        let seq = self.drafts.len() as u64;
        self.drafts.push(Draft { ts, rank, seq, peer, payload });
    }

    fn finish(mut self) -> Vec<ObservationEvent> {
        for draft in &mut self.drafts {
            draft.ts = quantize_ts(draft.ts.max(0.0));
        }
        self.drafts.sort_by(|a, b| {
            a.ts.total_cmp(&b.ts).then_with(|| a.rank.cmp(&b.rank)).then_with(|| a.seq.cmp(&b.seq))
        });
        self.drafts
            .into_iter()
            .map(|d| ObservationEvent::new(d.ts, d.peer, d.payload))
            .collect()
    }
}

fn profile_address(index: usize) -> String {
    // A sprinkling of IPv6 keeps the address-family feature non-constant.
    if index % 7 == 3 {
        format!("2001:db8::{:x}", index + 1)
    } else {
        format!("10.{}.{}.{}", (index >> 16) & 255, (index >> 8) & 255, (index & 255) + 1)
    }
}

fn random_hash(rng: &mut ChaCha12Rng) -> String {
    let bytes: [u8; 32] = rng.gen();
    let mut out = String::with_capacity(64);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

// Session-scoped telemetry cadences; scenario knobs cover the signal
// values, these cover their pacing.
const PING_INTERVAL_S: f64 = 15.0;
const PROTO_PING_INTERVAL_S: f64 = 60.0;
const ADDR_MEAN_GAP_S: f64 = 45.0;
const HEIGHT_UPDATE_INTERVAL_S: f64 = 30.0;
const MSG_RATE_PER_S: f64 = 0.2;
const SESSION_EDGE_MARGIN_S: f64 = 1e-3;

const MSG_VOCAB: [&str; 6] = ["getdata", "sendcmpct", "sendheaders", "wtxidrelay", "getaddr", "notfound"];

/// Generates a full trace plus its ground truth. The returned events are
/// sorted, microsecond-aligned, and always pass
/// [`crate::trace::validate_trace`] with zero violations.
pub fn simulate(scenario: &Scenario) -> Result<(Vec<ObservationEvent>, GroundTruth), SimError> {
    scenario.validate()?;
    let mut rng_profiles = ChaCha12Rng::seed_from_u64(mix_seed(scenario.seed, 0));
    let mut rng_lifecycle = ChaCha12Rng::seed_from_u64(mix_seed(scenario.seed, 1));
    let mut rng_blocks = ChaCha12Rng::seed_from_u64(mix_seed(scenario.seed, 2));
    let mut rng_txs = ChaCha12Rng::seed_from_u64(mix_seed(scenario.seed, 3));
    let mut rng_assign = ChaCha12Rng::seed_from_u64(mix_seed(scenario.seed, 4));

    // -- Peer roster -------------------------------------------------------
    let roster_size = scenario.max_concurrent_peers * 3;
    let quality_gamma = Gamma::new(scenario.quality_alpha, 1.0)
        .map_err(|e| SimError::InvalidScenario(format!("quality_alpha: {e}")))?;
    let rtt_range = Uniform::new_inclusive(scenario.rtt_base_min_ms, scenario.rtt_base_max_ms);
    let profiles: Vec<Profile> = (0..roster_size)
        .map(|i| Profile {
            address: profile_address(i),
            quality: quality_gamma.sample(&mut rng_profiles).max(1e-9),
            rtt_base_ms: rtt_range.sample(&mut rng_profiles),
            header_lag: rng_profiles.gen_range(0..3),
            block_lag: rng_profiles.gen_range(0..2),
            fee_rate: rng_profiles.gen_range(0.5..3.0),
        })
        .collect();

    // -- Session schedule --------------------------------------------------
    let mean_quality = scenario.quality_alpha;
    let mut sessions: Vec<SessionSpec> = Vec::new();
    {
        let mut heap: std::collections::BinaryHeap<std::cmp::Reverse<Lifecycle>> =
            std::collections::BinaryHeap::new();
        let mut seq = 0u64;
        let mut connected: Vec<bool> = vec![false; roster_size];
        let mut last_end: Vec<f64> = vec![f64::NEG_INFINITY; roster_size];
        let mut connected_count = 0usize;

        let draw_duration = |rng: &mut ChaCha12Rng, profile: &Profile| -> f64 {
            if rng.gen_bool(scenario.short_lived_fraction) {
                let jitter = LogNormal::new(0.0, 0.25).unwrap();
                scenario.short_session_s * jitter.sample(rng)
            } else {
                // Duration medians grow linearly with peer quality.
                let median =
                    scenario.session_median_s * (0.5 + 0.5 * profile.quality / mean_quality);
                LogNormal::new(median.ln(), scenario.session_sigma).unwrap().sample(rng)
            }
        };

        let open_session =
            |rng: &mut ChaCha12Rng,
             heap: &mut std::collections::BinaryHeap<std::cmp::Reverse<Lifecycle>>,
             seq: &mut u64,
             connected: &mut Vec<bool>,
             connected_count: &mut usize,
             sessions: &mut Vec<SessionSpec>,
             profile_idx: usize,
             start: f64| {
                let duration = draw_duration(rng, &profiles[profile_idx]);
                let end = (start + duration).min(scenario.duration_s);
                connected[profile_idx] = true;
                *connected_count += 1;
                sessions.push(SessionSpec { profile: profile_idx, start, end });
                heap.push(std::cmp::Reverse(Lifecycle {
                    at: end,
                    seq: *seq,
                    kind: LifecycleKind::Departure { profile: profile_idx },
                }));
                *seq += 1;
            };

        // Fill the slots at startup with lightly staggered dials.
        for i in 0..scenario.max_concurrent_peers.min(roster_size) {
            let start = (i as f64 * 0.05).min(scenario.duration_s);
            open_session(
                &mut rng_lifecycle,
                &mut heap,
                &mut seq,
                &mut connected,
                &mut connected_count,
                &mut sessions,
                i,
                start,
            );
        }
        if scenario.peer_arrival_rate > 0.0 {
            let gap = Exp::new(scenario.peer_arrival_rate).unwrap();
            let first = gap.sample(&mut rng_lifecycle);
            heap.push(std::cmp::Reverse(Lifecycle { at: first, seq, kind: LifecycleKind::Arrival }));
            seq += 1;
        }

        while let Some(std::cmp::Reverse(step)) = heap.pop() {
            if step.at > scenario.duration_s {
                break;
            }
            match step.kind {
                LifecycleKind::Departure { profile } => {
                    connected[profile] = false;
                    last_end[profile] = step.at;
                    connected_count -= 1;
                }
                LifecycleKind::Arrival => {
                    // Schedule the next arrival regardless of the outcome.
                    let gap = Exp::new(scenario.peer_arrival_rate).unwrap();
                    let next = step.at + gap.sample(&mut rng_lifecycle);
                    heap.push(std::cmp::Reverse(Lifecycle {
                        at: next,
                        seq,
                        kind: LifecycleKind::Arrival,
                    }));
                    seq += 1;

                    if connected_count >= scenario.max_concurrent_peers {
                        continue;
                    }
                    let available: Vec<usize> = (0..roster_size)
                        .filter(|&i| !connected[i] && last_end[i] + SESSION_EDGE_MARGIN_S <= step.at)
                        .collect();
                    if available.is_empty() {
                        continue;
                    }
                    let pick = available[rng_lifecycle.gen_range(0..available.len())];
                    open_session(
                        &mut rng_lifecycle,
                        &mut heap,
                        &mut seq,
                        &mut connected,
                        &mut connected_count,
                        &mut sessions,
                        pick,
                        step.at,
                    );
                }
            }
        }
    }
    sessions.sort_by(|a, b| a.start.total_cmp(&b.start).then_with(|| a.profile.cmp(&b.profile)));

    let peer_key = |profile: &Profile| PeerKey {
        address: profile.address.clone(),
        port: 8333,
        direction: Direction::Outbound,
    };

    let mut assembler = TraceAssembler { drafts: Vec::new() };
    for session in &sessions {
        let key = peer_key(&profiles[session.profile]);
        assembler.push(session.start, RANK_CONNECT, key.clone(), EventPayload::Connect);
        assembler.push(
            session.end,
            RANK_DISCONNECT,
            key,
            EventPayload::Disconnect { reason: None },
        );
    }

    // -- Network-wide block and transaction clocks --------------------------
    let mut block_times: Vec<f64> = Vec::new();
    {
        let gap = Exp::new(1.0 / scenario.block_interval_s).unwrap();
        let mut t = gap.sample(&mut rng_blocks);
        while t < scenario.duration_s {
            block_times.push(t);
            t += gap.sample(&mut rng_blocks);
        }
    }
    let mut tx_times: Vec<f64> = Vec::new();
    if scenario.tx_rate_per_s > 0.0 {
        let gap = Exp::new(scenario.tx_rate_per_s).unwrap();
        let mut t = gap.sample(&mut rng_txs);
        while t < scenario.duration_s {
            tx_times.push(t);
            t += gap.sample(&mut rng_txs);
        }
    }
    let chain_height_at = |t: f64| -> u64 {
        scenario.base_height + block_times.partition_point(|bt| *bt <= t) as u64
    };

    // -- Deliveries ---------------------------------------------------------
    let mut ground_truth = GroundTruth::default();
    for session in &sessions {
        ground_truth
            .peer_quality
            .entry(profiles[session.profile].address.clone())
            .or_insert(profiles[session.profile].quality);
    }

    enum Item {
        Block { height: u64 },
        Tx,
    }
    let mut items: Vec<(f64, Item)> = Vec::with_capacity(block_times.len() + tx_times.len());
    for (i, t) in block_times.iter().enumerate() {
        items.push((*t, Item::Block { height: scenario.base_height + i as u64 + 1 }));
    }
    for t in &tx_times {
        items.push((*t, Item::Tx));
    }
    items.sort_by(|a, b| {
        a.0.total_cmp(&b.0).then_with(|| match (&a.1, &b.1) {
            (Item::Block { .. }, Item::Tx) => std::cmp::Ordering::Less,
            (Item::Tx, Item::Block { .. }) => std::cmp::Ordering::Greater,
            _ => std::cmp::Ordering::Equal,
        })
    });

    let fee_dist = LogNormal::new(scenario.fee_median_sat.ln(), scenario.fee_sigma).unwrap();
    let echo_gap = Exp::new(1.0 / scenario.echo_delay_mean_s).unwrap();
    let jitter = Normal::new(0.0, scenario.rtt_jitter_ms.max(1e-9)).unwrap();

    // Two cursors over the time-sorted session list keep the per-item
    // candidate scan linear overall.
    let mut active: Vec<usize> = Vec::new();
    let mut next_session = 0usize;

    for (t, item) in items {
        while next_session < sessions.len() && sessions[next_session].start <= t {
            active.push(next_session);
            next_session += 1;
        }
        active.retain(|&s| sessions[s].end > t);

        let candidates: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&s| sessions[s].end - t > SESSION_EDGE_MARGIN_S)
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let total_weight: f64 =
            candidates.iter().map(|&s| profiles[sessions[s].profile].quality).sum();
        let mut pick = rng_assign.gen_range(0.0..total_weight);
        let mut chosen = candidates[candidates.len() - 1];
        for &s in &candidates {
            let w = profiles[sessions[s].profile].quality;
            if pick < w {
                chosen = s;
                break;
            }
            pick -= w;
        }

        let spec = &sessions[chosen];
        let profile = &profiles[spec.profile];
        let raw_delay =
            (profile.rtt_base_ms / 2.0 + jitter.sample(&mut rng_assign).abs()) / 1e3;
        let margin = spec.end - t;
        let delay = raw_delay.min(margin * 0.5).max(1e-6);
        let first_ts = t + delay;

        let hash = random_hash(&mut rng_assign);
        let payload = match item {
            Item::Block { height } => EventPayload::Block { hash: hash.clone(), height },
            Item::Tx => EventPayload::Tx {
                hash: hash.clone(),
                fee: fee_dist.sample(&mut rng_assign).round().max(0.0) as u64,
                size: rng_assign.gen_range(150..=600),
                fee_unknown: false,
            },
        };
        ground_truth.first_deliveries.insert(hash.clone(), (profile.address.clone(), first_ts));
        assembler.push(first_ts, RANK_ACTIVITY, peer_key(profile), payload.clone());

        // Redundant echoes from a random subset of the other peers.
        for &other in &candidates {
            if other == chosen || !rng_assign.gen_bool(scenario.echo_fraction) {
                continue;
            }
            let other_spec = &sessions[other];
            let echo_ts = first_ts + echo_gap.sample(&mut rng_assign).max(1e-6);
            if echo_ts >= other_spec.end - 1e-6 || echo_ts < other_spec.start {
                continue;
            }
            assembler.push(
                echo_ts,
                RANK_ACTIVITY,
                peer_key(&profiles[other_spec.profile]),
                payload.clone(),
            );
        }
    }

    // -- Per-session telemetry ----------------------------------------------
    for (session_index, session) in sessions.iter().enumerate() {
        let profile = &profiles[session.profile];
        let key = peer_key(profile);
        let mut rng =
            ChaCha12Rng::seed_from_u64(mix_seed(scenario.seed, 1_000_000 + session_index as u64));
        let end = session.end - SESSION_EDGE_MARGIN_S;
        let rtt = |rng: &mut ChaCha12Rng, base: f64| -> f64 {
            (base + Normal::new(0.0, scenario.rtt_jitter_ms.max(1e-9)).unwrap().sample(rng).abs())
                .max(0.1)
        };

        // Handshake-time reports arrive quickly after the dial.
        let handshake = session.start + 0.2 + rng.gen_range(0.0..0.3);
        if handshake < end {
            let height = chain_height_at(handshake);
            assembler.push(
                handshake,
                RANK_ACTIVITY,
                key.clone(),
                EventPayload::HeadersHeight { height: height.saturating_sub(profile.header_lag) },
            );
            assembler.push(
                handshake,
                RANK_ACTIVITY,
                key.clone(),
                EventPayload::BlockHeight {
                    height: height.saturating_sub(profile.header_lag + profile.block_lag),
                },
            );
            assembler.push(
                handshake,
                RANK_ACTIVITY,
                key.clone(),
                EventPayload::FeeFilter { min_fee_rate: profile.fee_rate },
            );
            // Transport RTT measured once at dial time.
            assembler.push(
                session.start
                    + rng.gen_range(0.01..0.1f64).min((session.end - session.start) / 2.0),
                RANK_ACTIVITY,
                key.clone(),
                EventPayload::PingRtt { rtt_ms: rtt(&mut rng, profile.rtt_base_ms) },
            );
        }

        let push_periodic = |rng: &mut ChaCha12Rng,
                                 assembler: &mut TraceAssembler,
                                 interval: f64,
                                 build: &mut dyn FnMut(&mut ChaCha12Rng, f64) -> EventPayload| {
            let phase = rng.gen_range(0.0..interval);
            let mut t = session.start + phase;
            while t < end {
                let payload = build(rng, t);
                assembler.push(t, RANK_ACTIVITY, key.clone(), payload);
                t += interval;
            }
        };

        push_periodic(&mut rng, &mut assembler, PING_INTERVAL_S, &mut |rng, _| {
            EventPayload::PingRtt { rtt_ms: rtt(rng, profile.rtt_base_ms) }
        });
        push_periodic(&mut rng, &mut assembler, PROTO_PING_INTERVAL_S, &mut |rng, _| {
            EventPayload::ProtoPingRtt { rtt_ms: rtt(rng, profile.rtt_base_ms * 1.1 + 2.0) }
        });
        push_periodic(&mut rng, &mut assembler, HEIGHT_UPDATE_INTERVAL_S, &mut |rng, t| {
            let height = chain_height_at(t).saturating_sub(profile.header_lag);
            if rng.gen_bool(0.5) {
                EventPayload::HeadersHeight { height }
            } else {
                EventPayload::BlockHeight { height: height.saturating_sub(profile.block_lag) }
            }
        });

        // Addr batches and generic commands on Poisson clocks.
        if end > session.start {
            let addr_gap = Exp::new(1.0 / ADDR_MEAN_GAP_S).unwrap();
            let mut t = session.start + addr_gap.sample(&mut rng);
            while t < end {
                let count = rng.gen_range(1..=10);
                assembler.push(t, RANK_ACTIVITY, key.clone(), EventPayload::Addr { count });
                t += addr_gap.sample(&mut rng);
            }
            let msg_gap = Exp::new(MSG_RATE_PER_S).unwrap();
            let mut t = session.start + msg_gap.sample(&mut rng);
            while t < end {
                let command = MSG_VOCAB[rng.gen_range(0..MSG_VOCAB.len())];
                assembler.push(
                    t,
                    RANK_ACTIVITY,
                    key.clone(),
                    EventPayload::Msg { command: command.to_owned() },
                );
                t += msg_gap.sample(&mut rng);
            }
        }
    }

    Ok((assembler.finish(), ground_truth))
}

/// Closed-form expected score trajectories, one point per window, assuming
/// a static connected set (increment mode only).
///
/// The expected per-window increment for a peer holding share `q` of the
/// total quality weight is
/// `gamma * (w_block * q * window / block_interval
///           + w_tx * q * tx_rate * window * mean_fee / fee_scale)`.
pub fn expected_scores(
    ground_truth: &GroundTruth,
    scenario: &Scenario,
    config: &ScoreConfig,
    windows: usize,
) -> Result<BTreeMap<String, Vec<f64>>, SimError> {
    if config.decay_mode != DecayMode::Increment {
        return Err(SimError::RequiresIncrementMode);
    }
    let total: f64 = ground_truth.peer_quality.values().sum();
    let mut out = BTreeMap::new();
    for (address, quality) in &ground_truth.peer_quality {
        let share = if total > 0.0 { quality / total } else { 0.0 };
        let blocks_per_window = share * config.window_seconds / scenario.block_interval_s;
        let fee_per_window = share
            * scenario.tx_rate_per_s
            * config.window_seconds
            * scenario.mean_tx_fee_sat()
            / config.fee_scale;
        let increment =
            config.gamma * (config.w_block * blocks_per_window + config.w_tx() * fee_per_window);
        out.insert(address.clone(), (1..=windows).map(|k| k as f64 * increment).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::score_trace_final;
    use crate::trace::validate_trace;

    fn quiet_scenario() -> Scenario {
        Scenario {
            duration_s: 1_800.0,
            max_concurrent_peers: 4,
            peer_arrival_rate: 0.0,
            session_median_s: 1e7,
            short_lived_fraction: 0.0,
            tx_rate_per_s: 0.5,
            ..Default::default()
        }
    }

    #[test]
    fn zero_duration_yields_only_session_brackets() {
        let scenario = Scenario { duration_s: 0.0, ..Default::default() };
        let (events, _) = simulate(&scenario).unwrap();
        assert!(!events.is_empty());
        for event in &events {
            assert!(matches!(
                event.payload,
                EventPayload::Connect | EventPayload::Disconnect { .. }
            ));
        }
        assert!(validate_trace(&events).is_clean());
    }

    #[test]
    fn single_peer_takes_every_first_delivery() {
        let scenario = Scenario {
            max_concurrent_peers: 1,
            duration_s: 3_600.0,
            peer_arrival_rate: 0.0,
            session_median_s: 1e7,
            short_lived_fraction: 0.0,
            ..Default::default()
        };
        let (_, truth) = simulate(&scenario).unwrap();
        assert!(!truth.first_deliveries.is_empty());
        let lone = truth.peer_quality.keys().next().unwrap();
        assert_eq!(truth.peer_quality.len(), 1);
        for (address, _) in truth.first_deliveries.values() {
            assert_eq!(address, lone);
        }
    }

    #[test]
    fn traces_are_deterministic_per_seed() {
        let scenario = Scenario { duration_s: 900.0, ..Default::default() };
        let (a, _) = simulate(&scenario).unwrap();
        let (b, _) = simulate(&scenario).unwrap();
        assert_eq!(a, b);
        let (c, _) = simulate(&Scenario { seed: 43, ..scenario }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn generated_traces_validate_cleanly() {
        for seed in [1, 2, 3] {
            let scenario = Scenario { duration_s: 1_200.0, seed, ..Default::default() };
            let (events, _) = simulate(&scenario).unwrap();
            let report = validate_trace(&events);
            assert!(report.is_clean(), "violations: {:?}", report.violations);
        }
    }

    #[test]
    fn every_hash_has_exactly_one_first_delivery() {
        let scenario = Scenario { duration_s: 1_200.0, seed: 5, ..Default::default() };
        let (events, truth) = simulate(&scenario).unwrap();
        let mut seen: HashMap<&str, (f64, &str)> = HashMap::new();
        for event in &events {
            let hash = match &event.payload {
                EventPayload::Block { hash, .. } => hash,
                EventPayload::Tx { hash, .. } => hash,
                _ => continue,
            };
            seen.entry(hash)
                .and_modify(|(first_ts, _)| assert!(event.ts >= *first_ts))
                .or_insert((event.ts, &event.peer.address));
        }
        assert_eq!(seen.len(), truth.first_deliveries.len());
        for (hash, (address, _)) in &truth.first_deliveries {
            let (_, first_addr) = seen[hash.as_str()];
            assert_eq!(first_addr, address);
        }
    }

    #[test]
    fn concurrency_never_exceeds_the_cap() {
        let scenario = Scenario { duration_s: 3_600.0, seed: 9, ..Default::default() };
        let (events, _) = simulate(&scenario).unwrap();
        let mut open = 0i64;
        let mut max_open = 0i64;
        for event in &events {
            match event.payload {
                EventPayload::Connect => {
                    open += 1;
                    max_open = max_open.max(open);
                }
                EventPayload::Disconnect { .. } => open -= 1,
                _ => {}
            }
        }
        assert!(max_open as usize <= scenario.max_concurrent_peers);
        assert!(max_open >= 1);
    }

    #[test]
    fn expected_increment_matches_hand_arithmetic() {
        // share 0.5, block interval 600, window 60, blocks only.
        let mut truth = GroundTruth::default();
        truth.peer_quality.insert("a".into(), 1.0);
        truth.peer_quality.insert("b".into(), 1.0);
        let scenario = Scenario { block_interval_s: 600.0, ..Default::default() };
        let config = ScoreConfig { w_block: 1.0, window_seconds: 60.0, ..Default::default() };
        let out = expected_scores(&truth, &scenario, &config, 3).unwrap();
        let a = &out["a"];
        assert!((a[0] - 0.05).abs() < 1e-12);
        assert!((a[2] - 0.15).abs() < 1e-12);
    }

    #[test]
    fn zero_quality_peer_expects_a_flat_zero_trajectory() {
        let mut truth = GroundTruth::default();
        truth.peer_quality.insert("a".into(), 0.0);
        truth.peer_quality.insert("b".into(), 1.0);
        let out =
            expected_scores(&truth, &Scenario::default(), &ScoreConfig::default(), 4).unwrap();
        assert!(out["a"].iter().all(|s| *s == 0.0));
    }

    #[test]
    fn monte_carlo_mean_scores_track_the_expectation() {
        // Static peer set, blocks only: each run's per-peer final score is
        // Poisson with mean share * duration / block_interval, so the sum
        // over independent runs is Poisson too and its standard error is
        // known exactly.
        let runs = 200;
        let config = ScoreConfig { w_block: 1.0, window_seconds: 60.0, ..Default::default() };
        let base = quiet_scenario();
        let windows = (base.duration_s / config.window_seconds) as usize;
        let mut observed: BTreeMap<String, f64> = BTreeMap::new();
        let mut expectation_sum: BTreeMap<String, f64> = BTreeMap::new();
        for run in 0..runs {
            let scenario = Scenario { seed: 10_000 + run, ..base.clone() };
            let (events, truth) = simulate(&scenario).unwrap();
            let (_, engine) = score_trace_final(&events, &config).unwrap();
            let expected = expected_scores(&truth, &scenario, &config, windows).unwrap();
            for (address, trajectory) in &expected {
                *observed.entry(address.clone()).or_insert(0.0) +=
                    engine.remembrance_lookup(address);
                *expectation_sum.entry(address.clone()).or_insert(0.0) +=
                    trajectory.last().unwrap();
            }
        }
        for (address, total_expected) in &expectation_sum {
            let total_observed = observed[address];
            let std_err = total_expected.sqrt();
            assert!(
                (total_observed - total_expected).abs() <= 3.0 * std_err.max(1e-3),
                "{address}: observed {total_observed} vs expected {total_expected} (se {std_err})"
            );
        }
    }

    #[test]
    fn churn_matches_the_short_lived_fraction_and_quality_coupling() {
        let scenario = Scenario { seed: 3, ..Default::default() };
        let (events, truth) = simulate(&scenario).unwrap();

        // Reconstruct session durations per address.
        let mut open: HashMap<&str, f64> = HashMap::new();
        let mut durations: Vec<(&str, f64)> = Vec::new();
        for event in &events {
            match event.payload {
                EventPayload::Connect => {
                    open.insert(&event.peer.address, event.ts);
                }
                EventPayload::Disconnect { .. } => {
                    if let Some(start) = open.remove(event.peer.address.as_str()) {
                        durations.push((&event.peer.address, event.ts - start));
                    }
                }
                _ => {}
            }
        }
        assert!(durations.len() > 80, "only {} sessions", durations.len());

        let short = durations.iter().filter(|(_, d)| *d < 1.0).count() as f64;
        let fraction = short / durations.len() as f64;
        let target = scenario.short_lived_fraction;
        assert!(
            (fraction - target).abs() <= 0.2 * target,
            "short-session fraction {fraction} vs target {target}"
        );

        // High-quality peers hold their sessions longer.
        let mut qualities: Vec<f64> = truth.peer_quality.values().copied().collect();
        qualities.sort_by(f64::total_cmp);
        let cut_low = qualities[qualities.len() / 3];
        let cut_high = qualities[2 * qualities.len() / 3];
        let median = |mut v: Vec<f64>| -> f64 {
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        let low: Vec<f64> = durations
            .iter()
            .filter(|(a, _)| truth.peer_quality[*a] <= cut_low)
            .map(|(_, d)| *d)
            .collect();
        let high: Vec<f64> = durations
            .iter()
            .filter(|(a, _)| truth.peer_quality[*a] >= cut_high)
            .map(|(_, d)| *d)
            .collect();
        assert!(!low.is_empty() && !high.is_empty());
        assert!(
            median(high.clone()) > median(low.clone()),
            "cohort medians not ordered: high {} vs low {}",
            median(high),
            median(low)
        );
    }

    #[test]
    fn bad_scenario_field_is_named() {
        let err = Scenario { block_interval_s: 0.0, ..Default::default() }.validate().unwrap_err();
        assert!(err.to_string().contains("block_interval_s"));
        let err = Scenario::from_toml_str("definitely_not_a_field = 1").unwrap_err();
        assert!(err.to_string().contains("definitely_not_a_field"));
    }

    #[test]
    fn scenario_round_trips_through_toml() {
        let scenario = Scenario { duration_s: 123.0, seed: 9, ..Default::default() };
        let text = toml::to_string(&scenario).unwrap();
        assert_eq!(Scenario::from_toml_str(&text).unwrap(), scenario);
    }
}
