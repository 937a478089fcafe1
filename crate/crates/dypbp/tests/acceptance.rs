//! Acceptance suite. One test per criterion; each prints a PASS line with
//! the measured values (run with `--nocapture` to see them).
//!
//! The scoring criteria compare the engine against a brute-force oracle in
//! this file that shares no code with the implementation: it re-derives
//! sessions, window boundaries, novelty, and the recurrence directly from
//! the raw events.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

use dypbp::features::{encode, extract_windows, fit_encoder, mutual_information, Dataset, FeatureSchema};
use dypbp::models::{
    evaluate, fit_forest, fit_knn, fit_linear, predict, truncate_training, ForestParams,
};
use dypbp::pipeline::split_samples;
use dypbp::scoring::{score_trace, score_trace_final, ScoreConfig, WindowRecord, FEE_SCALE_10K_SATOSHI};
use dypbp::sensor::wire::{checksum, encode_message, DecodeEvent, MessageDecoder, MAINNET_MAGIC};
use dypbp::simulator::{simulate, Scenario};
use dypbp::trace::{validate_trace, EventKind, EventPayload, ObservationEvent, PeerKey, quantize_ts};

fn pass(criterion: u32, name: &str, detail: &str) {
    println!("criterion {criterion} ({name}): PASS  [{detail}]");
}

// ---------------------------------------------------------------------------
// Random trace generation for the oracle-equivalence and property criteria.

mod synth {
    use super::*;

    pub struct Synth {
        pub events: Vec<ObservationEvent>,
        pub config: ScoreConfig,
    }

    struct Draft {
        ts: f64,
        rank: u8,
        seq: usize,
        event: ObservationEvent,
    }

    fn push(drafts: &mut Vec<Draft>, ts: f64, rank: u8, address: &str, payload: EventPayload) {
        let seq = drafts.len();
        drafts.push(Draft {
            ts: quantize_ts(ts),
            rank,
            seq,
            event: ObservationEvent::new(
                quantize_ts(ts),
                PeerKey::outbound(address, 8333),
                payload,
            ),
        });
    }

    /// A random well-formed trace: up to `max_peers` peers, several
    /// sessions each (reconnects), shared hash pools so novelty contention
    /// happens, and a fraction of sessions left open at trace end.
    pub fn random_trace(seed: u64, max_peers: usize, max_events_hint: usize) -> Synth {
        let mut rng = ChaCha12Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(17));
        let n_peers = rng.gen_range(1..=max_peers);
        let horizon = rng.gen_range(100.0..400.0f64);
        let window_seconds = *[1.0, 2.0, 5.0, 9.0].choose(&mut rng).unwrap();
        let per_session_events = (max_events_hint / (n_peers * 2 + 1)).clamp(2, 40);

        let block_pool: Vec<String> = (0..24).map(|i| format!("{i:064x}")).collect();
        let tx_pool: Vec<String> = (0..64).map(|i| format!("{:064x}", 1000 + i)).collect();

        let mut drafts = Vec::new();
        for p in 0..n_peers {
            let address = format!("10.9.{}.{}", p / 250, p % 250 + 1);
            let n_sessions = rng.gen_range(1..=3);
            let mut t = rng.gen_range(0.0..horizon * 0.2);
            for s in 0..n_sessions {
                if t >= horizon - 1.0 {
                    break;
                }
                let start = t;
                let duration = rng.gen_range(0.5..horizon * 0.4);
                let end = (start + duration).min(horizon);
                push(&mut drafts, start, 0, &address, EventPayload::Connect);

                for _ in 0..rng.gen_range(0..=per_session_events) {
                    let ts = rng.gen_range(start + 0.001..end.max(start + 0.002));
                    let payload = match rng.gen_range(0..10) {
                        0..=3 => EventPayload::Block {
                            hash: block_pool.choose(&mut rng).unwrap().clone(),
                            height: rng.gen_range(1..500),
                        },
                        4..=7 => EventPayload::Tx {
                            hash: tx_pool.choose(&mut rng).unwrap().clone(),
                            fee: rng.gen_range(0..5_000),
                            size: rng.gen_range(100..900),
                            fee_unknown: false,
                        },
                        8 => EventPayload::PingRtt { rtt_ms: rng.gen_range(1.0..400.0) },
                        _ => EventPayload::Addr { count: rng.gen_range(0..20) },
                    };
                    push(&mut drafts, ts, 1, &address, payload);
                }

                // Leave the last session open at trace end now and then to
                // exercise the flush path.
                let leave_open = s == n_sessions - 1 && rng.gen_bool(0.3);
                if !leave_open {
                    push(&mut drafts, end, 2, &address, EventPayload::Disconnect { reason: None });
                }
                t = end + rng.gen_range(0.5..horizon * 0.2);
            }
        }

        drafts.sort_by(|a, b| {
            a.ts.total_cmp(&b.ts).then(a.rank.cmp(&b.rank)).then(a.seq.cmp(&b.seq))
        });
        let events: Vec<ObservationEvent> = drafts.into_iter().map(|d| d.event).collect();

        let config = ScoreConfig {
            gamma: *[1.0, 0.9, 0.5].choose(&mut rng).unwrap(),
            w_block: *[0.0, 0.25, 0.5, 0.75, 1.0].choose(&mut rng).unwrap(),
            fee_scale: *[1.0, FEE_SCALE_10K_SATOSHI].choose(&mut rng).unwrap(),
            window_seconds,
            ..Default::default()
        };
        Synth { events, config }
    }
}

// ---------------------------------------------------------------------------
// Brute-force scoring oracle, independent of the engine.

mod oracle {
    use super::*;

    #[derive(Debug, Clone, PartialEq)]
    pub struct Record {
        pub identity: String,
        pub window_start: f64,
        pub window_end: f64,
        pub score_before: f64,
        pub score_after: f64,
        pub novel_blocks: u64,
        pub novel_fee: f64,
        pub partial: bool,
    }

    struct Session {
        start: f64,
        /// Disconnect timestamp, or the trace-end flush point.
        end: f64,
        /// Indices into the event list, in trace order.
        deliveries: Vec<usize>,
    }

    /// Recomputes every per-window record from the raw events: novelty by
    /// first occurrence in trace order, windows by walking boundaries from
    /// each session start, scores by folding the recurrence scalar by
    /// scalar per identity.
    pub fn score(events: &[ObservationEvent], config: &ScoreConfig) -> Vec<Record> {
        let Some(last) = events.last() else {
            return Vec::new();
        };
        let trace_end = last.ts;

        // First-occurrence flags, global across peers.
        let mut seen: HashSet<&str> = HashSet::new();
        let mut novel = vec![false; events.len()];
        for (i, event) in events.iter().enumerate() {
            let hash = match &event.payload {
                EventPayload::Block { hash, .. } => hash,
                EventPayload::Tx { hash, .. } => hash,
                _ => continue,
            };
            novel[i] = seen.insert(hash);
        }

        // Sessions per identity, in trace order.
        let mut sessions: BTreeMap<String, Vec<Session>> = BTreeMap::new();
        for (i, event) in events.iter().enumerate() {
            let identity = config.identity_of(&event.peer);
            match event.kind() {
                EventKind::Connect => {
                    sessions.entry(identity).or_default().push(Session {
                        start: event.ts,
                        end: trace_end,
                        deliveries: Vec::new(),
                    });
                }
                EventKind::Disconnect => {
                    let open = sessions.get_mut(&identity).unwrap().last_mut().unwrap();
                    open.end = event.ts;
                }
                EventKind::Block | EventKind::Tx => {
                    let open = sessions.get_mut(&identity).unwrap().last_mut().unwrap();
                    open.deliveries.push(i);
                }
                _ => {}
            }
        }

        let mut records = Vec::new();
        for (identity, peer_sessions) in sessions {
            let mut score = 0.0f64;
            for session in peer_sessions {
                let mut window_start = session.start;
                let mut boundary = session.start + config.window_seconds;
                let mut blocks = 0u64;
                let mut fee = 0.0f64;
                let close = |start: &mut f64,
                                 end: f64,
                                 blocks: &mut u64,
                                 fee: &mut f64,
                                 score: &mut f64,
                                 partial: bool,
                                 records: &mut Vec<Record>| {
                    let increment = config.w_block * *blocks as f64 + config.w_tx() * *fee;
                    let updated = match config.decay_mode {
                        dypbp::scoring::DecayMode::Increment => *score + config.gamma * increment,
                        dypbp::scoring::DecayMode::Prior => config.gamma * *score + increment,
                    };
                    records.push(Record {
                        identity: identity.clone(),
                        window_start: *start,
                        window_end: end,
                        score_before: *score,
                        score_after: updated,
                        novel_blocks: *blocks,
                        novel_fee: *fee,
                        partial,
                    });
                    *score = updated;
                    *start = end;
                    *blocks = 0;
                    *fee = 0.0;
                };

                for &index in &session.deliveries {
                    let ts = events[index].ts;
                    while boundary <= ts {
                        close(
                            &mut window_start,
                            boundary,
                            &mut blocks,
                            &mut fee,
                            &mut score,
                            false,
                            &mut records,
                        );
                        boundary += config.window_seconds;
                    }
                    if novel[index] {
                        match &events[index].payload {
                            EventPayload::Block { .. } => blocks += 1,
                            EventPayload::Tx { fee: sat, .. } => {
                                fee += *sat as f64 / config.fee_scale;
                            }
                            _ => unreachable!(),
                        }
                    }
                }
                while boundary <= session.end {
                    close(
                        &mut window_start,
                        boundary,
                        &mut blocks,
                        &mut fee,
                        &mut score,
                        false,
                        &mut records,
                    );
                    boundary += config.window_seconds;
                }
                if session.end > window_start || blocks > 0 || fee != 0.0 {
                    close(
                        &mut window_start,
                        session.end,
                        &mut blocks,
                        &mut fee,
                        &mut score,
                        true,
                        &mut records,
                    );
                }
            }
        }
        records
    }
}

fn close_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn sorted_records(mut records: Vec<WindowRecord>) -> Vec<WindowRecord> {
    records.sort_by(|a, b| {
        a.identity
            .cmp(&b.identity)
            .then(a.window_end.total_cmp(&b.window_end))
            .then(a.window_start.total_cmp(&b.window_start))
    });
    records
}

#[test]
fn criterion_1_scoring_oracle_equivalence() {
    let mut windows_checked = 0usize;
    for seed in 0..500u64 {
        let synth = synth::random_trace(seed, 50, 5_000);
        assert!(synth.events.len() <= 5_000);
        assert!(validate_trace(&synth.events).is_clean());

        let engine = sorted_records(score_trace(&synth.events, &synth.config).unwrap());
        let reference = oracle::score(&synth.events, &synth.config);
        assert_eq!(
            engine.len(),
            reference.len(),
            "window count mismatch on seed {seed}: engine {} vs oracle {}",
            engine.len(),
            reference.len()
        );
        for (e, o) in engine.iter().zip(&reference) {
            assert_eq!(e.identity, o.identity, "seed {seed}");
            assert_eq!(e.partial, o.partial, "seed {seed} window {:?}", (o.window_start, o.window_end));
            assert_eq!(e.novel_blocks, o.novel_blocks, "seed {seed}");
            assert!(close_rel(e.window_start, o.window_start, 1e-12), "seed {seed}");
            assert!(close_rel(e.window_end, o.window_end, 1e-12), "seed {seed}");
            assert!(
                close_rel(e.novel_fee, o.novel_fee, 1e-12),
                "seed {seed}: fee {} vs {}",
                e.novel_fee,
                o.novel_fee
            );
            assert!(
                close_rel(e.score_before, o.score_before, 1e-12),
                "seed {seed}: before {} vs {}",
                e.score_before,
                o.score_before
            );
            assert!(
                close_rel(e.score_after, o.score_after, 1e-12),
                "seed {seed}: after {} vs {}",
                e.score_after,
                o.score_after
            );
        }
        windows_checked += engine.len();
    }
    pass(1, "scoring oracle equivalence", &format!("500 traces, {windows_checked} windows"));
}

#[test]
fn criterion_2_remembrance_continuity() {
    let mut split_count = 0usize;
    for seed in 0..100u64 {
        let synth = synth::random_trace(1_000 + seed, 20, 2_000);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);

        // Pick a random session of a random peer and a split point strictly
        // inside it that collides with no event timestamp.
        let mut sessions: Vec<(String, f64, f64)> = Vec::new();
        let mut open: HashMap<String, f64> = HashMap::new();
        for event in &synth.events {
            let identity = synth.config.identity_of(&event.peer);
            match event.kind() {
                EventKind::Connect => {
                    open.insert(identity, event.ts);
                }
                EventKind::Disconnect => {
                    if let Some(start) = open.remove(&identity) {
                        if event.ts - start > 0.01 {
                            sessions.push((identity, start, event.ts));
                        }
                    }
                }
                _ => {}
            }
        }
        let Some((identity, start, end)) = sessions.choose(&mut rng).cloned() else {
            continue;
        };
        let ts_taken: HashSet<u64> = synth.events.iter().map(|e| e.ts.to_bits()).collect();
        let mut split_ts = quantize_ts(start + (end - start) * rng.gen_range(0.25..0.75));
        while ts_taken.contains(&split_ts.to_bits()) {
            split_ts = quantize_ts(split_ts + 1e-3);
        }
        if split_ts <= start || split_ts >= end {
            continue;
        }

        let mut split_events = synth.events.clone();
        let at = split_events.partition_point(|e| e.ts < split_ts);
        let peer = PeerKey::outbound(&identity, 8333);
        split_events.insert(
            at,
            ObservationEvent::new(split_ts, peer.clone(), EventPayload::Disconnect { reason: None }),
        );
        split_events
            .insert(at + 1, ObservationEvent::new(split_ts, peer, EventPayload::Connect));
        assert!(validate_trace(&split_events).is_clean());

        let (base_records, base_engine) = score_trace_final(&synth.events, &synth.config).unwrap();
        let (split_records, split_engine) =
            score_trace_final(&split_events, &synth.config).unwrap();

        // Other peers are untouched, bit for bit.
        let others = |records: &[WindowRecord]| -> Vec<WindowRecord> {
            sorted_records(records.iter().filter(|r| r.identity != identity).cloned().collect())
        };
        assert_eq!(others(&base_records), others(&split_records), "seed {seed}");

        // The split peer's checkpoint scores at every original disconnect
        // time are preserved, as is its final remembered score.
        let checkpoints = |records: &[WindowRecord], at: f64| -> Option<f64> {
            records
                .iter()
                .rev()
                .find(|r| r.identity == identity && r.window_end <= at)
                .map(|r| r.score_after)
        };
        for (_, s_start, s_end) in sessions.iter().filter(|(id, _, _)| *id == identity) {
            if *s_end <= *s_start {
                continue;
            }
            let base = checkpoints(&base_records, *s_end);
            let split = checkpoints(&split_records, *s_end);
            match (base, split) {
                (Some(a), Some(b)) => assert!(
                    (a - b).abs() <= 1e-12 * a.abs().max(1.0),
                    "seed {seed}: checkpoint at {s_end}: {a} vs {b}"
                ),
                (None, None) => {}
                other => panic!("seed {seed}: checkpoint presence diverged: {other:?}"),
            }
        }
        let a = base_engine.remembrance_lookup(&identity);
        let b = split_engine.remembrance_lookup(&identity);
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "seed {seed}: final {a} vs {b}");
        split_count += 1;
    }
    assert!(split_count >= 80, "only {split_count} traces produced a splittable session");
    pass(2, "remembrance continuity", &format!("{split_count} session splits"));
}

// Pipeline configuration pinned for the model criteria: 10 s windows keep
// 6 simulated hours at a tractable sample count, and the documented
// 10^4-satoshi fee preset keeps label magnitudes in a range where the
// 1e-8 exactness threshold is meaningful rather than dominated by f64
// representation error on 1e7-scale labels.
fn model_config(w_block: f64) -> ScoreConfig {
    ScoreConfig {
        w_block,
        window_seconds: 10.0,
        fee_scale: FEE_SCALE_10K_SATOSHI,
        ..Default::default()
    }
}

struct EncodedSplit {
    train: Dataset,
    test: Dataset,
}

fn encoded_split(
    events: &[ObservationEvent],
    config: &ScoreConfig,
    remembrance: bool,
) -> EncodedSplit {
    let samples = extract_windows(events, config).unwrap();
    let (train_samples, test_samples) = split_samples(&samples, 0.8).unwrap();
    let schema: FeatureSchema = fit_encoder(train_samples).unwrap();
    EncodedSplit {
        train: encode(&schema, train_samples, remembrance).unwrap(),
        test: encode(&schema, test_samples, remembrance).unwrap(),
    }
}

fn linear_test_mae(events: &[ObservationEvent], config: &ScoreConfig, remembrance: bool) -> f64 {
    let split = encoded_split(events, config, remembrance);
    let model = fit_linear(&split.train, 1e-8).unwrap();
    let predictions = predict(&model, &split.test).unwrap();
    evaluate(&predictions, &split.test.labels).unwrap().mae
}

#[test]
fn criterion_3_ols_exactness_with_remembrance() {
    let (events, _) = simulate(&Scenario::default()).unwrap();
    let mut detail = String::new();
    for w_block in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let config = model_config(w_block);
        let with = linear_test_mae(&events, &config, true);
        let without = linear_test_mae(&events, &config, false);

        // Scores vary on the default scenario at every weight.
        let samples = extract_windows(&events, &config).unwrap();
        let labels: Vec<f64> = samples.iter().map(|s| s.label).collect();
        let spread = labels.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - labels.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread > 0.0, "labels are constant at w_block {w_block}");

        assert!(with < 1e-8, "w_block {w_block}: MAE with remembrance {with} >= 1e-8");
        assert!(
            without >= 1e2 * with,
            "w_block {w_block}: without {without} not 100x larger than with {with}"
        );
        detail.push_str(&format!("w={w_block}: {with:.2e} vs {without:.2e}; "));
    }
    pass(3, "linear exactness with remembrance", detail.trim_end_matches("; "));
}

#[test]
fn criterion_4_knn_remembrance_insensitivity() {
    let (events, _) = simulate(&Scenario::default()).unwrap();
    let config = model_config(0.5);

    let knn_mae = |remembrance: bool| -> f64 {
        let split = encoded_split(&events, &config, remembrance);
        let model = fit_knn(&split.train, 5, false).unwrap();
        let predictions = predict(&model, &split.test).unwrap();
        evaluate(&predictions, &split.test.labels).unwrap().mae
    };
    let knn_with = knn_mae(true);
    let knn_without = knn_mae(false);
    let knn_shift = (knn_with - knn_without).abs() / knn_without;
    assert!(
        knn_shift < 0.2,
        "knn relative MAE shift {knn_shift} >= 0.2 (with {knn_with}, without {knn_without})"
    );

    let linear_with = linear_test_mae(&events, &config, true);
    let linear_without = linear_test_mae(&events, &config, false);
    let linear_gain = linear_without / linear_with;
    assert!(linear_gain > 1e2, "linear improvement {linear_gain} <= 100x");

    pass(
        4,
        "knn insensitivity to remembrance",
        &format!("knn shift {knn_shift:.3}, linear gain {linear_gain:.2e}"),
    );
}

#[test]
fn criterion_5_training_duration_trend() {
    // Absolute noise floor: differences below this are f64 jitter at the
    // exactness floor, not a learning-curve inversion.
    const NOISE_FLOOR: f64 = 1e-9;
    let durations = [40.0, 200.0, 1_000.0, 5_000.0, 25_000.0, 125_000.0];
    let mut inversions = 0usize;
    let mut pairs = 0usize;

    for seed in 42..47u64 {
        let scenario = Scenario { seed, ..Default::default() };
        let (events, _) = simulate(&scenario).unwrap();
        let config = model_config(0.5);
        let split = encoded_split(&events, &config, true);

        let maes: Vec<f64> = durations
            .iter()
            .map(|&duration| {
                let train = truncate_training(&split.train, duration);
                assert!(!train.is_empty(), "seed {seed}: empty prefix at {duration}s");
                let model = fit_linear(&train, 1e-8).unwrap();
                let predictions = predict(&model, &split.test).unwrap();
                evaluate(&predictions, &split.test.labels).unwrap().mae
            })
            .collect();

        assert!(
            maes[durations.len() - 1] <= maes[0] + NOISE_FLOOR,
            "seed {seed}: MAE grew from {} (40 s) to {} (125000 s)",
            maes[0],
            maes[durations.len() - 1]
        );
        for pair in maes.windows(2) {
            pairs += 1;
            if pair[1] > pair[0] + NOISE_FLOOR {
                inversions += 1;
            }
        }
    }
    assert!(
        inversions as f64 <= 0.05 * pairs as f64,
        "{inversions} of {pairs} adjacent duration pairs inverted"
    );
    pass(
        5,
        "training duration trend",
        &format!("{inversions} inversions over {pairs} adjacent pairs, 5 seeds"),
    );
}

#[test]
fn criterion_6_mutual_information_sanity() {
    use rand_distr::{Distribution, Normal};
    let n = 10_000;
    let mut worst_noise = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = ChaCha12Rng::seed_from_u64(200 + seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let labels: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let noise: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let correlated: Vec<f64> =
            labels.iter().map(|l| l * 0.8 + 0.6 * normal.sample(&mut rng)).collect();

        let names = ["correlated", "label_copy", "noise"];
        let rows: Vec<Vec<f64>> =
            (0..n).map(|i| vec![correlated[i], labels[i], noise[i]]).collect();
        let dataset = Dataset {
            schema: FeatureSchema {
                numeric: names.iter().map(|s| s.to_string()).collect(),
                categorical: Vec::new(),
            },
            column_names: names.iter().map(|s| s.to_string()).collect(),
            rows,
            labels: labels.clone(),
            window_ends: (0..n).map(|i| i as f64).collect(),
            peers: vec!["p".to_owned(); n],
            remembrance_included: false,
        };

        let ranking = mutual_information(&dataset, 16).unwrap();
        assert_eq!(ranking.entries[0].0, "label_copy", "seed {seed}: {:?}", ranking.entries);
        let noise_mi =
            ranking.entries.iter().find(|(name, _)| name == "noise").map(|(_, mi)| *mi).unwrap();
        assert!(noise_mi < 0.05, "seed {seed}: noise MI {noise_mi} >= 0.05 bits");
        worst_noise = worst_noise.max(noise_mi);
    }
    pass(6, "mutual information sanity", &format!("20 seeds, worst noise MI {worst_noise:.4} bits"));
}

#[test]
fn criterion_7_simulator_calibration() {
    let scenario = Scenario::default();
    let (events, _) = simulate(&scenario).unwrap();
    assert!(validate_trace(&events).is_clean());

    let mut first_block_delivery: BTreeMap<&str, f64> = BTreeMap::new();
    let mut tx_hashes: HashSet<&str> = HashSet::new();
    let mut open = 0i64;
    let mut max_open = 0i64;
    for event in &events {
        match &event.payload {
            EventPayload::Connect => {
                open += 1;
                max_open = max_open.max(open);
            }
            EventPayload::Disconnect { .. } => open -= 1,
            EventPayload::Block { hash, .. } => {
                first_block_delivery.entry(hash).or_insert(event.ts);
            }
            EventPayload::Tx { hash, .. } => {
                tx_hashes.insert(hash);
            }
            _ => {}
        }
    }

    let block_times: Vec<f64> = first_block_delivery.values().copied().collect();
    let mut sorted = block_times.clone();
    sorted.sort_by(f64::total_cmp);
    assert!(sorted.len() >= 2, "too few blocks");
    let mean_interval = (sorted[sorted.len() - 1] - sorted[0]) / (sorted.len() - 1) as f64;
    assert!(
        (510.0..=690.0).contains(&mean_interval),
        "mean block inter-arrival {mean_interval} outside [510, 690]"
    );

    let tx_rate = tx_hashes.len() as f64 / scenario.duration_s;
    assert!((3.0..=7.0).contains(&tx_rate), "tx rate {tx_rate} outside [3, 7]/s");

    assert!(max_open as usize <= scenario.max_concurrent_peers, "{max_open} concurrent peers");

    pass(
        7,
        "simulator calibration",
        &format!(
            "{} blocks, mean interval {mean_interval:.1} s, tx rate {tx_rate:.2}/s, max {max_open} peers",
            sorted.len()
        ),
    );
}

#[test]
fn criterion_8_forest_determinism_and_bounds() {
    let mut predictions_checked = 0usize;
    for seed in 0..100u64 {
        let synth = synth::random_trace(7_000 + seed, 10, 600);
        let samples = extract_windows(&synth.events, &synth.config).unwrap();
        if samples.len() < 8 {
            continue;
        }
        let schema = fit_encoder(&samples).unwrap();
        let dataset = encode(&schema, &samples, true).unwrap();

        let lo = dataset.labels.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = dataset.labels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        let params = ForestParams { seed, ..Default::default() };
        let first = predict(&fit_forest(&dataset, &params).unwrap(), &dataset).unwrap();
        let second = predict(&fit_forest(&dataset, &params).unwrap(), &dataset).unwrap();
        assert_eq!(first, second, "seed {seed}: same-seed refit changed predictions");
        for p in &first {
            assert!(*p >= lo && *p <= hi, "seed {seed}: prediction {p} outside [{lo}, {hi}]");
        }
        predictions_checked += first.len();
    }
    assert!(predictions_checked > 1_000);
    pass(8, "forest determinism and bounds", &format!("{predictions_checked} predictions"));
}

#[test]
fn criterion_9_wire_codec_round_trip() {
    // Independent checksum derivation for the empty payload.
    let independent = Sha256::digest(Sha256::digest([]));
    assert_eq!(checksum(&[]), independent[..4]);
    assert_eq!(checksum(&[]), [0x5d, 0xf6, 0xe0, 0xe2]);

    let commands = ["ping", "pong", "inv", "addr", "feefilter", "headers", "verack", "version"];
    let mut rng = ChaCha12Rng::seed_from_u64(99);
    let mut decoder = MessageDecoder::new(MAINNET_MAGIC);
    for i in 0..10_000 {
        let command = commands[rng.gen_range(0..commands.len())];
        let payload: Vec<u8> = (0..rng.gen_range(0..2_000)).map(|_| rng.gen()).collect();
        let frame = encode_message(command, &payload, MAINNET_MAGIC).unwrap();

        // Feed in randomly sized pieces to exercise the incremental path.
        let mut fed = 0usize;
        let mut decoded = None;
        while fed < frame.len() {
            let chunk = rng.gen_range(1..=frame.len() - fed);
            decoder.feed(&frame[fed..fed + chunk]);
            fed += chunk;
            match decoder.poll() {
                DecodeEvent::Message(m) => decoded = Some(m),
                DecodeEvent::NeedMoreBytes => {}
                DecodeEvent::Corrupt { reason, .. } => panic!("iteration {i}: corrupt: {reason}"),
            }
        }
        let message = match decoded {
            Some(m) => m,
            None => match decoder.poll() {
                DecodeEvent::Message(m) => m,
                other => panic!("iteration {i}: no message, got {other:?}"),
            },
        };
        assert_eq!(message.command, command);
        assert_eq!(message.payload, payload);
    }
    pass(9, "wire codec round trip", "10000 random frames, empty-payload checksum verified");
}
