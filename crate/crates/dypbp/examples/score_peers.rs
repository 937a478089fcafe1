//! Score peers by the novel blocks and transaction fees they deliver.
//!
//! Run: cargo run --example score_peers

use dypbp::scoring::{score_trace, ScoreConfig, ScoreEngine};
use dypbp::trace::{EventPayload, ObservationEvent, PeerKey};

fn ev(ts: f64, address: &str, payload: EventPayload) -> ObservationEvent {
    ObservationEvent::new(ts, PeerKey::outbound(address, 8333), payload)
}

fn main() {
    // Two peers deliver the same block; only the first one is credited.
    let config = ScoreConfig { w_block: 0.5, gamma: 1.0, window_seconds: 10.0, ..Default::default() };
    let mut engine = ScoreEngine::new(config.clone()).unwrap();

    let block = |hash: &str| EventPayload::Block { hash: hash.repeat(32), height: 840_001 };
    let tx = |hash: &str, fee| EventPayload::Tx {
        hash: hash.repeat(32),
        fee,
        size: 250,
        fee_unknown: false,
    };

    engine.observe(&ev(0.0, "10.0.0.1", EventPayload::Connect)).unwrap();
    engine.observe(&ev(0.1, "10.0.0.2", EventPayload::Connect)).unwrap();
    engine.observe(&ev(2.0, "10.0.0.1", block("aa"))).unwrap();
    engine.observe(&ev(2.3, "10.0.0.2", block("aa"))).unwrap(); // redundant
    engine.observe(&ev(4.0, "10.0.0.2", tx("bb", 800))).unwrap();
    engine.observe(&ev(5.0, "10.0.0.2", tx("bb", 800))).unwrap(); // redundant

    for address in ["10.0.0.1", "10.0.0.2"] {
        let peer = PeerKey::outbound(address, 8333);
        let (state, window) = engine.close_window(&peer, 10.0).unwrap();
        println!(
            "{address}: {} novel blocks, {} novel fee -> score {} (was {})",
            window.novel_blocks, window.novel_fee, state.score_curr, state.score_prev
        );
    }

    // The same arithmetic as a batch run over a trace file's worth of
    // events, one record per (peer, window).
    let events = vec![
        ev(0.0, "10.0.0.9", EventPayload::Connect),
        ev(3.0, "10.0.0.9", block("cc")),
        ev(14.0, "10.0.0.9", tx("dd", 1200)),
        ev(25.0, "10.0.0.9", EventPayload::Disconnect { reason: None }),
    ];
    println!("\nbatch records (window_seconds = {}):", config.window_seconds);
    for record in score_trace(&events, &config).unwrap() {
        println!(
            "  [{:>5.1}, {:>5.1}) blocks={} fee={:<6} score {} -> {}{}",
            record.window_start,
            record.window_end,
            record.novel_blocks,
            record.novel_fee,
            record.score_before,
            record.score_after,
            if record.partial { "  (partial)" } else { "" }
        );
    }
}
