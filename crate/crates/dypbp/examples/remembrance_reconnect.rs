//! Scores survive disconnection: a reconnecting peer resumes from its
//! checkpointed score instead of zero.
//!
//! Run: cargo run --example remembrance_reconnect

use dypbp::scoring::{score_trace, IdentityMode, ScoreConfig};
use dypbp::trace::{Direction, EventPayload, ObservationEvent, PeerKey};

fn main() {
    let block = |id: u64| EventPayload::Block { hash: format!("{id:064x}"), height: id };

    // One peer, three sessions. It reconnects from a different ephemeral
    // port each time, as real inbound peers do.
    let mut events = Vec::new();
    for (session, port) in [50_001u16, 50_002, 50_003].into_iter().enumerate() {
        let base = session as f64 * 100.0;
        let peer = PeerKey::new("198.51.100.4", port, Direction::Inbound);
        events.push(ObservationEvent::new(base, peer.clone(), EventPayload::Connect));
        events.push(ObservationEvent::new(base + 5.0, peer.clone(), block(session as u64 + 1)));
        events.push(ObservationEvent::new(
            base + 30.0,
            peer,
            EventPayload::Disconnect { reason: None },
        ));
    }

    for identity_mode in [IdentityMode::AddressOnly, IdentityMode::AddressAndPort] {
        let config = ScoreConfig {
            w_block: 1.0,
            window_seconds: 30.0,
            identity_mode,
            ..Default::default()
        };
        println!("identity mode {identity_mode:?}:");
        for record in score_trace(&events, &config).unwrap() {
            println!(
                "  {} window ending {:>5.0}: resumes at {}, ends at {}",
                record.identity, record.window_end, record.score_before, record.score_after
            );
        }
        println!();
    }
    // Under address_only the score climbs 1, 2, 3 across sessions; under
    // address_and_port every new port starts over at zero.
}
