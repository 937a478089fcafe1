//! Read a trace file back and check the format and session rules.
//!
//! Run: cargo run --example validate_trace

use dypbp::trace::{
    read_events, validate_trace, write_events, EventPayload, ObservationEvent, PeerKey,
};

fn main() {
    let dir = std::env::temp_dir();
    let path = dir.join("dypbp-example-validate.log");

    let peer = PeerKey::outbound("203.0.113.7", 8333);
    let events = vec![
        ObservationEvent::new(100.0, peer.clone(), EventPayload::Connect),
        ObservationEvent::new(
            101.5,
            peer.clone(),
            EventPayload::Block { hash: "ab".repeat(32), height: 840_001 },
        ),
        ObservationEvent::new(103.0, peer.clone(), EventPayload::Disconnect { reason: None }),
    ];
    write_events(&path, &events).unwrap();

    // Sneak in a line from some future trace version plus plain garbage;
    // the lenient reader keeps going and reports what it skipped.
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("ts=104.000000 peer=203.0.113.7:8333 dir=out kind=SHINY_NEW_KIND x=1\n");
    text.push_str("complete nonsense\n");
    std::fs::write(&path, text).unwrap();

    let outcome = read_events(&path).unwrap();
    println!("parsed {} events, skipped {} lines:", outcome.events.len(), outcome.warnings.len());
    for warning in &outcome.warnings {
        println!("  line {}: {}", warning.line, warning.reason);
    }

    let report = validate_trace(&outcome.events);
    println!(
        "\n{} events / {} peers / {} sessions, violations: {}",
        report.event_count, report.peer_count, report.session_count, report.violations.len()
    );

    // A block with no open session is the classic violation.
    let orphan = vec![ObservationEvent::new(
        1.0,
        peer,
        EventPayload::Block { hash: "cd".repeat(32), height: 1 },
    )];
    for violation in validate_trace(&orphan).violations {
        println!("orphan trace -> line {}: {} ({})", violation.line, violation.rule, violation.description);
    }
}
