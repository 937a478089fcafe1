//! Generate a synthetic trace with known ground truth.
//!
//! Run: cargo run --example simulate_trace

use dypbp::simulator::{simulate, Scenario};
use dypbp::trace::{validate_trace, write_events};

fn main() {
    // A short, desk-scale variant of the default scenario: 20 simulated
    // minutes, 6 connection slots, Mainnet-shaped block/tx clocks.
    let scenario = Scenario {
        duration_s: 1200.0,
        max_concurrent_peers: 6,
        seed: 7,
        ..Default::default()
    };

    let (events, truth) = simulate(&scenario).unwrap();
    let report = validate_trace(&events);
    println!(
        "simulated {} events, {} peers, {} sessions ({} violations)",
        report.event_count, report.peer_count, report.session_count, report.violations.len()
    );

    // Per-peer quality weights are the ground truth the scoring pipeline
    // is supposed to recover: higher weight, more first deliveries.
    let mut by_quality: Vec<(&String, &f64)> = truth.peer_quality.iter().collect();
    by_quality.sort_by(|a, b| b.1.total_cmp(a.1));
    println!("\n{:<18} quality  first deliveries", "peer");
    for (address, quality) in by_quality.iter().take(8) {
        let firsts =
            truth.first_deliveries.values().filter(|(a, _)| a == *address).count();
        println!("{address:<18} {quality:<8.3} {firsts}");
    }

    let path = std::env::temp_dir().join("dypbp-example-trace.log");
    write_events(&path, &events).unwrap();
    println!("\nwrote the trace to {}", path.display());
}
