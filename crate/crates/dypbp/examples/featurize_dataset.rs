//! From raw events to an encoded, model-ready dataset.
//!
//! Run: cargo run --example featurize_dataset

use dypbp::features::{encode, extract_windows, fit_encoder};
use dypbp::scoring::{ScoreConfig, FEE_SCALE_10K_SATOSHI};
use dypbp::simulator::{simulate, Scenario};
use dypbp::trace::export_peer_csv;

fn main() {
    let scenario = Scenario { duration_s: 600.0, max_concurrent_peers: 5, seed: 21, ..Default::default() };
    let (events, _) = simulate(&scenario).unwrap();

    let config = ScoreConfig {
        window_seconds: 10.0,
        fee_scale: FEE_SCALE_10K_SATOSHI,
        ..Default::default()
    };
    let samples = extract_windows(&events, &config).unwrap();
    println!("{} samples from {} events", samples.len(), events.len());

    let first = &samples[0];
    println!("\nfirst sample (peer {}, window ending {:.1}):", first.peer, first.window_end);
    for (name, value) in &first.numeric {
        println!("  {name:<26} {value}");
    }
    for (name, token) in &first.categorical {
        println!("  {name:<26} {token}");
    }
    println!("  {:<26} {}", "remembrance", first.remembrance);
    println!("  {:<26} {}", "label", first.label);

    // The encoder freezes categorical vocabularies; unseen tokens later
    // encode to all-zero blocks.
    let schema = fit_encoder(&samples).unwrap();
    let with = encode(&schema, &samples, true).unwrap();
    let without = encode(&schema, &samples, false).unwrap();
    println!(
        "\nschema: {} numeric + {} categorical features -> {} columns ({} with remembrance)",
        schema.numeric.len(),
        schema.categorical.len(),
        without.width(),
        with.width()
    );
    for (feature, vocab) in &schema.categorical {
        println!("  {feature}: {vocab:?}");
    }

    let dir = std::env::temp_dir().join("dypbp-example-peer-csv");
    let paths = export_peer_csv(&samples, &dir).unwrap();
    println!("\nwrote {} per-peer CSVs to {}", paths.len(), dir.display());
}
