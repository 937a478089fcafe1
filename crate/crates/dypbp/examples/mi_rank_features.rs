//! Rank features by mutual information with the score label.
//!
//! Run: cargo run --example mi_rank_features

use dypbp::features::{select_top_k, ExtractOptions};
use dypbp::pipeline::rank_features;
use dypbp::scoring::{ScoreConfig, FEE_SCALE_10K_SATOSHI};
use dypbp::simulator::{simulate, Scenario};

fn main() {
    let scenario = Scenario { duration_s: 3600.0, seed: 5, ..Default::default() };
    let (events, _) = simulate(&scenario).unwrap();

    let config = ScoreConfig {
        window_seconds: 10.0,
        fee_scale: FEE_SCALE_10K_SATOSHI,
        ..Default::default()
    };
    let ranking =
        rank_features(&events, &config, &ExtractOptions::default(), true, 16).unwrap();

    println!("top-10 of {} encoded columns by mutual information:\n", ranking.len());
    println!("{:<5} {:<34} mi_bits", "rank", "feature");
    for (i, (name, mi)) in ranking.entries.iter().take(10).enumerate() {
        println!("{:<5} {name:<34} {mi:.4}", i + 1);
    }

    let top = select_top_k(&ranking, 10).unwrap();
    println!("\nselected feature set: {top:?}");
    // The remembrance column dominates: the label is one increment away
    // from it by construction.
}
