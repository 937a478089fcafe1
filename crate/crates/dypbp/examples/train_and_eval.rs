//! Compare the three regressors with and without the remembrance feature.
//!
//! Linear regression collapses to near-machine-precision errors once the
//! remembrance column is present (the label is affine in it), random
//! forests improve by a smaller factor, and unstandardized KNN barely
//! moves: its distances are dominated by large-scale raw features.
//!
//! Run: cargo run --release --example train_and_eval

use dypbp::models::ModelKind;
use dypbp::pipeline::{eval_single, EvalOptions};
use dypbp::scoring::{ScoreConfig, FEE_SCALE_10K_SATOSHI};
use dypbp::simulator::{simulate, Scenario};

fn main() {
    // One simulated hour keeps every model comfortable in a debug build.
    let scenario = Scenario { duration_s: 3600.0, seed: 42, ..Default::default() };
    let (events, _) = simulate(&scenario).unwrap();
    let config = ScoreConfig {
        w_block: 0.5,
        window_seconds: 10.0,
        fee_scale: FEE_SCALE_10K_SATOSHI,
        ..Default::default()
    };

    println!("{:<8} {:>14} {:>14} {:>12}", "model", "mae_with", "mae_without", "ratio");
    for kind in [ModelKind::Linear, ModelKind::Forest, ModelKind::Knn] {
        let mae = |remembrance: bool| -> f64 {
            let options = EvalOptions { remembrance, ..Default::default() };
            eval_single(&events, &config, kind, &options).unwrap().report.mae
        };
        let with = mae(true);
        let without = mae(false);
        println!("{kind:<8} {with:>14.3e} {without:>14.3e} {:>12.2e}", without / with);
    }
}
