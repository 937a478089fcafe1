//! Run a small experiment grid and print the plot-ready report.
//!
//! Run: cargo run --release --example sweep_grid

use dypbp::models::{ForestParams, ModelKind};
use dypbp::pipeline::{run_sweep, sweep_csv, sweep_summary, EvalOptions, ModelHyperparams, SweepGrid};
use dypbp::scoring::{ScoreConfig, FEE_SCALE_10K_SATOSHI};
use dypbp::simulator::{simulate, Scenario};

fn main() {
    let scenario = Scenario { duration_s: 1800.0, seed: 9, ..Default::default() };
    let (events, _) = simulate(&scenario).unwrap();
    let config = ScoreConfig {
        window_seconds: 10.0,
        fee_scale: FEE_SCALE_10K_SATOSHI,
        ..Default::default()
    };

    let grid = SweepGrid {
        w_block: vec![0.0, 0.5, 1.0],
        remembrance: vec![false, true],
        models: vec![ModelKind::Linear, ModelKind::Forest],
        train_durations_s: vec![200.0, 1_440.0],
    };
    let options = EvalOptions {
        seed: 1,
        params: ModelHyperparams {
            forest: ForestParams { trees: 40, ..Default::default() },
            ..Default::default()
        },
        ..Default::default()
    };

    let rows = run_sweep(&events, &config, &grid, &options).unwrap();
    print!("{}", sweep_csv(&rows));
    println!();
    print!("{}", sweep_summary(&rows));
}
