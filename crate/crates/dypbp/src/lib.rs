//! Peer beneficialness scoring and prediction for Bitcoin-style P2P
//! telemetry.
//!
//! The crate covers the full pipeline: sensing (or simulating) per-peer
//! networking behavior, scoring peers by the previously unseen blocks and
//! transaction fees they deliver (with remembrance across reconnections),
//! extracting and encoding behavioral features, and training and evaluating
//! regression models that predict the score.
//!
//! Start from the runnable examples (`cargo run --example <name>`) or the
//! `dypbp` binary, which exposes the same functionality as subcommands.

pub mod features;
pub mod models;
pub mod pipeline;
pub mod scoring;
pub mod seed;
pub mod sensor;
pub mod simulator;
pub mod trace;
