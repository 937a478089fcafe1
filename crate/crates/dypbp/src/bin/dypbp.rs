//! Command-line front end; all logic lives in the library.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 internal.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dypbp::features::ExtractOptions;
use dypbp::models::{ForestParams, KnnParams, LinearParams, ModelKind};
use dypbp::pipeline::{
    self, EvalOptions, ModelHyperparams, PipelineError, SweepGrid,
};
use dypbp::scoring::{DecayMode, IdentityMode, ScoreConfig};
use dypbp::sensor::{run_sensor, SensorConfig};
use dypbp::simulator::Scenario;
use dypbp::trace::validate_trace;

#[derive(Parser)]
#[command(
    name = "dypbp",
    version,
    about = "Peer beneficialness scoring and prediction for Bitcoin-style P2P telemetry"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalFlags,
    #[command(subcommand)]
    command: Command,
}

// Environment variables mirror every global flag with the DYPBP_ prefix.
#[derive(Args)]
struct GlobalFlags {
    /// Master seed for anything randomized (simulation, forests, sweeps).
    #[arg(long, global = true, env = "DYPBP_SEED", default_value_t = 42)]
    seed: u64,
    /// Block weight w_B in [0, 1]; the fee weight is 1 - w_B.
    #[arg(long, global = true, env = "DYPBP_W_BLOCK", default_value_t = 0.5)]
    w_block: f64,
    /// Score decay factor in [0, 1].
    #[arg(long, global = true, env = "DYPBP_GAMMA", default_value_t = 1.0)]
    gamma: f64,
    /// Measurement window length in trace seconds.
    #[arg(long, global = true, env = "DYPBP_WINDOW_SECONDS", default_value_t = 1.0)]
    window_seconds: f64,
    /// Divisor applied to raw satoshi fees (10000 tames fee magnitudes).
    #[arg(long, global = true, env = "DYPBP_FEE_SCALE", default_value_t = 1.0)]
    fee_scale: f64,
    /// Where gamma applies: increment (monotone) or prior (decaying).
    #[arg(long, global = true, env = "DYPBP_DECAY_MODE", default_value = "increment",
          value_parser = parse_decay_mode)]
    decay_mode: DecayMode,
    /// Include the remembrance column in model inputs (on|off).
    #[arg(long, global = true, env = "DYPBP_REMEMBRANCE", default_value = "on",
          value_parser = parse_on_off, action = clap::ArgAction::Set, value_name = "on|off")]
    remembrance: bool,
    /// How peers map to remembrance identities.
    #[arg(long, global = true, env = "DYPBP_REMEMBRANCE_IDENTITY", default_value = "address_only",
          value_parser = parse_identity_mode)]
    remembrance_identity: IdentityMode,
    /// Drop the raw timestamp feature (it leaks under chronological splits).
    #[arg(long, global = true, env = "DYPBP_EXCLUDE_TIMESTAMP", default_value_t = false)]
    exclude_timestamp: bool,
    /// Output path (file or directory, command dependent).
    #[arg(long, global = true, env = "DYPBP_OUT")]
    out: Option<PathBuf>,
}

fn parse_on_off(s: &str) -> Result<bool, String> {
    match s {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(format!("expected on|off, got {other:?}")),
    }
}

fn parse_decay_mode(s: &str) -> Result<DecayMode, String> {
    match s {
        "increment" => Ok(DecayMode::Increment),
        "prior" => Ok(DecayMode::Prior),
        other => Err(format!("expected increment|prior, got {other:?}")),
    }
}

fn parse_identity_mode(s: &str) -> Result<IdentityMode, String> {
    match s {
        "address_only" => Ok(IdentityMode::AddressOnly),
        "address_and_port" => Ok(IdentityMode::AddressAndPort),
        other => Err(format!("expected address_only|address_and_port, got {other:?}")),
    }
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

#[derive(Args, Clone)]
struct ModelFlags {
    /// Model family to fit.
    #[arg(long, default_value = "linear", value_parser = parse_model)]
    model: ModelKind,
    #[arg(long, default_value_t = 1e-8)]
    ridge_eps: f64,
    #[arg(long, default_value_t = 5)]
    knn_k: usize,
    #[arg(long, default_value_t = false)]
    knn_standardize: bool,
    #[arg(long, default_value_t = 100)]
    forest_trees: usize,
    #[arg(long)]
    forest_max_depth: Option<usize>,
    #[arg(long, default_value_t = 2)]
    forest_min_leaf: usize,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    feature_subsample: f64,
    /// Chronological train fraction.
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    /// Truncate training to this many trace seconds.
    #[arg(long)]
    train_duration_s: Option<f64>,
    /// Average MAE per peer instead of pooling samples.
    #[arg(long, default_value_t = false)]
    per_peer: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trace from a scenario.
    Simulate {
        /// Scenario TOML; defaults apply when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Override the scenario duration.
        #[arg(long)]
        duration_s: Option<f64>,
        /// Override the connection-slot cap.
        #[arg(long)]
        max_peers: Option<usize>,
    },
    /// Score a trace and write one CSV per peer.
    Score { trace: PathBuf },
    /// Encode a trace into one model-ready dataset CSV.
    Featurize { trace: PathBuf },
    /// Rank features by mutual information with the score label.
    MiRank {
        trace: PathBuf,
        #[arg(short, long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 16)]
        bins: usize,
    },
    /// Fit one model and report training-set error.
    Train {
        trace: PathBuf,
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Fit one model and report held-out test error.
    Eval {
        trace: PathBuf,
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Run the full experiment grid and write a report CSV.
    Sweep {
        trace: PathBuf,
        /// Comma-separated block weights.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.25, 0.5, 0.75, 1.0])]
        w_block_grid: Vec<f64>,
        /// Comma-separated training durations in trace seconds.
        #[arg(long, value_delimiter = ',',
              default_values_t = vec![40.0, 200.0, 1_000.0, 5_000.0, 25_000.0, 125_000.0])]
        durations: Vec<f64>,
        /// Comma-separated models (linear,knn,forest).
        #[arg(long, value_delimiter = ',', value_parser = parse_model,
              default_values_t = vec![ModelKind::Linear, ModelKind::Forest])]
        models: Vec<ModelKind>,
        /// Remembrance axis: on, off, or both.
        #[arg(long, default_value = "both")]
        remembrance_grid: String,
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Collect a live trace from Mainnet peers (network required).
    Sense {
        /// Peers to dial, host:port; repeatable.
        #[arg(long = "seed-addr", required = true)]
        seed_addrs: Vec<String>,
        #[arg(long, default_value_t = 10)]
        max_outbound: usize,
        /// Stop after this many seconds (runs until killed when omitted).
        #[arg(long)]
        duration_s: Option<f64>,
        #[arg(long, default_value_t = 10.0)]
        handshake_timeout_s: f64,
        #[arg(long, default_value = "/dypbp:0.1.0/")]
        user_agent: String,
    },
    /// Check a trace against the format and session rules.
    Validate { trace: PathBuf },
}

fn score_config(global: &GlobalFlags) -> ScoreConfig {
    ScoreConfig {
        gamma: global.gamma,
        w_block: global.w_block,
        fee_scale: global.fee_scale,
        window_seconds: global.window_seconds,
        decay_mode: global.decay_mode,
        identity_mode: global.remembrance_identity,
    }
}

fn extract_options(global: &GlobalFlags) -> ExtractOptions {
    ExtractOptions { include_timestamp: !global.exclude_timestamp }
}

fn eval_options(global: &GlobalFlags, flags: &ModelFlags) -> EvalOptions {
    EvalOptions {
        train_fraction: flags.train_fraction,
        remembrance: global.remembrance,
        include_timestamp: !global.exclude_timestamp,
        train_duration_s: flags.train_duration_s,
        per_peer: flags.per_peer,
        seed: global.seed,
        params: ModelHyperparams {
            linear: LinearParams { ridge_eps: flags.ridge_eps },
            knn: KnnParams { k: flags.knn_k, standardize: flags.knn_standardize },
            forest: ForestParams {
                trees: flags.forest_trees,
                max_depth: flags.forest_max_depth,
                min_leaf: flags.forest_min_leaf,
                feature_subsample: flags.feature_subsample,
                seed: global.seed,
            },
        },
    }
}

fn write_out(path: &PathBuf, content: &str) -> Result<(), PipelineError> {
    std::fs::write(path, content).map_err(|e| {
        PipelineError::Trace(dypbp::trace::TraceError::Io { path: path.clone(), source: e })
    })
}

fn run(cli: Cli) -> Result<ExitCode, PipelineError> {
    let global = &cli.global;
    match cli.command {
        Command::Simulate { scenario, duration_s, max_peers } => {
            let mut scenario = match scenario {
                Some(path) => Scenario::load(&path)?,
                None => Scenario::default(),
            };
            scenario.seed = global.seed;
            if let Some(duration) = duration_s {
                scenario.duration_s = duration;
            }
            if let Some(max) = max_peers {
                scenario.max_concurrent_peers = max;
            }
            let out = global.out.clone().unwrap_or_else(|| PathBuf::from("trace.log"));
            let (events, truth) = pipeline::simulate_to_file(&scenario, &out)?;
            println!(
                "wrote {} events for {} peers to {}",
                events.len(),
                truth.peer_quality.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Score { trace } => {
            let (events, warnings) = pipeline::load_trace(&trace)?;
            warn_lines(&warnings);
            let dir = global.out.clone().unwrap_or_else(|| PathBuf::from("peer_csv"));
            let paths =
                pipeline::score_to_peer_csvs(&events, &score_config(global), &extract_options(global), &dir)?;
            println!("wrote {} peer CSVs to {}", paths.len(), dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Featurize { trace } => {
            let (events, warnings) = pipeline::load_trace(&trace)?;
            warn_lines(&warnings);
            let csv = pipeline::featurize_csv(
                &events,
                &score_config(global),
                &extract_options(global),
                global.remembrance,
            )?;
            let out = global.out.clone().unwrap_or_else(|| PathBuf::from("dataset.csv"));
            write_out(&out, &csv)?;
            println!("wrote {} dataset rows to {}", csv.lines().count() - 1, out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::MiRank { trace, k, bins } => {
            let (events, warnings) = pipeline::load_trace(&trace)?;
            warn_lines(&warnings);
            let ranking = pipeline::rank_features(
                &events,
                &score_config(global),
                &extract_options(global),
                global.remembrance,
                bins,
            )?;
            let k = k.min(ranking.len());
            println!("{:<5} {:<36} mi_bits", "rank", "feature");
            for (i, (name, mi)) in ranking.entries.iter().take(k).enumerate() {
                println!("{:<5} {:<36} {mi:.6}", i + 1, name);
            }
            if let Some(out) = &global.out {
                let mut csv = String::from("rank,feature,mi_bits\n");
                for (i, (name, mi)) in ranking.entries.iter().enumerate() {
                    csv.push_str(&format!("{},{name},{mi}\n", i + 1));
                }
                write_out(out, &csv)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Train { trace, model } => {
            let (events, warnings) = pipeline::load_trace(&trace)?;
            warn_lines(&warnings);
            let outcome = pipeline::train_single(
                &events,
                &score_config(global),
                model.model,
                &eval_options(global, &model),
            )?;
            println!("trained {} on {} rows", model.model, outcome.train_rows);
            print!("{}", pipeline::report_csv(&outcome.report));
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { trace, model } => {
            let (events, warnings) = pipeline::load_trace(&trace)?;
            warn_lines(&warnings);
            let outcome = pipeline::eval_single(
                &events,
                &score_config(global),
                model.model,
                &eval_options(global, &model),
            )?;
            println!(
                "evaluated {} on {} train / {} test rows",
                model.model, outcome.train_rows, outcome.test_rows
            );
            let csv = pipeline::report_csv(&outcome.report);
            print!("{csv}");
            if let Some(out) = &global.out {
                write_out(out, &csv)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { trace, w_block_grid, durations, models, remembrance_grid, model } => {
            let (events, warnings) = pipeline::load_trace(&trace)?;
            warn_lines(&warnings);
            let remembrance = match remembrance_grid.as_str() {
                "on" => vec![true],
                "off" => vec![false],
                "both" => vec![false, true],
                other => {
                    return Err(PipelineError::InvalidGrid(format!(
                        "remembrance_grid must be on|off|both, got {other:?}"
                    )))
                }
            };
            let grid = SweepGrid {
                w_block: w_block_grid,
                remembrance,
                models,
                train_durations_s: durations,
            };
            let rows = pipeline::run_sweep(
                &events,
                &score_config(global),
                &grid,
                &eval_options(global, &model),
            )?;
            let csv = pipeline::sweep_csv(&rows);
            let out = global.out.clone().unwrap_or_else(|| PathBuf::from("sweep.csv"));
            write_out(&out, &csv)?;
            println!("wrote {} rows to {}", rows.len(), out.display());
            print!("{}", pipeline::sweep_summary(&rows));
            Ok(ExitCode::SUCCESS)
        }
        Command::Sense { seed_addrs, max_outbound, duration_s, handshake_timeout_s, user_agent } => {
            let config = SensorConfig {
                seed_addrs,
                max_outbound,
                user_agent,
                handshake_timeout_s,
                output_path: global.out.clone().unwrap_or_else(|| PathBuf::from("sensor-trace.log")),
                run_for_s: duration_s,
                ..Default::default()
            };
            let stats = run_sensor(&config)?;
            println!(
                "sensor finished: {} sessions, {} events written, {} write errors",
                stats.sessions_opened, stats.events_written, stats.write_errors
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { trace } => {
            let (events, warnings) = pipeline::load_trace(&trace)?;
            warn_lines(&warnings);
            let report = validate_trace(&events);
            println!(
                "{} events, {} peers, {} sessions, {} violations",
                report.event_count,
                report.peer_count,
                report.session_count,
                report.violations.len()
            );
            for violation in report.violations.iter().take(20) {
                println!("  line {}: {} ({})", violation.line, violation.rule, violation.description);
            }
            if report.is_clean() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(2))
            }
        }
    }
}

fn warn_lines(warnings: &[dypbp::trace::TraceWarning]) {
    if !warnings.is_empty() {
        eprintln!("warning: skipped {} unreadable trace lines", warnings.len());
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
