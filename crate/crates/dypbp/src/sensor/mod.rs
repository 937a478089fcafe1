//! Live Mainnet collector.
//!
//! A best-effort, listen-only sensor: it dials up to `max_outbound` peers,
//! completes the version/verack handshake, answers pings, and logs what it
//! observes as standard trace events. It never requests blocks or
//! transactions and never relays anything.
//!
//! Known limitations of inv-only sensing: transaction fees and sizes are
//! not computable from announcements alone, so TX events carry `fee = 0`
//! with the `fee_unknown` flag and a placeholder size of 1 byte; live
//! traces therefore support block-weighted scoring (`w_block = 1`)
//! faithfully. Peer heights are estimates seeded from the version
//! handshake's start height and bumped per announced block.
//!
//! One thread handles each peer session; a single writer thread owns the
//! trace file and stamps events at receipt, so cross-peer order is receipt
//! order while each peer's own events stay ordered.

pub mod wire;

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use thiserror::Error;

use crate::trace::{Direction, EventPayload, ObservationEvent, PeerKey, TraceError, TraceWriter};
use wire::{
    build_version, encode_message, nonce_payload, parse_addr_count, parse_feefilter, parse_inv,
    parse_nonce, parse_version, DecodeEvent, InvKind, MessageDecoder, VersionPayload,
    MAINNET_MAGIC,
};

#[derive(Debug, Error)]
pub enum SensorError {
    #[error("invalid sensor config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Debug, Clone)]
pub struct SensorConfig {
    /// Peers to dial, as `host:port`.
    pub seed_addrs: Vec<String>,
    /// Concurrent session cap; private nodes keep at most 10 outbound.
    pub max_outbound: usize,
    pub user_agent: String,
    pub protocol_version: i32,
    pub handshake_timeout_s: f64,
    pub output_path: PathBuf,
    /// Stop after this many seconds; None runs until the process is killed.
    pub run_for_s: Option<f64>,
    /// Minimum delay before redialing the same address.
    pub redial_delay_s: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            seed_addrs: Vec::new(),
            max_outbound: 10,
            user_agent: "/dypbp:0.1.0/".to_owned(),
            protocol_version: 70016,
            handshake_timeout_s: 10.0,
            output_path: PathBuf::from("sensor-trace.log"),
            run_for_s: None,
            redial_delay_s: 30.0,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<(), SensorError> {
        if self.max_outbound == 0 || self.max_outbound > 10 {
            return Err(SensorError::InvalidConfig(format!(
                "max_outbound must be in 1..=10, got {}",
                self.max_outbound
            )));
        }
        if self.seed_addrs.is_empty() {
            return Err(SensorError::InvalidConfig("no seed addresses".into()));
        }
        Ok(())
    }
}

/// Connection-slot accounting: at most `capacity` concurrent sessions, one
/// per address.
#[derive(Debug)]
pub struct DialSlots {
    capacity: usize,
    active: Vec<String>,
}

impl DialSlots {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, active: Vec::new() }
    }

    /// Claims a slot for `addr`; a dial beyond capacity or to an
    /// already-active address is suppressed.
    pub fn try_claim(&mut self, addr: &str) -> bool {
        if self.active.len() >= self.capacity || self.active.iter().any(|a| a == addr) {
            return false;
        }
        self.active.push(addr.to_owned());
        true
    }

    pub fn release(&mut self, addr: &str) {
        self.active.retain(|a| a != addr);
    }

    pub fn active_count(&self) -> usize {
        self.active.len()
    }
}

/// Counters reported when a sensor run finishes.
#[derive(Debug, Default, Clone)]
pub struct SensorStats {
    pub sessions_opened: u64,
    pub events_written: u64,
    pub write_errors: u64,
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

struct Outbox {
    sender: mpsc::Sender<(PeerKey, EventPayload)>,
}

impl Outbox {
    fn emit(&self, peer: &PeerKey, payload: EventPayload) {
        // A closed writer means the run is over; sessions just wind down.
        let _ = self.sender.send((peer.clone(), payload));
    }
}

/// Runs the collector until the configured duration elapses. Per-peer
/// failures are logged as DISCONNECT events and trigger a redial; they
/// never abort the run.
pub fn run_sensor(config: &SensorConfig) -> Result<SensorStats, SensorError> {
    config.validate()?;
    let mut writer = TraceWriter::append(&config.output_path)?;

    let (sender, receiver) = mpsc::channel::<(PeerKey, EventPayload)>();
    let writer_thread = std::thread::spawn(move || -> SensorStats {
        let mut stats = SensorStats::default();
        let mut last_ts = f64::NEG_INFINITY;
        while let Ok((peer, payload)) = receiver.recv() {
            // Receipt-time stamping; clamp against clock steps so the
            // single-writer ordering contract holds.
            let ts = unix_now().max(last_ts);
            last_ts = ts;
            match writer.write(&ObservationEvent::new(ts, peer, payload)) {
                Ok(()) => stats.events_written += 1,
                Err(_) => stats.write_errors += 1,
            }
            let _ = writer.flush();
        }
        let _ = writer.flush();
        stats
    });

    let stop = Arc::new(AtomicBool::new(false));
    let slots = Arc::new(Mutex::new(DialSlots::new(config.max_outbound)));
    let started = Instant::now();
    let deadline = config.run_for_s.map(Duration::from_secs_f64);
    let mut next_dial: HashMap<String, Instant> = HashMap::new();
    let mut handles = Vec::new();
    let mut sessions_opened = 0u64;

    loop {
        if let Some(limit) = deadline {
            if started.elapsed() >= limit {
                break;
            }
        }
        for seed in &config.seed_addrs {
            let now = Instant::now();
            if next_dial.get(seed).is_some_and(|at| *at > now) {
                continue;
            }
            if !slots.lock().unwrap().try_claim(seed) {
                continue;
            }
            next_dial.insert(seed.clone(), now + Duration::from_secs_f64(config.redial_delay_s));
            sessions_opened += 1;

            let seed = seed.clone();
            let outbox = Outbox { sender: sender.clone() };
            let stop = stop.clone();
            let slots = slots.clone();
            let session_config = config.clone();
            handles.push(std::thread::spawn(move || {
                run_session(&seed, &session_config, &outbox, &stop);
                slots.lock().unwrap().release(&seed);
            }));
        }
        handles.retain(|h| !h.is_finished());
        std::thread::sleep(Duration::from_millis(200));
    }

    stop.store(true, Ordering::SeqCst);
    for handle in handles {
        let _ = handle.join();
    }
    drop(sender);
    let mut stats = writer_thread.join().unwrap_or_default();
    stats.sessions_opened = sessions_opened;
    Ok(stats)
}

fn peer_key_for(addr: &SocketAddr) -> PeerKey {
    PeerKey { address: addr.ip().to_string(), port: addr.port(), direction: Direction::Outbound }
}

const READ_CHUNK: usize = 64 * 1024;
const PING_INTERVAL: Duration = Duration::from_secs(60);

fn run_session(seed: &str, config: &SensorConfig, outbox: &Outbox, stop: &AtomicBool) {
    let Some(addr) = seed.to_socket_addrs().ok().and_then(|mut it| it.next()) else {
        return;
    };
    let peer = peer_key_for(&addr);

    let dial_started = Instant::now();
    let Ok(mut stream) = TcpStream::connect_timeout(&addr, Duration::from_secs(10)) else {
        return;
    };
    let dial_ms = dial_started.elapsed().as_secs_f64() * 1e3;
    let _ = stream.set_read_timeout(Some(Duration::from_millis(500)));
    let _ = stream.set_nodelay(true);

    outbox.emit(&peer, EventPayload::Connect);
    // Transport-level RTT proxy: the TCP dial latency.
    outbox.emit(&peer, EventPayload::PingRtt { rtt_ms: dial_ms });

    match drive_session(&mut stream, &peer, config, outbox, stop) {
        Ok(reason) | Err(reason) => {
            outbox.emit(&peer, EventPayload::Disconnect { reason: Some(reason) });
        }
    }
    let _ = stream.shutdown(std::net::Shutdown::Both);
}

fn send_message(
    stream: &mut TcpStream,
    command: &str,
    payload: &[u8],
) -> Result<(), String> {
    let frame =
        encode_message(command, payload, MAINNET_MAGIC).map_err(|e| format!("encode: {e}"))?;
    stream.write_all(&frame).map_err(|_| "write_failed".to_owned())
}

// Returns the disconnect reason either way; Ok marks an orderly stop.
fn drive_session(
    stream: &mut TcpStream,
    peer: &PeerKey,
    config: &SensorConfig,
    outbox: &Outbox,
    stop: &AtomicBool,
) -> Result<String, String> {
    let our_version = VersionPayload {
        protocol_version: config.protocol_version,
        services: 0,
        timestamp: unix_now() as i64,
        nonce: std::process::id() as u64 ^ unix_now().to_bits(),
        user_agent: config.user_agent.clone(),
        start_height: 0,
        relay: false,
    };
    send_message(stream, "version", &build_version(&our_version))?;

    let mut decoder = MessageDecoder::new(MAINNET_MAGIC);
    let mut buf = vec![0u8; READ_CHUNK];
    let handshake_deadline =
        Instant::now() + Duration::from_secs_f64(config.handshake_timeout_s);
    let mut their_version: Option<VersionPayload> = None;
    let mut got_verack = false;

    while !(their_version.is_some() && got_verack) {
        if Instant::now() > handshake_deadline {
            return Err("handshake_timeout".to_owned());
        }
        if stop.load(Ordering::SeqCst) {
            return Ok("shutdown".to_owned());
        }
        match stream.read(&mut buf) {
            Ok(0) => return Err("closed_during_handshake".to_owned()),
            Ok(n) => decoder.feed(&buf[..n]),
            Err(e) if is_timeout(&e) => {}
            Err(_) => return Err("read_failed".to_owned()),
        }
        loop {
            match decoder.poll() {
                DecodeEvent::Message(message) => match message.command.as_str() {
                    "version" => {
                        let parsed = parse_version(&message.payload)
                            .map_err(|_| "bad_version_payload".to_owned())?;
                        send_message(stream, "verack", &[])?;
                        their_version = Some(parsed);
                    }
                    "verack" => got_verack = true,
                    _ => {}
                },
                DecodeEvent::NeedMoreBytes => break,
                DecodeEvent::Corrupt { .. } => {}
            }
        }
    }

    let version = their_version.expect("handshake completed");
    let start_height = version.start_height.max(0) as u64;
    let mut block_height_estimate = start_height;
    outbox.emit(peer, EventPayload::HeadersHeight { height: start_height });
    outbox.emit(peer, EventPayload::BlockHeight { height: start_height });

    let mut next_ping = Instant::now() + PING_INTERVAL;
    let mut ping_sent: HashMap<u64, Instant> = HashMap::new();
    let mut ping_nonce = our_version.nonce;

    loop {
        if stop.load(Ordering::SeqCst) {
            return Ok("shutdown".to_owned());
        }
        if Instant::now() >= next_ping {
            ping_nonce = ping_nonce.wrapping_add(1);
            ping_sent.insert(ping_nonce, Instant::now());
            send_message(stream, "ping", &nonce_payload(ping_nonce))?;
            next_ping = Instant::now() + PING_INTERVAL;
        }

        match stream.read(&mut buf) {
            Ok(0) => return Err("peer_closed".to_owned()),
            Ok(n) => decoder.feed(&buf[..n]),
            Err(e) if is_timeout(&e) => continue,
            Err(_) => return Err("read_failed".to_owned()),
        }

        loop {
            match decoder.poll() {
                DecodeEvent::NeedMoreBytes => break,
                DecodeEvent::Corrupt { .. } => {
                    // Resync-by-magic-scan already happened inside the
                    // decoder; stay on the connection.
                    continue;
                }
                DecodeEvent::Message(message) => match message.command.as_str() {
                    "ping" => {
                        if let Ok(nonce) = parse_nonce(&message.payload) {
                            send_message(stream, "pong", &nonce_payload(nonce))?;
                        }
                        outbox.emit(peer, EventPayload::Msg { command: "ping".into() });
                    }
                    "pong" => {
                        if let Ok(nonce) = parse_nonce(&message.payload) {
                            if let Some(sent) = ping_sent.remove(&nonce) {
                                outbox.emit(
                                    peer,
                                    EventPayload::ProtoPingRtt {
                                        rtt_ms: sent.elapsed().as_secs_f64() * 1e3,
                                    },
                                );
                            }
                        }
                    }
                    "inv" => {
                        if let Ok(entries) = parse_inv(&message.payload) {
                            for (kind, hash) in entries {
                                match kind {
                                    InvKind::Block => {
                                        block_height_estimate += 1;
                                        outbox.emit(
                                            peer,
                                            EventPayload::Block {
                                                hash,
                                                height: block_height_estimate,
                                            },
                                        );
                                    }
                                    InvKind::Tx => {
                                        outbox.emit(
                                            peer,
                                            EventPayload::Tx {
                                                hash,
                                                fee: 0,
                                                size: 1,
                                                fee_unknown: true,
                                            },
                                        );
                                    }
                                    InvKind::Other(_) => {}
                                }
                            }
                        }
                    }
                    "addr" | "addrv2" => {
                        if let Ok(count) = parse_addr_count(&message.payload) {
                            outbox.emit(peer, EventPayload::Addr { count });
                        }
                    }
                    "feefilter" => {
                        if let Ok(rate) = parse_feefilter(&message.payload) {
                            outbox.emit(peer, EventPayload::FeeFilter { min_fee_rate: rate });
                        }
                    }
                    other => {
                        let command: String = other.chars().take(12).collect();
                        if !command.is_empty() {
                            outbox.emit(peer, EventPayload::Msg { command });
                        }
                    }
                },
            }
        }
    }
}

fn is_timeout(e: &std::io::Error) -> bool {
    matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eleventh_dial_is_suppressed() {
        let mut slots = DialSlots::new(10);
        for i in 0..10 {
            assert!(slots.try_claim(&format!("peer{i}:8333")));
        }
        assert_eq!(slots.active_count(), 10);
        assert!(!slots.try_claim("peer10:8333"));

        slots.release("peer3:8333");
        assert!(slots.try_claim("peer10:8333"));
    }

    #[test]
    fn duplicate_dial_is_suppressed() {
        let mut slots = DialSlots::new(2);
        assert!(slots.try_claim("a:1"));
        assert!(!slots.try_claim("a:1"));
    }

    #[test]
    fn config_bounds_are_enforced() {
        let bad = SensorConfig { max_outbound: 11, seed_addrs: vec!["x:1".into()], ..Default::default() };
        assert!(bad.validate().is_err());
        let none = SensorConfig { seed_addrs: vec![], ..Default::default() };
        assert!(none.validate().is_err());
        let ok = SensorConfig { seed_addrs: vec!["x:1".into()], ..Default::default() };
        assert!(ok.validate().is_ok());
    }
}
