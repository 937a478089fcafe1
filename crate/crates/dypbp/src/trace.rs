//! Canonical event model and on-disk trace format.
//!
//! A trace file is UTF-8 text, one observation per line, written as
//! space-separated `key=value` fields. Every line starts with the same four
//! fields, followed by fields specific to the event kind:
//!
//! ```text
//! ts=<seconds.micros> peer=<address>:<port> dir=<in|out> kind=<KIND> ...
//!
//! CONNECT
//! DISCONNECT        [reason=<token>]
//! BLOCK             hash=<64 lowercase hex> height=<u64>
//! TX                hash=<64 lowercase hex> fee=<u64> size=<u64> [fee_unknown=true]
//! PING_RTT          rtt_ms=<f64>
//! PROTO_PING_RTT    rtt_ms=<f64>
//! ADDR              count=<u64>
//! HEADERS_HEIGHT    height=<u64>
//! BLOCK_HEIGHT      height=<u64>
//! FEEFILTER         min_fee_rate=<f64>
//! MSG               command=<token, at most 12 chars>
//! ```
//!
//! Timestamps are seconds since the Unix epoch with microsecond precision;
//! `write_events` rounds to that grid. Blank lines and lines starting with
//! `#` are ignored. Unknown event kinds are skipped with a warning in the
//! default lenient mode (`read_events`) so newer traces stay readable;
//! `read_events_strict` turns any unreadable line into an error naming it.
//!
//! Trace files have a single-writer contract: [`TraceWriter`] takes an
//! advisory `flock` on Unix so two collectors cannot interleave lines.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write as IoWrite};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::features::MeasurementSample;

/// Whether the local node dialed the peer or accepted it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Inbound,
    Outbound,
}

impl Direction {
    fn as_str(self) -> &'static str {
        match self {
            Direction::Inbound => "in",
            Direction::Outbound => "out",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identifies one peer connection endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PeerKey {
    pub address: String,
    pub port: u16,
    pub direction: Direction,
}

impl PeerKey {
    pub fn new(address: impl Into<String>, port: u16, direction: Direction) -> Self {
        Self { address: address.into(), port, direction }
    }

    pub fn outbound(address: impl Into<String>, port: u16) -> Self {
        Self::new(address, port, Direction::Outbound)
    }
}

impl fmt::Display for PeerKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.address, self.port)
    }
}

/// Event kind discriminant, matching the `kind=` field of the trace format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Connect,
    Disconnect,
    Block,
    Tx,
    PingRtt,
    ProtoPingRtt,
    Addr,
    HeadersHeight,
    BlockHeight,
    FeeFilter,
    Msg,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Connect => "CONNECT",
            EventKind::Disconnect => "DISCONNECT",
            EventKind::Block => "BLOCK",
            EventKind::Tx => "TX",
            EventKind::PingRtt => "PING_RTT",
            EventKind::ProtoPingRtt => "PROTO_PING_RTT",
            EventKind::Addr => "ADDR",
            EventKind::HeadersHeight => "HEADERS_HEIGHT",
            EventKind::BlockHeight => "BLOCK_HEIGHT",
            EventKind::FeeFilter => "FEEFILTER",
            EventKind::Msg => "MSG",
        }
    }

    fn from_str(s: &str) -> Option<Self> {
        Some(match s {
            "CONNECT" => EventKind::Connect,
            "DISCONNECT" => EventKind::Disconnect,
            "BLOCK" => EventKind::Block,
            "TX" => EventKind::Tx,
            "PING_RTT" => EventKind::PingRtt,
            "PROTO_PING_RTT" => EventKind::ProtoPingRtt,
            "ADDR" => EventKind::Addr,
            "HEADERS_HEIGHT" => EventKind::HeadersHeight,
            "BLOCK_HEIGHT" => EventKind::BlockHeight,
            "FEEFILTER" => EventKind::FeeFilter,
            "MSG" => EventKind::Msg,
            _ => return None,
        })
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Kind-specific observation payload.
#[derive(Debug, Clone, PartialEq)]
pub enum EventPayload {
    Connect,
    Disconnect {
        /// Short token such as `handshake_timeout`; no whitespace.
        reason: Option<String>,
    },
    Block {
        /// 32-byte hash, lowercase hex.
        hash: String,
        height: u64,
    },
    Tx {
        hash: String,
        /// Fee in satoshi. Live collectors that cannot attribute fees record
        /// 0 and set `fee_unknown`.
        fee: u64,
        /// Serialized size in bytes; 1 is the placeholder when unknown.
        size: u64,
        fee_unknown: bool,
    },
    PingRtt { rtt_ms: f64 },
    ProtoPingRtt { rtt_ms: f64 },
    Addr { count: u64 },
    HeadersHeight { height: u64 },
    BlockHeight { height: u64 },
    FeeFilter { min_fee_rate: f64 },
    Msg { command: String },
}

impl EventPayload {
    pub fn kind(&self) -> EventKind {
        match self {
            EventPayload::Connect => EventKind::Connect,
            EventPayload::Disconnect { .. } => EventKind::Disconnect,
            EventPayload::Block { .. } => EventKind::Block,
            EventPayload::Tx { .. } => EventKind::Tx,
            EventPayload::PingRtt { .. } => EventKind::PingRtt,
            EventPayload::ProtoPingRtt { .. } => EventKind::ProtoPingRtt,
            EventPayload::Addr { .. } => EventKind::Addr,
            EventPayload::HeadersHeight { .. } => EventKind::HeadersHeight,
            EventPayload::BlockHeight { .. } => EventKind::BlockHeight,
            EventPayload::FeeFilter { .. } => EventKind::FeeFilter,
            EventPayload::Msg { .. } => EventKind::Msg,
        }
    }
}

/// One timestamped networking observation attributed to a peer.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationEvent {
    /// Seconds since the Unix epoch, microsecond grid.
    pub ts: f64,
    pub peer: PeerKey,
    pub payload: EventPayload,
}

impl ObservationEvent {
    pub fn new(ts: f64, peer: PeerKey, payload: EventPayload) -> Self {
        Self { ts, peer, payload }
    }

    pub fn kind(&self) -> EventKind {
        self.payload.kind()
    }
}

/// Rounds a timestamp onto the trace format's microsecond grid.
pub fn quantize_ts(ts: f64) -> f64 {
    (ts * 1e6).round() / 1e6
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("events out of order: event {index} has ts {ts} before {prev}")]
    OutOfOrder { index: usize, ts: f64, prev: f64 },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid field {field}: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("trace file {path} is locked by another writer")]
    Locked { path: PathBuf },
}

fn io_err(path: &Path, source: std::io::Error) -> TraceError {
    TraceError::Io { path: path.to_path_buf(), source }
}

/// A line the lenient reader could not turn into an event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceWarning {
    pub line: usize,
    pub reason: String,
}

/// Result of a lenient trace read.
#[derive(Debug, Clone, Default)]
pub struct TraceReadOutcome {
    pub events: Vec<ObservationEvent>,
    pub warnings: Vec<TraceWarning>,
}

// Tokens are bare words in the line format, so they must not contain
// whitespace or '='.
fn check_token(field: &'static str, value: &str) -> Result<(), TraceError> {
    if value.is_empty() {
        return Err(TraceError::InvalidField { field, reason: "empty".into() });
    }
    if value.chars().any(|c| c.is_whitespace() || c == '=') {
        return Err(TraceError::InvalidField {
            field,
            reason: format!("{value:?} contains whitespace or '='"),
        });
    }
    Ok(())
}

fn check_hash(field: &'static str, value: &str) -> Result<(), TraceError> {
    if value.len() != 64 || !value.chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_uppercase())
    {
        return Err(TraceError::InvalidField {
            field,
            reason: format!("{value:?} is not 64 lowercase hex chars"),
        });
    }
    Ok(())
}

fn format_event(event: &ObservationEvent, out: &mut String) -> Result<(), TraceError> {
    use std::fmt::Write;

    check_token("address", &event.peer.address)?;
    let _ = write!(
        out,
        "ts={:.6} peer={}:{} dir={} kind={}",
        event.ts, event.peer.address, event.peer.port, event.peer.direction, event.kind()
    );
    match &event.payload {
        EventPayload::Connect => {}
        EventPayload::Disconnect { reason } => {
            if let Some(reason) = reason {
                check_token("reason", reason)?;
                let _ = write!(out, " reason={reason}");
            }
        }
        EventPayload::Block { hash, height } => {
            check_hash("hash", hash)?;
            let _ = write!(out, " hash={hash} height={height}");
        }
        EventPayload::Tx { hash, fee, size, fee_unknown } => {
            check_hash("hash", hash)?;
            if *size == 0 {
                return Err(TraceError::InvalidField { field: "size", reason: "must be > 0".into() });
            }
            let _ = write!(out, " hash={hash} fee={fee} size={size}");
            if *fee_unknown {
                let _ = write!(out, " fee_unknown=true");
            }
        }
        EventPayload::PingRtt { rtt_ms } | EventPayload::ProtoPingRtt { rtt_ms } => {
            if !rtt_ms.is_finite() || *rtt_ms < 0.0 {
                return Err(TraceError::InvalidField {
                    field: "rtt_ms",
                    reason: format!("{rtt_ms} is not a nonnegative real"),
                });
            }
            let _ = write!(out, " rtt_ms={rtt_ms}");
        }
        EventPayload::Addr { count } => {
            let _ = write!(out, " count={count}");
        }
        EventPayload::HeadersHeight { height } | EventPayload::BlockHeight { height } => {
            let _ = write!(out, " height={height}");
        }
        EventPayload::FeeFilter { min_fee_rate } => {
            if !min_fee_rate.is_finite() || *min_fee_rate < 0.0 {
                return Err(TraceError::InvalidField {
                    field: "min_fee_rate",
                    reason: format!("{min_fee_rate} is not a nonnegative real"),
                });
            }
            let _ = write!(out, " min_fee_rate={min_fee_rate}");
        }
        EventPayload::Msg { command } => {
            check_token("command", command)?;
            if command.len() > 12 {
                return Err(TraceError::InvalidField {
                    field: "command",
                    reason: format!("{command:?} exceeds 12 chars"),
                });
            }
            let _ = write!(out, " command={command}");
        }
    }
    out.push('\n');
    Ok(())
}

/// Writes a whole event batch to `path`, replacing any existing file.
///
/// The batch must be ordered by timestamp (ties allowed); an out-of-order
/// batch is rejected before anything is written.
pub fn write_events(path: &Path, events: &[ObservationEvent]) -> Result<(), TraceError> {
    let mut body = String::new();
    let mut prev = f64::NEG_INFINITY;
    for (index, event) in events.iter().enumerate() {
        if event.ts < prev {
            return Err(TraceError::OutOfOrder { index, ts: event.ts, prev });
        }
        prev = event.ts;
        format_event(event, &mut body)?;
    }
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    writer.write_all(body.as_bytes()).map_err(|e| io_err(path, e))?;
    writer.flush().map_err(|e| io_err(path, e))
}

/// Streaming single-writer handle used by live collectors.
///
/// Appends one line per event and holds an advisory exclusive lock on the
/// file for the lifetime of the handle (Unix only; elsewhere the single
/// writer contract is by convention).
pub struct TraceWriter {
    file: BufWriter<File>,
    path: PathBuf,
    last_ts: f64,
}

impl TraceWriter {
    pub fn append(path: &Path) -> Result<Self, TraceError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| io_err(path, e))?;
        #[cfg(unix)]
        {
            use std::os::unix::io::AsRawFd;
            let rc = unsafe { libc::flock(file.as_raw_fd(), libc::LOCK_EX | libc::LOCK_NB) };
            if rc != 0 {
                return Err(TraceError::Locked { path: path.to_path_buf() });
            }
        }
        Ok(Self { file: BufWriter::new(file), path: path.to_path_buf(), last_ts: f64::NEG_INFINITY })
    }

    pub fn write(&mut self, event: &ObservationEvent) -> Result<(), TraceError> {
        if event.ts < self.last_ts {
            return Err(TraceError::OutOfOrder { index: 0, ts: event.ts, prev: self.last_ts });
        }
        let mut line = String::new();
        format_event(event, &mut line)?;
        self.file.write_all(line.as_bytes()).map_err(|e| io_err(&self.path, e))?;
        self.last_ts = event.ts;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), TraceError> {
        self.file.flush().map_err(|e| io_err(&self.path, e))
    }
}

fn parse_fields(line: &str) -> Result<Vec<(&str, &str)>, String> {
    line.split_whitespace()
        .map(|tok| tok.split_once('=').ok_or_else(|| format!("field {tok:?} is not key=value")))
        .collect()
}

struct FieldMap<'a> {
    fields: Vec<(&'a str, &'a str)>,
    used: Vec<bool>,
}

impl<'a> FieldMap<'a> {
    fn new(fields: Vec<(&'a str, &'a str)>) -> Self {
        let used = vec![false; fields.len()];
        Self { fields, used }
    }

    fn take(&mut self, key: &str) -> Option<&'a str> {
        for (i, (k, v)) in self.fields.iter().enumerate() {
            if !self.used[i] && *k == key {
                self.used[i] = true;
                return Some(v);
            }
        }
        None
    }

    fn require(&mut self, key: &str) -> Result<&'a str, String> {
        self.take(key).ok_or_else(|| format!("missing field {key}"))
    }

    fn finish(self) -> Result<(), String> {
        for (i, (k, _)) in self.fields.iter().enumerate() {
            if !self.used[i] {
                return Err(format!("unexpected field {k}"));
            }
        }
        Ok(())
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("field {key}={value:?} is not a valid number"))
}

fn parse_line(line: &str) -> Result<ObservationEvent, String> {
    let mut fields = FieldMap::new(parse_fields(line)?);

    let ts: f64 = parse_num("ts", fields.require("ts")?)?;
    let peer_str = fields.require("peer")?;
    let (address, port_str) =
        peer_str.rsplit_once(':').ok_or_else(|| format!("peer {peer_str:?} has no port"))?;
    if address.is_empty() {
        return Err("peer address is empty".into());
    }
    let port: u16 = parse_num("peer", port_str)?;
    let direction = match fields.require("dir")? {
        "in" => Direction::Inbound,
        "out" => Direction::Outbound,
        other => return Err(format!("dir {other:?} is not in|out")),
    };
    let kind_str = fields.require("kind")?;
    let kind = EventKind::from_str(kind_str).ok_or_else(|| format!("unknown kind {kind_str}"))?;

    let payload = match kind {
        EventKind::Connect => EventPayload::Connect,
        EventKind::Disconnect => {
            EventPayload::Disconnect { reason: fields.take("reason").map(str::to_owned) }
        }
        EventKind::Block => EventPayload::Block {
            hash: fields.require("hash")?.to_owned(),
            height: parse_num("height", fields.require("height")?)?,
        },
        EventKind::Tx => EventPayload::Tx {
            hash: fields.require("hash")?.to_owned(),
            fee: parse_num("fee", fields.require("fee")?)?,
            size: parse_num("size", fields.require("size")?)?,
            fee_unknown: match fields.take("fee_unknown") {
                Some("true") => true,
                Some("false") | None => false,
                Some(other) => return Err(format!("fee_unknown={other:?} is not a bool")),
            },
        },
        EventKind::PingRtt => {
            EventPayload::PingRtt { rtt_ms: parse_num("rtt_ms", fields.require("rtt_ms")?)? }
        }
        EventKind::ProtoPingRtt => {
            EventPayload::ProtoPingRtt { rtt_ms: parse_num("rtt_ms", fields.require("rtt_ms")?)? }
        }
        EventKind::Addr => {
            EventPayload::Addr { count: parse_num("count", fields.require("count")?)? }
        }
        EventKind::HeadersHeight => {
            EventPayload::HeadersHeight { height: parse_num("height", fields.require("height")?)? }
        }
        EventKind::BlockHeight => {
            EventPayload::BlockHeight { height: parse_num("height", fields.require("height")?)? }
        }
        EventKind::FeeFilter => EventPayload::FeeFilter {
            min_fee_rate: parse_num("min_fee_rate", fields.require("min_fee_rate")?)?,
        },
        EventKind::Msg => EventPayload::Msg { command: fields.require("command")?.to_owned() },
    };
    fields.finish()?;
    Ok(ObservationEvent { ts, peer: PeerKey { address: address.to_owned(), port, direction }, payload })
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, TraceError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        lines.push((idx + 1, line));
    }
    Ok(lines)
}

/// Reads a trace leniently: unreadable lines become warnings, not errors.
pub fn read_events(path: &Path) -> Result<TraceReadOutcome, TraceError> {
    let mut outcome = TraceReadOutcome::default();
    for (line_no, line) in read_lines(path)? {
        match parse_line(&line) {
            Ok(event) => outcome.events.push(event),
            Err(reason) => outcome.warnings.push(TraceWarning { line: line_no, reason }),
        }
    }
    Ok(outcome)
}

/// Reads a trace, failing on the first unreadable line.
pub fn read_events_strict(path: &Path) -> Result<Vec<ObservationEvent>, TraceError> {
    let mut events = Vec::new();
    for (line_no, line) in read_lines(path)? {
        events.push(parse_line(&line).map_err(|reason| TraceError::Parse { line: line_no, reason })?);
    }
    Ok(events)
}

/// One violated trace rule at a given event position (1-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceViolation {
    pub line: usize,
    pub rule: &'static str,
    pub description: String,
}

/// Outcome of [`validate_trace`]; a trace is well-formed iff `violations`
/// is empty.
#[derive(Debug, Clone, Default)]
pub struct TraceValidationReport {
    pub event_count: usize,
    pub peer_count: usize,
    pub session_count: usize,
    pub violations: Vec<TraceViolation>,
}

impl TraceValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const RULE_ORDERING: &str = "ordering";
pub const RULE_OUTSIDE_SESSION: &str = "outside-session";
pub const RULE_NESTED_SESSION: &str = "nested-session";

/// Checks timestamp ordering and the session rule: per peer, activity is
/// only legal between a CONNECT and the next DISCONNECT. Violations are
/// reported as data, never as errors.
pub fn validate_trace(events: &[ObservationEvent]) -> TraceValidationReport {
    let mut report = TraceValidationReport { event_count: events.len(), ..Default::default() };
    let mut peers: HashSet<&PeerKey> = HashSet::new();
    let mut open: HashSet<&PeerKey> = HashSet::new();
    let mut prev_ts = f64::NEG_INFINITY;

    for (idx, event) in events.iter().enumerate() {
        let line = idx + 1;
        peers.insert(&event.peer);
        if event.ts < prev_ts {
            report.violations.push(TraceViolation {
                line,
                rule: RULE_ORDERING,
                description: format!("ts {} decreases below {}", event.ts, prev_ts),
            });
        }
        prev_ts = prev_ts.max(event.ts);

        match event.kind() {
            EventKind::Connect => {
                if !open.insert(&event.peer) {
                    report.violations.push(TraceViolation {
                        line,
                        rule: RULE_NESTED_SESSION,
                        description: format!("nested session: {} connected twice", event.peer),
                    });
                } else {
                    report.session_count += 1;
                }
            }
            EventKind::Disconnect => {
                if !open.remove(&event.peer) {
                    report.violations.push(TraceViolation {
                        line,
                        rule: RULE_OUTSIDE_SESSION,
                        description: format!("disconnect without session for {}", event.peer),
                    });
                }
            }
            _ => {
                if !open.contains(&event.peer) {
                    report.violations.push(TraceViolation {
                        line,
                        rule: RULE_OUTSIDE_SESSION,
                        description: format!(
                            "activity outside session: {} from {}",
                            event.kind(),
                            event.peer
                        ),
                    });
                }
            }
        }
    }
    report.peer_count = peers.len();
    report
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_owned()
    }
}

fn sanitize_file_stem(identity: &str) -> String {
    identity
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect()
}

/// Writes one CSV per peer identity into `dir`, returning the created paths
/// sorted by identity.
///
/// The header is the sample feature schema (numeric columns, then
/// categorical columns, both in name order) plus `remembrance` and `label`.
/// Identical input produces byte-identical files.
pub fn export_peer_csv(samples: &[MeasurementSample], dir: &Path) -> Result<Vec<PathBuf>, TraceError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;

    let mut numeric_names: Vec<String> = Vec::new();
    let mut categorical_names: Vec<String> = Vec::new();
    {
        let mut num: HashSet<&str> = HashSet::new();
        let mut cat: HashSet<&str> = HashSet::new();
        for sample in samples {
            num.extend(sample.numeric.keys().map(String::as_str));
            cat.extend(sample.categorical.keys().map(String::as_str));
        }
        numeric_names.extend(num.into_iter().map(str::to_owned));
        categorical_names.extend(cat.into_iter().map(str::to_owned));
        numeric_names.sort();
        categorical_names.sort();
    }

    let mut header = String::new();
    for name in numeric_names.iter().chain(categorical_names.iter()) {
        header.push_str(&csv_escape(name));
        header.push(',');
    }
    header.push_str("remembrance,label\r\n");

    let mut by_peer: BTreeMap<&str, Vec<&MeasurementSample>> = BTreeMap::new();
    for sample in samples {
        by_peer.entry(&sample.peer).or_default().push(sample);
    }

    let mut paths = Vec::new();
    let mut used_stems: HashMap<String, usize> = HashMap::new();
    for (identity, rows) in by_peer {
        let mut stem = sanitize_file_stem(identity);
        let n = used_stems.entry(stem.clone()).or_insert(0);
        if *n > 0 {
            stem = format!("{stem}-{n}");
        }
        *n += 1;

        let path = dir.join(format!("{stem}.csv"));
        let mut body = header.clone();
        for sample in rows {
            for name in &numeric_names {
                match sample.numeric.get(name) {
                    Some(v) => body.push_str(&v.to_string()),
                    None => body.push_str("NaN"),
                }
                body.push(',');
            }
            for name in &categorical_names {
                let token = sample.categorical.get(name).map(String::as_str).unwrap_or("");
                body.push_str(&csv_escape(token));
                body.push(',');
            }
            body.push_str(&sample.remembrance.to_string());
            body.push(',');
            body.push_str(&sample.label.to_string());
            body.push_str("\r\n");
        }
        std::fs::write(&path, body.as_bytes()).map_err(|e| io_err(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
