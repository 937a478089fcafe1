//! Bitcoin wire-protocol message framing.
//!
//! Every message is a 24-byte header followed by the payload:
//!
//! ```text
//! magic    4 bytes   network constant
//! command  12 bytes  ASCII, zero padded
//! length   4 bytes   little-endian payload size
//! checksum 4 bytes   first 4 bytes of SHA-256(SHA-256(payload))
//! ```
//!
//! [`MessageDecoder`] parses a byte stream incrementally: it reports
//! need-more-bytes on partial frames and, on a corrupt frame, resyncs by
//! scanning forward for the next magic occurrence instead of giving up on
//! the connection.

use sha2::{Digest, Sha256};
use thiserror::Error;

/// Mainnet network magic.
pub const MAINNET_MAGIC: [u8; 4] = [0xf9, 0xbe, 0xb4, 0xd9];

pub const HEADER_LEN: usize = 24;
pub const MAX_COMMAND_LEN: usize = 12;

/// Frames larger than this are treated as corrupt (Bitcoin's own cap is
/// 32 MiB for blocks).
pub const MAX_PAYLOAD_LEN: u32 = 32 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("command {0:?} exceeds {MAX_COMMAND_LEN} chars")]
    CommandTooLong(String),
    #[error("command {0:?} is not printable ASCII")]
    CommandNotAscii(String),
    #[error("payload truncated: {0}")]
    Truncated(&'static str),
    #[error("malformed payload: {0}")]
    Malformed(String),
}

/// One framed message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireMessage {
    pub magic: [u8; 4],
    pub command: String,
    pub payload: Vec<u8>,
}

/// First four bytes of double SHA-256.
pub fn checksum(payload: &[u8]) -> [u8; 4] {
    let first = Sha256::digest(payload);
    let second = Sha256::digest(first);
    [second[0], second[1], second[2], second[3]]
}

/// Frames a command and payload into canonical header + payload bytes.
pub fn encode_message(command: &str, payload: &[u8], magic: [u8; 4]) -> Result<Vec<u8>, WireError> {
    if command.len() > MAX_COMMAND_LEN {
        return Err(WireError::CommandTooLong(command.to_owned()));
    }
    if !command.bytes().all(|b| (0x20..0x7f).contains(&b)) || command.is_empty() {
        return Err(WireError::CommandNotAscii(command.to_owned()));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&magic);
    let mut name = [0u8; MAX_COMMAND_LEN];
    name[..command.len()].copy_from_slice(command.as_bytes());
    out.extend_from_slice(&name);
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&checksum(payload));
    out.extend_from_slice(payload);
    Ok(out)
}

/// Outcome of one decoder poll.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeEvent {
    Message(WireMessage),
    NeedMoreBytes,
    /// A frame failed its checks; `skipped` bytes were dropped while
    /// scanning forward to the next magic candidate.
    Corrupt { reason: String, skipped: usize },
}

/// Incremental frame parser over a raw byte stream.
#[derive(Debug)]
pub struct MessageDecoder {
    magic: [u8; 4],
    buffer: Vec<u8>,
}

impl MessageDecoder {
    pub fn new(magic: [u8; 4]) -> Self {
        Self { magic, buffer: Vec::new() }
    }

    pub fn feed(&mut self, bytes: &[u8]) {
        self.buffer.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    // Drops `from` leading bytes, then everything up to the next possible
    // magic start. Returns the total number of bytes dropped.
    fn resync(&mut self, from: usize) -> usize {
        let mut at = from;
        'scan: while at < self.buffer.len() {
            let window = &self.buffer[at..];
            let check = window.len().min(4);
            if window[..check] == self.magic[..check] {
                break 'scan;
            }
            at += 1;
        }
        self.buffer.drain(..at);
        at
    }

    /// Attempts to parse the next frame from the buffered bytes.
    pub fn poll(&mut self) -> DecodeEvent {
        if self.buffer.len() < 4 {
            if self.buffer[..] != self.magic[..self.buffer.len()] {
                let skipped = self.resync(1);
                return DecodeEvent::Corrupt { reason: "bad magic".into(), skipped };
            }
            return DecodeEvent::NeedMoreBytes;
        }
        if self.buffer[..4] != self.magic {
            let skipped = self.resync(1);
            return DecodeEvent::Corrupt { reason: "bad magic".into(), skipped };
        }
        if self.buffer.len() < HEADER_LEN {
            return DecodeEvent::NeedMoreBytes;
        }

        let mut name_end = 16;
        while name_end > 4 && self.buffer[name_end - 1] == 0 {
            name_end -= 1;
        }
        let command_bytes = &self.buffer[4..name_end];
        let command_ok = command_bytes.iter().all(|b| (0x20..0x7f).contains(b))
            && self.buffer[name_end..16].iter().all(|b| *b == 0);
        let length = u32::from_le_bytes(self.buffer[16..20].try_into().unwrap());
        if !command_ok || length > MAX_PAYLOAD_LEN {
            let skipped = self.resync(1);
            return DecodeEvent::Corrupt { reason: "bad header".into(), skipped };
        }
        let total = HEADER_LEN + length as usize;
        if self.buffer.len() < total {
            return DecodeEvent::NeedMoreBytes;
        }

        let expected: [u8; 4] = self.buffer[20..24].try_into().unwrap();
        let payload = &self.buffer[HEADER_LEN..total];
        if checksum(payload) != expected {
            let skipped = self.resync(1);
            return DecodeEvent::Corrupt { reason: "checksum mismatch".into(), skipped };
        }

        let message = WireMessage {
            magic: self.magic,
            command: String::from_utf8_lossy(command_bytes).into_owned(),
            payload: payload.to_vec(),
        };
        self.buffer.drain(..total);
        DecodeEvent::Message(message)
    }
}

// ---------------------------------------------------------------------------
// Payload helpers for the handful of messages the sensor speaks.

pub fn write_varint(value: u64, out: &mut Vec<u8>) {
    match value {
        0..=0xfc => out.push(value as u8),
        0xfd..=0xffff => {
            out.push(0xfd);
            out.extend_from_slice(&(value as u16).to_le_bytes());
        }
        0x10000..=0xffff_ffff => {
            out.push(0xfe);
            out.extend_from_slice(&(value as u32).to_le_bytes());
        }
        _ => {
            out.push(0xff);
            out.extend_from_slice(&value.to_le_bytes());
        }
    }
}

pub fn read_varint(bytes: &[u8], at: &mut usize) -> Result<u64, WireError> {
    let take = |bytes: &[u8], at: &mut usize, n: usize| -> Result<u64, WireError> {
        if *at + n > bytes.len() {
            return Err(WireError::Truncated("varint"));
        }
        let mut value = 0u64;
        for i in 0..n {
            value |= (bytes[*at + i] as u64) << (8 * i);
        }
        *at += n;
        Ok(value)
    };
    let prefix = *bytes.get(*at).ok_or(WireError::Truncated("varint prefix"))?;
    *at += 1;
    match prefix {
        0xfd => take(bytes, at, 2),
        0xfe => take(bytes, at, 4),
        0xff => take(bytes, at, 8),
        other => Ok(other as u64),
    }
}

fn write_netaddr(services: u64, out: &mut Vec<u8>) {
    out.extend_from_slice(&services.to_le_bytes());
    // IPv4-mapped unspecified address; the sensor never advertises itself.
    let mut ip = [0u8; 16];
    ip[10] = 0xff;
    ip[11] = 0xff;
    out.extend_from_slice(&ip);
    out.extend_from_slice(&0u16.to_be_bytes());
}

/// The fields of a version message the sensor either sends or reads back.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VersionPayload {
    pub protocol_version: i32,
    pub services: u64,
    pub timestamp: i64,
    pub nonce: u64,
    pub user_agent: String,
    pub start_height: i32,
    pub relay: bool,
}

pub fn build_version(fields: &VersionPayload) -> Vec<u8> {
    let mut out = Vec::with_capacity(86 + fields.user_agent.len());
    out.extend_from_slice(&fields.protocol_version.to_le_bytes());
    out.extend_from_slice(&fields.services.to_le_bytes());
    out.extend_from_slice(&fields.timestamp.to_le_bytes());
    write_netaddr(0, &mut out); // addr_recv
    write_netaddr(0, &mut out); // addr_from
    out.extend_from_slice(&fields.nonce.to_le_bytes());
    write_varint(fields.user_agent.len() as u64, &mut out);
    out.extend_from_slice(fields.user_agent.as_bytes());
    out.extend_from_slice(&fields.start_height.to_le_bytes());
    out.push(u8::from(fields.relay));
    out
}

pub fn parse_version(payload: &[u8]) -> Result<VersionPayload, WireError> {
    let need = |at: usize, n: usize| -> Result<(), WireError> {
        if at + n > payload.len() {
            return Err(WireError::Truncated("version"));
        }
        Ok(())
    };
    let mut at = 0usize;
    need(at, 4)?;
    let protocol_version = i32::from_le_bytes(payload[at..at + 4].try_into().unwrap());
    at += 4;
    need(at, 8)?;
    let services = u64::from_le_bytes(payload[at..at + 8].try_into().unwrap());
    at += 8;
    need(at, 8)?;
    let timestamp = i64::from_le_bytes(payload[at..at + 8].try_into().unwrap());
    at += 8;
    need(at, 26 + 26)?;
    at += 26 + 26; // addr_recv, addr_from
    need(at, 8)?;
    let nonce = u64::from_le_bytes(payload[at..at + 8].try_into().unwrap());
    at += 8;
    let ua_len = read_varint(payload, &mut at)? as usize;
    need(at, ua_len)?;
    let user_agent = String::from_utf8_lossy(&payload[at..at + ua_len]).into_owned();
    at += ua_len;
    need(at, 4)?;
    let start_height = i32::from_le_bytes(payload[at..at + 4].try_into().unwrap());
    at += 4;
    // Old peers may omit the relay flag.
    let relay = payload.get(at).copied().unwrap_or(1) != 0;
    Ok(VersionPayload { protocol_version, services, timestamp, nonce, user_agent, start_height, relay })
}

/// Inventory vector types the sensor cares about; witness flags are masked
/// off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvKind {
    Tx,
    Block,
    Other(u32),
}

/// Hex of the hash in conventional display order (byte reversed).
pub fn display_hash_hex(raw: &[u8; 32]) -> String {
    let mut out = String::with_capacity(64);
    for b in raw.iter().rev() {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn parse_inv(payload: &[u8]) -> Result<Vec<(InvKind, String)>, WireError> {
    let mut at = 0usize;
    let count = read_varint(payload, &mut at)?;
    if count > 50_000 {
        return Err(WireError::Malformed(format!("inv count {count} exceeds protocol limit")));
    }
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        if at + 36 > payload.len() {
            return Err(WireError::Truncated("inv entry"));
        }
        let type_id = u32::from_le_bytes(payload[at..at + 4].try_into().unwrap());
        let mut hash = [0u8; 32];
        hash.copy_from_slice(&payload[at + 4..at + 36]);
        at += 36;
        let kind = match type_id & 0x3fff_ffff {
            1 => InvKind::Tx,
            2 => InvKind::Block,
            other => InvKind::Other(other),
        };
        out.push((kind, display_hash_hex(&hash)));
    }
    Ok(out)
}

/// Entry count of an addr/addrv2 payload (the count prefix).
pub fn parse_addr_count(payload: &[u8]) -> Result<u64, WireError> {
    let mut at = 0usize;
    read_varint(payload, &mut at)
}

/// feefilter: little-endian sat/kvB, converted to sat/vB.
pub fn parse_feefilter(payload: &[u8]) -> Result<f64, WireError> {
    if payload.len() < 8 {
        return Err(WireError::Truncated("feefilter"));
    }
    let per_kvb = u64::from_le_bytes(payload[..8].try_into().unwrap());
    Ok(per_kvb as f64 / 1000.0)
}

pub fn nonce_payload(nonce: u64) -> Vec<u8> {
    nonce.to_le_bytes().to_vec()
}

pub fn parse_nonce(payload: &[u8]) -> Result<u64, WireError> {
    if payload.len() < 8 {
        return Err(WireError::Truncated("ping nonce"));
    }
    Ok(u64::from_le_bytes(payload[..8].try_into().unwrap()))
}
