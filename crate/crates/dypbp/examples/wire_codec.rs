//! Frame and stream-decode Bitcoin wire messages, including recovery from
//! a corrupt frame by scanning for the next magic.
//!
//! Run: cargo run --example wire_codec

use dypbp::sensor::wire::{
    build_version, encode_message, nonce_payload, parse_version, DecodeEvent, MessageDecoder,
    VersionPayload, MAINNET_MAGIC,
};

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect::<Vec<_>>().join(" ")
}

fn main() {
    let version = VersionPayload {
        protocol_version: 70016,
        services: 0,
        timestamp: 1_700_000_000,
        nonce: 0x1234_5678,
        user_agent: "/dypbp:0.1.0/".to_owned(),
        start_height: 840_000,
        relay: false,
    };
    let version_frame = encode_message("version", &build_version(&version), MAINNET_MAGIC).unwrap();
    println!("version frame: {} bytes", version_frame.len());
    println!("  header: {}", hex(&version_frame[..24]));

    let verack = encode_message("verack", &[], MAINNET_MAGIC).unwrap();
    // The famous empty-payload checksum: first 4 bytes of sha256(sha256("")).
    println!("  verack checksum: {}", hex(&verack[20..24]));

    let mut ping = encode_message("ping", &nonce_payload(7), MAINNET_MAGIC).unwrap();
    ping[30] ^= 0xff; // flip a payload bit in transit

    let pong = encode_message("pong", &nonce_payload(7), MAINNET_MAGIC).unwrap();

    // Stream all four frames (one corrupted) through the decoder in small
    // chunks, like a socket would deliver them.
    let stream: Vec<u8> = [version_frame, verack, ping, pong].concat();
    let mut decoder = MessageDecoder::new(MAINNET_MAGIC);
    let mut offset = 0;
    println!("\ndecoding a {}-byte stream in 100-byte reads:", stream.len());
    while offset < stream.len() || decoder.buffered() > 0 {
        if offset < stream.len() {
            let end = (offset + 100).min(stream.len());
            decoder.feed(&stream[offset..end]);
            offset = end;
        }
        loop {
            match decoder.poll() {
                DecodeEvent::Message(m) => {
                    print!("  message {:<8} ({} bytes)", m.command, m.payload.len());
                    if m.command == "version" {
                        let peer = parse_version(&m.payload).unwrap();
                        print!("  from {} at height {}", peer.user_agent, peer.start_height);
                    }
                    println!();
                }
                DecodeEvent::Corrupt { reason, skipped } => {
                    println!("  corrupt frame ({reason}), resynced after {skipped} bytes");
                }
                DecodeEvent::NeedMoreBytes => break,
            }
        }
        if offset >= stream.len() && decoder.poll() == DecodeEvent::NeedMoreBytes {
            break;
        }
    }
}
