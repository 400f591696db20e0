//! Ingest framing. All integers are little-endian.
//!
//! Frame: `0x5C, version, timestamp_ms u64, counts 10 x u16, n u16,
//! n x i16 PPG samples`, so a frame is `32 + 2n` bytes.
//!
//! On connect the server sends a hello: `0xAD, len u8, session id`.
//! Every frame is answered by an 11-byte ack: `0xAC, status, label u8
//! (0xFF when none), timestamp_ms u64`.

use thiserror::Error;

use crate::posture::{PostureLabel, N_SENSORS};

pub const FRAME_MAGIC: u8 = 0x5C;
pub const WIRE_VERSION: u8 = 1;
pub const FRAME_HEADER_LEN: usize = 2 + 8 + 2 * N_SENSORS + 2;
pub const MAX_COUNT: u16 = 4095;
/// Volts per PPG sample LSB.
pub const PPG_LSB_V: f64 = 1e-4;

pub const HELLO_MAGIC: u8 = 0xAD;
pub const ACK_MAGIC: u8 = 0xAC;
pub const ACK_LEN: usize = 11;
const NO_LABEL: u8 = 0xFF;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireFrame {
    pub timestamp_ms: u64,
    pub counts: [u16; N_SENSORS],
    /// Empty when the frame carries no PPG block.
    pub ppg: Vec<i16>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    /// The stream cannot be resynchronized.
    #[error("framing error: byte {found:#04x} where {expected} was expected")]
    Framing { found: u8, expected: &'static str },
    #[error("incomplete frame: {have} of {need} bytes")]
    Incomplete { have: usize, need: usize },
    /// The frame is well-formed and `frame_len` bytes long, so the reader
    /// can skip it.
    #[error("sensor S{} reads {value}, above {MAX_COUNT}", sensor + 1)]
    Range { sensor: usize, value: u16, timestamp_ms: u64, frame_len: usize },
}

pub fn frame_len(ppg_samples: usize) -> usize {
    FRAME_HEADER_LEN + 2 * ppg_samples
}

pub fn encode_frame_into(f: &WireFrame, out: &mut Vec<u8>) {
    out.reserve(frame_len(f.ppg.len()));
    out.push(FRAME_MAGIC);
    out.push(WIRE_VERSION);
    out.extend_from_slice(&f.timestamp_ms.to_le_bytes());
    for c in &f.counts {
        out.extend_from_slice(&c.to_le_bytes());
    }
    let n = u16::try_from(f.ppg.len()).expect("PPG block longer than u16::MAX samples");
    out.extend_from_slice(&n.to_le_bytes());
    for s in &f.ppg {
        out.extend_from_slice(&s.to_le_bytes());
    }
}

pub fn encode_frame(f: &WireFrame) -> Vec<u8> {
    let mut out = Vec::new();
    encode_frame_into(f, &mut out);
    out
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

/// Decodes the frame at the start of `bytes`, returning it with the number
/// of bytes it occupied. Nothing past the frame's own end is examined.
pub fn decode_frame(bytes: &[u8]) -> Result<(WireFrame, usize), WireError> {
    let need_header = |have| WireError::Incomplete { have, need: FRAME_HEADER_LEN };
    let first = *bytes.first().ok_or(need_header(0))?;
    if first != FRAME_MAGIC {
        return Err(WireError::Framing { found: first, expected: "frame magic 0x5c" });
    }
    if let Some(&v) = bytes.get(1) {
        if v != WIRE_VERSION {
            return Err(WireError::Framing { found: v, expected: "wire version 1" });
        }
    }
    if bytes.len() < FRAME_HEADER_LEN {
        return Err(need_header(bytes.len()));
    }
    let timestamp_ms = u64::from_le_bytes(bytes[2..10].try_into().unwrap());
    let n = u16_at(bytes, FRAME_HEADER_LEN - 2) as usize;
    let total = frame_len(n);
    if bytes.len() < total {
        return Err(WireError::Incomplete { have: bytes.len(), need: total });
    }
    let mut counts = [0u16; N_SENSORS];
    for (k, c) in counts.iter_mut().enumerate() {
        *c = u16_at(bytes, 10 + 2 * k);
    }
    if let Some(sensor) = counts.iter().position(|&c| c > MAX_COUNT) {
        return Err(WireError::Range { sensor, value: counts[sensor], timestamp_ms, frame_len: total });
    }
    let ppg = (0..n).map(|i| u16_at(bytes, FRAME_HEADER_LEN + 2 * i) as i16).collect();
    Ok((WireFrame { timestamp_ms, counts, ppg }, total))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum AckStatus {
    Ok = 0,
    Range = 1,
    Overflow = 2,
    /// Sent once before the server closes the connection.
    Framing = 3,
}

impl AckStatus {
    pub fn from_u8(v: u8) -> Option<Self> {
        [AckStatus::Ok, AckStatus::Range, AckStatus::Overflow, AckStatus::Framing].into_iter().find(|s| *s as u8 == v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ack {
    pub status: AckStatus,
    /// Debounced posture after this frame.
    pub label: Option<PostureLabel>,
    pub timestamp_ms: u64,
}

impl Ack {
    pub fn encode(&self) -> [u8; ACK_LEN] {
        let mut out = [0u8; ACK_LEN];
        out[0] = ACK_MAGIC;
        out[1] = self.status as u8;
        out[2] = self.label.map_or(NO_LABEL, |l| l.index() as u8);
        out[3..].copy_from_slice(&self.timestamp_ms.to_le_bytes());
        out
    }

    pub fn decode(b: &[u8; ACK_LEN]) -> Result<Self, WireError> {
        if b[0] != ACK_MAGIC {
            return Err(WireError::Framing { found: b[0], expected: "ack magic 0xac" });
        }
        let status = AckStatus::from_u8(b[1]).ok_or(WireError::Framing { found: b[1], expected: "ack status" })?;
        let label = match b[2] {
            NO_LABEL => None,
            v => Some(PostureLabel::from_index(v as usize).ok_or(WireError::Framing { found: v, expected: "label" })?),
        };
        Ok(Ack { status, label, timestamp_ms: u64::from_le_bytes(b[3..].try_into().unwrap()) })
    }
}

pub fn encode_hello(session_id: &str) -> Vec<u8> {
    let id = session_id.as_bytes();
    let n = id.len().min(255);
    let mut out = vec![HELLO_MAGIC, n as u8];
    out.extend_from_slice(&id[..n]);
    out
}

/// Quantizes a PPG voltage to a wire sample.
pub fn ppg_to_wire(v: f64) -> i16 {
    (v / PPG_LSB_V).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

pub fn ppg_from_wire(s: i16) -> f64 {
    s as f64 * PPG_LSB_V
}
