//! Client side: session stream files, the replay client and a minimal HTTP
//! request helper.

use std::collections::{HashMap, VecDeque};
use std::net::SocketAddr;
use std::path::Path;
use std::time::{Duration, Instant};

use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;

use super::wire::{decode_frame, encode_frame_into, ppg_to_wire, Ack, AckStatus, WireFrame, ACK_LEN, HELLO_MAGIC};
use crate::error::{Error, Result};
use crate::posture::PostureLabel;
use crate::ppg::PpgTrace;
use crate::sensemodel::SensorFrame;

/// Builds wire frames from sensor frames, attaching to each the PPG samples
/// that fall between its timestamp and the next one. Sample 0 of `ppg` is
/// aligned with the first frame.
pub fn wire_frames(frames: &[SensorFrame], ppg: Option<&PpgTrace>) -> Vec<WireFrame> {
    let Some(first) = frames.first() else { return Vec::new() };
    let t0 = first.timestamp_ms;
    let step = frames.windows(2).map(|w| w[1].timestamp_ms - w[0].timestamp_ms).next().unwrap_or(333);
    let sample_at = |t: u64, fs: f64| ((t - t0) as f64 * fs / 1000.0).floor() as usize;
    frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let block = ppg.map(|tr| {
                let end_t = frames.get(i + 1).map_or(f.timestamp_ms + step, |n| n.timestamp_ms);
                let a = sample_at(f.timestamp_ms, tr.fs_hz).min(tr.samples.len());
                let b = sample_at(end_t, tr.fs_hz).min(tr.samples.len());
                tr.samples[a..b].iter().map(|&v| ppg_to_wire(v)).collect()
            });
            WireFrame { timestamp_ms: f.timestamp_ms, counts: f.counts, ppg: block.unwrap_or_default() }
        })
        .collect()
}

pub fn encode_stream(frames: &[WireFrame]) -> Vec<u8> {
    let mut out = Vec::new();
    for f in frames {
        encode_frame_into(f, &mut out);
    }
    out
}

/// Decodes a whole stream; any trailing partial or bad frame is an error.
pub fn decode_stream(bytes: &[u8]) -> Result<Vec<WireFrame>> {
    let mut out = Vec::new();
    let mut at = 0;
    while at < bytes.len() {
        let (f, used) = decode_frame(&bytes[at..])
            .map_err(|e| Error::InvalidInput(format!("frame {} at byte {at}: {e}", out.len())))?;
        out.push(f);
        at += used;
    }
    Ok(out)
}

pub fn write_stream_file(path: &Path, frames: &[WireFrame]) -> Result<()> {
    std::fs::write(path, encode_stream(frames))?;
    Ok(())
}

pub fn read_stream_file(path: &Path) -> Result<Vec<WireFrame>> {
    decode_stream(&std::fs::read(path)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub session_id: String,
    pub sent: usize,
    pub ok: usize,
    pub range: usize,
    pub overflow: usize,
    pub framing: usize,
    /// Frames the server never answered.
    pub unacked: usize,
    /// Debounced label carried by each ok ack, in ack order.
    pub labels: Vec<(u64, PostureLabel)>,
    /// Send-to-ack time of each ok ack.
    pub latencies_ms: Vec<f64>,
}

impl ReplayReport {
    pub fn max_latency_ms(&self) -> f64 {
        self.latencies_ms.iter().copied().fold(0.0, f64::max)
    }

    /// Every frame was either processed or explicitly refused.
    pub fn accounted(&self) -> bool {
        self.unacked == 0 && self.ok + self.range + self.overflow + self.framing == self.sent
    }
}

/// Streams `frames` to an ingest endpoint, paced by their timestamps divided
/// by `speed` (`speed <= 0` sends back to back), then half-closes and
/// collects acks until the server closes the connection.
pub async fn replay(addr: SocketAddr, frames: &[WireFrame], speed: f64) -> Result<ReplayReport> {
    let sock = TcpStream::connect(addr).await?;
    sock.set_nodelay(true)?;
    let (mut rd, mut wr) = sock.into_split();

    let mut head = [0u8; 2];
    rd.read_exact(&mut head).await?;
    if head[0] != HELLO_MAGIC {
        return Err(Error::InvalidInput(format!("expected hello, got byte {:#04x}", head[0])));
    }
    let mut id = vec![0u8; head[1] as usize];
    rd.read_exact(&mut id).await?;
    let session_id = String::from_utf8_lossy(&id).into_owned();

    let acks = tokio::spawn(async move {
        let mut out = Vec::new();
        let mut b = [0u8; ACK_LEN];
        loop {
            match rd.read_exact(&mut b).await {
                Ok(_) => out.push((Ack::decode(&b), Instant::now())),
                Err(_) => return out,
            }
        }
    });

    let mut sent_at: HashMap<u64, VecDeque<Instant>> = HashMap::new();
    let start = Instant::now();
    let t0 = frames.first().map_or(0, |f| f.timestamp_ms);
    let mut buf = Vec::new();
    for f in frames {
        if speed > 0.0 {
            let due = start + Duration::from_secs_f64((f.timestamp_ms - t0) as f64 / 1000.0 / speed);
            tokio::time::sleep_until(due.into()).await;
        }
        buf.clear();
        encode_frame_into(f, &mut buf);
        sent_at.entry(f.timestamp_ms).or_default().push_back(Instant::now());
        if wr.write_all(&buf).await.is_err() {
            break;
        }
    }
    let sent = sent_at.values().map(|q| q.len()).sum();
    let _ = wr.shutdown().await;
    let received = acks.await.map_err(|e| Error::Io(std::io::Error::other(e)))?;

    let mut report = ReplayReport {
        session_id,
        sent,
        ok: 0,
        range: 0,
        overflow: 0,
        framing: 0,
        unacked: 0,
        labels: Vec::new(),
        latencies_ms: Vec::new(),
    };
    for (ack, at) in received {
        let ack = ack.map_err(|e| Error::InvalidInput(format!("bad ack: {e}")))?;
        match ack.status {
            AckStatus::Ok => {
                report.ok += 1;
                if let Some(l) = ack.label {
                    report.labels.push((ack.timestamp_ms, l));
                }
                if let Some(t) = sent_at.get_mut(&ack.timestamp_ms).and_then(|q| q.pop_front()) {
                    report.latencies_ms.push(at.duration_since(t).as_secs_f64() * 1000.0);
                }
            }
            AckStatus::Range => report.range += 1,
            AckStatus::Overflow => report.overflow += 1,
            AckStatus::Framing => report.framing += 1,
        }
    }
    let answered = report.ok + report.range + report.overflow + report.framing;
    report.unacked = sent.saturating_sub(answered);
    Ok(report)
}

/// Sends one HTTP/1.1 request with `Connection: close` and returns the
/// status code and body.
pub async fn http_request(addr: SocketAddr, method: &str, path: &str, json_body: Option<&str>) -> Result<(u16, String)> {
    let mut sock = TcpStream::connect(addr).await?;
    let body = json_body.unwrap_or("");
    let mut req = format!("{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n");
    if json_body.is_some() {
        req.push_str(&format!("Content-Type: application/json\r\nContent-Length: {}\r\n", body.len()));
    }
    req.push_str("\r\n");
    req.push_str(body);
    sock.write_all(req.as_bytes()).await?;
    let mut raw = Vec::new();
    sock.read_to_end(&mut raw).await?;
    let text = String::from_utf8_lossy(&raw);
    let (head, rest) = text
        .split_once("\r\n\r\n")
        .ok_or_else(|| Error::InvalidInput("malformed HTTP response".into()))?;
    let status = head
        .split_whitespace()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::InvalidInput(format!("bad status line in {head:?}")))?;
    let chunked = head.lines().any(|l| l.to_ascii_lowercase().starts_with("transfer-encoding: chunked"));
    let body = if chunked { dechunk(rest)? } else { rest.to_string() };
    Ok((status, body))
}

fn dechunk(mut s: &str) -> Result<String> {
    let mut out = String::new();
    loop {
        let (size, rest) = s.split_once("\r\n").ok_or_else(|| Error::InvalidInput("bad chunk".into()))?;
        let n = usize::from_str_radix(size.trim(), 16).map_err(|_| Error::InvalidInput("bad chunk size".into()))?;
        if n == 0 {
            return Ok(out);
        }
        out.push_str(rest.get(..n).ok_or_else(|| Error::InvalidInput("short chunk".into()))?);
        s = rest[n..].trim_start_matches("\r\n");
    }
}
