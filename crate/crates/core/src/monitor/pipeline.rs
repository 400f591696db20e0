use std::collections::VecDeque;
use std::sync::Arc;

use super::debounce::{check_model, Debounced, Debouncer};
use super::session::ClassifiedFrame;
use super::wire::{ppg_from_wire, WireFrame};
use crate::classify::TrainedModel;
use crate::error::{Error, Result};
use crate::posture::PostureLabel;
use crate::ppg::{detect_peaks_with, heart_rate, ChainConfig, PipelineParams, PpgTrace, StreamingChain};

pub const DEFAULT_PPG_FS_HZ: f64 = 100.0;
const BUFFER_S: f64 = 12.0;
/// Seconds of filtered signal needed before a rate is reported.
const MIN_SPAN_S: f64 = 4.0;
/// New samples between re-estimates.
const EVAL_EVERY_S: f64 = 0.5;

/// Streaming heart rate from PPG blocks: the main chain feeds a rolling
/// buffer, and the beat detector is rerun on it every half second.
#[derive(Debug, Clone)]
pub struct PpgTracker {
    chain: StreamingChain,
    params: PipelineParams,
    fs_hz: f64,
    buf: VecDeque<f64>,
    pending: usize,
    bpm: Option<f64>,
}

impl PpgTracker {
    pub fn new(fs_hz: f64) -> Result<Self> {
        let params = PipelineParams::main();
        let chain = StreamingChain::new(&ChainConfig { fs_hz, gains: params.gains, bands: params.bands })?;
        Ok(Self { chain, params, fs_hz, buf: VecDeque::new(), pending: 0, bpm: None })
    }

    pub fn bpm(&self) -> Option<f64> {
        self.bpm
    }

    pub fn push_block(&mut self, samples: impl IntoIterator<Item = f64>) -> Option<f64> {
        let cap = (BUFFER_S * self.fs_hz) as usize;
        for x in samples {
            if self.buf.len() == cap {
                self.buf.pop_front();
            }
            self.buf.push_back(self.chain.push(x).d);
            self.pending += 1;
        }
        if self.pending as f64 >= EVAL_EVERY_S * self.fs_hz && self.buf.len() as f64 >= MIN_SPAN_S * self.fs_hz {
            self.pending = 0;
            if let Some(b) = self.estimate() {
                self.bpm = Some(b);
            }
        }
        self.bpm
    }

    fn estimate(&self) -> Option<f64> {
        let trace = PpgTrace::new(self.fs_hz, self.buf.iter().copied().collect()).ok()?;
        let peaks = detect_peaks_with(&trace, &self.params.detector).ok()?;
        heart_rate(&peaks, self.fs_hz, self.params.hr_window_s).ok()?.last().map(|p| p.bpm)
    }
}

/// Ordered per-session processing: classify, debounce, track heart rate.
#[derive(Debug, Clone)]
pub struct SessionPipeline {
    model: Arc<TrainedModel>,
    debouncer: Debouncer,
    ppg: PpgTracker,
    last_t: Option<u64>,
    manual: Option<PostureLabel>,
}

impl SessionPipeline {
    pub fn new(model: Arc<TrainedModel>, debounce_k: usize, ppg_fs_hz: f64) -> Result<Self> {
        check_model(&model)?;
        Ok(Self {
            model,
            debouncer: Debouncer::new(debounce_k)?,
            ppg: PpgTracker::new(ppg_fs_hz)?,
            last_t: None,
            manual: None,
        })
    }

    pub fn set_manual_label(&mut self, label: Option<PostureLabel>) {
        self.manual = label;
    }

    pub fn manual_label(&self) -> Option<PostureLabel> {
        self.manual
    }

    /// Rejects a frame older than its predecessor without touching state.
    pub fn process(&mut self, f: &WireFrame) -> Result<(ClassifiedFrame, bool)> {
        if let Some(last) = self.last_t {
            if f.timestamp_ms < last {
                return Err(Error::InvalidInput(format!("frame at {} ms precedes {last} ms", f.timestamp_ms)));
            }
        }
        self.last_t = Some(f.timestamp_ms);
        let raw = self.model.predict_counts(&f.counts);
        let Debounced { posture, conf, changed } = self.debouncer.push(raw);
        let bpm = self.ppg.push_block(f.ppg.iter().map(|&s| ppg_from_wire(s)));
        let frame = ClassifiedFrame {
            t: f.timestamp_ms,
            counts: f.counts,
            raw: raw.label,
            raw_conf: raw.confidence,
            posture,
            conf,
            bpm,
            manual: self.manual,
        };
        Ok((frame, changed))
    }
}
