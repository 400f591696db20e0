use serde::{Deserialize, Serialize};

use super::filter::{Biquad, BiquadState};
use super::trace::PpgTrace;
use crate::error::{Error, Result};

/// Discrete programmable-gain settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PgaGain {
    X1,
    X2,
    X4,
    X8,
}

impl PgaGain {
    pub const ALL: [PgaGain; 4] = [PgaGain::X1, PgaGain::X2, PgaGain::X4, PgaGain::X8];

    pub fn factor(self) -> f64 {
        match self {
            PgaGain::X1 => 1.0,
            PgaGain::X2 => 2.0,
            PgaGain::X4 => 4.0,
            PgaGain::X8 => 8.0,
        }
    }

    pub fn from_factor(factor: f64) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.factor() == factor)
    }
}

/// Largest gain that keeps `peak_v` at or below 80 % of `full_scale_v`.
pub fn select_pga(peak_v: f64, full_scale_v: f64) -> PgaGain {
    PgaGain::ALL
        .into_iter()
        .rev()
        .find(|g| g.factor() * peak_v.abs() <= 0.8 * full_scale_v)
        .unwrap_or(PgaGain::X1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    /// Non-inverting amplifier after DC removal.
    pub amp: f64,
    pub pga: PgaGain,
}

impl Default for Gains {
    fn default() -> Self {
        Self { amp: 10.0, pga: PgaGain::X4 }
    }
}

/// Corner frequencies in Hz. Must satisfy
/// `0 < hp < bp_low < bp_high <= lp < fs / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bands {
    pub hp_hz: f64,
    pub bp_low_hz: f64,
    pub bp_high_hz: f64,
    pub lp_hz: f64,
}

impl Default for Bands {
    fn default() -> Self {
        Self { hp_hz: 0.3, bp_low_hz: 0.5, bp_high_hz: 5.0, lp_hz: 15.0 }
    }
}

impl Bands {
    pub fn validate(&self, fs_hz: f64) -> Result<()> {
        let ok = 0.0 < self.hp_hz
            && self.hp_hz < self.bp_low_hz
            && self.bp_low_hz < self.bp_high_hz
            && self.bp_high_hz <= self.lp_hz
            && self.lp_hz < fs_hz / 2.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "band edges must satisfy 0 < hp ({}) < bp_low ({}) < bp_high ({}) <= lp ({}) < fs/2 ({})",
                self.hp_hz,
                self.bp_low_hz,
                self.bp_high_hz,
                self.lp_hz,
                fs_hz / 2.0
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub fs_hz: f64,
    pub gains: Gains,
    pub bands: Bands,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { fs_hz: 100.0, gains: Gains::default(), bands: Bands::default() }
    }
}

/// Outputs of the four stages for one input sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageSample {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Per-stream filter state. One instance per stream, fed in sample order.
#[derive(Debug, Clone)]
pub struct StreamingChain {
    gains: Gains,
    dcr: BiquadState,
    bp_high_pass: BiquadState,
    bp_low_pass: BiquadState,
    lpf: BiquadState,
}

impl StreamingChain {
    pub fn new(cfg: &ChainConfig) -> Result<Self> {
        cfg.bands.validate(cfg.fs_hz)?;
        if !(cfg.gains.amp.is_finite() && cfg.gains.amp > 0.0) {
            return Err(Error::InvalidConfig(format!("amplifier gain {} must be positive", cfg.gains.amp)));
        }
        let fs = cfg.fs_hz;
        let b = cfg.bands;
        Ok(Self {
            gains: cfg.gains,
            dcr: BiquadState::new(Biquad::butterworth_highpass(b.hp_hz, fs)),
            bp_high_pass: BiquadState::new(Biquad::butterworth_highpass(b.bp_low_hz, fs)),
            bp_low_pass: BiquadState::new(Biquad::butterworth_lowpass(b.bp_high_hz, fs)),
            lpf: BiquadState::new(Biquad::butterworth_lowpass(b.lp_hz, fs)),
        })
    }

    pub fn set_pga(&mut self, pga: PgaGain) {
        self.gains.pga = pga;
    }

    pub fn push(&mut self, x: f64) -> StageSample {
        let a = x;
        let b = self.gains.amp * self.dcr.process(a);
        let c = self.bp_low_pass.process(self.bp_high_pass.process(b));
        let d = self.gains.pga.factor() * self.lpf.process(c);
        StageSample { a, b, c, d }
    }
}

/// The four waveforms: (a) after the TIA, (b) after DC removal and the first
/// amplifier, (c) after the band-pass, (d) after the 15 Hz low-pass and PGA.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainStages {
    pub stage_a: PpgTrace,
    pub stage_b: PpgTrace,
    pub stage_c: PpgTrace,
    pub stage_d: PpgTrace,
}

impl ChainStages {
    /// Writes the four stages side by side as `stage_a,stage_b,stage_c,stage_d`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["stage_a", "stage_b", "stage_c", "stage_d"])?;
        for i in 0..self.stage_a.len() {
            w.write_record([
                self.stage_a.samples[i].to_string(),
                self.stage_b.samples[i].to_string(),
                self.stage_c.samples[i].to_string(),
                self.stage_d.samples[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs a whole trace through a fresh [`StreamingChain`].
pub fn process_chain(raw: &PpgTrace, gains: Gains, bands: Bands) -> Result<ChainStages> {
    raw.validate()?;
    let mut chain = StreamingChain::new(&ChainConfig { fs_hz: raw.fs_hz, gains, bands })?;
    let n = raw.len();
    let (mut b, mut c, mut d) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for &x in &raw.samples {
        let s = chain.push(x);
        b.push(s.b);
        c.push(s.c);
        d.push(s.d);
    }
    let stage = |samples: Vec<f64>| PpgTrace {
        fs_hz: raw.fs_hz,
        samples,
        ground_truth_peaks: raw.ground_truth_peaks.clone(),
    };
    Ok(ChainStages { stage_a: raw.clone(), stage_b: stage(b), stage_c: stage(c), stage_d: stage(d) })
}
