use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::trace::PpgTrace;
use crate::error::{Error, Result};

/// Peak of the pulsatile component at the TIA output, in volts.
pub const PULSE_AMPLITUDE: f64 = 0.02;

const SYSTOLIC_PHASE: f64 = 0.2;
const SYSTOLIC_WIDTH: f64 = 0.07;
const DICROTIC_PHASE: f64 = 0.5;
const DICROTIC_WIDTH: f64 = 0.1;
const DICROTIC_RATIO: f64 = 0.4;

/// Unit pulse as a function of beat phase, periodic with period 1.
fn pulse_shape(phase: f64) -> f64 {
    let frac = phase.rem_euclid(1.0);
    let bump = |center: f64, width: f64| -> f64 {
        (-1..=1)
            .map(|k| {
                let z = (frac - center + k as f64) / width;
                (-0.5 * z * z).exp()
            })
            .sum()
    };
    bump(SYSTOLIC_PHASE, SYSTOLIC_WIDTH) + DICROTIC_RATIO * bump(DICROTIC_PHASE, DICROTIC_WIDTH)
}

/// Variance of the pulsatile component over one beat, in V².
pub fn pulse_variance() -> f64 {
    let n = 20_000;
    let values: Vec<f64> = (0..n).map(|i| PULSE_AMPLITUDE * pulse_shape(i as f64 / n as f64)).collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub dc_offset: f64,
    pub drift_hz: f64,
    pub drift_amp: f64,
    pub white_sd: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self { dc_offset: 1.0, drift_hz: 0.15, drift_amp: 0.01, white_sd: 0.0 }
    }
}

impl NoiseSpec {
    pub fn clean() -> Self {
        Self { dc_offset: 0.0, drift_hz: 0.0, drift_amp: 0.0, white_sd: 0.0 }
    }

    /// White-noise SD giving `snr_db` against the pulsatile component.
    pub fn white_sd_for_snr(snr_db: f64) -> f64 {
        (pulse_variance() / 10f64.powf(snr_db / 10.0)).sqrt()
    }

    pub fn with_snr(mut self, snr_db: f64) -> Self {
        self.white_sd = Self::white_sd_for_snr(snr_db);
        self
    }
}

/// Heart rate over time: a baseline, a slow sinusoidal swing and optional
/// step changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrProfile {
    pub base_bpm: f64,
    pub swing_bpm: f64,
    pub swing_period_s: f64,
    #[serde(default)]
    pub steps: Vec<(f64, f64)>,
}

impl HrProfile {
    pub fn constant(bpm: f64) -> Self {
        Self { base_bpm: bpm, swing_bpm: 0.0, swing_period_s: 60.0, steps: Vec::new() }
    }

    pub fn bpm_at(&self, t_s: f64) -> f64 {
        let swing = if self.swing_bpm != 0.0 {
            self.swing_bpm * (2.0 * PI * t_s / self.swing_period_s).sin()
        } else {
            0.0
        };
        let steps: f64 = self.steps.iter().filter(|(at, _)| t_s >= *at).map(|(_, d)| d).sum();
        self.base_bpm + swing + steps
    }
}

impl Default for HrProfile {
    fn default() -> Self {
        Self { base_bpm: 75.0, swing_bpm: 15.0, swing_period_s: 120.0, steps: vec![(150.0, 8.0)] }
    }
}

/// Synthesizes a raw PPG trace: one systolic pulse per cardiac period (with
/// a dicrotic wave), a DC level, sinusoidal baseline drift and white noise.
/// Ground-truth peaks sit at the systolic phase of every beat.
pub fn synth_ppg(
    hr_profile: &dyn Fn(f64) -> f64,
    duration_s: f64,
    fs_hz: f64,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<PpgTrace> {
    if !(fs_hz >= 50.0) {
        return Err(Error::InvalidInput(format!("sample rate {fs_hz} Hz below 50 Hz")));
    }
    if !(duration_s > 0.0) {
        return Err(Error::InvalidInput(format!("duration {duration_s} s must be positive")));
    }
    let n = (duration_s * fs_hz).round() as usize;
    let hr: Vec<f64> = (0..n).map(|i| hr_profile(i as f64 / fs_hz)).collect();
    if let Some((i, bad)) = hr.iter().enumerate().find(|(_, v)| !(30.0..=220.0).contains(*v)) {
        return Err(Error::InvalidInput(format!(
            "heart rate {bad} bpm at t = {} s outside 30..=220",
            i as f64 / fs_hz
        )));
    }
    let white = Normal::new(0.0, noise.white_sd.max(0.0))
        .map_err(|e| Error::InvalidInput(format!("white noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Beat phase by trapezoidal integration of beats per second.
    let mut phase = vec![0.0; n];
    for i in 1..n {
        phase[i] = phase[i - 1] + (hr[i - 1] + hr[i]) / 2.0 / 60.0 / fs_hz;
    }

    let mut peaks = Vec::new();
    let mut beat = 0.0;
    for i in 1..n {
        let target = beat + SYSTOLIC_PHASE;
        if phase[i] >= target {
            let frac = (target - phase[i - 1]) / (phase[i] - phase[i - 1]);
            let idx = (i as f64 - 1.0 + frac).round() as usize;
            if idx < n {
                peaks.push(idx);
            }
            beat += 1.0;
        }
    }

    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / fs_hz;
            let drift = noise.drift_amp * (2.0 * PI * noise.drift_hz * t).sin();
            let w = if noise.white_sd > 0.0 { white.sample(&mut rng) } else { 0.0 };
            noise.dc_offset + PULSE_AMPLITUDE * pulse_shape(phase[i]) + drift + w
        })
        .collect();

    let trace = PpgTrace { fs_hz, samples, ground_truth_peaks: Some(peaks) };
    trace.validate()?;
    Ok(trace)
}
