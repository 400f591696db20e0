use serde::{Deserialize, Serialize};

use super::agreement::{bland_altman, AgreementReport};
use super::chain::{process_chain, Bands, ChainConfig, ChainStages, Gains, PgaGain};
use super::peaks::{detect_peaks_with, DetectorConfig};
use super::rate::{heart_rate, hold_at, HrPoint};
use super::synth::{synth_ppg, HrProfile, NoiseSpec};
use super::trace::PpgTrace;
use crate::error::{Error, Result};

/// One heart-rate pipeline: front-end chain, beat detector and rate window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub gains: Gains,
    pub bands: Bands,
    pub detector: DetectorConfig,
    pub hr_window_s: f64,
}

impl PipelineParams {
    pub fn main() -> Self {
        Self {
            gains: Gains::default(),
            bands: Bands::default(),
            detector: DetectorConfig::default(),
            hr_window_s: 10.0,
        }
    }

    /// Independent comparison pipeline: narrower band, looser detector.
    pub fn reference() -> Self {
        Self {
            gains: Gains { amp: 20.0, pga: PgaGain::X2 },
            bands: Bands { hp_hz: 0.2, bp_low_hz: 0.7, bp_high_hz: 3.5, lp_hz: 12.0 },
            detector: DetectorConfig {
                refractory_s: 0.25,
                threshold_frac: 0.5,
                max_window_s: 2.0,
                local_half_width_s: 0.08,
            },
            hr_window_s: 10.0,
        }
    }

    pub fn run(&self, raw: &PpgTrace) -> Result<(ChainStages, Vec<HrPoint>)> {
        let stages = process_chain(raw, self.gains, self.bands)?;
        let peaks = detect_peaks_with(&stages.stage_d, &self.detector)?;
        let hr = heart_rate(&peaks, raw.fs_hz, self.hr_window_s)?;
        Ok((stages, hr))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationConfig {
    pub duration_s: f64,
    pub fs_hz: f64,
    pub profile: HrProfile,
    pub noise: NoiseSpec,
    /// Overrides `noise.white_sd` when set.
    pub snr_db: Option<f64>,
    pub seed: u64,
    /// Paired comparison grid spacing.
    pub grid_step_s: f64,
    /// Pairs start after this long, once both rate windows have filled.
    pub settle_s: f64,
    pub main: PipelineParams,
    pub reference: PipelineParams,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            duration_s: 300.0,
            fs_hz: ChainConfig::default().fs_hz,
            profile: HrProfile::default(),
            noise: NoiseSpec::default(),
            snr_db: Some(10.0),
            seed: 7,
            grid_step_s: 1.0,
            settle_s: 12.0,
            main: PipelineParams::main(),
            reference: PipelineParams::reference(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidationOutcome {
    pub raw: PpgTrace,
    pub stages: ChainStages,
    pub main_hr: Vec<HrPoint>,
    pub reference_hr: Vec<HrPoint>,
    /// `(t_s, main_bpm, reference_bpm, true_bpm)` on the comparison grid.
    pub pairs: Vec<(f64, f64, f64, f64)>,
    pub report: AgreementReport,
}

/// Feeds one synthetic trace to both pipelines and compares their rate
/// series on a common time grid.
pub fn run_validation(cfg: &ValidationConfig) -> Result<ValidationOutcome> {
    let mut noise = cfg.noise;
    if let Some(snr) = cfg.snr_db {
        noise = noise.with_snr(snr);
    }
    let profile = cfg.profile.clone();
    let raw = synth_ppg(&move |t| profile.bpm_at(t), cfg.duration_s, cfg.fs_hz, &noise, cfg.seed)?;
    let (stages, main_hr) = cfg.main.run(&raw)?;
    let (_, reference_hr) = cfg.reference.run(&raw)?;

    if !(cfg.grid_step_s > 0.0) {
        return Err(Error::InvalidConfig("grid step must be positive".into()));
    }
    let mut pairs = Vec::new();
    let mut t = cfg.settle_s;
    while t <= cfg.duration_s {
        if let (Some(m), Some(r)) = (hold_at(&main_hr, t), hold_at(&reference_hr, t)) {
            pairs.push((t, m, r, cfg.profile.bpm_at(t)));
        }
        t += cfg.grid_step_s;
    }
    let main: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let reference: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    let report = bland_altman(&main, &reference)?;
    Ok(ValidationOutcome { raw, stages, main_hr, reference_hr, pairs, report })
}
