use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fsr::{counts_to_force, fsr_adc, FsrDividerConfig};
use super::signature::{check_mass, SignatureTable};
use crate::error::{Error, Result};
use crate::posture::{PostureLabel, N_SENSORS};

/// One timestamped reading of the ten sensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub timestamp_ms: u64,
    pub counts: [u16; N_SENSORS],
    /// Forces recovered from the counts through the divider model.
    pub forces_kg: [f64; N_SENSORS],
    /// Ground truth for scheduled sittings. Stand-up gaps between sittings
    /// are unlabeled.
    pub label: Option<PostureLabel>,
}

impl SensorFrame {
    pub fn from_forces(
        timestamp_ms: u64,
        forces_kg: &[f64; N_SENSORS],
        label: Option<PostureLabel>,
        cfg: &FsrDividerConfig,
    ) -> Result<Self> {
        let mut counts = [0u16; N_SENSORS];
        for (c, &f) in counts.iter_mut().zip(forces_kg) {
            *c = fsr_adc(f, cfg)?;
        }
        Ok(Self::from_counts(timestamp_ms, counts, label, cfg))
    }

    pub fn from_counts(
        timestamp_ms: u64,
        counts: [u16; N_SENSORS],
        label: Option<PostureLabel>,
        cfg: &FsrDividerConfig,
    ) -> Self {
        let mut forces_kg = [0.0; N_SENSORS];
        for (f, &c) in forces_kg.iter_mut().zip(&counts) {
            *f = counts_to_force(c, cfg);
        }
        Self { timestamp_ms, counts, forces_kg, label }
    }

    pub fn total_force_kg(&self) -> f64 {
        self.forces_kg.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOptions {
    /// Empty-seat time after each scheduled sitting while the subject stands.
    pub gap_s: f64,
    pub start_ms: u64,
    pub divider: FsrDividerConfig,
    pub signatures: SignatureTable,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            gap_s: 5.0,
            start_ms: 0,
            divider: FsrDividerConfig::default(),
            signatures: SignatureTable::default(),
        }
    }
}

/// Synthesizes the collection protocol for one subject: each scheduled
/// posture is held for its duration, followed by an empty-seat gap while the
/// subject stands up.
pub fn synth_session(
    schedule: &[(PostureLabel, f64)],
    subject_mass_kg: f64,
    rate_hz: f64,
    seed: u64,
) -> Result<Vec<SensorFrame>> {
    synth_session_with(schedule, subject_mass_kg, rate_hz, seed, &SessionOptions::default())
}

pub fn synth_session_with(
    schedule: &[(PostureLabel, f64)],
    subject_mass_kg: f64,
    rate_hz: f64,
    seed: u64,
    opts: &SessionOptions,
) -> Result<Vec<SensorFrame>> {
    if schedule.is_empty() {
        return Err(Error::InvalidInput("posture schedule is empty".into()));
    }
    if !(1.0..=100.0).contains(&rate_hz) {
        return Err(Error::InvalidInput(format!("rate {rate_hz} Hz outside 1..=100")));
    }
    if let Some((p, d)) = schedule.iter().find(|(_, d)| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::InvalidInput(format!("duration {d} s for {p} must be positive")));
    }
    if !(opts.gap_s.is_finite() && opts.gap_s >= 0.0) {
        return Err(Error::InvalidInput(format!("gap {} s must be non-negative", opts.gap_s)));
    }
    check_mass(subject_mass_kg)?;
    opts.divider.validate()?;

    let step_ms = (1000.0 / rate_hz).round() as u64;
    let gap_frames = (opts.gap_s * rate_hz).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut frames = Vec::new();
    let mut t = opts.start_ms;
    let zero = [0.0; N_SENSORS];

    for &(posture, duration_s) in schedule {
        let sig = opts.signatures.get(posture);
        let tilt = sig.draw_tilt(&mut rng);
        let n = ((duration_s * rate_hz).round() as usize).max(1);
        for _ in 0..n {
            let forces = sig.sample_with_tilt(
                subject_mass_kg,
                opts.signatures.reference_mass_kg,
                tilt,
                &mut rng,
            );
            frames.push(SensorFrame::from_forces(t, &forces, Some(posture), &opts.divider)?);
            t += step_ms;
        }
        for _ in 0..gap_frames {
            frames.push(SensorFrame::from_forces(t, &zero, None, &opts.divider)?);
            t += step_ms;
        }
    }
    Ok(frames)
}

/// The eight-class collection order: empty seat first, then the seven
/// sittings, each held for `seconds`.
pub fn collection_schedule(seconds: f64) -> Vec<(PostureLabel, f64)> {
    PostureLabel::ALL.iter().map(|&p| (p, seconds)).collect()
}
