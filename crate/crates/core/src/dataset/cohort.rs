use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::sensemodel::{collection_schedule, synth_session_with, SensorFrame, SessionOptions};

/// Several subjects each running the full collection protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub masses_kg: Vec<f64>,
    pub seconds_per_posture: f64,
    pub rate_hz: f64,
    pub gap_s: f64,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        Self {
            masses_kg: vec![65.0, 58.0, 72.0, 70.0, 50.0],
            seconds_per_posture: 60.0,
            rate_hz: 3.0,
            gap_s: 5.0,
            seed: 0,
        }
    }
}

/// Offset between subjects' session clocks.
pub const SUBJECT_SPACING_MS: u64 = 3_600_000;

/// One session per subject plus the dataset of their labeled frames.
/// Subject `i` uses seed `seed + i` and starts at `i` hours.
pub fn synth_cohort(spec: &CohortSpec) -> Result<(LabeledDataset, Vec<Vec<SensorFrame>>)> {
    if spec.masses_kg.is_empty() {
        return Err(Error::InvalidConfig("cohort has no subjects".into()));
    }
    let schedule = collection_schedule(spec.seconds_per_posture);
    let mut sessions = Vec::with_capacity(spec.masses_kg.len());
    let mut ds = LabeledDataset::new(format!(
        "synthetic cohort: {} subjects, {} s/posture at {} Hz, seed {}",
        spec.masses_kg.len(),
        spec.seconds_per_posture,
        spec.rate_hz,
        spec.seed
    ));
    for (i, &mass) in spec.masses_kg.iter().enumerate() {
        let opts = SessionOptions {
            gap_s: spec.gap_s,
            start_ms: i as u64 * SUBJECT_SPACING_MS,
            ..SessionOptions::default()
        };
        let frames = synth_session_with(&schedule, mass, spec.rate_hz, spec.seed.wrapping_add(i as u64), &opts)?;
        ds.extend(&LabeledDataset::from_frames(&frames, ""));
        sessions.push(frames);
    }
    Ok((ds, sessions))
}
