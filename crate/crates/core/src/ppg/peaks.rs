use serde::{Deserialize, Serialize};

use super::trace::PpgTrace;
use crate::error::{Error, Result};

/// Adaptive-threshold beat detector settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Minimum spacing between beats.
    pub refractory_s: f64,
    /// A peak must reach this fraction of the surrounding maximum.
    pub threshold_frac: f64,
    /// Span of the rolling maximum the threshold is taken from, centred on
    /// the candidate.
    pub max_window_s: f64,
    /// A peak must be the maximum within this half-width.
    pub local_half_width_s: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self { refractory_s: 0.3, threshold_frac: 0.6, max_window_s: 3.0, local_half_width_s: 0.1 }
    }
}

pub fn detect_peaks(signal: &PpgTrace, refractory_s: f64) -> Result<Vec<usize>> {
    detect_peaks_with(signal, &DetectorConfig { refractory_s, ..DetectorConfig::default() })
}

/// Returns strictly increasing indices of local maxima that clear
/// `threshold_frac` of the rolling maximum. Within one refractory period only
/// the larger peak survives.
pub fn detect_peaks_with(signal: &PpgTrace, cfg: &DetectorConfig) -> Result<Vec<usize>> {
    signal.validate()?;
    let fs = signal.fs_hz;
    let x = &signal.samples;
    let n = x.len();
    if (n as f64) < 2.0 * fs {
        return Err(Error::InsufficientData(format!(
            "{n} samples is shorter than 2 s at {fs} Hz"
        )));
    }
    let half = ((cfg.local_half_width_s * fs).round() as usize).max(1);
    let span = ((cfg.max_window_s * fs / 2.0).round() as usize).max(1);
    let refractory = (cfg.refractory_s * fs).ceil() as usize;

    let mut peaks: Vec<usize> = Vec::new();
    for i in half..n.saturating_sub(half) {
        let v = x[i];
        // First sample of a plateau wins.
        if x[i - half..i].iter().any(|&u| u >= v) || x[i + 1..=i + half].iter().any(|&u| u > v) {
            continue;
        }
        let lo = i.saturating_sub(span);
        let hi = (i + span).min(n - 1);
        let rolling_max = x[lo..=hi].iter().cloned().fold(f64::MIN, f64::max);
        if rolling_max <= 0.0 || v < cfg.threshold_frac * rolling_max {
            continue;
        }
        match peaks.last_mut() {
            Some(last) if i - *last < refractory => {
                if v > x[*last] {
                    *last = i;
                }
            }
            _ => peaks.push(i),
        }
    }
    Ok(peaks)
}
