use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MIN_BPM: f64 = 30.0;
const MAX_BPM: f64 = 220.0;

/// Heart rate estimated at a beat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrPoint {
    pub t_s: f64,
    pub bpm: f64,
    /// False when the raw estimate fell outside 30..=220 bpm and was clamped.
    pub in_range: bool,
}

/// At every beat after the first, `60 / mean(inter-beat interval)` over the
/// intervals ending within the trailing `window_s`.
pub fn heart_rate(peaks: &[usize], fs_hz: f64, window_s: f64) -> Result<Vec<HrPoint>> {
    if peaks.len() < 2 {
        return Err(Error::InsufficientData(format!("{} peak(s); need at least 2", peaks.len())));
    }
    if !(fs_hz > 0.0 && window_s > 0.0) {
        return Err(Error::InvalidInput("sample rate and window must be positive".into()));
    }
    let times: Vec<f64> = peaks.iter().map(|&p| p as f64 / fs_hz).collect();
    let mut out = Vec::with_capacity(times.len() - 1);
    let mut first = 1;
    for k in 1..times.len() {
        let t = times[k];
        while first < k && times[first] <= t - window_s {
            first += 1;
        }
        let intervals = &times[first - 1..=k];
        let mean_ibi = (intervals[intervals.len() - 1] - intervals[0]) / (intervals.len() - 1) as f64;
        let raw = 60.0 / mean_ibi;
        let bpm = raw.clamp(MIN_BPM, MAX_BPM);
        out.push(HrPoint { t_s: t, bpm, in_range: bpm == raw });
    }
    Ok(out)
}

/// Zero-order hold: the latest estimate at or before `t_s`.
pub fn hold_at(series: &[HrPoint], t_s: f64) -> Option<f64> {
    let idx = series.partition_point(|p| p.t_s <= t_s);
    idx.checked_sub(1).map(|i| series[i].bpm)
}
