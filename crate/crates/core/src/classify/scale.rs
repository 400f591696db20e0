use serde::{Deserialize, Serialize};

use crate::posture::N_SENSORS;

/// Per-feature z-scoring fitted on training rows. Constant features keep
/// unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: [f64; N_SENSORS],
    pub scale: [f64; N_SENSORS],
}

impl Standardizer {
    pub fn identity() -> Self {
        Self { mean: [0.0; N_SENSORS], scale: [1.0; N_SENSORS] }
    }

    pub fn fit(x: &[[f64; N_SENSORS]]) -> Self {
        let n = x.len().max(1) as f64;
        let mut mean = [0.0; N_SENSORS];
        for r in x {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut scale = [0.0; N_SENSORS];
        for r in x {
            for ((s, v), m) in scale.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        for s in &mut scale {
            *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
        }
        Self { mean, scale }
    }

    pub fn apply(&self, x: &[f64; N_SENSORS]) -> [f64; N_SENSORS] {
        let mut out = [0.0; N_SENSORS];
        for k in 0..N_SENSORS {
            out[k] = (x[k] - self.mean[k]) / self.scale[k];
        }
        out
    }
}
