use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scale::Standardizer;
use crate::error::{Error, Result};
use crate::posture::{N_CLASSES, N_SENSORS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    /// Stop once the projected-gradient spread of an epoch falls below this.
    pub tol: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { c: 1.0, tol: 1e-4, max_epochs: 2000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub w: Vec<f64>,
    pub b: f64,
    pub epochs: usize,
    pub converged: bool,
}

impl BinarySvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b
    }
}

/// `sum(hinge) + (|w|^2 + b^2) / (2C)`; the bias is regularized like a weight.
pub fn svm_objective<R: AsRef<[f64]>>(w: &[f64], b: f64, x: &[R], y: &[f64], c: f64) -> f64 {
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(r, &t)| {
            let f = w.iter().zip(r.as_ref()).map(|(a, v)| a * v).sum::<f64>() + b;
            (1.0 - t * f).max(0.0)
        })
        .sum();
    hinge + (w.iter().map(|v| v * v).sum::<f64>() + b * b) / (2.0 * c)
}

/// Soft-margin linear SVM by dual coordinate descent. Labels are ±1. The
/// bias is an extra constant feature.
pub fn train_binary_svm<R: AsRef<[f64]>>(x: &[R], y: &[f64], p: &SvmParams) -> Result<BinarySvm> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::InvalidInput(format!("{} rows with {} targets", x.len(), y.len())));
    }
    if !(p.c > 0.0) {
        return Err(Error::InvalidConfig(format!("C must be positive, got {}", p.c)));
    }
    if y.iter().any(|&t| t != 1.0 && t != -1.0) {
        return Err(Error::InvalidInput("SVM targets must be +1 or -1".into()));
    }
    let dim = x[0].as_ref().len();
    let n = x.len();
    let qii: Vec<f64> = x.iter().map(|r| r.as_ref().iter().map(|v| v * v).sum::<f64>() + 1.0).collect();
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut alpha = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut epochs = 0;
    let mut converged = false;
    while epochs < p.max_epochs {
        epochs += 1;
        order.shuffle(&mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for &i in &order {
            let xi = x[i].as_ref();
            let g = y[i] * (w.iter().zip(xi).map(|(a, v)| a * v).sum::<f64>() + b) - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == p.c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / qii[i]).clamp(0.0, p.c);
                let step = (alpha[i] - old) * y[i];
                for (a, v) in w.iter_mut().zip(xi) {
                    *a += step * v;
                }
                b += step;
            }
        }
        if pg_max - pg_min < p.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("SVM stopped after {epochs} epochs without reaching tolerance {}", p.tol);
    }
    Ok(BinarySvm { w, b, epochs, converged })
}

/// One-vs-rest linear machines over standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearOvr {
    pub scaler: Standardizer,
    pub weights: Vec<[f64; N_SENSORS]>,
    pub bias: Vec<f64>,
}

impl LinearOvr {
    pub fn fit(x: &[[f64; N_SENSORS]], y: &[usize], p: &SvmParams) -> Result<Self> {
        let scaler = Standardizer::fit(x);
        let xs: Vec<[f64; N_SENSORS]> = x.iter().map(|r| scaler.apply(r)).collect();
        let machines: Vec<Result<BinarySvm>> = (0..N_CLASSES)
            .into_par_iter()
            .map(|c| {
                let t: Vec<f64> = y.iter().map(|&k| if k == c { 1.0 } else { -1.0 }).collect();
                train_binary_svm(&xs, &t, &SvmParams { seed: p.seed.wrapping_add(c as u64), ..*p })
            })
            .collect();
        let mut weights = Vec::with_capacity(N_CLASSES);
        let mut bias = Vec::with_capacity(N_CLASSES);
        for m in machines {
            let m = m?;
            let mut w = [0.0; N_SENSORS];
            w.copy_from_slice(&m.w);
            weights.push(w);
            bias.push(m.b);
        }
        Ok(Self { scaler, weights, bias })
    }

    pub fn margins(&self, x: &[f64; N_SENSORS]) -> [f64; N_CLASSES] {
        let z = self.scaler.apply(x);
        let mut out = [0.0; N_CLASSES];
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.weights[c].iter().zip(&z).map(|(w, v)| w * v).sum::<f64>() + self.bias[c];
        }
        out
    }
}
