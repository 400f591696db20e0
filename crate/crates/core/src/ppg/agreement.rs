use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bland-Altman summary of two measurement methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    /// `None` when either series is constant.
    pub pearson_r: Option<f64>,
    pub bias_bpm: f64,
    pub loa_low_bpm: f64,
    pub loa_high_bpm: f64,
    pub n_pairs: usize,
    /// Fraction of differences inside the limits of agreement.
    pub within_limits: f64,
}

impl AgreementReport {
    pub const CSV_HEADER: &'static str = "r,bias_bpm,loa_low,loa_high,n";

    pub fn to_csv(&self) -> String {
        let r = self.pearson_r.map(|r| r.to_string()).unwrap_or_default();
        format!(
            "{}\n{r},{},{},{},{}\n",
            Self::CSV_HEADER,
            self.bias_bpm,
            self.loa_low_bpm,
            self.loa_high_bpm,
            self.n_pairs
        )
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Pearson product-moment correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!("series lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 3 {
        return Err(Error::InsufficientData(format!("{} pairs; need at least 3", a.len())));
    }
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("a series is constant".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Bias is `mean(a - b)`; limits are bias ± 1.96 sample SD of the differences.
pub fn bland_altman(a: &[f64], b: &[f64]) -> Result<AgreementReport> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!("series lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 3 {
        return Err(Error::InsufficientData(format!("{} pairs; need at least 3", a.len())));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let bias = mean(&diffs);
    let var = diffs.iter().map(|d| (d - bias).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
    let half = 1.96 * var.sqrt();
    let (lo, hi) = (bias - half, bias + half);
    let inside = diffs.iter().filter(|&&d| d >= lo && d <= hi).count();
    let pearson_r = match pearson(a, b) {
        Ok(r) => Some(r),
        Err(Error::UndefinedCorrelation(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(AgreementReport {
        pearson_r,
        bias_bpm: bias,
        loa_low_bpm: lo,
        loa_high_bpm: hi,
        n_pairs: diffs.len(),
        within_limits: inside as f64 / diffs.len() as f64,
    })
}
