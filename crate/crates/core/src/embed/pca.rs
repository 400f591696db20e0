use serde::{Deserialize, Serialize};

use super::eigen::symmetric_eigen;
use super::{check_dims, Diagnostics, Embedding, Method};
use crate::error::{Error, Result};

/// Relative eigenvalue floor below which an axis counts as degenerate.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// All principal axes as unit rows, by decreasing variance.
    pub components: Vec<Vec<f64>>,
    /// Covariance eigenvalues (sample covariance, `n - 1`), clipped at zero.
    pub eigenvalues: Vec<f64>,
    pub rank: usize,
}

fn width<R: AsRef<[f64]>>(x: &[R]) -> Result<usize> {
    let p = x.first().map(|r| r.as_ref().len()).unwrap_or(0);
    if p == 0 {
        return Err(Error::InvalidInput("no columns".into()));
    }
    for (i, r) in x.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != p {
            return Err(Error::InvalidInput(format!("row {i} has width {}, expected {p}", r.len())));
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("row {i} has a non-finite value")));
        }
    }
    Ok(p)
}

impl PcaModel {
    pub fn fit<R: AsRef<[f64]>>(x: &[R]) -> Result<Self> {
        let p = width(x)?;
        let n = x.len();
        if n < 2 {
            return Err(Error::InsufficientData(format!("{n} row(s); need at least 2")));
        }
        let mut mean = vec![0.0; p];
        for r in x {
            for (m, v) in mean.iter_mut().zip(r.as_ref()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut cov = vec![0.0; p * p];
        let mut centered = vec![0.0; p];
        for r in x {
            for (c, (v, m)) in centered.iter_mut().zip(r.as_ref().iter().zip(&mean)) {
                *c = v - m;
            }
            for i in 0..p {
                for j in i..p {
                    cov[i * p + j] += centered[i] * centered[j];
                }
            }
        }
        for i in 0..p {
            for j in i..p {
                cov[i * p + j] /= (n - 1) as f64;
                cov[j * p + i] = cov[i * p + j];
            }
        }
        let (values, mut components) = symmetric_eigen(&cov, p);
        let top = values.first().copied().unwrap_or(0.0);
        if top <= 0.0 {
            return Err(Error::InvalidInput("input has no variance".into()));
        }
        for c in &mut components {
            // Largest-magnitude loading positive; earliest index on ties.
            let mut k = 0;
            for (i, v) in c.iter().enumerate() {
                if v.abs() > c[k].abs() {
                    k = i;
                }
            }
            if c[k] < 0.0 {
                c.iter_mut().for_each(|v| *v = -*v);
            }
        }
        let rank = values.iter().filter(|&&v| v > RANK_TOL * top).count();
        let eigenvalues = values.iter().map(|&v| if v > RANK_TOL * top { v } else { 0.0 }).collect();
        Ok(Self { mean, components, eigenvalues, rank })
    }

    /// Projects onto the first `d` axes. Axes beyond the rank are zero.
    pub fn transform<R: AsRef<[f64]>>(&self, x: &[R], d: usize) -> Vec<Vec<f64>> {
        x.iter()
            .map(|r| {
                let r = r.as_ref();
                (0..d)
                    .map(|k| {
                        if k >= self.rank {
                            return 0.0;
                        }
                        self.components[k].iter().zip(r.iter().zip(&self.mean)).map(|(c, (v, m))| c * (v - m)).sum()
                    })
                    .collect()
            })
            .collect()
    }

    /// Mean squared residual after reconstructing from the first `d` axes.
    pub fn reconstruction_error<R: AsRef<[f64]>>(&self, x: &[R], d: usize) -> f64 {
        let coords = self.transform(x, d);
        let mut total = 0.0;
        for (r, z) in x.iter().zip(&coords) {
            for (j, (v, m)) in r.as_ref().iter().zip(&self.mean).enumerate() {
                let rec: f64 = m + z.iter().enumerate().map(|(k, zk)| zk * self.components[k][j]).sum::<f64>();
                total += (v - rec).powi(2);
            }
        }
        total / x.len() as f64
    }
}

/// Projects `x` onto its top `d` principal axes.
pub fn pca<R: AsRef<[f64]>>(x: &[R], d: usize) -> Result<Embedding> {
    check_dims(d)?;
    if x.len() <= d {
        return Err(Error::InsufficientData(format!("{} rows for {d} dimensions", x.len())));
    }
    let model = PcaModel::fit(x)?;
    if model.rank < d {
        log::warn!("input has rank {} < {d}; trailing axes are zero-filled", model.rank);
    }
    let total: f64 = model.eigenvalues.iter().sum();
    let explained_variance = model.eigenvalues[..d].to_vec();
    let explained_ratio = explained_variance.iter().map(|v| v / total).collect();
    Ok(Embedding {
        coords: model.transform(x, d),
        labels: Vec::new(),
        method: Method::Pca,
        diagnostics: Diagnostics::Pca {
            explained_variance,
            explained_ratio,
            components: model.components[..d].to_vec(),
            rank: model.rank,
        },
    })
}
