//! PCA and t-SNE projections of pressure vectors to 2-D or 3-D.

mod eigen;
mod pca;
mod tsne;

use std::fmt::Write as _;
use std::io::Write;

pub use eigen::symmetric_eigen;
pub use pca::{pca, PcaModel};
pub use tsne::{conditional_affinities, perplexity_of, tsne, TsneParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posture::PostureLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Pca,
    Tsne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Diagnostics {
    Pca {
        explained_variance: Vec<f64>,
        explained_ratio: Vec<f64>,
        components: Vec<Vec<f64>>,
        rank: usize,
    },
    Tsne {
        final_kl: f64,
        /// KL as exaggeration switches off; `None` when the run is shorter.
        kl_after_exaggeration: Option<f64>,
        kl_history: Vec<(usize, f64)>,
        params: TsneParams,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub coords: Vec<Vec<f64>>,
    /// Empty until attached with [`Embedding::with_labels`].
    pub labels: Vec<PostureLabel>,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

pub(crate) fn check_dims(d: usize) -> Result<()> {
    if d == 2 || d == 3 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("embedding dimension {d}; must be 2 or 3")))
    }
}

impl Embedding {
    pub fn dims(&self) -> usize {
        self.coords.first().map_or(0, Vec::len)
    }

    pub fn with_labels(mut self, labels: Vec<PostureLabel>) -> Result<Self> {
        if labels.len() != self.coords.len() {
            return Err(Error::InvalidInput(format!("{} labels for {} points", labels.len(), self.coords.len())));
        }
        self.labels = labels;
        Ok(self)
    }

    /// `x,y[,z],label`; the label column is blank for unlabeled points.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = ["x", "y", "z"][..self.dims()].to_vec();
        header.push("label");
        w.write_record(&header)?;
        for (i, c) in self.coords.iter().enumerate() {
            let mut rec: Vec<String> = c.iter().map(f64::to_string).collect();
            rec.push(self.labels.get(i).map(|l| l.name().to_string()).unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Plain `key=value` lines for the diagnostics sidecar.
    pub fn diagnostics_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let _ = writeln!(s, "points={}", self.coords.len());
        let _ = writeln!(s, "dims={}", self.dims());
        match &self.diagnostics {
            Diagnostics::Pca { explained_variance, explained_ratio, rank, .. } => {
                let _ = writeln!(s, "method=pca");
                let _ = writeln!(s, "explained_variance={}", join(explained_variance));
                let _ = writeln!(s, "explained_ratio={}", join(explained_ratio));
                let _ = writeln!(s, "rank={rank}");
            }
            Diagnostics::Tsne { final_kl, kl_after_exaggeration, params, .. } => {
                let _ = writeln!(s, "method=tsne");
                let _ = writeln!(s, "perplexity={}", params.perplexity);
                let _ = writeln!(s, "iterations={}", params.iterations);
                let _ = writeln!(s, "seed={}", params.seed);
                if let Some(k) = kl_after_exaggeration {
                    let _ = writeln!(s, "kl_after_exaggeration={k}");
                }
                let _ = writeln!(s, "final_kl={final_kl}");
            }
        }
        s
    }
}
