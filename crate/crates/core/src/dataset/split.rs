use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::posture::{PostureLabel, N_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.8, seed: 0, stratified: true }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!("train fraction {} outside (0, 1)", self.train_fraction)));
        }
        Ok(())
    }
}

/// Sorted `(train, test)` row indices.
///
/// The train size is `round(fraction * n)`. Under stratification each class
/// gets `floor(fraction * n_c)` and the leftover rows go to the classes with
/// the largest fractional remainders, lowest class index first on ties.
pub fn split_indices(ds: &LabeledDataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    let n = ds.len();
    let target = (spec.train_fraction * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::with_capacity(target);
    let mut test = Vec::with_capacity(n - target);

    if !spec.stratified {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..target]);
        test.extend_from_slice(&idx[target..]);
    } else {
        let mut by_class: [Vec<usize>; N_CLASSES] = Default::default();
        for (i, row) in ds.rows.iter().enumerate() {
            by_class[row.label.index()].push(i);
        }
        for (c, rows) in by_class.iter().enumerate() {
            if rows.len() == 1 {
                let label = PostureLabel::from_index(c).expect("class index");
                return Err(Error::Stratification { label, count: 1 });
            }
        }
        let exact: Vec<f64> = by_class.iter().map(|r| spec.train_fraction * r.len() as f64).collect();
        let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let assigned: usize = quota.iter().sum();
        let mut order: Vec<usize> = (0..N_CLASSES).filter(|&c| quota[c] < by_class[c].len()).collect();
        order.sort_by(|&a, &b| {
            let (ra, rb) = (exact[a] - quota[a] as f64, exact[b] - quota[b] as f64);
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &c in order.iter().take(target.saturating_sub(assigned)) {
            quota[c] += 1;
        }
        for (c, rows) in by_class.iter_mut().enumerate() {
            rows.shuffle(&mut rng);
            train.extend_from_slice(&rows[..quota[c]]);
            test.extend_from_slice(&rows[quota[c]..]);
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split_train_test(ds: &LabeledDataset, spec: &SplitSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    let (train, test) = split_indices(ds, spec)?;
    Ok((
        ds.subset(&train, format!("{} [train seed={}]", ds.provenance, spec.seed)),
        ds.subset(&test, format!("{} [test seed={}]", ds.provenance, spec.seed)),
    ))
}
