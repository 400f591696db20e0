//! Labeled pressure datasets: empty-seat segmentation, CSV persistence,
//! stratified splitting and one-hot targets.

mod cohort;
mod io;
mod segment;
mod split;

pub use cohort::{synth_cohort, CohortSpec, SUBJECT_SPACING_MS};
pub use io::{read_csv, read_csv_from, write_csv, write_csv_to, CSV_HEADER};
pub use segment::{boundary_labels, segment_by_empty, Segment, DEFAULT_EMPTY_THRESHOLD_KG};
pub use split::{split_indices, split_train_test, SplitSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posture::{PostureLabel, N_CLASSES, N_SENSORS};
use crate::sensemodel::SensorFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub timestamp_ms: u64,
    pub counts: [u16; N_SENSORS],
    pub label: PostureLabel,
}

impl DatasetRow {
    pub fn features(&self) -> [f64; N_SENSORS] {
        self.counts.map(f64::from)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub rows: Vec<DatasetRow>,
    pub class_names: Vec<PostureLabel>,
    pub provenance: String,
}

impl LabeledDataset {
    pub fn new(provenance: impl Into<String>) -> Self {
        Self { rows: Vec::new(), class_names: PostureLabel::ALL.to_vec(), provenance: provenance.into() }
    }

    pub fn from_rows(rows: Vec<DatasetRow>, provenance: impl Into<String>) -> Self {
        Self { rows, ..Self::new(provenance) }
    }

    /// Keeps labeled frames; unlabeled stand-up gaps are dropped.
    pub fn from_frames<'a>(frames: impl IntoIterator<Item = &'a SensorFrame>, provenance: impl Into<String>) -> Self {
        let rows = frames
            .into_iter()
            .filter_map(|f| f.label.map(|label| DatasetRow { timestamp_ms: f.timestamp_ms, counts: f.counts, label }))
            .collect();
        Self::from_rows(rows, provenance)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        for row in &self.rows {
            if !self.class_names.contains(&row.label) {
                return Err(Error::InvalidLabel(row.label.to_string()));
            }
        }
        Ok(())
    }

    pub fn class_counts(&self) -> [usize; N_CLASSES] {
        let mut counts = [0; N_CLASSES];
        for row in &self.rows {
            counts[row.label.index()] += 1;
        }
        counts
    }

    pub fn features(&self) -> Vec<[f64; N_SENSORS]> {
        self.rows.iter().map(DatasetRow::features).collect()
    }

    pub fn labels(&self) -> Vec<PostureLabel> {
        self.rows.iter().map(|r| r.label).collect()
    }

    /// Rows at `indices`, in the order given.
    pub fn subset(&self, indices: &[usize], provenance: impl Into<String>) -> Self {
        Self {
            rows: indices.iter().map(|&i| self.rows[i]).collect(),
            class_names: self.class_names.clone(),
            provenance: provenance.into(),
        }
    }

    pub fn extend(&mut self, other: &LabeledDataset) {
        self.rows.extend_from_slice(&other.rows);
    }
}

pub fn one_hot(label: PostureLabel, class_names: &[PostureLabel]) -> Result<Vec<f64>> {
    let pos = class_names
        .iter()
        .position(|&c| c == label)
        .ok_or_else(|| Error::InvalidLabel(label.to_string()))?;
    let mut v = vec![0.0; class_names.len()];
    v[pos] = 1.0;
    Ok(v)
}
