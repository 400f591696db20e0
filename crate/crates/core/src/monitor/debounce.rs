use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::classify::{Prediction, TrainedModel};
use crate::error::{Error, Result};
use crate::posture::{PostureLabel, N_CLASSES, N_SENSORS};

pub const DEFAULT_DEBOUNCE_K: usize = 5;

/// A posture change. Serialized as the live wire event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PostureEvent {
    pub t: u64,
    pub posture: PostureLabel,
    pub conf: f64,
    pub bpm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Debounced {
    pub posture: PostureLabel,
    /// Mean confidence of the window's votes for `posture`.
    pub conf: f64,
    pub changed: bool,
}

/// Majority vote over the last `k` raw predictions. A tie keeps the current
/// label if it is among the leaders, otherwise the leader voted most
/// recently wins.
#[derive(Debug, Clone)]
pub struct Debouncer {
    k: usize,
    window: VecDeque<Prediction>,
    current: Option<PostureLabel>,
}

impl Debouncer {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("debounce window k must be at least 1".into()));
        }
        Ok(Self { k, window: VecDeque::with_capacity(k), current: None })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn current(&self) -> Option<PostureLabel> {
        self.current
    }

    pub fn push(&mut self, p: Prediction) -> Debounced {
        if self.window.len() == self.k {
            self.window.pop_front();
        }
        self.window.push_back(p);

        let mut votes = [0usize; N_CLASSES];
        let mut conf = [0.0f64; N_CLASSES];
        let mut last_seen = [0usize; N_CLASSES];
        for (i, q) in self.window.iter().enumerate() {
            let c = q.label.index();
            votes[c] += 1;
            conf[c] += q.confidence;
            last_seen[c] = i;
        }
        let top = *votes.iter().max().unwrap();
        let winner = match self.current {
            Some(cur) if votes[cur.index()] == top => cur,
            _ => {
                let c = (0..N_CLASSES).filter(|&c| votes[c] == top).max_by_key(|&c| last_seen[c]).unwrap();
                PostureLabel::ALL[c]
            }
        };
        let changed = self.current != Some(winner);
        self.current = Some(winner);
        let w = winner.index();
        Debounced { posture: winner, conf: conf[w] / votes[w] as f64, changed }
    }
}

pub fn check_model(model: &TrainedModel) -> Result<()> {
    if model.class_names.len() != N_CLASSES || model.class_names.iter().zip(PostureLabel::ALL).any(|(a, b)| *a != b) {
        return Err(Error::InvalidConfig(format!(
            "model classes {:?} do not match the {N_CLASSES} posture classes",
            model.class_names
        )));
    }
    Ok(())
}

/// Offline counterpart of the live pipeline: classifies each frame's counts
/// and emits an event on every debounced label change.
pub fn classify_stream<'a, I>(frames: I, model: &TrainedModel, k: usize) -> Result<Vec<PostureEvent>>
where
    I: IntoIterator<Item = (u64, &'a [u16; N_SENSORS])>,
{
    check_model(model)?;
    let mut deb = Debouncer::new(k)?;
    let mut events = Vec::new();
    for (t, counts) in frames {
        let d = deb.push(model.predict_counts(counts));
        if d.changed {
            events.push(PostureEvent { t, posture: d.posture, conf: d.conf, bpm: None });
        }
    }
    Ok(events)
}
