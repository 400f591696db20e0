use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posture::PostureLabel;
use crate::sensemodel::SensorFrame;

pub const DEFAULT_EMPTY_THRESHOLD_KG: f64 = 1.0;

/// A maximal run of frames on one side of the empty-seat threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    pub label: PostureLabel,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn occupied(&self) -> bool {
        self.label.is_occupied()
    }
}

/// Splits a stream wherever the total force crosses `threshold_kg`.
/// Sub-threshold runs are Empty; occupied runs take `schedule` in order.
///
/// `schedule` lists sittings only. Extra entries are ignored.
pub fn segment_by_empty(frames: &[SensorFrame], threshold_kg: f64, schedule: &[PostureLabel]) -> Result<Vec<Segment>> {
    if frames.is_empty() {
        return Err(Error::InvalidInput("empty frame stream".into()));
    }
    if let Some(bad) = schedule.iter().find(|l| !l.is_occupied()) {
        return Err(Error::InvalidInput(format!("schedule entry {bad} is not a sitting posture")));
    }
    let occupied: Vec<bool> = frames.iter().map(|f| f.total_force_kg() >= threshold_kg).collect();
    let mut runs = Vec::new();
    let mut start = 0;
    for i in 1..=frames.len() {
        if i == frames.len() || occupied[i] != occupied[start] {
            runs.push((start, i, occupied[start]));
            start = i;
        }
    }
    let n_occupied = runs.iter().filter(|r| r.2).count();
    if n_occupied > schedule.len() {
        return Err(Error::LabelMismatch { segments: n_occupied, labels: schedule.len() });
    }
    let mut next = schedule.iter();
    Ok(runs
        .into_iter()
        .map(|(start, end, occ)| Segment {
            start,
            end,
            label: if occ { *next.next().expect("counted above") } else { PostureLabel::Empty },
        })
        .collect())
}

/// Per-frame labels from segments, with the first and last frame of every
/// occupied segment relabeled Empty (sit-down and stand-up transitions).
pub fn boundary_labels(segments: &[Segment]) -> Vec<PostureLabel> {
    let mut out = Vec::with_capacity(segments.last().map_or(0, |s| s.end));
    for seg in segments {
        let first = out.len();
        out.extend(std::iter::repeat_n(seg.label, seg.len()));
        if seg.occupied() {
            out[first] = PostureLabel::Empty;
            out[seg.end - 1] = PostureLabel::Empty;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensemodel::{collection_schedule, synth_session, FsrDividerConfig};
    use crate::N_SENSORS;

    fn frame(t: u64, kg: f64) -> SensorFrame {
        SensorFrame::from_forces(t, &[kg; N_SENSORS], None, &FsrDividerConfig::default()).unwrap()
    }

    #[test]
    fn constructed_stream() {
        let mut frames = Vec::new();
        for (n, kg) in [(20, 0.0), (180, 3.0), (20, 0.0), (180, 3.0)] {
            for _ in 0..n {
                frames.push(frame(frames.len() as u64, kg));
            }
        }
        let segs = segment_by_empty(&frames, 1.0, &[PostureLabel::Upright, PostureLabel::Slouching]).unwrap();
        let summary: Vec<_> = segs.iter().map(|s| (s.label, s.len())).collect();
        assert_eq!(
            summary,
            vec![
                (PostureLabel::Empty, 20),
                (PostureLabel::Upright, 180),
                (PostureLabel::Empty, 20),
                (PostureLabel::Slouching, 180)
            ]
        );
        let labels = boundary_labels(&segs);
        assert_eq!(labels.len(), 400);
        assert_eq!(labels[20], PostureLabel::Empty);
        assert_eq!(labels[21], PostureLabel::Upright);
        assert_eq!(labels[199], PostureLabel::Empty);
    }

    #[test]
    fn all_empty_stream() {
        let frames: Vec<_> = (0..30).map(|t| frame(t, 0.0)).collect();
        let segs = segment_by_empty(&frames, 1.0, &[]).unwrap();
        assert_eq!(segs, vec![Segment { start: 0, end: 30, label: PostureLabel::Empty }]);
    }

    #[test]
    fn short_schedule_is_a_mismatch() {
        let frames: Vec<_> = [0.0, 3.0, 0.0, 3.0].iter().enumerate().map(|(t, &kg)| frame(t as u64, kg)).collect();
        assert!(matches!(
            segment_by_empty(&frames, 1.0, &[PostureLabel::Upright]),
            Err(Error::LabelMismatch { segments: 2, labels: 1 })
        ));
        assert!(segment_by_empty(&[], 1.0, &[]).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(100))]

        #[test]
        fn one_segment_per_scheduled_sitting(
            entries in proptest::collection::vec((0usize..7, 2.0f64..20.0), 1..9),
            mass in 30.0f64..100.0,
            rate in 1.0f64..10.0,
            seed in proptest::prelude::any::<u64>(),
        ) {
            let schedule: Vec<_> = entries.iter().map(|&(i, d)| (PostureLabel::OCCUPIED[i], d)).collect();
            let frames = synth_session(&schedule, mass, rate, seed).unwrap();
            let sittings: Vec<_> = schedule.iter().map(|s| s.0).collect();
            let segs = segment_by_empty(&frames, DEFAULT_EMPTY_THRESHOLD_KG, &sittings).unwrap();
            let got: Vec<_> = segs.iter().filter(|s| s.occupied()).map(|s| s.label).collect();
            proptest::prop_assert_eq!(got, sittings);
        }
    }

    #[test]
    fn full_protocol_labels_match_ground_truth() {
        let schedule = collection_schedule(60.0);
        let frames = synth_session(&schedule, 65.0, 3.0, 11).unwrap();
        let sittings: Vec<_> = schedule.iter().map(|s| s.0).filter(|l| l.is_occupied()).collect();
        let segs = segment_by_empty(&frames, DEFAULT_EMPTY_THRESHOLD_KG, &sittings).unwrap();
        assert_eq!(segs.iter().filter(|s| s.occupied()).count(), sittings.len());

        let truth: Vec<_> = frames.iter().map(|f| f.label.unwrap_or(PostureLabel::Empty)).collect();
        let mut per_segment = Vec::new();
        for s in &segs {
            per_segment.extend(std::iter::repeat_n(s.label, s.len()));
        }
        let agree = |labels: &[PostureLabel]| {
            labels.iter().zip(&truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
        };
        assert_eq!(agree(&per_segment), 1.0);
        assert!(agree(&boundary_labels(&segs)) >= 0.99);
    }
}
