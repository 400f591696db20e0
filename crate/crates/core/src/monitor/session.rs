use serde::{Deserialize, Serialize};

use super::debounce::PostureEvent;
use crate::error::{Error, Result};
use crate::posture::{PostureLabel, N_CLASSES, N_SENSORS};

/// Period assumed when a session has fewer than two frames.
pub const DEFAULT_FRAME_PERIOD_MS: u64 = 333;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedFrame {
    pub t: u64,
    pub counts: [u16; N_SENSORS],
    /// Undebounced model output.
    pub raw: PostureLabel,
    pub raw_conf: f64,
    /// Debounced posture.
    pub posture: PostureLabel,
    pub conf: f64,
    pub bpm: Option<f64>,
    /// Operator label active when the frame arrived.
    #[serde(default)]
    pub manual: Option<PostureLabel>,
}

/// An operator label change. `None` stops labeling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelMark {
    pub t: u64,
    pub label: Option<PostureLabel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub frames: Vec<ClassifiedFrame>,
    pub labels: Vec<LabelMark>,
    pub closed: bool,
}

impl SessionRecord {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self { session_id: session_id.into(), frames: Vec::new(), labels: Vec::new(), closed: false }
    }

    pub fn push_frame(&mut self, f: ClassifiedFrame) -> Result<()> {
        if let Some(last) = self.frames.last() {
            if f.t < last.t {
                return Err(Error::InvalidInput(format!("frame at {} ms precedes {} ms", f.t, last.t)));
            }
        }
        self.frames.push(f);
        Ok(())
    }

    /// Median spacing of consecutive frames.
    pub fn frame_period_ms(&self) -> u64 {
        let mut d: Vec<u64> = self.frames.windows(2).map(|w| w[1].t - w[0].t).collect();
        if d.is_empty() {
            return DEFAULT_FRAME_PERIOD_MS;
        }
        let mid = d.len() / 2;
        *d.select_nth_unstable(mid).1
    }

    pub fn start_ms(&self) -> Option<u64> {
        self.frames.first().map(|f| f.t)
    }

    /// One frame period past the last frame.
    pub fn end_ms(&self) -> Option<u64> {
        self.frames.last().map(|f| f.t + self.frame_period_ms())
    }

    pub fn length_s(&self) -> f64 {
        match (self.start_ms(), self.end_ms()) {
            (Some(a), Some(b)) => (b - a) as f64 / 1000.0,
            _ => 0.0,
        }
    }

    /// Debounced posture changes, as they were emitted live.
    pub fn events(&self) -> Vec<PostureEvent> {
        let mut out = Vec::new();
        let mut prev = None;
        for f in &self.frames {
            if prev != Some(f.posture) {
                out.push(PostureEvent { t: f.t, posture: f.posture, conf: f.conf, bpm: f.bpm });
                prev = Some(f.posture);
            }
        }
        out
    }

    pub fn bpm_series(&self) -> Vec<(u64, f64)> {
        self.frames.iter().filter_map(|f| f.bpm.map(|b| (f.t, b))).collect()
    }

    pub fn stats(&self, window: Window) -> PostureStats {
        posture_stats(self, window)
    }
}

/// Half-open time range in session milliseconds. Missing ends default to the
/// session bounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub from: Option<u64>,
    pub to: Option<u64>,
}

impl Window {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn between(from: u64, to: u64) -> Self {
        Self { from: Some(from), to: Some(to) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostureStat {
    pub posture: PostureLabel,
    pub duration_s: f64,
    pub repetitions: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostureStats {
    pub session_id: String,
    pub from_ms: u64,
    pub to_ms: u64,
    pub frame_period_ms: u64,
    pub n_frames: usize,
    pub total_s: f64,
    /// All eight classes in class-index order.
    pub postures: Vec<PostureStat>,
}

impl PostureStats {
    pub fn get(&self, p: PostureLabel) -> &PostureStat {
        &self.postures[p.index()]
    }

    pub fn is_empty(&self) -> bool {
        self.n_frames == 0
    }
}

/// Durations are frame counts times the session's frame period; repetitions
/// count maximal runs of the debounced posture inside the window.
pub fn posture_stats(s: &SessionRecord, window: Window) -> PostureStats {
    let period = s.frame_period_ms();
    let from = window.from.or(s.start_ms()).unwrap_or(0);
    let to = window.to.or(s.end_ms()).unwrap_or(from);
    let mut frames = [0usize; N_CLASSES];
    let mut runs = [0u32; N_CLASSES];
    let mut prev = None;
    let mut n = 0;
    for f in s.frames.iter().filter(|f| f.t >= from && f.t < to) {
        let c = f.posture.index();
        frames[c] += 1;
        if prev != Some(c) {
            runs[c] += 1;
            prev = Some(c);
        }
        n += 1;
    }
    let secs = |k: usize| k as f64 * period as f64 / 1000.0;
    PostureStats {
        session_id: s.session_id.clone(),
        from_ms: from,
        to_ms: to.max(from),
        frame_period_ms: period,
        n_frames: n,
        total_s: secs(n),
        postures: PostureLabel::ALL
            .iter()
            .map(|&p| PostureStat { posture: p, duration_s: secs(frames[p.index()]), repetitions: runs[p.index()] })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use PostureLabel::*;

    pub(crate) fn record(runs: &[(PostureLabel, usize)], period: u64) -> SessionRecord {
        let mut s = SessionRecord::new("T");
        let mut t = 1_000;
        for &(p, n) in runs {
            for _ in 0..n {
                s.push_frame(ClassifiedFrame {
                    t,
                    counts: [0; N_SENSORS],
                    raw: p,
                    raw_conf: 1.0,
                    posture: p,
                    conf: 1.0,
                    bpm: None,
                    manual: None,
                })
                .unwrap();
                t += period;
            }
        }
        s
    }

    #[test]
    fn two_runs() {
        let s = record(&[(Upright, 360), (Slouching, 180)], 333);
        let st = s.stats(Window::all());
        // 360 frames of 333 ms.
        assert!((st.get(Upright).duration_s - 119.88).abs() < 1e-9);
        assert_eq!((st.get(Upright).repetitions, st.get(Slouching).repetitions), (1, 1));
        let s = record(&[(Upright, 120), (Slouching, 60)], 1000);
        let st = s.stats(Window::all());
        assert_eq!((st.get(Upright).duration_s, st.get(Slouching).duration_s), (120.0, 60.0));
    }

    #[test]
    fn runs_are_counted() {
        let s = record(&[(Upright, 3), (Slouching, 2), (Upright, 4)], 250);
        let st = s.stats(Window::all());
        assert_eq!(st.get(Upright).repetitions, 2);
        assert_eq!(st.get(Slouching).repetitions, 1);
        assert_eq!(st.get(Empty).repetitions, 0);
    }

    #[test]
    fn empty_window_is_empty() {
        let s = record(&[(Upright, 10)], 250);
        let st = s.stats(Window::between(500_000, 600_000));
        assert!(st.is_empty());
        assert_eq!(st.total_s, 0.0);
        let st = s.stats(Window::between(3000, 2000));
        assert!(st.is_empty() && st.to_ms == st.from_ms);
        assert!(SessionRecord::new("x").stats(Window::all()).is_empty());
    }

    #[test]
    fn events_mark_changes() {
        let s = record(&[(Empty, 2), (Upright, 3), (Empty, 1)], 100);
        let e: Vec<_> = s.events().iter().map(|e| (e.t, e.posture)).collect();
        assert_eq!(e, vec![(1000, Empty), (1200, Upright), (1500, Empty)]);
    }

    #[test]
    fn out_of_order_frames_are_rejected() {
        let mut s = record(&[(Upright, 3)], 100);
        let mut f = s.frames[0].clone();
        f.t = 0;
        assert!(s.push_frame(f).is_err());
    }

    proptest! {
        #[test]
        fn durations_conserve_window_length(
            runs in prop::collection::vec((0usize..N_CLASSES, 1usize..40), 1..20),
            period in 100u64..1000,
            a in 0.0f64..1.0, b in 0.0f64..1.0,
        ) {
            let runs: Vec<_> = runs.into_iter().map(|(c, n)| (PostureLabel::ALL[c], n)).collect();
            let s = record(&runs, period);
            let (start, end) = (s.start_ms().unwrap(), s.end_ms().unwrap());
            let span = (end - start) as f64;
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let from = start + (lo * span) as u64;
            let to = start + (hi * span) as u64;
            for w in [Window::all(), Window::between(from, to)] {
                let st = s.stats(w);
                let sum: f64 = st.postures.iter().map(|p| p.duration_s).sum();
                let len = (st.to_ms - st.from_ms) as f64 / 1000.0;
                prop_assert!((sum - len).abs() <= period as f64 / 1000.0 + 1e-9);
                prop_assert!((sum - st.total_s).abs() < 1e-9);
                for p in &st.postures {
                    prop_assert_eq!(p.duration_s > 0.0, p.repetitions >= 1);
                }
            }
        }
    }
}
