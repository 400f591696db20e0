use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posture::{PostureLabel, N_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: PostureLabel,
    pub support: u64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    /// `TP / (TP + (FN + FP) / 2)`; zero when the class never occurs.
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: u64,
    pub accuracy: f64,
    /// Rows are true classes, columns predicted.
    pub confusion: [[u64; N_CLASSES]; N_CLASSES],
    /// From TP/FP/FN pooled over classes.
    pub f1_micro: f64,
    /// Mean F1 over classes that occur in either truth or predictions.
    pub f1_macro: f64,
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn evaluate_predictions(truth: &[PostureLabel], predicted: &[PostureLabel]) -> Result<EvalReport> {
    if truth.len() != predicted.len() {
        return Err(Error::InvalidInput(format!("{} labels vs {} predictions", truth.len(), predicted.len())));
    }
    if truth.is_empty() {
        return Err(Error::InsufficientData("empty evaluation set".into()));
    }
    let mut confusion = [[0u64; N_CLASSES]; N_CLASSES];
    for (t, p) in truth.iter().zip(predicted) {
        confusion[t.index()][p.index()] += 1;
    }
    let n = truth.len() as u64;
    let mut per_class = Vec::with_capacity(N_CLASSES);
    let (mut tp_all, mut fp_all, mut fn_all) = (0, 0, 0);
    let mut macro_sum = 0.0;
    let mut macro_n = 0;
    for c in 0..N_CLASSES {
        let tp = confusion[c][c];
        let support: u64 = confusion[c].iter().sum();
        let predicted_c: u64 = (0..N_CLASSES).map(|r| confusion[r][c]).sum();
        let (fp, fn_) = (predicted_c - tp, support - tp);
        let f1 = ratio(2 * tp, 2 * tp + fp + fn_);
        if tp + fp + fn_ > 0 {
            macro_sum += f1;
            macro_n += 1;
        }
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
        per_class.push(ClassMetrics {
            label: PostureLabel::from_index(c).expect("class index"),
            support,
            tp,
            fp,
            fn_,
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, support),
            f1,
        });
    }
    Ok(EvalReport {
        n,
        accuracy: ratio(tp_all, n),
        confusion,
        f1_micro: ratio(2 * tp_all, 2 * tp_all + fp_all + fn_all),
        f1_macro: macro_sum / macro_n as f64,
        per_class,
    })
}

impl EvalReport {
    /// Confusion matrix with a header row of predicted labels and the true
    /// label leading each row.
    pub fn confusion_csv(&self) -> String {
        let mut s = String::from("true\\predicted");
        for l in PostureLabel::ALL {
            let _ = write!(s, ",{l}");
        }
        s.push('\n');
        for (r, row) in self.confusion.iter().enumerate() {
            s.push_str(PostureLabel::ALL[r].name());
            for v in row {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "n={} accuracy={:.4} f1_micro={:.4} f1_macro={:.4}\n{:<16} {:>7} {:>9} {:>7} {:>7}\n",
            self.n, self.accuracy, self.f1_micro, self.f1_macro, "class", "support", "precision", "recall", "f1"
        );
        for m in &self.per_class {
            let _ = writeln!(
                s,
                "{:<16} {:>7} {:>9.4} {:>7.4} {:>7.4}",
                m.label.name(),
                m.support,
                m.precision,
                m.recall,
                m.f1
            );
        }
        s
    }
}
