//! The four posture classifiers (decision tree, random forest, linear SVM,
//! MLP) and their evaluation.

mod metrics;
mod mlp;
mod scale;
mod svm;
mod tree;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

pub use metrics::{evaluate_predictions, ClassMetrics, EvalReport};
pub use mlp::{Dense, Mlp, MlpParams};
pub use scale::Standardizer;
pub use svm::{svm_objective, train_binary_svm, BinarySvm, LinearOvr, SvmParams};
pub use tree::{fit_forest, fit_tree, forest_votes, DtParams, Node, RfParams, Tree};

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::posture::{PostureLabel, N_CLASSES, N_SENSORS};

/// Index of the largest score; the lowest index wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Dt,
    Rf,
    Svm,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Dt, ModelKind::Rf, ModelKind::Svm, ModelKind::Mlp];

    pub fn code(self) -> u8 {
        match self {
            ModelKind::Dt => 1,
            ModelKind::Rf => 2,
            ModelKind::Svm => 3,
            ModelKind::Mlp => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Dt => "dt",
            ModelKind::Rf => "rf",
            ModelKind::Svm => "svm",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dt" | "tree" => Ok(ModelKind::Dt),
            "rf" | "forest" => Ok(ModelKind::Rf),
            "svm" => Ok(ModelKind::Svm),
            "mlp" | "ann" => Ok(ModelKind::Mlp),
            other => Err(Error::InvalidConfig(format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Dt(DtParams),
    Rf(RfParams),
    Svm(SvmParams),
    Mlp(MlpParams),
}

impl ModelSpec {
    /// Defaults for `kind`, seeded where the trainer is stochastic.
    pub fn default_for(kind: ModelKind, seed: u64) -> Self {
        match kind {
            ModelKind::Dt => ModelSpec::Dt(DtParams::default()),
            ModelKind::Rf => ModelSpec::Rf(RfParams { seed, ..RfParams::default() }),
            ModelKind::Svm => ModelSpec::Svm(SvmParams { seed, ..SvmParams::default() }),
            ModelKind::Mlp => ModelSpec::Mlp(MlpParams { seed, ..MlpParams::default() }),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Dt(_) => ModelKind::Dt,
            ModelSpec::Rf(_) => ModelKind::Rf,
            ModelSpec::Svm(_) => ModelKind::Svm,
            ModelSpec::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ModelSpec::Dt(_) => 0,
            ModelSpec::Rf(p) => p.seed,
            ModelSpec::Svm(p) => p.seed,
            ModelSpec::Mlp(p) => p.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Dt(p) if p.min_leaf == 0 => Err(Error::InvalidConfig("min_leaf must be at least 1".into())),
            ModelSpec::Rf(p) if p.n_trees == 0 || p.min_leaf == 0 || p.feature_subsample == 0 => {
                Err(Error::InvalidConfig("forest needs n_trees, min_leaf and feature_subsample >= 1".into()))
            }
            ModelSpec::Svm(p) if !(p.c > 0.0) => Err(Error::InvalidConfig(format!("C must be positive, got {}", p.c))),
            ModelSpec::Mlp(p) => p.validate(),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    Tree(Tree),
    Forest(Vec<Tree>),
    Svm(LinearOvr),
    Mlp(Mlp),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingDigest {
    pub n_train: usize,
    pub seed: u64,
    pub wall_time_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub params: ModelParams,
    pub class_names: Vec<PostureLabel>,
    pub digest: TrainingDigest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: PostureLabel,
    /// Leaf purity (DT), vote share (RF), logistic of the winning margin
    /// (SVM) or softmax probability (MLP).
    pub confidence: f64,
}

fn check_finite(x: &[[f64; N_SENSORS]]) -> Result<()> {
    match x.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
        Some(i) => Err(Error::InvalidInput(format!("row {i} has a non-finite feature"))),
        None => Ok(()),
    }
}

/// Trains on raw feature rows.
pub fn train_on(spec: &ModelSpec, x: &[[f64; N_SENSORS]], labels: &[PostureLabel]) -> Result<TrainedModel> {
    spec.validate()?;
    if x.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    if x.len() != labels.len() {
        return Err(Error::InvalidInput(format!("{} rows with {} labels", x.len(), labels.len())));
    }
    check_finite(x)?;
    let y: Vec<usize> = labels.iter().map(|l| l.index()).collect();
    if matches!(spec, ModelSpec::Svm(_) | ModelSpec::Mlp(_)) {
        let mut seen = [false; N_CLASSES];
        y.iter().for_each(|&c| seen[c] = true);
        let missing: Vec<PostureLabel> = PostureLabel::ALL.into_iter().filter(|l| !seen[l.index()]).collect();
        if !missing.is_empty() {
            return Err(Error::InsufficientClasses(missing));
        }
    }
    let start = Instant::now();
    let params = match spec {
        ModelSpec::Dt(p) => ModelParams::Tree(fit_tree(x, &y, p)),
        ModelSpec::Rf(p) => ModelParams::Forest(fit_forest(x, &y, p)),
        ModelSpec::Svm(p) => ModelParams::Svm(LinearOvr::fit(x, &y, p)?),
        ModelSpec::Mlp(p) => ModelParams::Mlp(Mlp::fit(x, &y, p)?),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        params,
        class_names: PostureLabel::ALL.to_vec(),
        digest: TrainingDigest {
            n_train: x.len(),
            seed: spec.seed(),
            wall_time_ms: start.elapsed().as_millis() as u64,
        },
    })
}

pub fn train(spec: &ModelSpec, train: &LabeledDataset) -> Result<TrainedModel> {
    train_on(spec, &train.features(), &train.labels())
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind()
    }

    /// Per-class scores whose argmax is the prediction.
    pub fn scores(&self, x: &[f64; N_SENSORS]) -> [f64; N_CLASSES] {
        match &self.params {
            ModelParams::Tree(t) => {
                let (c, conf) = t.leaf(x);
                let mut s = [0.0; N_CLASSES];
                s[c] = conf;
                s
            }
            ModelParams::Forest(trees) => forest_votes(trees, x),
            ModelParams::Svm(m) => m.margins(x),
            ModelParams::Mlp(m) => {
                let mut s = [0.0; N_CLASSES];
                s.copy_from_slice(&m.logits(x));
                s
            }
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<Prediction> {
        let x: &[f64; N_SENSORS] = features
            .try_into()
            .map_err(|_| Error::InvalidInput(format!("{} features, expected {N_SENSORS}", features.len())))?;
        Ok(self.predict_row(x))
    }

    pub fn predict_row(&self, x: &[f64; N_SENSORS]) -> Prediction {
        let scores = self.scores(x);
        let c = argmax(&scores);
        let confidence = match &self.params {
            ModelParams::Tree(_) => scores[c],
            ModelParams::Forest(trees) => scores[c] / trees.len() as f64,
            ModelParams::Svm(_) => 1.0 / (1.0 + (-scores[c]).exp()),
            ModelParams::Mlp(_) => {
                let m = scores[c];
                1.0 / scores.iter().map(|s| (s - m).exp()).sum::<f64>()
            }
        };
        Prediction { label: self.class_names[c], confidence }
    }

    pub fn predict_counts(&self, counts: &[u16; N_SENSORS]) -> Prediction {
        self.predict_row(&counts.map(f64::from))
    }
}

pub fn evaluate(model: &TrainedModel, test: &LabeledDataset) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::InsufficientData("empty test set".into()));
    }
    let predicted: Vec<PostureLabel> = test.rows.iter().map(|r| model.predict_row(&r.features()).label).collect();
    evaluate_predictions(&test.labels(), &predicted)
}

#[derive(Debug, Clone)]
pub struct RankedModel {
    pub model: TrainedModel,
    pub report: EvalReport,
    /// Set on the top-ranked entry only.
    pub winner: bool,
}

/// Trains and evaluates every spec, best accuracy first (ties by macro-F1,
/// then input order).
pub fn compare_models(specs: &[ModelSpec], train_set: &LabeledDataset, test_set: &LabeledDataset) -> Result<Vec<RankedModel>> {
    if specs.len() < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 model specs, got {}", specs.len())));
    }
    let mut ranked = specs
        .iter()
        .map(|s| {
            let model = train(s, train_set)?;
            let report = evaluate(&model, test_set)?;
            Ok(RankedModel { model, report, winner: false })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| {
        b.report.accuracy.total_cmp(&a.report.accuracy).then(b.report.f1_macro.total_cmp(&a.report.f1_macro))
    });
    ranked[0].winner = true;
    Ok(ranked)
}
