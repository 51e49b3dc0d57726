//! Eight classifiers behind one train / predict contract.
//!
//! Every model outputs the probability that a part is normal. Input
//! representation depends on the kind (see [`ModelKind::representation`]):
//! threshold trees take cleaned values in original units, CHAID and naive
//! Bayes take discretized predictors, and the gradient-trained models take
//! standardized predictors.

pub mod c5;
pub mod cart;
pub mod chaid;
pub mod criteria;
pub mod logreg;
pub mod mlp;
pub mod nbayes;
pub mod quest;
pub mod svm;
pub mod tree;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{Class, Dataset, FieldKind, FieldSpec, Record};
use crate::error::{Error, Result};
use crate::preprocess::{mean_sd, Representation};

pub use criteria::{chi_square, entropy, gini_impurity};
pub use logreg::Logistic;
pub use mlp::Mlp;
pub use nbayes::NaiveBayes;
pub use svm::Svm;
pub use tree::{Split, Tree, TreeNode};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Weighted-model fields whose importance falls below this are unused.
pub const UNUSED_IMPORTANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Chaid,
    Cart,
    Quest,
    C5,
    Nbayes,
    Logreg,
    Svm,
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 8] = [
        ModelKind::Chaid,
        ModelKind::Mlp,
        ModelKind::Cart,
        ModelKind::Quest,
        ModelKind::Nbayes,
        ModelKind::Logreg,
        ModelKind::Svm,
        ModelKind::C5,
    ];

    /// The seven algorithms of the comparison table, in table order.
    pub const COMPARISON: [ModelKind; 7] = [
        ModelKind::Chaid,
        ModelKind::Mlp,
        ModelKind::Cart,
        ModelKind::Quest,
        ModelKind::Nbayes,
        ModelKind::Logreg,
        ModelKind::Svm,
    ];

    pub const TREES: [ModelKind; 4] = [
        ModelKind::Chaid,
        ModelKind::Cart,
        ModelKind::Quest,
        ModelKind::C5,
    ];

    pub fn is_tree(self) -> bool {
        Self::TREES.contains(&self)
    }

    pub fn representation(self) -> Representation {
        match self {
            ModelKind::Cart | ModelKind::Quest | ModelKind::C5 => Representation::Raw,
            ModelKind::Chaid | ModelKind::Nbayes => Representation::Discretized,
            ModelKind::Logreg | ModelKind::Svm | ModelKind::Mlp => Representation::Standardized,
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            ModelKind::Chaid => "chaid",
            ModelKind::Cart => "cart",
            ModelKind::Quest => "quest",
            ModelKind::C5 => "c5",
            ModelKind::Nbayes => "nbayes",
            ModelKind::Logreg => "logreg",
            ModelKind::Svm => "svm",
            ModelKind::Mlp => "mlp",
        }
    }

    /// Name used in report tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Chaid => "CHAID",
            ModelKind::Cart => "C&R Tree",
            ModelKind::Quest => "QUEST",
            ModelKind::C5 => "C5",
            ModelKind::Nbayes => "Bayesian Network",
            ModelKind::Logreg => "Logistic regression",
            ModelKind::Svm => "SVM",
            ModelKind::Mlp => "Neural net",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model kind \"{s}\"")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub chaid_alpha: f64,
    pub quest_alpha: f64,
    /// Pruning confidence of the C5 tree.
    pub confidence: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 8,
            min_leaf: 5,
            chaid_alpha: 0.05,
            quest_alpha: 0.05,
            confidence: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRegConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
    pub gradient_tolerance: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            learning_rate: 0.5,
            iterations: 5000,
            l2: 1e-4,
            gradient_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub c: f64,
    pub kernel: Kernel,
    /// RBF width; `None` means `1 / predictors`.
    pub gamma: Option<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            kernel: Kernel::Rbf,
            gamma: None,
            tolerance: 1e-3,
            max_iterations: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden: 8,
            epochs: 200,
            learning_rate: 0.5,
            batch_size: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub tree: TreeConfig,
    pub logreg: LogRegConfig,
    pub svm: SvmConfig,
    pub mlp: MlpConfig,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tree.max_depth", self.tree.max_depth as f64),
            ("tree.min_leaf", self.tree.min_leaf as f64),
            ("tree.chaid_alpha", self.tree.chaid_alpha),
            ("tree.quest_alpha", self.tree.quest_alpha),
            ("tree.confidence", self.tree.confidence),
            ("logreg.learning_rate", self.logreg.learning_rate),
            ("logreg.gradient_tolerance", self.logreg.gradient_tolerance),
            ("svm.c", self.svm.c),
            ("svm.tolerance", self.svm.tolerance),
            ("mlp.hidden", self.mlp.hidden as f64),
            ("mlp.learning_rate", self.mlp.learning_rate),
            ("mlp.batch_size", self.mlp.batch_size as f64),
        ];
        for (key, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config {
                    key: format!("train.{key}"),
                    message: format!("must be positive, got {v}"),
                });
            }
        }
        if self.logreg.l2 < 0.0 || self.svm.gamma.is_some_and(|g| !(g > 0.0)) {
            return Err(Error::Config {
                key: "train".into(),
                message: "l2 must be nonnegative and gamma positive".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelParams {
    Tree(Tree),
    NaiveBayes(NaiveBayes),
    Logistic(Logistic),
    Svm(Svm),
    Mlp(Mlp),
    /// Constant prediction, used when training data holds one class.
    Constant { normal_proba: f64 },
}

/// A trained classifier; immutable after training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub kind: ModelKind,
    pub config: TrainConfig,
    /// Predictor specs of the representation the model was trained on.
    pub fields: Vec<FieldSpec>,
    pub used_fields: BTreeSet<String>,
    /// Set when training degenerated (e.g. a single-class training set).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    pub params: ModelParams,
    /// Wall-clock training time; not serialized so model files stay
    /// reproducible.
    #[serde(skip)]
    pub train_seconds: f64,
}

impl TrainedModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: TrainedModel = serde_json::from_str(text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported model format version {}",
                model.format_version
            )));
        }
        Ok(model)
    }

    pub fn tree(&self) -> Option<&Tree> {
        match &self.params {
            ModelParams::Tree(t) => Some(t),
            _ => None,
        }
    }

    pub fn unused_field_count(&self) -> usize {
        self.fields.len() - self.used_fields.len()
    }

    /// Indented rendering for tree models.
    pub fn render_tree(&self) -> Option<String> {
        self.tree().map(|t| t.render(&self.fields))
    }
}

struct TrainingData {
    x: Vec<Vec<f64>>,
    y: Vec<Class>,
    fields: Vec<FieldSpec>,
}

fn training_data(kind: ModelKind, dataset: &Dataset) -> Result<TrainingData> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let fields: Vec<FieldSpec> = dataset.schema().predictors().cloned().collect();
    let mut x = Vec::with_capacity(dataset.len());
    let mut y = Vec::with_capacity(dataset.len());
    for (row, r) in dataset.records().iter().enumerate() {
        let values = r
            .values
            .iter()
            .enumerate()
            .map(|(j, v)| {
                v.ok_or_else(|| {
                    Error::Precondition(format!(
                        "row {row}: missing \"{}\"; impute before training",
                        fields[j].name
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        x.push(values);
        y.push(
            r.label
                .ok_or_else(|| Error::Precondition(format!("row {row} has no label")))?,
        );
    }
    match kind.representation() {
        Representation::Raw => {}
        Representation::Discretized => {
            if let Some(f) = fields.iter().find(|f| f.kind != FieldKind::Set) {
                return Err(Error::Precondition(format!(
                    "{kind} needs discretized predictors; \"{}\" is a range field",
                    f.name
                )));
            }
        }
        Representation::Standardized => {
            for (j, f) in fields.iter().enumerate() {
                if f.kind != FieldKind::Range {
                    continue;
                }
                let col: Vec<f64> = x.iter().map(|r| r[j]).collect();
                let (m, s) = mean_sd(&col);
                if m.abs() > 1e-6 || (s - 1.0).abs() > 1e-6 {
                    return Err(Error::Precondition(format!(
                        "{kind} needs standardized predictors; \"{}\" has mean {m:.3e}, sd {s:.6}",
                        f.name
                    )));
                }
            }
        }
    }
    Ok(TrainingData { x, y, fields })
}

/// Trains one model. Deterministic for a fixed `config.seed`.
///
/// A single-class training set yields a constant model with `warning` set.
pub fn train(kind: ModelKind, dataset: &Dataset, config: &TrainConfig) -> Result<TrainedModel> {
    config.validate()?;
    let start = Instant::now();
    let data = training_data(kind, dataset)?;
    let node_data = tree::NodeData {
        x: &data.x,
        y: &data.y,
        fields: &data.fields,
    };
    let counts = node_data.counts(&(0..data.y.len()).collect::<Vec<_>>());
    let single = counts[0] == 0 || counts[1] == 0;
    let targets: Vec<f64> = data.y.iter().map(|c| c.as_f64()).collect();

    let (params, importance): (ModelParams, Option<Vec<f64>>) = if single && !kind.is_tree() {
        let p = if counts[1] > 0 { 1.0 } else { 0.0 };
        (ModelParams::Constant { normal_proba: p }, Some(vec![0.0; data.fields.len()]))
    } else {
        match kind {
            ModelKind::Cart => (ModelParams::Tree(cart::fit(&node_data, &config.tree)), None),
            ModelKind::C5 => (ModelParams::Tree(c5::fit(&node_data, &config.tree)), None),
            ModelKind::Chaid => (ModelParams::Tree(chaid::fit(&node_data, &config.tree)), None),
            ModelKind::Quest => (ModelParams::Tree(quest::fit(&node_data, &config.tree)), None),
            ModelKind::Nbayes => {
                let m = NaiveBayes::fit(&data.x, &data.y, &data.fields);
                let imp = m.importance();
                (ModelParams::NaiveBayes(m), Some(imp))
            }
            ModelKind::Logreg => {
                let m = Logistic::fit(&data.x, &targets, &config.logreg);
                let imp = m.weights.iter().map(|w| w.abs()).collect();
                (ModelParams::Logistic(m), Some(imp))
            }
            ModelKind::Svm => {
                let labels: Vec<bool> = data.y.iter().map(|c| c.is_normal()).collect();
                let m = Svm::fit(&data.x, &labels, &config.svm);
                let imp = m.importance.clone();
                (ModelParams::Svm(m), Some(imp))
            }
            ModelKind::Mlp => {
                let m = Mlp::fit(&data.x, &targets, &config.mlp, config.seed);
                let imp = m.importance();
                (ModelParams::Mlp(m), Some(imp))
            }
        }
    };

    let used_fields = match (&params, importance) {
        (ModelParams::Tree(t), _) => t
            .used_fields()
            .into_iter()
            .map(|j| data.fields[j].name.clone())
            .collect(),
        (_, Some(imp)) => imp
            .iter()
            .zip(&data.fields)
            .filter(|(v, _)| **v >= UNUSED_IMPORTANCE)
            .map(|(_, f)| f.name.clone())
            .collect(),
        (_, None) => BTreeSet::new(),
    };
    let warning = single.then(|| {
        let class = if counts[1] > 0 { Class::Normal } else { Class::Defective };
        format!("training set holds only {class} records; model predicts a constant")
    });
    if let Some(w) = &warning {
        log::warn!("{kind}: {w}");
    }
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        kind,
        config: *config,
        fields: data.fields,
        used_fields,
        warning,
        params,
        train_seconds: start.elapsed().as_secs_f64(),
    })
}

fn complete_values(model: &TrainedModel, record: &Record) -> Result<Vec<f64>> {
    record
        .values
        .iter()
        .zip(&model.fields)
        .map(|(v, f)| v.ok_or_else(|| Error::MissingValue(f.name.clone())))
        .collect()
}

/// Probability that the part is normal, in `[0, 1]`.
pub fn predict_proba(model: &TrainedModel, record: &Record) -> Result<f64> {
    if record.values.len() != model.fields.len() {
        return Err(Error::Schema(format!(
            "record has {} predictor values, model expects {}",
            record.values.len(),
            model.fields.len()
        )));
    }
    let p = match &model.params {
        ModelParams::Tree(t) => t.proba(&record.values, &model.fields)?,
        ModelParams::Constant { normal_proba } => *normal_proba,
        ModelParams::NaiveBayes(m) => m.proba(&complete_values(model, record)?, &model.fields)?,
        ModelParams::Logistic(m) => m.proba(&complete_values(model, record)?),
        ModelParams::Svm(m) => m.proba(&complete_values(model, record)?),
        ModelParams::Mlp(m) => m.proba(&complete_values(model, record)?),
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Normal iff `predict_proba >= threshold`.
pub fn predict_label(model: &TrainedModel, record: &Record, threshold: f64) -> Result<Class> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(format!("threshold must be in [0, 1], got {threshold}")));
    }
    Ok(label_for(predict_proba(model, record)?, threshold))
}

pub(crate) fn label_for(proba: f64, threshold: f64) -> Class {
    if proba >= threshold {
        Class::Normal
    } else {
        Class::Defective
    }
}
