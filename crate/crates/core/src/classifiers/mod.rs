//! The four classifier families, trained on sparse TF-IDF vectors.
//!
//! All of them reduce multiclass to one-vs-rest (for the margin-based
//! kinds) or fit a shared softmax objective (boosted trees). Training is
//! deterministic for a fixed spec, input order, and seed.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorizer::SparseVector;

pub mod gbt;
pub mod logreg;
pub mod svm_linear;
pub mod svm_rbf;

pub use gbt::softmax_objective_and_grad;
pub use logreg::logreg_objective_and_grad;

/// Which classifier family to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    SvmLinear,
    SvmRbf,
    LogReg,
    Gbt,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 4] = [
        ClassifierKind::SvmLinear,
        ClassifierKind::SvmRbf,
        ClassifierKind::LogReg,
        ClassifierKind::Gbt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::SvmLinear => "svm_linear",
            ClassifierKind::SvmRbf => "svm_rbf",
            ClassifierKind::LogReg => "logreg",
            ClassifierKind::Gbt => "gbt",
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svm_linear" | "svm-l" => Ok(ClassifierKind::SvmLinear),
            "svm_rbf" | "svm-rbf" => Ok(ClassifierKind::SvmRbf),
            "logreg" | "lr" => Ok(ClassifierKind::LogReg),
            "gbt" | "xgboost" => Ok(ClassifierKind::Gbt),
            other => Err(Error::Validation(format!("unknown classifier `{other}`"))),
        }
    }
}

/// Hyperparameters for every kind; fields not used by a kind are ignored
/// by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    /// Margin/regularization trade-off for the SVMs and logistic
    /// regression.
    pub c: f64,
    /// RBF kernel width; `None` means 1 / n_features.
    pub gamma: Option<f64>,
    /// L2 penalty on the logistic-regression weights.
    pub l2_penalty: bool,
    /// Optional active-set pruning in the linear-SVM solver; affects
    /// speed, not results.
    pub shrinking: bool,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub n_rounds: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec {
            kind: ClassifierKind::SvmLinear,
            c: 1.0,
            gamma: None,
            l2_penalty: true,
            shrinking: false,
            max_depth: 6,
            learning_rate: 0.3,
            n_rounds: 100,
            max_iter: 1000,
            tol: 1e-4,
        }
    }
}

impl ClassifierSpec {
    /// Defaults for a kind. The SMO solver counts single pair updates as
    /// iterations, so its cap is larger than the epoch-counting solvers'.
    pub fn for_kind(kind: ClassifierKind) -> Self {
        let mut spec = ClassifierSpec {
            kind,
            ..ClassifierSpec::default()
        };
        if kind == ClassifierKind::SvmRbf {
            spec.max_iter = 100_000;
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.c <= 0.0 {
            return Err(Error::Validation(format!("C must be positive, got {}", self.c)));
        }
        if let Some(g) = self.gamma {
            if g <= 0.0 {
                return Err(Error::Validation(format!("gamma must be positive, got {g}")));
            }
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Validation(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.tol < 0.0 {
            return Err(Error::Validation(format!("tol must be >= 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Bijection between label strings and class ids; classes are ordered
/// lexicographically so the encoding is deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct LabelEncoding {
    classes: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelEncoding {
    /// Builds the encoding from the distinct labels of an iterator.
    pub fn from_labels<'a, I: IntoIterator<Item = &'a str>>(labels: I) -> Self {
        let mut classes: Vec<String> = labels
            .into_iter()
            .map(str::to_string)
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        classes.sort();
        Self::from(classes)
    }

    pub fn encode(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn decode(&self, class: usize) -> &str {
        &self.classes[class]
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

impl From<Vec<String>> for LabelEncoding {
    fn from(classes: Vec<String>) -> Self {
        let index = classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        LabelEncoding { classes, index }
    }
}

impl From<LabelEncoding> for Vec<String> {
    fn from(e: LabelEncoding) -> Self {
        e.classes
    }
}

/// Per-class dense weights and biases for the linear kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

/// One one-vs-rest RBF machine: support vectors with their signed dual
/// coefficients and the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfBinary {
    pub coeffs: Vec<f64>,
    pub support_vectors: Vec<SparseVector>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfParams {
    pub gamma: f64,
    pub machines: Vec<RbfBinary>,
}

/// Per-class tree ensembles under a shared softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    /// `trees[class][round]`.
    pub trees: Vec<Vec<gbt::Tree>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelParams {
    Linear(LinearParams),
    Rbf(RbfParams),
    Gbt(GbtParams),
    /// Degenerate model from single-class training data.
    Constant { class: usize },
}

/// Optimizer bookkeeping kept alongside the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingMeta {
    /// Iterations used (epochs, quasi-Newton steps, pair updates, or
    /// boosting rounds, per kind).
    pub iterations: usize,
    /// Final objective value (dual objective, regularized NLL, or
    /// training softmax loss).
    pub final_objective: f64,
    /// Training softmax loss after each boosting round (gbt only).
    pub train_loss_per_round: Vec<f64>,
    pub warnings: Vec<String>,
}

/// A fitted classifier of one of the four kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ClassifierKind,
    pub encoding: LabelEncoding,
    pub n_features: usize,
    pub params: ModelParams,
    pub meta: TrainingMeta,
}

/// Trains a classifier of the requested kind.
///
/// `y` holds class ids under `encoding`. Training is one-vs-rest for the
/// SVMs and logistic regression and softmax boosting for trees. Inputs
/// with a single distinct class produce a constant model with a warning.
pub fn train(
    x: &[SparseVector],
    y: &[usize],
    n_features: usize,
    encoding: &LabelEncoding,
    spec: &ClassifierSpec,
    seed: u64,
) -> Result<TrainedModel> {
    spec.validate()?;
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} vectors vs {} labels",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 training examples, got {}",
            x.len()
        )));
    }
    for (i, v) in x.iter().enumerate() {
        if let Some(&(col, _)) = v.entries().last() {
            if col >= n_features {
                return Err(Error::Dimension(format!(
                    "vector {i} has column {col} but n_features is {n_features}"
                )));
            }
        }
    }
    for &label in y {
        if label >= encoding.len() {
            return Err(Error::Validation(format!(
                "class id {label} out of range for {} classes",
                encoding.len()
            )));
        }
    }
    let mut distinct: Vec<usize> = y.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() == 1 {
        let class = distinct[0];
        let warning = format!(
            "training data contains a single class `{}`; constant model",
            encoding.decode(class)
        );
        log::warn!("{warning}");
        return Ok(TrainedModel {
            kind: spec.kind,
            encoding: encoding.clone(),
            n_features,
            params: ModelParams::Constant { class },
            meta: TrainingMeta {
                warnings: vec![warning],
                ..TrainingMeta::default()
            },
        });
    }
    let (params, meta) = match spec.kind {
        ClassifierKind::SvmLinear => svm_linear::train_ovr(x, y, n_features, encoding.len(), spec, seed),
        ClassifierKind::LogReg => logreg::train_ovr(x, y, n_features, encoding.len(), spec),
        ClassifierKind::SvmRbf => svm_rbf::train_ovr(x, y, n_features, encoding.len(), spec),
        ClassifierKind::Gbt => gbt::train(x, y, n_features, encoding.len(), spec),
    };
    Ok(TrainedModel {
        kind: spec.kind,
        encoding: encoding.clone(),
        n_features,
        params,
        meta,
    })
}

/// Per-class scores for one input: raw margins for the SVM kinds,
/// probabilities summing to 1 for logistic regression and boosted trees.
pub fn decision_scores(model: &TrainedModel, x: &SparseVector) -> Vec<f64> {
    let k = model.encoding.len();
    match &model.params {
        ModelParams::Constant { class } => {
            let mut s = vec![0.0; k];
            s[*class] = 1.0;
            s
        }
        ModelParams::Linear(p) => {
            let margins: Vec<f64> = (0..k)
                .map(|c| x.dot_dense(&p.weights[c]) + p.biases[c])
                .collect();
            match model.kind {
                ClassifierKind::LogReg => {
                    let probs: Vec<f64> = margins.iter().map(|&m| sigmoid(m)).collect();
                    let total: f64 = probs.iter().sum();
                    probs.iter().map(|p| p / total).collect()
                }
                _ => margins,
            }
        }
        ModelParams::Rbf(p) => p
            .machines
            .iter()
            .map(|m| {
                let mut acc = 0.0;
                for (coef, sv) in m.coeffs.iter().zip(&m.support_vectors) {
                    acc += coef * kernel_rbf(sv, x, p.gamma);
                }
                acc + m.bias
            })
            .collect(),
        ModelParams::Gbt(p) => {
            let raw: Vec<f64> = p
                .trees
                .iter()
                .map(|per_class| per_class.iter().map(|t| t.predict(x)).sum())
                .collect();
            softmax(&raw)
        }
    }
}

/// Argmax of [`decision_scores`]; ties break toward the lowest class id.
pub fn predict(model: &TrainedModel, x: &SparseVector) -> usize {
    argmax(&decision_scores(model, x))
}

pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax(raw: &[f64]) -> Vec<f64> {
    let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = raw.iter().map(|&s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

/// exp(-gamma * ||x1 - x2||^2) over the sparse union of indices.
pub fn kernel_rbf(x1: &SparseVector, x2: &SparseVector, gamma: f64) -> f64 {
    let (a, b) = (x1.entries(), x2.entries());
    let (mut i, mut j) = (0, 0);
    let mut dist_sq = 0.0;
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => {
                dist_sq += a[i].1 * a[i].1;
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                dist_sq += b[j].1 * b[j].1;
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                let d = a[i].1 - b[j].1;
                dist_sq += d * d;
                i += 1;
                j += 1;
            }
        }
    }
    while i < a.len() {
        dist_sq += a[i].1 * a[i].1;
        i += 1;
    }
    while j < b.len() {
        dist_sq += b[j].1 * b[j].1;
        j += 1;
    }
    (-gamma * dist_sq).exp()
}

const MODEL_FORMAT: &str = "pathclass.model.v1";

#[derive(Serialize, Deserialize)]
struct ModelEnvelope {
    format: String,
    model: TrainedModel,
}

impl TrainedModel {
    /// Serializes as versioned JSON. f64 values round-trip exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let envelope = ModelEnvelope {
            format: MODEL_FORMAT.to_string(),
            model: self.clone(),
        };
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, &envelope)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let envelope: ModelEnvelope = serde_json::from_reader(file)?;
        if envelope.format != MODEL_FORMAT {
            return Err(Error::ModelIo(format!(
                "unsupported model format `{}`",
                envelope.format
            )));
        }
        Ok(envelope.model)
    }
}
