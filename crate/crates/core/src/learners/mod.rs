//! Classifiers behind a uniform fit/score contract.
//!
//! Every fitted [`Model`] maps a feature vector to a score in `[0, 1]` and
//! predicts `true` when the score is at least 0.5 (an exact tie predicts
//! `true`). Fitting is deterministic given the training set, the parameters
//! and the seed.

mod baseline;
mod forest;
mod logistic;
mod naive_bayes;
mod svm;
mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use baseline::RandomBaseline;
pub use forest::{ForestParams, MaxFeatures, RandomForest};
pub use logistic::{loss_and_grad as logistic_loss_and_grad, LogisticParams, LogisticRegression};
pub use naive_bayes::{GaussianNaiveBayes, NaiveBayesParams};
pub use svm::{default_gamma, rbf_kernel, DualSolution, SvmParams, SvmRbf};
pub use tree::{DecisionTree, TreeParams};

/// Decision threshold on scores; ties predict `true`.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    SvmRbf,
    Logistic,
    Tree,
    GaussianNb,
    Forest,
    RandomBaseline,
}

impl Algorithm {
    /// The five fusion learners.
    pub const LEARNERS: [Algorithm; 5] = [
        Algorithm::SvmRbf,
        Algorithm::Logistic,
        Algorithm::Tree,
        Algorithm::GaussianNb,
        Algorithm::Forest,
    ];

    /// The five learners plus the random baseline.
    pub const ALL: [Algorithm; 6] = [
        Algorithm::SvmRbf,
        Algorithm::Logistic,
        Algorithm::Tree,
        Algorithm::GaussianNb,
        Algorithm::Forest,
        Algorithm::RandomBaseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::SvmRbf => "svm_rbf",
            Algorithm::Logistic => "logistic",
            Algorithm::Tree => "tree",
            Algorithm::GaussianNb => "gaussian_nb",
            Algorithm::Forest => "forest",
            Algorithm::RandomBaseline => "random_baseline",
        }
    }

    /// Human-readable name used in rendered tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Algorithm::SvmRbf => "SVM",
            Algorithm::Logistic => "Logistic regression",
            Algorithm::Tree => "Decision tree",
            Algorithm::GaussianNb => "Naive Bayes",
            Algorithm::Forest => "Random forest",
            Algorithm::RandomBaseline => "Random (baseline)",
        }
    }

    pub fn needs_both_classes(self) -> bool {
        matches!(self, Algorithm::SvmRbf | Algorithm::Logistic)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let alg = match s.trim().to_ascii_lowercase().as_str() {
            "svm_rbf" | "svm" => Algorithm::SvmRbf,
            "logistic" | "lr" => Algorithm::Logistic,
            "tree" | "dt" => Algorithm::Tree,
            "gaussian_nb" | "nb" => Algorithm::GaussianNb,
            "forest" | "rf" => Algorithm::Forest,
            "random_baseline" | "baseline" | "random" => Algorithm::RandomBaseline,
            other => return Err(Error::Argument(format!("unknown algorithm `{other}`"))),
        };
        Ok(alg)
    }
}

/// Row-major training matrix with Boolean targets.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainSet {
    features: Vec<f64>,
    n_features: usize,
    targets: Vec<bool>,
}

impl TrainSet {
    pub fn new(features: Vec<f64>, n_features: usize, targets: Vec<bool>) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::Argument("feature dimension must be positive".to_owned()));
        }
        if features.len() != n_features * targets.len() {
            return Err(Error::Validation(format!(
                "{} feature values do not form {} rows of {n_features}",
                features.len(),
                targets.len()
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite feature value at row {}, column {}",
                pos / n_features,
                pos % n_features
            )));
        }
        Ok(Self {
            features,
            n_features,
            targets,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], targets: Vec<bool>) -> Result<Self> {
        let n_features = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_features) {
            return Err(Error::Validation("rows have differing lengths".to_owned()));
        }
        Self::new(rows.concat(), n_features, targets)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.features.chunks_exact(self.n_features)
    }

    pub fn targets(&self) -> &[bool] {
        &self.targets
    }

    pub fn positives(&self) -> usize {
        self.targets.iter().filter(|&&t| t).count()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LearnerParams {
    pub forest: ForestParams,
    pub svm: SvmParams,
    pub logistic: LogisticParams,
    pub tree: TreeParams,
    pub nb: NaiveBayesParams,
}

impl LearnerParams {
    pub fn validate(&self) -> Result<()> {
        self.forest.validate()?;
        self.svm.validate()?;
        self.logistic.validate()?;
        self.tree.validate()?;
        self.nb.validate()
    }
}

/// Scoring surface shared by every fitted model.
pub trait Classifier {
    fn feature_dim(&self) -> usize;

    /// Score in `[0, 1]` for a vector of length `feature_dim()`. Callers
    /// check the dimension.
    fn score_unchecked(&self, x: &[f64]) -> f64;
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum Model {
    SvmRbf(SvmRbf),
    Logistic(LogisticRegression),
    Tree(DecisionTree),
    GaussianNb(GaussianNaiveBayes),
    Forest(RandomForest),
    RandomBaseline(RandomBaseline),
}

impl Model {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            Model::SvmRbf(_) => Algorithm::SvmRbf,
            Model::Logistic(_) => Algorithm::Logistic,
            Model::Tree(_) => Algorithm::Tree,
            Model::GaussianNb(_) => Algorithm::GaussianNb,
            Model::Forest(_) => Algorithm::Forest,
            Model::RandomBaseline(_) => Algorithm::RandomBaseline,
        }
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            Model::SvmRbf(m) => m,
            Model::Logistic(m) => m,
            Model::Tree(m) => m,
            Model::GaussianNb(m) => m,
            Model::Forest(m) => m,
            Model::RandomBaseline(m) => m,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.inner().feature_dim()
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        let dim = self.feature_dim();
        if x.len() != dim {
            return Err(Error::Argument(format!(
                "{} model expects {dim} features, got {}",
                self.algorithm(),
                x.len()
            )));
        }
        Ok(self.inner().score_unchecked(x))
    }

    pub fn predict(&self, x: &[f64]) -> Result<bool> {
        self.score(x).map(predict_from_score)
    }
}

pub fn predict_from_score(score: f64) -> bool {
    score >= DECISION_THRESHOLD
}

/// Fits `algorithm` on `train`.
pub fn fit(algorithm: Algorithm, train: &TrainSet, params: &LearnerParams, seed: u64) -> Result<Model> {
    if train.is_empty() {
        return Err(Error::DegenerateData("empty training set".to_owned()));
    }
    if algorithm.needs_both_classes() {
        let pos = train.positives();
        if pos == 0 || pos == train.len() {
            return Err(Error::DegenerateData(format!(
                "{algorithm} needs both classes; training set has {pos} positives of {}",
                train.len()
            )));
        }
    }
    let model = match algorithm {
        Algorithm::SvmRbf => Model::SvmRbf(SvmRbf::fit(train, &params.svm)?),
        Algorithm::Logistic => Model::Logistic(LogisticRegression::fit(train, &params.logistic)?),
        Algorithm::Tree => Model::Tree(DecisionTree::fit(train, &params.tree)?),
        Algorithm::GaussianNb => Model::GaussianNb(GaussianNaiveBayes::fit(train, &params.nb)?),
        Algorithm::Forest => Model::Forest(RandomForest::fit(train, &params.forest, seed)?),
        Algorithm::RandomBaseline => Model::RandomBaseline(RandomBaseline::new(seed, train.n_features())),
    };
    Ok(model)
}

/// Stand-alone random baseline model.
pub fn random_baseline(seed: u64, feature_dim: usize) -> Model {
    Model::RandomBaseline(RandomBaseline::new(seed, feature_dim))
}

pub const MODEL_FORMAT: &str = "helpfusion-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: Model,
}

/// Serializes a model as versioned JSON.
pub fn model_to_json(model: &Model) -> Result<String> {
    let file = ModelFile {
        format: MODEL_FORMAT.to_owned(),
        version: MODEL_FORMAT_VERSION,
        model: model.clone(),
    };
    serde_json::to_string(&file).map_err(|e| Error::Validation(format!("serializing model: {e}")))
}

pub fn model_from_json(text: &str, source: &Path) -> Result<Model> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::format(source, "<model>", e.to_string()))?;
    if file.format != MODEL_FORMAT || file.version != MODEL_FORMAT_VERSION {
        return Err(Error::format(
            source,
            "version",
            format!(
                "unsupported model format `{}` v{} (expected `{MODEL_FORMAT}` v{MODEL_FORMAT_VERSION})",
                file.format, file.version
            ),
        ));
    }
    Ok(file.model)
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
