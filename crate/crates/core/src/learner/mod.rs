//! Text classifiers.
//!
//! [`TextClassifier`] is the contract the cascade depends on: ranked labels
//! with scores for a raw text. It is satisfied by the bundled TF-IDF +
//! softmax learner ([`LinearTextClassifier`]), by [`ConstantClassifier`] for
//! degenerate single-valued targets, and by [`ExternalClassifier`], which
//! forwards to an out-of-process service over a JSON-lines pipe.

mod external;
mod softmax;
mod tfidf;
mod tokenize;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use external::{ExternalClassifier, ExternalRequest, ExternalResponse};
pub use softmax::{fit_linear_softmax, gradient_check, rank, softmax, FitOutcome, LinearModel, Optimizer, TrainConfig};
pub use tfidf::{SparseVec, Vocabulary};
pub use tokenize::{tokenize, MARKER_CLOSE, MARKER_OPEN};

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("training data has a single class")]
    SingleClass,
    #[error("training set is empty or labels do not match rows")]
    EmptyTrainingSet,
    #[error("feature dimension mismatch: model expects {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("loss became non-finite at epoch {epoch}; try a smaller learning rate")]
    Diverged { epoch: usize },
    #[error("finite-difference epsilon must be in (0, 1e-2], got {0}")]
    InvalidEpsilon(f64),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("external classifier: {0}")]
    External(String),
}

/// Default cap on vocabulary size.
pub const DEFAULT_MAX_FEATURES: usize = 50_000;

/// A label with its score, highest first in rankings.
pub type Scored = (String, f64);

pub trait TextClassifier: Send + Sync {
    /// Labels the classifier can emit.
    fn class_names(&self) -> &[String];

    /// The `k` best labels for `text`, best first.
    fn predict_topk(&self, text: &str, k: usize) -> Result<Vec<Scored>, LearnerError>;

    fn predict(&self, text: &str) -> Result<String, LearnerError> {
        self.predict_topk(text, 1)?
            .into_iter()
            .next()
            .map(|(l, _)| l)
            .ok_or_else(|| LearnerError::External("empty ranking".into()))
    }
}

/// Sorted distinct labels and each example's index into them.
pub fn index_labels(labels: &[String]) -> (Vec<String>, Vec<usize>) {
    let classes: Vec<String> = labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let ys = labels.iter().map(|l| classes.binary_search(l).expect("label present")).collect();
    (classes, ys)
}

/// TF-IDF vocabulary plus softmax weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTextClassifier {
    pub vocabulary: Vocabulary,
    pub model: LinearModel,
    #[serde(default)]
    pub epoch_losses: Vec<f64>,
}

impl LinearTextClassifier {
    /// Fits the vocabulary on `texts` and trains on it.
    pub fn fit(
        texts: &[String],
        labels: &[String],
        config: &TrainConfig,
        max_features: usize,
    ) -> Result<Self, LearnerError> {
        if texts.len() != labels.len() || texts.is_empty() {
            return Err(LearnerError::EmptyTrainingSet);
        }
        let tokens: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t)).collect();
        let vocabulary = Vocabulary::fit(&tokens, max_features);
        let xs: Vec<SparseVec> = tokens.iter().map(|t| vocabulary.transform(t)).collect();
        let (classes, ys) = index_labels(labels);
        let out = fit_linear_softmax(&xs, &ys, classes, vocabulary.len(), config)?;
        Ok(Self { vocabulary, model: out.model, epoch_losses: out.epoch_losses })
    }

    pub fn featurize(&self, text: &str) -> SparseVec {
        self.vocabulary.transform(&tokenize(text))
    }
}

impl TextClassifier for LinearTextClassifier {
    fn class_names(&self) -> &[String] {
        &self.model.class_names
    }

    fn predict_topk(&self, text: &str, k: usize) -> Result<Vec<Scored>, LearnerError> {
        self.model.predict_proba_topk(&self.featurize(text), k)
    }
}

/// Always predicts one label with probability 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstantClassifier {
    pub classes: Vec<String>,
}

impl ConstantClassifier {
    pub fn new(label: impl Into<String>) -> Self {
        Self { classes: vec![label.into()] }
    }
}

impl TextClassifier for ConstantClassifier {
    fn class_names(&self) -> &[String] {
        &self.classes
    }

    fn predict_topk(&self, _text: &str, k: usize) -> Result<Vec<Scored>, LearnerError> {
        if k == 0 {
            return Err(LearnerError::InvalidK);
        }
        Ok(vec![(self.classes[0].clone(), 1.0)])
    }
}

/// Which implementation trains a stage or final model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierBackend {
    Linear {
        #[serde(default = "default_max_features")]
        max_features: usize,
    },
    /// Command line of a process speaking the JSON-lines protocol.
    External { command: Vec<String> },
}

fn default_max_features() -> usize {
    DEFAULT_MAX_FEATURES
}

impl Default for ClassifierBackend {
    fn default() -> Self {
        Self::Linear { max_features: DEFAULT_MAX_FEATURES }
    }
}

/// A trained classifier of any backend; serializable so cascades can be
/// stored on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedClassifier {
    Linear(LinearTextClassifier),
    Constant(ConstantClassifier),
    External(ExternalClassifier),
}

impl ClassifierBackend {
    /// Trains a model named `name` (used to address external models).
    pub fn fit(
        &self,
        name: &str,
        texts: &[String],
        labels: &[String],
        config: &TrainConfig,
    ) -> Result<TrainedClassifier, LearnerError> {
        match self {
            Self::Linear { max_features } => {
                Ok(TrainedClassifier::Linear(LinearTextClassifier::fit(texts, labels, config, *max_features)?))
            }
            Self::External { command } => {
                let mut client = ExternalClassifier::new(command.clone(), name);
                client.fit(texts, labels)?;
                Ok(TrainedClassifier::External(client))
            }
        }
    }
}

impl TrainedClassifier {
    fn inner(&self) -> &dyn TextClassifier {
        match self {
            Self::Linear(m) => m,
            Self::Constant(m) => m,
            Self::External(m) => m,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant(_))
    }
}

impl TextClassifier for TrainedClassifier {
    fn class_names(&self) -> &[String] {
        self.inner().class_names()
    }

    fn predict_topk(&self, text: &str, k: usize) -> Result<Vec<Scored>, LearnerError> {
        self.inner().predict_topk(text, k)
    }
}
