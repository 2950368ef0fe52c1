//! Versioned JSON model files.
//!
//! ```json
//! { "version": 1, "model_kind": "lstm", "model": { ... },
//!   "scaler": { ... }, "metadata": { ... } }
//! ```
//!
//! Matrices are stored row-major. A file whose `version` differs from
//! [`CHECKPOINT_VERSION`] is refused before the rest is parsed.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{FlatFeatureVector, KnnModel, LogRegModel, RandomForestModel, ThresholdDetector};
use crate::error::{Error, Result};
use crate::metrics::{EvaluationSet, Predictions, Predictor};
use crate::mode::argmax_mode;
use crate::mode::{DegradationMode, NUM_CLASSES};
use crate::neural::{predict_proba, LstmNetwork};
use crate::pipeline::{Scaler, WindowedSample};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lstm,
    Knn,
    Logreg,
    Rf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Lstm, ModelKind::Knn, ModelKind::Logreg, ModelKind::Rf];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lstm => "lstm",
            ModelKind::Knn => "knn",
            ModelKind::Logreg => "logreg",
            ModelKind::Rf => "rf",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Argument(format!("unknown model kind '{s}' (expected lstm, knn, logreg or rf)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_kind", content = "model", rename_all = "lowercase")]
pub enum TrainedModel {
    Lstm(LstmNetwork),
    Knn(KnnModel),
    Logreg(LogRegModel),
    Rf(RandomForestModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Lstm(_) => ModelKind::Lstm,
            TrainedModel::Knn(_) => ModelKind::Knn,
            TrainedModel::Logreg(_) => ModelKind::Logreg,
            TrainedModel::Rf(_) => ModelKind::Rf,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub master_seed: u64,
    pub train_samples: usize,
    /// LSTM only.
    pub epochs_run: Option<usize>,
    pub best_epoch: Option<usize>,
    /// Logistic regression only.
    pub converged: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    #[serde(flatten)]
    pub model: TrainedModel,
    pub scaler: Scaler,
    pub metadata: TrainingMetadata,
}

impl Checkpoint {
    pub fn new(model: TrainedModel, scaler: Scaler, metadata: TrainingMetadata) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            model,
            scaler,
            metadata,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
        if found != u64::from(CHECKPOINT_VERSION) {
            return Err(Error::VersionMismatch {
                found,
                expected: CHECKPOINT_VERSION,
            });
        }
        let checkpoint: Checkpoint = serde_json::from_value(value)?;
        if let TrainedModel::Lstm(net) = &checkpoint.model {
            net.validate()?;
        }
        Ok(checkpoint)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_json(&text).map_err(|e| match e {
            Error::Json(inner) => Error::Format {
                path: path.to_path_buf(),
                message: inner.to_string(),
            },
            other => other,
        })
    }
}

fn one_hot(mode: DegradationMode) -> [f64; NUM_CLASSES] {
    let mut s = [0.0; NUM_CLASSES];
    s[mode.index()] = 1.0;
    s
}

impl Predictor for Checkpoint {
    fn predict_set(&self, set: &EvaluationSet<'_>) -> Result<Predictions> {
        let scaled: Vec<WindowedSample> = set
            .raw
            .iter()
            .map(|w| self.scaler.transform(w, true))
            .collect::<Result<_>>()?;
        if let TrainedModel::Lstm(net) = &self.model {
            let probs = predict_proba(net, &scaled)?;
            return Ok(probs.into_iter().map(|p| (argmax_mode(&p), p)).collect());
        }
        scaled
            .iter()
            .map(|w| {
                let v = FlatFeatureVector::from_window(w)?;
                let q = v.as_slice();
                match &self.model {
                    TrainedModel::Knn(m) => Ok((m.predict(q)?, m.vote_fractions(q)?)),
                    TrainedModel::Logreg(m) => m.predict(q),
                    TrainedModel::Rf(m) => Ok((m.predict(q)?, m.vote_fractions(q)?)),
                    TrainedModel::Lstm(_) => unreachable!("handled above"),
                }
            })
            .collect()
    }
}

/// Threshold rules on raw currents; scores are one-hot.
impl Predictor for ThresholdDetector {
    fn predict_set(&self, set: &EvaluationSet<'_>) -> Result<Predictions> {
        set.raw
            .iter()
            .map(|w| {
                let m = self.classify(&w.currents, w.laser.threshold_current_ma)?;
                Ok((m, one_hot(m)))
            })
            .collect()
    }
}
