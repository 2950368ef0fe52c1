//! Model fitting and the end-to-end comparison, without touching disk.

use log::info;

use crate::baselines::{flatten_all, knn_fit, logreg_fit, rf_fit};
use crate::checkpoint::{Checkpoint, ModelKind, TrainedModel, TrainingMetadata};
use crate::config::RunConfig;
use crate::degradation::{generate_dataset, DegradationSample};
use crate::error::Result;
use crate::metrics::{compare_models, ComparisonRow, EvaluationSet, ModelReport, Predictor};
use crate::neural::{self, EpochRecord};
use crate::pipeline::{preprocess, SplitDataset, SplitName};

pub const THRESHOLD_MODEL_NAME: &str = "threshold";

/// A fitted model and, for the LSTM, its per-epoch history.
pub struct FittedModel {
    pub checkpoint: Checkpoint,
    pub history: Option<Vec<EpochRecord>>,
}

/// `config` must already have its seeds resolved.
pub fn generate(config: &RunConfig) -> Result<Vec<DegradationSample>> {
    generate_dataset(&config.generation)
}

pub fn split(config: &RunConfig, samples: &[DegradationSample]) -> Result<SplitDataset> {
    preprocess(
        samples,
        &config.generation,
        config.split,
        config.seeds().split,
        &config.partial_failure,
    )
}

pub fn fit_model(kind: ModelKind, config: &RunConfig, split: &SplitDataset) -> Result<FittedModel> {
    let seeds = config.seeds();
    let train = split.scaled(SplitName::Train)?;
    let mut metadata = TrainingMetadata {
        master_seed: config.seed,
        train_samples: train.len(),
        ..TrainingMetadata::default()
    };
    info!("fitting {kind} on {} windows", train.len());
    let (model, history) = match kind {
        ModelKind::Lstm => {
            let val = split.scaled(SplitName::Val)?;
            let out = neural::train(&config.training, &train, &val, seeds.init, seeds.shuffle)?;
            metadata.epochs_run = Some(out.history.len());
            metadata.best_epoch = Some(out.best_epoch);
            (TrainedModel::Lstm(out.network), Some(out.history))
        }
        ModelKind::Knn => {
            let (v, l) = flatten_all(&train)?;
            (TrainedModel::Knn(knn_fit(v, l, config.knn.k)?), None)
        }
        ModelKind::Logreg => {
            let (v, l) = flatten_all(&train)?;
            let m = logreg_fit(&v, &l, config.logreg, seeds.logreg)?;
            metadata.converged = Some(m.converged);
            (TrainedModel::Logreg(m), None)
        }
        ModelKind::Rf => {
            let (v, l) = flatten_all(&train)?;
            (TrainedModel::Rf(rf_fit(&v, &l, config.forest, seeds.forest)?), None)
        }
    };
    Ok(FittedModel {
        checkpoint: Checkpoint::new(model, split.scaler.clone(), metadata),
        history,
    })
}

/// Evaluates checkpoints (and optionally the threshold rules) on the test split.
pub fn evaluate(
    config: &RunConfig,
    split: &SplitDataset,
    checkpoints: &[Checkpoint],
    include_threshold: bool,
) -> Result<Vec<(ComparisonRow, ModelReport)>> {
    let names: Vec<String> = checkpoints.iter().map(|c| c.kind().to_string()).collect();
    let mut models: Vec<(&str, &dyn Predictor)> = names
        .iter()
        .zip(checkpoints)
        .map(|(n, c)| (n.as_str(), c as &dyn Predictor))
        .collect();
    if include_threshold {
        models.push((THRESHOLD_MODEL_NAME, &config.threshold));
    }
    compare_models(&models, &EvaluationSet { raw: &split.test })
}

pub struct ExperimentOutcome {
    pub split: SplitDataset,
    pub fitted: Vec<FittedModel>,
    pub results: Vec<(ComparisonRow, ModelReport)>,
}

impl ExperimentOutcome {
    pub fn row(&self, model: &str) -> Option<&ComparisonRow> {
        self.results.iter().map(|r| &r.0).find(|r| r.model == model)
    }
}

/// Generate, split, fit all four models and compare them with the
/// threshold rules.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentOutcome> {
    let mut config = config.clone();
    config.resolve_seeds();
    config.validate()?;
    let samples = generate(&config)?;
    let split = split(&config, &samples)?;
    let fitted = ModelKind::ALL
        .iter()
        .map(|&k| fit_model(k, &config, &split))
        .collect::<Result<Vec<_>>>()?;
    let checkpoints: Vec<Checkpoint> = fitted.iter().map(|f| f.checkpoint.clone()).collect();
    let results = evaluate(&config, &split, &checkpoints, true)?;
    Ok(ExperimentOutcome { split, fitted, results })
}
