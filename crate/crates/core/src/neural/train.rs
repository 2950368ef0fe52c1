use log::{debug, info};
use ndarray::{Array3, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mode::{argmax_mode, DegradationMode, NUM_CLASSES};
use crate::neural::lstm::{backward_batch, batch_loss, forward_batch, LstmNetwork, NetworkConfig};
use crate::neural::optim::{RmsPropConfig, RmsPropState};
use crate::pipeline::WindowedSample;
use crate::seeds;

const EVAL_BATCH: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub optimizer: RmsPropConfig,
    pub network: NetworkConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            max_epochs: 100,
            batch_size: 32,
            patience: 10,
            optimizer: RmsPropConfig::default(),
            network: NetworkConfig::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("max_epochs and batch_size must be >= 1".into()));
        }
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0) || !(0.0..1.0).contains(&o.decay) || !(o.epsilon > 0.0) {
            return Err(Error::Config("invalid optimizer settings".into()));
        }
        if let Some(c) = o.clip_norm {
            if !(c > 0.0) {
                return Err(Error::Config("clip_norm must be positive".into()));
            }
        }
        self.network.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub network: LstmNetwork,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

fn stack_batch(samples: &[&WindowedSample]) -> Array3<f64> {
    let (steps, channels) = samples[0].features.dim();
    let mut out = Array3::zeros((steps, samples.len(), channels));
    for (b, s) in samples.iter().enumerate() {
        out.index_axis_mut(Axis(1), b).assign(&s.features);
    }
    out
}

fn check_samples(samples: &[WindowedSample], channels: usize) -> Result<()> {
    let Some(first) = samples.first() else {
        return Ok(());
    };
    let steps = first.features.nrows();
    for s in samples {
        if s.features.dim() != (steps, channels) {
            return Err(Error::Argument(format!(
                "sample {} has shape {:?}, expected ({steps}, {channels})",
                s.sample_id,
                s.features.dim()
            )));
        }
    }
    Ok(())
}

/// Class probabilities for every sample, in input order.
pub fn predict_proba(net: &LstmNetwork, samples: &[WindowedSample]) -> Result<Vec<[f64; NUM_CLASSES]>> {
    check_samples(samples, net.config.input_dim)?;
    let mut out = Vec::with_capacity(samples.len());
    let refs: Vec<&WindowedSample> = samples.iter().collect();
    for chunk in refs.chunks(EVAL_BATCH) {
        let cache = forward_batch(net, stack_batch(chunk).view())?;
        for row in cache.probs.rows() {
            let mut p = [0.0; NUM_CLASSES];
            p.iter_mut().zip(row).for_each(|(d, s)| *d = *s);
            out.push(p);
        }
    }
    Ok(out)
}

/// Mean cross-entropy and accuracy over `samples`.
pub fn evaluate_loss(net: &LstmNetwork, samples: &[WindowedSample]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Argument("cannot evaluate on an empty set".into()));
    }
    let probs = predict_proba(net, samples)?;
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (p, s) in probs.iter().zip(samples) {
        loss += crate::neural::loss::cross_entropy(p, s.label);
        correct += usize::from(argmax_mode(p) == s.label);
    }
    let n = samples.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Mini-batch training with per-epoch shuffling, early stopping on
/// validation loss, and restoration of the best snapshot.
pub fn train(
    config: &TrainingConfig,
    train_set: &[WindowedSample],
    val_set: &[WindowedSample],
    init_seed: u64,
    shuffle_seed: u64,
) -> Result<TrainingOutcome> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Argument("training and validation sets must be non-empty".into()));
    }
    check_samples(train_set, config.network.input_dim)?;
    check_samples(val_set, config.network.input_dim)?;

    let mut net = LstmNetwork::initialize(config.network, init_seed)?;
    let mut optimizer = RmsPropState::new(config.optimizer, &net);
    let mut best = (f64::INFINITY, net.clone(), 0usize);
    let mut history = Vec::new();
    let mut since_best = 0usize;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stopped_early = false;

    for epoch in 1..=config.max_epochs {
        let mut rng = seeds::substream(shuffle_seed, epoch as u64);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&WindowedSample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let labels: Vec<DegradationMode> = batch.iter().map(|s| s.label).collect();
            let step = forward_batch(&net, stack_batch(&batch).view()).and_then(|cache| {
                let loss = batch_loss(&cache, &labels);
                backward_batch(&net, &cache, &labels).map(|g| (loss, g))
            });
            let (loss, grads) = match step {
                Ok(v) => v,
                Err(Error::Numeric { message, .. }) => return Err(Error::Divergence { epoch, message }),
                Err(e) => return Err(e),
            };
            loss_sum += loss * batch.len() as f64;
            optimizer.step(&mut net, &grads);
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let (val_loss, val_accuracy) = match evaluate_loss(&net, val_set) {
            Ok(v) => v,
            Err(Error::Numeric { message, .. }) => return Err(Error::Divergence { epoch, message }),
            Err(e) => return Err(e),
        };
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                message: "loss is not finite".into(),
            });
        }
        info!("epoch {epoch}: train_loss={train_loss:.5} val_loss={val_loss:.5} val_acc={val_accuracy:.4}");
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_accuracy,
        });
        if val_loss < best.0 {
            best = (val_loss, net.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                debug!("no validation improvement for {since_best} epochs, stopping");
                stopped_early = true;
                break;
            }
        }
    }
    Ok(TrainingOutcome {
        network: best.1,
        history,
        best_epoch: best.2,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn toy_set(n: usize, offset: usize) -> Vec<WindowedSample> {
        (0..n)
            .map(|i| {
                let label = DegradationMode::ALL[(i + offset) % 4];
                let level = label.index() as f64 / 3.0;
                WindowedSample {
                    sample_id: i,
                    label,
                    features: Array2::from_shape_fn((8, 2), |(t, c)| level * (1.0 + 0.1 * t as f64) - 0.2 * c as f64),
                }
            })
            .collect()
    }

    fn toy_config() -> TrainingConfig {
        TrainingConfig {
            max_epochs: 60,
            batch_size: 8,
            patience: 100,
            optimizer: RmsPropConfig {
                learning_rate: 0.01,
                ..RmsPropConfig::default()
            },
            network: NetworkConfig {
                num_lstm_layers: 1,
                hidden_dim: 8,
                input_dim: 2,
                num_classes: 4,
            },
        }
    }

    #[test]
    fn learns_separable_toy_problem() {
        let train_set = toy_set(64, 0);
        let val_set = toy_set(16, 1);
        let out = train(&toy_config(), &train_set, &val_set, 1, 2).unwrap();
        let first = out.history.first().unwrap().train_loss;
        let last = out.history.last().unwrap().train_loss;
        assert!(last < first * 0.5, "{first} -> {last}");
        let (_, acc) = evaluate_loss(&out.network, &val_set).unwrap();
        assert!(acc > 0.9);
    }

    #[test]
    fn one_epoch_on_four_samples() {
        let set = toy_set(4, 0);
        let mut config = toy_config();
        config.max_epochs = 1;
        let out = train(&config, &set, &set, 0, 0).unwrap();
        assert_eq!(out.history.len(), 1);
        assert_eq!(out.best_epoch, 1);
    }

    #[test]
    fn training_is_deterministic() {
        let train_set = toy_set(32, 0);
        let val_set = toy_set(8, 2);
        let mut config = toy_config();
        config.max_epochs = 3;
        let a = train(&config, &train_set, &val_set, 5, 6).unwrap();
        let b = train(&config, &train_set, &val_set, 5, 6).unwrap();
        assert_eq!(a.network, b.network);
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn huge_learning_rate_reports_divergence_or_finite_result() {
        let train_set = toy_set(32, 0);
        let val_set = toy_set(8, 2);
        let mut config = toy_config();
        config.max_epochs = 3;
        config.optimizer.learning_rate = 1e300;
        config.optimizer.clip_norm = None;
        match train(&config, &train_set, &val_set, 5, 6) {
            Err(Error::Divergence { epoch, .. }) => assert!(epoch >= 1),
            Ok(out) => assert!(out.history.iter().all(|r| r.val_loss.is_finite())),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn early_stopping_keeps_best_epoch() {
        let train_set = toy_set(32, 0);
        let val_set = toy_set(8, 2);
        let mut config = toy_config();
        config.patience = 2;
        config.max_epochs = 200;
        let out = train(&config, &train_set, &val_set, 5, 6).unwrap();
        let best = out
            .history
            .iter()
            .min_by(|a, b| a.val_loss.total_cmp(&b.val_loss))
            .unwrap();
        assert_eq!(best.epoch, out.best_epoch);
        let (loss, _) = evaluate_loss(&out.network, &val_set).unwrap();
        assert!((loss - best.val_loss).abs() < 1e-12);
    }
}
