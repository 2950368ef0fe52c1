//! LSTM classifier, trained from scratch.

pub mod loss;
pub mod lstm;
pub mod optim;
pub mod train;

pub use loss::{cross_entropy, softmax};
pub use lstm::{
    backward_batch, backward_bptt, forward_batch, forward_sequence, lstm_cell_forward, predict, Gate, GateActivations,
    LstmGradients, LstmLayerParams, LstmNetwork, NetworkConfig,
};
pub use optim::{global_norm, rmsprop_update, RmsPropConfig, RmsPropState};
pub use train::{evaluate_loss, predict_proba, train, EpochRecord, TrainingConfig, TrainingOutcome};
