use serde::{Deserialize, Serialize};

use crate::neural::lstm::{LstmGradients, LstmNetwork};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RmsPropConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        RmsPropConfig {
            learning_rate: 1e-3,
            decay: 0.9,
            epsilon: 1e-8,
            clip_norm: Some(5.0),
        }
    }
}

/// RMSProp with one squared-gradient accumulator per parameter.
#[derive(Debug, Clone)]
pub struct RmsPropState {
    pub config: RmsPropConfig,
    accumulators: Vec<Vec<f64>>,
}

pub fn global_norm(grads: &LstmGradients) -> f64 {
    grads
        .parameter_slices()
        .iter()
        .flat_map(|s| s.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

/// One RMSProp update on a flat tensor:
/// `acc = rho*acc + (1-rho)*g^2`, `theta -= lr*g/sqrt(acc+eps)`.
pub fn rmsprop_update(params: &mut [f64], grads: &[f64], acc: &mut [f64], config: &RmsPropConfig, scale: f64) {
    for ((p, &g), a) in params.iter_mut().zip(grads).zip(acc.iter_mut()) {
        let g = g * scale;
        *a = config.decay * *a + (1.0 - config.decay) * g * g;
        *p -= config.learning_rate * g / (*a + config.epsilon).sqrt();
    }
}

impl RmsPropState {
    pub fn new(config: RmsPropConfig, net: &LstmNetwork) -> Self {
        let accumulators = net.parameter_slices().iter().map(|s| vec![0.0; s.len()]).collect();
        RmsPropState { config, accumulators }
    }

    /// Clips by global norm, then applies the update. Returns the pre-clip norm.
    pub fn step(&mut self, net: &mut LstmNetwork, grads: &LstmGradients) -> f64 {
        let norm = global_norm(grads);
        let scale = match self.config.clip_norm {
            Some(max) if norm > max => max / norm,
            _ => 1.0,
        };
        let config = self.config;
        for ((p, g), acc) in net
            .parameter_slices_mut()
            .into_iter()
            .zip(grads.parameter_slices())
            .zip(self.accumulators.iter_mut())
        {
            rmsprop_update(p, g, acc, &config, scale);
        }
        norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::lstm::NetworkConfig;

    #[test]
    fn fresh_state_unit_gradient() {
        let mut p = [0.0];
        let mut acc = [0.0];
        rmsprop_update(&mut p, &[1.0], &mut acc, &RmsPropConfig::default(), 1.0);
        assert!((acc[0] - 0.1).abs() < 1e-15);
        assert!((p[0] + 0.001 / (0.1f64 + 1e-8).sqrt()).abs() < 1e-15);
        assert!((p[0] + 0.0031623).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = [0.3, -1.2];
        let mut acc = [0.5, 0.0];
        rmsprop_update(&mut p, &[0.0, 0.0], &mut acc, &RmsPropConfig::default(), 1.0);
        assert_eq!(p, [0.3, -1.2]);
        assert!((acc[0] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn opposite_gradients_get_opposite_updates() {
        let mut p = [0.0, 0.0];
        let mut acc = [0.0, 0.0];
        rmsprop_update(&mut p, &[0.37, -0.37], &mut acc, &RmsPropConfig::default(), 1.0);
        assert_eq!(p[0], -p[1]);
        assert!(acc.iter().all(|&a| a >= 0.0));
    }

    #[test]
    fn clipping_caps_global_norm() {
        let config = NetworkConfig {
            num_lstm_layers: 1,
            hidden_dim: 2,
            input_dim: 1,
            num_classes: 4,
        };
        let mut net = LstmNetwork::zeros(config);
        let mut grads = LstmNetwork::zeros(config);
        grads.head_bias.fill(100.0);
        let mut state = RmsPropState::new(RmsPropConfig::default(), &net);
        let norm = state.step(&mut net, &grads);
        assert!((norm - 200.0).abs() < 1e-9);
        // clipped gradient per entry is 5/200*100 = 2.5
        let expected = 0.001 * 2.5 / (0.1f64 * 6.25 + 1e-8).sqrt();
        assert!((net.head_bias[0] + expected).abs() < 1e-12);
    }
}
