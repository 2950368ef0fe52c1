use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mode::DegradationMode;
use crate::pipeline::WINDOW_LEN;

/// Rule cascade on raw currents:
/// 1. nothing above `I0 * (1 + eol_current_increase_fraction)` is Normal;
/// 2. a single-step rise above `sudden_jump_step_fraction * I0` is Sudden;
/// 3. a first EOL crossing before `rapid_crossing_index_bound` is Rapid;
/// 4. anything else is Gradual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdDetector {
    pub eol_current_increase_fraction: f64,
    pub sudden_jump_step_fraction: f64,
    pub rapid_crossing_index_bound: usize,
}

impl Default for ThresholdDetector {
    fn default() -> Self {
        ThresholdDetector {
            eol_current_increase_fraction: 0.20,
            sudden_jump_step_fraction: 0.10,
            rapid_crossing_index_bound: 30,
        }
    }
}

impl ThresholdDetector {
    pub fn validate(&self) -> Result<()> {
        if !(self.eol_current_increase_fraction > 0.0) || !(self.sudden_jump_step_fraction > 0.0) {
            return Err(Error::Config("threshold fractions must be > 0".into()));
        }
        if self.rapid_crossing_index_bound == 0 || self.rapid_crossing_index_bound > WINDOW_LEN {
            return Err(Error::Config(format!(
                "rapid_crossing_index_bound must be in 1..={WINDOW_LEN}"
            )));
        }
        Ok(())
    }

    pub fn classify(&self, currents: &[f64], threshold_current: f64) -> Result<DegradationMode> {
        if currents.len() != WINDOW_LEN {
            return Err(Error::Argument(format!(
                "window has {} steps, expected {WINDOW_LEN}",
                currents.len()
            )));
        }
        if !(threshold_current > 0.0) {
            return Err(Error::domain("threshold_current_ma", "must be > 0"));
        }
        let eol = threshold_current * (1.0 + self.eol_current_increase_fraction);
        let Some(crossing) = currents.iter().position(|&c| c > eol) else {
            return Ok(DegradationMode::Normal);
        };
        let jump = self.sudden_jump_step_fraction * threshold_current;
        if currents.windows(2).any(|w| w[1] - w[0] > jump) {
            return Ok(DegradationMode::Sudden);
        }
        if crossing < self.rapid_crossing_index_bound {
            return Ok(DegradationMode::Rapid);
        }
        Ok(DegradationMode::Gradual)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const I0: f64 = 10.0;

    /// Smooth exponential that reaches `1.2 * I0` between `index - 1` and `index`.
    fn crossing_at(index: usize) -> Vec<f64> {
        let rate = 0.01;
        let scale = 0.2 * I0 / (rate * (index as f64 - 0.5)).exp_m1();
        (0..WINDOW_LEN)
            .map(|t| I0 + scale * (rate * t as f64).exp_m1())
            .collect()
    }

    #[test]
    fn constant_window_is_normal() {
        let d = ThresholdDetector::default();
        assert_eq!(d.classify(&[I0; WINDOW_LEN], I0).unwrap(), DegradationMode::Normal);
    }

    #[test]
    fn step_is_sudden() {
        let mut w = vec![I0; WINDOW_LEN];
        w[70..].fill(1.5 * I0);
        assert_eq!(
            ThresholdDetector::default().classify(&w, I0).unwrap(),
            DegradationMode::Sudden
        );
    }

    #[test]
    fn crossing_index_separates_rapid_from_gradual() {
        let d = ThresholdDetector::default();
        let early = crossing_at(20);
        assert_eq!(early.iter().position(|&c| c > 1.2 * I0), Some(20));
        assert_eq!(d.classify(&early, I0).unwrap(), DegradationMode::Rapid);
        let late = crossing_at(80);
        assert_eq!(late.iter().position(|&c| c > 1.2 * I0), Some(80));
        assert_eq!(d.classify(&late, I0).unwrap(), DegradationMode::Gradual);
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = ThresholdDetector::default();
        assert!(d.classify(&[I0; 10], I0).is_err());
        assert!(d.classify(&[I0; WINDOW_LEN], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn cascade_is_total(values in prop::collection::vec(0.0f64..40.0, WINDOW_LEN), i0 in 0.1f64..30.0) {
            prop_assert!(ThresholdDetector::default().classify(&values, i0).is_ok());
        }
    }
}
