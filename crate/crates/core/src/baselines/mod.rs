//! Classical classifiers on flattened windows, plus the rule-based
//! threshold detector that works on raw currents.

pub mod forest;
pub mod knn;
pub mod logreg;
pub mod threshold;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mode::DegradationMode;
use crate::pipeline::{WindowedSample, NUM_CHANNELS, WINDOW_LEN};

pub use forest::{gini, rf_fit, DecisionTree, ForestConfig, RandomForestModel};
pub use knn::{knn_fit, KnnModel};
pub use logreg::{logreg_fit, LogRegConfig, LogRegModel};
pub use threshold::ThresholdDetector;

pub const FLAT_LEN: usize = WINDOW_LEN + NUM_CHANNELS - 1;

/// Scaled current samples followed by the scaled static channels
/// (threshold current, temperature, power, wavelength).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatFeatureVector(pub Vec<f64>);

impl FlatFeatureVector {
    pub fn from_window(window: &WindowedSample) -> Result<Self> {
        if window.features.dim() != (WINDOW_LEN, NUM_CHANNELS) {
            return Err(Error::Argument(format!(
                "window {} has shape {:?}",
                window.sample_id,
                window.features.dim()
            )));
        }
        let mut values = Vec::with_capacity(FLAT_LEN);
        values.extend(window.features.column(0).iter());
        values.extend((1..NUM_CHANNELS).map(|c| window.features[[0, c]]));
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Argument(format!(
                "window {} has non-finite features",
                window.sample_id
            )));
        }
        Ok(FlatFeatureVector(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Flattened vectors and their labels, in input order.
pub fn flatten_all(windows: &[WindowedSample]) -> Result<(Vec<Vec<f64>>, Vec<DegradationMode>)> {
    let mut vectors = Vec::with_capacity(windows.len());
    let mut labels = Vec::with_capacity(windows.len());
    for w in windows {
        vectors.push(FlatFeatureVector::from_window(w)?.0);
        labels.push(w.label);
    }
    Ok((vectors, labels))
}

pub(crate) fn check_training(vectors: &[Vec<f64>], labels: &[DegradationMode]) -> Result<usize> {
    if vectors.is_empty() {
        return Err(Error::Model("training set is empty".into()));
    }
    if vectors.len() != labels.len() {
        return Err(Error::Argument("vector and label counts differ".into()));
    }
    let dim = vectors[0].len();
    if dim == 0 || vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::Argument("training vectors must share a non-zero length".into()));
    }
    if vectors.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Argument("training vectors contain non-finite values".into()));
    }
    Ok(dim)
}

pub(crate) fn check_query(query: &[f64], dim: usize) -> Result<()> {
    if query.len() != dim {
        return Err(Error::Argument(format!(
            "query has length {}, model expects {dim}",
            query.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn flatten_layout() {
        let features = Array2::from_shape_fn((WINDOW_LEN, NUM_CHANNELS), |(t, c)| {
            if c == 0 {
                t as f64 / 100.0
            } else {
                c as f64 * 0.1
            }
        });
        let w = WindowedSample {
            sample_id: 0,
            label: DegradationMode::Rapid,
            features,
        };
        let v = FlatFeatureVector::from_window(&w).unwrap();
        assert_eq!(v.0.len(), 104);
        assert_eq!(v.0[99], 0.99);
        assert_eq!(&v.0[100..], &[0.1, 0.2, 0.30000000000000004, 0.4]);
    }

    #[test]
    fn flatten_rejects_bad_shape() {
        let w = WindowedSample {
            sample_id: 3,
            label: DegradationMode::Normal,
            features: Array2::zeros((50, NUM_CHANNELS)),
        };
        assert!(FlatFeatureVector::from_window(&w).is_err());
    }
}
