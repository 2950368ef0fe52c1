use crate::mode::DegradationMode;

/// Probability floor applied before taking the log in [`cross_entropy`].
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

pub fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in values.iter_mut() {
        *v /= total;
    }
}

pub fn cross_entropy(probs: &[f64], label: DegradationMode) -> f64 {
    -probs[label.index()].max(PROBABILITY_FLOOR).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_from_zero_logits() {
        assert_eq!(softmax(&[0.0; 4]), vec![0.25; 4]);
    }

    #[test]
    fn log_logits_invert() {
        let logits: Vec<f64> = [1.0f64, 2.0, 3.0, 4.0].iter().map(|v| v.ln()).collect();
        let p = softmax(&logits);
        for (got, want) in p.iter().zip([0.1, 0.2, 0.3, 0.4]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy(&[0.0, 1.0, 0.0, 0.0], DegradationMode::Gradual), 0.0);
        assert!((cross_entropy(&[0.25; 4], DegradationMode::Sudden) - 1.386294).abs() < 1e-6);
        assert!((cross_entropy(&[0.5, 0.5, 0.0, 0.0], DegradationMode::Normal) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((cross_entropy(&[1.0, 0.0, 0.0, 0.0], DegradationMode::Rapid) - 1e-12f64.ln().abs()).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn softmax_normalised_and_shift_invariant(
            logits in prop::collection::vec(-50.0f64..50.0, 4),
            shift in -1000.0f64..1000.0,
        ) {
            let p = softmax(&logits);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&v| v > 0.0 && v <= 1.0));
            let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
            let q = softmax(&shifted);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn cross_entropy_non_negative(raw in prop::collection::vec(0.0f64..1.0, 4), label in 0u8..4) {
            let total: f64 = raw.iter().sum::<f64>() + 1e-9;
            let probs: Vec<f64> = raw.iter().map(|v| v / total).collect();
            prop_assert!(cross_entropy(&probs, DegradationMode::from_code(label).unwrap()) >= 0.0);
        }
    }
}
