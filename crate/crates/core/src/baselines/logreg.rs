use log::warn;
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{check_query, check_training};
use crate::error::Result;
use crate::mode::{argmax_mode, DegradationMode, NUM_CLASSES};
use crate::neural::loss::{softmax_in_place, PROBABILITY_FLOOR};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRegConfig {
    /// Inverse regularisation strength; the L2 penalty weight is `1/c`.
    pub c: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub initial_step: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            c: 100.0,
            tolerance: 1e-6,
            max_iterations: 5000,
            initial_step: 1.0,
        }
    }
}

/// Multinomial logistic regression, `softmax(W x + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    /// `num_classes x dim`.
    pub weights: Array2<f64>,
    pub intercepts: Array1<f64>,
    pub config: LogRegConfig,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
}

struct Problem<'a> {
    x: Array2<f64>,
    labels: &'a [DegradationMode],
    penalty: f64,
}

impl Problem<'_> {
    fn probabilities(&self, w: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
        let mut p = self.x.dot(&w.t()) + b;
        for mut row in p.rows_mut() {
            softmax_in_place(row.as_slice_mut().expect("contiguous row"));
        }
        p
    }

    fn objective_from(&self, p: &Array2<f64>, w: &Array2<f64>) -> f64 {
        let ce: f64 = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| -p[[i, l.index()]].max(PROBABILITY_FLOOR).ln())
            .sum::<f64>()
            / self.labels.len() as f64;
        ce + 0.5 * self.penalty * w.iter().map(|v| v * v).sum::<f64>()
    }

    fn objective(&self, w: &Array2<f64>, b: &Array1<f64>) -> f64 {
        self.objective_from(&self.probabilities(w, b), w)
    }

    fn gradient(&self, p: &Array2<f64>, w: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
        let mut residual = p.clone();
        for (i, l) in self.labels.iter().enumerate() {
            residual[[i, l.index()]] -= 1.0;
        }
        residual /= self.labels.len() as f64;
        let gw = residual.t().dot(&self.x) + &(w * self.penalty);
        let gb = residual.sum_axis(Axis(0));
        (gw, gb)
    }
}

/// Full-batch gradient descent. A step that would increase the objective
/// is halved until it does not; accepted steps grow by 25%.
pub fn logreg_fit(
    vectors: &[Vec<f64>],
    labels: &[DegradationMode],
    config: LogRegConfig,
    seed: u64,
) -> Result<LogRegModel> {
    logreg_fit_traced(vectors, labels, config, seed).map(|(m, _)| m)
}

/// As [`logreg_fit`], also returning the objective after every iteration.
pub fn logreg_fit_traced(
    vectors: &[Vec<f64>],
    labels: &[DegradationMode],
    config: LogRegConfig,
    seed: u64,
) -> Result<(LogRegModel, Vec<f64>)> {
    let dim = check_training(vectors, labels)?;
    if !(config.c > 0.0) || !(config.initial_step > 0.0) || !(config.tolerance >= 0.0) {
        return Err(crate::error::Error::Config(
            "logreg c, step and tolerance must be positive".into(),
        ));
    }
    let x = Array2::from_shape_fn((vectors.len(), dim), |(i, j)| vectors[i][j]);
    let problem = Problem {
        x,
        labels,
        penalty: 1.0 / config.c,
    };
    let mut rng = seeds::substream(seed, 0);
    let mut w = Array2::from_shape_fn((NUM_CLASSES, dim), |_| rng.gen_range(-0.01..0.01));
    let mut b = Array1::zeros(NUM_CLASSES);
    let mut step = config.initial_step;
    let mut p = problem.probabilities(&w, &b);
    let mut objective = problem.objective_from(&p, &w);
    let mut trace = vec![objective];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        let (gw, gb) = problem.gradient(&p, &w);
        let norm = (gw.iter().chain(gb.iter()).map(|g| g * g).sum::<f64>()).sqrt();
        if norm < config.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = false;
        for _ in 0..60 {
            let w_new = &w - &(&gw * step);
            let b_new = &b - &(&gb * step);
            let p_new = problem.probabilities(&w_new, &b_new);
            let obj_new = problem.objective_from(&p_new, &w_new);
            if obj_new <= objective {
                w = w_new;
                b = b_new;
                p = p_new;
                objective = obj_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        trace.push(objective);
        if !accepted {
            break;
        }
        step *= 1.25;
    }
    if !converged {
        warn!("logistic regression stopped after {iterations} iterations without reaching tolerance");
    }
    Ok((
        LogRegModel {
            weights: w,
            intercepts: b,
            config,
            converged,
            iterations,
            objective,
        },
        trace,
    ))
}

impl LogRegModel {
    pub fn zeros(dim: usize) -> Self {
        LogRegModel {
            weights: Array2::zeros((NUM_CLASSES, dim)),
            intercepts: Array1::zeros(NUM_CLASSES),
            config: LogRegConfig::default(),
            converged: false,
            iterations: 0,
            objective: f64::NAN,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn predict_proba(&self, query: &[f64]) -> Result<[f64; NUM_CLASSES]> {
        check_query(query, self.dim())?;
        let mut out = [0.0; NUM_CLASSES];
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.weights.row(c).iter().zip(query).map(|(w, x)| w * x).sum::<f64>() + self.intercepts[c];
        }
        softmax_in_place(&mut out);
        Ok(out)
    }

    pub fn predict(&self, query: &[f64]) -> Result<(DegradationMode, [f64; NUM_CLASSES])> {
        let p = self.predict_proba(query)?;
        Ok((argmax_mode(&p), p))
    }

    /// Training objective of this model on a data set.
    pub fn objective_on(&self, vectors: &[Vec<f64>], labels: &[DegradationMode]) -> Result<f64> {
        let dim = check_training(vectors, labels)?;
        check_query(&vectors[0], self.dim())?;
        let problem = Problem {
            x: Array2::from_shape_fn((vectors.len(), dim), |(i, j)| vectors[i][j]),
            labels,
            penalty: 1.0 / self.config.c,
        };
        Ok(problem.objective(&self.weights, &self.intercepts))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use DegradationMode::*;

    fn toy() -> (Vec<Vec<f64>>, Vec<DegradationMode>) {
        let mut rng = seeds::substream(8, 0);
        let mut v = Vec::new();
        let mut l = Vec::new();
        for i in 0..60 {
            let label = if i % 2 == 0 { Normal } else { Gradual };
            let centre = if label == Normal { -1.0 } else { 1.0 };
            v.push(vec![centre + rng.gen_range(-0.5..0.5), rng.gen_range(-1.0..1.0)]);
            l.push(label);
        }
        (v, l)
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = LogRegModel::zeros(3);
        assert_eq!(m.predict_proba(&[1.0, 2.0, 3.0]).unwrap(), [0.25; 4]);
    }

    #[test]
    fn separable_toy_is_fit_exactly() {
        let (v, l) = toy();
        let m = logreg_fit(&v, &l, LogRegConfig::default(), 1).unwrap();
        for (x, y) in v.iter().zip(&l) {
            assert_eq!(m.predict(x).unwrap().0, *y);
        }
    }

    #[test]
    fn objective_never_increases() {
        let (v, l) = toy();
        let config = LogRegConfig {
            max_iterations: 300,
            initial_step: 50.0,
            ..LogRegConfig::default()
        };
        let (_, trace) = logreg_fit_traced(&v, &l, config, 2).unwrap();
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn fitted_point_beats_random_perturbations() {
        let (v, l) = toy();
        let config = LogRegConfig {
            c: 1.0,
            ..LogRegConfig::default()
        };
        let m = logreg_fit(&v, &l, config, 3).unwrap();
        let base = m.objective_on(&v, &l).unwrap();
        let mut rng = seeds::substream(9, 0);
        for _ in 0..100 {
            let mut p = m.clone();
            p.weights.mapv_inplace(|w| w + rng.gen_range(-1e-3..1e-3));
            p.intercepts.mapv_inplace(|b| b + rng.gen_range(-1e-3..1e-3));
            assert!(p.objective_on(&v, &l).unwrap() >= base - 1e-12);
        }
    }

    #[test]
    fn iteration_cap_sets_flag() {
        let (v, l) = toy();
        let config = LogRegConfig {
            max_iterations: 2,
            ..LogRegConfig::default()
        };
        let m = logreg_fit(&v, &l, config, 1).unwrap();
        assert!(!m.converged);
        assert_eq!(m.iterations, 2);
    }
}
