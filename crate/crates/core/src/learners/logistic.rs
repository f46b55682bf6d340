//! L2-regularized logistic regression fit by full-batch gradient descent.
//!
//! Objective: mean log-loss plus `lambda / 2 * ||w||^2` (the intercept is not
//! penalized). Without an explicit learning rate the step is `1 / L` where
//! `L` bounds the gradient's Lipschitz constant, estimated by power
//! iteration on the augmented design matrix.

use serde::{Deserialize, Serialize};

use super::{sigmoid, Classifier, TrainSet};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    /// `None` picks `1 / L` from the data.
    pub learning_rate: Option<f64>,
    pub l2: f64,
    pub max_epochs: usize,
    /// Stop once an epoch lowers the loss by less than this fraction.
    pub tolerance: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            learning_rate: None,
            l2: 1e-4,
            max_epochs: 1000,
            tolerance: 1e-6,
        }
    }
}

impl LogisticParams {
    pub fn validate(&self) -> Result<()> {
        if let Some(lr) = self.learning_rate {
            if !(lr > 0.0) {
                return Err(Error::Argument(format!("learning rate must be positive, got {lr}")));
            }
        }
        if !(self.l2 >= 0.0) || self.max_epochs == 0 || !(self.tolerance >= 0.0) {
            return Err(Error::Argument(
                "logistic l2 and tolerance must be non-negative, max_epochs positive".to_owned(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    weights: Vec<f64>,
    intercept: f64,
    epochs: usize,
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Regularized loss and its gradient at `(weights, intercept)`.
/// The gradient's last element is the intercept component.
pub fn loss_and_grad(train: &TrainSet, weights: &[f64], intercept: f64, l2: f64) -> (f64, Vec<f64>) {
    let n = train.len() as f64;
    let d = train.n_features();
    let mut grad = vec![0.0; d + 1];
    let mut loss = 0.0;
    for (row, &t) in train.rows().zip(train.targets()) {
        let z = intercept + row.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>();
        loss += if t { softplus(-z) } else { softplus(z) };
        let r = sigmoid(z) - if t { 1.0 } else { 0.0 };
        for (g, x) in grad.iter_mut().zip(row) {
            *g += r * x;
        }
        grad[d] += r;
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    for (g, w) in grad.iter_mut().zip(weights) {
        *g += l2 * w;
    }
    (loss, grad)
}

/// Nonzero entries of a train set, row by row. Windowed detector features
/// are mostly zero, so the solver works on this form.
struct SparseRows {
    start: Vec<usize>,
    col: Vec<usize>,
    val: Vec<f64>,
    targets: Vec<bool>,
}

impl SparseRows {
    fn new(train: &TrainSet) -> Self {
        let mut start = vec![0];
        let mut col = Vec::new();
        let mut val = Vec::new();
        for row in train.rows() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    col.push(j);
                    val.push(v);
                }
            }
            start.push(col.len());
        }
        Self {
            start,
            col,
            val,
            targets: train.targets().to_vec(),
        }
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.start[i]..self.start[i + 1];
        self.col[r.clone()].iter().copied().zip(self.val[r].iter().copied())
    }

    fn dot(&self, i: usize, weights: &[f64], intercept: f64) -> f64 {
        intercept + self.row(i).map(|(j, v)| v * weights[j]).sum::<f64>()
    }

    /// Same quantities as [`loss_and_grad`].
    fn loss_and_grad(&self, weights: &[f64], intercept: f64, l2: f64, grad: &mut [f64]) -> f64 {
        let n = self.targets.len() as f64;
        let d = weights.len();
        grad.fill(0.0);
        let mut loss = 0.0;
        for (i, &t) in self.targets.iter().enumerate() {
            let z = self.dot(i, weights, intercept);
            loss += if t { softplus(-z) } else { softplus(z) };
            let r = sigmoid(z) - if t { 1.0 } else { 0.0 };
            for (j, v) in self.row(i) {
                grad[j] += r * v;
            }
            grad[d] += r;
        }
        grad.iter_mut().for_each(|g| *g /= n);
        for (g, w) in grad.iter_mut().zip(weights) {
            *g += l2 * w;
        }
        loss / n + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Largest eigenvalue of `X'X / n` for the design matrix with a column of ones.
    fn gram_spectral_norm(&self, d: usize) -> f64 {
        let n = self.targets.len() as f64;
        let mut v = vec![1.0 / ((d + 1) as f64).sqrt(); d + 1];
        let mut next = vec![0.0; d + 1];
        let mut lambda = 0.0;
        for _ in 0..50 {
            next.fill(0.0);
            for i in 0..self.targets.len() {
                let xv = self.dot(i, &v[..d], v[d]);
                for (j, x) in self.row(i) {
                    next[j] += xv * x;
                }
                next[d] += xv;
            }
            next.iter_mut().for_each(|o| *o /= n);
            let norm = next.iter().map(|o| o * o).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            let converged = (norm - lambda).abs() <= 1e-9 * norm;
            lambda = norm;
            for (a, b) in v.iter_mut().zip(&next) {
                *a = b / norm;
            }
            if converged {
                break;
            }
        }
        lambda
    }
}

impl LogisticRegression {
    /// Zero weights and intercept: scores 0.5 everywhere.
    pub fn zeros(feature_dim: usize) -> Self {
        Self {
            weights: vec![0.0; feature_dim],
            intercept: 0.0,
            epochs: 0,
        }
    }

    pub fn fit(train: &TrainSet, params: &LogisticParams) -> Result<Self> {
        params.validate()?;
        let d = train.n_features();
        let data = SparseRows::new(train);
        let step = params.learning_rate.unwrap_or_else(|| {
            // Slight overestimate of L keeps the power-iteration error harmless.
            let lipschitz = 0.25 * data.gram_spectral_norm(d) * 1.01 + params.l2;
            if lipschitz > 0.0 {
                1.0 / lipschitz
            } else {
                1.0
            }
        });
        let mut model = Self::zeros(d);
        let mut grad = vec![0.0; d + 1];
        let mut prev_loss = f64::INFINITY;
        for epoch in 0..params.max_epochs {
            let loss = data.loss_and_grad(&model.weights, model.intercept, params.l2, &mut grad);
            model.epochs = epoch;
            if prev_loss - loss <= params.tolerance * loss.abs().max(f64::MIN_POSITIVE) {
                break;
            }
            prev_loss = loss;
            for (w, g) in model.weights.iter_mut().zip(&grad) {
                *w -= step * g;
            }
            model.intercept -= step * grad[d];
            model.epochs = epoch + 1;
        }
        Ok(model)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn epochs(&self) -> usize {
        self.epochs
    }
}

impl Classifier for LogisticRegression {
    fn feature_dim(&self) -> usize {
        self.weights.len()
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        let z = self.intercept + x.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>();
        sigmoid(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_scores_one_half() {
        let m = LogisticRegression::zeros(3);
        assert_eq!(m.score_unchecked(&[1.0, -4.0, 9.0]), 0.5);
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
    }

    #[test]
    fn power_iteration_matches_closed_form() {
        // Rows [1], [1]: augmented X = [[1,1],[1,1]], X'X/n = [[1,1],[1,1]], eigenvalue 2.
        let ts = TrainSet::from_rows(&[vec![1.0], vec![1.0]], vec![true, false]).unwrap();
        assert!((SparseRows::new(&ts).gram_spectral_norm(1) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn sparse_and_dense_objectives_agree() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![f64::from(i % 3 == 0), 0.0, (i % 5) as f64 * 0.25])
            .collect();
        let targets: Vec<bool> = (0..30).map(|i| i % 2 == 0).collect();
        let ts = TrainSet::from_rows(&rows, targets).unwrap();
        let w = [0.3, -1.2, 0.7];
        let (dense_loss, dense_grad) = loss_and_grad(&ts, &w, -0.1, 0.01);
        let mut grad = vec![0.0; 4];
        let loss = SparseRows::new(&ts).loss_and_grad(&w, -0.1, 0.01, &mut grad);
        assert!((loss - dense_loss).abs() < 1e-12);
        for (a, b) in grad.iter().zip(&dense_grad) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn separates_a_threshold_problem() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 49.0]).collect();
        let targets: Vec<bool> = (0..50).map(|i| i >= 25).collect();
        let ts = TrainSet::from_rows(&rows, targets).unwrap();
        let m = LogisticRegression::fit(&ts, &LogisticParams::default()).unwrap();
        assert!(m.weights()[0] > 0.0);
        assert!(m.score_unchecked(&[0.0]) < 0.5 && m.score_unchecked(&[1.0]) > 0.5);
    }

    #[test]
    fn gradient_descent_decreases_the_loss() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 4) as f64 / 3.0, (i % 7) as f64 / 6.0]).collect();
        let targets: Vec<bool> = (0..40).map(|i| (i % 4) + (i % 3) > 3).collect();
        let ts = TrainSet::from_rows(&rows, targets).unwrap();
        let params = LogisticParams::default();
        let (l0, _) = loss_and_grad(&ts, &[0.0, 0.0], 0.0, params.l2);
        let m = LogisticRegression::fit(&ts, &params).unwrap();
        let (l1, _) = loss_and_grad(&ts, m.weights(), m.intercept(), params.l2);
        assert!(l1 < l0);
    }
}
