//! Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

use super::{Classifier, TrainSet};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesParams {
    /// Lower bound on every per-class feature variance.
    pub var_floor: f64,
}

impl Default for NaiveBayesParams {
    fn default() -> Self {
        Self { var_floor: 1e-9 }
    }
}

impl NaiveBayesParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.var_floor > 0.0) {
            return Err(Error::Argument(format!(
                "variance floor must be positive, got {}",
                self.var_floor
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ClassStats {
    log_prior: f64,
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl ClassStats {
    fn log_likelihood(&self, x: &[f64]) -> f64 {
        let mut ll = self.log_prior;
        for ((v, m), s2) in x.iter().zip(&self.mean).zip(&self.var) {
            ll -= 0.5 * ((2.0 * std::f64::consts::PI * s2).ln() + (v - m) * (v - m) / s2);
        }
        ll
    }
}

/// Per-class independent Gaussians with maximum-likelihood means and
/// variances; the score is the normalized posterior of the positive class.
/// A class absent from training gets posterior 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianNaiveBayes {
    negative: Option<ClassStats>,
    positive: Option<ClassStats>,
    feature_dim: usize,
}

fn class_stats(train: &TrainSet, class: bool, var_floor: f64) -> Option<ClassStats> {
    let d = train.n_features();
    let rows: Vec<&[f64]> = train
        .rows()
        .zip(train.targets())
        .filter(|(_, &t)| t == class)
        .map(|(r, _)| r)
        .collect();
    if rows.is_empty() {
        return None;
    }
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for r in &rows {
        for (m, v) in mean.iter_mut().zip(*r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for r in &rows {
        for ((s, v), m) in var.iter_mut().zip(*r).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    var.iter_mut().for_each(|s| *s = (*s / n).max(var_floor));
    Some(ClassStats {
        log_prior: (n / train.len() as f64).ln(),
        mean,
        var,
    })
}

impl GaussianNaiveBayes {
    pub fn fit(train: &TrainSet, params: &NaiveBayesParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            negative: class_stats(train, false, params.var_floor),
            positive: class_stats(train, true, params.var_floor),
            feature_dim: train.n_features(),
        })
    }

    /// Posterior probability of the positive class.
    pub fn posterior(&self, x: &[f64]) -> f64 {
        match (&self.negative, &self.positive) {
            (Some(neg), Some(pos)) => {
                let diff = neg.log_likelihood(x) - pos.log_likelihood(x);
                // 1 / (1 + e^diff), exact 0.5 when the likelihoods tie.
                if diff.is_nan() {
                    0.5
                } else {
                    1.0 / (1.0 + diff.exp())
                }
            }
            (None, Some(_)) => 1.0,
            _ => 0.0,
        }
    }
}

impl Classifier for GaussianNaiveBayes {
    fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        self.posterior(x)
    }
}
