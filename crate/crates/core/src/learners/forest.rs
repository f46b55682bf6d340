//! Random forest of CART trees.
//!
//! Tree `k` is grown from its own ChaCha stream seeded by deriving `k` from
//! the forest seed, so the fitted forest does not depend on how trees are
//! scheduled across threads.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, BinnedData, DecisionTree, TreeParams};
use super::{Classifier, TrainSet};
use crate::error::{Error, Result};
use crate::seed;

/// Features examined per split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `max(1, floor(sqrt(d)))`.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((d as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k.clamp(1, d.max(1)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 1600,
            max_depth: Some(20),
            min_samples_split: 2,
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::Argument("forest needs at least one estimator".to_owned()));
        }
        if self.max_features == MaxFeatures::Count(0) {
            return Err(Error::Argument("max_features must be positive".to_owned()));
        }
        self.tree_params().validate()
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    feature_dim: usize,
}

impl RandomForest {
    pub fn fit(train: &TrainSet, params: &ForestParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let data = BinnedData::new(train);
        let n = train.len();
        let d = train.n_features();
        let tree_params = params.tree_params();
        let max_features = match params.max_features {
            MaxFeatures::All => None,
            other => Some(other.resolve(d)),
        };
        let trees = (0..params.n_estimators)
            .into_par_iter()
            .map(|k| {
                let mut rng = seed::rng(seed::derive(seed, k as u64));
                let samples: Vec<u32> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n as u32)).collect()
                } else {
                    (0..n as u32).collect()
                };
                grow(&data, samples, &tree_params, max_features, &mut rng)
            })
            .collect();
        Ok(Self {
            trees,
            feature_dim: d,
        })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    /// Fraction of trees voting `true`.
    pub fn vote_fraction(&self, x: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.predict(x)).count();
        votes as f64 / self.trees.len() as f64
    }
}

impl Classifier for RandomForest {
    fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn score_unchecked(&self, x: &[f64]) -> f64 {
        self.vote_fraction(x)
    }
}
