use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::Classifier;
use crate::seed;

/// Random baseline: each call to `score` returns the next value of a
/// counter-based uniform stream, independent of the input. Scores are
/// therefore deterministic given the seed and the stream position, and
/// predictions are fair coin flips.
#[derive(Debug, Serialize, Deserialize)]
pub struct RandomBaseline {
    seed: u64,
    feature_dim: usize,
    #[serde(with = "atomic_position")]
    position: AtomicU64,
}

mod atomic_position {
    use std::sync::atomic::{AtomicU64, Ordering};

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &AtomicU64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(p.load(Ordering::SeqCst))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<AtomicU64, D::Error> {
        u64::deserialize(d).map(AtomicU64::new)
    }
}

impl Clone for RandomBaseline {
    fn clone(&self) -> Self {
        Self {
            seed: self.seed,
            feature_dim: self.feature_dim,
            position: AtomicU64::new(self.position()),
        }
    }
}

impl PartialEq for RandomBaseline {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed && self.feature_dim == other.feature_dim && self.position() == other.position()
    }
}

impl RandomBaseline {
    pub fn new(seed: u64, feature_dim: usize) -> Self {
        Self {
            seed,
            feature_dim,
            position: AtomicU64::new(0),
        }
    }

    /// Number of scores drawn so far.
    pub fn position(&self) -> u64 {
        self.position.load(Ordering::SeqCst)
    }

    /// The value at stream position `k`.
    pub fn value_at(&self, k: u64) -> f64 {
        seed::unit_f64(seed::derive(self.seed, k))
    }

    pub fn next_score(&self) -> f64 {
        let k = self.position.fetch_add(1, Ordering::SeqCst);
        self.value_at(k)
    }
}

impl Classifier for RandomBaseline {
    fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    fn score_unchecked(&self, _x: &[f64]) -> f64 {
        self.next_score()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn true_rate_is_near_one_half() {
        let b = RandomBaseline::new(2024, 4);
        let n = 10_000;
        let trues = (0..n).filter(|_| b.next_score() >= 0.5).count();
        let rate = trues as f64 / n as f64;
        assert!((0.48..=0.52).contains(&rate), "rate {rate}");
    }

    #[test]
    fn stream_is_reproducible() {
        let a = RandomBaseline::new(5, 1);
        let b = RandomBaseline::new(5, 1);
        let xs: Vec<f64> = (0..100).map(|_| a.next_score()).collect();
        let ys: Vec<f64> = (0..100).map(|_| b.next_score()).collect();
        assert_eq!(xs, ys);
        assert_eq!(a.position(), 100);
        let c = a.clone();
        assert_eq!(a.next_score(), c.next_score());
    }
}
