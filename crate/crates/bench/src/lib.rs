//! Shared fixtures for the benchmarks.

use helpfusion_core::harness::FeatureMatrix;
use helpfusion_core::synthgen::{self, GeneratorConfig};
use helpfusion_core::{DecisionStream, TrainSet};

/// Decision streams of the default 16 x 125 synthetic corpus.
pub fn default_streams() -> Vec<DecisionStream> {
    synthgen::generate(&GeneratorConfig::default())
        .expect("default generator config is valid")
        .streams
}

/// A balanced training set at `window` drawn from the default corpus.
pub fn balanced_train_set(streams: &[DecisionStream], window: usize) -> TrainSet {
    let corpus = FeatureMatrix::build(streams, window).expect("windowing succeeds");
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    for (i, &t) in corpus.targets().iter().enumerate() {
        if t {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    neg.truncate(pos.len());
    let rows: Vec<Vec<f64>> = pos.iter().chain(&neg).map(|&i| corpus.row(i).to_vec()).collect();
    let targets = pos.iter().map(|_| true).chain(neg.iter().map(|_| false)).collect();
    TrainSet::from_rows(&rows, targets).expect("rows share one width")
}
