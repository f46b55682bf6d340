//! The experimental procedure: shuffle the windowed corpus, split it into
//! contiguous folds, balance each training split by undersampling
//! negatives, fit, test on the untouched fold and sum the fold confusion
//! matrices. One such pass is an iteration; the sweep repeats it for every
//! (window size, algorithm, iteration) cell.
//!
//! Every cell draws its randomness from a seed derived from
//! `(master_seed, window, algorithm, iteration)`, so cells are independent
//! jobs and results do not depend on execution order or thread count.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::{DecisionStream, N_DETECTORS};
use crate::error::{Error, Result};
use crate::learners::{self, Algorithm, LearnerParams, TrainSet};
use crate::metrics::{self, precision_recall_f1, ConfusionMatrix, CurveKind, CurvePoint};
use crate::seed;
use crate::windowing::{self, WindowedInstance};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub window_sizes: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    pub iterations: usize,
    pub folds: usize,
    pub master_seed: u64,
    pub learner: LearnerParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            window_sizes: (1..=50).collect(),
            algorithms: Algorithm::ALL.to_vec(),
            iterations: 50,
            folds: 10,
            master_seed: 42,
            learner: LearnerParams::default(),
        }
    }
}

impl ExperimentConfig {
    /// Desk-scale preset: windows 1..=20, 100-tree forests, 5 iterations.
    pub fn quick() -> Self {
        let mut cfg = Self {
            window_sizes: (1..=20).collect(),
            iterations: 5,
            ..Self::default()
        };
        cfg.learner.forest.n_estimators = 100;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_sizes.is_empty() || self.window_sizes.contains(&0) {
            return Err(Error::Argument("window sizes must be a non-empty list of positive integers".to_owned()));
        }
        let mut sorted = self.window_sizes.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Argument("window sizes must be distinct".to_owned()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Argument("no algorithms selected".to_owned()));
        }
        let mut algs = self.algorithms.clone();
        algs.sort_unstable();
        algs.dedup();
        if algs.len() != self.algorithms.len() {
            return Err(Error::Argument("algorithms must be distinct".to_owned()));
        }
        if self.iterations == 0 || self.folds == 0 {
            return Err(Error::Argument("iterations and folds must be positive".to_owned()));
        }
        self.learner.validate()
    }

    /// Number of (window, algorithm, iteration) cells.
    pub fn n_cells(&self) -> usize {
        self.window_sizes.len() * self.algorithms.len() * self.iterations
    }
}

/// Seed of one sweep cell.
pub fn cell_seed(master_seed: u64, window: usize, algorithm: Algorithm, iteration: usize) -> u64 {
    seed::derive_path(
        master_seed,
        &[window as u64, seed::hash_str(algorithm.as_str()), iteration as u64],
    )
}

/// Uniformly random permutation of `0..n` determined by `seed`.
pub fn shuffled_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed));
    order
}

/// Returns the instances in a uniformly random order determined by `seed`.
pub fn shuffle(instances: &[WindowedInstance], seed: u64) -> Vec<WindowedInstance> {
    shuffled_order(instances.len(), seed)
        .into_iter()
        .map(|i| instances[i].clone())
        .collect()
}

/// Splits positions `0..n` into `k` contiguous folds whose sizes differ by
/// at most one; the first `n % k` folds are the larger ones.
pub fn kfold(n: usize, k: usize) -> Result<Vec<Range<usize>>> {
    if k == 0 || n < k {
        return Err(Error::Argument(format!("cannot split {n} instances into {k} folds")));
    }
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(start..start + len);
        start += len;
    }
    Ok(folds)
}

/// Training split with all positives and an equal number of negatives.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BalancedTrainSet {
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
    /// True when negatives were fewer than positives and had to be drawn
    /// with replacement.
    pub with_replacement: bool,
}

impl BalancedTrainSet {
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.positives.iter().chain(&self.negatives).copied()
    }

    pub fn len(&self) -> usize {
        self.positives.len() + self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Why a fold could not be balanced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FoldSkip {
    NoPositives,
    NoNegatives,
}

/// Keeps every positive of `train_indices` and samples as many negatives:
/// without replacement when there are enough, otherwise with replacement.
pub fn balance<R: Rng>(
    train_indices: &[usize],
    targets: &[bool],
    rng: &mut R,
) -> std::result::Result<BalancedTrainSet, FoldSkip> {
    let (positives, negatives): (Vec<usize>, Vec<usize>) =
        train_indices.iter().partition(|&&i| targets[i]);
    let n = positives.len();
    if n == 0 {
        return Err(FoldSkip::NoPositives);
    }
    if negatives.is_empty() {
        return Err(FoldSkip::NoNegatives);
    }
    let (sampled, with_replacement) = if negatives.len() >= n {
        let picks = index::sample(rng, negatives.len(), n);
        (picks.into_iter().map(|k| negatives[k]).collect(), false)
    } else {
        let picks = (0..n).map(|_| negatives[rng.random_range(0..negatives.len())]).collect();
        (picks, true)
    };
    Ok(BalancedTrainSet {
        positives,
        negatives: sampled,
        with_replacement,
    })
}

/// Windowed corpus as a dense row-major matrix.
#[derive(Clone, Debug)]
pub struct FeatureMatrix {
    pub window_size: usize,
    features: Vec<f64>,
    dim: usize,
    targets: Vec<bool>,
}

impl FeatureMatrix {
    pub fn from_instances(instances: &[WindowedInstance], window_size: usize) -> Result<Self> {
        let dim = N_DETECTORS * window_size;
        let mut features = Vec::with_capacity(instances.len() * dim);
        for inst in instances {
            if inst.features.len() != dim {
                return Err(Error::Validation(format!(
                    "instance {}:{} has {} features, expected {dim}",
                    inst.session_id,
                    inst.event_index,
                    inst.features.len()
                )));
            }
            features.extend_from_slice(&inst.features);
        }
        Ok(Self {
            window_size,
            features,
            dim,
            targets: instances.iter().map(|i| i.target).collect(),
        })
    }

    pub fn build(streams: &[DecisionStream], window_size: usize) -> Result<Self> {
        Self::from_instances(&windowing::build_corpus(streams, window_size)?, window_size)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn targets(&self) -> &[bool] {
        &self.targets
    }

    fn train_set(&self, indices: impl Iterator<Item = usize>) -> Result<TrainSet> {
        let mut features = Vec::new();
        let mut targets = Vec::new();
        for i in indices {
            features.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
        }
        TrainSet::new(features, self.dim, targets)
    }
}

/// Result of one (window, algorithm, iteration) cell.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub window_size: usize,
    pub algorithm: Algorithm,
    pub iteration: usize,
    /// Sum of the test-fold confusion matrices.
    pub cm: ConfusionMatrix,
    /// Folds whose training split could not be balanced; their test
    /// instances are not counted in `cm`.
    pub skipped_folds: usize,
    /// Folds whose negatives were sampled with replacement.
    pub resampled_folds: usize,
}

/// Fold layout and balanced training sets of one cell.
pub struct CellPlan {
    pub order: Vec<usize>,
    pub folds: Vec<Range<usize>>,
    pub balanced: Vec<std::result::Result<BalancedTrainSet, FoldSkip>>,
    pub fit_seeds: Vec<u64>,
}

impl CellPlan {
    pub fn new(targets: &[bool], folds: usize, cell_seed: u64) -> Result<Self> {
        let n = targets.len();
        let order = shuffled_order(n, seed::derive_str(cell_seed, "shuffle"));
        let ranges = kfold(n, folds)?;
        let mut balanced = Vec::with_capacity(folds);
        let mut fit_seeds = Vec::with_capacity(folds);
        for (f, range) in ranges.iter().enumerate() {
            let train: Vec<usize> = order[..range.start]
                .iter()
                .chain(&order[range.end..])
                .copied()
                .collect();
            let mut rng = seed::rng(seed::derive_path(cell_seed, &[seed::hash_str("balance"), f as u64]));
            balanced.push(balance(&train, targets, &mut rng));
            fit_seeds.push(seed::derive_path(cell_seed, &[seed::hash_str("fit"), f as u64]));
        }
        Ok(Self {
            order,
            folds: ranges,
            balanced,
            fit_seeds,
        })
    }

    pub fn test_indices(&self, fold: usize) -> &[usize] {
        &self.order[self.folds[fold].clone()]
    }
}

struct CellOutcome {
    record: ExperimentRecord,
    scores: Vec<(f64, bool)>,
}

fn run_cell(
    corpus: &FeatureMatrix,
    algorithm: Algorithm,
    iteration: usize,
    cell_seed: u64,
    config: &ExperimentConfig,
    keep_scores: bool,
) -> Result<CellOutcome> {
    let plan = CellPlan::new(corpus.targets(), config.folds, cell_seed)?;
    let mut cm = ConfusionMatrix::default();
    let mut skipped_folds = 0;
    let mut resampled_folds = 0;
    let mut scores = Vec::new();
    for f in 0..plan.folds.len() {
        let balanced = match &plan.balanced[f] {
            Ok(b) => b,
            Err(_) => {
                skipped_folds += 1;
                continue;
            }
        };
        resampled_folds += usize::from(balanced.with_replacement);
        let train = corpus.train_set(balanced.indices())?;
        let model = learners::fit(algorithm, &train, &config.learner, plan.fit_seeds[f])?;
        for &i in plan.test_indices(f) {
            let score = model.score(corpus.row(i))?;
            let target = corpus.targets()[i];
            cm.record(learners::predict_from_score(score), target);
            if keep_scores {
                scores.push((score, target));
            }
        }
    }
    Ok(CellOutcome {
        record: ExperimentRecord {
            window_size: corpus.window_size,
            algorithm,
            iteration,
            cm,
            skipped_folds,
            resampled_folds,
        },
        scores,
    })
}

/// One iteration of shuffled, balanced k-fold cross-validation.
pub fn run_iteration(
    corpus: &FeatureMatrix,
    algorithm: Algorithm,
    iteration: usize,
    iteration_seed: u64,
    config: &ExperimentConfig,
) -> Result<ExperimentRecord> {
    run_cell(corpus, algorithm, iteration, iteration_seed, config, false).map(|o| o.record)
}

/// Like [`run_iteration`] but returns every test instance's score and
/// target, for threshold-swept curves at a fixed window.
pub fn collect_scores(
    corpus: &FeatureMatrix,
    algorithm: Algorithm,
    iteration: usize,
    iteration_seed: u64,
    config: &ExperimentConfig,
) -> Result<Vec<(f64, bool)>> {
    run_cell(corpus, algorithm, iteration, iteration_seed, config, true).map(|o| o.scores)
}

/// Confusion matrix of a single detector thresholded at 0.5 on the test
/// folds of a cell. Uses the current (most recent) decision vector only.
pub fn single_detector_confusion(
    corpus: &FeatureMatrix,
    detector: usize,
    folds: usize,
    cell_seed: u64,
) -> Result<ConfusionMatrix> {
    if detector >= N_DETECTORS {
        return Err(Error::Argument(format!("no detector with index {detector}")));
    }
    let plan = CellPlan::new(corpus.targets(), folds, cell_seed)?;
    let mut cm = ConfusionMatrix::default();
    for f in 0..plan.folds.len() {
        for &i in plan.test_indices(f) {
            cm.record(corpus.row(i)[detector] >= 0.5, corpus.targets()[i]);
        }
    }
    Ok(cm)
}

/// Per-(window, algorithm) aggregate over iterations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub window_size: usize,
    pub algorithm: Algorithm,
    /// Equal-weight mean of the per-iteration F1 scores.
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1_min: f64,
    pub f1_max: f64,
    pub iterations: usize,
}

/// Window-parameterized ROC and PR curves of one algorithm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmCurves {
    pub algorithm: Algorithm,
    pub roc: Vec<CurvePoint>,
    pub roc_auc: f64,
    pub pr: Vec<CurvePoint>,
    pub pr_auc: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepNotes {
    pub skipped_folds: usize,
    pub resampled_folds: usize,
    /// Records whose precision or recall hit the 0/0 = 0 rule.
    pub degenerate_ratio_records: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: ExperimentConfig,
    pub corpus_size: usize,
    pub records: Vec<ExperimentRecord>,
    pub summary: Vec<SummaryRow>,
    pub curves: Vec<AlgorithmCurves>,
    pub notes: SweepNotes,
}

/// Runs every (window, algorithm, iteration) cell on the current rayon pool.
pub fn run_sweep(streams: &[DecisionStream], config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    let corpus_size: usize = streams.iter().map(DecisionStream::len).sum();
    if corpus_size < config.folds {
        return Err(Error::Validation(format!(
            "corpus of {corpus_size} instances is smaller than the fold count {}",
            config.folds
        )));
    }
    let corpora: Vec<FeatureMatrix> = config
        .window_sizes
        .par_iter()
        .map(|&w| FeatureMatrix::build(streams, w))
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, Algorithm, usize)> = (0..corpora.len())
        .flat_map(|w| {
            config
                .algorithms
                .iter()
                .flat_map(move |&a| (0..config.iterations).map(move |it| (w, a, it)))
        })
        .collect();
    let records: Vec<ExperimentRecord> = cells
        .par_iter()
        .map(|&(w, alg, it)| {
            let corpus = &corpora[w];
            let s = cell_seed(config.master_seed, corpus.window_size, alg, it);
            run_iteration(corpus, alg, it, s, config)
        })
        .collect::<Result<_>>()?;
    SweepReport::from_records(config.clone(), corpus_size, records)
}

impl SweepReport {
    /// Derives summaries, curves and notes from raw records.
    pub fn from_records(config: ExperimentConfig, corpus_size: usize, records: Vec<ExperimentRecord>) -> Result<Self> {
        let summary = summarize(&records);
        let curves = window_curves(&records)?;
        let notes = SweepNotes {
            skipped_folds: records.iter().map(|r| r.skipped_folds).sum(),
            resampled_folds: records.iter().map(|r| r.resampled_folds).sum(),
            degenerate_ratio_records: records.iter().filter(|r| r.cm.has_degenerate_ratio()).count(),
        };
        Ok(Self {
            config,
            corpus_size,
            records,
            summary,
            curves,
            notes,
        })
    }

    pub fn summary_for(&self, window: usize, algorithm: Algorithm) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.window_size == window && r.algorithm == algorithm)
    }

    pub fn curves_for(&self, algorithm: Algorithm) -> Option<&AlgorithmCurves> {
        self.curves.iter().find(|c| c.algorithm == algorithm)
    }

    /// Writes `records.csv`, `summary.csv`, `curves.csv` and `auc.csv` into `dir`.
    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        let open = |name: &str| {
            let p = dir.join(name);
            std::fs::File::create(&p)
                .map(std::io::BufWriter::new)
                .map_err(|e| Error::io(p, e))
        };
        write_records_csv(&self.records, open("records.csv")?)?;
        write_summary_csv(&self.summary, open("summary.csv")?)?;
        write_window_curves_csv(&self.curves, open("curves.csv")?)?;
        write_window_auc_csv(&self.curves, open("auc.csv")?)
    }
}

/// Groups records by (window, algorithm) in first-seen order of windows and
/// algorithms, then averages per-iteration metrics with equal weights.
pub fn summarize(records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, usize), (Algorithm, Vec<(f64, f64, f64)>)> = BTreeMap::new();
    let mut alg_rank: Vec<Algorithm> = Vec::new();
    for r in records {
        let rank = match alg_rank.iter().position(|&a| a == r.algorithm) {
            Some(k) => k,
            None => {
                alg_rank.push(r.algorithm);
                alg_rank.len() - 1
            }
        };
        groups
            .entry((r.window_size, rank))
            .or_insert_with(|| (r.algorithm, Vec::new()))
            .1
            .push(precision_recall_f1(&r.cm));
    }
    groups
        .into_iter()
        .map(|((window_size, _), (algorithm, prf))| {
            let k = prf.len() as f64;
            let mean = |sel: fn(&(f64, f64, f64)) -> f64| prf.iter().map(sel).sum::<f64>() / k;
            let f1s = prf.iter().map(|x| x.2);
            SummaryRow {
                window_size,
                algorithm,
                f1: mean(|x| x.2),
                precision: mean(|x| x.0),
                recall: mean(|x| x.1),
                f1_min: f1s.clone().fold(f64::INFINITY, f64::min),
                f1_max: f1s.fold(f64::NEG_INFINITY, f64::max),
                iterations: prf.len(),
            }
        })
        .collect()
}

/// Per-window confusion matrices (summed over iterations) for each algorithm.
pub fn per_window_matrices(records: &[ExperimentRecord]) -> Vec<(Algorithm, BTreeMap<usize, ConfusionMatrix>)> {
    let mut out: Vec<(Algorithm, BTreeMap<usize, ConfusionMatrix>)> = Vec::new();
    for r in records {
        let slot = match out.iter().position(|(a, _)| *a == r.algorithm) {
            Some(k) => k,
            None => {
                out.push((r.algorithm, BTreeMap::new()));
                out.len() - 1
            }
        };
        *out[slot].1.entry(r.window_size).or_default() += r.cm;
    }
    out
}

/// Window-parameterized ROC and PR curves with AUCs, one per algorithm.
pub fn window_curves(records: &[ExperimentRecord]) -> Result<Vec<AlgorithmCurves>> {
    per_window_matrices(records)
        .into_iter()
        .map(|(algorithm, cms)| {
            let (roc, roc_auc) = metrics::curve_over_windows(&cms, CurveKind::Roc)?;
            let (pr, pr_auc) = metrics::curve_over_windows(&cms, CurveKind::Pr)?;
            Ok(AlgorithmCurves {
                algorithm,
                roc,
                roc_auc,
                pr,
                pr_auc,
            })
        })
        .collect()
}

pub const RECORDS_HEADER: [&str; 7] = ["window_size", "algorithm", "iteration", "tp", "fp", "fn", "tn"];

pub fn write_records_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Validation(format!("writing records CSV: {e}"));
    w.write_record(RECORDS_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.window_size.to_string(),
            r.algorithm.as_str().to_owned(),
            r.iteration.to_string(),
            r.cm.tp.to_string(),
            r.cm.fp.to_string(),
            r.cm.fn_.to_string(),
            r.cm.tn.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::Validation(format!("writing records CSV: {e}")))
}

pub fn read_records_csv<R: Read>(input: R, source: &Path) -> Result<Vec<ExperimentRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| Error::format(source, "<header>", e.to_string()))?
        .clone();
    if header.iter().ne(RECORDS_HEADER.iter().copied()) {
        return Err(Error::format(
            source,
            "<header>",
            format!("expected `{}`", RECORDS_HEADER.join(",")),
        ));
    }
    let mut records = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| Error::format(source, format!("row {row}"), e.to_string()))?;
        let num = |i: usize| -> Result<u64> {
            rec.get(i).unwrap_or("").trim().parse::<u64>().map_err(|e| {
                Error::format(source, format!("row {row}, {}", RECORDS_HEADER[i]), e.to_string())
            })
        };
        let algorithm: Algorithm = rec
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|e: Error| Error::format(source, format!("row {row}, algorithm"), e.to_string()))?;
        records.push(ExperimentRecord {
            window_size: num(0)? as usize,
            algorithm,
            iteration: num(2)? as usize,
            cm: ConfusionMatrix::new(num(3)?, num(4)?, num(5)?, num(6)?),
            skipped_folds: 0,
            resampled_folds: 0,
        });
    }
    Ok(records)
}

pub fn write_summary_csv<W: Write>(summary: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Validation(format!("writing summary CSV: {e}"));
    w.write_record(["window_size", "algorithm", "f1", "precision", "recall"])
        .map_err(csv_err)?;
    for r in summary {
        w.write_record([
            r.window_size.to_string(),
            r.algorithm.as_str().to_owned(),
            format!("{:.6}", r.f1),
            format!("{:.6}", r.precision),
            format!("{:.6}", r.recall),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::Validation(format!("writing summary CSV: {e}")))
}

pub fn write_window_curves_csv<W: Write>(curves: &[AlgorithmCurves], out: W) -> Result<()> {
    let rows: Vec<(CurveKind, String, Vec<CurvePoint>)> = curves
        .iter()
        .flat_map(|c| {
            [
                (CurveKind::Roc, c.algorithm.as_str().to_owned(), c.roc.clone()),
                (CurveKind::Pr, c.algorithm.as_str().to_owned(), c.pr.clone()),
            ]
        })
        .collect();
    metrics::write_curve_csv(&rows, out)
}

pub fn write_window_auc_csv<W: Write>(curves: &[AlgorithmCurves], out: W) -> Result<()> {
    let rows: Vec<(String, f64, f64)> = curves
        .iter()
        .map(|c| (c.algorithm.as_str().to_owned(), c.roc_auc, c.pr_auc))
        .collect();
    metrics::write_auc_csv(&rows, out)
}
