//! Acceptance criteria 1 to 11. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use helpfusion_core::detectors::{DecisionStream, DecisionVector, DETECTOR_NAMES, N_DETECTORS};
use helpfusion_core::harness::{balance, cell_seed, kfold, run_sweep, shuffled_order, single_detector_confusion, FeatureMatrix};
use helpfusion_core::learners::{
    logistic_loss_and_grad, DecisionTree, ForestParams, GaussianNaiveBayes, MaxFeatures, NaiveBayesParams,
    RandomForest, SvmParams, SvmRbf, TreeParams,
};
use helpfusion_core::metrics::{self, ConfusionMatrix, CurveKind, CurvePoint};
use helpfusion_core::synthgen::{self, GeneratorConfig};
use helpfusion_core::windowing::build_corpus;
use helpfusion_core::{seed, Algorithm, ExperimentConfig, SweepReport, TrainSet};
use rand::Rng;

mod common;
use common::{
    brute_force_dual, distinct_set, dual_objective, nb_example_posterior, prf_brute_force, q_matrix, random_set,
    shoelace_oracle, signs,
};

const METRIC_TOL: f64 = 1e-12;
const GRADIENT_REL_TOL: f64 = 1e-5;
const CALIBRATION_TOL: f64 = 0.05;
const PREVALENCE_TARGET: f64 = 0.45;
const FOREST_GAIN_MIN: f64 = 0.03;
const NOISE_ALLOWANCE: f64 = 0.01;
const BASELINE_AUC_TOL: f64 = 0.03;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Result<(), String> {
    check(elapsed < limit, || format!("{what} took {elapsed:.1?}, limit {limit:?}"))
}

fn c1_metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = seed::rng(1);
    for _ in 0..1000 {
        let [tp, fp, fn_, tn] = std::array::from_fn(|_| rng.random_range(0..60u64));
        let (p, r, f) = metrics::precision_recall_f1(&ConfusionMatrix::new(tp, fp, fn_, tn));
        let (op, or, of) = prf_brute_force(tp, fp, fn_, tn);
        check(
            (p - op).abs() <= METRIC_TOL && (r - or).abs() <= METRIC_TOL && (f - of).abs() <= METRIC_TOL,
            || format!("cm ({tp},{fp},{fn_},{tn}): ({p},{r},{f}) vs ({op},{or},{of})"),
        )?;
    }
    for _ in 0..1000 {
        let n = rng.random_range(1..30);
        let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
        let points: Vec<CurvePoint> = pts.iter().map(|&(x, y)| CurvePoint { x, y, tag: 0.0 }).collect();
        for kind in [CurveKind::Roc, CurveKind::Pr] {
            let a = metrics::auc(&points, kind).map_err(|e| e.to_string())?;
            let o = shoelace_oracle(&pts, kind);
            check((a - o).abs() <= METRIC_TOL, || format!("{kind:?} auc {a} vs oracle {o}"))?;
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(1), "metric oracles")?;
    Ok(format!("1000 matrices, 1000 point sets, tol {METRIC_TOL:e}, {elapsed:.2?}"))
}

fn c2_f1_identity() -> Outcome {
    let (p, r, f) = metrics::precision_recall_f1(&ConfusionMatrix::new(44, 26, 56, 0));
    let rounded = |x: f64| format!("{x:.2}");
    check((rounded(p), rounded(r), rounded(f)) == ("0.63".into(), "0.44".into(), "0.52".into()), || {
        format!("got ({p}, {r}, {f})")
    })?;
    Ok(format!("({p:.4}, {r:.4}, {f:.4})"))
}

fn random_streams(rng: &mut impl Rng) -> Vec<DecisionStream> {
    let values = [0.0, 0.5, 1.0];
    (0..rng.random_range(1..6))
        .map(|k| {
            let len = rng.random_range(0..70);
            DecisionStream {
                session_id: format!("s{k}"),
                times: (0..len).map(|i| i as f64).collect(),
                rows: (0..len)
                    .map(|_| {
                        let v: [f64; 4] = std::array::from_fn(|_| values[rng.random_range(0..3)]);
                        (DecisionVector::from_array(v).unwrap(), rng.random_bool(0.4))
                    })
                    .collect(),
            }
        })
        .collect()
}

fn c3_windowing_laws() -> Outcome {
    let start = Instant::now();
    let mut rng = seed::rng(3);
    let mut checked = 0usize;
    for _ in 0..20 {
        let streams = random_streams(&mut rng);
        let mut corpora: Vec<_> = Vec::new();
        for s in 1..=51 {
            corpora.push(build_corpus(&streams, s).map_err(|e| e.to_string())?);
        }
        let mut want: Vec<bool> = streams.iter().flat_map(|st| st.targets()).collect();
        want.sort_unstable();
        for s in 1..=50 {
            let corpus = &corpora[s - 1];
            let mut got: Vec<bool> = corpus.iter().map(|i| i.target).collect();
            got.sort_unstable();
            check(got == want, || format!("s={s}: target multiset changed"))?;
            let mut k = 0;
            for st in &streams {
                for t in 0..st.len() {
                    let inst = &corpus[k];
                    check(inst.features.len() == 4 * s, || format!("s={s}: length {}", inst.features.len()))?;
                    check(corpora[s][k].features[..4 * s] == inst.features[..], || {
                        format!("s={s}: not a prefix of s+1")
                    })?;
                    check(inst.session_id == st.session_id, || format!("s={s}: session mismatch"))?;
                    for j in 0..s {
                        let slot = &inst.features[4 * j..4 * j + 4];
                        let expected = if j <= t { st.rows[t - j].0.to_array() } else { [0.0; 4] };
                        check(slot == expected, || format!("s={s}, t={t}, slot {j}: {slot:?} vs {expected:?}"))?;
                    }
                    k += 1;
                    checked += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(5), "windowing laws")?;
    Ok(format!("20 corpora x s in 1..50, {checked} instances, {elapsed:.2?}"))
}

fn c4_balancing_laws() -> Outcome {
    let mut rng = seed::rng(4);
    let mut folds_checked = 0;
    for _ in 0..500 {
        let n = rng.random_range(10..200);
        let pi = rng.random_range(0.05..0.95);
        let targets: Vec<bool> = (0..n).map(|_| rng.random_bool(pi)).collect();
        let k = rng.random_range(2..=10);
        let order = shuffled_order(n, rng.random());
        for range in kfold(n, k).map_err(|e| e.to_string())? {
            let test: BTreeSet<usize> = order[range.clone()].iter().copied().collect();
            let train: Vec<usize> = order[..range.start].iter().chain(&order[range.end..]).copied().collect();
            let train_pos: BTreeSet<usize> = train.iter().copied().filter(|&i| targets[i]).collect();
            let train_neg: BTreeSet<usize> = train.iter().copied().filter(|&i| !targets[i]).collect();
            let Ok(b) = balance(&train, &targets, &mut seed::rng(rng.random())) else {
                check(train_pos.is_empty() || train_neg.is_empty(), || "spurious fold skip".into())?;
                continue;
            };
            check(b.positives.len() == b.negatives.len(), || "unequal class counts".into())?;
            let kept: BTreeSet<usize> = b.positives.iter().copied().collect();
            check(kept == train_pos && b.positives.len() == train_pos.len(), || "positives not all kept".into())?;
            check(b.negatives.iter().all(|i| train_neg.contains(i)), || "negative outside training split".into())?;
            check(b.indices().all(|i| !test.contains(&i)), || "test fold touched".into())?;
            folds_checked += 1;
        }
    }
    Ok(format!("500 fuzzed splits, {folds_checked} balanced folds"))
}

fn c5_learner_sanity() -> Outcome {
    let start = Instant::now();
    // Separable data: distinct rows.
    let ts = distinct_set(100, 5, 5);
    let tree = DecisionTree::fit(&ts, &TreeParams { max_depth: None, min_samples_split: 2 }).map_err(|e| e.to_string())?;
    let forest = RandomForest::fit(&ts, &ForestParams { n_estimators: 100, max_depth: None, ..ForestParams::default() }, 5)
        .map_err(|e| e.to_string())?;
    for (row, &t) in ts.rows().zip(ts.targets()) {
        check(tree.predict(row) == t, || "tree training accuracy below 1".into())?;
        check((forest.vote_fraction(row) >= 0.5) == t, || "forest training accuracy below 1".into())?;
    }

    let mut worst_grad = 0.0f64;
    for s in 0..20 {
        let ts = random_set(40, 8, s);
        let mut rng = seed::rng(s + 1000);
        let w: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b = rng.random_range(-1.0..1.0);
        let l2 = 1e-2;
        let (_, grad) = logistic_loss_and_grad(&ts, &w, b, l2);
        let h = 1e-6;
        for j in 0..=8 {
            let at = |delta: f64| {
                let mut w2 = w.clone();
                let mut b2 = b;
                if j < 8 {
                    w2[j] += delta;
                } else {
                    b2 += delta;
                }
                logistic_loss_and_grad(&ts, &w2, b2, l2).0
            };
            let numeric = (at(h) - at(-h)) / (2.0 * h);
            let rel = (numeric - grad[j]).abs() / grad[j].abs().max(1.0);
            worst_grad = worst_grad.max(rel);
        }
    }
    check(worst_grad <= GRADIENT_REL_TOL, || format!("gradient relative error {worst_grad:e}"))?;

    let mut worst_dual = 0.0f64;
    for s in 0..20 {
        let ts = distinct_set(8, 2, s);
        let c = [0.5, 1.0, 10.0][s as usize % 3];
        let params = SvmParams { c, gamma: Some(1.0), tolerance: 1e-9, ..SvmParams::default() };
        let (model, sol) = SvmRbf::fit_with_solution(&ts, &params).map_err(|e| e.to_string())?;
        let y = signs(&ts);
        let q = q_matrix(&ts, &y, 1.0);
        let gap = (dual_objective(&q, &sol.alpha) - brute_force_dual(&q, &y, c)).abs();
        worst_dual = worst_dual.max(gap);
        // KKT on the primal margins.
        for (i, row) in ts.rows().enumerate() {
            let m = y[i] * model.decision_value(row);
            let a = sol.alpha[i];
            let ok = if a <= 1e-9 {
                m >= 1.0 - 1e-6
            } else if a >= c - 1e-9 {
                m <= 1.0 + 1e-6
            } else {
                (m - 1.0).abs() <= 1e-6
            };
            check(ok, || format!("KKT violated at row {i}: alpha {a}, margin {m}"))?;
        }
    }
    check(worst_dual <= 1e-6, || format!("dual objective gap {worst_dual:e}"))?;

    let nb_ts = TrainSet::from_rows(&[vec![0.0], vec![0.2], vec![0.8], vec![1.0]], vec![false, false, true, true])
        .map_err(|e| e.to_string())?;
    let nb = GaussianNaiveBayes::fit(&nb_ts, &NaiveBayesParams::default()).map_err(|e| e.to_string())?;
    for x in [0.1, 0.4, 0.5, 0.7] {
        check((nb.posterior(&[x]) - nb_example_posterior(x)).abs() < 1e-12, || format!("NB posterior at {x}"))?;
    }
    check(nb.posterior(&[0.1]) < 0.5, || "NB score(0.1) not below 0.5".into())?;

    let single = ForestParams {
        n_estimators: 1,
        bootstrap: false,
        max_features: MaxFeatures::All,
        ..ForestParams::default()
    };
    for s in 0..5 {
        let ts = random_set(150, 8, s);
        let tree = DecisionTree::fit(&ts, &TreeParams::default()).map_err(|e| e.to_string())?;
        let forest = RandomForest::fit(&ts, &single, s).map_err(|e| e.to_string())?;
        check(forest.trees()[0] == tree, || "single full forest differs from the tree".into())?;
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(30), "learner sanity")?;
    Ok(format!(
        "gradient rel err {worst_grad:.1e}, dual gap {worst_dual:.1e}, NB p(0.1) = {:.2e}, {elapsed:.2?}",
        nb.posterior(&[0.1])
    ))
}

fn c7_calibration() -> Outcome {
    // 800 sessions of 125 events.
    let cfg = GeneratorConfig { n_sessions: 800, ..GeneratorConfig::default() };
    let corpus = synthgen::generate(&cfg).map_err(|e| e.to_string())?;
    let mut cms = [ConfusionMatrix::default(); N_DETECTORS];
    let mut events = 0usize;
    let mut positives = 0usize;
    for st in &corpus.streams {
        for (v, y) in &st.rows {
            for (cm, x) in cms.iter_mut().zip(v.to_array()) {
                cm.record(x >= 0.5, *y);
            }
            events += 1;
            positives += usize::from(*y);
        }
    }
    check(events >= 10_000, || format!("only {events} events"))?;
    let mut parts = Vec::new();
    for ((cm, t), name) in cms.iter().zip(&cfg.targets).zip(DETECTOR_NAMES) {
        let (p, r) = (cm.precision(), cm.recall());
        check((p - t.precision).abs() <= CALIBRATION_TOL && (r - t.recall).abs() <= CALIBRATION_TOL, || {
            format!("{name}: ({p:.3}, {r:.3}) vs ({}, {})", t.precision, t.recall)
        })?;
        parts.push(format!("{name} ({p:.3}, {r:.3})"));
    }
    let prevalence = positives as f64 / events as f64;
    check((prevalence - PREVALENCE_TARGET).abs() <= CALIBRATION_TOL, || format!("prevalence {prevalence:.3}"))?;
    Ok(format!("{events} events, {}, prevalence {prevalence:.3}", parts.join(", ")))
}

fn quick_sweep(streams: &[DecisionStream], threads: usize) -> Result<(SweepReport, Duration), String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let report = pool
        .install(|| run_sweep(streams, &ExperimentConfig::quick()))
        .map_err(|e| e.to_string())?;
    Ok((report, start.elapsed()))
}

fn csv_bytes(report: &SweepReport, dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    report.write_csvs(dir).map_err(|e| e.to_string())?;
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.path()).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let bytes = std::fs::read(&p).map_err(|e| e.to_string())?;
            Ok((p.file_name().unwrap().to_string_lossy().into_owned(), bytes))
        })
        .collect()
}

fn c6_determinism(a: &(SweepReport, Duration), b: &(SweepReport, Duration)) -> Outcome {
    let limit = Duration::from_secs(600);
    within(a.1, limit, "quick sweep, 1 thread")?;
    within(b.1, limit, "quick sweep, 8 threads")?;
    let da = tempfile::tempdir().map_err(|e| e.to_string())?;
    let db = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fa = csv_bytes(&a.0, da.path())?;
    let fb = csv_bytes(&b.0, db.path())?;
    check(fa.len() == fb.len() && !fa.is_empty(), || "different CSV sets".into())?;
    for ((na, ba), (nb, bb)) in fa.iter().zip(&fb) {
        check(na == nb && ba == bb, || format!("{na} differs between runs"))?;
    }
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    Ok(format!(
        "{} identical at 1 and 8 threads; runs took {:.0?} and {:.0?}",
        names.join(", "),
        a.1,
        b.1
    ))
}

fn c8_window_trend(report: &SweepReport) -> Outcome {
    // Frozen-seed reference run (generator seed 7, master seed 42):
    // forest .596 -> .686, tree .596 -> .612, NB .600 -> .664,
    // logistic .591 -> .728, SVM .595 -> .717.
    let f1 = |w, a| report.summary_for(w, a).map(|r| r.f1).ok_or(format!("no summary for {a} at {w}"));
    let gain = f1(10, Algorithm::Forest)? - f1(1, Algorithm::Forest)?;
    check(gain >= FOREST_GAIN_MIN, || format!("forest gain {gain:.3} below {FOREST_GAIN_MIN}"))?;
    let mut parts = Vec::new();
    for alg in Algorithm::LEARNERS {
        let (one, ten) = (f1(1, alg)?, f1(10, alg)?);
        check(ten >= one - NOISE_ALLOWANCE, || format!("{alg}: s=10 {ten:.3} vs s=1 {one:.3}"))?;
        parts.push(format!("{alg} {one:.3}->{ten:.3}"));
    }
    Ok(format!("forest gain {gain:.3}; {}", parts.join(", ")))
}

fn c9_fusion_beats_parts(streams: &[DecisionStream], report: &SweepReport) -> Outcome {
    let cfg = &report.config;
    let corpus = FeatureMatrix::build(streams, 10).map_err(|e| e.to_string())?;
    let mut best = (0.0f64, "");
    for (d, name) in DETECTOR_NAMES.iter().enumerate() {
        let mut total = 0.0;
        for it in 0..cfg.iterations {
            let s = cell_seed(cfg.master_seed, 10, Algorithm::Forest, it);
            let cm = single_detector_confusion(&corpus, d, cfg.folds, s).map_err(|e| e.to_string())?;
            total += cm.f1();
        }
        let mean = total / cfg.iterations as f64;
        if mean > best.0 {
            best = (mean, name);
        }
    }
    let forest = report
        .summary_for(10, Algorithm::Forest)
        .map(|r| r.f1)
        .ok_or("no forest summary at s=10")?;
    check(forest > best.0, || format!("forest {forest:.3} vs {} {:.3}", best.1, best.0))?;
    Ok(format!("forest {forest:.3} > best single detector {} {:.3}", best.1, best.0))
}

fn c10_baseline(streams: &[DecisionStream], report: &SweepReport) -> Outcome {
    let curves = report.curves_for(Algorithm::RandomBaseline).ok_or("no baseline curves")?;
    let n: usize = streams.iter().map(DecisionStream::len).sum();
    let positives = streams.iter().flat_map(|s| s.targets()).filter(|&t| t).count();
    let prevalence = positives as f64 / n as f64;
    check((curves.roc_auc - 0.5).abs() <= BASELINE_AUC_TOL, || format!("ROC-AUC {:.4}", curves.roc_auc))?;
    check((curves.pr_auc - prevalence).abs() <= BASELINE_AUC_TOL, || {
        format!("PR-AUC {:.4} vs prevalence {prevalence:.4}", curves.pr_auc)
    })?;
    Ok(format!(
        "ROC-AUC {:.4}, PR-AUC {:.4}, prevalence {prevalence:.4}",
        curves.roc_auc, curves.pr_auc
    ))
}

fn c11_bookkeeping() -> Outcome {
    // Alternating labels keep both classes in every training split.
    let mut rng = seed::rng(11);
    let streams: Vec<DecisionStream> = (0..2)
        .map(|k| DecisionStream {
            session_id: format!("s{k}"),
            times: (0..10).map(f64::from).collect(),
            rows: (0..10)
                .map(|i| {
                    let v: [f64; 4] = std::array::from_fn(|_| [0.0, 0.5, 1.0][rng.random_range(0..3)]);
                    (DecisionVector::from_array(v).unwrap(), i % 2 == 0)
                })
                .collect(),
        })
        .collect();
    let cfg = ExperimentConfig::default();
    let report = run_sweep(&streams, &cfg).map_err(|e| e.to_string())?;
    let cells: BTreeSet<(usize, Algorithm, usize)> =
        report.records.iter().map(|r| (r.window_size, r.algorithm, r.iteration)).collect();
    check(report.records.len() == cfg.n_cells() && cells.len() == cfg.n_cells(), || {
        format!("{} records for {} cells", report.records.len(), cfg.n_cells())
    })?;
    let learner_records = report.records.iter().filter(|r| r.algorithm != Algorithm::RandomBaseline).count();
    check(learner_records == 12_500, || format!("{learner_records} learner records"))?;
    check(report.records.iter().all(|r| r.cm.total() == 20 && r.skipped_folds == 0), || {
        "a record's matrix total differs from the corpus size".into()
    })?;
    Ok(format!(
        "{} records ({learner_records} for the five learners plus {} baseline), every total 20",
        report.records.len(),
        report.records.len() - learner_records
    ))
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report_line = |id: usize, name: &str, outcome: Outcome| {
        match outcome {
            Ok(detail) => println!("PASS  {id:>2} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {id:>2} {name}: {why}");
            }
        }
    };
    report_line(1, "metric oracle equivalence", c1_metric_oracles());
    report_line(2, "F1 identity spot-check", c2_f1_identity());
    report_line(3, "windowing laws", c3_windowing_laws());
    report_line(4, "balancing laws", c4_balancing_laws());
    report_line(5, "learner sanity", c5_learner_sanity());

    let corpus = synthgen::generate(&GeneratorConfig::default()).map(|c| c.streams);
    let sweeps = corpus.as_ref().map_err(|e| e.to_string()).and_then(|streams| {
        let one = quick_sweep(streams, 1)?;
        let eight = quick_sweep(streams, 8)?;
        Ok((one, eight))
    });
    match (&corpus, &sweeps) {
        (Ok(streams), Ok((one, eight))) => {
            report_line(6, "determinism", c6_determinism(one, eight));
            report_line(7, "calibration", c7_calibration());
            report_line(8, "window-size trend", c8_window_trend(&one.0));
            report_line(9, "fusion beats single detectors", c9_fusion_beats_parts(streams, &one.0));
            report_line(10, "random baseline", c10_baseline(streams, &one.0));
        }
        (_, Err(e)) => {
            for (id, name) in [(6, "determinism"), (8, "window-size trend"), (9, "fusion beats single detectors"), (10, "random baseline")] {
                report_line(id, name, Err(format!("quick sweep failed: {e}")));
            }
            report_line(7, "calibration", c7_calibration());
        }
        (Err(_), Ok(_)) => unreachable!(),
    }
    report_line(11, "sweep bookkeeping", c11_bookkeeping());

    if failed == 0 {
        println!("acceptance: all 11 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
