//! Statistical checks on the synthetic generator.

use std::collections::BTreeMap;

use helpfusion_core::detectors::{self, DetectorConfig, N_DETECTORS};
use helpfusion_core::synthgen::{self, kind_proportions, GeneratorConfig};
use helpfusion_core::ConfusionMatrix;

mod common;
use common::lag_one_mutual_information;

fn config(n_sessions: usize, persistence: f64, seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        n_sessions,
        persistence,
        seed,
        ..GeneratorConfig::default()
    }
}

#[test]
fn persistence_creates_temporal_dependence() {
    let labels = |tau| -> Vec<Vec<bool>> {
        let c = synthgen::generate(&config(40, tau, 3)).unwrap();
        c.sessions.into_iter().map(|s| s.labels).collect()
    };
    let independent = lag_one_mutual_information(&labels(1.0));
    let persistent = lag_one_mutual_information(&labels(20.0));
    assert!(independent < 0.01, "{independent}");
    assert!(persistent > 0.2, "{persistent}");
}

#[test]
fn kind_mix_matches_target_proportions() {
    let corpus = synthgen::generate(&config(96, 20.0, 11)).unwrap();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut total = 0;
    for s in &corpus.sessions {
        for e in &s.events {
            *counts.entry(e.kind().as_str()).or_default() += 1;
            total += 1;
        }
    }
    assert!(total >= 10_000);
    for (kind, p) in kind_proportions() {
        let observed = counts.get(kind.as_str()).copied().unwrap_or(0) as f64 / total as f64;
        assert!((observed - p).abs() <= 0.03, "{kind:?}: {observed} vs {p}");
    }
}

fn detector_confusions(pairs: impl Iterator<Item = ([f64; N_DETECTORS], bool)>) -> [ConfusionMatrix; N_DETECTORS] {
    let mut cms = [ConfusionMatrix::default(); N_DETECTORS];
    for (v, y) in pairs {
        for (cm, x) in cms.iter_mut().zip(v) {
            cm.record(x >= 0.5, y);
        }
    }
    cms
}

#[test]
fn streams_hit_the_detector_targets() {
    let cfg = config(96, 20.0, 12);
    let corpus = synthgen::generate(&cfg).unwrap();
    let cms = detector_confusions(
        corpus
            .streams
            .iter()
            .flat_map(|s| s.rows.iter().map(|(v, y)| (v.to_array(), *y))),
    );
    for (cm, t) in cms.iter().zip(&cfg.targets) {
        assert!((cm.precision() - t.precision).abs() <= 0.07, "{cm:?} vs {t:?}");
        assert!((cm.recall() - t.recall).abs() <= 0.03, "{cm:?} vs {t:?}");
    }
}

#[test]
fn rule_detectors_on_rich_sessions_hit_the_effective_targets() {
    let corpus = synthgen::generate(&config(96, 20.0, 13)).unwrap();
    let det = DetectorConfig::default();
    let cms = detector_confusions(corpus.sessions.iter().flat_map(|s| {
        detectors::run_all_detectors(s, &det)
            .into_iter()
            .map(|(v, y)| (v.to_array(), y))
    }));
    for (cm, t) in cms.iter().zip(&corpus.rich.targets) {
        assert!((cm.precision() - t.precision).abs() <= 0.07, "{cm:?} vs {t:?}");
        assert!((cm.recall() - t.recall).abs() <= 0.07, "{cm:?} vs {t:?}");
    }
    // Feasible targets pass through unchanged.
    for d in 0..3 {
        assert_eq!(corpus.rich.scale[d], 1.0);
    }
}

/// Plug-in mutual information (nats) between the label at `t` and the
/// previous event's full decision vector.
fn label_vs_previous_vector_information(streams: &[helpfusion_core::DecisionStream]) -> f64 {
    let mut joint: BTreeMap<(String, bool), f64> = BTreeMap::new();
    let mut n = 0.0;
    for st in streams {
        for w in st.rows.windows(2) {
            let key = format!("{:?}", w[0].0.to_array());
            *joint.entry((key, w[1].1)).or_default() += 1.0;
            n += 1.0;
        }
    }
    let mut px: BTreeMap<&str, f64> = BTreeMap::new();
    let mut py = [0.0f64; 2];
    for ((x, y), c) in &joint {
        *px.entry(x).or_default() += c / n;
        py[usize::from(*y)] += c / n;
    }
    joint
        .iter()
        .map(|((x, y), c)| {
            let p = c / n;
            p * (p / (px[x.as_str()] * py[usize::from(*y)])).ln()
        })
        .sum()
}

#[test]
fn previous_decisions_carry_information_about_the_label() {
    let streams = |tau| synthgen::generate(&config(200, tau, 21)).unwrap().streams;
    let independent = label_vs_previous_vector_information(&streams(1.0));
    let persistent = label_vs_previous_vector_information(&streams(20.0));
    // At persistence 1 only sampling noise remains.
    assert!(independent < 0.002, "{independent}");
    assert!(persistent > 5.0 * independent.max(1e-4), "{persistent} vs {independent}");
}
