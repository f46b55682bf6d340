use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use helpfusion_core::detectors::{self, DETECTOR_NAMES, N_DETECTORS};
use helpfusion_core::harness::{self, ExperimentConfig};
use helpfusion_core::metrics::CurveKind;
use helpfusion_core::report::{self, F1Grid, GRID_WINDOWS};
use helpfusion_core::synthgen::{self, DetectorTarget};
use helpfusion_core::{events, learners, windowing, DecisionStream, DetectorConfig, GeneratorConfig, TrainSet};
use serde::Serialize;

use crate::manifest::{digest_inputs, RunManifest};
use crate::settings::{parse_algorithms, parse_target, parse_value, parse_windows, ConfigFile};
use crate::{ApplyArgs, CliError, DetectArgs, GenerateArgs, ReportArgs, SweepArgs, TrainArgs};

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::data(format!("cannot create {}: {e}", dir.display())))
}

fn create_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

pub fn generate(a: &GenerateArgs) -> Result<(), CliError> {
    let file = ConfigFile::load(a.config.as_deref())?;
    file.check_keys(&["sessions", "events", "seed", "prevalence", "persistence", "gap"])?;
    let mut cfg = GeneratorConfig::default();
    if let Some(v) = file.resolve(a.sessions, "sessions", parse_value)? {
        cfg.n_sessions = v;
    }
    if let Some(v) = file.resolve(a.events, "events", parse_value)? {
        cfg.events_per_session = v;
    }
    if let Some(v) = file.resolve(a.seed, "seed", parse_value)? {
        cfg.seed = v;
    }
    if let Some(v) = file.resolve(a.prevalence, "prevalence", parse_value)? {
        cfg.prevalence = v;
    }
    if let Some(v) = file.resolve(a.persistence, "persistence", parse_value)? {
        cfg.persistence = v;
    }
    if let Some(v) = file.resolve(a.gap, "gap", parse_value)? {
        cfg.mean_gap_seconds = v;
    }
    for t in &a.targets {
        let (d, p, r) = parse_target(t).map_err(CliError::usage)?;
        cfg.targets[d] = DetectorTarget::new(p, r);
    }
    cfg.validate()?;

    let mut manifest = RunManifest::new(
        "generate",
        &cfg,
        cfg.seed,
        "session k: skeleton, stream and payload RNGs seeded by derive_path(seed, [hash(label), k])",
    );
    let corpus = synthgen::generate(&cfg)?;
    create_dir(&a.out)?;
    events::save_sessions(&corpus.sessions, a.out.join("sessions.json"))?;
    detectors::save_decisions(&corpus.streams, a.out.join("decisions.csv"))?;
    manifest.outputs = vec!["sessions.json".into(), "decisions.csv".into()];
    manifest.write(&a.out)?;

    println!("calibration (prevalence {}):", cfg.prevalence);
    println!(
        "{:<8} {:>9} {:>7} {:>8} {:>8} {:>11} {:>11}",
        "detector", "precision", "recall", "r(help)", "q(other)", "rich recall", "rich scale"
    );
    for d in 0..N_DETECTORS {
        println!(
            "{:<8} {:>9.4} {:>7.4} {:>8.4} {:>8.4} {:>11.4} {:>11.4}",
            DETECTOR_NAMES[d],
            cfg.targets[d].precision,
            cfg.targets[d].recall,
            corpus.emissions.help[d],
            corpus.emissions.no_help[d],
            corpus.rich.targets[d].recall,
            corpus.rich.scale[d],
        );
    }
    println!(
        "wrote {} sessions ({} events) to {}",
        corpus.sessions.len(),
        corpus.streams.iter().map(DecisionStream::len).sum::<usize>(),
        a.out.display()
    );
    Ok(())
}

pub fn detect(a: &DetectArgs) -> Result<(), CliError> {
    let file = ConfigFile::load(a.config.as_deref())?;
    file.check_keys(&["min-dwell", "confirm-window", "keywords", "stall-score"])?;
    let mut cfg = DetectorConfig::default();
    if let Some(v) = file.resolve(a.min_dwell, "min-dwell", parse_value)? {
        cfg.mutual_gaze_min_duration = v;
    }
    if let Some(v) = file.resolve(a.confirm_window, "confirm-window", parse_value)? {
        cfg.confirm_window = v;
    }
    if let Some(v) = file.resolve(a.keywords.clone(), "keywords", |s| Ok(s.to_owned()))? {
        cfg.keywords = v
            .split(',')
            .map(|k| k.trim().to_lowercase())
            .filter(|k| !k.is_empty())
            .collect();
    }
    if let Some(v) = file.resolve(a.stall_score, "stall-score", parse_value)? {
        cfg.stall_score = v;
    }
    cfg.validate()?;
    let sessions = events::load_sessions(&a.sessions)?;
    let streams: Vec<DecisionStream> = sessions.iter().map(|s| detectors::detect_stream(s, &cfg)).collect();
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    detectors::save_decisions(&streams, &a.out)?;
    eprintln!(
        "wrote {} decision rows for {} sessions to {}",
        streams.iter().map(DecisionStream::len).sum::<usize>(),
        streams.len(),
        a.out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SweepManifestConfig<'a> {
    experiment: &'a ExperimentConfig,
    threads: usize,
    input: &'a Path,
}

fn sweep_config(a: &SweepArgs, file: &ConfigFile) -> Result<ExperimentConfig, CliError> {
    let quick = file
        .resolve(a.quick.then_some(true), "quick", crate::settings::parse_bool)?
        .unwrap_or(false);
    let mut cfg = if quick {
        ExperimentConfig::quick()
    } else {
        ExperimentConfig::default()
    };
    if let Some(v) = file.resolve(a.windows.clone(), "windows", |s| Ok(s.to_owned()))? {
        cfg.window_sizes = parse_windows(&v).map_err(CliError::usage)?;
    }
    if let Some(v) = file.resolve(a.algos.clone(), "algos", |s| Ok(s.to_owned()))? {
        cfg.algorithms = parse_algorithms(&v).map_err(CliError::usage)?;
    }
    if let Some(v) = file.resolve(a.iters, "iters", parse_value)? {
        cfg.iterations = v;
    }
    if let Some(v) = file.resolve(a.folds, "folds", parse_value)? {
        cfg.folds = v;
    }
    if let Some(v) = file.resolve(a.seed, "seed", parse_value)? {
        cfg.master_seed = v;
    }
    if let Some(v) = file.resolve(a.trees, "trees", parse_value)? {
        cfg.learner.forest.n_estimators = v;
    }
    if let Some(v) = file.resolve(a.max_depth, "max-depth", parse_value)? {
        cfg.learner.forest.max_depth = Some(v);
        cfg.learner.tree.max_depth = Some(v);
    }
    if let Some(v) = file.resolve(a.svm_c, "svm-c", parse_value)? {
        cfg.learner.svm.c = v;
    }
    if let Some(v) = file.resolve(a.svm_gamma, "svm-gamma", parse_value)? {
        cfg.learner.svm.gamma = Some(v);
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn sweep(a: &SweepArgs) -> Result<(), CliError> {
    let file = ConfigFile::load(a.config.as_deref())?;
    file.check_keys(&[
        "quick", "windows", "algos", "iters", "folds", "seed", "threads", "trees", "max-depth", "svm-c", "svm-gamma",
    ])?;
    let cfg = sweep_config(a, &file)?;
    let threads = file
        .resolve(a.threads, "threads", parse_value)?
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return Err(CliError::usage("--threads must be positive"));
    }
    let (input, streams) = match (&a.decisions, &a.sessions) {
        (Some(path), _) => (path.as_path(), detectors::load_decisions(path)?),
        (None, Some(path)) => {
            let det = DetectorConfig::default();
            let sessions = events::load_sessions(path)?;
            (path.as_path(), sessions.iter().map(|s| detectors::detect_stream(s, &det)).collect())
        }
        (None, None) => return Err(CliError::usage("either --decisions or --sessions is required")),
    };
    let mut manifest = RunManifest::new(
        "sweep",
        SweepManifestConfig {
            experiment: &cfg,
            threads,
            input,
        },
        cfg.master_seed,
        "cell (window, algorithm, iteration): derive_path(master_seed, [window, hash(algorithm), iteration]); per-cell seeds in seeds.csv",
    );
    manifest.inputs = digest_inputs(input)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::data(format!("cannot start thread pool: {e}")))?;
    let started = std::time::Instant::now();
    let report = pool.install(|| harness::run_sweep(&streams, &cfg))?;
    create_dir(&a.out)?;
    report.write_csvs(&a.out)?;
    write_seeds(&a.out.join("seeds.csv"), &cfg)?;
    manifest.outputs = ["records.csv", "summary.csv", "curves.csv", "auc.csv", "seeds.csv"]
        .map(String::from)
        .to_vec();
    manifest.write(&a.out)?;
    eprintln!(
        "{} records over {} instances in {:.1}s ({} threads); skipped folds {}, resampled folds {}, records with 0/0 ratios {}",
        report.records.len(),
        report.corpus_size,
        started.elapsed().as_secs_f64(),
        threads,
        report.notes.skipped_folds,
        report.notes.resampled_folds,
        report.notes.degenerate_ratio_records
    );
    Ok(())
}

fn write_seeds(path: &Path, cfg: &ExperimentConfig) -> Result<(), CliError> {
    let mut w = create_file(path)?;
    let io = |e: std::io::Error| CliError::data(format!("{}: {e}", path.display()));
    writeln!(w, "window_size,algorithm,iteration,seed").map_err(io)?;
    for &win in &cfg.window_sizes {
        for &alg in &cfg.algorithms {
            for it in 0..cfg.iterations {
                let s = harness::cell_seed(cfg.master_seed, win, alg, it);
                writeln!(w, "{win},{},{it},{s}", alg.as_str()).map_err(io)?;
            }
        }
    }
    w.flush().map_err(io)
}

pub fn report(a: &ReportArgs) -> Result<(), CliError> {
    let windows = match &a.windows {
        Some(s) => parse_windows(s).map_err(CliError::usage)?,
        None => GRID_WINDOWS.to_vec(),
    };
    let file = File::open(&a.records).map_err(|e| CliError::data(format!("{}: {e}", a.records.display())))?;
    let records = harness::read_records_csv(file, &a.records)?;
    if records.is_empty() {
        return Err(CliError::data(format!("{} contains no records", a.records.display())));
    }
    let summary = harness::summarize(&records);
    let curves = harness::window_curves(&records)?;
    create_dir(&a.out)?;
    let grid = F1Grid::new(&summary, &windows);
    grid.write_csv(create_file(&a.out.join("f1_grid.csv"))?)?;
    harness::write_summary_csv(&summary, create_file(&a.out.join("summary.csv"))?)?;
    harness::write_window_curves_csv(&curves, create_file(&a.out.join("curves.csv"))?)?;
    harness::write_window_auc_csv(&curves, create_file(&a.out.join("auc.csv"))?)?;
    let text = format!(
        "## Mean F1 by window size\n\n{}\n## Window-parameterized AUC\n\n{}",
        grid.to_markdown(),
        report::auc_markdown(&curves)
    );
    write_text(&a.out.join("report.md"), &text)?;
    write_text(&a.out.join("f1_by_window.svg"), &report::f1_chart_svg(&summary))?;
    write_text(&a.out.join("roc.svg"), &report::curve_chart_svg(&curves, CurveKind::Roc))?;
    write_text(&a.out.join("pr.svg"), &report::curve_chart_svg(&curves, CurveKind::Pr))?;
    print!("{text}");
    Ok(())
}

fn windowed_train_set(streams: &[DecisionStream], window: usize) -> Result<TrainSet, CliError> {
    let corpus = windowing::build_corpus(streams, window)?;
    if corpus.is_empty() {
        return Err(CliError::data("decisions file has no rows"));
    }
    let rows: Vec<Vec<f64>> = corpus.iter().map(|i| i.features.clone()).collect();
    Ok(TrainSet::from_rows(&rows, corpus.iter().map(|i| i.target).collect())?)
}

pub fn train(a: &TrainArgs) -> Result<(), CliError> {
    let algorithm: helpfusion_core::Algorithm = a.algo.parse()?;
    let mut params = helpfusion_core::LearnerParams::default();
    if let Some(t) = a.trees {
        params.forest.n_estimators = t;
    }
    let streams = detectors::load_decisions(&a.decisions)?;
    let train = windowed_train_set(&streams, a.window)?;
    let model = learners::fit(algorithm, &train, &params, a.seed)?;
    write_text(&a.out, &learners::model_to_json(&model)?)?;
    eprintln!("trained {} on {} instances ({} features)", algorithm, train.len(), train.n_features());
    Ok(())
}

pub fn apply(a: &ApplyArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&a.model).map_err(|e| CliError::data(format!("{}: {e}", a.model.display())))?;
    let model = learners::model_from_json(&text, &a.model)?;
    if model.feature_dim() % N_DETECTORS != 0 || model.feature_dim() == 0 {
        return Err(CliError::data(format!(
            "model feature dimension {} is not a window of decision vectors",
            model.feature_dim()
        )));
    }
    let streams = detectors::load_decisions(&a.decisions)?;
    let corpus = windowing::build_corpus(&streams, model.feature_dim() / N_DETECTORS)?;
    let mut w = create_file(&a.out)?;
    let io = |e: std::io::Error| CliError::data(format!("{}: {e}", a.out.display()));
    writeln!(w, "session_id,event_index,score,prediction").map_err(io)?;
    for inst in &corpus {
        let score = model.score(&inst.features)?;
        writeln!(
            w,
            "{},{},{score:.6},{}",
            inst.session_id,
            inst.event_index,
            u8::from(learners::predict_from_score(score))
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}
