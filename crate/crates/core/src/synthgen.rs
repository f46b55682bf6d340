//! Calibrated synthetic sessions and decision streams.
//!
//! A two-state latent chain (needs help or not) drives everything. Each
//! session is first laid out as a skeleton of latent states, timestamps and
//! event kinds; from the skeleton the generator emits
//!
//! - Bernoulli decision streams whose per-detector fire rates are solved in
//!   closed form from precision/recall targets, and
//! - rich sessions whose event payloads make the rule-based detectors fire
//!   at the same per-state rates, as far as the event-kind mix allows.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::{
    confirmatory_gaze_scores, mutual_gaze_scores, DecisionStream, DecisionVector, DetectorConfig,
    DETECTOR_NAMES, N_DETECTORS,
};
use crate::error::{Error, Result};
use crate::events::{round_time, AnnotationEvent, EventKind, EventPayload, GoalPlacement, PlacementAction, Session};
use crate::seed;

/// Relative event-kind rates: gaze, user speech, user gesture, robot speech, task.
pub const KIND_COUNTS: [(EventKind, u32); 5] = [
    (EventKind::Gaze, 956),
    (EventKind::UserSpeech, 145),
    (EventKind::UserGesture, 220),
    (EventKind::RobotSpeech, 255),
    (EventKind::Task, 402),
];

/// Proportion of each event kind under [`KIND_COUNTS`].
pub fn kind_proportions() -> [(EventKind, f64); 5] {
    let total: u32 = KIND_COUNTS.iter().map(|(_, c)| c).sum();
    KIND_COUNTS.map(|(k, c)| (k, f64::from(c) / f64::from(total)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorTarget {
    pub precision: f64,
    pub recall: f64,
}

impl DetectorTarget {
    pub const fn new(precision: f64, recall: f64) -> Self {
        Self { precision, recall }
    }
}

/// Default targets in detector order m_gaze, c_gaze, lexical, task.
pub const DEFAULT_TARGETS: [DetectorTarget; N_DETECTORS] = [
    DetectorTarget::new(0.59, 0.12),
    DetectorTarget::new(0.55, 0.10),
    DetectorTarget::new(0.52, 0.04),
    DetectorTarget::new(0.63, 0.44),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_sessions: usize,
    pub events_per_session: usize,
    pub mean_gap_seconds: f64,
    /// Stationary fraction of help-state events.
    pub prevalence: f64,
    /// Correlation time of the latent chain in events. 1 makes consecutive
    /// states independent; the mean help run is `persistence / (1 - prevalence)`.
    pub persistence: f64,
    pub targets: [DetectorTarget; N_DETECTORS],
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_sessions: 16,
            events_per_session: 125,
            mean_gap_seconds: 1.5,
            prevalence: 0.45,
            persistence: 20.0,
            targets: DEFAULT_TARGETS,
            seed: 7,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |x: f64| x > 0.0 && x < 1.0;
        if !open_unit(self.prevalence) {
            return Err(Error::Argument(format!("prevalence must lie in (0, 1), got {}", self.prevalence)));
        }
        if !(self.mean_gap_seconds > 0.0 && self.mean_gap_seconds.is_finite()) {
            return Err(Error::Argument(format!(
                "mean gap must be positive and finite, got {}",
                self.mean_gap_seconds
            )));
        }
        if !(self.persistence >= 1.0 && self.persistence.is_finite()) {
            return Err(Error::Argument(format!("persistence must be at least 1, got {}", self.persistence)));
        }
        for (name, t) in DETECTOR_NAMES.iter().zip(&self.targets) {
            if !open_unit(t.precision) || !open_unit(t.recall) {
                return Err(Error::Argument(format!(
                    "{name} precision and recall must lie in (0, 1), got ({}, {})",
                    t.precision, t.recall
                )));
            }
        }
        Ok(())
    }

    /// Probability of staying in the help state and in the no-help state.
    pub fn stay_probabilities(&self) -> (f64, f64) {
        let rho = 1.0 - 1.0 / self.persistence;
        let pi = self.prevalence;
        (pi + (1.0 - pi) * rho, (1.0 - pi) + pi * rho)
    }
}

/// Per-detector fire probabilities in the help and no-help states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmissionParams {
    pub help: [f64; N_DETECTORS],
    pub no_help: [f64; N_DETECTORS],
}

/// Precision of a detector firing with probability `r` in help and `q`
/// otherwise, at prevalence `pi`.
pub fn precision_identity(r: f64, q: f64, pi: f64) -> f64 {
    r * pi / (r * pi + q * (1.0 - pi))
}

/// Inverts the precision identity: the help-state fire rate is the recall
/// and the no-help rate is `r * pi * (1 - p) / (p * (1 - pi))`.
pub fn solve_emissions(targets: &[DetectorTarget; N_DETECTORS], prevalence: f64) -> Result<EmissionParams> {
    let open_unit = |x: f64| x > 0.0 && x < 1.0;
    if !open_unit(prevalence) {
        return Err(Error::Argument(format!("prevalence must lie in (0, 1), got {prevalence}")));
    }
    let mut help = [0.0; N_DETECTORS];
    let mut no_help = [0.0; N_DETECTORS];
    for d in 0..N_DETECTORS {
        let DetectorTarget { precision: p, recall: r } = targets[d];
        if !open_unit(p) || !open_unit(r) {
            return Err(Error::Argument(format!(
                "{} precision and recall must lie in (0, 1), got ({p}, {r})",
                DETECTOR_NAMES[d]
            )));
        }
        let q = r * prevalence * (1.0 - p) / (p * (1.0 - prevalence));
        if !open_unit(q) {
            return Err(Error::InfeasibleTarget {
                detector: DETECTOR_NAMES[d].to_owned(),
                rate: q,
            });
        }
        help[d] = r;
        no_help[d] = q;
    }
    Ok(EmissionParams { help, no_help })
}

struct Skeleton {
    states: Vec<bool>,
    times: Vec<f64>,
    kinds: Vec<EventKind>,
}

fn session_id(k: usize, n: usize) -> String {
    let width = n.saturating_sub(1).to_string().len().max(3);
    format!("session_{k:0width$}")
}

fn skeleton(config: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Skeleton {
    let n = config.events_per_session;
    let (stay_help, stay_no_help) = config.stay_probabilities();
    let gaps = Exp::new(1.0 / config.mean_gap_seconds).expect("validated mean gap");
    let kinds = WeightedIndex::new(KIND_COUNTS.iter().map(|(_, c)| *c)).expect("positive weights");
    let mut states = Vec::with_capacity(n);
    let mut times = Vec::with_capacity(n);
    let mut kind_seq = Vec::with_capacity(n);
    let mut state = rng.random_bool(config.prevalence);
    let mut t = 0.0;
    for i in 0..n {
        if i > 0 {
            let stay = if state { stay_help } else { stay_no_help };
            if !rng.random_bool(stay) {
                state = !state;
            }
            t += gaps.sample(rng);
        }
        states.push(state);
        times.push(round_time(t));
        kind_seq.push(KIND_COUNTS[kinds.sample(rng)].0);
    }
    Skeleton {
        states,
        times,
        kinds: kind_seq,
    }
}

fn bernoulli_stream(id: String, sk: &Skeleton, emissions: &EmissionParams, rng: &mut ChaCha8Rng) -> DecisionStream {
    let rows = sk
        .states
        .iter()
        .map(|&y| {
            let rates = if y { &emissions.help } else { &emissions.no_help };
            let v = rates.map(|r| if rng.random_bool(r) { 1.0 } else { 0.0 });
            (DecisionVector::from_array(v).expect("binary values"), y)
        })
        .collect();
    DecisionStream {
        session_id: id,
        times: sk.times.clone(),
        rows,
    }
}

/// Output of [`generate`].
#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    /// Rich sessions with full event payloads.
    pub sessions: Vec<Session>,
    /// Bernoulli decision streams sharing the sessions' labels and times.
    pub streams: Vec<DecisionStream>,
    pub emissions: EmissionParams,
    pub rich: RichCalibration,
}

/// Fire rates the rich sessions were realized with.
///
/// The rule detectors can only fire on events of the matching kind, so a
/// target whose fire rates exceed the share of eligible events is scaled
/// down by a common factor for both states. This keeps its precision and
/// lowers its recall.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RichCalibration {
    pub emissions: EmissionParams,
    pub targets: [DetectorTarget; N_DETECTORS],
    /// Per-detector factor applied to the stream fire rates (1 when feasible).
    pub scale: [f64; N_DETECTORS],
}

/// Generates sessions and decision streams for `config`.
pub fn generate(config: &GeneratorConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let emissions = solve_emissions(&config.targets, config.prevalence)?;
    let n = config.n_sessions;
    let skeletons: Vec<Skeleton> = (0..n)
        .into_par_iter()
        .map(|k| skeleton(config, &mut seed::rng(session_seed(config.seed, "skeleton", k))))
        .collect();
    let streams: Vec<DecisionStream> = skeletons
        .par_iter()
        .enumerate()
        .map(|(k, sk)| {
            let mut rng = seed::rng(session_seed(config.seed, "stream", k));
            bernoulli_stream(session_id(k, n), sk, &emissions, &mut rng)
        })
        .collect();
    let detectors = DetectorConfig::default();
    let categories: Vec<Vec<Category>> = skeletons.par_iter().map(|sk| categorize(sk, &detectors)).collect();
    let plan = RichPlan::solve(&skeletons, &categories, &emissions, config.prevalence);
    let sessions: Vec<Session> = skeletons
        .par_iter()
        .zip(&categories)
        .enumerate()
        .map(|(k, (sk, cats))| {
            let mut rng = seed::rng(session_seed(config.seed, "rich", k));
            realize(session_id(k, n), sk, cats, &plan, &mut rng)
        })
        .collect::<Result<_>>()?;
    Ok(SyntheticCorpus {
        sessions,
        streams,
        emissions,
        rich: plan.calibration,
    })
}

/// Rich sessions only.
pub fn generate_rich_sessions(config: &GeneratorConfig) -> Result<Vec<Session>> {
    generate(config).map(|c| c.sessions)
}

fn session_seed(master: u64, stream: &str, k: usize) -> u64 {
    seed::derive_path(master, &[seed::hash_str(stream), k as u64])
}

/// Gaze category: whether a robot-directed gaze at this position would be
/// confirmatory (`a`) and would dwell long enough for mutual gaze (`b`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Category {
    a: bool,
    b: bool,
}

fn categorize(sk: &Skeleton, detectors: &DetectorConfig) -> Vec<Category> {
    // Tag every gaze as robot-directed and every task as a placement, then
    // read the categories off the detectors themselves. Neither property
    // depends on the other events' payloads.
    let events = sk
        .kinds
        .iter()
        .zip(&sk.times)
        .map(|(&kind, &t)| {
            let payload = match kind {
                EventKind::Gaze => EventPayload::Gaze {
                    direction: detectors.robot_tag.clone(),
                },
                EventKind::Task => EventPayload::Task {
                    cell: String::new(),
                    med: String::new(),
                    action: PlacementAction::Placed,
                },
                _ => EventPayload::UserGesture { moving: false },
            };
            AnnotationEvent::new(t, payload)
        })
        .collect();
    let probe = Session {
        session_id: String::new(),
        task_spec: Vec::new(),
        events,
        labels: sk.states.clone(),
    };
    let m = mutual_gaze_scores(&probe, detectors);
    let c = confirmatory_gaze_scores(&probe, detectors);
    (0..sk.kinds.len())
        .map(|i| Category {
            a: c[i] > 0.0,
            b: m[i] > 0.0,
        })
        .collect()
}

/// Per-state probabilities used to realize the rich payloads.
#[derive(Clone, Copy, Debug, Default)]
struct StatePlan {
    /// Probability that a gaze in category (a, b) is robot-directed,
    /// indexed by `2 * a + b`.
    robot: [f64; 4],
    /// Probability that a user utterance contains a keyword.
    keyword: f64,
    /// Probability that a task action regresses or stalls progress.
    task_fire: f64,
}

struct RichPlan {
    states: [StatePlan; 2],
    calibration: RichCalibration,
}

/// Event counts of one latent state, pooled over all sessions.
#[derive(Default)]
struct StateCounts {
    events: f64,
    gaze: [f64; 4],
    speech: f64,
    task: f64,
}

impl RichPlan {
    fn solve(skeletons: &[Skeleton], categories: &[Vec<Category>], emissions: &EmissionParams, pi: f64) -> Self {
        let mut counts = [StateCounts::default(), StateCounts::default()];
        for (sk, cats) in skeletons.iter().zip(categories) {
            for ((&y, &kind), cat) in sk.states.iter().zip(&sk.kinds).zip(cats) {
                let c = &mut counts[usize::from(y)];
                c.events += 1.0;
                match kind {
                    EventKind::Gaze => c.gaze[2 * usize::from(cat.a) + usize::from(cat.b)] += 1.0,
                    EventKind::UserSpeech => c.speech += 1.0,
                    EventKind::Task => c.task += 1.0,
                    _ => {}
                }
            }
        }
        // Share of events on which each detector can fire at all.
        let caps = |c: &StateCounts| -> [f64; N_DETECTORS] {
            if c.events == 0.0 {
                return [0.0; N_DETECTORS];
            }
            [
                (c.gaze[1] + c.gaze[3]) / c.events,
                (c.gaze[2] + c.gaze[3]) / c.events,
                c.speech / c.events,
                c.task / c.events,
            ]
        };
        let cap = [caps(&counts[0]), caps(&counts[1])];
        let mut scale = [1.0; N_DETECTORS];
        for d in 0..N_DETECTORS {
            for (y, rate) in [(0, emissions.no_help[d]), (1, emissions.help[d])] {
                if counts[y].events > 0.0 {
                    scale[d] = f64::min(scale[d], cap[y][d] / rate);
                }
            }
        }
        let mut states = [StatePlan::default(); 2];
        let mut achieved = [[0.0; N_DETECTORS]; 2];
        for y in 0..2 {
            let c = &counts[y];
            if c.events == 0.0 {
                continue;
            }
            let rates = if y == 1 { &emissions.help } else { &emissions.no_help };
            let want: [f64; N_DETECTORS] = std::array::from_fn(|d| rates[d] * scale[d]);
            let f = c.gaze.map(|g| g / c.events);
            let robot = gaze_tagging(f, want[0], want[1]);
            let ratio = |num: f64, den: f64| if den > 0.0 { (num / den).clamp(0.0, 1.0) } else { 0.0 };
            let plan = StatePlan {
                robot,
                keyword: ratio(want[2] * c.events, c.speech),
                task_fire: ratio(want[3] * c.events, c.task),
            };
            achieved[y] = [
                f[1] * robot[1] + f[3] * robot[3],
                f[2] * robot[2] + f[3] * robot[3],
                plan.keyword * c.speech / c.events,
                plan.task_fire * c.task / c.events,
            ];
            states[y] = plan;
        }
        let targets = std::array::from_fn(|d| {
            DetectorTarget::new(precision_identity(achieved[1][d], achieved[0][d], pi), achieved[1][d])
        });
        RichPlan {
            states,
            calibration: RichCalibration {
                emissions: EmissionParams {
                    help: achieved[1],
                    no_help: achieved[0],
                },
                targets,
                scale,
            },
        }
    }
}

/// Chooses robot-tagging probabilities per gaze category so that mutual and
/// confirmatory gaze fire on fractions `tm` and `tc` of all events. `f` holds
/// the event fraction of each category indexed by `2 * a + b`.
fn gaze_tagging(f: [f64; 4], tm: f64, tc: f64) -> [f64; 4] {
    let (f01, f10, f11) = (f[1], f[2], f[3]);
    // x11 is shared by both detectors; pick it inside the interval that keeps
    // the other two probabilities within [0, 1].
    let x11 = if f11 > 0.0 {
        let lo = [0.0, (tm - f01) / f11, (tc - f10) / f11].into_iter().fold(f64::MIN, f64::max);
        let hi = [1.0, tm / f11, tc / f11].into_iter().fold(f64::MAX, f64::min);
        if lo <= hi {
            0.5 * (lo + hi)
        } else {
            hi.max(0.0)
        }
    } else {
        0.0
    };
    let rest = |t: f64, fx: f64| if fx > 0.0 { ((t - f11 * x11) / fx).clamp(0.0, 1.0) } else { 0.0 };
    // Category (0, 0) gazes never fire either detector; tag a few as robot
    // anyway so the direction alone carries no signal.
    [0.25, rest(tm, f01), rest(tc, f10), x11]
}

const KEYWORD_UTTERANCES: &[&str] = &[
    "can you help me",
    "what goes in this one",
    "which pill is next",
    "where does this go",
    "how many of these",
    "I'm confused",
    "is this right",
    "is that correct",
];

const NEUTRAL_UTTERANCES: &[&str] = &[
    "okay",
    "got it",
    "whatever",
    "that one is done",
    "let me see",
    "hmm",
    "okay next",
    "thanks",
];

const ROBOT_UTTERANCES: &[&str] = &[
    "good job",
    "please continue",
    "the next cell is Tuesday morning",
    "take your time",
    "remember to check the label",
];

const CELLS_DAYS: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];
const CELLS_TIMES: [&str; 4] = ["morning", "noon", "evening", "night"];
const GOAL_MEDS: [&str; 4] = ["metformin", "lisinopril", "atorvastatin", "levothyroxine"];
const WRONG_MEDS: [&str; 2] = ["aspirin", "ibuprofen"];

fn cell_name(k: usize) -> String {
    let c = k % (CELLS_DAYS.len() * CELLS_TIMES.len());
    format!("{}_{}", CELLS_DAYS[c / CELLS_TIMES.len()], CELLS_TIMES[c % CELLS_TIMES.len()])
}

fn task_spec(n_goals: usize) -> Vec<GoalPlacement> {
    let n_cells = CELLS_DAYS.len() * CELLS_TIMES.len();
    (0..n_goals)
        .map(|k| {
            let round = k / n_cells;
            let med = GOAL_MEDS[(k + round) % GOAL_MEDS.len()];
            GoalPlacement {
                cell: cell_name(k),
                med: if round < GOAL_MEDS.len() {
                    med.to_owned()
                } else {
                    format!("{med}_{round}")
                },
            }
        })
        .collect()
}

fn realize(id: String, sk: &Skeleton, cats: &[Category], plan: &RichPlan, rng: &mut ChaCha8Rng) -> Result<Session> {
    let n_task = sk.kinds.iter().filter(|&&k| k == EventKind::Task).count();
    // At least one goal per cell, and never fewer goals than task actions so
    // an unmet goal is always available for a progressing placement.
    let spec = if n_task == 0 { Vec::new() } else { task_spec(n_task.max(28)) };
    let mut placed = vec![false; spec.len()];
    let mut events = Vec::with_capacity(sk.kinds.len());
    for i in 0..sk.kinds.len() {
        let sp = &plan.states[usize::from(sk.states[i])];
        let payload = match sk.kinds[i] {
            EventKind::Gaze => {
                let cat = cats[i];
                let robot = rng.random_bool(sp.robot[2 * usize::from(cat.a) + usize::from(cat.b)]);
                let direction = if robot {
                    "robot"
                } else if rng.random_bool(0.7) {
                    "grid"
                } else {
                    "away"
                };
                EventPayload::Gaze {
                    direction: direction.to_owned(),
                }
            }
            EventKind::UserSpeech => {
                let pool = if rng.random_bool(sp.keyword) {
                    KEYWORD_UTTERANCES
                } else {
                    NEUTRAL_UTTERANCES
                };
                EventPayload::UserSpeech {
                    transcript: (*pool.choose(rng).expect("non-empty pool")).to_owned(),
                }
            }
            EventKind::UserGesture => EventPayload::UserGesture {
                moving: rng.random_bool(0.5),
            },
            EventKind::RobotSpeech => EventPayload::RobotSpeech {
                utterance: (*ROBOT_UTTERANCES.choose(rng).expect("non-empty pool")).to_owned(),
            },
            EventKind::Task => task_action(&spec, &mut placed, rng.random_bool(sp.task_fire), rng),
        };
        events.push(AnnotationEvent::new(sk.times[i], payload));
    }
    Session::new(id, spec, events, sk.states.clone())
}

/// A firing action either removes a correctly placed pill (regression) or
/// puts a pill where no goal asks for it (stall); a quiet action places a
/// pill for an unmet goal.
fn task_action(spec: &[GoalPlacement], placed: &mut [bool], fire: bool, rng: &mut ChaCha8Rng) -> EventPayload {
    let pick = |want: bool, rng: &mut ChaCha8Rng| -> Option<usize> {
        let candidates: Vec<usize> = (0..placed.len()).filter(|&g| placed[g] == want).collect();
        candidates.choose(rng).copied()
    };
    if fire {
        if rng.random_bool(0.5) {
            if let Some(g) = pick(true, rng) {
                placed[g] = false;
                return EventPayload::Task {
                    cell: spec[g].cell.clone(),
                    med: spec[g].med.clone(),
                    action: PlacementAction::Removed,
                };
            }
        }
        return EventPayload::Task {
            cell: cell_name(rng.random_range(0..28)),
            med: (*WRONG_MEDS.choose(rng).expect("non-empty pool")).to_owned(),
            action: PlacementAction::Placed,
        };
    }
    let g = pick(false, rng).expect("more goals than task actions");
    placed[g] = true;
    EventPayload::Task {
        cell: spec[g].cell.clone(),
        med: spec[g].med.clone(),
        action: PlacementAction::Placed,
    }
}
