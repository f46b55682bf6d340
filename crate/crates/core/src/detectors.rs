//! Rule-based assistance detectors and the per-event decision streams they
//! produce.
//!
//! Each detector maps a session to one score in `[0, 1]` per event. The
//! rules are deliberately simple and replaceable: any source of per-event
//! scores can be fed to the fusion pipeline through the decisions CSV.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{EventPayload, PlacementAction, Session};

/// Number of detectors feeding the fusion model.
pub const N_DETECTORS: usize = 4;

/// Detector names in feature order.
pub const DETECTOR_NAMES: [&str; N_DETECTORS] = ["m_gaze", "c_gaze", "lexical", "task"];

/// Header of the decisions CSV.
pub const DECISIONS_HEADER: [&str; 8] = [
    "session_id",
    "event_index",
    "t_seconds",
    "m_gaze",
    "c_gaze",
    "lexical",
    "task",
    "help",
];

/// The four detector outputs for one event.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecisionVector {
    pub m_gaze: f64,
    pub c_gaze: f64,
    pub lexical: f64,
    pub task: f64,
}

impl DecisionVector {
    pub const ZERO: DecisionVector = DecisionVector {
        m_gaze: 0.0,
        c_gaze: 0.0,
        lexical: 0.0,
        task: 0.0,
    };

    pub fn new(m_gaze: f64, c_gaze: f64, lexical: f64, task: f64) -> Result<Self> {
        Self::from_array([m_gaze, c_gaze, lexical, task])
    }

    pub fn from_array(values: [f64; N_DETECTORS]) -> Result<Self> {
        for (name, v) in DETECTOR_NAMES.iter().zip(values) {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!(
                    "detector `{name}` value {v} outside [0, 1]"
                )));
            }
        }
        let [m_gaze, c_gaze, lexical, task] = values;
        Ok(Self {
            m_gaze,
            c_gaze,
            lexical,
            task,
        })
    }

    pub fn to_array(self) -> [f64; N_DETECTORS] {
        [self.m_gaze, self.c_gaze, self.lexical, self.task]
    }

    pub fn get(&self, detector: usize) -> f64 {
        self.to_array()[detector]
    }
}

/// Per-session stream of decision vectors paired with help labels.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionStream {
    pub session_id: String,
    /// Event timestamps, carried for the CSV; not used by fusion.
    pub times: Vec<f64>,
    pub rows: Vec<(DecisionVector, bool)>,
}

impl DecisionStream {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn targets(&self) -> impl Iterator<Item = bool> + '_ {
        self.rows.iter().map(|&(_, y)| y)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Minimum dwell, in seconds, for a robot-directed gaze to count as mutual gaze.
    pub mutual_gaze_min_duration: f64,
    /// Seconds after a task action during which a robot-directed gaze is confirmatory.
    pub confirm_window: f64,
    /// Gaze direction tag meaning "looking at the robot".
    pub robot_tag: String,
    pub keywords: BTreeSet<String>,
    /// Task score when a task action leaves the remaining step count unchanged.
    pub stall_score: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            mutual_gaze_min_duration: 1.0,
            confirm_window: 2.0,
            robot_tag: "robot".to_owned(),
            keywords: [
                "help", "what", "which", "where", "how", "confused", "right", "correct",
            ]
            .into_iter()
            .map(str::to_owned)
            .collect(),
            stall_score: 0.5,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mutual_gaze_min_duration > 0.0) || !(self.confirm_window > 0.0) {
            return Err(Error::Argument(
                "detector durations must be positive".to_owned(),
            ));
        }
        if self.keywords.is_empty() {
            return Err(Error::Argument("keyword list is empty".to_owned()));
        }
        if !(0.0..=1.0).contains(&self.stall_score) {
            return Err(Error::Argument(format!(
                "stall_score {} outside [0, 1]",
                self.stall_score
            )));
        }
        Ok(())
    }
}

/// Robot-directed gazes that dwell at least `mutual_gaze_min_duration`
/// seconds score 1. Dwell runs to the next gaze event, or to the last
/// event of the session for the final gaze.
pub fn mutual_gaze_scores(session: &Session, config: &DetectorConfig) -> Vec<f64> {
    let events = &session.events;
    let end = session.end_time();
    let mut scores = vec![0.0; events.len()];
    let mut next_gaze_t = end;
    for (i, event) in events.iter().enumerate().rev() {
        if let EventPayload::Gaze { direction } = &event.payload {
            let dwell = next_gaze_t - event.t;
            if *direction == config.robot_tag && dwell >= config.mutual_gaze_min_duration {
                scores[i] = 1.0;
            }
            next_gaze_t = event.t;
        }
    }
    scores
}

/// Robot-directed gazes within `confirm_window` seconds after a task action
/// score 1.
pub fn confirmatory_gaze_scores(session: &Session, config: &DetectorConfig) -> Vec<f64> {
    let mut last_task_t: Option<f64> = None;
    session
        .events
        .iter()
        .map(|event| match &event.payload {
            EventPayload::Task { .. } => {
                last_task_t = Some(event.t);
                0.0
            }
            EventPayload::Gaze { direction } if *direction == config.robot_tag => {
                match last_task_t {
                    Some(t0) if event.t - t0 <= config.confirm_window => 1.0,
                    _ => 0.0,
                }
            }
            _ => 0.0,
        })
        .collect()
}

fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .filter(|w| !w.is_empty())
}

/// True if the lowercased `transcript` contains any keyword as a whole word.
pub fn contains_keyword(transcript: &str, keywords: &BTreeSet<String>) -> bool {
    let lower = transcript.to_lowercase();
    let found = words(&lower).any(|w| keywords.contains(w));
    found
}

/// User utterances containing a configured keyword score 1.
pub fn lexical_scores(session: &Session, config: &DetectorConfig) -> Vec<f64> {
    session
        .events
        .iter()
        .map(|event| match &event.payload {
            EventPayload::UserSpeech { transcript } if contains_keyword(transcript, &config.keywords) => 1.0,
            _ => 0.0,
        })
        .collect()
}

/// Tracks how many goal placements of a task specification remain unmet.
#[derive(Clone, Debug)]
pub struct TaskProgress {
    /// Pill count per goal placement; placements outside the goal set are
    /// never counted.
    counts: BTreeMap<(String, String), u32>,
    remaining: usize,
}

impl TaskProgress {
    pub fn new(session: &Session) -> Self {
        let counts: BTreeMap<_, _> = session
            .task_spec
            .iter()
            .map(|g| ((g.cell.clone(), g.med.clone()), 0))
            .collect();
        let remaining = counts.len();
        Self { counts, remaining }
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }

    /// True if placing `med` into `cell` would satisfy an unmet goal.
    pub fn is_unmet_goal(&self, cell: &str, med: &str) -> bool {
        self.counts
            .get(&(cell.to_owned(), med.to_owned()))
            .is_some_and(|&c| c == 0)
    }

    /// Applies one placement or removal and returns the new remaining count.
    pub fn apply(&mut self, cell: &str, med: &str, action: PlacementAction) -> usize {
        if let Some(count) = self.counts.get_mut(&(cell.to_owned(), med.to_owned())) {
            match action {
                PlacementAction::Placed => {
                    if *count == 0 {
                        self.remaining -= 1;
                    }
                    *count += 1;
                }
                PlacementAction::Removed => {
                    if *count == 1 {
                        self.remaining += 1;
                    }
                    *count = count.saturating_sub(1);
                }
            }
        }
        self.remaining
    }
}

/// Task actions score by how they change the number of unmet goals:
/// progress 0, no change `stall_score`, regression 1.
pub fn task_scores(session: &Session, config: &DetectorConfig) -> Vec<f64> {
    let mut progress = TaskProgress::new(session);
    session
        .events
        .iter()
        .map(|event| match &event.payload {
            EventPayload::Task { cell, med, action } => {
                let before = progress.remaining();
                let after = progress.apply(cell, med, *action);
                match after.cmp(&before) {
                    std::cmp::Ordering::Less => 0.0,
                    std::cmp::Ordering::Equal => config.stall_score,
                    std::cmp::Ordering::Greater => 1.0,
                }
            }
            _ => 0.0,
        })
        .collect()
}

/// Runs the four detectors and pairs each event's decision vector with its label.
pub fn run_all_detectors(session: &Session, config: &DetectorConfig) -> Vec<(DecisionVector, bool)> {
    let m = mutual_gaze_scores(session, config);
    let c = confirmatory_gaze_scores(session, config);
    let l = lexical_scores(session, config);
    let k = task_scores(session, config);
    (0..session.len())
        .map(|i| {
            (
                DecisionVector {
                    m_gaze: m[i],
                    c_gaze: c[i],
                    lexical: l[i],
                    task: k[i],
                },
                session.labels[i],
            )
        })
        .collect()
}

pub fn detect_stream(session: &Session, config: &DetectorConfig) -> DecisionStream {
    DecisionStream {
        session_id: session.session_id.clone(),
        times: session.events.iter().map(|e| e.t).collect(),
        rows: run_all_detectors(session, config),
    }
}

pub fn write_decisions<W: Write>(streams: &[DecisionStream], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Validation(format!("writing decisions CSV: {e}"));
    w.write_record(DECISIONS_HEADER).map_err(csv_err)?;
    for stream in streams {
        for (i, (v, help)) in stream.rows.iter().enumerate() {
            let t = stream.times.get(i).copied().unwrap_or(0.0);
            w.write_record([
                stream.session_id.clone(),
                i.to_string(),
                format!("{t:.6}"),
                format!("{:.6}", v.m_gaze),
                format!("{:.6}", v.c_gaze),
                format!("{:.6}", v.lexical),
                format!("{:.6}", v.task),
                u8::from(*help).to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()
        .map_err(|e| Error::Validation(format!("writing decisions CSV: {e}")))
}

pub fn save_decisions(streams: &[DecisionStream], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_decisions(streams, std::io::BufWriter::new(file))
}

/// Parses a decisions CSV. `source` names the input in error messages.
pub fn read_decisions<R: Read>(input: R, source: &Path) -> Result<Vec<DecisionStream>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = rdr
        .headers()
        .map_err(|e| Error::format(source, "<header>", e.to_string()))?
        .clone();
    if header.iter().ne(DECISIONS_HEADER.iter().copied()) {
        return Err(Error::format(
            source,
            "<header>",
            format!("expected `{}`", DECISIONS_HEADER.join(",")),
        ));
    }
    let mut streams: Vec<DecisionStream> = Vec::new();
    let mut seen = BTreeSet::new();
    for (row_no, record) in rdr.records().enumerate() {
        // 1-based data row number, header excluded.
        let row = row_no + 1;
        let record = record.map_err(|e| Error::format(source, format!("row {row}"), e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let parse_f = |i: usize| -> Result<f64> {
            field(i).trim().parse::<f64>().map_err(|e| {
                Error::format(source, format!("row {row}, {}", DECISIONS_HEADER[i]), e.to_string())
            })
        };
        let session_id = field(0).to_owned();
        let event_index: usize = field(1).trim().parse().map_err(|e: std::num::ParseIntError| {
            Error::format(source, format!("row {row}, event_index"), e.to_string())
        })?;
        let t = parse_f(2)?;
        let mut values = [0.0; N_DETECTORS];
        for (d, v) in values.iter_mut().enumerate() {
            *v = parse_f(3 + d)?;
            if !(0.0..=1.0).contains(v) {
                return Err(Error::Validation(format!(
                    "{}: row {row}: {} value {v} outside [0, 1]",
                    source.display(),
                    DETECTOR_NAMES[d]
                )));
            }
        }
        let help = match field(7).trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Validation(format!(
                    "{}: row {row}: help must be 0 or 1, got `{other}`",
                    source.display()
                )))
            }
        };
        let start_new = streams.last().is_none_or(|s| s.session_id != session_id);
        if start_new {
            if !seen.insert(session_id.clone()) {
                return Err(Error::Validation(format!(
                    "{}: row {row}: rows of session `{session_id}` are not contiguous",
                    source.display()
                )));
            }
            streams.push(DecisionStream {
                session_id: session_id.clone(),
                times: Vec::new(),
                rows: Vec::new(),
            });
        }
        let stream = streams.last_mut().expect("stream pushed above");
        if event_index != stream.rows.len() {
            return Err(Error::Validation(format!(
                "{}: row {row}: session `{session_id}` expected event_index {}, got {event_index}",
                source.display(),
                stream.rows.len()
            )));
        }
        stream.times.push(t);
        stream.rows.push((DecisionVector::from_array(values)?, help));
    }
    Ok(streams)
}

pub fn load_decisions(path: impl AsRef<Path>) -> Result<Vec<DecisionStream>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_decisions(std::io::BufReader::new(file), path)
}
