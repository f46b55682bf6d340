//! Interaction sessions: timestamped annotation events with per-event help
//! labels, and their JSON file format.
//!
//! A session file holds either a single session object or an array of them:
//!
//! ```json
//! {"session_id": "s01",
//!  "task_spec": [{"cell": "mon-am", "med": "aspirin"}],
//!  "events": [{"t": 0.0, "kind": "gaze", "direction": "robot"},
//!             {"t": 1.5, "kind": "task", "cell": "mon-am", "med": "aspirin", "action": "placed"}],
//!  "labels": [0, 1]}
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Timestamps are stored with this many decimals.
pub const TIME_DECIMALS: i32 = 6;

/// Rounds a timestamp to the declared storage precision.
pub fn round_time(t: f64) -> f64 {
    let scale = 10f64.powi(TIME_DECIMALS);
    (t * scale).round() / scale
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementAction {
    Placed,
    Removed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    Gaze,
    UserSpeech,
    UserGesture,
    RobotSpeech,
    Task,
}

impl EventKind {
    pub const ALL: [EventKind; 5] = [
        EventKind::Gaze,
        EventKind::UserSpeech,
        EventKind::UserGesture,
        EventKind::RobotSpeech,
        EventKind::Task,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Gaze => "gaze",
            EventKind::UserSpeech => "user_speech",
            EventKind::UserGesture => "user_gesture",
            EventKind::RobotSpeech => "robot_speech",
            EventKind::Task => "task",
        }
    }
}

/// Kind-specific event content. The serialized `kind` tag selects the variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventPayload {
    /// Free-form direction tag such as `"robot"`, `"grid"` or `"away"`.
    Gaze { direction: String },
    UserSpeech { transcript: String },
    /// `moving` is true while the user's hands are in motion.
    UserGesture { moving: bool },
    RobotSpeech { utterance: String },
    Task {
        cell: String,
        med: String,
        action: PlacementAction,
    },
}

impl EventPayload {
    pub fn kind(&self) -> EventKind {
        match self {
            EventPayload::Gaze { .. } => EventKind::Gaze,
            EventPayload::UserSpeech { .. } => EventKind::UserSpeech,
            EventPayload::UserGesture { .. } => EventKind::UserGesture,
            EventPayload::RobotSpeech { .. } => EventKind::RobotSpeech,
            EventPayload::Task { .. } => EventKind::Task,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationEvent {
    /// Seconds from session start.
    #[serde(serialize_with = "serialize_time")]
    pub t: f64,
    #[serde(flatten)]
    pub payload: EventPayload,
}

impl AnnotationEvent {
    pub fn new(t: f64, payload: EventPayload) -> Self {
        Self { t, payload }
    }

    pub fn kind(&self) -> EventKind {
        self.payload.kind()
    }
}

fn serialize_time<S: Serializer>(t: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(round_time(*t))
}

/// One goal placement of the pill-sorting task.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GoalPlacement {
    pub cell: String,
    pub med: String,
}

/// Help label for one event. Labels are stored in event order, so the event
/// index is implicit in the file format.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HelpLabel {
    pub event_index: usize,
    pub needs_help: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    #[serde(default)]
    pub task_spec: Vec<GoalPlacement>,
    pub events: Vec<AnnotationEvent>,
    #[serde(
        serialize_with = "serialize_labels",
        deserialize_with = "deserialize_labels"
    )]
    pub labels: Vec<bool>,
}

fn serialize_labels<S: Serializer>(labels: &[bool], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(labels.iter().map(|&b| u8::from(b)))
}

fn deserialize_labels<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<bool>, D::Error> {
    let raw = Vec::<u8>::deserialize(d)?;
    raw.into_iter()
        .map(|v| match v {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!(
                "label must be 0 or 1, got {other}"
            ))),
        })
        .collect()
}

impl Session {
    /// Builds a session and checks its invariants.
    pub fn new(
        session_id: impl Into<String>,
        task_spec: Vec<GoalPlacement>,
        events: Vec<AnnotationEvent>,
        labels: Vec<bool>,
    ) -> Result<Self> {
        let session = Self {
            session_id: session_id.into(),
            task_spec,
            events,
            labels,
        };
        session.validate()?;
        Ok(session)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn help_labels(&self) -> impl Iterator<Item = HelpLabel> + '_ {
        self.labels
            .iter()
            .enumerate()
            .map(|(event_index, &needs_help)| HelpLabel {
                event_index,
                needs_help,
            })
    }

    /// Time of the last event, or 0 for an empty session.
    pub fn end_time(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.t)
    }

    pub fn validate(&self) -> Result<()> {
        let id = &self.session_id;
        if self.labels.len() != self.events.len() {
            return Err(Error::Validation(format!(
                "session `{id}`: {} labels for {} events",
                self.labels.len(),
                self.events.len()
            )));
        }
        let mut prev = 0.0f64;
        for (i, event) in self.events.iter().enumerate() {
            if !event.t.is_finite() || event.t < 0.0 {
                return Err(Error::Validation(format!(
                    "session `{id}`: event {i} has invalid timestamp {}",
                    event.t
                )));
            }
            if event.t < prev {
                return Err(Error::Validation(format!(
                    "session `{id}`: event {i} at t={} precedes previous event at t={prev}",
                    event.t
                )));
            }
            prev = event.t;
        }
        if self.task_spec.is_empty() && self.events.iter().any(|e| e.kind() == EventKind::Task) {
            return Err(Error::Validation(format!(
                "session `{id}`: task events present but task_spec is empty"
            )));
        }
        Ok(())
    }
}

fn parse_sessions(path: &Path, text: &str) -> Result<Vec<Session>> {
    // Parse once as a generic value so a failure can be reported for the
    // specific session and field that is wrong.
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::format(path, "<json>", e.to_string()))?;
    let items = match value {
        serde_json::Value::Array(items) => items,
        other => vec![other],
    };
    let mut sessions = Vec::with_capacity(items.len());
    for (i, item) in items.into_iter().enumerate() {
        let session: Session = serde_json::from_value(item)
            .map_err(|e| Error::format(path, field_from_error(&e, i), e.to_string()))?;
        sessions.push(session);
    }
    Ok(sessions)
}

fn field_from_error(e: &serde_json::Error, index: usize) -> String {
    let msg = e.to_string();
    // serde reports missing/unknown fields with the name in backticks.
    let field = msg
        .split('`')
        .nth(1)
        .map(str::to_owned)
        .unwrap_or_else(|| "<session>".to_owned());
    format!("sessions[{index}].{field}")
}

fn session_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let p = entry.path();
        if p.is_file() && p.extension().is_some_and(|ext| ext == "json") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads sessions from a session file or a directory of session files.
///
/// Sessions are validated and returned sorted by `session_id`.
pub fn load_sessions(path: impl AsRef<Path>) -> Result<Vec<Session>> {
    let path = path.as_ref();
    let files = if path.is_dir() {
        session_files(path)?
    } else {
        vec![path.to_path_buf()]
    };
    let mut sessions = Vec::new();
    for file in files {
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        for session in parse_sessions(&file, &text)? {
            session.validate().map_err(|e| match e {
                Error::Validation(msg) => Error::Validation(format!("{}: {msg}", file.display())),
                other => other,
            })?;
            sessions.push(session);
        }
    }
    sessions.sort_by(|a, b| a.session_id.cmp(&b.session_id));
    for pair in sessions.windows(2) {
        if pair[0].session_id == pair[1].session_id {
            return Err(Error::Validation(format!(
                "duplicate session_id `{}`",
                pair[0].session_id
            )));
        }
    }
    Ok(sessions)
}

/// Writes sessions as a JSON array container file.
pub fn save_sessions(sessions: &[Session], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    for s in sessions {
        s.validate()?;
    }
    let text = serde_json::to_string_pretty(sessions)
        .map_err(|e| Error::format(path, "<json>", e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
