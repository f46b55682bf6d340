//! Detecting when a user needs assistance by late fusion of independent
//! per-event detectors.
//!
//! The pipeline runs four rule-based detectors over annotated interaction
//! sessions, expands each per-event decision vector with its predecessors
//! (sliding window), and trains classical learners on the windowed vectors
//! under a repeated, balanced, k-fold cross-validation harness.
//!
//! - [`events`]: sessions, annotation events and their JSON format
//! - [`detectors`]: the four detectors and the decisions CSV
//! - [`windowing`]: sliding-window feature construction
//! - [`learners`]: SVM (RBF), logistic regression, decision tree, Gaussian
//!   naive Bayes, random forest and a random baseline
//! - [`metrics`]: confusion matrices, F1, ROC/PR curves and AUC
//! - [`harness`]: shuffling, balanced folds and the full sweep
//! - [`synthgen`]: calibrated synthetic sessions and decision streams
//! - [`report`]: tables and SVG charts from sweep results

pub mod detectors;
pub mod error;
pub mod events;
pub mod harness;
pub mod learners;
pub mod metrics;
pub mod report;
pub mod seed;
pub mod synthgen;
pub mod windowing;

pub use detectors::{DecisionStream, DecisionVector, DetectorConfig};
pub use error::{Error, Result};
pub use events::{AnnotationEvent, EventKind, EventPayload, Session};
pub use harness::{ExperimentConfig, ExperimentRecord, SweepReport};
pub use learners::{Algorithm, LearnerParams, Model, TrainSet};
pub use metrics::{ConfusionMatrix, CurveKind, CurvePoint};
pub use synthgen::GeneratorConfig;
pub use windowing::WindowedInstance;
