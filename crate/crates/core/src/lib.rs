//! Offline analysis of gaze-typing sessions recorded alongside consumer EEG.
//!
//! The pipeline turns a session bundle (EEG samples, keyboard event markers,
//! optional gaze samples) into:
//!
//! * a per-window cognitive-load series: the beta-band spectral power ratio
//!   of a short-time Fourier transform, averaged over channels
//!   ([`spectral`]),
//! * typing-mode and session-phase labels for every window
//!   ([`segmentation`]),
//! * conventional text-entry metrics such as wpm, keystrokes saved and
//!   backspace usage ([`metrics`]),
//! * boxplot summaries, one-way ANOVA and two-sample t-tests ([`stats`]).
//!
//! [`simgen`] produces deterministic synthetic sessions with a known band
//! composition so that every stage can be checked end to end, and
//! [`report`] assembles the machine-readable report used by the CLI.
//!
//! ```text
//! bundle dir ── ingest ──► SessionRecord ──┬─► spectral ──► LoadSeries ─┐
//!                                          ├─► segmentation ────────────┼─► report
//!                                          └─► metrics ─────────────────┘
//! ```

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ingest;
pub mod metrics;
pub mod model;
pub mod par;
pub mod report;
pub mod segmentation;
pub mod simgen;
pub mod spectral;
pub mod stats;

pub use model::{
    EegRecording, Event, EventKind, EventLog, GazeSample, KeyClass, Keyboard, SessionMeta,
    SessionRecord,
};
pub use par::Execution;
pub use spectral::{AnalysisConfig, Band, LoadSeries, WindowFn};
