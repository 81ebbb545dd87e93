//! Shared domain types, transcription reconstruction and session validation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sampling rate of the 14-channel consumer headset, in Hz.
pub const DEFAULT_FS: f64 = 128.0;

/// Electrode labels of the 14-channel EPOC montage, in recording order.
pub const DEFAULT_CHANNELS: [&str; 14] = [
    "AF3", "F7", "F3", "FC5", "T7", "P7", "O1", "O2", "P8", "T8", "FC6", "F4", "F8", "AF4",
];

/// Allowed distance (seconds) between an event and the EEG span.
pub const DEFAULT_EVENT_SLACK: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("sentence {index} does not exist (log has {available})")]
    MissingSentence { index: usize, available: usize },
    #[error("unknown keyboard {0:?} (expected A, B or C)")]
    UnknownKeyboard(String),
    #[error("unknown key class {0:?} (expected INSERT, BKSP or SUGG)")]
    UnknownKeyClass(String),
}

/// Keyboard layout variant under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Keyboard {
    A,
    B,
    C,
}

impl Keyboard {
    pub const ALL: [Keyboard; 3] = [Keyboard::A, Keyboard::B, Keyboard::C];

    pub fn as_str(self) -> &'static str {
        match self {
            Keyboard::A => "A",
            Keyboard::B => "B",
            Keyboard::C => "C",
        }
    }
}

impl fmt::Display for Keyboard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Keyboard {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" => Ok(Keyboard::A),
            "B" => Ok(Keyboard::B),
            "C" => Ok(Keyboard::C),
            other => Err(ModelError::UnknownKeyboard(other.to_string())),
        }
    }
}

/// Keystroke classes, which double as typing modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum KeyClass {
    /// A single letter.
    Insert,
    /// A word suggestion.
    Sugg,
    /// Backspace.
    Bksp,
}

impl KeyClass {
    pub const ALL: [KeyClass; 3] = [KeyClass::Insert, KeyClass::Sugg, KeyClass::Bksp];

    pub fn as_str(self) -> &'static str {
        match self {
            KeyClass::Insert => "INSERT",
            KeyClass::Sugg => "SUGG",
            KeyClass::Bksp => "BKSP",
        }
    }
}

impl fmt::Display for KeyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KeyClass {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "INSERT" => Ok(KeyClass::Insert),
            "SUGG" => Ok(KeyClass::Sugg),
            "BKSP" => Ok(KeyClass::Bksp),
            other => Err(ModelError::UnknownKeyClass(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionMeta {
    pub participant_id: String,
    pub keyboard: Keyboard,
    /// 0 is the training session.
    pub session_index: u32,
    pub fs_eeg: f64,
    pub channel_names: Vec<String>,
}

impl SessionMeta {
    /// Metadata with the default 128 Hz rate and EPOC channel set.
    pub fn new(participant_id: impl Into<String>, keyboard: Keyboard, session_index: u32) -> Self {
        SessionMeta {
            participant_id: participant_id.into(),
            keyboard,
            session_index,
            fs_eeg: DEFAULT_FS,
            channel_names: DEFAULT_CHANNELS.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn is_training(&self) -> bool {
        self.session_index == 0
    }

    /// Problems with the metadata itself; empty when usable.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.fs_eeg.is_finite() && self.fs_eeg > 0.0) {
            out.push(format!("fs_eeg must be positive, got {}", self.fs_eeg));
        }
        if self.channel_names.is_empty() {
            out.push("channel list is empty".to_string());
        }
        for (i, name) in self.channel_names.iter().enumerate() {
            if self.channel_names[..i].contains(name) {
                out.push(format!("duplicate channel name {name:?}"));
            }
        }
        out
    }
}

/// Channel-major EEG samples in microvolts. Sample `i` was taken at
/// `t0 + i / fs`.
#[derive(Debug, Clone, PartialEq)]
pub struct EegRecording {
    pub t0: f64,
    pub fs: f64,
    pub channels: Vec<Vec<f64>>,
}

impl EegRecording {
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn n_samples(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn time_of(&self, sample: usize) -> f64 {
        self.t0 + sample as f64 / self.fs
    }

    /// End of the covered span (one sample period past the last sample).
    pub fn end_time(&self) -> f64 {
        self.time_of(self.n_samples())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    SessionStart,
    SentenceShown(String),
    Key { class: KeyClass, produced: String },
    SentenceSubmit(String),
    SessionEnd,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::SessionStart => "SESSION_START",
            EventKind::SentenceShown(_) => "SENTENCE_SHOWN",
            EventKind::Key { .. } => "KEY",
            EventKind::SentenceSubmit(_) => "SENTENCE_SUBMIT",
            EventKind::SessionEnd => "SESSION_END",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// Seconds on the clock shared with the EEG stream.
    pub t: f64,
    pub kind: EventKind,
}

impl Event {
    pub fn new(t: f64, kind: EventKind) -> Self {
        Event { t, kind }
    }

    pub fn key(t: f64, class: KeyClass, produced: impl Into<String>) -> Self {
        Event::new(
            t,
            EventKind::Key {
                class,
                produced: produced.into(),
            },
        )
    }
}

/// One sentence of the log: a SHOWN marker, its keystrokes and (normally)
/// its SUBMIT marker.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceSpan {
    /// 0-based position among the sentences of the log.
    pub ordinal: usize,
    pub shown_index: usize,
    pub shown_t: f64,
    pub prompt: String,
    pub submit_index: Option<usize>,
    pub submit_t: Option<f64>,
    pub submitted: Option<String>,
    /// Event indices of the KEY events, in log order.
    pub keys: Vec<usize>,
}

impl SentenceSpan {
    /// Time of the last keystroke, or of SHOWN when there are none.
    pub fn last_key_t(&self, log: &EventLog) -> f64 {
        self.keys.last().map_or(self.shown_t, |&i| log.events[i].t)
    }

    pub fn key_events<'a>(&'a self, log: &'a EventLog) -> impl Iterator<Item = (f64, KeyClass, &'a str)> + 'a {
        self.keys.iter().filter_map(move |&i| match &log.events[i].kind {
            EventKind::Key { class, produced } => Some((log.events[i].t, *class, produced.as_str())),
            _ => None,
        })
    }
}

/// Ordered experiment events.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    pub events: Vec<Event>,
}

impl EventLog {
    pub fn new(events: Vec<Event>) -> Self {
        EventLog { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn start_time(&self) -> Option<f64> {
        self.events.iter().find(|e| e.kind == EventKind::SessionStart).map(|e| e.t)
    }

    /// Sentences in log order. Pairing is lenient: a SHOWN while another
    /// sentence is open starts a new sentence, a stray SUBMIT is ignored and
    /// keystrokes outside any sentence are skipped. Use
    /// [`EventLog::structure_violations`] to detect those cases.
    pub fn sentences(&self) -> Vec<SentenceSpan> {
        let mut out: Vec<SentenceSpan> = Vec::new();
        let mut open = false;
        for (i, ev) in self.events.iter().enumerate() {
            match &ev.kind {
                EventKind::SentenceShown(text) => {
                    out.push(SentenceSpan {
                        ordinal: out.len(),
                        shown_index: i,
                        shown_t: ev.t,
                        prompt: text.clone(),
                        submit_index: None,
                        submit_t: None,
                        submitted: None,
                        keys: Vec::new(),
                    });
                    open = true;
                }
                EventKind::SentenceSubmit(text) if open => {
                    let s = out.last_mut().expect("open sentence");
                    s.submit_index = Some(i);
                    s.submit_t = Some(ev.t);
                    s.submitted = Some(text.clone());
                    open = false;
                }
                EventKind::Key { .. } if open => {
                    out.last_mut().expect("open sentence").keys.push(i);
                }
                _ => {}
            }
        }
        out
    }

    /// Timestamp and marker-structure problems. Empty for a well-formed log.
    pub fn structure_violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.events.is_empty() {
            out.push(Violation::MarkerOrder {
                index: 0,
                detail: "event log is empty".into(),
            });
            return out;
        }
        for i in 1..self.events.len() {
            let (prev, t) = (self.events[i - 1].t, self.events[i].t);
            if !(t >= prev) {
                out.push(Violation::NonMonotonicTime { index: i, t, prev });
            }
        }
        let last = self.events.len() - 1;
        let mut open = false;
        for (i, ev) in self.events.iter().enumerate() {
            let order = |detail: &str| Violation::MarkerOrder {
                index: i,
                detail: detail.to_string(),
            };
            match &ev.kind {
                EventKind::SessionStart if i != 0 => out.push(order("SESSION_START must be the first event")),
                EventKind::SessionEnd if i != last => out.push(order("SESSION_END must be the last event")),
                EventKind::SessionEnd if open => out.push(order("SESSION_END inside an unsubmitted sentence")),
                EventKind::SentenceShown(_) => {
                    if open {
                        out.push(order("SENTENCE_SHOWN before the previous sentence was submitted"));
                    }
                    open = true;
                }
                EventKind::SentenceSubmit(_) => {
                    if !open {
                        out.push(order("SENTENCE_SUBMIT without a preceding SENTENCE_SHOWN"));
                    }
                    open = false;
                }
                EventKind::Key { .. } if !open => out.push(Violation::KeyOutsideSentence { index: i }),
                _ => {}
            }
        }
        if self.events[0].kind != EventKind::SessionStart {
            out.push(Violation::MarkerOrder {
                index: 0,
                detail: "log does not begin with SESSION_START".into(),
            });
        }
        if self.events[last].kind != EventKind::SessionEnd {
            out.push(Violation::MarkerOrder {
                index: last,
                detail: "log does not end with SESSION_END".into(),
            });
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GazeSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub meta: SessionMeta,
    pub eeg: EegRecording,
    pub events: EventLog,
    pub gaze: Option<Vec<GazeSample>>,
}

/// Result of replaying the keystrokes of one sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcription {
    pub text: String,
    /// Event indices of backspaces that hit an empty buffer.
    pub empty_backspaces: Vec<usize>,
}

impl Transcription {
    /// |T|, counted in Unicode scalar values.
    pub fn len_chars(&self) -> usize {
        self.text.chars().count()
    }
}

/// Replays the keystrokes of one sentence into an empty buffer.
///
/// INSERT and SUGG append their `produced` text; BKSP removes exactly one
/// trailing character, whatever produced it.
pub fn reconstruct_transcription(events: &EventLog, sentence_index: usize) -> Result<Transcription, ModelError> {
    let sentences = events.sentences();
    let span = sentences.get(sentence_index).ok_or(ModelError::MissingSentence {
        index: sentence_index,
        available: sentences.len(),
    })?;
    Ok(replay(events, span))
}

pub(crate) fn replay(events: &EventLog, span: &SentenceSpan) -> Transcription {
    let mut text = String::new();
    let mut empty_backspaces = Vec::new();
    for &i in &span.keys {
        if let EventKind::Key { class, produced } = &events.events[i].kind {
            match class {
                KeyClass::Insert | KeyClass::Sugg => text.push_str(produced),
                KeyClass::Bksp => {
                    if text.pop().is_none() {
                        empty_backspaces.push(i);
                    }
                }
            }
        }
    }
    Transcription { text, empty_backspaces }
}

/// A reason a record cannot be analyzed as-is.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NonMonotonicTime { index: usize, t: f64, prev: f64 },
    MarkerOrder { index: usize, detail: String },
    KeyOutsideSentence { index: usize },
    TranscriptionMismatch { sentence: usize, submitted: String, reconstructed: String },
    EventOutsideEeg { index: usize, t: f64 },
    BadMeta { detail: String },
    ChannelCountMismatch { expected: usize, found: usize },
    RateMismatch { meta: f64, eeg: f64 },
    RaggedChannels { channel: usize, len: usize, expected: usize },
    GazeNonMonotonic { index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonMonotonicTime { index, t, prev } => {
                write!(f, "event {index}: timestamp {t} precedes {prev}")
            }
            Violation::MarkerOrder { index, detail } => write!(f, "event {index}: {detail}"),
            Violation::KeyOutsideSentence { index } => {
                write!(f, "event {index}: KEY outside a SHOWN..SUBMIT span")
            }
            Violation::TranscriptionMismatch {
                sentence,
                submitted,
                reconstructed,
            } => write!(
                f,
                "sentence {sentence}: submitted {submitted:?} but keystrokes reconstruct {reconstructed:?}"
            ),
            Violation::EventOutsideEeg { index, t } => {
                write!(f, "event {index}: t = {t} lies outside the EEG recording")
            }
            Violation::BadMeta { detail } => write!(f, "metadata: {detail}"),
            Violation::ChannelCountMismatch { expected, found } => {
                write!(f, "EEG has {found} channels, metadata lists {expected}")
            }
            Violation::RateMismatch { meta, eeg } => {
                write!(f, "EEG rate {eeg} Hz differs from metadata rate {meta} Hz")
            }
            Violation::RaggedChannels { channel, len, expected } => {
                write!(f, "EEG channel {channel} has {len} samples, expected {expected}")
            }
            Violation::GazeNonMonotonic { index } => {
                write!(f, "gaze sample {index}: timestamp goes backwards")
            }
        }
    }
}

/// Recoverable oddities that do not block analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    BackspaceOnEmpty { sentence: usize, index: usize },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::BackspaceOnEmpty { sentence, index } => {
                write!(f, "sentence {sentence}: backspace on empty buffer at event {index}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl ValidationReport {
    /// True when the record is analyzable.
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a record for everything that would make its analysis unreliable.
/// Violations are returned as data; this never fails.
pub fn validate_session(rec: &SessionRecord, slack: f64) -> ValidationReport {
    let mut report = ValidationReport::default();

    for detail in rec.meta.problems() {
        report.violations.push(Violation::BadMeta { detail });
    }
    if rec.eeg.n_channels() != rec.meta.channel_names.len() {
        report.violations.push(Violation::ChannelCountMismatch {
            expected: rec.meta.channel_names.len(),
            found: rec.eeg.n_channels(),
        });
    }
    if rec.eeg.fs != rec.meta.fs_eeg {
        report.violations.push(Violation::RateMismatch {
            meta: rec.meta.fs_eeg,
            eeg: rec.eeg.fs,
        });
    }
    let expected = rec.eeg.n_samples();
    for (channel, samples) in rec.eeg.channels.iter().enumerate() {
        if samples.len() != expected {
            report.violations.push(Violation::RaggedChannels {
                channel,
                len: samples.len(),
                expected,
            });
        }
    }

    report.violations.extend(rec.events.structure_violations());

    for span in rec.events.sentences() {
        let replayed = replay(&rec.events, &span);
        for &index in &replayed.empty_backspaces {
            report.warnings.push(Warning::BackspaceOnEmpty {
                sentence: span.ordinal,
                index,
            });
        }
        if let Some(submitted) = &span.submitted {
            if *submitted != replayed.text {
                report.violations.push(Violation::TranscriptionMismatch {
                    sentence: span.ordinal,
                    submitted: submitted.clone(),
                    reconstructed: replayed.text,
                });
            }
        }
    }

    let (lo, hi) = (rec.eeg.t0 - slack, rec.eeg.end_time() + slack);
    for (index, ev) in rec.events.events.iter().enumerate() {
        if !(ev.t >= lo && ev.t <= hi) {
            report.violations.push(Violation::EventOutsideEeg { index, t: ev.t });
        }
    }

    if let Some(gaze) = &rec.gaze {
        for index in 1..gaze.len() {
            if !(gaze[index].t >= gaze[index - 1].t) {
                report.violations.push(Violation::GazeNonMonotonic { index });
            }
        }
    }
    report
}
