//! Text-entry performance metrics computed from the event log.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::model::{replay, EventLog, KeyClass, ModelError, SentenceSpan, SessionRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("duration must be positive, got {0} s")]
    NonPositiveDuration(f64),
    #[error("sentence {0} has an empty transcription")]
    EmptyTranscription(usize),
    #[error("sentence {0} was never submitted")]
    Unsubmitted(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Where a sentence's transcription time starts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimingAnchor {
    /// SENTENCE_SHOWN, so reading time is included.
    #[default]
    Shown,
    /// The first keystroke of the sentence.
    FirstKey,
}

impl FromStr for TimingAnchor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shown" => Ok(TimingAnchor::Shown),
            "first-key" => Ok(TimingAnchor::FirstKey),
            other => Err(format!("unknown timing anchor {other:?} (expected shown or first-key)")),
        }
    }
}

impl fmt::Display for TimingAnchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimingAnchor::Shown => "shown",
            TimingAnchor::FirstKey => "first-key",
        })
    }
}

/// Words per minute, `((|T| − 1)·60) / (5·s)`; zero when `|T| ≤ 1`.
pub fn wpm(transcribed_len: usize, duration: f64) -> Result<f64, MetricsError> {
    if !(duration > 0.0) {
        return Err(MetricsError::NonPositiveDuration(duration));
    }
    if transcribed_len <= 1 {
        return Ok(0.0);
    }
    Ok(((transcribed_len - 1) as f64 * 60.0) / (5.0 * duration))
}

fn saved_pct(transcribed_len: usize, keystrokes: usize) -> f64 {
    100.0 * (transcribed_len as f64 - keystrokes as f64) / transcribed_len as f64
}

fn span(log: &EventLog, sentence: usize) -> Result<SentenceSpan, MetricsError> {
    let sentences = log.sentences();
    let available = sentences.len();
    sentences
        .into_iter()
        .nth(sentence)
        .ok_or(MetricsError::Model(ModelError::MissingSentence {
            index: sentence,
            available,
        }))
}

/// `(|T|, K)` for one sentence.
fn counts(log: &EventLog, span: &SentenceSpan) -> (usize, usize) {
    (replay(log, span).text.chars().count(), span.keys.len())
}

/// `100·(|T| − K)/|T|`, with K counting every keystroke class.
pub fn keystrokes_saved_pct(log: &EventLog, sentence: usize) -> Result<f64, MetricsError> {
    let (len, keys) = counts(log, &span(log, sentence)?);
    if len == 0 {
        return Err(MetricsError::EmptyTranscription(sentence));
    }
    Ok(saved_pct(len, keys))
}

/// Keystrokes per transcribed character, `K/|T|`.
pub fn kspc(log: &EventLog, sentence: usize) -> Result<f64, MetricsError> {
    let (len, keys) = counts(log, &span(log, sentence)?);
    if len == 0 {
        return Err(MetricsError::EmptyTranscription(sentence));
    }
    Ok(keys as f64 / len as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Sentence(usize),
    Session,
}

pub fn backspace_count(log: &EventLog, scope: Scope) -> Result<usize, MetricsError> {
    let is_bksp = |(_, class, _): &(f64, KeyClass, &str)| *class == KeyClass::Bksp;
    match scope {
        Scope::Sentence(i) => {
            let s = span(log, i)?;
            Ok(s.key_events(log).filter(is_bksp).count())
        }
        Scope::Session => Ok(log
            .events
            .iter()
            .filter(|e| matches!(e.kind, crate::model::EventKind::Key { class: KeyClass::Bksp, .. }))
            .count()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SentenceMetrics {
    pub sentence: usize,
    pub transcribed_len: usize,
    pub duration: f64,
    pub wpm: f64,
    pub keystrokes: usize,
    /// `None` for an empty transcription.
    pub keystrokes_saved_pct: Option<f64>,
    pub kspc: Option<f64>,
    pub backspace_count: usize,
}

/// Per-sentence metrics and their unweighted means over the session.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypingMetrics {
    pub sentences: Vec<SentenceMetrics>,
    pub mean_wpm: Option<f64>,
    pub mean_keystrokes_saved_pct: Option<f64>,
    pub mean_kspc: Option<f64>,
    pub mean_duration: Option<f64>,
    /// Backspaces over the whole session.
    pub backspace_count: usize,
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn sentence_metrics(log: &EventLog, span: &SentenceSpan, anchor: TimingAnchor) -> Result<SentenceMetrics, MetricsError> {
    let submit = span.submit_t.ok_or(MetricsError::Unsubmitted(span.ordinal))?;
    let start = match anchor {
        TimingAnchor::Shown => span.shown_t,
        TimingAnchor::FirstKey => span.keys.first().map_or(span.shown_t, |&i| log.events[i].t),
    };
    let duration = submit - start;
    let (len, keys) = counts(log, span);
    Ok(SentenceMetrics {
        sentence: span.ordinal,
        transcribed_len: len,
        duration,
        wpm: wpm(len, duration)?,
        keystrokes: keys,
        keystrokes_saved_pct: (len > 0).then(|| saved_pct(len, keys)),
        kspc: (len > 0).then(|| keys as f64 / len as f64),
        backspace_count: span.key_events(log).filter(|k| k.1 == KeyClass::Bksp).count(),
    })
}

pub fn session_metrics(rec: &SessionRecord, anchor: TimingAnchor) -> Result<TypingMetrics, MetricsError> {
    let log = &rec.events;
    let sentences = log
        .sentences()
        .iter()
        .map(|s| sentence_metrics(log, s, anchor))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TypingMetrics {
        mean_wpm: mean_of(sentences.iter().map(|s| s.wpm)),
        mean_keystrokes_saved_pct: mean_of(sentences.iter().filter_map(|s| s.keystrokes_saved_pct)),
        mean_kspc: mean_of(sentences.iter().filter_map(|s| s.kspc)),
        mean_duration: mean_of(sentences.iter().map(|s| s.duration)),
        backspace_count: backspace_count(log, Scope::Session)?,
        sentences,
    })
}
