//! Typing-mode and session-phase intervals, window labeling and
//! aggregation into the sample groups used for comparisons.
//!
//! A keystroke labels the time leading up to it: the interval from the
//! previous keystroke of the same sentence (or from SENTENCE_SHOWN) to the
//! keystroke itself. A window takes the label that covers most of it, if
//! that label covers at least `threshold` of the window's duration.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::model::{EventKind, EventLog, KeyClass, Keyboard};
use crate::spectral::LoadSeries;

/// Typing mode; identical to the class of the keystroke closing an interval.
pub type Mode = KeyClass;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeInterval {
    pub start: f64,
    pub end: f64,
    pub mode: Mode,
    pub sentence: usize,
}

/// Session phase: before the first sentence, or inside sentence `i`
/// (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Pre,
    Sentence(usize),
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Pre => f.write_str("Pre"),
            Phase::Sentence(i) => write!(f, "{i}"),
        }
    }
}

impl Serialize for Phase {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseInterval {
    pub start: f64,
    pub end: f64,
    pub phase: Phase,
}

/// Labeled half-open time span used for window assignment.
pub trait Interval {
    type Label: Copy + PartialEq;
    fn span(&self) -> (f64, f64);
    fn label(&self) -> Self::Label;
}

impl Interval for ModeInterval {
    type Label = Mode;
    fn span(&self) -> (f64, f64) {
        (self.start, self.end)
    }
    fn label(&self) -> Mode {
        self.mode
    }
}

impl Interval for PhaseInterval {
    type Label = Phase;
    fn span(&self) -> (f64, f64) {
        (self.start, self.end)
    }
    fn label(&self) -> Phase {
        self.phase
    }
}

/// Mode intervals of every sentence. Zero-length intervals (two
/// keystrokes with the same timestamp) are omitted.
pub fn mode_intervals(events: &EventLog) -> Vec<ModeInterval> {
    let mut out = Vec::new();
    for span in events.sentences() {
        let mut prev = span.shown_t;
        for (t, class, _) in span.key_events(events) {
            if t > prev {
                out.push(ModeInterval {
                    start: prev,
                    end: t,
                    mode: class,
                    sentence: span.ordinal,
                });
            }
            prev = prev.max(t);
        }
    }
    out
}

/// Pre-phase and one interval per submitted sentence; gaps between
/// sentences stay unlabeled. An empty Pre phase is omitted.
pub fn phase_intervals(events: &EventLog) -> Vec<PhaseInterval> {
    let mut out = Vec::new();
    let sentences = events.sentences();
    let start = events
        .events
        .iter()
        .find(|e| e.kind == EventKind::SessionStart)
        .map(|e| e.t);
    if let (Some(start), Some(first)) = (start, sentences.first()) {
        if first.shown_t > start {
            out.push(PhaseInterval {
                start,
                end: first.shown_t,
                phase: Phase::Pre,
            });
        }
    }
    for s in &sentences {
        if let Some(end) = s.submit_t {
            if end > s.shown_t {
                out.push(PhaseInterval {
                    start: s.shown_t,
                    end,
                    phase: Phase::Sentence(s.ordinal + 1),
                });
            }
        }
    }
    out
}

/// Label covering the largest part of `[start, end)`, if it covers at
/// least `threshold·(end − start)`. Ties go to the label whose first
/// overlapping interval starts earlier.
pub fn label_for<I: Interval>(start: f64, end: f64, intervals: &[I], threshold: f64) -> Option<I::Label> {
    // (label, total overlap, earliest start), in order of first appearance.
    let mut totals: Vec<(I::Label, f64, f64)> = Vec::new();
    for iv in intervals {
        let (a, b) = iv.span();
        let overlap = b.min(end) - a.max(start);
        if overlap <= 0.0 {
            continue;
        }
        match totals.iter_mut().find(|(l, _, _)| *l == iv.label()) {
            Some(entry) => {
                entry.1 += overlap;
                entry.2 = entry.2.min(a);
            }
            None => totals.push((iv.label(), overlap, a)),
        }
    }
    let best = totals.iter().fold(None::<&(I::Label, f64, f64)>, |best, cand| match best {
        Some(b) if b.1 > cand.1 || (b.1 == cand.1 && b.2 <= cand.2) => Some(b),
        _ => Some(cand),
    })?;
    (best.1 >= threshold * (end - start)).then_some(best.0)
}

/// Session identity carried by every labeled sample.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SessionKey {
    pub participant: String,
    pub keyboard: Keyboard,
    pub session_index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledLoadSample {
    pub start_t: f64,
    pub end_t: f64,
    pub load: f64,
    pub mode: Option<Mode>,
    pub phase: Option<Phase>,
    #[serde(flatten)]
    pub session: SessionKey,
}

/// Labels every window of `series` with a mode and a phase.
pub fn assign_windows(
    series: &LoadSeries,
    modes: &[ModeInterval],
    phases: &[PhaseInterval],
    threshold: f64,
    session: &SessionKey,
) -> Vec<LabeledLoadSample> {
    series
        .entries
        .iter()
        .map(|e| LabeledLoadSample {
            start_t: e.start_t,
            end_t: e.end_t,
            load: e.load,
            mode: label_for(e.start_t, e.end_t, modes, threshold),
            phase: label_for(e.start_t, e.end_t, phases, threshold),
            session: session.clone(),
        })
        .collect()
}

/// Unit over which window loads are averaged before grouping.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Window,
    #[default]
    Sentence,
    Session,
    Participant,
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "window" => Ok(Level::Window),
            "sentence" => Ok(Level::Sentence),
            "session" => Ok(Level::Session),
            "participant" => Ok(Level::Participant),
            other => Err(format!(
                "unknown level {other:?} (expected window, sentence, session or participant)"
            )),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Window => "window",
            Level::Sentence => "sentence",
            Level::Session => "session",
            Level::Participant => "participant",
        })
    }
}

/// Which labels partition the samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GroupBy {
    pub keyboard: bool,
    pub mode: bool,
    pub phase: bool,
}

impl GroupBy {
    pub const KEYBOARD: GroupBy = GroupBy {
        keyboard: true,
        mode: false,
        phase: false,
    };
    pub const KEYBOARD_MODE: GroupBy = GroupBy {
        keyboard: true,
        mode: true,
        phase: false,
    };
    pub const KEYBOARD_PHASE: GroupBy = GroupBy {
        keyboard: true,
        mode: false,
        phase: true,
    };
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GroupKey {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keyboard: Option<Keyboard>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<Phase>,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(k) = self.keyboard {
            parts.push(format!("keyboard={k}"));
        }
        if let Some(m) = self.mode {
            parts.push(format!("mode={m}"));
        }
        if let Some(p) = self.phase {
            parts.push(format!("phase={p}"));
        }
        if parts.is_empty() {
            f.write_str("all")
        } else {
            f.write_str(&parts.join(","))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Group {
    pub key: GroupKey,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Aggregation {
    /// Non-empty groups in key order.
    pub groups: Vec<Group>,
    /// Expected groups that received no samples.
    pub empty: Vec<GroupKey>,
}

impl Aggregation {
    pub fn get(&self, key: &GroupKey) -> Option<&[f64]> {
        self.groups.iter().find(|g| &g.key == key).map(|g| g.values.as_slice())
    }
}

/// Averaging unit: which window samples are pooled into one value.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Unit {
    participant: Option<String>,
    keyboard: Keyboard,
    session: Option<u32>,
    sentence: Option<usize>,
    window: Option<usize>,
}

/// Groups window loads at the requested level.
///
/// Sentence, Session and Participant levels average the windows of each
/// unit (and each group within it); Window level passes values through.
/// Sentence level uses windows labeled with a sentence phase, plus the Pre
/// phase as one unit per session when grouping by phase. Grouping by mode
/// or phase drops windows without that label. Output is ordered
/// by group key, then by participant, session and sentence.
pub fn aggregate(samples: &[LabeledLoadSample], level: Level, group_by: GroupBy) -> Aggregation {
    let mut cells: BTreeMap<GroupKey, BTreeMap<Unit, (f64, f64, usize)>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        if group_by.mode && s.mode.is_none() || group_by.phase && s.phase.is_none() {
            continue;
        }
        let sentence = match s.phase {
            Some(Phase::Sentence(k)) => Some(k),
            _ => None,
        };
        if level == Level::Sentence && sentence.is_none() && !(group_by.phase && s.phase.is_some()) {
            continue;
        }
        let key = GroupKey {
            keyboard: group_by.keyboard.then_some(s.session.keyboard),
            mode: if group_by.mode { s.mode } else { None },
            phase: if group_by.phase { s.phase } else { None },
        };
        let unit = Unit {
            participant: (level != Level::Window).then(|| s.session.participant.clone()),
            keyboard: s.session.keyboard,
            session: matches!(level, Level::Sentence | Level::Session).then_some(s.session.session_index),
            sentence: (level == Level::Sentence).then_some(sentence).flatten(),
            window: (level == Level::Window).then_some(i),
        };
        // Deviations from the first value keep a constant unit exact.
        let cell = cells.entry(key).or_default().entry(unit).or_insert((s.load, 0.0, 0));
        cell.1 += s.load - cell.0;
        cell.2 += 1;
    }

    let groups: Vec<Group> = cells
        .into_iter()
        .map(|(key, units)| Group {
            key,
            values: units.into_values().map(|(first, dev, n)| first + dev / n as f64).collect(),
        })
        .collect();

    let empty = expected_keys(samples, group_by)
        .into_iter()
        .filter(|k| !groups.iter().any(|g| &g.key == k))
        .collect();
    Aggregation { groups, empty }
}

/// Cartesian product of the label values present anywhere in `samples`
/// (keyboards and modes also include every known value).
fn expected_keys(samples: &[LabeledLoadSample], group_by: GroupBy) -> Vec<GroupKey> {
    let keyboards: Vec<Option<Keyboard>> = if group_by.keyboard {
        let mut seen: Vec<Keyboard> = samples.iter().map(|s| s.session.keyboard).collect();
        seen.sort();
        seen.dedup();
        seen.into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    let modes: Vec<Option<Mode>> = if group_by.mode {
        KeyClass::ALL.iter().copied().map(Some).collect()
    } else {
        vec![None]
    };
    let phases: Vec<Option<Phase>> = if group_by.phase {
        let mut seen: Vec<Phase> = samples.iter().filter_map(|s| s.phase).collect();
        seen.sort();
        seen.dedup();
        seen.into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    let mut out = Vec::new();
    for &keyboard in &keyboards {
        for &mode in &modes {
            for &phase in &phases {
                out.push(GroupKey { keyboard, mode, phase });
            }
        }
    }
    out.sort();
    out
}
