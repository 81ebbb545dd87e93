//! On-disk session bundles.
//!
//! A bundle is a directory holding:
//!
//! * `meta.json`: `participant_id`, `keyboard` (`"A"`, `"B"` or `"C"`),
//!   `session_index`, `fs_eeg`, `channels`;
//! * `eeg.csv`: header `t,<ch1>,...,<chN>`, then one row per sample;
//! * `events.csv`: header `t,kind,arg1,arg2`, RFC 4180 quoting;
//! * `gaze.csv` (optional): header `t,x,y,valid`.
//!
//! Separator `,`, decimal point `.`, line terminator `\n` (required after
//! the last row too, so a cut-off file is detected). Numbers are
//! written in shortest round-trip form, so writing and re-reading a record
//! is lossless.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    validate_session, EegRecording, Event, EventKind, EventLog, GazeSample, KeyClass, Keyboard, SessionMeta,
    SessionRecord, ValidationReport, Violation, DEFAULT_CHANNELS, DEFAULT_EVENT_SLACK,
};
use crate::par::{self, Execution};

pub const META_FILE: &str = "meta.json";
pub const EEG_FILE: &str = "eeg.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const GAZE_FILE: &str = "gaze.csv";

/// Relative tolerance on sample spacing.
pub const RATE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("file {0} is empty")]
    EmptyFile(PathBuf),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{file}: {source}")]
    InFile {
        file: String,
        #[source]
        source: Box<IngestError>,
    },
    #[error("bad metadata: {0}")]
    BadMeta(String),
    #[error("line {line}: bad header: {detail}")]
    BadHeader { line: u64, detail: String },
    #[error("line {line}: time {t} does not advance past {prev}")]
    NonMonotonicTime { line: u64, t: f64, prev: f64 },
    #[error("header lists {found} channels, metadata lists {expected}")]
    ChannelCountMismatch { expected: usize, found: usize },
    #[error("line {line}: non-uniform sampling: {detail}")]
    NonUniformRate { line: u64, detail: String },
    #[error("line {line}, column {column}: malformed number {value:?}")]
    MalformedNumber { line: u64, column: usize, value: String },
    #[error("line {line}: malformed row: {detail}")]
    MalformedRow { line: u64, detail: String },
    #[error("line {line}: unknown event kind {kind:?}")]
    UnknownKind { line: u64, kind: String },
    #[error("line {line}: unknown key class {class:?}")]
    UnknownKeyClass { line: u64, class: String },
    #[error("line {line}: marker order: {detail}")]
    MarkerOrder { line: u64, detail: String },
    #[error("line {line}: {detail}")]
    Csv { line: u64, detail: String },
}

impl IngestError {
    /// True for I/O-level failures, as opposed to bad content.
    pub fn is_io(&self) -> bool {
        match self {
            IngestError::MissingFile(_) | IngestError::EmptyFile(_) | IngestError::Io { .. } => true,
            IngestError::InFile { source, .. } => source.is_io(),
            _ => false,
        }
    }

    fn in_file(self, file: &str) -> IngestError {
        IngestError::InFile {
            file: file.to_string(),
            source: Box::new(self),
        }
    }
}

fn csv_error(e: csv::Error) -> IngestError {
    let line = e.position().map_or(0, |p| p.line());
    IngestError::Csv {
        line,
        detail: e.to_string(),
    }
}

/// Rejects a file whose last row lacks a line terminator, the signature of
/// a cut-off write.
fn check_terminated(text: &[u8]) -> Result<(), IngestError> {
    match text.last() {
        Some(b'\n') | None => Ok(()),
        Some(_) => Err(IngestError::MalformedRow {
            line: text.iter().filter(|&&b| b == b'\n').count() as u64 + 1,
            detail: "truncated: last row has no line terminator".into(),
        }),
    }
}

fn reader(text: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text)
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(Vec::new())
}

fn parse_number(field: &str, line: u64, column: usize) -> Result<f64, IngestError> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(IngestError::MalformedNumber {
            line,
            column,
            value: field.to_string(),
        }),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MetaFile {
    participant_id: String,
    keyboard: Keyboard,
    session_index: u32,
    fs_eeg: f64,
    #[serde(default = "default_channels")]
    channels: Vec<String>,
}

fn default_channels() -> Vec<String> {
    DEFAULT_CHANNELS.iter().map(|s| s.to_string()).collect()
}

pub fn parse_meta_json(text: &[u8]) -> Result<SessionMeta, IngestError> {
    let m: MetaFile = serde_json::from_slice(text).map_err(|e| IngestError::BadMeta(e.to_string()))?;
    let meta = SessionMeta {
        participant_id: m.participant_id,
        keyboard: m.keyboard,
        session_index: m.session_index,
        fs_eeg: m.fs_eeg,
        channel_names: m.channels,
    };
    let problems = meta.problems();
    if !problems.is_empty() {
        return Err(IngestError::BadMeta(problems.join("; ")));
    }
    Ok(meta)
}

pub fn write_meta_json(meta: &SessionMeta) -> String {
    let m = MetaFile {
        participant_id: meta.participant_id.clone(),
        keyboard: meta.keyboard,
        session_index: meta.session_index,
        fs_eeg: meta.fs_eeg,
        channels: meta.channel_names.clone(),
    };
    let mut s = serde_json::to_string_pretty(&m).expect("metadata serializes");
    s.push('\n');
    s
}

/// Parses `eeg.csv`. The channel header must match `meta`, timestamps must
/// increase, and every spacing must equal `1/fs_eeg` within
/// [`RATE_TOLERANCE`] (plus the rounding of the timestamps themselves).
pub fn parse_eeg_csv(text: &[u8], meta: &SessionMeta) -> Result<EegRecording, IngestError> {
    check_terminated(text)?;
    let mut rows = reader(text).into_records();
    let header = match rows.next() {
        Some(r) => r.map_err(csv_error)?,
        None => {
            return Err(IngestError::BadHeader {
                line: 1,
                detail: "file has no header".into(),
            })
        }
    };
    if header.get(0) != Some("t") {
        return Err(IngestError::BadHeader {
            line: 1,
            detail: format!("first column must be \"t\", found {:?}", header.get(0).unwrap_or("")),
        });
    }
    let found = header.len() - 1;
    if found != meta.channel_names.len() {
        return Err(IngestError::ChannelCountMismatch {
            expected: meta.channel_names.len(),
            found,
        });
    }
    for (i, (got, want)) in header.iter().skip(1).zip(&meta.channel_names).enumerate() {
        if got != want {
            return Err(IngestError::BadHeader {
                line: 1,
                detail: format!("channel {} is {got:?}, metadata says {want:?}", i + 1),
            });
        }
    }

    let mut times: Vec<f64> = Vec::new();
    let mut lines: Vec<u64> = Vec::new();
    let mut channels: Vec<Vec<f64>> = vec![Vec::new(); found];
    for row in rows {
        let row = row.map_err(csv_error)?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != found + 1 {
            return Err(IngestError::MalformedRow {
                line,
                detail: format!("expected {} fields, found {}", found + 1, row.len()),
            });
        }
        let t = parse_number(&row[0], line, 1)?;
        if let Some(&prev) = times.last() {
            if !(t > prev) {
                return Err(IngestError::NonMonotonicTime { line, t, prev });
            }
        }
        for (c, field) in row.iter().skip(1).enumerate() {
            channels[c].push(parse_number(field, line, c + 2)?);
        }
        times.push(t);
        lines.push(line);
    }

    let fs = meta.fs_eeg;
    if times.len() >= 2 {
        let mut spacing: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        spacing.sort_by(f64::total_cmp);
        let inferred = 1.0 / spacing[spacing.len() / 2];
        if ((inferred - fs) / fs).abs() > RATE_TOLERANCE {
            return Err(IngestError::NonUniformRate {
                line: lines[1],
                detail: format!("median spacing implies {inferred} Hz, metadata says {fs} Hz"),
            });
        }
        let period = 1.0 / fs;
        for i in 1..times.len() {
            let dt = times[i] - times[i - 1];
            let slack = RATE_TOLERANCE * period + 4.0 * f64::EPSILON * times[i].abs().max(times[i - 1].abs());
            if (dt - period).abs() > slack {
                return Err(IngestError::NonUniformRate {
                    line: lines[i],
                    detail: format!("spacing {dt} s, expected {period} s"),
                });
            }
        }
    }

    Ok(EegRecording {
        t0: times.first().copied().unwrap_or(0.0),
        fs,
        channels,
    })
}

pub fn write_eeg_csv(eeg: &EegRecording, channel_names: &[String]) -> String {
    let n = eeg.n_samples();
    let mut out = String::with_capacity(n * (eeg.n_channels() + 1) * 20);
    out.push('t');
    for name in channel_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for i in 0..n {
        write!(out, "{}", eeg.time_of(i)).expect("write to String");
        for ch in &eeg.channels {
            write!(out, ",{}", ch[i]).expect("write to String");
        }
        out.push('\n');
    }
    out
}

/// Parses `events.csv` into a log that satisfies the marker-structure
/// invariants, or reports the first offending row.
pub fn parse_events_csv(text: &[u8]) -> Result<EventLog, IngestError> {
    check_terminated(text)?;
    let mut events = Vec::new();
    let mut lines = Vec::new();
    for (i, row) in reader(text).into_records().enumerate() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map_or(0, |p| p.line());
        if i == 0 && row.get(0) == Some("t") {
            continue;
        }
        if row.len() != 4 {
            return Err(IngestError::MalformedRow {
                line,
                detail: format!("expected 4 fields, found {}", row.len()),
            });
        }
        let t = parse_number(&row[0], line, 1)?;
        let (arg1, arg2) = (&row[2], &row[3]);
        let require_empty = |field: &str, name: &str| -> Result<(), IngestError> {
            if field.is_empty() {
                Ok(())
            } else {
                Err(IngestError::MalformedRow {
                    line,
                    detail: format!("{} takes no {name}", &row[1]),
                })
            }
        };
        let kind = match &row[1] {
            "SESSION_START" | "SESSION_END" => {
                require_empty(arg1, "arg1")?;
                require_empty(arg2, "arg2")?;
                if &row[1] == "SESSION_START" {
                    EventKind::SessionStart
                } else {
                    EventKind::SessionEnd
                }
            }
            "SENTENCE_SHOWN" => {
                require_empty(arg2, "arg2")?;
                EventKind::SentenceShown(arg1.to_string())
            }
            "SENTENCE_SUBMIT" => {
                require_empty(arg2, "arg2")?;
                EventKind::SentenceSubmit(arg1.to_string())
            }
            "KEY" => {
                let class = arg1.parse::<KeyClass>().map_err(|_| IngestError::UnknownKeyClass {
                    line,
                    class: arg1.to_string(),
                })?;
                EventKind::Key {
                    class,
                    produced: arg2.to_string(),
                }
            }
            other => {
                return Err(IngestError::UnknownKind {
                    line,
                    kind: other.to_string(),
                })
            }
        };
        events.push(Event { t, kind });
        lines.push(line);
    }
    let log = EventLog::new(events);
    let line_of = |index: usize| lines.get(index).copied().unwrap_or(1);
    // Report the violation that occurs earliest in the file.
    let first = log.structure_violations().into_iter().min_by_key(|v| match v {
        Violation::NonMonotonicTime { index, .. }
        | Violation::MarkerOrder { index, .. }
        | Violation::KeyOutsideSentence { index } => *index,
        _ => usize::MAX,
    });
    match first {
        None => Ok(log),
        Some(Violation::NonMonotonicTime { index, t, prev }) => Err(IngestError::NonMonotonicTime {
            line: line_of(index),
            t,
            prev,
        }),
        Some(Violation::KeyOutsideSentence { index }) => Err(IngestError::MarkerOrder {
            line: line_of(index),
            detail: "KEY outside a SHOWN..SUBMIT span".into(),
        }),
        Some(Violation::MarkerOrder { index, detail }) => Err(IngestError::MarkerOrder {
            line: line_of(index),
            detail,
        }),
        Some(other) => Err(IngestError::MarkerOrder {
            line: 1,
            detail: other.to_string(),
        }),
    }
}

pub fn write_events_csv(log: &EventLog) -> String {
    let mut w = writer();
    w.write_record(["t", "kind", "arg1", "arg2"]).expect("in-memory write");
    for ev in &log.events {
        let t = ev.t.to_string();
        let (a1, a2): (&str, &str) = match &ev.kind {
            EventKind::SessionStart | EventKind::SessionEnd => ("", ""),
            EventKind::SentenceShown(text) | EventKind::SentenceSubmit(text) => (text, ""),
            EventKind::Key { class, produced } => (class.as_str(), produced),
        };
        w.write_record([t.as_str(), ev.kind.name(), a1, a2]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 input")
}

pub fn parse_gaze_csv(text: &[u8]) -> Result<Vec<GazeSample>, IngestError> {
    check_terminated(text)?;
    let mut rows = reader(text).into_records();
    match rows.next() {
        Some(r) => {
            let r = r.map_err(csv_error)?;
            if r.iter().collect::<Vec<_>>() != ["t", "x", "y", "valid"] {
                return Err(IngestError::BadHeader {
                    line: 1,
                    detail: "expected t,x,y,valid".into(),
                });
            }
        }
        None => {
            return Err(IngestError::BadHeader {
                line: 1,
                detail: "file has no header".into(),
            })
        }
    }
    let mut out: Vec<GazeSample> = Vec::new();
    for row in rows {
        let row = row.map_err(csv_error)?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 4 {
            return Err(IngestError::MalformedRow {
                line,
                detail: format!("expected 4 fields, found {}", row.len()),
            });
        }
        let t = parse_number(&row[0], line, 1)?;
        if let Some(prev) = out.last() {
            if t < prev.t {
                return Err(IngestError::NonMonotonicTime { line, t, prev: prev.t });
            }
        }
        let valid = match &row[3] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(IngestError::MalformedRow {
                    line,
                    detail: format!("valid must be 0 or 1, found {other:?}"),
                })
            }
        };
        out.push(GazeSample {
            t,
            x: parse_number(&row[1], line, 2)?,
            y: parse_number(&row[2], line, 3)?,
            valid,
        });
    }
    Ok(out)
}

pub fn write_gaze_csv(gaze: &[GazeSample]) -> String {
    let mut out = String::from("t,x,y,valid\n");
    for g in gaze {
        writeln!(out, "{},{},{},{}", g.t, g.x, g.y, u8::from(g.valid)).expect("write to String");
    }
    out
}

/// A parsed bundle together with its validation report.
#[derive(Debug, Clone)]
pub struct LoadedSession {
    pub record: SessionRecord,
    pub validation: ValidationReport,
}

fn read_required(dir: &Path, name: &str) -> Result<Vec<u8>, IngestError> {
    let path = dir.join(name);
    match fs::read(&path) {
        Ok(bytes) if bytes.is_empty() => Err(IngestError::EmptyFile(path)),
        Ok(bytes) => Ok(bytes),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Err(IngestError::MissingFile(path)),
        Err(source) => Err(IngestError::Io { path, source }),
    }
}

/// Loads and cross-validates a bundle with the default event slack.
pub fn load_session(dir: &Path) -> Result<LoadedSession, IngestError> {
    load_session_with(dir, DEFAULT_EVENT_SLACK, Execution::Sequential)
}

/// Loads a bundle; the EEG and event/gaze files are parsed concurrently
/// under [`Execution::Parallel`].
pub fn load_session_with(dir: &Path, slack: f64, exec: Execution) -> Result<LoadedSession, IngestError> {
    let meta = parse_meta_json(&read_required(dir, META_FILE)?).map_err(|e| e.in_file(META_FILE))?;
    let (eeg, rest) = par::join(
        exec,
        || -> Result<EegRecording, IngestError> {
            parse_eeg_csv(&read_required(dir, EEG_FILE)?, &meta).map_err(|e| e.in_file(EEG_FILE))
        },
        || -> Result<(EventLog, Option<Vec<GazeSample>>), IngestError> {
            let events = parse_events_csv(&read_required(dir, EVENTS_FILE)?).map_err(|e| e.in_file(EVENTS_FILE))?;
            let gaze_path = dir.join(GAZE_FILE);
            let gaze = if gaze_path.exists() {
                let bytes = fs::read(&gaze_path).map_err(|source| IngestError::Io {
                    path: gaze_path.clone(),
                    source,
                })?;
                Some(parse_gaze_csv(&bytes).map_err(|e| e.in_file(GAZE_FILE))?)
            } else {
                None
            };
            Ok((events, gaze))
        },
    );
    let eeg = eeg?;
    let (events, gaze) = rest?;
    let record = SessionRecord { meta, eeg, events, gaze };
    let validation = validate_session(&record, slack);
    Ok(LoadedSession { record, validation })
}

/// Writes a bundle into `dir`, creating it if needed.
pub fn write_session(rec: &SessionRecord, dir: &Path) -> Result<(), IngestError> {
    let io = |path: PathBuf| move |source| IngestError::Io { path, source };
    fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
    let put = |name: &str, contents: String| {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(io(path))
    };
    put(META_FILE, write_meta_json(&rec.meta))?;
    put(EEG_FILE, write_eeg_csv(&rec.eeg, &rec.meta.channel_names))?;
    put(EVENTS_FILE, write_events_csv(&rec.events))?;
    let gaze_path = dir.join(GAZE_FILE);
    match &rec.gaze {
        Some(g) => put(GAZE_FILE, write_gaze_csv(g))?,
        None if gaze_path.exists() => fs::remove_file(&gaze_path).map_err(io(gaze_path))?,
        None => {}
    }
    Ok(())
}
