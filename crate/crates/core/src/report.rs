//! Whole-study analysis and its machine-readable report.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::ingest::LoadedSession;
use crate::metrics::{session_metrics, TimingAnchor, TypingMetrics};
use crate::model::{Keyboard, DEFAULT_EVENT_SLACK};
use crate::par::{self, Execution};
use crate::segmentation::{
    aggregate, assign_windows, mode_intervals, phase_intervals, GroupBy, GroupKey, LabeledLoadSample, Level,
    SessionKey,
};
use crate::spectral::{cognitive_load_series, AnalysisConfig};
use crate::stats::{anova_oneway, boxplot_summary, ttest_two_sample, BoxplotSummary, StatResult, StatsError, TTestVariant};

/// Everything that influences the numbers in a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeOptions {
    pub analysis: AnalysisConfig,
    pub label_threshold: f64,
    pub timing_anchor: TimingAnchor,
    pub level: Level,
    pub include_training: bool,
    pub ttest_variant: TTestVariant,
    pub event_slack: f64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            analysis: AnalysisConfig::default(),
            label_threshold: 0.5,
            timing_anchor: TimingAnchor::Shown,
            level: Level::Sentence,
            include_training: true,
            ttest_variant: TTestVariant::Student,
            event_slack: DEFAULT_EVENT_SLACK,
        }
    }
}

impl AnalyzeOptions {
    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("options serialize");
        let digest = Sha256::digest(json.as_bytes());
        let mut out = String::with_capacity(64);
        for b in digest.iter() {
            write!(out, "{b:02x}").expect("write to String");
        }
        out
    }
}

/// One loaded bundle and the name it is reported under.
#[derive(Debug, Clone)]
pub struct SessionInput {
    pub source: String,
    pub session: LoadedSession,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Analyzed,
    /// Validation found violations; nothing was computed.
    Invalid,
    /// Training session left out by configuration.
    ExcludedTraining,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadSummary {
    pub windows: usize,
    pub dropped: usize,
    pub mean_load: Option<f64>,
    pub min_load: Option<f64>,
    pub max_load: Option<f64>,
    pub band_names: Vec<String>,
    pub mean_band_ratios: Option<Vec<f64>>,
    /// Windows that received a mode / phase label.
    pub mode_labeled: usize,
    pub phase_labeled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionReport {
    pub source: String,
    pub participant: String,
    pub keyboard: Keyboard,
    pub session_index: u32,
    pub status: SessionStatus,
    pub validation: crate::model::ValidationReport,
    pub metrics: Option<TypingMetrics>,
    pub load: Option<LoadSummary>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    #[serde(flatten)]
    pub key: GroupKey,
    pub summary: BoxplotSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grouping {
    pub by: String,
    pub level: Level,
    pub groups: Vec<GroupSummary>,
    /// Expected groups with no samples.
    pub empty: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedTest {
    pub name: String,
    pub result: Option<StatResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyboardValue {
    pub keyboard: Keyboard,
    pub value: f64,
}

/// Published human-study values, carried for context only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NotReproduced {
    pub note: String,
    pub wpm: Vec<KeyboardValue>,
    pub load_mean: Vec<KeyboardValue>,
}

impl Default for NotReproduced {
    fn default() -> Self {
        let kv = |keyboard, value| KeyboardValue { keyboard, value };
        NotReproduced {
            note: "reference values from the original human study; not computed from these inputs".into(),
            wpm: vec![kv(Keyboard::A, 9.20), kv(Keyboard::B, 8.60), kv(Keyboard::C, 9.05)],
            load_mean: vec![kv(Keyboard::A, 0.0865), kv(Keyboard::B, 0.0860), kv(Keyboard::C, 0.0824)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub config: AnalyzeOptions,
    pub config_hash: String,
    pub sessions: Vec<SessionReport>,
    pub groupings: Vec<Grouping>,
    pub tests: Vec<NamedTest>,
    pub warnings: Vec<String>,
    pub not_reproduced: NotReproduced,
}

impl Report {
    pub fn has_violations(&self) -> bool {
        self.sessions.iter().any(|s| s.status == SessionStatus::Invalid)
    }

    pub fn grouping(&self, by: &str) -> Option<&Grouping> {
        self.groupings.iter().find(|g| g.by == by)
    }

    pub fn test(&self, name: &str) -> Option<&NamedTest> {
        self.tests.iter().find(|t| t.name == name)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One `path,value` row per JSON leaf, keys in sorted order.
    pub fn to_csv(&self) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        let mut rows = Vec::new();
        flatten_json(&value, String::new(), &mut rows);
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(["path", "value"]).expect("write to Vec");
        for (path, v) in rows {
            w.write_record([path, v]).expect("write to Vec");
        }
        String::from_utf8(w.into_inner().expect("flush to Vec")).expect("utf-8")
    }
}

/// Flattens JSON into `(path, leaf)` pairs; paths look like `a.b[2].c`.
pub fn flatten_json(value: &Value, path: String, out: &mut Vec<(String, String)>) {
    match value {
        Value::Object(map) if !map.is_empty() => {
            for (k, v) in map {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                flatten_json(v, p, out);
            }
        }
        Value::Array(items) if !items.is_empty() => {
            for (i, v) in items.iter().enumerate() {
                flatten_json(v, format!("{path}[{i}]"), out);
            }
        }
        Value::Object(_) => out.push((path, "{}".into())),
        Value::Array(_) => out.push((path, "[]".into())),
        Value::Null => out.push((path, String::new())),
        Value::String(s) => out.push((path, s.clone())),
        Value::Bool(b) => out.push((path, b.to_string())),
        Value::Number(n) => out.push((path, n.to_string())),
    }
}

struct Analyzed {
    report: SessionReport,
    samples: Vec<LabeledLoadSample>,
}

fn analyze_one(input: &SessionInput, opts: &AnalyzeOptions, exec: Execution) -> Analyzed {
    let rec = &input.session.record;
    let validation = input.session.validation.clone();
    let mut report = SessionReport {
        source: input.source.clone(),
        participant: rec.meta.participant_id.clone(),
        keyboard: rec.meta.keyboard,
        session_index: rec.meta.session_index,
        status: SessionStatus::Analyzed,
        validation,
        metrics: None,
        load: None,
        errors: Vec::new(),
    };
    if !report.validation.is_valid() {
        report.status = SessionStatus::Invalid;
        return Analyzed {
            report,
            samples: Vec::new(),
        };
    }
    if rec.meta.is_training() && !opts.include_training {
        report.status = SessionStatus::ExcludedTraining;
        return Analyzed {
            report,
            samples: Vec::new(),
        };
    }

    match session_metrics(rec, opts.timing_anchor) {
        Ok(m) => report.metrics = Some(m),
        Err(e) => report.errors.push(format!("metrics: {e}")),
    }
    let mut samples = Vec::new();
    match cognitive_load_series(&rec.eeg, &opts.analysis, exec) {
        Ok(series) => {
            let key = SessionKey {
                participant: rec.meta.participant_id.clone(),
                keyboard: rec.meta.keyboard,
                session_index: rec.meta.session_index,
            };
            samples = assign_windows(
                &series,
                &mode_intervals(&rec.events),
                &phase_intervals(&rec.events),
                opts.label_threshold,
                &key,
            );
            report.load = Some(LoadSummary {
                windows: series.entries.len(),
                dropped: series.dropped,
                mean_load: series.mean_load(),
                min_load: series.entries.iter().map(|e| e.load).reduce(f64::min),
                max_load: series.entries.iter().map(|e| e.load).reduce(f64::max),
                band_names: series.band_names.clone(),
                mean_band_ratios: series.mean_band_ratios(),
                mode_labeled: samples.iter().filter(|s| s.mode.is_some()).count(),
                phase_labeled: samples.iter().filter(|s| s.phase.is_some()).count(),
            });
        }
        Err(e) => report.errors.push(format!("load: {e}")),
    }
    Analyzed { report, samples }
}

fn named(name: String, outcome: Result<StatResult, StatsError>) -> NamedTest {
    match outcome {
        Ok(result) => NamedTest {
            name,
            result: Some(result),
            error: None,
        },
        Err(e) => {
            let sentinel = match &e {
                StatsError::ZeroWithinVariance(r) => Some(r.clone()),
                StatsError::ZeroVariance { sentinel } => sentinel.clone(),
                _ => None,
            };
            NamedTest {
                name,
                result: sentinel,
                error: Some(e.to_string()),
            }
        }
    }
}

/// Per-(participant, keyboard) means of a session metric, grouped by
/// keyboard.
fn participant_means(sessions: &[SessionReport], metric: impl Fn(&TypingMetrics) -> Option<f64>) -> Vec<(Keyboard, Vec<f64>)> {
    let mut cells: std::collections::BTreeMap<(Keyboard, &str), (f64, usize)> = Default::default();
    for s in sessions {
        if let Some(v) = s.metrics.as_ref().and_then(&metric) {
            let c = cells.entry((s.keyboard, s.participant.as_str())).or_insert((0.0, 0));
            c.0 += v;
            c.1 += 1;
        }
    }
    let mut out: Vec<(Keyboard, Vec<f64>)> = Vec::new();
    for ((kb, _), (sum, n)) in cells {
        let mean = sum / n as f64;
        match out.last_mut() {
            Some((k, values)) if *k == kb => values.push(mean),
            _ => out.push((kb, vec![mean])),
        }
    }
    out
}

/// Analyzes every session and assembles the report. Sessions are
/// processed under `exec`; the result is independent of input order.
pub fn analyze(inputs: &[SessionInput], opts: &AnalyzeOptions, exec: Execution) -> Report {
    let mut analyzed = par::map(exec, inputs, |input| analyze_one(input, opts, exec));
    analyzed.sort_by(|a, b| {
        let key = |x: &Analyzed| {
            (
                x.report.participant.clone(),
                x.report.keyboard,
                x.report.session_index,
                x.report.source.clone(),
            )
        };
        key(a).cmp(&key(b))
    });

    let mut warnings = Vec::new();
    for a in &analyzed {
        let r = &a.report;
        for v in &r.validation.violations {
            warnings.push(format!("{}: {v}", r.source));
        }
        for w in &r.validation.warnings {
            warnings.push(format!("{}: {w}", r.source));
        }
        for e in &r.errors {
            warnings.push(format!("{}: {e}", r.source));
        }
    }

    let samples: Vec<LabeledLoadSample> = analyzed.iter().flat_map(|a| a.samples.iter().cloned()).collect();
    let sessions: Vec<SessionReport> = analyzed.into_iter().map(|a| a.report).collect();

    let mut groupings = Vec::new();
    for (by, group_by) in [
        ("keyboard", GroupBy::KEYBOARD),
        ("keyboard_mode", GroupBy::KEYBOARD_MODE),
        ("keyboard_phase", GroupBy::KEYBOARD_PHASE),
    ] {
        let agg = aggregate(&samples, opts.level, group_by);
        let groups = agg
            .groups
            .iter()
            .map(|g| GroupSummary {
                key: g.key.clone(),
                summary: boxplot_summary(&g.values).expect("aggregated groups are non-empty"),
            })
            .collect();
        groupings.push(Grouping {
            by: by.to_string(),
            level: opts.level,
            groups,
            empty: agg.empty.iter().map(|k| k.to_string()).collect(),
        });
    }

    let mut tests = Vec::new();
    let by_keyboard = aggregate(&samples, opts.level, GroupBy::KEYBOARD);
    let load_groups: Vec<(Keyboard, Vec<f64>)> = by_keyboard
        .groups
        .iter()
        .filter_map(|g| g.key.keyboard.map(|k| (k, g.values.clone())))
        .collect();
    for i in 0..load_groups.len() {
        for j in i + 1..load_groups.len() {
            let (ka, a) = &load_groups[i];
            let (kb, b) = &load_groups[j];
            tests.push(named(format!("load_ttest_{ka}_{kb}"), ttest_two_sample(a, b, opts.ttest_variant)));
        }
    }
    let anova = |groups: Vec<(Keyboard, Vec<f64>)>| anova_oneway(&groups.into_iter().map(|g| g.1).collect::<Vec<_>>());
    tests.push(named("load_anova".into(), anova(load_groups.clone())));
    tests.push(named("wpm_anova".into(), anova(participant_means(&sessions, |m| m.mean_wpm))));
    tests.push(named(
        "keystrokes_saved_anova".into(),
        anova(participant_means(&sessions, |m| m.mean_keystrokes_saved_pct)),
    ));
    tests.push(named(
        "backspace_anova".into(),
        anova(participant_means(&sessions, |m| Some(m.backspace_count as f64))),
    ));

    Report {
        tool: "gazeload".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: opts.clone(),
        config_hash: opts.hash(),
        sessions,
        groupings,
        tests,
        warnings,
        not_reproduced: NotReproduced::default(),
    }
}
