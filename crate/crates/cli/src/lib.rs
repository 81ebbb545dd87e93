//! `gazeload` command-line interface.
//!
//! Exit codes: 0 success, 2 invalid input data, 3 degenerate statistics,
//! 64 usage error, 74 I/O error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gazeload::ingest::{load_session_with, write_session, IngestError};
use gazeload::metrics::TimingAnchor;
use gazeload::report::{analyze, AnalyzeOptions, SessionInput};
use gazeload::segmentation::Level;
use gazeload::simgen::{synth_session, SimSpec};
use gazeload::stats::{anova_oneway, ttest_two_sample, StatsError, TTestVariant};
use gazeload::{par, AnalysisConfig, Execution, WindowFn};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_IO: i32 = 74;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "GTL_THREADS";

#[derive(Debug, Parser)]
#[command(name = "gazeload", version, about = "EEG cognitive-load and text-entry analysis for gaze-typing sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analyze session bundles and write a report.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic session bundle.
    Simulate(SimulateArgs),
    /// Run a one-way ANOVA or two-sample t-test on columns of numbers.
    Stats(StatsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

impl OnOff {
    fn is_on(self) -> bool {
        self == OnOff::On
    }
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Session bundle directories.
    #[arg(long = "session", required = true, num_args = 1..)]
    sessions: Vec<PathBuf>,
    /// Report file.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Window length in samples (power of two).
    #[arg(long, default_value_t = 1024, value_parser = parse_window)]
    window: usize,
    /// Hop in samples.
    #[arg(long, default_value_t = 512)]
    hop: usize,
    /// Taper: sine, hann or rect.
    #[arg(long = "win-fn", default_value = "sine")]
    win_fn: WindowFn,
    #[arg(long, value_enum, default_value = "on")]
    detrend: OnOff,
    /// Minimum overlap fraction for a window label.
    #[arg(long = "label-threshold", default_value_t = 0.5, value_parser = parse_fraction)]
    label_threshold: f64,
    /// Start of the wpm interval: shown or first-key.
    #[arg(long = "timing-anchor", default_value = "shown")]
    timing_anchor: TimingAnchor,
    /// Unit each statistic is computed over: window, sentence, session or participant.
    #[arg(long, default_value = "sentence")]
    level: Level,
    /// Include session 1 of each keyboard.
    #[arg(long = "include-training", value_enum, default_value = "on")]
    include_training: OnOff,
    /// t-test variant: student or welch.
    #[arg(long, default_value = "student")]
    variant: TTestVariant,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// JSON simulation spec.
    #[arg(long)]
    spec: PathBuf,
    /// Overrides the seed in the spec.
    #[arg(long)]
    seed: u64,
    /// Bundle directory to create.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TestName {
    Anova,
    Ttest,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long, value_enum)]
    test: TestName,
    /// t-test variant: student or welch.
    #[arg(long, default_value = "student")]
    variant: TTestVariant,
    /// One file per group, one number per line.
    #[arg(long, required = true, num_args = 1..)]
    groups: Vec<PathBuf>,
}

fn parse_window(s: &str) -> Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("{e}"))?;
    if n < 2 || !n.is_power_of_two() {
        return Err(format!("{n} is not a power of two; the fast transform requires a power-of-two window"));
    }
    Ok(n)
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if !(v > 0.0 && v <= 1.0) {
        return Err(format!("{v} must lie in (0, 1]"));
    }
    Ok(v)
}

/// A failure with its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    fn ingest(path: &Path, e: IngestError) -> Self {
        let code = if e.is_io() { EXIT_IO } else { EXIT_DATA };
        Failure::new(code, format!("{}: {e}", path.display()))
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let pool = match thread_pool() {
        Ok(pool) => pool,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            return f.code;
        }
    };
    let result = pool.install(|| match cli.command {
        Command::Analyze(a) => cmd_analyze(a, stderr),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Stats(a) => cmd_stats(a, stdout, stderr),
    });
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, Failure> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Failure::new(EXIT_USAGE, format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Failure::new(EXIT_IO, format!("cannot start worker threads: {e}")))
}

fn cmd_analyze(args: AnalyzeArgs, stderr: &mut (dyn Write + Send)) -> Result<i32, Failure> {
    if args.hop == 0 || args.hop > args.window {
        return Err(Failure::new(
            EXIT_USAGE,
            format!("--hop {} must be between 1 and the window length {}", args.hop, args.window),
        ));
    }
    let opts = AnalyzeOptions {
        analysis: AnalysisConfig {
            window_len: args.window,
            hop: args.hop,
            window_fn: args.win_fn,
            detrend: args.detrend.is_on(),
            ..AnalysisConfig::default()
        },
        label_threshold: args.label_threshold,
        timing_anchor: args.timing_anchor,
        level: args.level,
        include_training: args.include_training.is_on(),
        ttest_variant: args.variant,
        ..AnalyzeOptions::default()
    };
    let exec = Execution::Parallel;
    let loaded = par::map(exec, &args.sessions, |dir| {
        load_session_with(dir, opts.event_slack, exec).map_err(|e| Failure::ingest(dir, e))
    });
    let mut inputs = Vec::with_capacity(loaded.len());
    for (dir, session) in args.sessions.iter().zip(loaded) {
        inputs.push(SessionInput {
            source: source_name(dir),
            session: session?,
        });
    }

    let report = analyze(&inputs, &opts, exec);
    let text = match args.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    fs::write(&args.out, text).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", args.out.display())))?;
    if report.has_violations() {
        for w in &report.warnings {
            let _ = writeln!(stderr, "{w}");
        }
        return Ok(EXIT_DATA);
    }
    Ok(EXIT_OK)
}

/// The bundle directory's final component, so reports do not depend on
/// where the data lives.
fn source_name(dir: &Path) -> String {
    let trimmed: PathBuf = dir.components().collect();
    trimmed
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

fn cmd_simulate(args: SimulateArgs) -> Result<i32, Failure> {
    let text = fs::read(&args.spec).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", args.spec.display())))?;
    let mut spec: SimSpec =
        serde_json::from_slice(&text).map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", args.spec.display())))?;
    spec.seed = args.seed;
    let record = synth_session(&spec).map_err(|e| Failure::new(EXIT_DATA, e.to_string()))?;
    write_session(&record, &args.out).map_err(|e| Failure::ingest(&args.out, e))?;
    Ok(EXIT_OK)
}

/// Reads one number per non-blank line; `#` starts a comment.
fn read_column(path: &Path) -> Result<Vec<f64>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::new(EXIT_IO, format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| {
            Failure::new(EXIT_DATA, format!("{}:{}: not a number: {line:?}", path.display(), i + 1))
        })?;
        values.push(v);
    }
    Ok(values)
}

fn cmd_stats(args: StatsArgs, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> Result<i32, Failure> {
    let groups = args.groups.iter().map(|p| read_column(p)).collect::<Result<Vec<_>, _>>()?;
    let outcome = match args.test {
        TestName::Anova => anova_oneway(&groups),
        TestName::Ttest => {
            if groups.len() != 2 {
                return Err(Failure::new(
                    EXIT_USAGE,
                    format!("ttest needs exactly two --groups files, got {}", groups.len()),
                ));
            }
            ttest_two_sample(&groups[0], &groups[1], args.variant)
        }
    };
    let print = |out: &mut (dyn Write + Send), r: &gazeload::stats::StatResult| -> Result<(), Failure> {
        let json = serde_json::to_string_pretty(r).expect("result serializes");
        writeln!(out, "{json}").map_err(|e| Failure::new(EXIT_IO, format!("stdout: {e}")))
    };
    match outcome {
        Ok(r) => {
            print(stdout, &r)?;
            Ok(EXIT_OK)
        }
        Err(e) => {
            let sentinel = match &e {
                StatsError::ZeroWithinVariance(r) => Some(r.clone()),
                StatsError::ZeroVariance { sentinel } => sentinel.clone(),
                _ => None,
            };
            if let Some(r) = sentinel {
                print(stdout, &r)?;
            }
            let _ = writeln!(stderr, "error: {e}");
            Ok(EXIT_DEGENERATE)
        }
    }
}
