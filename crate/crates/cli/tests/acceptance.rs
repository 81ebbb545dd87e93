//! Acceptance checks, one line per criterion.

#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use gazeload::ingest::write_session;
use gazeload::metrics::{backspace_count, keystrokes_saved_pct, kspc, sentence_metrics, Scope, TimingAnchor};
use gazeload::model::{validate_session, DEFAULT_EVENT_SLACK};
use gazeload::simgen::{study_specs, synth_session, Component, SimSpec, SplitMix64, StudyDesign};
use gazeload::spectral::{band_ratios, default_bands, dft, dft_real};
use gazeload::stats::{anova_oneway, ttest_two_sample, TTestVariant};
use gazeload::{Event, EventKind, EventLog, KeyClass, SessionMeta, SessionRecord, WindowFn};
use num_complex::Complex64;
use serde_json::Value;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = gazeload_cli::run(std::iter::once("gazeload").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8_lossy(&err).into_owned())
}

fn s(p: &Path) -> &str {
    p.to_str().expect("UTF-8 temp path")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).expect("report exists")).expect("report is JSON")
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(1);
    let mut worst: f64 = 0.0;
    for e in 2..=10 {
        let n = 1usize << e;
        for _ in 0..100 {
            let x: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.uniform() * 2.0 - 1.0, rng.uniform() * 2.0 - 1.0))
                .collect();
            worst = worst.max(oracle::rel_err_inf(&dft(&x, 128.0).coeffs, &oracle::naive_dft(&x)));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst <= 1e-9, format!("max relative error {worst:e}"))?;
    check(secs < 10.0, format!("took {secs:.2} s"))?;
    Ok(format!("max relative error {worst:.1e} over N = 4..1024, {secs:.2} s"))
}

fn criterion_2() -> Outcome {
    let mut rng = SplitMix64::new(2);
    let bands = default_bands(128.0);
    let kinds = [WindowFn::HalfCosine, WindowFn::Hann, WindowFn::Rect];
    let (mut parseval, mut ratio_sum): (f64, f64) = (0.0, 0.0);
    for i in 0..1000 {
        let coeffs = kinds[i % 3].coefficients(1024);
        let scale = 10f64.powi((i % 7) as i32 - 3);
        let x: Vec<f64> = coeffs.iter().map(|w| w * scale * rng.normal()).collect();
        let spec = dft_real(&x, 128.0);
        let freq: f64 = spec.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() / 1024.0;
        let time: f64 = x.iter().map(|v| v * v).sum();
        parseval = parseval.max((freq - time).abs() / time);
        let r = band_ratios(&spec, &bands).map_err(|e| e.to_string())?;
        ratio_sum = ratio_sum.max((r.iter().sum::<f64>() - 1.0).abs());
    }
    check(parseval <= 1e-9, format!("Parseval relative error {parseval:e}"))?;
    check(ratio_sum <= 1e-12, format!("band ratios sum off by {ratio_sum:e}"))?;
    Ok(format!("1000 windows: Parseval {parseval:.1e}, ratio sum {ratio_sum:.1e}"))
}

fn spec_file(dir: &Path, name: &str, spec: &SimSpec) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(spec).unwrap()).unwrap();
    path
}

fn noiseless(components: &[f64]) -> SimSpec {
    let mut spec = SimSpec::new(64.0);
    spec.band_components = components.iter().map(|&freq| Component { freq, amplitude: 8.0 }).collect();
    spec
}

fn criterion_3() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cases: [(&str, &[f64]); 3] = [("beta", &[20.0]), ("theta", &[6.0]), ("mix", &[2.0, 6.0, 10.0, 20.0])];
    let mut notes = Vec::new();
    for (name, components) in cases {
        let spec = spec_file(tmp.path(), &format!("{name}.json"), &noiseless(components));
        let bundle = tmp.path().join(name);
        let report = tmp.path().join(format!("{name}.report.json"));
        let (code, err) = cli(&["simulate", "--spec", s(&spec), "--seed", "3", "--out", s(&bundle)]);
        check(code == 0, format!("simulate {name}: exit {code}: {err}"))?;
        let (code, err) = cli(&["analyze", "--session", s(&bundle), "--out", s(&report), "--format", "json"]);
        check(code == 0, format!("analyze {name}: exit {code}: {err}"))?;
        let load = &read_json(&report)["sessions"][0]["load"];
        let min = load["min_load"].as_f64().unwrap();
        let max = load["max_load"].as_f64().unwrap();
        let ratios: Vec<f64> = load["mean_band_ratios"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        match name {
            "beta" => {
                check(min >= 0.99, format!("20 Hz: minimum window load {min}"))?;
                notes.push(format!("20 Hz min {min:.4}"));
            }
            "theta" => {
                check(max <= 0.01, format!("6 Hz: maximum window load {max}"))?;
                notes.push(format!("6 Hz max {max:.1e}"));
            }
            _ => {
                let off = ratios.iter().map(|r| (r - 0.25).abs()).fold(0.0, f64::max);
                check(off <= 0.02, format!("mix: band ratios {ratios:?}"))?;
                notes.push(format!("mix max |ratio − 0.25| {off:.1e}"));
            }
        }
    }
    Ok(notes.join(", "))
}

fn group_stats(report: &Value) -> Vec<(String, usize, f64)> {
    report["groupings"]
        .as_array()
        .unwrap()
        .iter()
        .find(|g| g["by"] == "keyboard")
        .unwrap()["groups"]
        .as_array()
        .unwrap()
        .iter()
        .map(|g| {
            (
                g["keyboard"].as_str().unwrap().to_string(),
                g["summary"]["n"].as_u64().unwrap() as usize,
                g["summary"]["mean"].as_f64().unwrap(),
            )
        })
        .collect()
}

fn test_p(report: &Value, name: &str) -> Result<(f64, f64), String> {
    let t = report["tests"]
        .as_array()
        .unwrap()
        .iter()
        .find(|t| t["name"] == name)
        .ok_or(format!("no test {name}"))?;
    let r = &t["result"];
    Ok((r["p"].as_f64().ok_or(format!("{name} has no p"))?, r["df"][0].as_f64().unwrap()))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut dirs = Vec::new();
    for spec in study_specs(&StudyDesign::default()) {
        let dir = tmp.path().join(format!("{}_{}_{}", spec.participant_id, spec.keyboard, spec.session_index));
        write_session(&synth_session(&spec).map_err(|e| e.to_string())?, &dir).map_err(|e| e.to_string())?;
        dirs.push(dir);
    }
    let out = tmp.path().join("study.json");
    let mut args = vec!["analyze", "--out", s(&out), "--level", "sentence", "--session"];
    args.extend(dirs.iter().map(|d| s(d)));
    let (code, err) = cli(&args);
    check(code == 0, format!("analyze exit {code}: {err}"))?;
    let report = read_json(&out);
    let groups = group_stats(&report);
    let mean = |k: &str| groups.iter().find(|g| g.0 == k).map(|g| g.2).unwrap();
    check(groups.iter().all(|g| g.1 == 150), format!("group sizes {groups:?}"))?;
    let (a, b, c) = (mean("A"), mean("B"), mean("C"));
    for (got, want, k) in [(a, 0.0865, "A"), (b, 0.0860, "B"), (c, 0.0824, "C")] {
        check((got - want).abs() <= 0.005, format!("mean {k} = {got}, imposed {want}"))?;
    }
    check(c < b && b <= a, format!("ordering violated: A {a}, B {b}, C {c}"))?;
    let (p_ac, df) = test_p(&report, "load_ttest_A_C")?;
    let (p_bc, _) = test_p(&report, "load_ttest_B_C")?;
    check(df == 298.0, format!("t df {df}"))?;
    check(p_ac < 0.05 && p_bc < 0.05, format!("p(A,C) = {p_ac}, p(B,C) = {p_bc}"))?;
    let secs = start.elapsed().as_secs_f64();
    check(secs < 60.0, format!("took {secs:.1} s"))?;
    Ok(format!(
        "means A {a:.5} B {b:.5} C {c:.5}, p(A,C) {p_ac:.2e}, p(B,C) {p_bc:.2e}, df 298, {secs:.1} s"
    ))
}

struct MetricCase {
    shown: f64,
    submit: f64,
    keys: Vec<(KeyClass, &'static str)>,
    text: &'static str,
    wpm: f64,
    saved: Option<f64>,
    kspc: Option<f64>,
    backspaces: usize,
}

#[allow(clippy::too_many_arguments)]
fn mc(
    shown: f64,
    submit: f64,
    keys: Vec<(KeyClass, &'static str)>,
    text: &'static str,
    wpm: f64,
    saved: Option<f64>,
    kspc: Option<f64>,
    backspaces: usize,
) -> MetricCase {
    MetricCase {
        shown,
        submit,
        keys,
        text,
        wpm,
        saved,
        kspc,
        backspaces,
    }
}

/// Twenty single-sentence logs with their metrics worked out by hand.
fn metric_cases() -> Vec<MetricCase> {
    use KeyClass::{Bksp as B, Insert as I, Sugg as S};
    let letters = |word: &'static str| -> Vec<(KeyClass, &'static str)> {
        (0..word.len()).map(|i| (I, &word[i..i + 1])).collect()
    };
    vec![
        mc(0.0, 10.0, letters("hello"), "hello", 4.8, Some(0.0), Some(1.0), 0),
        mc(0.0, 12.0, vec![(I, "t"), (I, "h"), (S, "e "), (I, "c"), (S, "at")], "the cat", 6.0, Some(200.0 / 7.0), Some(5.0 / 7.0), 0),
        mc(1.0, 4.0, vec![(I, "a")], "a", 0.0, Some(0.0), Some(1.0), 0),
        mc(0.0, 4.0, vec![(I, "a"), (I, "x"), (B, ""), (I, "b")], "ab", 3.0, Some(-100.0), Some(2.0), 1),
        mc(0.0, 6.0, vec![(S, "hello "), (S, "world")], "hello world", 20.0, Some(900.0 / 11.0), Some(2.0 / 11.0), 0),
        mc(0.5, 3.0, vec![(I, "é"), (I, "t"), (I, "é")], "été", 9.6, Some(0.0), Some(1.0), 0),
        mc(0.0, 8.0, vec![(S, "hello"), (B, "")], "hell", 4.5, Some(50.0), Some(0.5), 1),
        mc(0.0, 5.0, vec![(I, "a"), (I, "b"), (B, ""), (B, ""), (I, "c")], "c", 0.0, Some(-400.0), Some(5.0), 2),
        mc(0.0, 30.0, vec![(S, "ab"); 13], "abababababababababababababab"[..26].as_ref(), 10.0, Some(50.0), Some(0.5), 0),
        mc(0.0, 1.0, vec![(B, ""), (I, "x"), (I, "y")], "xy", 12.0, Some(-50.0), Some(1.5), 1),
        mc(2.25, 14.75, letters("quick"), "quick", 3.84, Some(0.0), Some(1.0), 0),
        mc(0.0, 6.0, vec![(I, "a"), (I, " "), (I, "b")], "a b", 4.0, Some(0.0), Some(1.0), 0),
        mc(0.0, 16.0, vec![(I, "c"), (I, "o"), (S, "mputer")], "computer", 5.25, Some(62.5), Some(0.375), 0),
        mc(0.0, 20.0, vec![(I, "a"), (S, "bcde"), (I, "f"), (S, "ghij")], "abcdefghij", 5.4, Some(60.0), Some(0.4), 0),
        mc(0.0, 9.0, vec![(I, "\""), (S, "hi, "), (I, "\"")], "\"hi, \"", 20.0 / 3.0, Some(50.0), Some(0.5), 0),
        mc(0.0, 2.0, vec![(B, "")], "", 0.0, None, None, 1),
        mc(3.0, 4.5, vec![], "", 0.0, None, None, 0),
        mc(0.0, 60.0, vec![(I, "a"); 51], "aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa", 10.0, Some(0.0), Some(1.0), 0),
        mc(0.0, 7.5, vec![(S, "hello "), (B, ""), (B, ""), (I, "p")], "hellp", 6.4, Some(20.0), Some(0.8), 2),
        mc(0.0, 4.0, vec![(I, "日"), (S, "本語")], "日本語", 6.0, Some(100.0 / 3.0), Some(2.0 / 3.0), 0),
    ]
}

fn case_log(c: &MetricCase) -> EventLog {
    let mut events = vec![
        Event::new(0.0, EventKind::SessionStart),
        Event::new(c.shown, EventKind::SentenceShown("prompt".into())),
    ];
    let step = (c.submit - c.shown) / (c.keys.len() + 1) as f64;
    for (i, &(class, produced)) in c.keys.iter().enumerate() {
        events.push(Event::key(c.shown + step * (i + 1) as f64, class, produced));
    }
    events.push(Event::new(c.submit, EventKind::SentenceSubmit(c.text.into())));
    events.push(Event::new(c.submit + 1.0, EventKind::SessionEnd));
    EventLog::new(events)
}

fn criterion_5() -> Outcome {
    let cases = metric_cases();
    check(cases.len() == 20, "expected 20 cases")?;
    for (i, c) in cases.iter().enumerate() {
        let log = case_log(c);
        let rec = SessionRecord {
            meta: SessionMeta::new("P", gazeload::Keyboard::A, 1),
            eeg: gazeload::EegRecording {
                t0: 0.0,
                fs: 128.0,
                channels: vec![vec![0.0; 128 * 80]; 14],
            },
            events: log.clone(),
            gaze: None,
        };
        let v = validate_session(&rec, DEFAULT_EVENT_SLACK);
        check(v.is_valid(), format!("case {}: {:?}", i + 1, v.violations))?;
        let span = &log.sentences()[0];
        let m = sentence_metrics(&log, span, TimingAnchor::Shown).map_err(|e| e.to_string())?;
        check(m.wpm == c.wpm, format!("case {}: wpm {} != {}", i + 1, m.wpm, c.wpm))?;
        check(keystrokes_saved_pct(&log, 0).ok() == c.saved, format!("case {}: saved {:?} != {:?}", i + 1, keystrokes_saved_pct(&log, 0), c.saved))?;
        check(kspc(&log, 0).ok() == c.kspc, format!("case {}: kspc {:?} != {:?}", i + 1, kspc(&log, 0), c.kspc))?;
        let b = backspace_count(&log, Scope::Session).map_err(|e| e.to_string())?;
        check(b == c.backspaces && m.backspace_count == c.backspaces, format!("case {}: backspaces {b}", i + 1))?;
    }
    let mut rng = SplitMix64::new(5);
    let groups: Vec<Vec<f64>> = (0..3).map(|_| (0..5).map(|_| rng.normal()).collect()).collect();
    let f = anova_oneway(&groups).map_err(|e| e.to_string())?;
    check(f.df == vec![2.0, 12.0], format!("ANOVA df {:?}", f.df))?;
    let a: Vec<f64> = (0..150).map(|_| rng.normal()).collect();
    let b: Vec<f64> = (0..150).map(|_| rng.normal()).collect();
    let t = ttest_two_sample(&a, &b, TTestVariant::Student).map_err(|e| e.to_string())?;
    check(t.df == vec![298.0], format!("t df {:?}", t.df))?;
    Ok("20 hand-scripted logs exact; F df (2, 12); t df 298".into())
}

fn criterion_6() -> Outcome {
    let mut rng = SplitMix64::new(6);
    let (mut stat_err, mut p_err): (f64, f64) = (0.0, 0.0);
    for i in 0..300 {
        let g = 2 + i % 4;
        let groups: Vec<Vec<f64>> = (0..g)
            .map(|k| {
                let n = 2 + (rng.uniform() * 30.0) as usize;
                let shift = rng.normal() * 0.5 + k as f64 * 0.1;
                (0..n).map(|_| shift + rng.normal()).collect()
            })
            .collect();
        let r = anova_oneway(&groups).map_err(|e| e.to_string())?;
        let (f, d1, d2) = oracle::anova_brute(&groups);
        stat_err = stat_err.max((r.statistic - f).abs() / f.abs());
        p_err = p_err.max((r.p - oracle::f_upper(f, d1, d2)).abs());

        for (variant, brute) in [
            (TTestVariant::Student, oracle::student_brute as fn(&[f64], &[f64]) -> (f64, f64)),
            (TTestVariant::Welch, oracle::welch_brute),
        ] {
            let t = ttest_two_sample(&groups[0], &groups[1], variant).map_err(|e| e.to_string())?;
            let (bt, df) = brute(&groups[0], &groups[1]);
            stat_err = stat_err.max((t.statistic - bt).abs() / bt.abs());
            p_err = p_err.max((t.p - oracle::t_two_sided(bt, df)).abs());
        }
    }
    check(stat_err <= 1e-9, format!("statistic relative error {stat_err:e}"))?;
    check(p_err <= 1e-6, format!("p-value error {p_err:e}"))?;
    Ok(format!("300 designs: statistic rel err {stat_err:.1e}, p abs err {p_err:.1e}"))
}

fn files_under(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_7() -> Outcome {
    let design = StudyDesign {
        participants: 1,
        sessions_per_keyboard: 2,
        ..StudyDesign::default()
    };
    let specs = study_specs(&design);
    let run = |root: &Path| -> Result<(), String> {
        let mut dirs = Vec::new();
        for (i, spec) in specs.iter().enumerate() {
            let file = spec_file(root, &format!("spec{i}.json"), spec);
            let dir = root.join(format!("session{i}"));
            let seed = (1000 + i).to_string();
            let (code, err) = cli(&["simulate", "--spec", s(&file), "--seed", &seed, "--out", s(&dir)]);
            check(code == 0, format!("simulate exit {code}: {err}"))?;
            dirs.push(dir);
        }
        for format in ["json", "csv"] {
            let out = root.join(format!("report.{format}"));
            let mut args = vec!["analyze", "--format", format, "--out", s(&out), "--session"];
            args.extend(dirs.iter().map(|d| s(d)));
            let (code, err) = cli(&args);
            check(code == 0, format!("analyze exit {code}: {err}"))?;
        }
        Ok(())
    };
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    run(a.path())?;
    run(b.path())?;
    let (fa, fb) = (files_under(a.path()), files_under(b.path()));
    check(fa.len() == fb.len(), "different file sets")?;
    for ((pa, da), (pb, db)) in fa.iter().zip(&fb) {
        check(pa == pb && da == db, format!("{} differs", pa.display()))?;
    }
    Ok(format!("{} files byte-identical across two runs", fa.len()))
}

fn criterion_8() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let design = StudyDesign {
        participants: 1,
        sessions_per_keyboard: 5,
        sentences_per_session: 4,
        ..StudyDesign::default()
    };
    let mut dirs = Vec::new();
    let mut samples = 0;
    for mut spec in study_specs(&design) {
        check(spec.duration <= 180.0, format!("script longer than 3 min: {}", spec.duration))?;
        spec.duration = 180.0;
        let rec = synth_session(&spec).map_err(|e| e.to_string())?;
        samples += rec.eeg.n_samples() * rec.eeg.n_channels();
        let dir = tmp.path().join(format!("{}_{}", spec.keyboard, spec.session_index));
        write_session(&rec, &dir).map_err(|e| e.to_string())?;
        dirs.push(dir);
    }
    check(dirs.len() == 15, "expected 15 sessions")?;
    let timed = |threads: Option<&str>, out: &Path| -> Result<f64, String> {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_gazeload"));
        cmd.args(["analyze", "--out", s(out), "--session"]).args(&dirs);
        match threads {
            Some(n) => cmd.env("GTL_THREADS", n),
            None => cmd.env_remove("GTL_THREADS"),
        };
        let start = Instant::now();
        let status = cmd.status().map_err(|e| e.to_string())?;
        let secs = start.elapsed().as_secs_f64();
        check(status.success(), format!("analyze exited with {status}"))?;
        Ok(secs)
    };
    let single = tmp.path().join("single.json");
    let multi = tmp.path().join("multi.json");
    let secs = timed(Some("1"), &single)?;
    let par_secs = timed(None, &multi)?;
    check(secs < 5.0, format!("single-threaded analyze took {secs:.2} s"))?;
    check(std::fs::read(&single).unwrap() == std::fs::read(&multi).unwrap(), "parallel report differs")?;
    Ok(format!(
        "15 sessions ({samples} samples): {secs:.2} s on one thread, {par_secs:.2} s parallel, identical reports"
    ))
}

fn main() {
    let criteria: [Check; 8] = [
        ("transform matches direct evaluation", criterion_1),
        ("Parseval and band-ratio closure", criterion_2),
        ("end-to-end spectral recovery", criterion_3),
        ("study-shaped synthetic reproduction", criterion_4),
        ("metrics exactness", criterion_5),
        ("statistics oracle", criterion_6),
        ("determinism", criterion_7),
        ("performance", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(f) {
            Ok(Ok(detail)) => println!("criterion {} ({name}): PASS: {detail}", i + 1),
            Ok(Err(detail)) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL: {detail}", i + 1);
            }
            Err(_) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL: panicked", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
