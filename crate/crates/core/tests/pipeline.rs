use gazeload::ingest::{load_session, write_session};
use gazeload::report::{analyze, AnalyzeOptions, SessionInput};
use gazeload::simgen::{expected_composition, synth_session, Component, SimSpec};
use gazeload::spectral::cognitive_load_series;
use gazeload::{AnalysisConfig, Execution};
use proptest::prelude::*;

fn spec(components: &[(f64, f64)]) -> SimSpec {
    let mut s = SimSpec::new(60.0);
    s.band_components = components.iter().map(|&(freq, amplitude)| Component { freq, amplitude }).collect();
    s.seed = 11;
    s
}

/// Writes the bundle, loads it back and analyzes it.
fn through_disk(spec: &SimSpec) -> gazeload::report::Report {
    let dir = tempfile::tempdir().unwrap();
    write_session(&synth_session(spec).unwrap(), dir.path()).unwrap();
    let session = load_session(dir.path()).unwrap();
    assert!(session.validation.is_valid());
    let input = SessionInput { source: "s".into(), session };
    analyze(&[input], &AnalyzeOptions::default(), Execution::Parallel)
}

fn band_means(report: &gazeload::report::Report) -> Vec<f64> {
    report.sessions[0].load.as_ref().unwrap().mean_band_ratios.clone().unwrap()
}

#[test]
fn pure_beta_and_pure_theta() {
    let beta = synth_session(&spec(&[(20.0, 10.0)])).unwrap();
    let series = cognitive_load_series(&beta.eeg, &AnalysisConfig::default(), Execution::Sequential).unwrap();
    assert!(!series.entries.is_empty());
    assert!(series.entries.iter().all(|e| e.load >= 0.99));

    let theta = synth_session(&spec(&[(6.0, 10.0)])).unwrap();
    let series = cognitive_load_series(&theta.eeg, &AnalysisConfig::default(), Execution::Sequential).unwrap();
    assert!(series.entries.iter().all(|e| e.load <= 0.01));
}

#[test]
fn equal_mix_through_disk() {
    let s = spec(&[(2.0, 5.0), (6.0, 5.0), (10.0, 5.0), (20.0, 5.0)]);
    let means = band_means(&through_disk(&s));
    for (got, want) in means.iter().zip(expected_composition(&s).unwrap().fractions) {
        assert!((got - want).abs() <= 0.02, "{got} vs {want}");
    }
}

#[test]
fn silence_drops_every_window() {
    let s = spec(&[]);
    let rec = synth_session(&s).unwrap();
    let series = cognitive_load_series(&rec.eeg, &AnalysisConfig::default(), Execution::Sequential).unwrap();
    assert!(series.entries.is_empty());
    assert_eq!(series.dropped, 14);
    assert!(expected_composition(&s).is_err());
}

#[test]
fn bundles_are_byte_identical() {
    let mut s = spec(&[(10.0, 3.0), (20.0, 1.0)]);
    s.noise_sigma = 0.7;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_session(&synth_session(&s).unwrap(), a.path()).unwrap();
    write_session(&synth_session(&s).unwrap(), b.path()).unwrap();
    for name in ["meta.json", "eeg.csv", "events.csv"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
    }
}

/// On-bin frequencies (multiples of 1/8 Hz) at least 1 Hz from every band
/// edge, so window leakage stays inside the band.
fn on_bin_freq() -> impl Strategy<Value = f64> {
    (8u32..504)
        .prop_map(|k| k as f64 / 8.0)
        .prop_filter("near a band edge", |f| [4.0, 8.0, 14.0].iter().all(|edge| (f - edge).abs() >= 1.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn load_recovers_expected_beta(components in prop::collection::vec((on_bin_freq(), 0.5f64..20.0), 1..5), seed in any::<u64>()) {
        let mut s = spec(&components);
        s.duration = 32.0;
        s.channels = 4;
        s.seed = seed;
        let expected = expected_composition(&s).unwrap();
        let rec = synth_session(&s).unwrap();
        let series = cognitive_load_series(&rec.eeg, &AnalysisConfig::default(), Execution::Parallel).unwrap();
        let mean = series.mean_load().unwrap();
        prop_assert!((mean - expected.fraction("Beta").unwrap()).abs() <= 0.02, "{mean} vs {:?}", expected);
        let ratios = series.mean_band_ratios().unwrap();
        for (got, want) in ratios.iter().zip(&expected.fractions) {
            prop_assert!((got - want).abs() <= 0.02);
        }
    }
}
