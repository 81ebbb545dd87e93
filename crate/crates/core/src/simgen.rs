//! Deterministic synthetic sessions with a known band composition.
//!
//! Every channel is a sum of sinusoids with random phases plus optional
//! white Gaussian noise. Randomness comes from SplitMix64:
//!
//! ```text
//! state ← state + 0x9E3779B97F4A7C15
//! z ← (state ⊕ (state ≫ 30)) · 0xBF58476D1CE4E5B9
//! z ← (z ⊕ (z ≫ 27)) · 0x94D049BB133111EB
//! output z ⊕ (z ≫ 31)
//! ```
//!
//! Uniforms take the top 53 bits; normals use Box-Muller. Channel `c`
//! draws from its own generator seeded with the `c`-th output of a root
//! generator seeded with the spec's seed, so channels can be generated in
//! any order.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    EegRecording, Event, EventKind, EventLog, GazeSample, KeyClass, Keyboard, SessionMeta, SessionRecord,
    DEFAULT_CHANNELS,
};
use crate::par::{self, Execution};
use crate::spectral::{default_bands, Band};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation spec: {0}")]
    SpecInvalid(String),
    #[error("invalid event script: {0}")]
    ScriptInvalid(String),
    #[error("component at {freq} Hz sits on a band boundary")]
    BoundaryFrequency { freq: f64 },
}

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
    spare_normal: Option<f64>,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 {
            state: seed,
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller; the second variate is cached.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        self.spare_normal = Some(r * s);
        r * c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub freq: f64,
    /// Peak amplitude, µV.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedKey {
    /// Seconds after the previous keystroke (or after SHOWN).
    pub dt: f64,
    pub class: KeyClass,
    #[serde(default)]
    pub produced: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedSentence {
    pub shown_t: f64,
    /// Prompt text; defaults to what the keystrokes produce.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub keystrokes: Vec<ScriptedKey>,
    /// Seconds from the last keystroke to SUBMIT; defaults to the spec's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submit_delay: Option<f64>,
}

fn default_fs() -> f64 {
    128.0
}
fn default_channels() -> usize {
    14
}
fn default_participant() -> String {
    "P1".to_string()
}
fn default_keyboard() -> Keyboard {
    Keyboard::A
}
fn default_session() -> u32 {
    1
}
fn default_submit_delay() -> f64 {
    1.0
}

/// Everything needed to generate one session bundle. The JSON form mirrors
/// these fields; only `duration` is required.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub duration: f64,
    #[serde(default = "default_fs")]
    pub fs: f64,
    #[serde(default = "default_channels")]
    pub channels: usize,
    #[serde(default)]
    pub band_components: Vec<Component>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub event_script: Vec<ScriptedSentence>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_participant")]
    pub participant_id: String,
    #[serde(default = "default_keyboard")]
    pub keyboard: Keyboard,
    #[serde(default = "default_session")]
    pub session_index: u32,
    #[serde(default = "default_submit_delay")]
    pub submit_delay: f64,
    /// Rate of constant dummy gaze samples; no gaze stream when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaze_rate: Option<f64>,
}

impl SimSpec {
    /// A spec with defaults and no components or script.
    pub fn new(duration: f64) -> Self {
        SimSpec {
            duration,
            fs: default_fs(),
            channels: default_channels(),
            band_components: Vec::new(),
            noise_sigma: 0.0,
            event_script: Vec::new(),
            seed: 0,
            participant_id: default_participant(),
            keyboard: default_keyboard(),
            session_index: default_session(),
            submit_delay: default_submit_delay(),
            gaze_rate: None,
        }
    }

    pub fn n_samples(&self) -> usize {
        (self.duration * self.fs).round() as usize
    }

    pub fn channel_names(&self) -> Vec<String> {
        if self.channels == DEFAULT_CHANNELS.len() {
            DEFAULT_CHANNELS.iter().map(|s| s.to_string()).collect()
        } else {
            (1..=self.channels).map(|c| format!("CH{c}")).collect()
        }
    }

    fn check(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::SpecInvalid(m));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return bad(format!("fs must be positive, got {}", self.fs));
        }
        if self.channels == 0 {
            return bad("at least one channel is required".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be non-negative, got {}", self.noise_sigma));
        }
        for c in &self.band_components {
            if !(c.freq >= 0.0 && c.freq < self.fs / 2.0) {
                return bad(format!("component frequency {} Hz must lie in [0, {})", c.freq, self.fs / 2.0));
            }
            if !(c.amplitude >= 0.0 && c.amplitude.is_finite()) {
                return bad(format!("component amplitude {} must be non-negative", c.amplitude));
            }
        }
        if let Some(rate) = self.gaze_rate {
            if !(rate > 0.0 && rate.is_finite()) {
                return bad(format!("gaze_rate must be positive, got {rate}"));
            }
        }
        Ok(())
    }
}

/// Generates the EEG of `spec`, channels in parallel.
pub fn synth_eeg(spec: &SimSpec) -> Result<EegRecording, SimError> {
    synth_eeg_with(spec, Execution::Parallel)
}

pub fn synth_eeg_with(spec: &SimSpec, exec: Execution) -> Result<EegRecording, SimError> {
    spec.check()?;
    let mut root = SplitMix64::new(spec.seed);
    let seeds: Vec<u64> = (0..spec.channels).map(|_| root.next_u64()).collect();
    let n = spec.n_samples();
    let channels = par::map(exec, &seeds, |&seed| {
        let mut rng = SplitMix64::new(seed);
        let phases: Vec<f64> = spec.band_components.iter().map(|_| 2.0 * PI * rng.uniform()).collect();
        (0..n)
            .map(|i| {
                let t = i as f64 / spec.fs;
                let mut x = 0.0;
                for (c, phase) in spec.band_components.iter().zip(&phases) {
                    x += c.amplitude * (2.0 * PI * c.freq * t + phase).sin();
                }
                if spec.noise_sigma > 0.0 {
                    x += spec.noise_sigma * rng.normal();
                }
                x
            })
            .collect()
    });
    Ok(EegRecording {
        t0: 0.0,
        fs: spec.fs,
        channels,
    })
}

/// Builds the event log of `spec`'s script. SUBMIT carries the text the
/// keystrokes produce.
pub fn synth_events(spec: &SimSpec) -> Result<EventLog, SimError> {
    let bad = |m: String| Err(SimError::ScriptInvalid(m));
    let mut events = vec![Event::new(0.0, EventKind::SessionStart)];
    let mut last = 0.0;
    for (i, sentence) in spec.event_script.iter().enumerate() {
        if !(sentence.shown_t >= last) {
            return bad(format!("sentence {i} is shown at {} before {last}", sentence.shown_t));
        }
        let mut text = String::new();
        let mut t = sentence.shown_t;
        let mut keys = Vec::with_capacity(sentence.keystrokes.len());
        for k in &sentence.keystrokes {
            if !(k.dt >= 0.0 && k.dt.is_finite()) {
                return bad(format!("sentence {i}: keystroke dt {} must be non-negative", k.dt));
            }
            t += k.dt;
            match k.class {
                KeyClass::Bksp => {
                    text.pop();
                }
                KeyClass::Insert | KeyClass::Sugg => text.push_str(&k.produced),
            }
            keys.push(Event::key(t, k.class, k.produced.clone()));
        }
        let delay = sentence.submit_delay.unwrap_or(spec.submit_delay);
        if !(delay >= 0.0 && delay.is_finite()) {
            return bad(format!("sentence {i}: submit delay {delay} must be non-negative"));
        }
        let submit = t + delay;
        events.push(Event::new(
            sentence.shown_t,
            EventKind::SentenceShown(sentence.text.clone().unwrap_or_else(|| text.clone())),
        ));
        events.extend(keys);
        events.push(Event::new(submit, EventKind::SentenceSubmit(text)));
        last = submit;
    }
    if last > spec.duration {
        return bad(format!("script ends at {last} s, after the {} s session", spec.duration));
    }
    events.push(Event::new(spec.duration, EventKind::SessionEnd));
    Ok(EventLog::new(events))
}

/// Noiseless band-power fractions implied by the components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectedComposition {
    pub bands: Vec<String>,
    pub fractions: Vec<f64>,
}

impl ExpectedComposition {
    pub fn fraction(&self, band: &str) -> Option<f64> {
        self.bands.iter().position(|b| b == band).map(|i| self.fractions[i])
    }
}

/// Expected composition over the default bands at `spec.fs`.
pub fn expected_composition(spec: &SimSpec) -> Result<ExpectedComposition, SimError> {
    expected_composition_for(spec, &default_bands(spec.fs))
}

/// Each band's share of `Σ amplitude²/2`. Components exactly on a band
/// edge are rejected.
pub fn expected_composition_for(spec: &SimSpec, bands: &[Band]) -> Result<ExpectedComposition, SimError> {
    spec.check()?;
    let mut power = vec![0.0; bands.len()];
    for c in &spec.band_components {
        if bands.iter().any(|b| (c.freq == b.f1 && b.f1 > 0.0) || c.freq == b.f2) {
            return Err(SimError::BoundaryFrequency { freq: c.freq });
        }
        let band = bands
            .iter()
            .position(|b| c.freq >= b.f1 && c.freq < b.f2)
            .ok_or_else(|| SimError::SpecInvalid(format!("{} Hz is not covered by any band", c.freq)))?;
        power[band] += c.amplitude * c.amplitude / 2.0;
    }
    let total: f64 = power.iter().sum();
    if !(total > 0.0) {
        return Err(SimError::SpecInvalid("components carry no power".into()));
    }
    Ok(ExpectedComposition {
        bands: bands.iter().map(|b| b.name.clone()).collect(),
        fractions: power.iter().map(|p| p / total).collect(),
    })
}

/// Metadata, EEG, events and (if requested) dummy gaze for `spec`.
pub fn synth_session(spec: &SimSpec) -> Result<SessionRecord, SimError> {
    let eeg = synth_eeg(spec)?;
    let events = synth_events(spec)?;
    let gaze = spec.gaze_rate.map(|rate| {
        let n = (spec.duration * rate).floor() as usize;
        (0..n)
            .map(|i| GazeSample {
                t: i as f64 / rate,
                x: 960.0,
                y: 540.0,
                valid: true,
            })
            .collect()
    });
    let meta = SessionMeta {
        participant_id: spec.participant_id.clone(),
        keyboard: spec.keyboard,
        session_index: spec.session_index,
        fs_eeg: spec.fs,
        channel_names: spec.channel_names(),
    };
    Ok(SessionRecord { meta, eeg, events, gaze })
}

/// Shape of a multi-participant synthetic study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyDesign {
    pub participants: usize,
    /// Sessions per keyboard, including the training session (index 0).
    pub sessions_per_keyboard: u32,
    pub sentences_per_session: usize,
    /// Imposed mean beta fraction per keyboard.
    pub beta_means: Vec<(Keyboard, f64)>,
    /// Standard deviation of the per-session beta fraction around its mean.
    pub session_sd: f64,
    pub noise_sigma: f64,
    /// Total sinusoid power per channel is `amplitude_scale² / 2`.
    pub amplitude_scale: f64,
    pub seed: u64,
}

impl Default for StudyDesign {
    fn default() -> Self {
        StudyDesign {
            participants: 5,
            sessions_per_keyboard: 6,
            sentences_per_session: 5,
            beta_means: vec![(Keyboard::A, 0.0865), (Keyboard::B, 0.0860), (Keyboard::C, 0.0824)],
            session_sd: 0.00025,
            noise_sigma: 0.2,
            amplitude_scale: 10.0,
            seed: 2017,
        }
    }
}

const PHRASES: [&str; 12] = [
    "the early bird catches the worm",
    "my watch fell in the water",
    "prevailing wind from the east",
    "never too rich and never too thin",
    "breathing is difficult today",
    "a picture is worth many words",
    "the dog will bark at the mailman",
    "we are subject to many rules",
    "all work and no play makes dull",
    "elephants are afraid of mice",
    "the library is closed on sundays",
    "the sun rises over the quiet hills",
];

/// Keystrokes that type `phrase`: a couple of letters per word, then a
/// suggestion completing the word, with an occasional corrected typo.
fn type_phrase(phrase: &str, rng: &mut SplitMix64) -> Vec<ScriptedKey> {
    let mut keys = Vec::new();
    let mut key = |rng: &mut SplitMix64, class: KeyClass, produced: String| {
        keys.push(ScriptedKey {
            dt: 0.8 + 0.8 * rng.uniform(),
            class,
            produced,
        });
    };
    let words: Vec<&str> = phrase.split(' ').collect();
    for (w, word) in words.iter().enumerate() {
        let chars: Vec<char> = word.chars().collect();
        let typed = if chars.len() <= 3 { chars.len() } else { 2 + (rng.uniform() * 2.0) as usize };
        for (i, ch) in chars.iter().take(typed).enumerate() {
            if i == 1 && rng.uniform() < 0.1 {
                key(rng, KeyClass::Insert, "x".into());
                key(rng, KeyClass::Bksp, String::new());
            }
            key(rng, KeyClass::Insert, ch.to_string());
        }
        let mut rest: String = chars[typed..].iter().collect();
        let last = w + 1 == words.len();
        if !last {
            rest.push(' ');
        }
        if !rest.is_empty() {
            let class = if rest == " " { KeyClass::Insert } else { KeyClass::Sugg };
            key(rng, class, rest);
        }
    }
    keys
}

/// One spec per (participant, keyboard, session). Each session draws its
/// beta fraction around the keyboard mean and mixes a 10 Hz alpha and a
/// 20 Hz beta sinusoid in that proportion.
pub fn study_specs(design: &StudyDesign) -> Vec<SimSpec> {
    let mut rng = SplitMix64::new(design.seed);
    let mut out = Vec::new();
    for p in 0..design.participants {
        for &(keyboard, mean) in &design.beta_means {
            for session in 0..design.sessions_per_keyboard {
                let fraction = (mean + design.session_sd * rng.normal()).clamp(0.0, 1.0);
                let a = design.amplitude_scale;
                let mut script = Vec::new();
                let mut t = 16.0;
                for s in 0..design.sentences_per_session {
                    let phrase = PHRASES[(p * 7 + session as usize * 3 + s) % PHRASES.len()];
                    let keystrokes = type_phrase(phrase, &mut rng);
                    let typing: f64 = keystrokes.iter().map(|k| k.dt).sum();
                    script.push(ScriptedSentence {
                        shown_t: t,
                        text: Some(phrase.to_string()),
                        keystrokes,
                        submit_delay: Some(1.5),
                    });
                    t += typing + 1.5 + 3.0;
                }
                let mut spec = SimSpec::new((t + 4.0).ceil());
                spec.band_components = vec![
                    Component {
                        freq: 10.0,
                        amplitude: a * (1.0 - fraction).sqrt(),
                    },
                    Component {
                        freq: 20.0,
                        amplitude: a * fraction.sqrt(),
                    },
                ];
                spec.noise_sigma = design.noise_sigma;
                spec.event_script = script;
                spec.seed = rng.next_u64();
                spec.participant_id = format!("P{}", p + 1);
                spec.keyboard = keyboard;
                spec.session_index = session;
                out.push(spec);
            }
        }
    }
    out
}
