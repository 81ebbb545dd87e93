//! Short-time spectral analysis of EEG and the beta-ratio load index.
//!
//! Each channel is cut into windows of `window_len` samples advancing by
//! `hop`, mean-removed (optional), tapered and transformed. Band power is
//! `P = (1/N)·Σ|C_k|²` over the one-sided bins `⌊f1·N/Fs⌋ ≤ k < ⌊f2·N/Fs⌋`
//! (the top band also takes the Nyquist bin), and a band's ratio is its
//! power over the sum of all band powers. The load of a window is the
//! load band's ratio (Beta by default) averaged over channels.
//!
//! All reductions run in a fixed order (ascending bin, band, channel), so
//! parallel and sequential execution give bitwise-identical output.

mod fft;
mod window;

use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::EegRecording;
use crate::par::{self, Execution};

pub use fft::{dft, dft_real, FftPlan, Spectrum};
pub use window::{apply_window_fn, make_windows, window_count, Window, WindowFn};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("band {name:?} [{f1}, {f2}) lies outside [0, {nyquist}] Hz")]
    BandOutOfRange { name: String, f1: f64, f2: f64, nyquist: f64 },
    #[error("window has zero total power")]
    ZeroPower,
    #[error("invalid analysis configuration: {0}")]
    InvalidConfig(String),
}

/// Frequency band `[f1, f2)` in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub name: String,
    pub f1: f64,
    pub f2: f64,
}

impl Band {
    pub fn new(name: impl Into<String>, f1: f64, f2: f64) -> Self {
        Band {
            name: name.into(),
            f1,
            f2,
        }
    }

    fn check(&self, fs: f64) -> Result<(), SpectralError> {
        let nyquist = fs / 2.0;
        if self.f1 >= 0.0 && self.f1 < self.f2 && self.f2 <= nyquist {
            Ok(())
        } else {
            Err(SpectralError::BandOutOfRange {
                name: self.name.clone(),
                f1: self.f1,
                f2: self.f2,
                nyquist,
            })
        }
    }

    /// One-sided bins of a length-`n` transform that belong to this band.
    /// A band ending at Nyquist includes bin `n/2`.
    pub fn bin_range(&self, n: usize, fs: f64) -> Result<Range<usize>, SpectralError> {
        self.check(fs)?;
        let nyquist_bin = n / 2;
        let lo = (self.f1 * n as f64 / fs).floor() as usize;
        let hi = if self.f2 >= fs / 2.0 {
            nyquist_bin + 1
        } else {
            ((self.f2 * n as f64 / fs).floor() as usize).min(nyquist_bin + 1)
        };
        Ok(lo.min(hi)..hi)
    }
}

/// Delta, Theta, Alpha and Beta, with Beta running up to Nyquist.
pub fn default_bands(fs: f64) -> Vec<Band> {
    vec![
        Band::new("Delta", 0.0, 4.0),
        Band::new("Theta", 4.0, 8.0),
        Band::new("Alpha", 8.0, 14.0),
        Band::new("Beta", 14.0, fs / 2.0),
    ]
}

/// Parameters of the short-time analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub window_len: usize,
    pub hop: usize,
    pub window_fn: WindowFn,
    pub detrend: bool,
    /// `None` selects [`default_bands`] at the recording's rate.
    pub bands: Option<Vec<Band>>,
    /// Name of the band whose ratio is the load index.
    pub load_band: String,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            window_len: 1024,
            hop: 512,
            window_fn: WindowFn::HalfCosine,
            detrend: true,
            bands: None,
            load_band: "Beta".to_string(),
        }
    }
}

impl AnalysisConfig {
    /// Checks the configuration for a recording at `fs` and returns the
    /// resolved band list.
    pub fn resolve_bands(&self, fs: f64) -> Result<Vec<Band>, SpectralError> {
        let invalid = |m: String| Err(SpectralError::InvalidConfig(m));
        if self.window_len == 0 {
            return invalid("window length must be positive".into());
        }
        if self.hop == 0 || self.hop > self.window_len {
            return invalid(format!("hop {} must be in 1..={}", self.hop, self.window_len));
        }
        let bands = self.bands.clone().unwrap_or_else(|| default_bands(fs));
        if bands.is_empty() {
            return invalid("band list is empty".into());
        }
        for b in &bands {
            b.check(fs)?;
        }
        if bands[0].f1 != 0.0 {
            return invalid(format!("first band {:?} must start at 0 Hz", bands[0].name));
        }
        for pair in bands.windows(2) {
            if pair[0].f2 != pair[1].f1 {
                return invalid(format!(
                    "bands {:?} and {:?} are not contiguous",
                    pair[0].name, pair[1].name
                ));
            }
        }
        let last = bands.last().expect("non-empty");
        if last.f2 != fs / 2.0 {
            return invalid(format!("last band {:?} must end at Nyquist ({} Hz)", last.name, fs / 2.0));
        }
        if !bands.iter().any(|b| b.name == self.load_band) {
            return invalid(format!("load band {:?} is not in the band list", self.load_band));
        }
        Ok(bands)
    }
}

/// Per-band power of one spectrum, in band order.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPowers {
    pub powers: Vec<f64>,
    pub total: f64,
}

/// `(1/N)·Σ|C_k|²` over the band's bins, summed in ascending bin order.
pub fn spectral_power(s: &Spectrum, band: &Band) -> Result<f64, SpectralError> {
    let range = band.bin_range(s.len(), s.fs)?;
    Ok(power_over(&s.coeffs, range))
}

fn power_over(coeffs: &[Complex64], range: Range<usize>) -> f64 {
    let n = coeffs.len() as f64;
    coeffs[range].iter().map(|c| c.norm_sqr()).sum::<f64>() / n
}

pub fn band_powers(s: &Spectrum, bands: &[Band]) -> Result<BandPowers, SpectralError> {
    let powers = bands
        .iter()
        .map(|b| spectral_power(s, b))
        .collect::<Result<Vec<_>, _>>()?;
    let total = powers.iter().sum();
    Ok(BandPowers { powers, total })
}

/// Each band's share of the total power.
pub fn band_ratios(s: &Spectrum, bands: &[Band]) -> Result<Vec<f64>, SpectralError> {
    ratios_of(&band_powers(s, bands)?)
}

fn ratios_of(p: &BandPowers) -> Result<Vec<f64>, SpectralError> {
    if !(p.total > 0.0) {
        return Err(SpectralError::ZeroPower);
    }
    Ok(p.powers.iter().map(|&x| x / p.total).collect())
}

/// Reusable per-window machinery: taper, plan and bin ranges.
#[derive(Debug, Clone)]
pub struct WindowAnalyzer {
    plan: FftPlan,
    taper: Vec<f64>,
    detrend: bool,
    fs: f64,
    ranges: Vec<Range<usize>>,
}

impl WindowAnalyzer {
    pub fn new(cfg: &AnalysisConfig, fs: f64) -> Result<Self, SpectralError> {
        let bands = cfg.resolve_bands(fs)?;
        let n = cfg.window_len;
        let ranges = bands
            .iter()
            .map(|b| b.bin_range(n, fs))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(WindowAnalyzer {
            plan: FftPlan::new(n),
            taper: cfg.window_fn.coefficients(n),
            detrend: cfg.detrend,
            fs,
            ranges,
        })
    }

    pub fn window_len(&self) -> usize {
        self.plan.len()
    }

    /// Band ratios of one raw window. `scratch` is reused between calls.
    pub fn ratios(&self, raw: &[f64], scratch: &mut Vec<Complex64>) -> Result<Vec<f64>, SpectralError> {
        let mut samples = raw.to_vec();
        window::taper_in_place(&mut samples, &self.taper, self.detrend);
        scratch.clear();
        scratch.extend(samples.iter().map(|&x| Complex64::new(x, 0.0)));
        self.plan.process(scratch);
        let powers: Vec<f64> = self.ranges.iter().map(|r| power_over(scratch, r.clone())).collect();
        let total = powers.iter().sum();
        ratios_of(&BandPowers { powers, total })
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }
}

/// Load index of one window position.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadEntry {
    pub start_sample: usize,
    pub start_t: f64,
    /// Exclusive end, `start_t + N/Fs`.
    pub end_t: f64,
    pub load: f64,
    /// Channel-averaged ratio of every band, in band order.
    pub band_ratios: Vec<f64>,
}

/// Per-window load values of a recording.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadSeries {
    pub entries: Vec<LoadEntry>,
    /// Window positions skipped because a channel had zero power.
    pub dropped: usize,
    pub band_names: Vec<String>,
    pub load_band: usize,
    pub window_len: usize,
    pub hop: usize,
    pub fs: f64,
}

impl LoadSeries {
    pub fn mean_load(&self) -> Option<f64> {
        if self.entries.is_empty() {
            None
        } else {
            Some(self.entries.iter().map(|e| e.load).sum::<f64>() / self.entries.len() as f64)
        }
    }

    /// Mean over windows of each band's channel-averaged ratio.
    pub fn mean_band_ratios(&self) -> Option<Vec<f64>> {
        if self.entries.is_empty() {
            return None;
        }
        let n = self.entries.len() as f64;
        Some(
            (0..self.band_names.len())
                .map(|b| self.entries.iter().map(|e| e.band_ratios[b]).sum::<f64>() / n)
                .collect(),
        )
    }
}

/// Computes the load index of every full window of `eeg`.
pub fn cognitive_load_series(
    eeg: &EegRecording,
    cfg: &AnalysisConfig,
    exec: Execution,
) -> Result<LoadSeries, SpectralError> {
    let bands = cfg.resolve_bands(eeg.fs)?;
    let load_band = bands
        .iter()
        .position(|b| b.name == cfg.load_band)
        .expect("checked by resolve_bands");
    let analyzer = WindowAnalyzer::new(cfg, eeg.fs)?;
    let n_channels = eeg.n_channels();
    let n = cfg.window_len;
    let positions = window_count(eeg.n_samples(), n, cfg.hop);

    let per_window = par::map_range(exec, positions, |w| {
        let start = w * cfg.hop;
        let mut scratch = Vec::with_capacity(n);
        let mut sums = vec![0.0; bands.len()];
        for channel in &eeg.channels {
            let ratios = analyzer.ratios(&channel[start..start + n], &mut scratch).ok()?;
            for (s, r) in sums.iter_mut().zip(&ratios) {
                *s += r;
            }
        }
        if n_channels == 0 {
            return None;
        }
        let band_ratios: Vec<f64> = sums.iter().map(|s| s / n_channels as f64).collect();
        let start_t = eeg.time_of(start);
        Some(LoadEntry {
            start_sample: start,
            start_t,
            end_t: start_t + n as f64 / eeg.fs,
            load: band_ratios[load_band],
            band_ratios,
        })
    });

    let dropped = per_window.iter().filter(|e| e.is_none()).count();
    Ok(LoadSeries {
        entries: per_window.into_iter().flatten().collect(),
        dropped,
        band_names: bands.iter().map(|b| b.name.clone()).collect(),
        load_band,
        window_len: n,
        hop: cfg.hop,
        fs: eeg.fs,
    })
}
