//! Sliding windows and taper functions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Taper applied to each window before the transform.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowFn {
    /// Half a cosine cycle spanning the window: `sin(π(j + 0.5)/N)`.
    #[default]
    #[serde(rename = "sine")]
    HalfCosine,
    /// `0.5·(1 − cos(2πj/(N − 1)))`.
    Hann,
    /// No taper.
    Rect,
}

impl WindowFn {
    /// Weight of sample `j` in a window of length `n`.
    pub fn coefficient(self, j: usize, n: usize) -> f64 {
        match self {
            WindowFn::HalfCosine => (PI * (j as f64 + 0.5) / n as f64).sin(),
            WindowFn::Hann if n <= 1 => 1.0,
            WindowFn::Hann => 0.5 * (1.0 - (2.0 * PI * j as f64 / (n - 1) as f64).cos()),
            WindowFn::Rect => 1.0,
        }
    }

    pub fn coefficients(self, n: usize) -> Vec<f64> {
        (0..n).map(|j| self.coefficient(j, n)).collect()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WindowFn::HalfCosine => "sine",
            WindowFn::Hann => "hann",
            WindowFn::Rect => "rect",
        }
    }
}

impl fmt::Display for WindowFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WindowFn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sine" | "half-cosine" => Ok(WindowFn::HalfCosine),
            "hann" => Ok(WindowFn::Hann),
            "rect" => Ok(WindowFn::Rect),
            other => Err(format!("unknown window function {other:?} (expected sine, hann or rect)")),
        }
    }
}

/// One segment of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub channel: usize,
    pub start_sample: usize,
    pub start_t: f64,
    pub samples: Vec<f64>,
}

/// Number of full windows of length `len` with step `hop` in `total` samples.
pub fn window_count(total: usize, len: usize, hop: usize) -> usize {
    if len == 0 || hop == 0 || total < len {
        0
    } else {
        (total - len) / hop + 1
    }
}

/// Cuts a channel into windows starting at 0, hop, 2·hop, ...; samples that
/// do not fill a last window are dropped.
pub fn make_windows(
    channel: usize,
    samples: &[f64],
    t0: f64,
    fs: f64,
    len: usize,
    hop: usize,
) -> Vec<Window> {
    (0..window_count(samples.len(), len, hop))
        .map(|w| {
            let start = w * hop;
            Window {
                channel,
                start_sample: start,
                start_t: t0 + start as f64 / fs,
                samples: samples[start..start + len].to_vec(),
            }
        })
        .collect()
}

/// Subtracts the mean (when `detrend`) and multiplies by the taper.
pub fn apply_window_fn(w: &Window, kind: WindowFn, detrend: bool) -> Window {
    let n = w.samples.len();
    let mut samples = w.samples.clone();
    taper_in_place(&mut samples, &kind.coefficients(n), detrend);
    Window { samples, ..w.clone() }
}

/// In-place variant used by the pipeline; `coeffs` must match the length.
pub(crate) fn taper_in_place(samples: &mut [f64], coeffs: &[f64], detrend: bool) {
    if detrend && !samples.is_empty() {
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        samples.iter_mut().for_each(|x| *x -= mean);
    }
    for (x, w) in samples.iter_mut().zip(coeffs) {
        *x *= w;
    }
}
