//! Discrete Fourier transform with the positive exponent convention
//! `C_k = Σ_j c_j · e^{+2πi·jk/N}`.
//!
//! Power-of-two lengths use an iterative radix-2 Cooley-Tukey transform;
//! any other length falls back to direct evaluation.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Fourier coefficients of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub coeffs: Vec<Complex64>,
    /// Sampling rate of the transformed signal, Hz.
    pub fs: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Frequency of bin `k`, Hz.
    pub fn bin_freq(&self, k: usize) -> f64 {
        k as f64 * self.fs / self.coeffs.len() as f64
    }
}

/// Precomputed twiddles and bit-reversal permutation for one length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl FftPlan {
    /// Plans a transform of length `n`. Non-power-of-two lengths get a plan
    /// that evaluates the sum directly.
    pub fn new(n: usize) -> Self {
        let twiddles = (0..n).map(|k| unit_root(k, n)).collect();
        let bitrev = if n.is_power_of_two() {
            let bits = n.trailing_zeros();
            (0..n)
                .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
                .collect()
        } else {
            Vec::new()
        };
        FftPlan { n, twiddles, bitrev }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_radix2(&self) -> bool {
        self.n.is_power_of_two()
    }

    /// Transforms `data` in place.
    ///
    /// # Panics
    /// If `data.len()` differs from the planned length.
    pub fn process(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.n, "buffer length does not match plan");
        if self.n <= 1 {
            return;
        }
        if !self.is_radix2() {
            let out = self.direct(data);
            data.copy_from_slice(&out);
            return;
        }
        for i in 0..self.n {
            let j = self.bitrev[i];
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= self.n {
            let half = len / 2;
            let stride = self.n / len;
            for start in (0..self.n).step_by(len) {
                for k in 0..half {
                    let w = self.twiddles[k * stride];
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len *= 2;
        }
    }

    fn direct(&self, input: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, c) in input.iter().enumerate() {
                    acc += c * self.twiddles[(j * k) % n];
                }
                acc
            })
            .collect()
    }

    /// Transforms a real window into a fresh spectrum.
    pub fn transform_real(&self, samples: &[f64], fs: f64) -> Spectrum {
        let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.process(&mut buf);
        Spectrum { coeffs: buf, fs }
    }
}

/// `e^{+2πi·k/n}`, reduced by symmetry so that the angle stays in [0, π/4].
fn unit_root(k: usize, n: usize) -> Complex64 {
    // Work in eighths of the circle to keep sin/cos arguments small.
    let k = k % n;
    let (num, den) = (8 * k, n);
    let octant = num / den;
    let rem = num - octant * den;
    let theta = |r: usize| PI / 4.0 * r as f64 / den as f64;
    // Angle = π/4 · (octant + rem/den).
    let (c, s) = match octant {
        0 => (theta(rem).cos(), theta(rem).sin()),
        1 => {
            let a = theta(den - rem);
            (a.sin(), a.cos())
        }
        2 => {
            let a = theta(rem);
            (-a.sin(), a.cos())
        }
        3 => {
            let a = theta(den - rem);
            (-a.cos(), a.sin())
        }
        4 => {
            let a = theta(rem);
            (-a.cos(), -a.sin())
        }
        5 => {
            let a = theta(den - rem);
            (-a.sin(), -a.cos())
        }
        6 => {
            let a = theta(rem);
            (a.sin(), -a.cos())
        }
        _ => {
            let a = theta(den - rem);
            (a.cos(), -a.sin())
        }
    };
    Complex64::new(c, s)
}

/// DFT of a complex sequence. Radix-2 when the length is a power of two,
/// direct evaluation otherwise.
pub fn dft(input: &[Complex64], fs: f64) -> Spectrum {
    let plan = FftPlan::new(input.len());
    let mut buf = input.to_vec();
    plan.process(&mut buf);
    Spectrum { coeffs: buf, fs }
}

/// DFT of a real sequence.
pub fn dft_real(input: &[f64], fs: f64) -> Spectrum {
    FftPlan::new(input.len()).transform_real(input, fs)
}
