//! Independent reference implementations used by the test suites.
#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;

/// Direct O(N²) evaluation of `C_k = Σ_j c_j e^{+2πi·jk/N}`.
pub fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    let roots: Vec<Complex64> = (0..n)
        .map(|m| {
            let angle = 2.0 * PI * m as f64 / n as f64;
            Complex64::new(angle.cos(), angle.sin())
        })
        .collect();
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, c) in x.iter().enumerate() {
                acc += c * roots[(j * k) % n];
            }
            acc
        })
        .collect()
}

/// `max|a − b| / max|b|`.
pub fn rel_err_inf(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let den = b.iter().map(|y| y.norm()).fold(0.0, f64::max);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

pub fn window_count_loop(total: usize, len: usize, hop: usize) -> usize {
    let mut count = 0;
    let mut start = 0;
    while start + len <= total {
        count += 1;
        start += hop;
    }
    count
}

/// Quantile `p` by sorting and interpolating between the bracketing ranks.
pub fn quantile_brute(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = p * (v.len() - 1) as f64;
    let below = pos.floor() as usize;
    if below + 1 >= v.len() {
        return v[below];
    }
    let w = pos - below as f64;
    (1.0 - w) * v[below] + w * v[below + 1]
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to relative accuracy
/// `rel`. The range is pre-split into panels so narrow peaks are seen.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel: f64) -> f64 {
    const PANELS: usize = 64;
    let h = (b - a) / PANELS as f64;
    let edges: Vec<f64> = (0..=PANELS).map(|i| a + h * i as f64).collect();
    let coarse: Vec<f64> = edges
        .windows(2)
        .map(|w| simpson(w[0], w[1], f(w[0]), f(0.5 * (w[0] + w[1])), f(w[1])))
        .collect();
    let scale: f64 = coarse.iter().map(|c| c.abs()).sum();
    let tol = rel * scale / PANELS as f64 + f64::MIN_POSITIVE;
    edges
        .windows(2)
        .zip(&coarse)
        .map(|(w, &whole)| {
            let (fa, fb, fm) = (f(w[0]), f(w[1]), f(0.5 * (w[0] + w[1])));
            adaptive(f, w[0], w[1], fa, fm, fb, whole, tol, 50)
        })
        .sum()
}

/// `∫_0^x t^{a−1}(1−t)^{b−1} dt` for `x ≤ 1/2`, after `t = s⁴` to smooth
/// the endpoint singularity.
fn partial_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let f = |s: f64| {
        let t = s.powi(4);
        4.0 * s.powf(4.0 * a - 1.0) * (1.0 - t).powf(b - 1.0)
    };
    integrate(&f, 0.0, x.powf(0.25), 1e-13)
}

/// Regularized incomplete beta by numerical integration of the integrand.
pub fn inc_beta_quadrature(x: f64, a: f64, b: f64) -> f64 {
    let total = partial_beta(0.5, a, b) + partial_beta(0.5, b, a);
    if x <= 0.5 {
        partial_beta(x, a, b) / total
    } else {
        1.0 - partial_beta(1.0 - x, b, a) / total
    }
}

/// Two-sided Student-t p-value.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    inc_beta_quadrature(df / (df + t * t), df / 2.0, 0.5)
}

/// Upper tail of the F distribution.
pub fn f_upper(f: f64, d1: f64, d2: f64) -> f64 {
    inc_beta_quadrature(d2 / (d2 + d1 * f), d2 / 2.0, d1 / 2.0)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// One-way ANOVA from explicit sums of squares: `(F, df1, df2)`.
pub fn anova_brute(groups: &[Vec<f64>]) -> (f64, f64, f64) {
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let grand = mean(&all);
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = mean(g);
        ssb += g.len() as f64 * (m - grand).powi(2);
        for v in g {
            ssw += (v - m).powi(2);
        }
    }
    let df1 = (groups.len() - 1) as f64;
    let df2 = (all.len() - groups.len()) as f64;
    ((ssb / df1) / (ssw / df2), df1, df2)
}

/// Pooled-variance t statistic and df.
pub fn student_brute(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (ma, mb) = (mean(a), mean(b));
    let ssa: f64 = a.iter().map(|v| (v - ma).powi(2)).sum();
    let ssb: f64 = b.iter().map(|v| (v - mb).powi(2)).sum();
    let df = (a.len() + b.len() - 2) as f64;
    let sp2 = (ssa + ssb) / df;
    let t = (ma - mb) / (sp2 * (1.0 / a.len() as f64 + 1.0 / b.len() as f64)).sqrt();
    (t, df)
}

/// Welch t statistic and Welch-Satterthwaite df.
pub fn welch_brute(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (ma, mb) = (mean(a), mean(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let va = a.iter().map(|v| (v - ma).powi(2)).sum::<f64>() / (na - 1.0);
    let vb = b.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / (nb - 1.0);
    let (qa, qb) = (va / na, vb / nb);
    let t = (ma - mb) / (qa + qb).sqrt();
    let df = (qa + qb).powi(2) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    (t, df)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
