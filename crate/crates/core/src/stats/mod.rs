//! Boxplot summaries, one-way ANOVA and two-sample t-tests.

mod special;

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use thiserror::Error;

pub use special::{
    f_cdf, f_upper_tail, ln_beta, ln_gamma, regularized_incomplete_beta, student_t_cdf,
    student_t_two_sided,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("no values")]
    EmptyInput,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("all groups are constant but their means differ (F = +inf, p = 0)")]
    ZeroWithinVariance(StatResult),
    #[error("both samples have zero variance")]
    ZeroVariance {
        /// `±inf` statistic with `p = 0` when the constants differ; `None`
        /// when they are equal and t is undefined.
        sentinel: Option<StatResult>,
    },
    #[error("incomplete beta outside its domain: x = {x}, a = {a}, b = {b}")]
    Domain { x: f64, a: f64, b: f64 },
}

/// Serializes non-finite numbers as `"inf"`, `"-inf"` or `"nan"`, which
/// JSON cannot represent.
pub fn serialize_f64<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance (n − 1 denominator), two-pass.
fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Quantile of sorted data by linear interpolation at `p·(n − 1)`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxplotSummary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Smallest value not below `q1 − 1.5·IQR`.
    pub whisker_low: f64,
    /// Largest value not above `q3 + 1.5·IQR`.
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

/// Tukey boxplot numbers. Quartiles interpolate linearly at `p·(n − 1)`.
pub fn boxplot_summary(values: &[f64]) -> Result<BoxplotSummary, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside = |v: &&f64| **v >= lo_fence && **v <= hi_fence;
    let whisker_low = *sorted.iter().find(inside).expect("quartiles lie inside the fences");
    let whisker_high = *sorted.iter().rev().find(inside).expect("quartiles lie inside the fences");
    let outliers = sorted.iter().copied().filter(|v| *v < lo_fence || *v > hi_fence).collect();
    Ok(BoxplotSummary {
        n: values.len(),
        mean: mean(values),
        median,
        q1,
        q3,
        whisker_low,
        whisker_high,
        outliers,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    AnovaOneway,
    StudentT,
    WelchT,
}

/// Variance assumption of the two-sample t-test.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestVariant {
    /// Pooled variance.
    #[default]
    Student,
    /// Welch-Satterthwaite degrees of freedom.
    Welch,
}

impl FromStr for TTestVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "student" => Ok(TTestVariant::Student),
            "welch" => Ok(TTestVariant::Welch),
            other => Err(format!("unknown t-test variant {other:?} (expected student or welch)")),
        }
    }
}

impl fmt::Display for TTestVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TTestVariant::Student => "student",
            TTestVariant::Welch => "welch",
        })
    }
}

/// Outcome of a hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatResult {
    pub test: TestKind,
    /// F or t.
    #[serde(serialize_with = "serialize_f64")]
    pub statistic: f64,
    /// `[df_between, df_within]` for ANOVA, `[df]` for t-tests.
    pub df: Vec<f64>,
    pub p: f64,
    pub n: Vec<usize>,
    pub means: Vec<f64>,
}

/// Between-groups one-way ANOVA.
pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<StatResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::DegenerateInput("ANOVA needs at least two groups".into()));
    }
    if let Some(i) = groups.iter().position(|g| g.len() < 2) {
        return Err(StatsError::DegenerateInput(format!("group {i} has fewer than two values")));
    }
    if groups.iter().flatten().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n_total: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n_total as f64;
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let ss_between: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.len() as f64 * (m - grand) * (m - grand))
        .sum();
    let ss_within: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|x| (x - m) * (x - m)).sum::<f64>())
        .sum();
    let df_between = (groups.len() - 1) as f64;
    let df_within = (n_total - groups.len()) as f64;
    let ms_between = ss_between / df_between;
    let ms_within = ss_within / df_within;
    let n = groups.iter().map(Vec::len).collect();
    let result = |statistic: f64, p: f64| StatResult {
        test: TestKind::AnovaOneway,
        statistic,
        df: vec![df_between, df_within],
        p,
        n,
        means: means.clone(),
    };
    if ms_within == 0.0 {
        return if ms_between > 0.0 {
            Err(StatsError::ZeroWithinVariance(result(f64::INFINITY, 0.0)))
        } else {
            Err(StatsError::DegenerateInput("every value is identical".into()))
        };
    }
    let f = ms_between / ms_within;
    Ok(result(f, f_upper_tail(f, df_between, df_within)))
}

/// Unpaired two-sample t-test with a two-sided p-value.
pub fn ttest_two_sample(a: &[f64], b: &[f64], variant: TTestVariant) -> Result<StatResult, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::DegenerateInput("each sample needs at least two values".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (variance(a), variance(b));
    let test = match variant {
        TTestVariant::Student => TestKind::StudentT,
        TTestVariant::Welch => TestKind::WelchT,
    };
    let (se, df) = match variant {
        TTestVariant::Student => {
            let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
            ((pooled * (1.0 / na + 1.0 / nb)).sqrt(), na + nb - 2.0)
        }
        TTestVariant::Welch => {
            let (sa, sb) = (va / na, vb / nb);
            let se2 = sa + sb;
            let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
            (se2.sqrt(), df)
        }
    };
    let result = |statistic: f64, df: f64, p: f64| StatResult {
        test,
        statistic,
        df: vec![df],
        p,
        n: vec![a.len(), b.len()],
        means: vec![ma, mb],
    };
    let diff = ma - mb;
    if se == 0.0 {
        let sentinel = (diff != 0.0).then(|| result(f64::INFINITY.copysign(diff), na + nb - 2.0, 0.0));
        return Err(StatsError::ZeroVariance { sentinel });
    }
    let t = diff / se;
    Ok(result(t, df, student_t_two_sided(t, df)))
}
