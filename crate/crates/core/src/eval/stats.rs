use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

const STRICT: f64 = 1e-12;

/// Sorted copy of the samples (the support of the empirical CDF).
pub fn ecdf(samples: &[f64]) -> Vec<f64> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Right-continuous empirical CDF of sorted samples at `x`.
fn cdf_at(sorted: &[f64], x: f64) -> f64 {
    sorted.partition_point(|&v| v <= x) as f64 / sorted.len() as f64
}

/// Whether `A` dominates `B` (larger is better), with the largest gap in
/// the wrong direction for each order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    pub fsd: bool,
    pub ssd: bool,
    /// `max_x (F_A(x) - F_B(x))_+`.
    pub fsd_violation: f64,
    /// `max_x (int F_A - int F_B)_+` over `(-inf, x]`.
    pub ssd_violation: f64,
}

/// First order: `F_A <= F_B` everywhere. Second order: the integrated CDFs
/// satisfy the same inequality. Both require a strict gap somewhere. The
/// integrals of the step CDFs are accumulated exactly between consecutive
/// pooled points, which also makes the finite check exact.
pub fn dominance(a: &[f64], b: &[f64]) -> Result<Dominance> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::data("dominance needs nonempty samples"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::data("dominance samples must be finite"));
    }
    let (sa, sb) = (ecdf(a), ecdf(b));
    let mut pooled: Vec<f64> = sa.iter().chain(&sb).copied().collect();
    pooled.sort_by(f64::total_cmp);
    pooled.dedup();

    let (mut fsd_violation, mut fsd_strict) = (0.0f64, false);
    let (mut ssd_violation, mut ssd_strict) = (0.0f64, false);
    let (mut int_a, mut int_b) = (0.0, 0.0);
    let mut prev: Option<(f64, f64, f64)> = None;
    for &x in &pooled {
        if let Some((px, fa, fb)) = prev {
            int_a += fa * (x - px);
            int_b += fb * (x - px);
        }
        let (fa, fb) = (cdf_at(&sa, x), cdf_at(&sb, x));
        fsd_violation = fsd_violation.max(fa - fb);
        fsd_strict |= fb - fa > STRICT;
        ssd_violation = ssd_violation.max(int_a - int_b);
        ssd_strict |= int_b - int_a > STRICT;
        prev = Some((x, fa, fb));
    }
    Ok(Dominance {
        fsd: fsd_violation <= 0.0 && fsd_strict,
        ssd: ssd_violation <= STRICT && (ssd_strict || fsd_strict),
        fsd_violation,
        ssd_violation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedT {
    pub t: f64,
    /// Two-sided.
    pub p: f64,
    pub df: usize,
    /// Differences had zero variance; `t` is 0 or infinite by convention.
    pub degenerate: bool,
}

/// Paired t-test on `a - b`. Zero-variance differences give `t = 0, p = 1`
/// when the mean difference is 0 and `t = +-inf, p = 0` otherwise.
///
/// The t CDF is the regularized incomplete beta function evaluated by
/// continued fractions (`statrs`), accurate to about 1e-10 or better.
pub fn paired_t(a: &[f64], b: &[f64]) -> Result<PairedT> {
    if a.len() != b.len() {
        return Err(Error::dim("paired samples", a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::data("paired t-test needs at least two pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;
    if var == 0.0 {
        let (t, p) = if mean == 0.0 {
            (0.0, 1.0)
        } else {
            (mean.signum() * f64::INFINITY, 0.0)
        };
        return Ok(PairedT {
            t,
            p,
            df,
            degenerate: true,
        });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::param(e.to_string()))?;
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(PairedT {
        t,
        p,
        df,
        degenerate: false,
    })
}

/// Paired comparison of two methods' per-trial scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub method_a: String,
    pub method_b: String,
    pub cdf_a: Vec<f64>,
    pub cdf_b: Vec<f64>,
    pub mean_a: f64,
    pub mean_b: f64,
    pub dominance: Dominance,
    pub t_stat: f64,
    pub p_value: f64,
}

pub fn compare(method_a: &str, a: &[f64], method_b: &str, b: &[f64]) -> Result<ComparisonReport> {
    let dom = dominance(a, b)?;
    let t = paired_t(a, b)?;
    Ok(ComparisonReport {
        method_a: method_a.to_string(),
        method_b: method_b.to_string(),
        cdf_a: ecdf(a),
        cdf_b: ecdf(b),
        mean_a: a.iter().sum::<f64>() / a.len() as f64,
        mean_b: b.iter().sum::<f64>() / b.len() as f64,
        dominance: dom,
        t_stat: t.t,
        p_value: t.p,
    })
}
