//! Coherent risk measures on finite (empirical) distributions.
//!
//! Three measures are supported:
//!
//! * expectation, `E[Z]`;
//! * mean-upper-semideviation of order `p`,
//!   `E[Z] + c * (E[(Z - E[Z])_+^p])^(1/p)` with `c` in `[0, 1]`;
//! * average value at risk at level `alpha`, the mean of the worst
//!   `alpha`-probability tail of the losses.
//!
//! A systemic measure over `N` classes applies an outer measure to the
//! vector of per-class risks, viewed as a random variable on `{1..N}`
//! with the class probability mass function.
//!
//! For the polyhedral measures (expectation, semideviation of order 1,
//! AVaR) [`subgradient`] returns an element of the dual set attaining the
//! supremum in the dual representation; those elements are the
//! multipliers of objective cuts in the decomposition method.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROB_TOL: f64 = 1e-12;

/// A loss random variable with finitely many realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalRV {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl EmpiricalRV {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("random variable needs at least one realization"));
        }
        if values.len() != probs.len() {
            return Err(Error::dim("EmpiricalRV probabilities", values.len(), probs.len()));
        }
        check_probs(&probs)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("realizations must be finite"));
        }
        Ok(EmpiricalRV { values, probs })
    }

    /// Equally likely realizations.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let m = values.len();
        if m == 0 {
            return Err(Error::param("random variable needs at least one realization"));
        }
        let probs = vec![1.0 / m as f64; m];
        Self::new(values, probs)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        dot(&self.values, &self.probs)
    }
}

pub(crate) fn check_probs(probs: &[f64]) -> Result<()> {
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::param("probabilities must be finite and nonnegative"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_TOL * (probs.len().max(1) as f64).max(1.0) {
        return Err(Error::param(format!("probabilities sum to {total}, expected 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskKind {
    Expectation,
    #[serde(alias = "msd")]
    MeanSemiDeviation,
    #[serde(alias = "cvar")]
    AVaR,
}

/// A coherent risk measure: kind plus its parameters.
///
/// `c` and `p_order` are read only for [`RiskKind::MeanSemiDeviation`],
/// `alpha` only for [`RiskKind::AVaR`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskSpec {
    pub kind: RiskKind,
    #[serde(default)]
    pub c: f64,
    #[serde(default = "default_order")]
    pub p_order: u32,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_order() -> u32 {
    1
}

fn default_alpha() -> f64 {
    1.0
}

impl Default for RiskSpec {
    fn default() -> Self {
        Self::expectation()
    }
}

impl RiskSpec {
    pub fn expectation() -> Self {
        RiskSpec {
            kind: RiskKind::Expectation,
            c: 0.0,
            p_order: 1,
            alpha: 1.0,
        }
    }

    /// Mean-upper-semideviation of order 1 with weight `c`.
    pub fn msd(c: f64) -> Self {
        Self::msd_order(c, 1)
    }

    pub fn msd_order(c: f64, p_order: u32) -> Self {
        RiskSpec {
            kind: RiskKind::MeanSemiDeviation,
            c,
            p_order,
            alpha: 1.0,
        }
    }

    pub fn avar(alpha: f64) -> Self {
        RiskSpec {
            kind: RiskKind::AVaR,
            c: 0.0,
            p_order: 1,
            alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            RiskKind::Expectation => Ok(()),
            RiskKind::MeanSemiDeviation => {
                if !(0.0..=1.0).contains(&self.c) {
                    return Err(Error::param(format!("semideviation weight c={} not in [0,1]", self.c)));
                }
                if self.p_order < 1 {
                    return Err(Error::param("semideviation order must be >= 1"));
                }
                Ok(())
            }
            RiskKind::AVaR => {
                if !(self.alpha > 0.0 && self.alpha <= 1.0) {
                    return Err(Error::param(format!("AVaR level alpha={} not in (0,1]", self.alpha)));
                }
                Ok(())
            }
        }
    }

    /// True when the dual set is a polytope, so cuts built from
    /// [`subgradient`] are linear.
    pub fn is_polyhedral(&self) -> bool {
        match self.kind {
            RiskKind::Expectation | RiskKind::AVaR => true,
            RiskKind::MeanSemiDeviation => self.p_order == 1,
        }
    }
}

/// Outer measure over classes composed with per-class inner measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemicSpec {
    pub inner: RiskSpec,
    pub outer: RiskSpec,
    pub class_probs: Vec<f64>,
}

impl SystemicSpec {
    pub fn validate(&self) -> Result<()> {
        self.inner.validate()?;
        self.outer.validate()?;
        check_probs(&self.class_probs)
    }

    pub fn n_classes(&self) -> usize {
        self.class_probs.len()
    }
}

pub fn evaluate(rv: &EmpiricalRV, spec: &RiskSpec) -> Result<f64> {
    spec.validate()?;
    Ok(evaluate_unchecked(&rv.values, &rv.probs, spec))
}

pub(crate) fn evaluate_unchecked(values: &[f64], probs: &[f64], spec: &RiskSpec) -> f64 {
    let mean = dot(values, probs);
    match spec.kind {
        RiskKind::Expectation => mean,
        RiskKind::MeanSemiDeviation => {
            if spec.c == 0.0 {
                return mean;
            }
            let p = spec.p_order as f64;
            let dev: f64 = values
                .iter()
                .zip(probs)
                .map(|(v, q)| q * (v - mean).max(0.0).powf(p))
                .sum();
            mean + spec.c * dev.powf(1.0 / p)
        }
        RiskKind::AVaR => {
            let weights = avar_weights(values, probs, spec.alpha);
            dot(values, &weights)
        }
    }
}

/// Outer measure applied to the per-class risk vector.
pub fn evaluate_systemic(per_class_risks: &[f64], spec: &SystemicSpec) -> Result<f64> {
    if per_class_risks.len() != spec.class_probs.len() {
        return Err(Error::dim(
            "evaluate_systemic",
            spec.class_probs.len(),
            per_class_risks.len(),
        ));
    }
    let rv = EmpiricalRV::new(per_class_risks.to_vec(), spec.class_probs.clone())?;
    evaluate(&rv, &spec.outer)
}

/// Dual-set element `mu` with `<mu, values> = evaluate(rv, spec)`.
///
/// Only polyhedral measures are supported. For semideviation, realizations
/// equal to the mean get indicator 0. For AVaR the worst outcomes receive
/// mass `p_i / alpha` in descending order with ties broken by ascending
/// index, and the boundary outcome receives the fractional remainder.
pub fn subgradient(rv: &EmpiricalRV, spec: &RiskSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    if !spec.is_polyhedral() {
        return Err(Error::Unsupported(format!(
            "semideviation of order {} has no polyhedral dual set",
            spec.p_order
        )));
    }
    Ok(subgradient_unchecked(&rv.values, &rv.probs, spec))
}

pub(crate) fn subgradient_unchecked(values: &[f64], probs: &[f64], spec: &RiskSpec) -> Vec<f64> {
    match spec.kind {
        RiskKind::Expectation => probs.to_vec(),
        RiskKind::MeanSemiDeviation => {
            let mean = dot(values, probs);
            let above: Vec<f64> = values.iter().map(|&v| if v > mean { 1.0 } else { 0.0 }).collect();
            let mass_above = dot(&above, probs);
            probs
                .iter()
                .zip(&above)
                .map(|(p, h)| p * (1.0 + spec.c * (h - mass_above)))
                .collect()
        }
        RiskKind::AVaR => avar_weights(values, probs, spec.alpha),
    }
}

/// Outer-measure subgradient used for objective cuts.
pub fn outer_subgradient(risks: &[f64], spec: &RiskSpec, probs: &[f64]) -> Result<Vec<f64>> {
    if risks.len() != probs.len() {
        return Err(Error::dim("outer_subgradient", probs.len(), risks.len()));
    }
    let rv = EmpiricalRV::new(risks.to_vec(), probs.to_vec())?;
    subgradient(&rv, spec)
}

fn avar_weights(values: &[f64], probs: &[f64], alpha: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // stable sort keeps ascending index among equal values
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut weights = vec![0.0; values.len()];
    let mut remaining = alpha;
    for idx in order {
        if remaining <= 0.0 {
            break;
        }
        let take = probs[idx].min(remaining);
        weights[idx] = take / alpha;
        remaining -= take;
    }
    weights
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn half(values: [f64; 2]) -> EmpiricalRV {
        EmpiricalRV::new(values.to_vec(), vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn constant_variable_has_its_value_as_risk() {
        let rv = EmpiricalRV::uniform(vec![1.7; 5]).unwrap();
        for spec in [
            RiskSpec::expectation(),
            RiskSpec::msd(0.3),
            RiskSpec::msd_order(1.0, 3),
            RiskSpec::avar(0.2),
        ] {
            assert_abs_diff_eq!(evaluate(&rv, &spec).unwrap(), 1.7, epsilon = 1e-14);
        }
    }

    #[test]
    fn two_point_examples() {
        let rv = half([0.0, 2.0]);
        assert_abs_diff_eq!(evaluate(&rv, &RiskSpec::msd(1.0)).unwrap(), 1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(evaluate(&rv, &RiskSpec::avar(0.5)).unwrap(), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(evaluate(&rv, &RiskSpec::msd(0.0)).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn systemic_examples() {
        let spec = SystemicSpec {
            inner: RiskSpec::expectation(),
            outer: RiskSpec::msd(1.0),
            class_probs: vec![0.5, 0.5],
        };
        assert_abs_diff_eq!(evaluate_systemic(&[1.0, 3.0], &spec).unwrap(), 2.5, epsilon = 1e-14);
        assert_abs_diff_eq!(evaluate_systemic(&[0.4, 0.4], &spec).unwrap(), 0.4, epsilon = 1e-14);
        let spec = SystemicSpec {
            outer: RiskSpec::expectation(),
            ..spec
        };
        assert_abs_diff_eq!(evaluate_systemic(&[1.0, 3.0], &spec).unwrap(), 2.0, epsilon = 1e-14);
        assert!(matches!(
            evaluate_systemic(&[1.0, 2.0, 3.0], &spec),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn subgradient_examples() {
        let probs = [0.5, 0.5];
        let mu = outer_subgradient(&[1.0, 3.0], &RiskSpec::msd(1.0), &probs).unwrap();
        assert_abs_diff_eq!(mu[0], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(mu[1], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(dot(&mu, &[1.0, 3.0]), 2.5, epsilon = 1e-14);

        let mu = outer_subgradient(&[4.0, -2.0], &RiskSpec::expectation(), &probs).unwrap();
        assert_eq!(mu, probs.to_vec());

        let mu = outer_subgradient(&[1.0, 3.0], &RiskSpec::avar(0.5), &probs).unwrap();
        assert_eq!(mu, vec![0.0, 1.0]);
    }

    #[test]
    fn higher_order_semideviation_has_no_cut() {
        let err = outer_subgradient(&[1.0, 3.0], &RiskSpec::msd_order(0.5, 2), &[0.5, 0.5]);
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }

    #[test]
    fn avar_ties_break_by_index_and_split_boundary_mass() {
        let rv = EmpiricalRV::uniform(vec![5.0, 5.0, 1.0, 5.0]).unwrap();
        let mu = subgradient(&rv, &RiskSpec::avar(0.6)).unwrap();
        // 0.6 of mass: indices 0 and 1 fully (0.25 each), index 3 gets 0.1
        assert_abs_diff_eq!(mu[0], 0.25 / 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(mu[1], 0.25 / 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(mu[2], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mu[3], 0.1 / 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(mu.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn semideviation_tie_at_mean_uses_zero_indicator() {
        let rv = EmpiricalRV::uniform(vec![2.0, 2.0]).unwrap();
        let mu = subgradient(&rv, &RiskSpec::msd(1.0)).unwrap();
        assert_eq!(mu, vec![0.5, 0.5]);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let rv = half([0.0, 1.0]);
        assert!(evaluate(&rv, &RiskSpec::msd(1.5)).is_err());
        assert!(evaluate(&rv, &RiskSpec::avar(0.0)).is_err());
        assert!(evaluate(&rv, &RiskSpec::msd_order(0.5, 0)).is_err());
        assert!(EmpiricalRV::new(vec![1.0], vec![0.9]).is_err());
        assert!(EmpiricalRV::new(vec![], vec![]).is_err());
        assert!(EmpiricalRV::new(vec![1.0, 2.0], vec![1.0]).is_err());
    }

    #[test]
    fn spec_serializes_with_lowercase_kind() {
        let json = serde_json::to_string(&RiskSpec::msd(0.05)).unwrap();
        assert!(json.contains("\"kind\":\"meansemideviation\""), "{json}");
        let back: RiskSpec = serde_json::from_str(r#"{"kind":"avar","alpha":0.5}"#).unwrap();
        assert_eq!(back, RiskSpec::avar(0.5));
        let msd: RiskSpec = serde_json::from_str(r#"{"kind":"msd","c":0.3}"#).unwrap();
        assert_eq!(msd, RiskSpec::msd(0.3));
    }
}
