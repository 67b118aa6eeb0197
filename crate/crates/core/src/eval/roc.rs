use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `psi_i(x) - max_{j != i} psi_j(x)`.
pub fn margin_statistic(scores: &[f64], class: usize) -> f64 {
    let rival = scores
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != class)
        .map(|(_, &s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    scores[class] - rival
}

/// ROC curve as `(fpr, tpr)` points from `(0, 0)` to `(1, 1)`, one point
/// per distinct statistic value, and its trapezoid area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Roc {
    pub class: usize,
    /// Threshold of each point after the origin; a point is called positive
    /// when its statistic is at least the threshold.
    pub thresholds: Vec<f64>,
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// One-vs-rest ROC for `class` using the margin statistic of each sample's
/// scores. Samples with equal statistics enter at the same threshold.
pub fn roc_auc(scores: &[Vec<f64>], truth: &[usize], class: usize) -> Result<Roc> {
    if scores.len() != truth.len() {
        return Err(Error::dim("roc scores", truth.len(), scores.len()));
    }
    let mut stats: Vec<(f64, bool)> = Vec::with_capacity(scores.len());
    for s in scores {
        if class >= s.len() || s.len() < 2 {
            return Err(Error::data(format!("class {class} has no score")));
        }
        stats.push((margin_statistic(s, class), false));
    }
    for (st, &t) in stats.iter_mut().zip(truth) {
        st.1 = t == class;
    }
    let pos = stats.iter().filter(|s| s.1).count();
    let neg = stats.len() - pos;
    if pos == 0 {
        return Err(Error::data(format!("class {class} is absent from the truth labels")));
    }
    if neg == 0 {
        return Err(Error::data(format!("every sample belongs to class {class}")));
    }
    stats.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut k = 0;
    while k < stats.len() {
        let t = stats[k].0;
        while k < stats.len() && stats[k].0 == t {
            if stats[k].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        let p = (fp as f64 / neg as f64, tp as f64 / pos as f64);
        let last = *points.last().unwrap();
        auc += (p.0 - last.0) * (p.1 + last.1) / 2.0;
        points.push(p);
        thresholds.push(t);
    }
    Ok(Roc {
        class,
        thresholds,
        points,
        auc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_class(stats_pos: &[f64], stats_neg: &[f64]) -> (Vec<Vec<f64>>, Vec<usize>) {
        // scores (s, 0) give statistic s for class 0
        let mut scores = Vec::new();
        let mut truth = Vec::new();
        for &s in stats_pos {
            scores.push(vec![s, 0.0]);
            truth.push(0);
        }
        for &s in stats_neg {
            scores.push(vec![s, 0.0]);
            truth.push(1);
        }
        (scores, truth)
    }

    #[test]
    fn auc_examples() {
        let (s, t) = two_class(&[3.0, 2.0], &[1.0, 0.0]);
        assert_eq!(roc_auc(&s, &t, 0).unwrap().auc, 1.0);

        let (s, t) = two_class(&[1.0, 1.0], &[1.0, 1.0]);
        let r = roc_auc(&s, &t, 0).unwrap();
        assert_eq!(r.auc, 0.5);
        assert_eq!(r.points, vec![(0.0, 0.0), (1.0, 1.0)]);

        let (s, t) = two_class(&[2.0, 1.0], &[1.5, 0.0]);
        assert_eq!(roc_auc(&s, &t, 0).unwrap().auc, 0.75);
    }

    #[test]
    fn statistic_uses_best_rival() {
        assert_eq!(margin_statistic(&[1.0, 3.0, 2.0], 2), -1.0);
        assert_eq!(margin_statistic(&[1.0, 3.0, 2.0], 1), 1.0);
    }

    #[test]
    fn absent_class_is_an_error() {
        let (s, t) = two_class(&[], &[1.0]);
        assert!(roc_auc(&s, &t, 0).is_err());
    }
}
