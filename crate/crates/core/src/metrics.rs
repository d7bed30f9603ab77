//! Classification and regression metrics for the learned quality predictors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn from_predictions(predictions: &[bool], labels: &[bool]) -> Result<Self> {
        if predictions.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} predictions for {} labels",
                predictions.len(),
                labels.len()
            )));
        }
        let mut cm = ConfusionMatrix::default();
        for (&p, &l) in predictions.iter().zip(labels) {
            match (p, l) {
                (true, true) => cm.tp += 1,
                (false, false) => cm.tn += 1,
                (true, false) => cm.fp += 1,
                (false, true) => cm.fn_ += 1,
            }
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// Matthews correlation coefficient. When any marginal is zero the
    /// coefficient is undefined and 0 is returned, so a constant (majority)
    /// predictor scores exactly 0.
    pub fn mcc(&self) -> f64 {
        mcc(self.tp, self.tn, self.fp, self.fn_)
    }
}

pub fn mcc(tp: u64, tn: u64, fp: u64, fn_: u64) -> f64 {
    let (tp, tn, fp, fn_) = (tp as f64, tn as f64, fp as f64, fn_ as f64);
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom == 0.0 {
        return 0.0;
    }
    ((tp * tn - fp * fn_) / denom.sqrt()).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub mae: f64,
    pub mse: f64,
    pub spearman: f64,
    /// Set when either side is constant and the rank correlation is undefined.
    pub spearman_degenerate: bool,
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation; `None` if either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with a degeneracy flag for constant input.
pub fn spearman(x: &[f64], y: &[f64]) -> (f64, bool) {
    let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
    if x.is_empty() || constant(x) || constant(y) {
        return (0.0, true);
    }
    match pearson(&average_ranks(x), &average_ranks(y)) {
        Some(r) => (r, false),
        None => (0.0, true),
    }
}

pub fn regression_eval(predictions: &[f64], labels: &[f64]) -> Result<RegressionReport> {
    if predictions.len() != labels.len() || predictions.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "regression evaluation needs equal lengths >= 2, got {} and {}",
            predictions.len(),
            labels.len()
        )));
    }
    let n = predictions.len() as f64;
    let mae = predictions
        .iter()
        .zip(labels)
        .map(|(p, l)| (p - l).abs())
        .sum::<f64>()
        / n;
    let mse = predictions
        .iter()
        .zip(labels)
        .map(|(p, l)| (p - l).powi(2))
        .sum::<f64>()
        / n;
    let (spearman, spearman_degenerate) = spearman(predictions, labels);
    Ok(RegressionReport {
        mae,
        mse,
        spearman,
        spearman_degenerate,
    })
}

/// Most frequent class in the training labels (ties go to `false`).
pub fn majority_class(labels: &[bool]) -> bool {
    let positives = labels.iter().filter(|l| **l).count();
    positives * 2 > labels.len()
}

pub fn mean_label(labels: &[f64]) -> f64 {
    labels.iter().sum::<f64>() / labels.len() as f64
}

/// Mean absolute deviation around the mean.
pub fn mean_absolute_deviation(labels: &[f64]) -> f64 {
    let m = mean_label(labels);
    labels.iter().map(|l| (l - m).abs()).sum::<f64>() / labels.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mcc_hand_values() {
        assert_eq!(mcc(5, 7, 0, 0), 1.0);
        assert_eq!(mcc(0, 0, 4, 6), -1.0);
        assert!((mcc(1, 2, 1, 0) - 2.0 / 12f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn majority_predictor_scores_zero() {
        let labels = [false, false, true, false];
        let preds = [false; 4];
        let cm = ConfusionMatrix::from_predictions(&preds, &labels).unwrap();
        assert_eq!(cm.mcc(), 0.0);
        assert_eq!(mcc(0, 0, 0, 0), 0.0);
    }

    #[test]
    fn regression_identity_and_swap() {
        let r = regression_eval(&[0.1, 0.5, 0.9], &[0.1, 0.5, 0.9]).unwrap();
        assert_eq!((r.mae, r.mse, r.spearman), (0.0, 0.0, 1.0));

        let r = regression_eval(&[0.2, 0.4], &[0.4, 0.2]).unwrap();
        assert!((r.mae - 0.2).abs() < 1e-12);
        assert!((r.mse - 0.04).abs() < 1e-12);
        assert_eq!(r.spearman, -1.0);
        assert!(!r.spearman_degenerate);
    }

    #[test]
    fn constant_predictions_flag_spearman() {
        let r = regression_eval(&[0.5, 0.5, 0.5], &[0.1, 0.6, 0.9]).unwrap();
        assert_eq!(r.spearman, 0.0);
        assert!(r.spearman_degenerate);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), [3.5, 1.0, 3.5, 2.0]);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mcc_symmetric_under_class_swap(tp in 0u64..50, tn in 0u64..50, fp in 0u64..50, fn_ in 0u64..50) {
                prop_assert!((mcc(tp, tn, fp, fn_) - mcc(tn, tp, fn_, fp)).abs() < 1e-12);
                let m = mcc(tp, tn, fp, fn_);
                prop_assert!((-1.0..=1.0).contains(&m));
            }

            #[test]
            fn spearman_invariant_to_monotone_transform(
                xs in prop::collection::vec(-5.0f64..5.0, 3..30),
                ys in prop::collection::vec(-5.0f64..5.0, 30),
            ) {
                let ys = &ys[..xs.len()];
                let (a, _) = spearman(&xs, ys);
                let transformed: Vec<f64> = xs.iter().map(|x| x.powi(3) + 2.0 * x).collect();
                let (b, _) = spearman(&transformed, ys);
                prop_assert!((a - b).abs() < 1e-12);
            }

            #[test]
            fn mean_is_best_constant(labels in prop::collection::vec(0.0f64..1.0, 2..40), c in 0.0f64..1.0) {
                let m = mean_label(&labels);
                let mse = |k: f64| labels.iter().map(|l| (l - k).powi(2)).sum::<f64>();
                prop_assert!(mse(m) <= mse(c) + 1e-12);
            }
        }
    }
}
