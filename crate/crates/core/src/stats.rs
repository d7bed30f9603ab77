//! Student t-tests used to compare systems across paired examples or runs.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// H1: mean difference (or sample mean minus mu) is positive.
    Greater,
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub alternative: Alternative,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased (n - 1) sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

fn p_from_t(t: f64, df: f64, alternative: Alternative) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    let p = match alternative {
        Alternative::TwoSided => 2.0 * dist.sf(t.abs()),
        Alternative::Greater => dist.sf(t),
        Alternative::Less => dist.cdf(t),
    };
    p.clamp(0.0, 1.0)
}

/// One-sample t-test of `xs` against the population mean `mu`.
///
/// A sample that sits exactly on `mu` with no spread yields t = 0 and p = 1.
/// Zero spread around any other value is reported as [`Error::Degenerate`].
pub fn one_sample_t_test(xs: &[f64], mu: f64, alternative: Alternative) -> Result<TTestResult> {
    if xs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "t-test needs at least 2 observations, got {}",
            xs.len()
        )));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(
            "t-test input contains non-finite values".into(),
        ));
    }
    let n = xs.len();
    let m = mean(xs);
    if xs.iter().all(|x| *x == xs[0]) {
        if xs[0] == mu {
            let p = match alternative {
                Alternative::TwoSided => 1.0,
                // t = 0 sits at the median of the null distribution
                Alternative::Greater | Alternative::Less => 0.5,
            };
            return Ok(TTestResult {
                t_statistic: 0.0,
                p_value: p,
                n,
                mean: m,
                std_dev: 0.0,
                alternative,
            });
        }
        return Err(Error::Degenerate(format!(
            "zero variance: every observation equals {}, which differs from mu = {mu}",
            xs[0]
        )));
    }
    let sd = sample_variance(xs).sqrt();
    let t = (m - mu) / (sd / (n as f64).sqrt());
    Ok(TTestResult {
        t_statistic: t,
        p_value: p_from_t(t, n as f64 - 1.0, alternative),
        n,
        mean: m,
        std_dev: sd,
        alternative,
    })
}

/// Paired t-test on `a[i] - b[i]`.
pub fn paired_t_test(a: &[f64], b: &[f64], alternative: Alternative) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "paired t-test needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    one_sample_t_test(&diffs, 0.0, alternative).map_err(|e| match e {
        Error::Degenerate(_) => {
            Error::Degenerate("paired differences have zero variance with a non-zero mean".into())
        }
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_samples_give_p_one() {
        let a = [0.3, 0.5, 0.7];
        let r = paired_t_test(&a, &a, Alternative::TwoSided).unwrap();
        assert_eq!(r.t_statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn constant_nonzero_difference_is_degenerate() {
        let a = [1.0, 2.0, 3.0];
        let b = [0.0, 1.0, 2.0];
        assert!(matches!(
            paired_t_test(&a, &b, Alternative::TwoSided),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn consistent_positive_shift_is_significant() {
        let b = [0.1, 0.4, 0.2, 0.5];
        let a: Vec<f64> = b
            .iter()
            .enumerate()
            .map(|(i, x)| x + 1.0 + 1e-3 * i as f64)
            .collect();
        let r = paired_t_test(&a, &b, Alternative::TwoSided).unwrap();
        assert!(r.t_statistic > 0.0);
        assert!(r.p_value < 0.05);
    }

    // Frozen from scipy.stats.ttest_1samp([0.3, 0.1, 0.2, 0.4, 0.25], 0).
    #[test]
    fn matches_reference_values() {
        let d = [0.3, 0.1, 0.2, 0.4, 0.25];
        let r = one_sample_t_test(&d, 0.0, Alternative::TwoSided).unwrap();
        assert!((r.t_statistic - 5.0).abs() < 1e-9);
        assert!((r.p_value - 0.007490433881274526).abs() < 1e-9);
        let g = one_sample_t_test(&d, 0.0, Alternative::Greater).unwrap();
        assert!((g.p_value - 0.003745216940637263).abs() < 1e-9);
    }

    #[test]
    fn rejects_short_and_mismatched_input() {
        assert!(one_sample_t_test(&[1.0], 0.0, Alternative::TwoSided).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[1.0], Alternative::TwoSided).is_err());
    }
}
