//! Rerun protocol: each model is trained and scored once per seed, then
//! compared with the zero baseline and with the other models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{one_sample_t_test, paired_t_test, Alternative, TTestResult};

pub const DEFAULT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    OneSampleVs0,
    PairedTwoSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRuns {
    pub model: String,
    pub seeds: Vec<u64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub kind: TestKind,
    pub model_a: String,
    /// Absent for the comparison against the zero baseline.
    pub model_b: Option<String>,
    pub result: Option<TTestResult>,
    /// Set when the statistic is undefined for these runs.
    pub degenerate: Option<String>,
}

impl Comparison {
    pub fn p_value(&self) -> Option<f64> {
        self.result.map(|r| r.p_value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceReport {
    pub dimension: String,
    pub seeds: Vec<u64>,
    pub runs: Vec<ModelRuns>,
    pub comparisons: Vec<Comparison>,
}

fn comparison(
    kind: TestKind,
    model_a: &str,
    model_b: Option<&str>,
    outcome: Result<TTestResult>,
) -> Result<Comparison> {
    let (result, degenerate) = match outcome {
        Ok(r) => (Some(r), None),
        Err(Error::Degenerate(msg)) => (None, Some(msg)),
        Err(e) => return Err(e),
    };
    Ok(Comparison {
        kind,
        model_a: model_a.to_string(),
        model_b: model_b.map(str::to_string),
        result,
        degenerate,
    })
}

/// Tests already collected per-run scores: each model against 0 with a
/// one-sample t-test, and every pair of models with a paired t-test over
/// matching seeds.
pub fn compare_runs(dimension: &str, runs: Vec<ModelRuns>) -> Result<SignificanceReport> {
    let Some(first) = runs.first() else {
        return Err(Error::InvalidInput("no model runs to compare".into()));
    };
    let seeds = first.seeds.clone();
    if seeds.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "significance needs at least 2 runs, got {}",
            seeds.len()
        )));
    }
    for r in &runs {
        if r.seeds != seeds || r.values.len() != seeds.len() {
            return Err(Error::InvalidInput(format!(
                "runs of {} do not match the seed list",
                r.model
            )));
        }
    }
    let mut comparisons = Vec::new();
    for r in &runs {
        comparisons.push(comparison(
            TestKind::OneSampleVs0,
            &r.model,
            None,
            one_sample_t_test(&r.values, 0.0, Alternative::TwoSided),
        )?);
    }
    for (i, a) in runs.iter().enumerate() {
        for b in &runs[i + 1..] {
            comparisons.push(comparison(
                TestKind::PairedTwoSample,
                &a.model,
                Some(&b.model),
                paired_t_test(&a.values, &b.values, Alternative::TwoSided),
            )?);
        }
    }
    Ok(SignificanceReport {
        dimension: dimension.to_string(),
        seeds,
        runs,
        comparisons,
    })
}

/// Calls `run(model, seed)` for every model and seed, then compares.
pub fn significance_protocol<F>(
    dimension: &str,
    models: &[&str],
    seeds: &[u64],
    mut run: F,
) -> Result<SignificanceReport>
where
    F: FnMut(&str, u64) -> Result<f64>,
{
    if seeds.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "significance needs at least 2 runs, got {}",
            seeds.len()
        )));
    }
    let mut runs = Vec::with_capacity(models.len());
    for &model in models {
        let mut values = Vec::with_capacity(seeds.len());
        for &seed in seeds {
            let v = run(model, seed)?;
            tracing::info!(dimension, model, seed, value = v, "run finished");
            values.push(v);
        }
        runs.push(ModelRuns {
            model: model.to_string(),
            seeds: seeds.to_vec(),
            values,
        });
    }
    compare_runs(dimension, runs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn injected_runs_match_oracle() {
        let mccs = [0.7, 0.72, 0.68, 0.71, 0.69];
        let report = significance_protocol("hallucination", &["base"], &DEFAULT_SEEDS, |_, seed| {
            Ok(mccs[seed as usize - 1])
        })
        .unwrap();
        let r = report.comparisons[0].result.unwrap();
        // scipy.stats.ttest_1samp
        assert!((r.t_statistic - 98.99494936611677).abs() < 1e-6);
        assert!((r.p_value - 6.243149263708201e-08).abs() < 1e-6);
        assert_eq!(report.seeds, DEFAULT_SEEDS);
    }

    #[test]
    fn all_zero_mcc_gives_p_one() {
        let report = significance_protocol("q", &["m"], &DEFAULT_SEEDS, |_, _| Ok(0.0)).unwrap();
        assert_eq!(report.comparisons[0].p_value(), Some(1.0));
    }

    #[test]
    fn identical_models_and_degenerate_cases() {
        let report =
            significance_protocol("q", &["a", "b"], &DEFAULT_SEEDS, |_, s| Ok(s as f64 / 10.0)).unwrap();
        let paired = &report.comparisons[2];
        assert_eq!(paired.kind, TestKind::PairedTwoSample);
        assert_eq!(paired.p_value(), Some(1.0));
        let report = significance_protocol("q", &["a", "b"], &DEFAULT_SEEDS, |m, _| {
            Ok(if m == "a" { 0.5 } else { 0.4 })
        })
        .unwrap();
        assert!(report.comparisons.iter().all(|c| c.degenerate.is_some()));
    }

    #[test]
    fn needs_two_runs() {
        assert!(significance_protocol("q", &["a"], &[1], |_, _| Ok(0.1)).is_err());
    }
}
