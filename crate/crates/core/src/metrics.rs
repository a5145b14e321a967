//! Welfare, matching and envy of an allocation policy on an explicit sample set.

use serde::Serialize;

use crate::cells::{CellStats, LaguerreCells};
use crate::error::{Error, Result};
use crate::problem::{DualSolution, EnvyBudget, TargetDistribution};
use crate::sources::SampleSet;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub welfare: f64,
    pub matching: Vec<f64>,
    /// Signed envy per recipient (negative means envy-free with slack).
    pub envy: Vec<f64>,
    pub max_normalized_envy: f64,
    pub welfare_gap_percent: Option<f64>,
}

fn stats(set: &SampleSet, dual: &DualSolution, target: &TargetDistribution) -> Result<CellStats> {
    if set.n() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            found: set.n(),
        });
    }
    let cells = LaguerreCells::new(dual, target)?;
    Ok(CellStats::collect(set, &cells))
}

/// Mean matched valuation.
pub fn welfare(set: &SampleSet, dual: &DualSolution, target: &TargetDistribution) -> Result<f64> {
    Ok(welfare_from_stats(&stats(set, dual, target)?))
}

pub fn welfare_from_stats(stats: &CellStats) -> f64 {
    (0..stats.n()).map(|i| stats.mean_value(i, i)).sum()
}

/// Pairwise envy, row-major: entry `(j, k)` is
/// `(p_j/p_k) E[x_j; cell k] - E[x_j; cell j]`. Diagonal is zero.
pub fn pairwise_envy(stats: &CellStats, target: &TargetDistribution) -> Vec<f64> {
    let n = stats.n();
    let p = target.as_slice();
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            if j != k {
                out[j * n + k] = p[j] / p[k] * stats.mean_value(k, j) - stats.mean_value(j, j);
            }
        }
    }
    out
}

pub fn envy_from_stats(stats: &CellStats, target: &TargetDistribution) -> Vec<f64> {
    let n = stats.n();
    let pairs = pairwise_envy(stats, target);
    (0..n)
        .map(|j| {
            (0..n)
                .filter(|&k| k != j)
                .map(|k| pairs[j * n + k])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// `Envy(i) = max_{j != i} (p_i/p_j) E[x_i; cell j] - E[x_i; cell i]`.
pub fn envy_vector(set: &SampleSet, dual: &DualSolution, target: &TargetDistribution) -> Result<Vec<f64>> {
    Ok(envy_from_stats(&stats(set, dual, target)?, target))
}

/// `max_i envy_i / p_i`, clamped below at zero.
pub fn max_normalized_envy(envy: &[f64], weights: &[f64]) -> f64 {
    envy.iter()
        .zip(weights)
        .map(|(e, p)| e / p)
        .fold(0.0, f64::max)
}

/// `100 (baseline - w) / baseline`.
pub fn welfare_gap_percent(baseline: f64, w: f64) -> Result<f64> {
    if !(baseline > 0.0) {
        return Err(Error::NonpositiveBaseline(baseline));
    }
    Ok(100.0 * (baseline - w) / baseline)
}

/// `max_k (envy_jk - lambda_jk)` per recipient over constrained pairs.
pub fn envy_residual(stats: &CellStats, target: &TargetDistribution, budget: &EnvyBudget) -> Vec<f64> {
    let n = stats.n();
    let pairs = pairwise_envy(stats, target);
    (0..n)
        .map(|j| {
            (0..n)
                .filter(|&k| budget.is_constrained(j, k))
                .map(|k| pairs[j * n + k] - budget.get(j, k))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

pub fn evaluate(
    set: &SampleSet,
    dual: &DualSolution,
    target: &TargetDistribution,
    baseline_welfare: Option<f64>,
) -> Result<EvaluationReport> {
    let stats = stats(set, dual, target)?;
    let welfare = welfare_from_stats(&stats);
    let envy = envy_from_stats(&stats, target);
    let welfare_gap_percent = baseline_welfare
        .map(|b| welfare_gap_percent(b, welfare))
        .transpose()?;
    Ok(EvaluationReport {
        welfare,
        matching: stats.masses(),
        max_normalized_envy: max_normalized_envy(&envy, target.as_slice()),
        envy,
        welfare_gap_percent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half() -> TargetDistribution {
        TargetDistribution::new(vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn single_row_metrics() {
        let set = SampleSet::from_rows(&[vec![0.9, 0.1]]).unwrap();
        let zero = DualSolution::zeros(2);
        assert!((welfare(&set, &zero, &half()).unwrap() - 0.9).abs() < 1e-15);
        let envy = envy_vector(&set, &zero, &half()).unwrap();
        assert!((envy[0] + 0.9).abs() < 1e-15);
        assert!((envy[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn constant_value_policy_has_zero_envy() {
        // recipient 1 values everything at 0.4; cells of equal mass
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|t| vec![0.4, if t < 5 { 1.0 } else { 0.0 }])
            .collect();
        let set = SampleSet::from_rows(&rows).unwrap();
        let dual = DualSolution::zeros(2);
        let report = evaluate(&set, &dual, &half(), None).unwrap();
        assert_eq!(report.matching, vec![0.5, 0.5]);
        assert!(report.envy[0].abs() < 1e-15);
    }

    #[test]
    fn normalized_envy_examples() {
        assert_eq!(max_normalized_envy(&[-0.1667, -0.1667], &[0.5, 0.5]), 0.0);
        assert!((max_normalized_envy(&[0.05, -0.2], &[0.5, 0.5]) - 0.1).abs() < 1e-15);
        let a = max_normalized_envy(&[0.02, 0.03], &[0.25, 0.75]);
        let b = max_normalized_envy(&[0.06, 0.09], &[0.75, 2.25]);
        assert!((a - 0.08).abs() < 1e-15);
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn welfare_gap_examples() {
        assert_eq!(welfare_gap_percent(0.6667, 0.6667).unwrap(), 0.0);
        assert!((welfare_gap_percent(2.0 / 3.0, 0.6).unwrap() - 10.0).abs() < 1e-9);
        // with the rounded baseline the gap is 100 * 0.0667 / 0.6667
        assert!((welfare_gap_percent(0.6667, 0.6).unwrap() - 10.004_499_775).abs() < 1e-9);
        assert!(matches!(welfare_gap_percent(0.0, 0.5), Err(Error::NonpositiveBaseline(_))));
    }
}
