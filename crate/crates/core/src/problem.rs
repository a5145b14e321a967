//! Problem data shared by every solver: the target matching distribution,
//! pairwise envy budgets, dual solutions and run reports.
//!
//! Costs follow the assignment convention `c(x, y_i) = -x_i`, so every
//! "cost" below is a negated utility.

use serde::Serialize;

use crate::error::{Error, Result};

/// Absolute tolerance on `sum(p) == 1`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Budget entry marking an ordered pair as unconstrained.
pub const UNCONSTRAINED: f64 = f64::INFINITY;

/// Target matching distribution `p*`: the fraction of items each recipient
/// must receive. Strictly positive and summing to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct TargetDistribution(Vec<f64>);

impl TargetDistribution {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        check_simplex(&p)?;
        Ok(Self(p))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::NonSimplexTarget("empty target".into()));
        }
        Self::new(vec![1.0 / n as f64; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }
}

fn check_simplex(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::NonSimplexTarget("empty target".into()));
    }
    if let Some((i, &v)) = p.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::NonSimplexTarget(format!("p[{}] = {} is not positive", i + 1, v)));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::NonSimplexTarget(format!("entries sum to {sum}")));
    }
    Ok(())
}

/// Pairwise envy tolerances. Entry `(j, k)` bounds recipient `j`'s envy
/// toward `k`; [`UNCONSTRAINED`] disables the pair. The diagonal is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvyBudget {
    n: usize,
    lambda: Vec<f64>,
}

impl EnvyBudget {
    /// Every pair unconstrained: the plain semi-discrete transport problem.
    pub fn unconstrained(n: usize) -> Self {
        Self {
            n,
            lambda: vec![UNCONSTRAINED; n * n],
        }
    }

    /// Builds a budget from a full `n x n` matrix (diagonal ignored).
    pub fn from_matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut lambda = vec![0.0; n * n];
        for (j, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            for (k, &v) in row.iter().enumerate() {
                if j == k {
                    continue;
                }
                if v.is_nan() || v < 0.0 {
                    return Err(Error::InvalidBudget(format!(
                        "lambda[{}][{}] = {} is negative",
                        j + 1,
                        k + 1,
                        v
                    )));
                }
                lambda[j * n + k] = v;
            }
        }
        Ok(Self { n, lambda })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.lambda[j * self.n + k]
    }

    /// True when `(j, k)` is an off-diagonal pair with a finite budget.
    pub fn is_constrained(&self, j: usize, k: usize) -> bool {
        j != k && self.get(j, k).is_finite()
    }

    pub fn has_constraints(&self) -> bool {
        (0..self.n).any(|j| (0..self.n).any(|k| self.is_constrained(j, k)))
    }

    /// Entrywise product with a non-negative factor (sentinels stay put).
    pub fn scaled(&self, factor: f64) -> Self {
        let lambda = self
            .lambda
            .iter()
            .map(|&v| if v.is_finite() { v * factor } else { v })
            .collect();
        Self { n: self.n, lambda }
    }
}

/// The uniform scheme `lambda_jk = epsilon * p_j`. `epsilon = +inf` yields an
/// all-unconstrained budget; `epsilon = 0` asks for envy-freeness.
pub fn uniform_budget(epsilon: f64, target: &TargetDistribution) -> Result<EnvyBudget> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::NegativeEpsilon(epsilon));
    }
    let n = target.len();
    if epsilon.is_infinite() {
        return Ok(EnvyBudget::unconstrained(n));
    }
    let mut lambda = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            if j != k {
                lambda[j * n + k] = epsilon * target.get(j);
            }
        }
    }
    Ok(EnvyBudget { n, lambda })
}

/// Dual potentials `g` and envy multipliers `gamma` (row-major `n x n`, the
/// diagonal unused). Together they define the allocation policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualSolution {
    pub g: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl DualSolution {
    pub fn zeros(n: usize) -> Self {
        Self {
            g: vec![0.0; n],
            gamma: vec![0.0; n * n],
        }
    }

    /// Potentials only, all multipliers zero.
    pub fn from_potentials(g: Vec<f64>) -> Self {
        let n = g.len();
        Self {
            g,
            gamma: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn gamma(&self, j: usize, k: usize) -> f64 {
        self.gamma[j * self.n() + k]
    }

    pub fn set_gamma(&mut self, j: usize, k: usize, value: f64) {
        let n = self.n();
        self.gamma[j * n + k] = value;
    }

    /// Clamps multipliers at zero, zeroes the diagonal and every pair the
    /// budget leaves unconstrained.
    pub fn project(&mut self, budget: &EnvyBudget) {
        let n = self.n();
        for j in 0..n {
            for k in 0..n {
                let v = &mut self.gamma[j * n + k];
                if !budget.is_constrained(j, k) || *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
    }

    /// Checks shape, finiteness, non-negativity and pinning against `budget`.
    pub fn validate(&self, budget: &EnvyBudget) -> Result<()> {
        let n = self.n();
        if self.gamma.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: self.gamma.len(),
            });
        }
        if budget.n() != n {
            return Err(Error::DimensionMismatch {
                expected: budget.n(),
                found: n,
            });
        }
        if self.g.iter().chain(&self.gamma).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("dual has non-finite entries".into()));
        }
        for j in 0..n {
            for k in 0..n {
                if j == k {
                    continue;
                }
                let v = self.gamma(j, k);
                if v < 0.0 {
                    return Err(Error::InvalidSpec(format!("gamma[{}][{}] < 0", j + 1, k + 1)));
                }
                if !budget.is_constrained(j, k) && v != 0.0 {
                    return Err(Error::InvalidSpec(format!(
                        "gamma[{}][{}] must be 0 on an unconstrained pair",
                        j + 1,
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub n: usize,
    pub target: TargetDistribution,
    pub budget: EnvyBudget,
    /// Upper bound `x̄` on every valuation coordinate.
    pub value_bound: f64,
}

impl ProblemSpec {
    /// Builds and validates a spec whose `n` is taken from the target.
    pub fn new(target: TargetDistribution, budget: EnvyBudget, value_bound: f64) -> Result<Self> {
        let spec = Self {
            n: target.len(),
            target,
            budget,
            value_bound,
        };
        validate_spec(&spec)?;
        Ok(spec)
    }

    pub fn unconstrained(target: TargetDistribution, value_bound: f64) -> Result<Self> {
        let budget = EnvyBudget::unconstrained(target.len());
        Self::new(target, budget, value_bound)
    }
}

pub fn validate_spec(spec: &ProblemSpec) -> Result<()> {
    if spec.n < 2 {
        return Err(Error::InvalidSpec(format!("need at least 2 recipients, got {}", spec.n)));
    }
    if spec.target.len() != spec.n {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            found: spec.target.len(),
        });
    }
    if spec.budget.n() != spec.n {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            found: spec.budget.n(),
        });
    }
    check_simplex(spec.target.as_slice())?;
    if !(spec.value_bound > 0.0) || !spec.value_bound.is_finite() {
        return Err(Error::NonpositiveBound(spec.value_bound));
    }
    for j in 0..spec.n {
        for k in 0..spec.n {
            let v = spec.budget.get(j, k);
            if j != k && (v.is_nan() || v < 0.0) {
                return Err(Error::InvalidBudget(format!("lambda[{}][{}] = {}", j + 1, k + 1, v)));
            }
        }
    }
    Ok(())
}

/// Summary of one solve: trace, residuals on a held-out set, and metadata.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub step_size: f64,
    pub seed: u64,
    /// `(iteration, running mean of the per-sample objective)`.
    pub objective_trace: Vec<(usize, f64)>,
    /// `|cell mass - p*_i|` per recipient.
    pub mass_residual: Vec<f64>,
    /// `max_k (envy_jk - lambda_jk)` per recipient; `-inf` when a recipient has
    /// no constrained pair.
    pub envy_residual: Vec<f64>,
    pub welfare: f64,
}
