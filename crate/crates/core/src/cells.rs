//! Generalized Laguerre cells: the allocation policy induced by a dual
//! solution, the empirical dual objective and its supergradients.
//!
//! For a dual `(g, gamma)` the envy-adjusted cost of sending item `x` to
//! recipient `j` is
//!
//! ```text
//! cost_j(x) = (1 + sum_{k!=j} gamma_jk) * (-x_j)
//!             - sum_{k!=j} gamma_kj * (-x_k) * p_k / p_j
//!             - g_j
//! ```
//!
//! which is affine in `x`. An item goes to the cheapest recipient, lowest
//! index on ties.

use crate::error::{Error, Result};
use crate::problem::{DualSolution, ProblemSpec, TargetDistribution};
use crate::sources::SampleSet;

/// Recipient chosen for one item (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Assignment(pub usize);

impl Assignment {
    pub fn recipient(self) -> usize {
        self.0
    }
}

/// Supergradient of the dual objective. `dgamma` is row-major `n x n`,
/// zero on the diagonal and on unconstrained pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPair {
    pub dg: Vec<f64>,
    pub dgamma: Vec<f64>,
}

impl GradientPair {
    pub fn zeros(n: usize) -> Self {
        Self {
            dg: vec![0.0; n],
            dgamma: vec![0.0; n * n],
        }
    }

    pub fn dgamma(&self, j: usize, k: usize) -> f64 {
        self.dgamma[j * self.dg.len() + k]
    }

    /// Inner product with a dual-shaped direction.
    pub fn dot(&self, direction: &DualSolution) -> f64 {
        let a: f64 = self.dg.iter().zip(&direction.g).map(|(a, b)| a * b).sum();
        let b: f64 = self.dgamma.iter().zip(&direction.gamma).map(|(a, b)| a * b).sum();
        a + b
    }
}

/// A dual solution compiled into per-recipient affine costs
/// `cost_j(x) = w_j . x - g_j`.
#[derive(Debug, Clone)]
pub struct LaguerreCells {
    n: usize,
    weights: Vec<f64>,
    offsets: Vec<f64>,
}

impl LaguerreCells {
    pub fn new(dual: &DualSolution, target: &TargetDistribution) -> Result<Self> {
        check_dual(dual, target)?;
        let mut cells = Self {
            n: dual.n(),
            weights: vec![0.0; dual.n() * dual.n()],
            offsets: Vec::new(),
        };
        cells.update(dual, target);
        Ok(cells)
    }

    /// Recompiles in place; dimensions must already match.
    pub fn update(&mut self, dual: &DualSolution, target: &TargetDistribution) {
        let n = self.n;
        let p = target.as_slice();
        for j in 0..n {
            let mut out_flow = 0.0;
            for k in 0..n {
                if k != j {
                    out_flow += dual.gamma(j, k);
                    self.weights[j * n + k] = dual.gamma(k, j) * p[k] / p[j];
                }
            }
            self.weights[j * n + j] = -(1.0 + out_flow);
        }
        self.offsets.clear();
        self.offsets.extend_from_slice(&dual.g);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cost(&self, x: &[f64], j: usize) -> f64 {
        let w = &self.weights[j * self.n..(j + 1) * self.n];
        let dot: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
        dot - self.offsets[j]
    }

    /// Cheapest recipient and its cost.
    pub fn assign_with_cost(&self, x: &[f64]) -> (usize, f64) {
        debug_assert_eq!(x.len(), self.n);
        let mut best = 0;
        let mut best_cost = self.cost(x, 0);
        for j in 1..self.n {
            let c = self.cost(x, j);
            if c < best_cost {
                best = j;
                best_cost = c;
            }
        }
        (best, best_cost)
    }

    pub fn assign(&self, x: &[f64]) -> usize {
        self.assign_with_cost(x).0
    }

    /// Gap between the second-cheapest and cheapest cost: how far `x` sits
    /// from its cell boundary in cost units.
    pub fn boundary_margin(&self, x: &[f64]) -> f64 {
        let (best, best_cost) = self.assign_with_cost(x);
        (0..self.n)
            .filter(|&j| j != best)
            .map(|j| self.cost(x, j) - best_cost)
            .fold(f64::INFINITY, f64::min)
    }
}

fn check_dual(dual: &DualSolution, target: &TargetDistribution) -> Result<()> {
    let n = target.len();
    if dual.g.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: dual.g.len(),
        });
    }
    if dual.gamma.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            found: dual.gamma.len(),
        });
    }
    Ok(())
}

fn check_samples(set: &SampleSet, n: usize) -> Result<()> {
    if set.n() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: set.n(),
        });
    }
    Ok(())
}

/// Envy-adjusted cost of sending `x` to recipient `j`, straight from the
/// defining formula.
pub fn adjusted_cost(
    x: &[f64],
    j: usize,
    dual: &DualSolution,
    target: &TargetDistribution,
) -> Result<f64> {
    let n = target.len();
    check_dual(dual, target)?;
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: x.len(),
        });
    }
    if j >= n {
        return Err(Error::IndexOutOfRange { index: j, n });
    }
    let p = target.as_slice();
    let mut own = 1.0;
    let mut inflow = 0.0;
    for k in (0..n).filter(|&k| k != j) {
        own += dual.gamma(j, k);
        inflow += dual.gamma(k, j) * (-x[k]) * (p[k] / p[j]);
    }
    Ok(own * (-x[j]) - inflow - dual.g[j])
}

pub fn assign(x: &[f64], dual: &DualSolution, target: &TargetDistribution) -> Result<Assignment> {
    if x.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            found: x.len(),
        });
    }
    let cells = LaguerreCells::new(dual, target)?;
    Ok(Assignment(cells.assign(x)))
}

/// Sufficient statistics of a sample set under one policy: per-cell counts,
/// per-cell coordinate sums and the summed minimum cost.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub rows: usize,
    pub counts: Vec<usize>,
    /// Row-major `n x n`: entry `(i, j)` is the sum of `x_j` over cell `i`.
    pub value_sums: Vec<f64>,
    pub min_cost_sum: f64,
}

impl CellStats {
    pub fn collect(set: &SampleSet, cells: &LaguerreCells) -> Self {
        let n = cells.n();
        let mut stats = CellStats {
            rows: set.len(),
            counts: vec![0; n],
            value_sums: vec![0.0; n * n],
            min_cost_sum: 0.0,
        };
        for x in set.rows() {
            let (i, c) = cells.assign_with_cost(x);
            stats.counts[i] += 1;
            stats.min_cost_sum += c;
            for (acc, v) in stats.value_sums[i * n..(i + 1) * n].iter_mut().zip(x) {
                *acc += v;
            }
        }
        stats
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    /// `(1/m) sum_{t in cell i} x_j`.
    pub fn mean_value(&self, cell: usize, coord: usize) -> f64 {
        self.value_sums[cell * self.n() + coord] / self.rows as f64
    }

    pub fn masses(&self) -> Vec<f64> {
        let m = self.rows as f64;
        self.counts.iter().map(|&c| c as f64 / m).collect()
    }

    /// The exact empirical supergradient, from the statistics alone.
    pub fn gradient(&self, spec: &ProblemSpec) -> GradientPair {
        let n = self.n();
        let p = spec.target.as_slice();
        let mut grad = GradientPair::zeros(n);
        for (j, mass) in self.masses().into_iter().enumerate() {
            grad.dg[j] = p[j] - mass;
        }
        for j in 0..n {
            for k in 0..n {
                if spec.budget.is_constrained(j, k) {
                    grad.dgamma[j * n + k] = -self.mean_value(j, j)
                        + self.mean_value(k, j) * p[j] / p[k]
                        - spec.budget.get(j, k);
                }
            }
        }
        grad
    }
}

/// Fraction of rows falling in each cell.
pub fn cell_mass(set: &SampleSet, dual: &DualSolution, target: &TargetDistribution) -> Result<Vec<f64>> {
    check_samples(set, target.len())?;
    let cells = LaguerreCells::new(dual, target)?;
    let mut counts = vec![0usize; target.len()];
    for x in set.rows() {
        counts[cells.assign(x)] += 1;
    }
    let m = set.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / m).collect())
}

/// `g . p - sum over constrained pairs of gamma_jk * lambda_jk`.
fn linear_terms(dual: &DualSolution, spec: &ProblemSpec) -> f64 {
    let n = spec.n;
    let mut value: f64 = dual.g.iter().zip(spec.target.as_slice()).map(|(g, p)| g * p).sum();
    for j in 0..n {
        for k in 0..n {
            if spec.budget.is_constrained(j, k) {
                value -= dual.gamma(j, k) * spec.budget.get(j, k);
            }
        }
    }
    value
}

/// Value of the dual objective for a single item (the integrand of the
/// empirical objective).
pub fn pointwise_objective(x: &[f64], cells: &LaguerreCells, dual: &DualSolution, spec: &ProblemSpec) -> f64 {
    cells.assign_with_cost(x).1 + linear_terms(dual, spec)
}

/// `(1/m) sum_t min_i cost_i(X^t) + g . p - sum gamma_jk lambda_jk`.
pub fn empirical_objective(set: &SampleSet, dual: &DualSolution, spec: &ProblemSpec) -> Result<f64> {
    check_samples(set, spec.n)?;
    let cells = LaguerreCells::new(dual, &spec.target)?;
    let total: f64 = set.rows().map(|x| cells.assign_with_cost(x).1).sum();
    Ok(total / set.len() as f64 + linear_terms(dual, spec))
}

/// Single-sample unbiased supergradient, given a precompiled policy.
pub fn stochastic_gradient_with(x: &[f64], cells: &LaguerreCells, spec: &ProblemSpec, out: &mut GradientPair) {
    let n = spec.n;
    let p = spec.target.as_slice();
    let cell = cells.assign(x);
    out.dg[..n].copy_from_slice(&p[..n]);
    out.dg[cell] -= 1.0;
    for j in 0..n {
        for k in 0..n {
            let slot = &mut out.dgamma[j * n + k];
            if !spec.budget.is_constrained(j, k) {
                *slot = 0.0;
                continue;
            }
            // c(x, y_j) = -x_j
            let cost = -x[j];
            let mut v = -spec.budget.get(j, k);
            if cell == j {
                v += cost;
            }
            if cell == k {
                v -= cost * (p[j] / p[k]);
            }
            *slot = v;
        }
    }
}

pub fn stochastic_gradient(x: &[f64], dual: &DualSolution, spec: &ProblemSpec) -> Result<GradientPair> {
    if x.len() != spec.n {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            found: x.len(),
        });
    }
    let cells = LaguerreCells::new(dual, &spec.target)?;
    let mut grad = GradientPair::zeros(spec.n);
    stochastic_gradient_with(x, &cells, spec, &mut grad);
    Ok(grad)
}

/// Row mean of [`stochastic_gradient`] over `set`, summed in row order and
/// divided by `m` once.
pub fn exact_gradient(set: &SampleSet, dual: &DualSolution, spec: &ProblemSpec) -> Result<GradientPair> {
    check_samples(set, spec.n)?;
    let cells = LaguerreCells::new(dual, &spec.target)?;
    let mut sum = GradientPair::zeros(spec.n);
    let mut row = GradientPair::zeros(spec.n);
    for x in set.rows() {
        stochastic_gradient_with(x, &cells, spec, &mut row);
        for (a, b) in sum.dg.iter_mut().zip(&row.dg) {
            *a += b;
        }
        for (a, b) in sum.dgamma.iter_mut().zip(&row.dgamma) {
            *a += b;
        }
    }
    let m = set.len() as f64;
    sum.dg.iter_mut().for_each(|v| *v /= m);
    sum.dgamma.iter_mut().for_each(|v| *v /= m);
    Ok(sum)
}
