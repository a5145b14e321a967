//! The envy-free special case: normal partitions described by a shift
//! vector `v`, where an item goes to `argmax_i (x_i + v_i)`.
//!
//! This is the Laguerre-cell policy with `g = v` and `gamma = 0`. The
//! matching distribution `p(v)` is measured on a fixed evaluation set.

use crate::error::{Error, Result};
use crate::problem::{DualSolution, TargetDistribution};
use crate::sources::SampleSet;

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftVector(pub Vec<f64>);

impl ShiftVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSolverConfig {
    /// Target loss `epsilon` on `||p(v) - p*||_1`.
    pub tolerance: f64,
    /// Density bound `mu`.
    pub density_bound: f64,
    /// Valuation bound `x̄`.
    pub value_bound: f64,
    pub max_iterations: usize,
}

impl Default for ShiftSolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 0.02,
            density_bound: 2.0,
            value_bound: 1.0,
            max_iterations: 100_000,
        }
    }
}

impl ShiftSolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || !(self.density_bound > 0.0) || !(self.value_bound > 0.0) {
            return Err(Error::InvalidConfig(
                "tolerance, density bound and value bound must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Outer iteration bound of the line search, `ceil(4 n^3 x̄ mu / eps)`.
    pub fn line_search_bound(&self, n: usize) -> usize {
        (4.0 * (n as f64).powi(3) * self.value_bound * self.density_bound / self.tolerance).ceil() as usize
    }

    /// The constant step `1 / (2 n mu)`.
    pub fn constant_step(&self, n: usize) -> f64 {
        1.0 / (2.0 * n as f64 * self.density_bound)
    }

    /// Iteration budget `4 n^3 mu^2 ||v0 - v*||^2 / eps^2` of the constant-step
    /// method for a given squared distance to a solution.
    pub fn constant_step_bound(&self, n: usize, distance_sq: f64) -> usize {
        (4.0 * (n as f64).powi(3) * self.density_bound.powi(2) * distance_sq / self.tolerance.powi(2)).ceil()
            as usize
    }
}

fn check(v: &[f64], eval: &SampleSet, target: &TargetDistribution) -> Result<()> {
    for found in [v.len(), eval.n()] {
        if found != target.len() {
            return Err(Error::DimensionMismatch {
                expected: target.len(),
                found,
            });
        }
    }
    Ok(())
}

fn shifted_argmax(x: &[f64], v: &[f64]) -> usize {
    let mut best = 0;
    let mut best_value = x[0] + v[0];
    for i in 1..x.len() {
        let value = x[i] + v[i];
        if value > best_value {
            best = i;
            best_value = value;
        }
    }
    best
}

/// `p(v)`: empirical frequency of `argmax_i (x_i + v_i)`, lowest index on ties.
pub fn matching_oracle(v: &ShiftVector, eval: &SampleSet) -> Vec<f64> {
    let mut counts = vec![0usize; eval.n()];
    for x in eval.rows() {
        counts[shifted_argmax(x, &v.0)] += 1;
    }
    let m = eval.len() as f64;
    counts.into_iter().map(|c| c as f64 / m).collect()
}

fn l1(p: &[f64], target: &TargetDistribution) -> f64 {
    p.iter().zip(target.as_slice()).map(|(a, b)| (a - b).abs()).sum()
}

/// `L(v) = ||p(v) - p*||_1`.
pub fn l1_loss(v: &ShiftVector, eval: &SampleSet, target: &TargetDistribution) -> Result<f64> {
    check(&v.0, eval, target)?;
    Ok(l1(&matching_oracle(v, eval), target))
}

/// Raises `v_i` so that recipient `i`'s share lands in `[goal - band, goal]`.
/// Falls back to the closer bracket end when a single item straddles the band.
fn raise_to_share(v: &mut ShiftVector, i: usize, goal: f64, band: f64, eval: &SampleSet) {
    let share = |v: &ShiftVector| matching_oracle(v, eval)[i];
    // at `hi` recipient i strictly wins every row
    let mut hi = eval
        .rows()
        .map(|x| {
            (0..x.len())
                .filter(|&j| j != i)
                .map(|j| x[j] + v.0[j])
                .fold(f64::NEG_INFINITY, f64::max)
                - x[i]
                - v.0[i]
        })
        .fold(0.0f64, f64::max);
    hi += hi.abs().max(1.0) * 1e-12;
    let base = v.0[i];
    let mut lo = 0.0;
    let mut probe = v.clone();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        probe.0[i] = base + mid;
        let s = share(&probe);
        if s > goal {
            hi = mid;
        } else if s < goal - band {
            lo = mid;
        } else {
            v.0[i] = base + mid;
            return;
        }
        if hi - lo <= f64::EPSILON * (base.abs() + hi.abs()).max(1.0) {
            break;
        }
    }
    probe.0[i] = base + lo;
    let below = goal - share(&probe);
    probe.0[i] = base + hi;
    let above = share(&probe) - goal;
    v.0[i] = base + if below <= above { lo } else { hi };
}

/// Line search over normal partitions: repeatedly raise the shift of the
/// most under-matched recipient until its share meets the target (within
/// `epsilon / (4n)` from below). Returns the shift and the number of outer
/// iterations.
pub fn line_search_solve(
    eval: &SampleSet,
    target: &TargetDistribution,
    cfg: &ShiftSolverConfig,
) -> Result<(ShiftVector, usize)> {
    line_search_observed(eval, target, cfg, |_, _, _| {})
}

/// As [`line_search_solve`]; `observe(t, v_t, p(v_t))` runs before every
/// termination check.
pub fn line_search_observed<F>(
    eval: &SampleSet,
    target: &TargetDistribution,
    cfg: &ShiftSolverConfig,
    mut observe: F,
) -> Result<(ShiftVector, usize)>
where
    F: FnMut(usize, &ShiftVector, &[f64]),
{
    cfg.validate()?;
    let n = target.len();
    let mut v = ShiftVector::zeros(n);
    check(&v.0, eval, target)?;
    let band = cfg.tolerance / (4.0 * n as f64);
    let mut best = (f64::INFINITY, v.clone());

    for t in 0.. {
        let p = matching_oracle(&v, eval);
        observe(t, &v, &p);
        let loss = l1(&p, target);
        if loss < best.0 {
            best = (loss, v.clone());
        }
        if loss <= cfg.tolerance {
            return Ok((v, t));
        }
        if t >= cfg.max_iterations {
            return Err(Error::MaxIterationsExceeded {
                iterations: t,
                best_loss: best.0,
                best: best.1 .0,
            });
        }
        let under = (0..n)
            .min_by(|&a, &b| (p[a] - target.get(a)).total_cmp(&(p[b] - target.get(b))))
            .expect("n >= 1");
        raise_to_share(&mut v, under, target.get(under), band, eval);
    }
    unreachable!()
}

fn step(v: &mut ShiftVector, p: &[f64], target: &TargetDistribution, eta: f64) {
    for ((vi, pi), ti) in v.0.iter_mut().zip(p).zip(target.as_slice()) {
        *vi -= eta * (pi - ti);
    }
}

/// Fixed-step iteration `v <- v - eta (p(v) - p*)` from `v = 0` with
/// `eta = 1/(2 n mu)`, for `iterations` steps. Returns the visited iterate
/// with the smallest loss and the loss trace `L(v_1), ..., L(v_T)`.
pub fn constant_step_solve(
    eval: &SampleSet,
    target: &TargetDistribution,
    cfg: &ShiftSolverConfig,
    iterations: usize,
) -> Result<(ShiftVector, Vec<f64>)> {
    cfg.validate()?;
    if iterations == 0 {
        return Err(Error::InvalidConfig("constant-step solver needs at least one step".into()));
    }
    let n = target.len();
    let mut v = ShiftVector::zeros(n);
    check(&v.0, eval, target)?;
    let eta = cfg.constant_step(n);
    let mut p = matching_oracle(&v, eval);
    let mut trace = Vec::with_capacity(iterations);
    let mut best = (f64::INFINITY, v.clone());
    for _ in 0..iterations {
        step(&mut v, &p, target, eta);
        p = matching_oracle(&v, eval);
        let loss = l1(&p, target);
        trace.push(loss);
        if loss < best.0 {
            best = (loss, v.clone());
        }
    }
    Ok((best.1, trace))
}

/// Runs the fixed-step iteration until `L(v_t) <= tolerance`, for at most
/// `max_steps` steps. Returns `(t, v_t)` for the first such `t >= 0`.
pub fn constant_step_reach(
    eval: &SampleSet,
    target: &TargetDistribution,
    cfg: &ShiftSolverConfig,
    max_steps: usize,
) -> Result<Option<(usize, ShiftVector)>> {
    cfg.validate()?;
    let n = target.len();
    let mut v = ShiftVector::zeros(n);
    check(&v.0, eval, target)?;
    let eta = cfg.constant_step(n);
    for t in 0..=max_steps {
        let p = matching_oracle(&v, eval);
        if l1(&p, target) <= cfg.tolerance {
            return Ok(Some((t, v)));
        }
        step(&mut v, &p, target, eta);
    }
    Ok(None)
}

/// The equivalent dual: `g = v`, `gamma = 0`.
pub fn shift_to_dual(v: &ShiftVector) -> DualSolution {
    DualSolution::from_potentials(v.0.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_on_single_row() {
        let set = SampleSet::from_rows(&[vec![0.9, 0.1]]).unwrap();
        assert_eq!(matching_oracle(&ShiftVector::zeros(2), &set), vec![1.0, 0.0]);
        let tie = SampleSet::from_rows(&[vec![0.5, 0.5]]).unwrap();
        assert_eq!(matching_oracle(&ShiftVector::zeros(2), &tie), vec![1.0, 0.0]);
    }

    #[test]
    fn loss_is_bounded() {
        let set = SampleSet::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.3]]).unwrap();
        let target = TargetDistribution::new(vec![0.1, 0.9]).unwrap();
        for shift in [-2.0, -0.5, 0.0, 0.5, 2.0] {
            let loss = l1_loss(&ShiftVector(vec![shift, 0.0]), &set, &target).unwrap();
            assert!((0.0..=2.0).contains(&loss));
        }
        assert!(l1_loss(&ShiftVector::zeros(3), &set, &target).is_err());
    }

    #[test]
    fn bounds_for_the_two_recipient_box() {
        let cfg = ShiftSolverConfig::default();
        assert_eq!(cfg.line_search_bound(2), 3200);
        assert_eq!(cfg.constant_step(2), 0.125);
        assert_eq!(cfg.constant_step_bound(2, 0.125), 40_000);
    }

    #[test]
    fn line_search_reports_max_iterations() {
        // one heavy row can never be split: p(v) only takes values 0 or 1
        let set = SampleSet::from_rows(&[vec![0.5, 0.5]]).unwrap();
        let target = TargetDistribution::new(vec![0.5, 0.5]).unwrap();
        let cfg = ShiftSolverConfig {
            max_iterations: 5,
            ..ShiftSolverConfig::default()
        };
        match line_search_solve(&set, &target, &cfg) {
            Err(Error::MaxIterationsExceeded { iterations, best_loss, best }) => {
                assert_eq!(iterations, 5);
                assert_eq!(best_loss, 1.0);
                assert_eq!(best.len(), 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shift_to_dual_is_potentials_only() {
        let d = shift_to_dual(&ShiftVector::zeros(2));
        assert_eq!(d, DualSolution::zeros(2));
    }
}
