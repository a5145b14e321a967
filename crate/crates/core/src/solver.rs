//! Dual optimization.
//!
//! [`solve_sgd`] is projected stochastic supergradient ascent over a sample
//! stream: one fresh item per step, `eta = 1/sqrt(T)`, ascent on `g`,
//! projected ascent on `gamma`, averaged iterates returned.
//!
//! [`solve_erm`] maximizes the empirical objective of a fixed sample set by
//! multi-start projected supergradient ascent. Each start runs a sequence
//! of stages warm-started at the best point so far; within a stage the step
//! decays as `a/sqrt(t)` and `a` halves from one stage to the next, which
//! lets the ascent settle onto the kinks of the piecewise-linear objective.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cells::{empirical_objective, stochastic_gradient_with, CellStats, GradientPair, LaguerreCells};
use crate::error::{Error, Result};
use crate::metrics::{envy_residual, welfare_from_stats};
use crate::problem::{validate_spec, DualSolution, ProblemSpec, SolveReport};
use crate::seed::derive_seed;
use crate::sources::{SampleSet, SourceSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    /// Number of stochastic steps `T`.
    pub iterations: usize,
    /// Overrides the default step size `1/sqrt(T)`.
    pub step_size: Option<f64>,
    pub seed: u64,
    /// Rows drawn after training for the residuals in the report.
    pub eval_set_size: usize,
    /// Return the iterate average (default) instead of the last iterate.
    pub average_iterates: bool,
    /// Number of checkpoints in the objective trace.
    pub trace_points: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            iterations: 200_000,
            step_size: None,
            seed: 0,
            eval_set_size: 100_000,
            average_iterates: true,
            trace_points: 100,
        }
    }
}

impl SgdConfig {
    pub fn step(&self) -> f64 {
        self.step_size
            .unwrap_or_else(|| 1.0 / (self.iterations as f64).sqrt())
    }

    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if let Some(eta) = self.step_size {
            if !(eta > 0.0) || !eta.is_finite() {
                return Err(Error::InvalidConfig(format!("step size must be positive, got {eta}")));
            }
        }
        Ok(())
    }
}

fn check_source(source: &SourceSpec, spec: &ProblemSpec) -> Result<()> {
    validate_spec(spec)?;
    if source.n() != spec.n {
        return Err(Error::InvalidSpec(format!(
            "source produces {} values per item but the problem has {} recipients",
            source.n(),
            spec.n
        )));
    }
    Ok(())
}

/// Projected SGD. See [`solve_sgd_observed`] to watch the iterates.
pub fn solve_sgd(source: &SourceSpec, spec: &ProblemSpec, cfg: &SgdConfig) -> Result<(DualSolution, SolveReport)> {
    solve_sgd_observed(source, spec, cfg, |_, _| {})
}

/// Projected SGD; `observe(t, iterate)` sees every iterate `t = 1..=T`.
pub fn solve_sgd_observed<F>(
    source: &SourceSpec,
    spec: &ProblemSpec,
    cfg: &SgdConfig,
    mut observe: F,
) -> Result<(DualSolution, SolveReport)>
where
    F: FnMut(usize, &DualSolution),
{
    check_source(source, spec)?;
    cfg.validate()?;

    let n = spec.n;
    let eta = cfg.step();
    let mut stream = source.stream(cfg.seed);
    let mut dual = DualSolution::zeros(n);
    let mut cells = LaguerreCells::new(&dual, &spec.target)?;
    let mut grad = GradientPair::zeros(n);
    let mut sum = DualSolution::zeros(n);
    let mut x = vec![0.0; n];

    let constrained: Vec<(usize, usize)> = (0..n)
        .flat_map(|j| (0..n).map(move |k| (j, k)))
        .filter(|&(j, k)| spec.budget.is_constrained(j, k))
        .collect();
    let lambda_dot = |d: &DualSolution| -> f64 {
        constrained
            .iter()
            .map(|&(j, k)| d.gamma(j, k) * spec.budget.get(j, k))
            .sum()
    };

    let every = (cfg.iterations / cfg.trace_points.max(1)).max(1);
    let mut trace = Vec::new();
    let mut window = 0.0;
    let mut window_len = 0usize;

    for t in 1..=cfg.iterations {
        stream.next_into(&mut x)?;
        cells.update(&dual, &spec.target);
        stochastic_gradient_with(&x, &cells, spec, &mut grad);

        let linear: f64 = dual.g.iter().zip(spec.target.as_slice()).map(|(g, p)| g * p).sum::<f64>() - lambda_dot(&dual);
        window += cells.assign_with_cost(&x).1 + linear;
        window_len += 1;

        for (g, d) in dual.g.iter_mut().zip(&grad.dg) {
            *g += eta * d;
        }
        for &(j, k) in &constrained {
            let slot = j * n + k;
            dual.gamma[slot] = (dual.gamma[slot] + eta * grad.dgamma[slot]).max(0.0);
        }

        for (s, g) in sum.g.iter_mut().zip(&dual.g) {
            *s += g;
        }
        for &(j, k) in &constrained {
            sum.gamma[j * n + k] += dual.gamma[j * n + k];
        }
        observe(t, &dual);

        if t % every == 0 || t == cfg.iterations {
            trace.push((t, window / window_len as f64));
            window = 0.0;
            window_len = 0;
        }
    }

    let result = if cfg.average_iterates {
        let scale = cfg.iterations as f64;
        DualSolution {
            g: sum.g.iter().map(|v| v / scale).collect(),
            gamma: sum.gamma.iter().map(|v| v / scale).collect(),
        }
    } else {
        dual
    };

    let (mass_residual, envy_residual, welfare) = if cfg.eval_set_size > 0 {
        let eval = stream.draw(cfg.eval_set_size)?;
        let cells = LaguerreCells::new(&result, &spec.target)?;
        let stats = CellStats::collect(&eval, &cells);
        let masses = stats.masses();
        (
            masses
                .iter()
                .zip(spec.target.as_slice())
                .map(|(m, p)| (m - p).abs())
                .collect(),
            envy_residual(&stats, &spec.target, &spec.budget),
            welfare_from_stats(&stats),
        )
    } else {
        (vec![f64::NAN; n], vec![f64::NAN; n], f64::NAN)
    };

    let report = SolveReport {
        iterations: cfg.iterations,
        step_size: eta,
        seed: cfg.seed,
        objective_trace: trace,
        mass_residual,
        envy_residual,
        welfare,
    };
    Ok((result, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErmConfig {
    /// Independent starts: the first at zero, the rest at small seeded
    /// perturbations of zero.
    pub restarts: usize,
    /// Supergradient steps per stage.
    pub max_iterations: usize,
    /// Step scale of the first stage; stage `s` starts at `initial_step / 2^s`
    /// and decays as `1/sqrt(t)` within the stage.
    pub initial_step: f64,
    /// Stages per start; the last stage's step scale is
    /// `initial_step / 2^(stages - 1)`.
    pub stages: usize,
    pub seed: u64,
}

impl Default for ErmConfig {
    fn default() -> Self {
        Self {
            restarts: 2,
            max_iterations: 150,
            initial_step: 1.0,
            stages: 36,
            seed: 0,
        }
    }
}

impl ErmConfig {
    fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iterations == 0 || self.stages == 0 {
            return Err(Error::InvalidConfig(
                "restarts, iterations and stages must be at least 1".into(),
            ));
        }
        if !(self.initial_step > 0.0) || !self.initial_step.is_finite() {
            return Err(Error::InvalidConfig("initial step must be positive".into()));
        }
        Ok(())
    }
}

fn objective_and_gradient(
    set: &SampleSet,
    dual: &DualSolution,
    spec: &ProblemSpec,
    cells: &mut LaguerreCells,
) -> (f64, GradientPair) {
    cells.update(dual, &spec.target);
    let stats = CellStats::collect(set, cells);
    let n = spec.n;
    let mut linear: f64 = dual.g.iter().zip(spec.target.as_slice()).map(|(g, p)| g * p).sum();
    for j in 0..n {
        for k in 0..n {
            if spec.budget.is_constrained(j, k) {
                linear -= dual.gamma(j, k) * spec.budget.get(j, k);
            }
        }
    }
    let value = stats.min_cost_sum / stats.rows as f64 + linear;
    (value, stats.gradient(spec))
}

fn ascend_from(set: &SampleSet, spec: &ProblemSpec, cfg: &ErmConfig, start: DualSolution) -> Result<(DualSolution, f64)> {
    let mut cells = LaguerreCells::new(&start, &spec.target)?;
    let (mut best_value, _) = objective_and_gradient(set, &start, spec, &mut cells);
    let mut best = start;

    for stage in 0..cfg.stages {
        let scale = cfg.initial_step * 0.5f64.powi(stage as i32);
        let mut dual = best.clone();
        for t in 0..cfg.max_iterations {
            let (value, grad) = objective_and_gradient(set, &dual, spec, &mut cells);
            if value > best_value {
                best_value = value;
                best.clone_from(&dual);
            }
            let eta = scale / ((t + 1) as f64).sqrt();
            for (g, d) in dual.g.iter_mut().zip(&grad.dg) {
                *g += eta * d;
            }
            for (v, d) in dual.gamma.iter_mut().zip(&grad.dgamma) {
                *v += eta * d;
            }
            dual.project(&spec.budget);
        }
        let (value, _) = objective_and_gradient(set, &dual, spec, &mut cells);
        if value > best_value {
            best_value = value;
            best = dual;
        }
    }
    Ok((best, best_value))
}

fn check_set(set: &SampleSet, spec: &ProblemSpec, cfg: &ErmConfig) -> Result<()> {
    validate_spec(spec)?;
    cfg.validate()?;
    if set.n() != spec.n {
        return Err(Error::InvalidSpec(format!(
            "sample set has {} columns but the problem has {} recipients",
            set.n(),
            spec.n
        )));
    }
    Ok(())
}

/// Empirical maximizer of the dual objective over `set`, with its value.
pub fn solve_erm(set: &SampleSet, spec: &ProblemSpec, cfg: &ErmConfig) -> Result<(DualSolution, f64)> {
    check_set(set, spec, cfg)?;

    let n = spec.n;
    let mut best: Option<(DualSolution, f64)> = None;
    for r in 0..cfg.restarts {
        let mut start = DualSolution::zeros(n);
        if r > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x45_52_4d, r as u64));
            for g in start.g.iter_mut() {
                *g = rng.gen_range(-0.1..0.1);
            }
            for v in start.gamma.iter_mut() {
                *v = rng.gen_range(0.0..0.1);
            }
            start.project(&spec.budget);
        }
        let candidate = ascend_from(set, spec, cfg, start)?;
        if best.as_ref().is_none_or(|(_, v)| candidate.1 > *v) {
            best = Some(candidate);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// As [`solve_erm`] with a single start at `start` (projected onto the
/// feasible set first); `cfg.restarts` is ignored.
pub fn solve_erm_from(
    set: &SampleSet,
    spec: &ProblemSpec,
    cfg: &ErmConfig,
    start: &DualSolution,
) -> Result<(DualSolution, f64)> {
    check_set(set, spec, cfg)?;
    if start.n() != spec.n {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            found: start.n(),
        });
    }
    let mut start = start.clone();
    start.project(&spec.budget);
    ascend_from(set, spec, cfg, start)
}

/// `E_eval(reference) - E_eval(candidate)`.
pub fn dual_gap(candidate: &DualSolution, reference: &DualSolution, eval: &SampleSet, spec: &ProblemSpec) -> Result<f64> {
    Ok(empirical_objective(eval, reference, spec)? - empirical_objective(eval, candidate, spec)?)
}
