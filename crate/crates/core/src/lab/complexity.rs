//! Sample-complexity study: dual gap of the empirical maximizer against a
//! long-run reference as the sample size grows.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::cells::empirical_objective;
use crate::error::{Error, Result};
use crate::lab::{quantile, EVAL_TAG, OUTPUT_MAGIC};
use crate::problem::{uniform_budget, DualSolution, ProblemSpec, TargetDistribution};
use crate::seed::derive_seed;
use crate::solver::{solve_erm, solve_erm_from, solve_sgd, ErmConfig, SgdConfig};
use crate::sources::{SampleSet, SourceSpec};

const REFERENCE_TAG: u64 = 0x5245_4600; // "REF"
const TRAIN_TAG: u64 = 0x5452_4e00; // "TRN"
const ERM_TAG: u64 = 0x4552_4d00; // "ERM"

#[derive(Debug, Clone)]
pub struct SampleComplexityConfig {
    pub source: SourceSpec,
    pub target: TargetDistribution,
    /// Uniform envy budget of the studied problem (`inf` for none).
    pub epsilon: f64,
    /// Sample sizes, strictly increasing.
    pub sizes: Vec<usize>,
    pub trials: usize,
    /// SGD steps for the reference dual.
    pub reference_iterations: usize,
    pub eval_size: usize,
    pub master_seed: u64,
    pub erm: ErmConfig,
    /// Polishes the SGD reference into the maximizer of the evaluation-set
    /// objective (warm-started ERM). Without it the reference's own
    /// optimization error floors the measured gaps.
    pub refine_reference: Option<ErmConfig>,
    /// Trial `k` trains every size on prefixes of one sample stream
    /// (common random numbers across `m`); each size still sees `m` i.i.d.
    /// draws. When false every `(m, k)` draws its own stream.
    pub nested: bool,
}

impl SampleComplexityConfig {
    pub fn new(source: SourceSpec, target: TargetDistribution) -> Self {
        Self {
            source,
            target,
            epsilon: 0.1,
            sizes: (6..=13).map(|k| 1usize << k).collect(),
            trials: 16,
            reference_iterations: 2_000_000,
            eval_size: 500_000,
            master_seed: 0,
            erm: ErmConfig::default(),
            refine_reference: Some(ErmConfig {
                restarts: 1,
                initial_step: 0.01,
                stages: 28,
                ..ErmConfig::default()
            }),
            nested: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.sizes[0] == 0 {
            return Err(Error::InvalidConfig("sample sizes must be nonempty and positive".into()));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("sample sizes must be strictly increasing".into()));
        }
        if self.trials == 0 || self.reference_iterations == 0 || self.eval_size == 0 {
            return Err(Error::InvalidConfig(
                "trials, reference iterations and eval size must be at least 1".into(),
            ));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidConfig(format!("epsilon must be >= 0 or inf, got {}", self.epsilon)));
        }
        if self.source.n() != self.target.len() {
            return Err(Error::InvalidConfig(format!(
                "source has {} columns but the target has {} recipients",
                self.source.n(),
                self.target.len()
            )));
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<ProblemSpec> {
        let budget = uniform_budget(self.epsilon, &self.target)?;
        ProblemSpec::new(self.target.clone(), budget, self.source.value_bound())
    }

    /// The long-run SGD dual, before any refinement.
    pub fn sgd_reference(&self) -> Result<DualSolution> {
        let cfg = SgdConfig {
            iterations: self.reference_iterations,
            seed: derive_seed(self.master_seed, REFERENCE_TAG, 0),
            eval_set_size: 0,
            ..SgdConfig::default()
        };
        Ok(solve_sgd(&self.source, &self.problem()?, &cfg)?.0)
    }

    pub fn eval_set(&self) -> Result<SampleSet> {
        self.source
            .stream(derive_seed(self.master_seed, EVAL_TAG, 0))
            .draw(self.eval_size)
    }

    /// Training sets of trial `trial`, one per size.
    pub fn training_sets(&self, trial: usize) -> Result<Vec<SampleSet>> {
        if self.nested {
            let largest = *self.sizes.last().expect("validated");
            let full = self
                .source
                .stream(derive_seed(self.master_seed, TRAIN_TAG, trial as u64))
                .draw(largest)?;
            self.sizes
                .iter()
                .map(|&m| SampleSet::new(full.n(), full.values()[..m * full.n()].to_vec()))
                .collect()
        } else {
            self.sizes
                .iter()
                .map(|&m| {
                    self.source
                        .stream(derive_seed(self.master_seed, m as u64, trial as u64))
                        .draw(m)
                })
                .collect()
        }
    }

    fn erm_config(&self, m: usize, trial: usize) -> ErmConfig {
        ErmConfig {
            seed: derive_seed(self.master_seed ^ ERM_TAG, m as u64, trial as u64),
            ..self.erm.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityRow {
    pub m: usize,
    pub median_gap: f64,
    pub q25_gap: f64,
    pub q75_gap: f64,
    /// `median_gap(m_1) * sqrt(m_1 / m)`.
    pub reference_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleComplexityTable {
    pub epsilon: Option<f64>,
    pub rows: Vec<ComplexityRow>,
    /// `gaps[i][k]`: gap of trial `k` at size `sizes[i]`.
    pub gaps: Vec<Vec<f64>>,
    pub reference: DualSolution,
}

impl SampleComplexityTable {
    /// Least-squares slope of `ln(median gap)` against `ln(m)`; `None` when
    /// some median is not positive.
    pub fn loglog_slope(&self) -> Option<f64> {
        let points: Vec<(f64, f64)> = self
            .rows
            .iter()
            .map(|r| ((r.m as f64).ln(), r.median_gap))
            .collect();
        if points.len() < 2 || points.iter().any(|&(_, g)| !(g > 0.0)) {
            return None;
        }
        let pts: Vec<(f64, f64)> = points.into_iter().map(|(x, g)| (x, g.ln())).collect();
        Some(least_squares_slope(&pts))
    }
}

pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn run_sample_complexity(cfg: &SampleComplexityConfig) -> Result<SampleComplexityTable> {
    cfg.validate()?;
    let spec = cfg.problem()?;
    let eval = cfg.eval_set()?;
    let mut reference = cfg.sgd_reference()?;
    if let Some(polish) = &cfg.refine_reference {
        let (refined, _) = solve_erm_from(&eval, &spec, polish, &reference)?;
        reference = refined;
    }
    let reference_value = empirical_objective(&eval, &reference, &spec)?;

    let sets = (0..cfg.trials)
        .map(|k| cfg.training_sets(k))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.sizes.len())
        .flat_map(|i| (0..cfg.trials).map(move |k| (i, k)))
        .collect();
    let flat = jobs
        .par_iter()
        .map(|&(i, k)| {
            let (dual, _) = solve_erm(&sets[k][i], &spec, &cfg.erm_config(cfg.sizes[i], k))?;
            Ok(reference_value - empirical_objective(&eval, &dual, &spec)?)
        })
        .collect::<Result<Vec<f64>>>()?;

    let gaps: Vec<Vec<f64>> = flat.chunks(cfg.trials).map(<[f64]>::to_vec).collect();
    let mut rows: Vec<ComplexityRow> = Vec::with_capacity(cfg.sizes.len());
    for (&m, trial_gaps) in cfg.sizes.iter().zip(&gaps) {
        let mut sorted = trial_gaps.clone();
        sorted.sort_by(f64::total_cmp);
        rows.push(ComplexityRow {
            m,
            median_gap: quantile(&sorted, 0.5),
            q25_gap: quantile(&sorted, 0.25),
            q75_gap: quantile(&sorted, 0.75),
            reference_rate: 0.0,
        });
    }
    let (m0, g0) = (rows[0].m as f64, rows[0].median_gap);
    for r in rows.iter_mut() {
        r.reference_rate = g0 * (m0 / r.m as f64).sqrt();
    }
    Ok(SampleComplexityTable {
        epsilon: cfg.epsilon.is_finite().then_some(cfg.epsilon),
        rows,
        gaps,
        reference,
    })
}

pub fn write_complexity_csv<W: Write>(out: &mut W, table: &SampleComplexityTable) -> Result<()> {
    writeln!(out, "{OUTPUT_MAGIC}")?;
    writeln!(out, "m,median_gap,q25_gap,q75_gap,reference_rate")?;
    for r in &table.rows {
        writeln!(out, "{},{},{},{},{}", r.m, r.median_gap, r.q25_gap, r.q75_gap, r.reference_rate)?;
    }
    Ok(())
}

pub fn write_complexity_json<W: Write>(out: &mut W, table: &SampleComplexityTable) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, &serde_json::json!({
        "format": "envyot v1",
        "epsilon": table.epsilon,
        "loglog_slope": table.loglog_slope(),
        "rows": table.rows,
        "gaps": table.gaps,
        "reference": table.reference,
    }))?;
    writeln!(out)?;
    Ok(())
}
