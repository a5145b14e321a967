//! Envy/welfare trade-off sweeps over the uniform budget `epsilon`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lab::{quantile, EVAL_TAG, OUTPUT_MAGIC};
use crate::metrics::{evaluate, welfare_gap_percent};
use crate::problem::{uniform_budget, ProblemSpec, TargetDistribution, UNCONSTRAINED};
use crate::seed::derive_seed;
use crate::solver::{solve_sgd, SgdConfig};
use crate::sources::{SampleSet, SourceSpec};
use crate::DualSolution;

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub source: SourceSpec,
    pub target: TargetDistribution,
    /// Budgets to sweep; `f64::INFINITY` is the unconstrained baseline and
    /// is added when missing.
    pub epsilons: Vec<f64>,
    /// SGD steps per solve.
    pub iterations: usize,
    pub trials: usize,
    pub master_seed: u64,
    /// Rows in the shared held-out evaluation set.
    pub eval_size: usize,
}

impl SweepConfig {
    pub fn new(source: SourceSpec, target: TargetDistribution, epsilons: Vec<f64>) -> Self {
        Self {
            source,
            target,
            epsilons,
            iterations: 200_000,
            trials: 1,
            master_seed: 0,
            eval_size: 100_000,
        }
    }

    /// The epsilon grid actually run: sorted ascending, deduplicated, with
    /// the unconstrained baseline last.
    pub fn grid(&self) -> Result<Vec<f64>> {
        if self.epsilons.is_empty() {
            return Err(Error::InvalidConfig("epsilon list is empty".into()));
        }
        if let Some(&bad) = self.epsilons.iter().find(|e| !(**e >= 0.0)) {
            return Err(Error::InvalidConfig(format!("epsilon must be >= 0 or inf, got {bad}")));
        }
        let mut grid = self.epsilons.clone();
        grid.push(UNCONSTRAINED);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        Ok(grid)
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.iterations == 0 || self.eval_size == 0 {
            return Err(Error::InvalidConfig("iterations and eval size must be at least 1".into()));
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

    /// Seed of the solve for `(epsilon, trial)`.
    pub fn trial_seed(&self, epsilon: f64, trial: usize) -> u64 {
        derive_seed(self.master_seed, epsilon.to_bits(), trial as u64)
    }

    /// The shared held-out evaluation set.
    pub fn eval_set(&self) -> Result<SampleSet> {
        self.source
            .stream(derive_seed(self.master_seed, EVAL_TAG, 0))
            .draw(self.eval_size)
    }

    fn problem(&self, epsilon: f64) -> Result<ProblemSpec> {
        let budget = uniform_budget(epsilon, &self.target)?;
        ProblemSpec::new(self.target.clone(), budget, self.source.value_bound())
    }

    fn sgd(&self, seed: u64) -> SgdConfig {
        SgdConfig {
            iterations: self.iterations,
            seed,
            eval_set_size: 0,
            ..SgdConfig::default()
        }
    }

    /// Solves one `(epsilon, seed)` cell of the sweep.
    pub fn solve(&self, epsilon: f64, seed: u64) -> Result<DualSolution> {
        Ok(solve_sgd(&self.source, &self.problem(epsilon)?, &self.sgd(seed))?.0)
    }
}

fn serialize_epsilon<S: Serializer>(eps: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if eps.is_finite() {
        s.serialize_f64(*eps)
    } else {
        s.serialize_str("inf")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    #[serde(serialize_with = "serialize_epsilon")]
    pub epsilon: f64,
    pub trial: usize,
    pub seed: u64,
    pub welfare: f64,
    pub welfare_gap_percent: f64,
    pub max_normalized_envy: f64,
    pub envy: Vec<f64>,
    /// `|p_i - p*_i|` on the evaluation set.
    pub mass_residual: Vec<f64>,
}

struct Solved {
    epsilon: f64,
    trial: usize,
    seed: u64,
    welfare: f64,
    max_normalized_envy: f64,
    envy: Vec<f64>,
    mass_residual: Vec<f64>,
}

/// Runs every `(epsilon, trial)` solve and evaluates it on one shared
/// held-out set. Records come sorted by `(epsilon, trial)`; the gap of each
/// record is relative to the unconstrained solve of the same trial.
pub fn run_tradeoff(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let eval = cfg.eval_set()?;
    let jobs: Vec<(f64, usize)> = grid
        .iter()
        .flat_map(|&e| (0..cfg.trials).map(move |t| (e, t)))
        .collect();

    let solved = jobs
        .par_iter()
        .map(|&(epsilon, trial)| {
            let seed = cfg.trial_seed(epsilon, trial);
            let dual = cfg.solve(epsilon, seed)?;
            let report = evaluate(&eval, &dual, &cfg.target, None)?;
            Ok(Solved {
                epsilon,
                trial,
                seed,
                welfare: report.welfare,
                max_normalized_envy: report.max_normalized_envy,
                envy: report.envy,
                mass_residual: report
                    .matching
                    .iter()
                    .zip(cfg.target.as_slice())
                    .map(|(m, p)| (m - p).abs())
                    .collect(),
            })
        })
        .collect::<Result<Vec<Solved>>>()?;

    let baseline: Vec<f64> = solved
        .iter()
        .filter(|s| s.epsilon == UNCONSTRAINED)
        .map(|s| s.welfare)
        .collect();
    solved
        .into_iter()
        .map(|s| {
            Ok(SweepRecord {
                welfare_gap_percent: welfare_gap_percent(baseline[s.trial], s.welfare)?,
                epsilon: s.epsilon,
                trial: s.trial,
                seed: s.seed,
                welfare: s.welfare,
                max_normalized_envy: s.max_normalized_envy,
                envy: s.envy,
                mass_residual: s.mass_residual,
            })
        })
        .collect()
}

/// Quantiles over trials at one budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TradeoffSummary {
    #[serde(serialize_with = "serialize_epsilon")]
    pub epsilon: f64,
    pub trials: usize,
    pub median_welfare: f64,
    pub median_gap_percent: f64,
    pub q25_gap_percent: f64,
    pub q75_gap_percent: f64,
    pub median_envy: f64,
    pub q25_envy: f64,
    pub q75_envy: f64,
}

pub fn summarize_tradeoff(records: &[SweepRecord]) -> Vec<TradeoffSummary> {
    let mut out: Vec<TradeoffSummary> = Vec::new();
    for chunk in records.chunk_by(|a, b| a.epsilon == b.epsilon) {
        let pick = |f: fn(&SweepRecord) -> f64| {
            let mut v: Vec<f64> = chunk.iter().map(f).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        let welfare = pick(|r| r.welfare);
        let gap = pick(|r| r.welfare_gap_percent);
        let envy = pick(|r| r.max_normalized_envy);
        out.push(TradeoffSummary {
            epsilon: chunk[0].epsilon,
            trials: chunk.len(),
            median_welfare: quantile(&welfare, 0.5),
            median_gap_percent: quantile(&gap, 0.5),
            q25_gap_percent: quantile(&gap, 0.25),
            q75_gap_percent: quantile(&gap, 0.75),
            median_envy: quantile(&envy, 0.5),
            q25_envy: quantile(&envy, 0.25),
            q75_envy: quantile(&envy, 0.75),
        });
    }
    out
}

fn fmt_eps(eps: f64) -> String {
    if eps.is_finite() {
        format!("{eps}")
    } else {
        "inf".to_string()
    }
}

pub fn write_sweep_csv<W: Write>(out: &mut W, records: &[SweepRecord]) -> Result<()> {
    let n = records.first().map_or(0, |r| r.envy.len());
    writeln!(out, "{OUTPUT_MAGIC}")?;
    write!(out, "epsilon,trial,seed,welfare,welfare_gap_percent,max_normalized_envy")?;
    for i in 1..=n {
        write!(out, ",envy_{i}")?;
    }
    for i in 1..=n {
        write!(out, ",mass_residual_{i}")?;
    }
    writeln!(out)?;
    for r in records {
        write!(
            out,
            "{},{},{},{},{},{}",
            fmt_eps(r.epsilon),
            r.trial,
            r.seed,
            r.welfare,
            r.welfare_gap_percent,
            r.max_normalized_envy
        )?;
        for v in r.envy.iter().chain(&r.mass_residual) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_sweep_json<W: Write>(out: &mut W, records: &[SweepRecord]) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, &serde_json::json!({
        "format": "envyot v1",
        "records": records,
        "summary": summarize_tradeoff(records),
    }))?;
    writeln!(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SweepConfig {
        SweepConfig {
            iterations: 2_000,
            trials: 2,
            eval_size: 2_000,
            ..SweepConfig::new(
                SourceSpec::artificial(),
                TargetDistribution::uniform(2).unwrap(),
                vec![0.1, 0.0],
            )
        }
    }

    #[test]
    fn grid_adds_baseline_and_sorts() {
        let cfg = SweepConfig {
            epsilons: vec![0.1, 0.0, 0.1],
            ..small()
        };
        assert_eq!(cfg.grid().unwrap(), vec![0.0, 0.1, f64::INFINITY]);
        let bad = SweepConfig {
            epsilons: vec![-0.1],
            ..small()
        };
        assert!(matches!(run_tradeoff(&bad), Err(Error::InvalidConfig(_))));
        let empty = SweepConfig {
            epsilons: vec![],
            ..small()
        };
        assert!(matches!(run_tradeoff(&empty), Err(Error::InvalidConfig(_))));
        let none = SweepConfig { trials: 0, ..small() };
        assert!(matches!(run_tradeoff(&none), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn records_are_sorted_with_zero_baseline_gap() {
        let records = run_tradeoff(&small()).unwrap();
        assert_eq!(records.len(), 6);
        let keys: Vec<(f64, usize)> = records.iter().map(|r| (r.epsilon, r.trial)).collect();
        assert_eq!(
            keys,
            vec![(0.0, 0), (0.0, 1), (0.1, 0), (0.1, 1), (f64::INFINITY, 0), (f64::INFINITY, 1)]
        );
        for r in records.iter().filter(|r| r.epsilon.is_infinite()) {
            assert_eq!(r.welfare_gap_percent, 0.0);
        }
        let summary = summarize_tradeoff(&records);
        assert_eq!(summary.len(), 3);
        assert!(summary.iter().all(|s| s.trials == 2));
    }

    #[test]
    fn csv_layout() {
        let records = run_tradeoff(&small()).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], OUTPUT_MAGIC);
        assert_eq!(
            lines[1],
            "epsilon,trial,seed,welfare,welfare_gap_percent,max_normalized_envy,envy_1,envy_2,mass_residual_1,mass_residual_2"
        );
        assert_eq!(lines.len(), 8);
        assert!(lines[7].starts_with("inf,1,"));
        let mut json = Vec::new();
        write_sweep_json(&mut json, &records).unwrap();
        let parsed: serde_json::Value = serde_json::from_slice(&json).unwrap();
        assert_eq!(parsed["records"][5]["epsilon"], "inf");
    }
}
