//! Applying a trained policy to item files.

use std::io::Write;
use std::path::Path;

use crate::cells::LaguerreCells;
use crate::error::{Error, Result};
use crate::lab::dualfile::load_dual;
use crate::lab::OUTPUT_MAGIC;
use crate::problem::{DualSolution, TargetDistribution};
use crate::sources::{from_csv, SampleSet, SourceSpec};

/// The policy needs `p*` only through the envy terms; without multipliers
/// any target gives the same cells.
fn resolve_target(dual: &DualSolution, target: Option<&TargetDistribution>) -> Result<TargetDistribution> {
    match target {
        Some(t) => {
            if t.len() != dual.n() {
                return Err(Error::DimensionMismatch {
                    expected: dual.n(),
                    found: t.len(),
                });
            }
            Ok(t.clone())
        }
        None if dual.gamma.iter().all(|&v| v == 0.0) => TargetDistribution::uniform(dual.n()),
        None => Err(Error::InvalidConfig(
            "the dual has envy multipliers; its target distribution is required".into(),
        )),
    }
}

fn write_assigned<W: Write>(out: &mut W, set: &SampleSet, cells: &LaguerreCells) -> Result<usize> {
    let header: Vec<String> = (1..=set.n()).map(|i| format!("x{i}")).collect();
    writeln!(out, "{},recipient", header.join(","))?;
    for x in set.rows() {
        for v in x {
            write!(out, "{v},")?;
        }
        writeln!(out, "{}", cells.assign(x) + 1)?;
    }
    Ok(set.len())
}

/// Assigns every row of `input` with the dual stored at `dual_path` and
/// writes the rows plus a 1-based `recipient` column. Returns the row count.
pub fn assign_batch(
    dual_path: impl AsRef<Path>,
    input: impl AsRef<Path>,
    output: impl AsRef<Path>,
    target: Option<&TargetDistribution>,
) -> Result<usize> {
    let dual = load_dual(dual_path)?;
    let target = resolve_target(&dual, target)?;
    let set = from_csv(input, Some(dual.n()))?;
    let cells = LaguerreCells::new(&dual, &target)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(output)?);
    let rows = write_assigned(&mut out, &set, &cells)?;
    out.flush()?;
    Ok(rows)
}

/// Scatter data `(x_1, ..., x_n, recipient)` for `samples` fresh items.
pub fn write_plotdata<W: Write>(
    out: &mut W,
    source: &SourceSpec,
    dual: &DualSolution,
    target: Option<&TargetDistribution>,
    samples: usize,
    seed: u64,
) -> Result<usize> {
    let target = resolve_target(dual, target)?;
    if source.n() != dual.n() {
        return Err(Error::DimensionMismatch {
            expected: dual.n(),
            found: source.n(),
        });
    }
    let set = source.stream(seed).draw(samples)?;
    let cells = LaguerreCells::new(dual, &target)?;
    writeln!(out, "{OUTPUT_MAGIC}")?;
    write_assigned(out, &set, &cells)
}
