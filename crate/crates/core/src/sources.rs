//! Item valuation samples: the empirical stand-in for the item distribution.
//!
//! A [`SourceSpec`] describes where valuations come from; [`SourceSpec::stream`]
//! turns it into a seeded [`SampleSource`] that can be drawn from repeatedly.
//! All randomness is ChaCha8 (`rand_chacha`) keyed by `seed_from_u64`.

use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// An `m x n` matrix of valuations, row-major. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    n: usize,
    values: Vec<f64>,
}

impl SampleSet {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || values.is_empty() || !values.len().is_multiple_of(n) {
            return Err(Error::InvalidConfig(format!(
                "{} values do not form rows of width {}",
                values.len(),
                n
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("sample values must be finite".into()));
        }
        Ok(Self { n, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(n, values)
    }

    /// Number of recipients (columns).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of samples (rows).
    pub fn len(&self) -> usize {
        self.values.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.n..(t + 1) * self.n]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.n)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Smallest and largest entry.
    pub fn observed_range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Largest absolute entry; the observed value bound of ingested data.
    pub fn observed_bound(&self) -> f64 {
        self.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    fn select(&self, indices: &[usize]) -> SampleSet {
        let mut values = Vec::with_capacity(indices.len() * self.n);
        for &t in indices {
            values.extend_from_slice(self.row(t));
        }
        SampleSet { n: self.n, values }
    }
}

/// Where valuations come from.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    /// Independent `Unif(0, 1)` coordinates.
    UniformBox { n: usize },
    /// `x = offset - z * mixing` with `z ~ Unif(0,1)^2` and `mixing` a
    /// `2 x n` matrix.
    AffineUniform {
        offset: Vec<f64>,
        mixing: [Vec<f64>; 2],
    },
    /// Replays rows of a fixed set in seeded shuffled order. With `replay`
    /// on, the order is reshuffled at the end of every pass; with it off the
    /// source runs dry after one pass.
    Csv { rows: Arc<SampleSet>, replay: bool },
}

impl SourceSpec {
    pub fn uniform_box(n: usize) -> Self {
        SourceSpec::UniformBox { n }
    }

    pub fn affine_uniform(offset: Vec<f64>, mixing: [Vec<f64>; 2]) -> Result<Self> {
        let n = offset.len();
        if n == 0 {
            return Err(Error::InvalidConfig("affine offset is empty".into()));
        }
        for row in &mixing {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
        }
        if offset.iter().chain(&mixing[0]).chain(&mixing[1]).any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("affine parameters must be finite".into()));
        }
        Ok(SourceSpec::AffineUniform { offset, mixing })
    }

    /// The two-recipient artificial distribution used in the experiments:
    /// `x = (1, 0.7) - z * [[0.2, 0], [0.8, 0.4]]`.
    pub fn artificial() -> Self {
        SourceSpec::AffineUniform {
            offset: vec![1.0, 0.7],
            mixing: [vec![0.2, 0.0], vec![0.8, 0.4]],
        }
    }

    pub fn csv(rows: SampleSet, replay: bool) -> Self {
        SourceSpec::Csv {
            rows: Arc::new(rows),
            replay,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            SourceSpec::UniformBox { n } => *n,
            SourceSpec::AffineUniform { offset, .. } => offset.len(),
            SourceSpec::Csv { rows, .. } => rows.n(),
        }
    }

    /// Upper bound on every coordinate, when the source has one.
    pub fn value_bound(&self) -> f64 {
        match self {
            SourceSpec::UniformBox { .. } => 1.0,
            SourceSpec::AffineUniform { offset, mixing } => offset
                .iter()
                .enumerate()
                .map(|(i, b)| b - mixing[0][i].min(0.0) - mixing[1][i].min(0.0))
                .fold(f64::NEG_INFINITY, f64::max),
            SourceSpec::Csv { rows, .. } => rows.observed_bound(),
        }
    }

    /// Evaluates the affine map at a fixed noise value. `None` for other kinds.
    pub fn affine_at(&self, z: [f64; 2]) -> Option<Vec<f64>> {
        match self {
            SourceSpec::AffineUniform { offset, mixing } => Some(
                offset
                    .iter()
                    .enumerate()
                    .map(|(i, b)| b - z[0] * mixing[0][i] - z[1] * mixing[1][i])
                    .collect(),
            ),
            _ => None,
        }
    }

    pub fn stream(&self, seed: u64) -> SampleSource {
        SampleSource {
            spec: self.clone(),
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            order: Vec::new(),
            cursor: 0,
        }
    }
}

/// A seeded stream of valuation vectors. Single owner; successive draws
/// continue the stream.
#[derive(Debug, Clone)]
pub struct SampleSource {
    spec: SourceSpec,
    seed: u64,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
}

impl SampleSource {
    pub fn spec(&self) -> &SourceSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.spec.n()
    }

    /// Writes the next valuation vector into `out` (length `n`).
    pub fn next_into(&mut self, out: &mut [f64]) -> Result<()> {
        match &self.spec {
            SourceSpec::UniformBox { n } => {
                debug_assert_eq!(out.len(), *n);
                for v in out.iter_mut() {
                    *v = self.rng.gen::<f64>();
                }
            }
            SourceSpec::AffineUniform { offset, mixing } => {
                let z0 = self.rng.gen::<f64>();
                let z1 = self.rng.gen::<f64>();
                for (i, v) in out.iter_mut().enumerate() {
                    *v = offset[i] - z0 * mixing[0][i] - z1 * mixing[1][i];
                }
            }
            SourceSpec::Csv { rows, replay } => {
                if self.cursor == self.order.len() {
                    if !self.order.is_empty() && !replay {
                        return Err(Error::ExhaustedCsvSource {
                            requested: 1,
                            remaining: 0,
                        });
                    }
                    self.order = (0..rows.len()).collect();
                    self.order.shuffle(&mut self.rng);
                    self.cursor = 0;
                }
                out.copy_from_slice(rows.row(self.order[self.cursor]));
                self.cursor += 1;
            }
        }
        Ok(())
    }

    /// Draws the next `m` rows.
    pub fn draw(&mut self, m: usize) -> Result<SampleSet> {
        if m == 0 {
            return Err(Error::InvalidConfig("must draw at least one sample".into()));
        }
        if let SourceSpec::Csv { rows, replay: false } = &self.spec {
            let remaining = if self.order.is_empty() {
                rows.len()
            } else {
                self.order.len() - self.cursor
            };
            if remaining < m {
                return Err(Error::ExhaustedCsvSource {
                    requested: m,
                    remaining,
                });
            }
        }
        let n = self.n();
        let mut values = vec![0.0; m * n];
        for row in values.chunks_exact_mut(n) {
            self.next_into(row)?;
        }
        Ok(SampleSet { n, values })
    }
}

/// Parses a valuation CSV: header `x1,...,xn`, then rows of `n` decimals.
pub fn from_csv(path: impl AsRef<Path>, expected_n: Option<usize>) -> Result<SampleSet> {
    let file = std::fs::File::open(path)?;
    parse_csv(file, expected_n)
}

pub fn parse_csv<R: Read>(reader: R, expected_n: Option<usize>) -> Result<SampleSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .quoting(false)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        None => return Err(Error::EmptyFile),
        Some(r) => r?,
    };
    let n = header.len();
    let header_ok = header
        .iter()
        .enumerate()
        .all(|(i, field)| field.trim() == format!("x{}", i + 1));
    if !header_ok {
        return Err(Error::MissingHeader);
    }
    if let Some(expected) = expected_n {
        if expected != n {
            return Err(Error::DimensionMismatch { expected, found: n });
        }
    }

    let mut values = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != n {
            return Err(Error::RaggedRow(line));
        }
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or(Error::NonNumericField { line, column: c + 1 })?;
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(Error::EmptyFile);
    }
    Ok(SampleSet { n, values })
}

/// Splits rows into disjoint subsets of the given sizes after a seeded shuffle.
pub fn split(set: &SampleSet, sizes: &[usize], seed: u64) -> Result<Vec<SampleSet>> {
    let requested: usize = sizes.iter().sum();
    if requested > set.len() {
        return Err(Error::SizesExceedRows {
            requested,
            rows: set.len(),
        });
    }
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for &size in sizes {
        if size == 0 {
            return Err(Error::InvalidConfig("split sizes must be positive".into()));
        }
        out.push(set.select(&order[start..start + size]));
        start += size;
    }
    Ok(out)
}
