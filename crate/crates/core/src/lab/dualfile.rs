//! Text format for trained duals.
//!
//! ```text
//! envyot-dual v1 n=2
//! g: 0.25 -0.25
//! gamma[1]: 0 0
//! gamma[2]: 0.31 0
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so save/load is exact.
//! The diagonal of `gamma` is written as 0 and ignored on load.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::problem::DualSolution;

pub const DUAL_FORMAT_VERSION: u32 = 1;

pub fn format_dual(dual: &DualSolution) -> String {
    let n = dual.n();
    let join = |values: &mut dyn Iterator<Item = f64>| {
        values.map(|v| format!("{v}")).collect::<Vec<_>>().join(" ")
    };
    let mut out = String::new();
    let _ = writeln!(out, "envyot-dual v{DUAL_FORMAT_VERSION} n={n}");
    let _ = writeln!(out, "g: {}", join(&mut dual.g.iter().copied()));
    for j in 0..n {
        let mut row = (0..n).map(|k| if j == k { 0.0 } else { dual.gamma(j, k) });
        let _ = writeln!(out, "gamma[{}]: {}", j + 1, join(&mut row));
    }
    out
}

fn malformed(msg: impl Into<String>) -> Error {
    Error::MalformedDualFile(msg.into())
}

fn parse_row(line: Option<&str>, label: &str, n: usize) -> Result<Vec<f64>> {
    let line = line.ok_or_else(|| malformed(format!("missing `{label}` line")))?;
    let rest = line
        .strip_prefix(label)
        .and_then(|r| r.strip_prefix(':'))
        .ok_or_else(|| malformed(format!("expected `{label}:`, found {line:?}")))?;
    let values = rest
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(format!("bad number {tok:?} in `{label}`")))
        })
        .collect::<Result<Vec<f64>>>()?;
    if values.len() != n {
        return Err(malformed(format!(
            "`{label}` has {} values, header says n={n}",
            values.len()
        )));
    }
    Ok(values)
}

pub fn parse_dual(text: &str) -> Result<DualSolution> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| malformed("empty file"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("envyot-dual") {
        return Err(malformed(format!("bad header {header:?}")));
    }
    let version = parts
        .next()
        .and_then(|v| v.strip_prefix('v'))
        .ok_or_else(|| malformed(format!("bad header {header:?}")))?;
    if version != DUAL_FORMAT_VERSION.to_string() {
        return Err(Error::VersionMismatch(version.to_string()));
    }
    let n: usize = parts
        .next()
        .and_then(|v| v.strip_prefix("n="))
        .and_then(|v| v.parse().ok())
        .filter(|&n| n >= 1)
        .ok_or_else(|| malformed(format!("bad header {header:?}")))?;
    if parts.next().is_some() {
        return Err(malformed(format!("bad header {header:?}")));
    }

    let g = parse_row(lines.next(), "g", n)?;
    let mut gamma = Vec::with_capacity(n * n);
    for j in 0..n {
        let mut row = parse_row(lines.next(), &format!("gamma[{}]", j + 1), n)?;
        row[j] = 0.0;
        if let Some(k) = row.iter().position(|&v| v < 0.0) {
            return Err(malformed(format!("gamma[{}][{}] is negative", j + 1, k + 1)));
        }
        gamma.extend(row);
    }
    if let Some(extra) = lines.next() {
        return Err(malformed(format!("trailing content {extra:?}")));
    }
    Ok(DualSolution { g, gamma })
}

pub fn save_dual(path: impl AsRef<Path>, dual: &DualSolution) -> Result<()> {
    std::fs::write(path, format_dual(dual))?;
    Ok(())
}

pub fn load_dual(path: impl AsRef<Path>) -> Result<DualSolution> {
    parse_dual(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn writes_the_documented_layout() {
        let mut dual = DualSolution::from_potentials(vec![0.25, -0.25]);
        dual.set_gamma(1, 0, 0.31);
        assert_eq!(
            format_dual(&dual),
            "envyot-dual v1 n=2\ng: 0.25 -0.25\ngamma[1]: 0 0\ngamma[2]: 0.31 0\n"
        );
    }

    #[test]
    fn rejects_header_mismatch() {
        let text = "envyot-dual v1 n=3\ng: 0 0\ngamma[1]: 0 0\ngamma[2]: 0 0\n";
        assert!(matches!(parse_dual(text), Err(Error::MalformedDualFile(_))));
    }

    #[test]
    fn rejects_other_versions() {
        let text = "envyot-dual v2 n=2\ng: 0 0\ngamma[1]: 0 0\ngamma[2]: 0 0\n";
        assert!(matches!(parse_dual(text), Err(Error::VersionMismatch(v)) if v == "2"));
    }

    #[test]
    fn rejects_negative_gamma_and_garbage() {
        let neg = "envyot-dual v1 n=2\ng: 0 0\ngamma[1]: 0 -0.1\ngamma[2]: 0 0\n";
        assert!(matches!(parse_dual(neg), Err(Error::MalformedDualFile(_))));
        let nan = "envyot-dual v1 n=2\ng: NaN 0\ngamma[1]: 0 0\ngamma[2]: 0 0\n";
        assert!(matches!(parse_dual(nan), Err(Error::MalformedDualFile(_))));
        let short = "envyot-dual v1 n=2\ng: 0 0\ngamma[1]: 0 0\n";
        assert!(matches!(parse_dual(short), Err(Error::MalformedDualFile(_))));
        assert!(matches!(parse_dual("hello"), Err(Error::MalformedDualFile(_))));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            g in prop::collection::vec(-1e6f64..1e6, 3),
            gamma in prop::collection::vec(0f64..1e3, 9),
        ) {
            let mut dual = DualSolution { g, gamma };
            for j in 0..3 {
                dual.set_gamma(j, j, 0.0);
            }
            let back = parse_dual(&format_dual(&dual)).unwrap();
            for (a, b) in dual.g.iter().chain(&dual.gamma).zip(back.g.iter().chain(&back.gamma)) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
