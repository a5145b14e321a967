//! Experiment drivers and file formats.

pub mod batch;
pub mod complexity;
pub mod dualfile;
pub mod sweep;

pub use batch::{assign_batch, write_plotdata};
pub use complexity::{
    least_squares_slope, run_sample_complexity, write_complexity_csv, write_complexity_json, ComplexityRow,
    SampleComplexityConfig, SampleComplexityTable,
};
pub use dualfile::{format_dual, load_dual, parse_dual, save_dual};
pub use sweep::{
    run_tradeoff, summarize_tradeoff, write_sweep_csv, write_sweep_json, SweepConfig, SweepRecord, TradeoffSummary,
};

/// First line of every result file.
pub const OUTPUT_MAGIC: &str = "# envyot v1";

pub(crate) const EVAL_TAG: u64 = 0x4556_414c; // "EVAL"

/// Linearly interpolated quantile of an ascending slice (`q` in `[0, 1]`).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        len => {
            let pos = q.clamp(0.0, 1.0) * (len - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(len - 1);
            sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::quantile;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&[7.0], 0.3), 7.0);
        assert!(quantile(&[], 0.5).is_nan());
    }
}
