use envyot::metrics::welfare;
use envyot::shift::{
    constant_step_solve, line_search_observed, line_search_solve, matching_oracle, shift_to_dual, ShiftSolverConfig,
    ShiftVector,
};
use envyot::{solve_sgd, ProblemSpec, SampleSet, SgdConfig, SourceSpec, TargetDistribution};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn box_eval(n: usize, m: usize, seed: u64) -> SampleSet {
    SourceSpec::uniform_box(n).stream(seed).draw(m).unwrap()
}

#[test]
fn over_matched_set_never_grows() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for n in [2, 3, 4] {
        let eval = box_eval(n, 20_000, n as u64);
        for _ in 0..5 {
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let target = TargetDistribution::new(raw.iter().map(|v| v / total).collect()).unwrap();
            let mut previous: Option<Vec<bool>> = None;
            let cfg = ShiftSolverConfig {
                tolerance: 0.005,
                ..ShiftSolverConfig::default()
            };
            line_search_observed(&eval, &target, &cfg, |_, _, p| {
                let over: Vec<bool> = (0..n).map(|i| p[i] > target.get(i)).collect();
                if let Some(prev) = &previous {
                    for i in 0..n {
                        assert!(!over[i] || prev[i], "recipient {i} became over-matched");
                    }
                }
                previous = Some(over);
            })
            .unwrap();
        }
    }
}

#[test]
fn approximate_shift_has_near_optimal_welfare() {
    let target = TargetDistribution::new(vec![0.6, 0.3, 0.1]).unwrap();
    let eval = box_eval(3, 200_000, 31);
    let cfg = ShiftSolverConfig::default();
    let (v, _) = line_search_solve(&eval, &target, &cfg).unwrap();
    let spec = ProblemSpec::unconstrained(target.clone(), 1.0).unwrap();
    let sgd_cfg = SgdConfig {
        iterations: 200_000,
        seed: 3,
        eval_set_size: 0,
        ..SgdConfig::default()
    };
    let (reference, _) = solve_sgd(&SourceSpec::uniform_box(3), &spec, &sgd_cfg).unwrap();
    let w_ref = welfare(&eval, &reference, &target).unwrap();
    let w_shift = welfare(&eval, &shift_to_dual(&v), &target).unwrap();
    let allowance = cfg.tolerance * 3.0 * cfg.value_bound + 0.01;
    assert!(w_ref - w_shift <= allowance, "{w_ref} vs {w_shift}");
}

#[test]
fn normalized_shift_error_is_a_descent_direction() {
    let n = 3;
    let target = TargetDistribution::new(vec![0.5, 0.3, 0.2]).unwrap();
    let eval = box_eval(n, 100_000, 41);
    let tight = ShiftSolverConfig {
        tolerance: 1e-3,
        ..ShiftSolverConfig::default()
    };
    let (v_star, _) = line_search_solve(&eval, &target, &tight).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..50 {
        let v = ShiftVector((0..n).map(|_| rng.gen_range(-0.6..0.6)).collect());
        let p = matching_oracle(&v, &eval);
        let inner: f64 = (0..n)
            .map(|i| (v.0[i] - v_star.0[i]) * (p[i] - target.get(i)))
            .sum();
        assert!(inner >= -0.01 * n as f64, "{inner}");
    }
}

#[test]
fn constant_step_trace_has_requested_length() {
    let target = TargetDistribution::new(vec![0.875, 0.125]).unwrap();
    let eval = box_eval(2, 20_000, 51);
    let (best, trace) = constant_step_solve(&eval, &target, &ShiftSolverConfig::default(), 200).unwrap();
    assert_eq!(trace.len(), 200);
    let best_loss = trace.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(best_loss <= 0.02);
    assert_eq!(best.0.len(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_ignores_common_shift(
        v in prop::collection::vec(-1f64..1.0, 3),
        c in -3f64..3.0,
        seed in 0u64..1000,
    ) {
        let eval = box_eval(3, 500, seed);
        let a = matching_oracle(&ShiftVector(v.clone()), &eval);
        let b = matching_oracle(&ShiftVector(v.iter().map(|x| x + c).collect()), &eval);
        // shifting can only reassign rows sitting at a rounding-level tie
        let diff: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        prop_assert!(diff <= 2.0 / 500.0 + 1e-12);
    }
}
