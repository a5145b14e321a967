use envyot::metrics::envy_from_stats;
use envyot::cells::{CellStats, LaguerreCells};
use envyot::solver::{dual_gap, solve_sgd_observed};
use envyot::{
    empirical_objective, solve_erm, solve_sgd, uniform_budget, DualSolution, ErmConfig, ProblemSpec, SgdConfig,
    SourceSpec, TargetDistribution,
};

fn half() -> TargetDistribution {
    TargetDistribution::new(vec![0.5, 0.5]).unwrap()
}

fn spec_at(epsilon: f64, target: &TargetDistribution) -> ProblemSpec {
    ProblemSpec::new(target.clone(), uniform_budget(epsilon, target).unwrap(), 1.0).unwrap()
}

fn short_sgd(seed: u64) -> SgdConfig {
    SgdConfig {
        iterations: 20_000,
        seed,
        eval_set_size: 1_000,
        ..SgdConfig::default()
    }
}

#[test]
fn every_sgd_iterate_is_projected() {
    let target = TargetDistribution::new(vec![0.2, 0.3, 0.5]).unwrap();
    // pairs out of recipient 3 stay unconstrained
    let budget = envyot::EnvyBudget::from_matrix(&[
        vec![f64::INFINITY, 0.02, 0.0],
        vec![0.01, f64::INFINITY, 0.03],
        vec![f64::INFINITY, f64::INFINITY, f64::INFINITY],
    ])
    .unwrap();
    let spec = ProblemSpec::new(target, budget.clone(), 1.0).unwrap();
    let mut seen = 0;
    solve_sgd_observed(&SourceSpec::uniform_box(3), &spec, &short_sgd(5), |_, d| {
        seen += 1;
        for j in 0..3 {
            for k in 0..3 {
                let v = d.gamma(j, k);
                if budget.is_constrained(j, k) {
                    assert!(v >= 0.0);
                } else {
                    assert_eq!(v, 0.0);
                }
            }
        }
    })
    .unwrap();
    assert_eq!(seen, 20_000);
}

#[test]
fn sgd_is_deterministic_per_seed() {
    let spec = spec_at(0.1, &half());
    let src = SourceSpec::artificial();
    let (a, ra) = solve_sgd(&src, &spec, &short_sgd(9)).unwrap();
    let (b, rb) = solve_sgd(&src, &spec, &short_sgd(9)).unwrap();
    let (c, _) = solve_sgd(&src, &spec, &short_sgd(10)).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra.objective_trace, rb.objective_trace);
    assert_ne!(a, c);
}

#[test]
fn sgd_improves_on_the_starting_point() {
    let skewed = TargetDistribution::new(vec![0.875, 0.125]).unwrap();
    // (source, target, epsilon, zero dual already optimal)
    let workloads = [
        (SourceSpec::uniform_box(2), skewed, f64::INFINITY, false),
        (SourceSpec::artificial(), half(), 0.0, false),
        (SourceSpec::artificial(), half(), 0.1, false),
        (SourceSpec::uniform_box(2), half(), f64::INFINITY, true),
        (SourceSpec::artificial(), half(), f64::INFINITY, true),
    ];
    for (src, target, epsilon, start_optimal) in workloads {
        let spec = spec_at(epsilon, &target);
        let held_out = src.stream(77).draw(100_000).unwrap();
        let (dual, _) = solve_sgd(&src, &spec, &SgdConfig { iterations: 200_000, ..short_sgd(1) }).unwrap();
        let start = empirical_objective(&held_out, &DualSolution::zeros(2), &spec).unwrap();
        let end = empirical_objective(&held_out, &dual, &spec).unwrap();
        // the dual objective is maximized
        if start_optimal {
            assert!(end >= start - 1e-5, "eps {epsilon}: {start} -> {end}");
        } else {
            assert!(end > start + 1e-3, "eps {epsilon}: {start} -> {end}");
        }
    }
}

#[test]
fn erm_value_is_monotone_in_the_budget() {
    // a larger budget relaxes the primal minimization, so the optimal
    // (minimum expected cost) value can only go down
    let target = half();
    let set = SourceSpec::artificial().stream(4).draw(300).unwrap();
    let grid = [0.0, 0.05, 0.1, 0.2, f64::INFINITY];
    let values: Vec<f64> = grid
        .iter()
        .map(|&e| solve_erm(&set, &spec_at(e, &target), &ErmConfig::default()).unwrap().1)
        .collect();
    for w in values.windows(2) {
        assert!(w[1] <= w[0] + 1e-6, "{values:?}");
    }
    assert!(values[0] > values[4] + 1e-3, "{values:?}");
}

#[test]
fn erm_solution_respects_budgets_on_its_own_sample() {
    let target = half();
    let spec = spec_at(0.1, &target);
    let set = SourceSpec::artificial().stream(6).draw(2_000).unwrap();
    let (dual, _) = solve_erm(&set, &spec, &ErmConfig::default()).unwrap();
    let stats = CellStats::collect(&set, &LaguerreCells::new(&dual, &target).unwrap());
    let envy = envy_from_stats(&stats, &target);
    for (j, e) in envy.iter().enumerate() {
        let lambda = (0..2)
            .filter(|&k| k != j)
            .map(|k| spec.budget.get(j, k))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(*e <= lambda + 0.02, "recipient {j}: envy {e} > {lambda} + 0.02");
    }
}

#[test]
fn erm_beats_sgd_on_its_training_set() {
    let spec = spec_at(0.1, &half());
    let src = SourceSpec::artificial();
    let set = src.stream(8).draw(1_000).unwrap();
    let (erm, value) = solve_erm(&set, &spec, &ErmConfig::default()).unwrap();
    let (sgd, _) = solve_sgd(&src, &spec, &short_sgd(2)).unwrap();
    assert!((empirical_objective(&set, &erm, &spec).unwrap() - value).abs() < 1e-12);
    assert!(dual_gap(&sgd, &erm, &set, &spec).unwrap() >= -1e-12);
}
