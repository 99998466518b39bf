use ehsched_core::analysis::{
    asymptotic_cdf, efficiency_estimate, fill_lower_bound, fill_bounds_at_mean_power, finite_horizon_cdf,
    immediate_fill, immediate_fill_static, immediate_loss_estimate, mc_cdf, paired_experiment, phi_root,
    verify_fill_bound, CdfModel, StaticHarvest, ENUMERATION_PATH_CAP,
};
use ehsched_core::offline::{offline_decision, SolverOptions};
use ehsched_core::online::{HeuristicPolicy, MeanOfflinePolicy, PolicySpec, PowerHalvingPolicy};
use ehsched_core::processes::{dp_toy_scenario, preset_scenario, sample_trace, Process};
use ehsched_core::{BufferState, Error, RateModel, RngStream};
use proptest::prelude::*;

const P_GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[test]
fn phi_residual_and_monotonicity() {
    for m in 1..=8 {
        let mut prev = f64::INFINITY;
        for p in P_GRID {
            let phi = phi_root(m, p).unwrap();
            assert!(phi > 0.0 && phi <= 1.0);
            let g = p * phi.powi(m as i32) - phi + 1.0 - p;
            assert!(g.abs() <= 1e-12, "m {m} p {p}: {g}");
            if m >= 2 {
                assert!(phi <= prev + 1e-15);
            }
            prev = phi;
        }
    }
    for p in P_GRID {
        assert_eq!(phi_root(1, p).unwrap(), 1.0);
        assert!((phi_root(2, p).unwrap() - ((1.0 - p) / p).min(1.0)).abs() <= 1e-10);
    }
}

#[test]
fn recurrence_approaches_the_limit() {
    let h = 1.0;
    for m in 1..=8usize {
        for p in [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8] {
            let model = CdfModel::new(p, h, m, 10_000).unwrap();
            // At pm = 1 the walk has no drift and the gap closes like 1/√R.
            let critical = (p * m as f64 - 1.0).abs() < 1e-12;
            let tol = if critical { 0.2 } else { 1e-3 };
            for j in 1..=20 {
                let x = (j as f64 + 0.5) * h / m as f64;
                let gap = (model.finite(x) - model.asymptotic(x)).abs();
                assert!(gap <= tol, "m {m} p {p} j {j}: {gap}");
            }
        }
    }
}

#[test]
fn cdf_limits_and_monotonicity() {
    let (m, p, h) = (3, 0.5, 6.0);
    let model = CdfModel::new(p, h, m, 40).unwrap();
    let xs: Vec<f64> = (1..400).map(|k| k as f64 * 0.25).collect();
    for pair in xs.windows(2) {
        assert!(model.finite(pair[1]) <= model.finite(pair[0]));
        assert!(model.asymptotic(pair[1]) <= model.asymptotic(pair[0]));
    }
    assert_eq!(model.finite(h / m as f64 * 0.999), 1.0);
    assert_eq!(model.finite(1e6), 0.0);
    assert_eq!(asymptotic_cdf(1.9, 3, 0.5, 6.0).unwrap(), 1.0);
    assert!(finite_horizon_cdf(0, -1.0, 1, 0.5, 1.0).is_err());
}

#[test]
fn monte_carlo_cdf_matches_recurrence() {
    let (e, h, p, remaining) = (88.0, 180.0, 0.45, 99);
    let thresholds: Vec<f64> = (1..=20).map(|m| h / m as f64).collect();
    let est = mc_cdf(e, remaining, p, h, &thresholds, 20_000, &RngStream::new(21, 0)).unwrap();
    for (k, e_m) in est.iter().enumerate() {
        let exact = finite_horizon_cdf(remaining, e, k + 1, p, h).unwrap();
        assert!((e_m.mean - exact).abs() <= 3.0 * e_m.se + 1e-12, "m {}: {} vs {exact}", k + 1, e_m.mean);
    }
}

#[test]
fn monte_carlo_error_scales_with_replicates() {
    let s = RngStream::new(5, 0);
    let a = mc_cdf(10.0, 20, 0.3, 8.0, &[2.0], 4_000, &s).unwrap()[0];
    let b = mc_cdf(10.0, 20, 0.3, 8.0, &[2.0], 16_000, &s).unwrap()[0];
    let ratio = a.se / b.se;
    assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
}

#[test]
fn fill_bound_chain_holds() {
    for (e, r) in [(5.0, 5), (25.0, 25), (55.0, 5)] {
        for p in [0.1, 0.5, 0.9] {
            let b = fill_bounds_at_mean_power(e, r, &StaticHarvest { p, h: 24.0 }, 2_000, &RngStream::new(3, 0)).unwrap();
            assert!(b.lb.mean >= b.simplified.mean - 1e-12);
            assert!(b.simplified.mean >= b.variance.mean - 1e-12);
            assert!(b.general.mean >= b.lb.mean - 1e-12);
            let slack = 3.0 * b.fill.fill_se.hypot(b.general.se);
            assert!(b.general.mean <= b.fill.fill + slack);
        }
    }
}

#[test]
fn static_fill_self_consistent() {
    let h = StaticHarvest { p: 0.5, h: 24.0 };
    let a = immediate_fill_static(4.0, 10.0, 6, &h, 1_000, &RngStream::new(1, 0)).unwrap();
    let b = immediate_fill_static(4.0, 10.0, 6, &h, 10_000, &RngStream::new(2, 0)).unwrap();
    assert!((a.loss.mean - b.loss.mean).abs() <= 3.0 * a.loss.se.hypot(b.loss.se));
    let bound = fill_lower_bound(4.0, 10.0, 6, &h, 1_000, &RngStream::new(1, 0)).unwrap();
    assert!(bound.mean <= a.fill + 1e-12);
}

#[test]
fn deterministic_offline_decision_has_no_loss() {
    let model = dp_toy_scenario(true);
    let trace = sample_trace(&model, &RngStream::new(0, 0)).unwrap();
    let state = BufferState::initial(&trace, model.e_1(), model.b_1()).unwrap();
    let d = offline_decision(&trace, &state, &RateModel::Logarithmic, &SolverOptions::default()).unwrap();
    let current = model.infer_state(trace.harvests()[0], trace.arrivals()[0], trace.gains()[0]).unwrap();
    let f = immediate_fill(d.power, &state, current, &model, 4, &RngStream::new(0, 0)).unwrap();
    assert!(f.loss.mean.abs() < 1e-8);
    assert!((f.fill - 1.0).abs() < 1e-8);
}

#[test]
fn scenario_loss_self_consistent_and_non_negative() {
    let model = dp_toy_scenario(false);
    let state = BufferState::new(3.0, 2.0, 2.0, 2).unwrap();
    let current = model.infer_state(1.5, 2.0, 2.0).unwrap();
    let a = immediate_loss_estimate(0.2, &state, current, &model, 400, &RngStream::new(1, 0)).unwrap();
    let b = immediate_loss_estimate(0.2, &state, current, &model, 4_000, &RngStream::new(2, 0)).unwrap();
    assert!(a.mean >= -1e-9);
    assert!((a.mean - b.mean).abs() <= 3.0 * a.se.hypot(b.se));
    assert!(immediate_loss_estimate(10.0, &state, current, &model, 4, &RngStream::new(1, 0)).is_err());
}

#[test]
fn efficiency_extremes() {
    let model = preset_scenario("main").unwrap().with_horizon(20);
    let off = efficiency_estimate(&PolicySpec::Offline, &model, 50, 3).unwrap();
    assert!((off.mean - 1.0).abs() < 1e-12);
    let zero = efficiency_estimate(&PolicySpec::Zero, &model, 50, 3).unwrap();
    assert_eq!(zero.mean, 0.0);
    let mut silent = model.clone();
    silent.harvest_model = Process::Constant { value: 0.0 };
    assert!(matches!(
        efficiency_estimate(&PolicySpec::Heuristic, &silent, 10, 3),
        Err(Error::UndefinedEfficiency)
    ));
}

#[test]
fn experiments_are_reproducible() {
    let model = preset_scenario("main").unwrap().with_horizon(15);
    let specs = [PolicySpec::Heuristic, PolicySpec::PowerHalving];
    let a = paired_experiment(&model, &specs, 30, 8).unwrap();
    let b = paired_experiment(&model, &specs, 30, 8).unwrap();
    assert_eq!(a, b);
}

#[test]
fn efficiency_bounded_by_min_fill_on_toys() {
    let det = dp_toy_scenario(true).with_horizon(3);
    let r = verify_fill_bound(&det, &MeanOfflinePolicy::new(1, SolverOptions::default()).unwrap(), ENUMERATION_PATH_CAP).unwrap();
    assert!((r.efficiency - 1.0).abs() < 1e-9 && (r.min_fill - 1.0).abs() < 1e-9);
    for n in [2, 3] {
        let m = dp_toy_scenario(false).with_horizon(n);
        for r in [
            verify_fill_bound(&m, &HeuristicPolicy::default(), ENUMERATION_PATH_CAP).unwrap(),
            verify_fill_bound(&m, &PowerHalvingPolicy, ENUMERATION_PATH_CAP).unwrap(),
        ] {
            assert!(r.holds, "{r:?}");
        }
    }
    let big = dp_toy_scenario(false);
    assert!(matches!(
        verify_fill_bound(&big, &PowerHalvingPolicy, 1000),
        Err(Error::ResourceCap { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn phi_root_is_smallest(m in 2usize..12, p in 0.01f64..0.99) {
        let phi = phi_root(m, p).unwrap();
        let g = |x: f64| p * x.powi(m as i32) - x + 1.0 - p;
        prop_assert!(g(phi).abs() <= 1e-12);
        // No sign change below the root.
        for k in 1..50 {
            prop_assert!(g(phi * k as f64 / 50.0) > 0.0);
        }
    }

    #[test]
    fn fill_lies_in_unit_interval(rho_frac in 0.0f64..1.0, e in 0.5f64..30.0, r in 0usize..8, p in 0.0f64..1.0) {
        let f = immediate_fill_static(rho_frac * e, e, r, &StaticHarvest { p, h: 5.0 }, 50, &RngStream::new(1, 1)).unwrap();
        prop_assert!(f.loss.mean >= -1e-9);
        prop_assert!((0.0..=1.0).contains(&f.fill));
    }
}
