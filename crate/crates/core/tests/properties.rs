use proptest::prelude::*;

use prophet_core::bernoulli_opt::{phi_ar_demand, phi_ar_ut, two_opt_solve, TwoOptProblem};
use prophet_core::calibration::{calibrate, statistic_value, target_for, CALIBRATION_TOLERANCE};
use prophet_core::evaluation::{
    exact_performance, lp_relaxation, performance_lower_bound, prophet_value, ProphetMode,
};
use prophet_core::instances::{
    eligibility, example_demand_bad, instance_from_json, instance_to_json, random_instance,
    surplus_mass, ThresholdPolicy,
};
use prophet_core::probcore::{
    expect_statistic, gamma, poisson_binomial, DemandStatistic, StatisticKind,
};
use prophet_core::verify::poisson_binomial_facts_hold;
use prophet_core::Error;

fn means() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 1 => Just(1.0), 8 => 0.0..=1.0f64], 1..=12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn poisson_binomial_structure(q in means()) {
        let law = poisson_binomial(&q).unwrap();
        let total: f64 = law.pmf().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!((law.mean() - q.iter().sum::<f64>()).abs() < 1e-12);
        prop_assert!(poisson_binomial_facts_hold(&q).unwrap());
    }

    #[test]
    fn statistics_monotone_in_each_mean(q in means(), idx in 0usize..12, k in 1usize..5, bump in 0.01..0.5f64) {
        let i = idx % q.len();
        let mut raised = q.clone();
        raised[i] = (raised[i] + bump).min(1.0);
        let before = poisson_binomial(&q).unwrap();
        let after = poisson_binomial(&raised).unwrap();
        for kind in StatisticKind::ALL {
            let stat = DemandStatistic::new(kind, k).unwrap();
            let (a, b) = (expect_statistic(&before, &stat), expect_statistic(&after, &stat));
            if kind.is_increasing() {
                prop_assert!(b >= a - 1e-12, "{kind}: {a} -> {b}");
            } else {
                prop_assert!(b <= a + 1e-12, "{kind}: {a} -> {b}");
            }
        }
    }

    #[test]
    fn eligibility_monotone(seed in 0u64..10_000) {
        let inst = random_instance(seed, 6, 4, 3).unwrap();
        let mut ts = inst.distinct_values_desc();
        ts.push(ts.last().unwrap() - 0.25);
        ts.insert(0, ts[0] + 0.25);
        for pair in ts.windows(2) {
            for p in [0.0, 0.3, 1.0] {
                let hi_t = eligibility(&inst, &ThresholdPolicy { t: pair[0], p });
                let lo_t = eligibility(&inst, &ThresholdPolicy { t: pair[1], p });
                for (a, b) in hi_t.q.iter().zip(&lo_t.q) {
                    prop_assert!(a <= &(b + 1e-15));
                }
            }
            let p_lo = eligibility(&inst, &ThresholdPolicy { t: pair[0], p: 0.2 });
            let p_hi = eligibility(&inst, &ThresholdPolicy { t: pair[0], p: 0.7 });
            for (a, b) in p_lo.q.iter().zip(&p_hi.q) {
                prop_assert!(a <= &(b + 1e-15));
            }
            // strictly between atoms nothing changes
            let mid = 0.5 * (pair[0] + pair[1]);
            let near = pair[1] + 0.9 * (pair[0] - pair[1]);
            let a = eligibility(&inst, &ThresholdPolicy { t: mid, p: 0.4 });
            let b = eligibility(&inst, &ThresholdPolicy { t: near, p: 0.9 });
            prop_assert_eq!(&a.q, &b.q);
            for (x, y) in a.m.iter().zip(&b.m) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn json_round_trip(seed in 0u64..10_000) {
        let inst = random_instance(seed, 8, 4, 4).unwrap();
        let back = instance_from_json(&instance_to_json(&inst)).unwrap();
        prop_assert_eq!(inst, back);
    }

    #[test]
    fn calibration_fixed_point(seed in 0u64..10_000) {
        let inst = random_instance(seed, 8, 4, 4).unwrap();
        let k = inst.k();
        for kind in [StatisticKind::ExpectedDemand, StatisticKind::ExpectedUtilization, StatisticKind::StockoutProbability] {
            let stat = DemandStatistic::new(kind, k).unwrap();
            let target = target_for(kind, k).unwrap();
            match calibrate(&inst, &stat, target) {
                Ok(pol) => prop_assert!((statistic_value(&inst, &pol, &stat) - target).abs() <= CALIBRATION_TOLERANCE),
                Err(Error::Unattainable { hi, .. }) => prop_assert!(hi < target),
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }

    #[test]
    fn benchmark_ordering_and_lower_bound(seed in 0u64..10_000, ts in prop::collection::vec(0.0..10.5f64, 20), ps in prop::collection::vec(0.0..=1.0f64, 20)) {
        let inst = random_instance(seed, 6, 3, 3).unwrap();
        let pht = prophet_value(&inst, ProphetMode::Exact).unwrap().value;
        let lp = lp_relaxation(&inst).value;
        prop_assert!(pht <= lp + 1e-9);
        for (&t, &p) in ts.iter().zip(&ps) {
            let pol = ThresholdPolicy { t, p };
            prop_assert!(lp <= t * inst.k() as f64 + surplus_mass(&inst, t) + 1e-9);
            prop_assert!(exact_performance(&inst, &pol) >= performance_lower_bound(&inst, &pol) - 1e-9);
        }
    }

    #[test]
    fn two_opt_matches_grid(a in prop::array::uniform3(-1.0..1.0f64), b in prop::array::uniform3(-1.0..1.0f64), u in 0.0..=1.0f64) {
        let mut prob = TwoOptProblem { a, b, phi: 0.0 };
        let (lo, hi) = prob.constraint_range();
        prob.phi = lo + u * (hi - lo);
        let sol = two_opt_solve(&prob).unwrap();
        prop_assert!((prob.constraint(sol.p.0, sol.p.1) - prob.phi).abs() < 1e-9);
        let oracle = two_opt_grid(&prob);
        prop_assert!(sol.value <= oracle + 1e-3, "solver {} grid {}", sol.value, oracle);
        prop_assert!(sol.value >= oracle - 1e-3 || oracle.is_infinite());
    }
}

/// Grid oracle: one coordinate on a 1e-3 grid, the other solved from the
/// constraint, in both roles.
fn two_opt_grid(prob: &TwoOptProblem) -> f64 {
    let [a0, a1, a2] = prob.a;
    let mut best = f64::INFINITY;
    for i in 0..=1000 {
        let x = i as f64 / 1000.0;
        let coef = a1 + a2 * x;
        let rest = prob.phi - a0 - a1 * x;
        let ys: Vec<f64> = if coef.abs() < 1e-12 {
            if rest.abs() < 1e-12 { vec![0.0, 1.0] } else { vec![] }
        } else {
            vec![rest / coef]
        };
        for y in ys.into_iter().filter(|y| (0.0..=1.0).contains(y)) {
            best = best.min(prob.objective(x, y)).min(prob.objective(y, x));
        }
    }
    best
}

#[test]
fn reduced_programs_nonincreasing_in_n() {
    for k in 1..=4usize {
        let g = gamma(k).unwrap();
        let mut prev_ut = f64::INFINITY;
        let mut prev_demand = f64::INFINITY;
        for n in (k + 1)..=60 {
            let (v, _) = phi_ar_ut(n, k, g).unwrap();
            assert_le(v, prev_ut + 1e-12, k, n);
            prev_ut = v;
            let (d, _) = phi_ar_demand(n, k).unwrap();
            assert_le(d, prev_demand + 1e-12, k, n);
            prev_demand = d;
        }
    }
}

fn assert_le(a: f64, b: f64, k: usize, n: usize) {
    assert!(a <= b, "k={k} n={n}: {a} > {b}");
}

#[test]
fn demand_bad_all_accepting_demand_is_k() {
    for k in 1..=6usize {
        for eps in [1e-3, 0.01, 0.05] {
            let inst = example_demand_bad(k, eps).unwrap();
            let stat = DemandStatistic::new(StatisticKind::ExpectedDemand, k).unwrap();
            let v = statistic_value(&inst, &ThresholdPolicy { t: 0.0, p: 0.0 }, &stat);
            assert!((v - k as f64).abs() < 1e-12);
        }
    }
}

#[test]
fn demand_above_supply_errors() {
    let inst = random_instance(3, 4, 3, 1).unwrap();
    let stat = DemandStatistic::new(StatisticKind::ExpectedDemand, inst.k()).unwrap();
    let too_many = inst.n() as f64 + 1.0;
    assert!(matches!(calibrate(&inst, &stat, too_many), Err(Error::Unattainable { .. })));
}
