//! Calibrating a `(t, p)` policy so that a demand statistic hits a target.
//!
//! The utilization policy targets `gamma(k)` rather than `k`: utilization
//! lives in `[0, 1]`, and `gamma(k)` is the level at which the guarantee is
//! established.

use crate::error::{Error, Result};
use crate::instances::{eligibility, Instance, ThresholdPolicy};
use crate::probcore::{
    expect_statistic, gamma, poisson_binomial, poisson_stockout_target, DemandStatistic,
    StatisticKind,
};

/// Agreement required between the achieved statistic and the target.
pub const CALIBRATION_TOLERANCE: f64 = 1e-10;

/// Two statistic values closer than this are treated as equal while scanning.
const MATCH_TOLERANCE: f64 = 1e-12;

const BISECTION_MAX_ITERS: usize = 200;

/// `E[g(D)]` for the demand induced by `pol` on `inst`.
pub fn statistic_value(inst: &Instance, pol: &ThresholdPolicy, stat: &DemandStatistic) -> f64 {
    let elig = eligibility(inst, pol);
    if stat.kind == StatisticKind::ExpectedDemand {
        return elig.q.iter().sum();
    }
    let law = poisson_binomial(&elig.q).expect("eligibility probabilities lie in [0, 1]");
    expect_statistic(&law, stat)
}

/// Designated calibration target for each statistic.
pub fn target_for(kind: StatisticKind, k: usize) -> Result<f64> {
    match kind {
        StatisticKind::ExpectedUtilization => gamma(k),
        StatisticKind::ExpectedDemand => {
            if k == 0 {
                Err(Error::InvalidSupply(k))
            } else {
                Ok(k as f64)
            }
        }
        StatisticKind::StockoutProbability => poisson_stockout_target(k),
        StatisticKind::AcceptanceRate => Err(Error::UnsupportedStatistic(format!(
            "{kind} has no designated target and"
        ))),
    }
}

/// Finds `(t, p)` with `statistic_value(inst, (t, p), stat) == target`.
///
/// Candidate thresholds are the distinct atom values, largest first. Between
/// atoms the statistic is constant in `t`; at an atom it is continuous and
/// nondecreasing in `p`. Once the bracketing atom is found, `p` is solved by
/// bisection. When the target is met with `p = 0` at some atom, that form is
/// returned.
pub fn calibrate(inst: &Instance, stat: &DemandStatistic, target: f64) -> Result<ThresholdPolicy> {
    if !stat.kind.is_increasing() {
        return Err(Error::UnsupportedStatistic(stat.kind.to_string()));
    }
    if !target.is_finite() {
        return Err(Error::InvalidArgument(format!("target must be finite, got {target}")));
    }
    let atoms = inst.distinct_values_desc();
    let value_at = |t: f64, p: f64| statistic_value(inst, &ThresholdPolicy { t, p }, stat);

    let floor = value_at(atoms[0], 0.0);
    let ceiling = value_at(*atoms.last().expect("instances have atoms"), 1.0);
    if target < floor - MATCH_TOLERANCE || target > ceiling + MATCH_TOLERANCE {
        return Err(Error::Unattainable {
            target,
            lo: floor,
            hi: ceiling,
        });
    }

    let mut previous = floor;
    for (idx, &t) in atoms.iter().enumerate() {
        let lo = value_at(t, 0.0);
        debug_assert!(lo >= previous - MATCH_TOLERANCE, "statistic decreased while scanning");
        if (lo - target).abs() <= MATCH_TOLERANCE {
            return Ok(ThresholdPolicy { t, p: 0.0 });
        }
        let hi = value_at(t, 1.0);
        debug_assert!(hi >= lo - MATCH_TOLERANCE, "statistic decreased in p");
        previous = hi;
        let is_last = idx + 1 == atoms.len();
        if (hi - target).abs() <= MATCH_TOLERANCE {
            if is_last {
                return Ok(ThresholdPolicy { t, p: 1.0 });
            }
            // the next atom with p = 0 is the same policy in canonical form
            continue;
        }
        if target < hi || is_last {
            let p = solve_tie_break(|p| value_at(t, p), target)?;
            return Ok(ThresholdPolicy { t, p });
        }
    }
    unreachable!("target inside the attainable range is always bracketed")
}

/// Bisection for a nondecreasing `f` on `[0, 1]` with `f(0) < target < f(1)`.
fn solve_tie_break<F: Fn(f64) -> f64>(f: F, target: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = (f64::INFINITY, 0.5);
    for _ in 0..BISECTION_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        let gap = f(mid) - target;
        if gap.abs() < best.0 {
            best = (gap.abs(), mid);
        }
        if gap.abs() <= 1e-14 || mid <= lo || mid >= hi {
            break;
        }
        if gap < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.0 <= CALIBRATION_TOLERANCE {
        Ok(best.1)
    } else {
        Err(Error::NoConvergence(format!(
            "tie-break bisection ended {} away from target {target}",
            best.0
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{example_demand_bad, random_instance, ValueDistribution};

    fn four_ones(k: usize) -> Instance {
        Instance::iid(k, 4, ValueDistribution::point(1.0).unwrap()).unwrap()
    }

    fn stat(kind: StatisticKind, k: usize) -> DemandStatistic {
        DemandStatistic::new(kind, k).unwrap()
    }

    #[test]
    fn statistic_value_examples() {
        let inst = four_ones(2);
        let pol = ThresholdPolicy::new(1.0, 0.5).unwrap();
        assert_eq!(
            statistic_value(&inst, &pol, &stat(StatisticKind::ExpectedDemand, 2)),
            2.0
        );
        let none = ThresholdPolicy::new(2.0, 0.3).unwrap();
        assert_eq!(statistic_value(&inst, &none, &stat(StatisticKind::ExpectedDemand, 2)), 0.0);
        assert_eq!(
            statistic_value(&inst, &none, &stat(StatisticKind::StockoutProbability, 2)),
            0.0
        );
        assert_eq!(
            statistic_value(&inst, &none, &stat(StatisticKind::ExpectedUtilization, 2)),
            0.0
        );
        assert_eq!(statistic_value(&inst, &none, &stat(StatisticKind::AcceptanceRate, 2)), 1.0);

        for k in 1..5 {
            let bad = example_demand_bad(k, 0.2).unwrap();
            let v = statistic_value(
                &bad,
                &ThresholdPolicy::new(0.0, 0.0).unwrap(),
                &stat(StatisticKind::ExpectedDemand, k),
            );
            assert!((v - k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn calibrates_four_ones() {
        let inst = four_ones(2);
        let pol = calibrate(&inst, &stat(StatisticKind::ExpectedDemand, 2), 2.0).unwrap();
        assert_eq!(pol.t, 1.0);
        assert!((pol.p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn demand_bad_calibrates_to_zero_atom() {
        for k in 1..5 {
            let inst = example_demand_bad(k, 1e-3).unwrap();
            let s = stat(StatisticKind::ExpectedDemand, k);
            let pol = calibrate(&inst, &s, k as f64).unwrap();
            assert_eq!((pol.t, pol.p), (0.0, 0.0));
            assert!((statistic_value(&inst, &pol, &s) - k as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn utilization_calibration_on_fine_grid() {
        let n_atoms = 200;
        let pairs: Vec<(f64, f64)> = (0..n_atoms)
            .map(|i| (i as f64 / n_atoms as f64, 1.0 / n_atoms as f64))
            .collect();
        let dist = ValueDistribution::from_pairs(&pairs).unwrap();
        for k in 1..4 {
            let inst = Instance::iid(k, 6, dist.clone()).unwrap();
            let s = stat(StatisticKind::ExpectedUtilization, k);
            let target = gamma(k).unwrap();
            let pol = calibrate(&inst, &s, target).unwrap();
            assert!((statistic_value(&inst, &pol, &s) - target).abs() <= CALIBRATION_TOLERANCE);
        }
    }

    #[test]
    fn targets() {
        let g1 = 1.0 - (-1.0f64).exp();
        assert!((target_for(StatisticKind::ExpectedUtilization, 1).unwrap() - g1).abs() < 1e-15);
        assert_eq!(target_for(StatisticKind::ExpectedDemand, 7).unwrap(), 7.0);
        assert!((target_for(StatisticKind::StockoutProbability, 1).unwrap() - g1).abs() < 1e-15);
        assert!(target_for(StatisticKind::AcceptanceRate, 1).is_err());
    }

    #[test]
    fn unattainable_and_unsupported() {
        let inst = four_ones(2);
        match calibrate(&inst, &stat(StatisticKind::ExpectedDemand, 2), 5.0) {
            Err(Error::Unattainable { lo, hi, .. }) => assert_eq!((lo, hi), (0.0, 4.0)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            calibrate(&inst, &stat(StatisticKind::AcceptanceRate, 2), 0.5),
            Err(Error::UnsupportedStatistic(_))
        ));
        // supply exceeding applicants makes stockout impossible
        let inst = four_ones(5);
        let target = target_for(StatisticKind::StockoutProbability, 5).unwrap();
        assert!(matches!(
            calibrate(&inst, &stat(StatisticKind::StockoutProbability, 5), target),
            Err(Error::Unattainable { .. })
        ));
    }

    #[test]
    fn fixed_point_on_random_corpus() {
        for seed in 0..200 {
            let inst = random_instance(seed, 8, 4, 4).unwrap();
            let k = inst.k();
            for kind in [
                StatisticKind::ExpectedDemand,
                StatisticKind::ExpectedUtilization,
                StatisticKind::StockoutProbability,
            ] {
                let s = stat(kind, k);
                let target = target_for(kind, k).unwrap();
                match calibrate(&inst, &s, target) {
                    Ok(pol) => {
                        let achieved = statistic_value(&inst, &pol, &s);
                        assert!(
                            (achieved - target).abs() <= CALIBRATION_TOLERANCE,
                            "seed {seed} {kind}: {achieved} vs {target}"
                        );
                    }
                    Err(Error::Unattainable { hi, .. }) => assert!(hi < target),
                    Err(e) => panic!("seed {seed} {kind}: {e}"),
                }
            }
        }
    }
}
