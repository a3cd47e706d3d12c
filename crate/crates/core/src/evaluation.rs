//! Exact and Monte Carlo evaluation of static threshold policies, the
//! prophet and ex-ante (LP) benchmarks, and guarantee reports.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instances::{eligibility, surplus_mass, Instance, ThresholdPolicy};
use crate::probcore::{
    ar, expect_statistic, grouped_poisson_binomial, poisson_binomial, DemandStatistic,
    DiscreteLaw, StatisticKind,
};

/// Largest number of joint outcomes the exact prophet will enumerate.
pub const PROPHET_ENUMERATION_CAP: f64 = 1e7;

/// Trials per deterministic Monte Carlo block.
const MC_BLOCK: usize = 1024;

/// Default Monte Carlo budget when a report falls back from exact mode.
pub const DEFAULT_MC_TRIALS: usize = 100_000;

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProphetMode {
    Exact,
    MonteCarlo { trials: usize, seed: u64 },
}

/// Prophet value; `std_error` is present only for Monte Carlo estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProphetValue {
    pub value: f64,
    pub std_error: Option<f64>,
}

/// Optimum of the ex-ante relaxation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub value: f64,
    /// Per-applicant acceptance probabilities `x_i`.
    pub weights: Vec<f64>,
    /// Price at which the quantile mass is cut.
    pub dual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GuaranteeReport {
    pub performance: f64,
    pub prophet: f64,
    pub prophet_std_error: Option<f64>,
    pub lp: f64,
    pub expected_ut: f64,
    pub expected_ar: f64,
    pub expected_demand: f64,
    pub ratio_prophet: f64,
    pub ratio_lp: f64,
    pub lb_bound: f64,
}

fn group_counts(q: &[f64]) -> BTreeMap<u64, usize> {
    let mut groups = BTreeMap::new();
    for &qi in q {
        *groups.entry(qi.to_bits()).or_insert(0) += 1;
    }
    groups
}

fn law_without_one(groups: &BTreeMap<u64, usize>, skip: u64) -> DiscreteLaw {
    let blocks: Vec<(f64, usize)> = groups
        .iter()
        .map(|(&bits, &count)| (f64::from_bits(bits), if bits == skip { count - 1 } else { count }))
        .collect();
    grouped_poisson_binomial(&blocks).expect("eligibility probabilities lie in [0, 1]")
}

/// Exact expected value collected by the policy:
/// `sum_i m_i E[AR_k(D_{-i})]`.
///
/// Each leave-one-out law is built from scratch (no deconvolution). Applicants
/// with identical eligibility probability share one leave-one-out law, which
/// is then a product of binomial blocks.
pub fn exact_performance(inst: &Instance, pol: &ThresholdPolicy) -> f64 {
    let k = inst.k();
    let elig = eligibility(inst, pol);
    let groups = group_counts(&elig.q);
    let mut cache: BTreeMap<u64, f64> = BTreeMap::new();
    let mut total = 0.0;
    for (&qi, &mi) in elig.q.iter().zip(&elig.m) {
        if mi == 0.0 {
            continue;
        }
        let bits = qi.to_bits();
        let rate = *cache
            .entry(bits)
            .or_insert_with(|| law_without_one(&groups, bits).expect(|d| ar(k, d)));
        total += mi * rate;
    }
    total
}

/// `t k E[UT_k(D)] + U(t, F) E[AR_k(D)]`, a lower bound on the performance.
pub fn performance_lower_bound(inst: &Instance, pol: &ThresholdPolicy) -> f64 {
    let k = inst.k();
    let law = poisson_binomial(&eligibility(inst, pol).q).expect("valid eligibility");
    let ut = expect_statistic(&law, &DemandStatistic { kind: StatisticKind::ExpectedUtilization, k });
    let ar = expect_statistic(&law, &DemandStatistic { kind: StatisticKind::AcceptanceRate, k });
    pol.t * k as f64 * ut + surplus_mass(inst, pol.t) * ar
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

#[derive(Clone, Copy)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    const EMPTY: Moments = Moments { count: 0.0, mean: 0.0, m2: 0.0 };

    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.count;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if other.count == 0.0 {
            return self;
        }
        if self.count == 0.0 {
            return other;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        Moments {
            count,
            mean: self.mean + delta * other.count / count,
            m2: self.m2 + other.m2 + delta * delta * self.count * other.count / count,
        }
    }

    fn estimate(self) -> McEstimate {
        let std_error = if self.count > 1.0 {
            (self.m2 / (self.count - 1.0) / self.count).sqrt()
        } else {
            0.0
        };
        McEstimate { estimate: self.mean, std_error }
    }
}

/// Runs `trials` independent trials, trial `i` drawing from substream `i` of
/// `seed`. Blocks of trials run in parallel and are merged in index order, so
/// the result does not depend on the thread count.
fn monte_carlo<F>(trials: usize, seed: u64, trial: F) -> McEstimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    let blocks = trials.div_ceil(MC_BLOCK);
    let partials: Vec<Moments> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = Moments::EMPTY;
            for i in b * MC_BLOCK..((b + 1) * MC_BLOCK).min(trials) {
                acc.push(trial(&mut trial_rng(seed, i)));
            }
            acc
        })
        .collect();
    partials
        .into_iter()
        .fold(Moments::EMPTY, Moments::merge)
        .estimate()
}

/// Simulates the policy under a uniformly random arrival order.
pub fn simulate_performance(
    inst: &Instance,
    pol: &ThresholdPolicy,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let n = inst.n();
    let k = inst.k();
    Ok(monte_carlo(trials, seed, |rng| {
        let values: Vec<f64> = inst
            .dists()
            .iter()
            .map(|d| d.atoms()[d.sample_index(rng.gen::<f64>())].value)
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut accepted = 0;
        let mut collected = 0.0;
        for i in order {
            if accepted == k {
                break;
            }
            let v = values[i];
            let eligible = v > pol.t || (v == pol.t && rng.gen::<f64>() < pol.p);
            if eligible {
                accepted += 1;
                collected += v;
            }
        }
        collected
    }))
}

fn top_k_sum(values: &mut [f64], k: usize) -> f64 {
    if k >= values.len() {
        return values.iter().sum();
    }
    values.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    values[..k].iter().sum()
}

/// Expected sum of the `k` largest values.
pub fn prophet_value(inst: &Instance, mode: ProphetMode) -> Result<ProphetValue> {
    match mode {
        ProphetMode::Exact => Ok(ProphetValue {
            value: prophet_exact(inst)?,
            std_error: None,
        }),
        ProphetMode::MonteCarlo { trials, seed } => {
            if trials == 0 {
                return Err(Error::InvalidArgument("trials must be at least 1".into()));
            }
            let k = inst.k();
            let est = monte_carlo(trials, seed, |rng| {
                let mut values: Vec<f64> = inst
                    .dists()
                    .iter()
                    .map(|d| d.atoms()[d.sample_index(rng.gen::<f64>())].value)
                    .collect();
                top_k_sum(&mut values, k)
            });
            Ok(ProphetValue {
                value: est.estimate,
                std_error: Some(est.std_error),
            })
        }
    }
}

/// Enumerates the product space of atoms.
fn prophet_exact(inst: &Instance) -> Result<f64> {
    let outcomes = inst.joint_outcomes();
    if outcomes > PROPHET_ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            outcomes,
            cap: PROPHET_ENUMERATION_CAP,
        });
    }
    let k = inst.k();
    let n = inst.n();
    // top[d] holds the k largest values among the first d applicants, descending
    let mut top: Vec<Vec<f64>> = vec![Vec::with_capacity(k + 1); n + 1];
    let mut total = 0.0;
    enumerate_top_k(inst, 0, 1.0, k, &mut top, &mut total);
    Ok(total)
}

fn enumerate_top_k(
    inst: &Instance,
    depth: usize,
    prob: f64,
    k: usize,
    top: &mut [Vec<f64>],
    total: &mut f64,
) {
    if depth == inst.n() {
        *total += prob * top[depth].iter().sum::<f64>();
        return;
    }
    for atom in inst.dists()[depth].atoms() {
        let (head, tail) = top.split_at_mut(depth + 1);
        let next = &mut tail[0];
        next.clear();
        next.extend_from_slice(&head[depth]);
        let pos = next.partition_point(|&x| x >= atom.value);
        if pos < k {
            next.insert(pos, atom.value);
            next.truncate(k);
        }
        enumerate_top_k(inst, depth + 1, prob * atom.mass, k, top, total);
    }
}

/// Exact prophet value by integrating `E[min(k, #{i : V_i > x})]` over `x`.
///
/// Polynomial in the instance size, so it also covers instances beyond the
/// enumeration cap.
pub fn prophet_value_layered(inst: &Instance) -> f64 {
    let k = inst.k();
    let mut levels = inst.distinct_values_desc();
    levels.reverse();
    let mut below = 0.0;
    let mut total = 0.0;
    for &level in &levels {
        let width = level - below;
        if width > 0.0 {
            let q: Vec<f64> = inst
                .dists()
                .iter()
                .map(|d| d.eligibility_at(below, 0.0).0)
                .collect();
            let groups: Vec<(f64, usize)> = group_counts(&q)
                .into_iter()
                .map(|(bits, c)| (f64::from_bits(bits), c))
                .collect();
            let law = grouped_poisson_binomial(&groups).expect("valid probabilities");
            total += width * law.expect(|d| d.min(k) as f64);
        }
        below = level;
    }
    total
}

/// Water-filling solution of the ex-ante relaxation: fill capacity `k` with
/// the highest-value atoms first, splitting the marginal atom pro rata by
/// each applicant's mass at that value.
pub fn lp_relaxation(inst: &Instance) -> LpSolution {
    let k = inst.k() as f64;
    let n = inst.n();
    let positive_mass: f64 = inst
        .dists()
        .iter()
        .map(|d| d.eligibility_at(0.0, 0.0).0)
        .sum();
    if positive_mass <= k {
        return LpSolution {
            value: inst.dists().iter().map(|d| d.mean()).sum(),
            weights: inst
                .dists()
                .iter()
                .map(|d| d.eligibility_at(0.0, 0.0).0)
                .collect(),
            dual: 0.0,
        };
    }
    let mut weights = vec![0.0; n];
    let mut value = 0.0;
    let mut used = 0.0;
    for level in inst.distinct_values_desc() {
        let at_level: Vec<(usize, f64)> = inst
            .dists()
            .iter()
            .enumerate()
            .filter_map(|(i, d)| {
                d.atoms()
                    .iter()
                    .find(|a| a.value == level)
                    .map(|a| (i, a.mass))
            })
            .collect();
        let mass: f64 = at_level.iter().map(|&(_, m)| m).sum();
        if used + mass <= k {
            for &(i, m) in &at_level {
                weights[i] += m;
            }
            value += level * mass;
            used += mass;
            continue;
        }
        let share = (k - used) / mass;
        for &(i, m) in &at_level {
            weights[i] += share * m;
        }
        value += level * (k - used);
        return LpSolution {
            value,
            weights,
            dual: level,
        };
    }
    unreachable!("positive mass above capacity is always cut at some atom")
}

/// Performance, benchmarks and ratio certificates for one policy. The
/// prophet is exact when enumeration fits under the cap and estimated with
/// `trials` Monte Carlo trials otherwise.
pub fn guarantee_report_with(
    inst: &Instance,
    pol: &ThresholdPolicy,
    trials: usize,
    seed: u64,
) -> Result<GuaranteeReport> {
    let k = inst.k();
    let performance = exact_performance(inst, pol);
    let prophet = if inst.joint_outcomes() <= PROPHET_ENUMERATION_CAP {
        prophet_value(inst, ProphetMode::Exact)?
    } else {
        prophet_value(inst, ProphetMode::MonteCarlo { trials, seed })?
    };
    let lp = lp_relaxation(inst);
    let elig = eligibility(inst, pol);
    let law = poisson_binomial(&elig.q)?;
    let stat = |kind| DemandStatistic { kind, k };
    let expected_ut = expect_statistic(&law, &stat(StatisticKind::ExpectedUtilization));
    let expected_ar = expect_statistic(&law, &stat(StatisticKind::AcceptanceRate));
    let ratio = |denom: f64| if denom > 0.0 { performance / denom } else { 0.0 };
    Ok(GuaranteeReport {
        performance,
        prophet: prophet.value,
        prophet_std_error: prophet.std_error,
        lp: lp.value,
        expected_ut,
        expected_ar,
        expected_demand: law.mean(),
        ratio_prophet: ratio(prophet.value),
        ratio_lp: ratio(lp.value),
        lb_bound: expected_ut.min(expected_ar),
    })
}

pub fn guarantee_report(inst: &Instance, pol: &ThresholdPolicy) -> Result<GuaranteeReport> {
    guarantee_report_with(inst, pol, DEFAULT_MC_TRIALS, 0)
}
