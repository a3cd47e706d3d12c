//! Reproduction of the guarantee numerics: binomial acceptance-rate curves
//! and their infimum, the `varphi_k(n)` table, the derivative bound, the two
//! worst-case instance families, the fixed-demand witnesses, the IID demand
//! check, the utilization guarantee curve and the stockout-target probe.
//!
//! [`run_all`] bundles the assertion suite behind `prophet verify all`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bernoulli_opt::{
    grid_slack, phi_ar_ut, phi_brute, phi_structured, BernoulliProgram, FEASIBILITY_TOLERANCE,
};
use crate::calibration::{calibrate, target_for};
use crate::error::{Error, Result};
use crate::evaluation::{
    exact_performance, lp_relaxation, performance_lower_bound, prophet_value, prophet_value_layered, simulate_performance,
    ProphetMode, ProphetValue, PROPHET_ENUMERATION_CAP,
};
use crate::instances::{
    example_demand_bad, example_hard_iid, random_instance, surplus_mass, Instance,
    ThresholdPolicy, ValueDistribution,
};
use crate::probcore::{
    ar, binomial_ar_closed, binomial_law, gamma, poisson_binomial, poisson_law,
    poisson_mode_mass, ut, w_constant, DemandStatistic, StatisticKind,
};

/// `n` used for the large-`n` limit of the utilization guarantee curve.
pub const UT_CURVE_N: usize = 10_000;

/// `varphi_k(k + l)` for `k = 9..=30` (rows) and `l = 1..=11` (columns).
pub const REFERENCE_VARPHI_TABLE: [[f64; 11]; 22] = [
    [0.1159, 0.1164, 0.1179, 0.1193, 0.1206, 0.1216, 0.1225, 0.1233, 0.1239, 0.1245, 0.1250],
    [0.1059, 0.1068, 0.1086, 0.1102, 0.1116, 0.1128, 0.1138, 0.1147, 0.1154, 0.1161, 0.1167],
    [0.0975, 0.0987, 0.1006, 0.1024, 0.1039, 0.1052, 0.1063, 0.1073, 0.1081, 0.1088, 0.1095],
    [0.0904, 0.0917, 0.0938, 0.0956, 0.0973, 0.0986, 0.0998, 0.1008, 0.1017, 0.1025, 0.1032],
    [0.0842, 0.0857, 0.0878, 0.0897, 0.0914, 0.0928, 0.0941, 0.0951, 0.0961, 0.0969, 0.0976],
    [0.0788, 0.0804, 0.0826, 0.0845, 0.0862, 0.0877, 0.0890, 0.0901, 0.0910, 0.0919, 0.0927],
    [0.0741, 0.0758, 0.0779, 0.0799, 0.0816, 0.0831, 0.0844, 0.0855, 0.0865, 0.0874, 0.0882],
    [0.0699, 0.0716, 0.0738, 0.0758, 0.0775, 0.0790, 0.0803, 0.0814, 0.0825, 0.0834, 0.0842],
    [0.0662, 0.0679, 0.0701, 0.0720, 0.0738, 0.0753, 0.0766, 0.0777, 0.0788, 0.0797, 0.0805],
    [0.0628, 0.0645, 0.0667, 0.0687, 0.0704, 0.0719, 0.0732, 0.0744, 0.0754, 0.0763, 0.0772],
    [0.0597, 0.0615, 0.0636, 0.0656, 0.0673, 0.0688, 0.0701, 0.0713, 0.0723, 0.0733, 0.0741],
    [0.0570, 0.0588, 0.0609, 0.0628, 0.0645, 0.0660, 0.0673, 0.0684, 0.0695, 0.0704, 0.0713],
    [0.0545, 0.0562, 0.0583, 0.0602, 0.0619, 0.0633, 0.0647, 0.0658, 0.0669, 0.0678, 0.0687],
    [0.0522, 0.0539, 0.0560, 0.0578, 0.0595, 0.0609, 0.0622, 0.0634, 0.0644, 0.0654, 0.0662],
    [0.0501, 0.0518, 0.0538, 0.0556, 0.0573, 0.0587, 0.0600, 0.0612, 0.0622, 0.0631, 0.0640],
    [0.0481, 0.0498, 0.0518, 0.0536, 0.0552, 0.0567, 0.0579, 0.0591, 0.0601, 0.0610, 0.0619],
    [0.0463, 0.0480, 0.0499, 0.0517, 0.0533, 0.0547, 0.0560, 0.0571, 0.0581, 0.0591, 0.0599],
    [0.0446, 0.0463, 0.0482, 0.0500, 0.0515, 0.0529, 0.0542, 0.0553, 0.0563, 0.0572, 0.0581],
    [0.0431, 0.0447, 0.0466, 0.0483, 0.0499, 0.0512, 0.0525, 0.0536, 0.0546, 0.0555, 0.0564],
    [0.0416, 0.0432, 0.0451, 0.0468, 0.0483, 0.0497, 0.0509, 0.0520, 0.0530, 0.0539, 0.0547],
    [0.0403, 0.0419, 0.0437, 0.0453, 0.0468, 0.0482, 0.0494, 0.0505, 0.0515, 0.0524, 0.0532],
    [0.0390, 0.0406, 0.0423, 0.0440, 0.0455, 0.0468, 0.0480, 0.0491, 0.0500, 0.0509, 0.0517],
];

/// `E[AR_k(Bin(n, k/n))]` for `n = k..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArCurve {
    pub k: usize,
    pub points: Vec<(usize, f64)>,
    pub min: f64,
    pub argmin: usize,
}

pub fn ar_curve(k: usize, n_max: usize) -> Result<ArCurve> {
    if k == 0 {
        return Err(Error::InvalidSupply(k));
    }
    if n_max < k {
        return Err(Error::InvalidArgument(format!("need n_max >= k, got {n_max} < {k}")));
    }
    let points = (k..=n_max)
        .into_par_iter()
        .map(|n| binomial_ar_closed(n, k).map(|v| (n, v)))
        .collect::<Result<Vec<_>>>()?;
    let (argmin, min) = points
        .iter()
        .fold((k, f64::INFINITY), |(bn, bv), &(n, v)| if v < bv { (n, v) } else { (bn, bv) });
    Ok(ArCurve { k, points, min, argmin })
}

/// Where the infimum over `n >= k` is attained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InfimumArgmin {
    Finite(usize),
    /// The `n -> infinity` limit `gamma(k)`.
    Limit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfimumAr {
    pub k: usize,
    pub value: f64,
    pub argmin: InfimumArgmin,
    /// Minimum of the curve over `n <= n_cap` alone, with its argmin.
    pub curve_min: f64,
    pub curve_argmin: usize,
    /// `min(k/(k+1), gamma(k))`.
    pub closed_form: f64,
}

/// `inf_{n >= k} E[AR_k(Bin(n, k/n))]`: the curve up to `n_cap` together with
/// its limit `gamma(k)` standing in for the tail.
pub fn infimum_ar(k: usize, n_cap: usize) -> Result<InfimumAr> {
    let curve = ar_curve(k, n_cap)?;
    let limit = gamma(k)?;
    let (value, argmin) = if curve.min <= limit {
        (curve.min, InfimumArgmin::Finite(curve.argmin))
    } else {
        (limit, InfimumArgmin::Limit)
    };
    Ok(InfimumAr {
        k,
        value,
        argmin,
        curve_min: curve.min,
        curve_argmin: curve.argmin,
        closed_form: (k as f64 / (k as f64 + 1.0)).min(limit),
    })
}

/// `varphi_k(n) = (1 - k/(n+1)) P[Bin(n, k/n) = k] + 1/(2(n+1))`.
pub fn varphi(k: usize, n: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidSupply(k));
    }
    if n < k {
        return Err(Error::InvalidArgument(format!("need n >= k, got n={n}, k={k}")));
    }
    let nf = n as f64;
    let at_k = binomial_law(n, k as f64 / nf)?.prob(k);
    Ok((1.0 - k as f64 / (nf + 1.0)) * at_k + 1.0 / (2.0 * (nf + 1.0)))
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// `varphi_k(k + l)` rounded to four decimals; rows follow `ks`, columns `ls`.
pub fn varphi_table(
    ks: impl IntoIterator<Item = usize>,
    ls: impl IntoIterator<Item = usize> + Clone,
) -> Result<Vec<Vec<f64>>> {
    ks.into_iter()
        .map(|k| ls.clone().into_iter().map(|l| varphi(k, k + l).map(round4)).collect())
        .collect()
}

/// Lower bound on `2(n+1)^2 varphi_k'(n)`:
/// `k P(Pois(k)=k) (1 - 1/n - 1/(n-k) - 1/(n(n-k))) - 1`.
pub fn deriv_rhs(k: usize, n: f64) -> Result<f64> {
    let kf = k as f64;
    if n.is_nan() || n < kf + 2.0 {
        return Err(Error::InvalidArgument(format!("need n >= k + 2, got n={n}, k={k}")));
    }
    let mode = poisson_mode_mass(k)?;
    Ok(kf * mode * (1.0 - 1.0 / n - 1.0 / (n - kf) - 1.0 / (n * (n - kf))) - 1.0)
}

/// Best static threshold on the hard IID instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardSweep {
    pub k: usize,
    pub n: usize,
    pub best_ratio: f64,
    pub best_accept_prob: f64,
    pub best_performance: f64,
    pub prophet: ProphetValue,
    /// Exact prophet value from the layered formula, for reference.
    pub prophet_exact: f64,
    /// `best_performance / prophet_exact`.
    pub best_ratio_exact: f64,
    /// `k + W_k - (1 + W_k)/(n + 1)`.
    pub prophet_lower_bound: f64,
    /// `gamma_k + 2 k W_k (n^{-2/3} + n^{-1/3}) + 4 se / prophet`.
    pub ratio_envelope: f64,
    /// Value upper bound `gamma_k (k + W_k) + 2 k W_k (n^{-2/3} + n^{-1/3})`.
    pub value_upper_bound: f64,
}

/// Sweeps the tie-break probability at the unit atom on the hard instance.
///
/// Thresholds strictly between the two atoms behave like `p = 0` and
/// thresholds below 1 like `p = 1`, so `p` is the only free choice.
pub fn hard_instance_sweep(k: usize, n: usize, trials: usize, seed: u64) -> Result<HardSweep> {
    let inst = example_hard_iid(k, n)?;
    let perf = |p: f64| exact_performance(&inst, &ThresholdPolicy { t: 1.0, p });

    let mut grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    grid.extend((0..=2000).map(|i| 10f64.powf(-10.0 + 10.0 * i as f64 / 2000.0)));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let values: Vec<f64> = grid.par_iter().map(|&p| perf(p)).collect();
    let best_idx = (0..grid.len())
        .max_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("grid nonempty");
    let lo = grid[best_idx.saturating_sub(1)];
    let hi = grid[(best_idx + 1).min(grid.len() - 1)];
    let refined = golden_max(&perf, lo, hi);
    let (best_accept_prob, best_performance) = if perf(refined) > values[best_idx] {
        (refined, perf(refined))
    } else {
        (grid[best_idx], values[best_idx])
    };

    let prophet = prophet_value(&inst, ProphetMode::MonteCarlo { trials, seed })?;
    let w = w_constant(k)?;
    let g = gamma(k)?;
    let kf = k as f64;
    let nf = n as f64;
    let decay = nf.powf(-2.0 / 3.0) + nf.powf(-1.0 / 3.0);
    let se = prophet.std_error.unwrap_or(0.0);
    let prophet_exact = prophet_value_layered(&inst);
    Ok(HardSweep {
        k,
        n,
        best_ratio: best_performance / prophet.value,
        best_accept_prob,
        best_performance,
        prophet,
        prophet_exact,
        best_ratio_exact: best_performance / prophet_exact,
        prophet_lower_bound: kf + w - (1.0 + w) / (nf + 1.0),
        ratio_envelope: g + 2.0 * kf * w * decay + 4.0 * se / prophet.value,
        value_upper_bound: g * (kf + w) + 2.0 * kf * w * decay,
    })
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..120 {
        if b - a < 1e-16 {
            break;
        }
        let c = b - ratio * (b - a);
        let d = a + ratio * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemandBadResult {
    pub k: usize,
    pub eps: f64,
    pub policy: ThresholdPolicy,
    pub performance: f64,
    pub prophet: f64,
    pub ratio: f64,
}

/// Demand-calibrated policy on the rare-high-value instance, against the
/// exact prophet.
pub fn demand_bad_sweep(k: usize, eps: f64) -> Result<DemandBadResult> {
    if !(eps > 0.0 && eps < 0.1) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 0.1), got {eps}")));
    }
    let inst = example_demand_bad(k, eps)?;
    let stat = DemandStatistic::new(StatisticKind::ExpectedDemand, k)?;
    let policy = calibrate(&inst, &stat, k as f64)?;
    let performance = exact_performance(&inst, &policy);
    let prophet = prophet_value(&inst, ProphetMode::Exact)?.value;
    Ok(DemandBadResult {
        k,
        eps,
        policy,
        performance,
        prophet,
        ratio: performance / prophet,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    /// Every value is identically one; the policy accepts too few.
    UnitValues,
    /// Zeros plus one rare value `n`; the policy accepts too many zeros.
    RareHighValue,
    /// Target equal to `k`: the rare-high-value instance with `eps = 1e-3`.
    DemandBad,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemandWitness {
    pub kind: WitnessKind,
    pub k: usize,
    pub phi: f64,
    /// Applicant count of the reported witness (`k + 1` for `DemandBad`).
    pub n: usize,
    pub policy: ThresholdPolicy,
    pub ratio: f64,
    pub gamma: f64,
    /// `ratio < gamma`.
    pub conclusive: bool,
    #[serde(skip)]
    pub instance: Instance,
}

/// Builds an instance on which calibrating expected demand to `phi` earns
/// strictly less than `gamma_k` of the prophet. Tries each of `n_candidates`
/// in order and reports the first conclusive witness (or the last attempt).
pub fn fixed_demand_insufficiency(k: usize, phi: f64, n_candidates: &[usize]) -> Result<DemandWitness> {
    if k == 0 {
        return Err(Error::InvalidSupply(k));
    }
    if k >= 5 {
        return Err(Error::InvalidArgument(format!(
            "the fixed-demand witnesses cover k < 5, got k={k}"
        )));
    }
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(Error::InvalidArgument(format!("phi must be positive, got {phi}")));
    }
    let g = gamma(k)?;
    let stat = DemandStatistic::new(StatisticKind::ExpectedDemand, k)?;
    if (phi - k as f64).abs() <= 1e-12 {
        let bad = demand_bad_sweep(k, 1e-3)?;
        return Ok(DemandWitness {
            kind: WitnessKind::DemandBad,
            k,
            phi,
            n: k + 1,
            policy: bad.policy,
            ratio: bad.ratio,
            gamma: g,
            conclusive: bad.ratio < g,
            instance: example_demand_bad(k, 1e-3)?,
        });
    }
    let mut last = None;
    for &n in n_candidates {
        if (n as f64) < phi.max(1.0) || n < 2 {
            continue;
        }
        let (kind, instance) = if phi < k as f64 {
            (
                WitnessKind::UnitValues,
                Instance::iid(k, n, ValueDistribution::point(1.0)?)?,
            )
        } else {
            let rare = 1.0 / n as f64;
            let mut dists = vec![ValueDistribution::point(0.0)?; n - 1];
            dists.push(ValueDistribution::from_pairs(&[(0.0, 1.0 - rare), (n as f64, rare)])?);
            (WitnessKind::RareHighValue, Instance::new(k, dists)?)
        };
        let policy = calibrate(&instance, &stat, phi)?;
        let prophet = prophet_value(&instance, ProphetMode::Exact)?.value;
        let ratio = exact_performance(&instance, &policy) / prophet;
        let witness = DemandWitness {
            kind,
            k,
            phi,
            n,
            policy,
            ratio,
            gamma: g,
            conclusive: ratio < g,
            instance,
        };
        if witness.conclusive {
            return Ok(witness);
        }
        last = Some(witness);
    }
    last.ok_or_else(|| {
        Error::InvalidArgument(format!("no candidate n accommodates demand target {phi}"))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IidDemandReport {
    pub k: usize,
    pub n: usize,
    pub policy: ThresholdPolicy,
    pub performance: f64,
    pub prophet: ProphetValue,
    pub ratio: f64,
    pub gamma: f64,
    /// `E[min(Bin(n, k/n), k)] / k`.
    pub binomial_ratio: f64,
    /// `binomial_ratio >= gamma_k`.
    pub inner_holds: bool,
    /// `performance >= gamma_k * prophet` up to tolerance (4 standard errors
    /// when the prophet is estimated).
    pub holds: bool,
}

/// Demand calibration on an IID instance earns at least `gamma_k` of the
/// prophet; the per-instance ratio is bounded below by
/// `E[min(Bin(n, k/n), k)] / k`.
pub fn iid_demand_check(
    k: usize,
    n: usize,
    dist: &ValueDistribution,
    trials: usize,
    seed: u64,
) -> Result<IidDemandReport> {
    let inst = Instance::iid(k, n, dist.clone())?;
    iid_demand_check_instance(&inst, trials, seed)
}

pub fn iid_demand_check_instance(inst: &Instance, trials: usize, seed: u64) -> Result<IidDemandReport> {
    if !inst.is_iid() {
        return Err(Error::InvalidArgument("instance values are not IID".into()));
    }
    let (k, n) = (inst.k(), inst.n());
    let stat = DemandStatistic::new(StatisticKind::ExpectedDemand, k)?;
    let policy = calibrate(inst, &stat, k as f64)?;
    let performance = exact_performance(inst, &policy);
    let prophet = if inst.joint_outcomes() <= PROPHET_ENUMERATION_CAP {
        prophet_value(inst, ProphetMode::Exact)?
    } else {
        prophet_value(inst, ProphetMode::MonteCarlo { trials, seed })?
    };
    let g = gamma(k)?;
    let binomial_ratio = binomial_law(n, (k as f64 / n as f64).min(1.0))?
        .expect(|d| d.min(k) as f64)
        / k as f64;
    let slack = 4.0 * prophet.std_error.unwrap_or(0.0) * g + 1e-9;
    Ok(IidDemandReport {
        k,
        n,
        policy,
        performance,
        prophet,
        ratio: performance / prophet.value,
        gamma: g,
        binomial_ratio,
        inner_holds: binomial_ratio >= g - 1e-12,
        holds: performance >= g * prophet.value - slack,
    })
}

/// Default utilization levels: `0.01, 0.02, ..., 0.99` plus `gamma_k`.
pub fn default_ut_grid(k: usize) -> Result<Vec<f64>> {
    let mut grid: Vec<f64> = (1..100).map(|i| i as f64 / 100.0).collect();
    grid.push(gamma(k)?);
    grid.sort_by(f64::total_cmp);
    Ok(grid)
}

/// Guaranteed fraction of the prophet for a threshold whose expected
/// utilization is `a`: `min(a, Phi_n(AR_k, UT_k, a))` at `n = UT_CURVE_N`.
pub fn ut_guarantee_curve(k: usize, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    grid.par_iter()
        .map(|&a| {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "utilization levels must lie in (0, 1), got {a}"
                )));
            }
            let (acceptance, _) = phi_ar_ut(UT_CURVE_N, k, a)?;
            Ok((a, a.min(acceptance)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StockoutProbe {
    pub k: usize,
    pub target: f64,
    pub evaluated: usize,
    /// Instances where the target could not be reached.
    pub skipped: usize,
    pub ratios_lp: Vec<Option<f64>>,
    pub min_ratio_lp: f64,
    /// Indices with `ratio_lp < gamma_k`: potential counterexamples.
    pub flagged: Vec<usize>,
}

/// Calibrates the stockout probability to `P(Pois(k) >= k)` on every corpus
/// instance (with supply `k`) and records `performance / LP`. Nothing is
/// asserted; ratios below `gamma_k` are only flagged.
pub fn stockout_conjecture_probe(k: usize, corpus: &[Instance]) -> Result<StockoutProbe> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("corpus is empty".into()));
    }
    let target = target_for(StatisticKind::StockoutProbability, k)?;
    let stat = DemandStatistic::new(StatisticKind::StockoutProbability, k)?;
    let g = gamma(k)?;
    let ratios_lp: Vec<Option<f64>> = corpus
        .par_iter()
        .map(|inst| {
            let inst = Instance::new(k, inst.dists().to_vec()).ok()?;
            let pol = calibrate(&inst, &stat, target).ok()?;
            let lp = lp_relaxation(&inst).value;
            Some(if lp > 0.0 { exact_performance(&inst, &pol) / lp } else { 1.0 })
        })
        .collect();
    let flagged = ratios_lp
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.filter(|&r| r < g - 1e-9).map(|_| i))
        .collect();
    let evaluated = ratios_lp.iter().flatten().count();
    Ok(StockoutProbe {
        k,
        target,
        evaluated,
        skipped: corpus.len() - evaluated,
        min_ratio_lp: ratios_lp.iter().flatten().copied().fold(f64::INFINITY, f64::min),
        ratios_lp,
        flagged,
    })
}

/// Random program on `n <= n_max` variables with tables in `[-1, 1]` and
/// `phi` uniform on the attainable range `[min g, max g]`.
pub fn random_program(seed: u64, n_max: usize) -> BernoulliProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=n_max);
    let f: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let g: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let lo = g.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let phi = rng.gen_range(lo..=hi);
    BernoulliProgram::new(f, g, phi).expect("finite tables")
}

/// Random Bernoulli means of length `1..=n_max`; about one in ten entries is
/// exactly 0 or 1.
pub fn random_means(seed: u64, n_max: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=n_max);
    (0..n)
        .map(|_| match rng.gen_range(0..20) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.gen::<f64>(),
        })
        .collect()
}

/// Formats `x` with 12 significant digits.
pub fn fmt_sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&magnitude) {
        return format!("{x:.11e}");
    }
    let decimals = (11 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Writes a CSV with a header row; numeric cells use 12 significant digits.
pub fn write_csv<W: Write>(out: &mut W, header: &[&str], rows: &[Vec<f64>]) -> std::io::Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt_sig12(v)).collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

/// Writes the `varphi` table for `k = 9..=30`, `l = 1..=11` with four decimals.
pub fn write_varphi_csv<W: Write>(out: &mut W) -> Result<()> {
    let table = varphi_table(9..=30, 1..=11)?;
    let mut header = vec!["k".to_string()];
    header.extend((1..=11).map(|l| format!("l{l}")));
    writeln!(out, "{}", header.join(","))?;
    for (row, k) in table.iter().zip(9..) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
        writeln!(out, "{k},{}", cells.join(","))?;
    }
    Ok(())
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationSummary {
    pub fast: bool,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

fn check(name: &str, outcome: Result<(bool, String)>) -> CheckResult {
    match outcome {
        Ok((passed, detail)) => CheckResult { name: name.into(), passed, detail },
        Err(e) => CheckResult { name: name.into(), passed: false, detail: format!("error: {e}") },
    }
}

/// Runs the whole assertion suite. `fast` shrinks corpus sizes and Monte
/// Carlo budgets; tolerances are unchanged.
pub fn run_all(fast: bool) -> VerificationSummary {
    let corpus_size = if fast { 40 } else { 200 };
    let checks = vec![
        check("scalar_constants", check_constants()),
        check("varphi_table", check_varphi_table()),
        check("infimum_ar", check_infimum(if fast { 10 } else { 30 })),
        check("poisson_identities", check_poisson_identities()),
        check("utilization_policy_guarantee", check_utilization_corpus(corpus_size)),
        check("demand_policy_guarantee", check_demand_corpus(corpus_size)),
        check("hard_instance", check_hard_instance(if fast { 20_000 } else { 100_000 })),
        check("demand_bad_tightness", check_demand_bad()),
        check("bernoulli_structure", check_bernoulli_structure(if fast { 20 } else { 100 })),
        check("poisson_binomial_facts", check_poisson_binomial_facts(500)),
        check("allocation_identity", check_allocation_identity()),
        check("binomial_root_bound", check_root_bound()),
        check("simulation_agreement", check_simulation(if fast { 10 } else { 50 }, if fast { 20_000 } else { 100_000 })),
        check("derivative_bound", check_derivative_bound()),
        check("fixed_demand_witnesses", check_witnesses()),
        check("utilization_curve_peak", check_ut_curve()),
    ];
    VerificationSummary { fast, passed: checks.iter().all(|c| c.passed), checks }
}

fn check_constants() -> Result<(bool, String)> {
    let g1 = gamma(1)?;
    let g100 = gamma(100)?;
    let ok = (g1 - (1.0 - (-1.0f64).exp())).abs() < 1e-15 && g100 > 0.96;
    Ok((ok, format!("gamma_1={g1:.12} gamma_100={g100:.6}")))
}

fn check_varphi_table() -> Result<(bool, String)> {
    let table = varphi_table(9..=30, 1..=11)?;
    let mut mismatches = 0;
    let mut rows_monotone = true;
    for (row, reference) in table.iter().zip(REFERENCE_VARPHI_TABLE.iter()) {
        mismatches += row.iter().zip(reference).filter(|(a, b)| (*a - *b).abs() > 5e-9).count();
        rows_monotone &= row.windows(2).all(|w| w[1] >= w[0]);
    }
    Ok((
        mismatches == 0 && rows_monotone,
        format!("{mismatches} mismatched cells of 242; rows nondecreasing: {rows_monotone}"),
    ))
}

fn check_infimum(k_max: usize) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut argmin_ok = true;
    for k in 1..=k_max {
        let inf = infimum_ar(k, 5000)?;
        worst = worst.max((inf.value - inf.closed_form).abs());
        if k <= 4 {
            argmin_ok &= inf.argmin == InfimumArgmin::Finite(k);
        } else if k <= 8 {
            argmin_ok &= inf.curve_argmin == 5000 && (inf.curve_min - gamma(k)?).abs() <= 1e-3;
        }
    }
    Ok((worst <= 1e-3 && argmin_ok, format!("k<= {k_max}: max |inf - closed form| = {worst:.2e}")))
}

fn check_poisson_identities() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for k in 1..=50usize {
        let law = poisson_law(k as f64)?;
        let g = gamma(k)?;
        worst = worst.max((law.expect(|d| ut(k, d)) - g).abs());
        worst = worst.max((law.expect(|d| ar(k, d)) - g).abs());
    }
    for k in 1..=20usize {
        for lambda in [0.5, 1.0, k as f64, 3.0 * k as f64] {
            let law = poisson_law(lambda)?;
            let kf = k as f64;
            let lhs = kf * law.expect(|d| ut(k, d));
            let mid = lambda * law.cdf_below(k) + kf * law.sf_above(k);
            let rhs = lambda * law.expect(|d| ar(k, d));
            worst = worst.max((lhs - mid).abs()).max((mid - rhs).abs());
        }
    }
    Ok((worst <= 1e-10, format!("max deviation {worst:.2e}")))
}

fn corpus(size: usize) -> Result<Vec<Instance>> {
    (0..size as u64).map(|seed| random_instance(seed, 8, 4, 4)).collect()
}

fn check_utilization_corpus(size: usize) -> Result<(bool, String)> {
    let instances = corpus(size)?;
    let worst = instances
        .par_iter()
        .map(|inst| -> Result<f64> {
            let k = inst.k();
            let stat = DemandStatistic::new(StatisticKind::ExpectedUtilization, k)?;
            let g = gamma(k)?;
            let pol = calibrate(inst, &stat, g)?;
            let perf = exact_performance(inst, &pol);
            let lp = lp_relaxation(inst).value;
            let pht = prophet_value(inst, ProphetMode::Exact)?.value;
            Ok((perf - g * lp).min(perf - g * pht))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok((worst >= -1e-9, format!("{size} instances; min slack {worst:.3e}")))
}

fn check_demand_corpus(size: usize) -> Result<(bool, String)> {
    let instances = corpus(size)?;
    let worst = instances
        .par_iter()
        .map(|inst| -> Result<f64> {
            let k = inst.k();
            let stat = DemandStatistic::new(StatisticKind::ExpectedDemand, k)?;
            let pol = calibrate(inst, &stat, k as f64)?;
            let bound = gamma(k)?.min(k as f64 / (k as f64 + 1.0));
            let perf = exact_performance(inst, &pol);
            let pht = prophet_value(inst, ProphetMode::Exact)?.value;
            let law = poisson_binomial(&crate::instances::eligibility(inst, &pol).q)?;
            let ut_minus_ar = law.expect(|d| ut(k, d)) - law.expect(|d| ar(k, d));
            Ok((perf - bound * pht).min(ut_minus_ar + 1e-9))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok((worst >= -1e-9, format!("{size} instances; min slack {worst:.3e}")))
}

fn check_hard_instance(trials: usize) -> Result<(bool, String)> {
    let sweep = hard_instance_sweep(1, 10_000, trials, 2024)?;
    let se = sweep.prophet.std_error.unwrap_or(0.0);
    let ratio_ok = sweep.best_ratio <= sweep.ratio_envelope;
    let prophet_ok = sweep.prophet.value >= sweep.prophet_lower_bound - 4.0 * se;
    Ok((
        ratio_ok && prophet_ok,
        format!(
            "best ratio {:.4} (exact prophet: {:.4}) <= envelope {:.4}; prophet {:.4} (se {:.3}) vs lower bound {:.4}",
            sweep.best_ratio, sweep.best_ratio_exact, sweep.ratio_envelope, sweep.prophet.value, se, sweep.prophet_lower_bound
        ),
    ))
}

fn check_demand_bad() -> Result<(bool, String)> {
    let mut ok = true;
    let mut detail = Vec::new();
    for k in 1..=4usize {
        let r = demand_bad_sweep(k, 1e-3)?;
        let kf = k as f64;
        let lower = gamma(k)?.min(kf / (kf + 1.0)) - 1e-9;
        let upper = kf / (kf + 1.0) + 0.01;
        ok &= r.ratio >= lower && r.ratio <= upper;
        detail.push(format!("k={k}: {:.4}", r.ratio));
    }
    Ok((ok, detail.join(", ")))
}

fn check_bernoulli_structure(count: u64) -> Result<(bool, String)> {
    let step = 0.02;
    let outcomes = (0..count)
        .into_par_iter()
        .map(|seed| -> Result<(bool, f64)> {
            let prog = random_program(seed, 4);
            let structured = phi_structured(&prog, FEASIBILITY_TOLERANCE)?;
            let brute = phi_brute(&prog, step)?;
            let slack = grid_slack(&prog, step);
            Ok((brute.value >= structured.value - slack, structured.value - brute.value))
        })
        .collect::<Result<Vec<_>>>()?;
    let failures = outcomes.iter().filter(|(ok, _)| !ok).count();
    let worst = outcomes.iter().map(|&(_, gap)| gap).fold(f64::NEG_INFINITY, f64::max);
    Ok((failures == 0, format!("{count} programs; largest brute improvement {worst:.2e}")))
}

/// Interval support, log-concavity, unimodality around the mean and the
/// reversed-hazard inequality for one Poisson Binomial law.
pub fn poisson_binomial_facts_hold(probs: &[f64]) -> Result<bool> {
    let law = poisson_binomial(probs)?;
    let h = law.pmf();
    let big_h = law.cdf();
    let support: Vec<usize> = (0..h.len()).filter(|&j| h[j] > 0.0).collect();
    let interval = support.windows(2).all(|w| w[1] == w[0] + 1);
    let log_concave = (1..h.len() - 1).all(|j| {
        let lhs = h[j] * h[j];
        let rhs = h[j - 1] * h[j + 1];
        if h[j] > 0.0 {
            lhs > rhs || (rhs - lhs).abs() <= 1e-14 * lhs && lhs > 0.0 && rhs < lhs * (1.0 + 1e-14)
        } else {
            lhs >= rhs
        }
    });
    let lambda = law.mean();
    let (fl, cl) = (lambda.floor() as usize, lambda.ceil() as usize);
    let tol = |a: f64| 1e-13 * a.max(1e-300);
    let rising = (0..fl.min(h.len() - 1)).all(|j| h[j] <= h[j + 1] + tol(h[j + 1]));
    let falling = (cl..h.len() - 1).all(|j| h[j + 1] <= h[j] + tol(h[j]));
    let hazard = (2..h.len()).all(|j| {
        big_h[j - 2] * h[j - 1] <= big_h[j - 1] * h[j - 2] + 1e-14 * (big_h[j - 1] * h[j - 2]).max(1e-300)
    });
    Ok(interval && log_concave && rising && falling && hazard)
}

fn check_poisson_binomial_facts(count: u64) -> Result<(bool, String)> {
    let mut failures = 0;
    for seed in 0..count {
        if !poisson_binomial_facts_hold(&random_means(seed, 12))? {
            failures += 1;
        }
    }
    Ok((failures == 0, format!("{failures} of {count} vectors violate a fact")))
}

fn check_allocation_identity() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for len in 1..=12usize {
        for k in 1..=6 {
            for mask in 0u32..(1 << len) {
                let d = mask.count_ones() as usize;
                let rhs = d as f64 * if d > 0 { ar(k, d - 1) } else { 0.0 };
                worst = worst.max((d.min(k) as f64 - rhs).abs());
            }
        }
    }
    Ok((worst <= 1e-12, format!("max deviation {worst:.2e}")))
}

fn check_root_bound() -> Result<(bool, String)> {
    let mut violations = 0;
    for k in 1..=10usize {
        let g = gamma(k)?;
        for n in k + 1..=200 {
            let (_, p) = phi_ar_ut(n, k, g)?;
            if p > k as f64 / n as f64 + 1e-12 {
                violations += 1;
            }
        }
    }
    Ok((violations == 0, format!("{violations} (n, k) pairs with p_nk > k/n")))
}

fn check_simulation(count: usize, trials: usize) -> Result<(bool, String)> {
    let instances = corpus(count)?;
    let mut failures = 0;
    for (i, inst) in instances.iter().enumerate() {
        let values = inst.distinct_values_desc();
        let pol = ThresholdPolicy { t: values[values.len() / 2], p: 0.5 };
        let exact = exact_performance(inst, &pol);
        let mc = simulate_performance(inst, &pol, trials, i as u64)?;
        if (exact - mc.estimate).abs() > 4.0 * mc.std_error + 1e-9 {
            failures += 1;
        }
        let pht = prophet_value(inst, ProphetMode::Exact)?.value;
        let lp = lp_relaxation(inst).value;
        let upper = pol.t * inst.k() as f64 + surplus_mass(inst, pol.t);
        if pht > lp + 1e-9 || lp > upper + 1e-9 {
            failures += 1;
        }
        if exact < performance_lower_bound(inst, &pol) - 1e-9 {
            failures += 1;
        }
    }
    Ok((failures == 0, format!("{failures} failures over {count} instances at {trials} trials")))
}

fn check_derivative_bound() -> Result<(bool, String)> {
    let a = deriv_rhs(31, 33.0)?;
    let b = deriv_rhs(9, 20.0)?;
    let monotone = (1..=40usize).all(|k| {
        (0..200).all(|i| {
            let n = (k + 2) as f64 + i as f64;
            deriv_rhs(k, n + 1.0).unwrap() >= deriv_rhs(k, n).unwrap()
        })
    });
    Ok((a > 0.0 && b > 0.0 && monotone, format!("rhs(31,33)={a:.4} rhs(9,20)={b:.4}")))
}

fn check_witnesses() -> Result<(bool, String)> {
    let candidates = [100, 1000, 10_000];
    let mut ok = true;
    let mut detail = Vec::new();
    for k in 1..=4usize {
        for phi in [0.5 * k as f64, k as f64, 1.5 * k as f64] {
            let w = fixed_demand_insufficiency(k, phi, &candidates)?;
            ok &= w.conclusive;
            detail.push(format!("k={k} phi={phi}: {:.4}", w.ratio));
        }
    }
    Ok((ok, detail.join(", ")))
}

fn check_ut_curve() -> Result<(bool, String)> {
    let mut ok = true;
    let mut detail = Vec::new();
    for k in [1usize, 2, 5] {
        let curve = ut_guarantee_curve(k, &default_ut_grid(k)?)?;
        let g = gamma(k)?;
        let (peak_a, peak) = curve
            .iter()
            .copied()
            .fold((0.0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
        ok &= (peak_a - g).abs() < 1e-12 && (peak - g).abs() <= 1e-3;
        detail.push(format!("k={k}: peak {peak:.5} at {peak_a:.5}"));
    }
    Ok((ok, detail.join(", ")))
}
