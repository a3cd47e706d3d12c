//! Exact distribution kernels: Poisson and binomial laws, the Poisson
//! Binomial law of a sum of independent Bernoullis, and the scalar functions
//! (`gamma`, `w_constant`, utilization, acceptance rate) that the threshold
//! analysis is phrased in.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Poisson laws are truncated at the smallest `m` with `P(Pois > m)` below this.
pub const POISSON_TAIL_CUTOFF: f64 = 1e-16;

/// Binomial weights (relative to the mode) below this are dropped.
const BINOMIAL_WEIGHT_CUTOFF: f64 = 1e-22;

/// `ln(n!)`.
pub fn ln_factorial(n: usize) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

fn check_supply(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::InvalidSupply(k))
    } else {
        Ok(())
    }
}

/// The tight static-threshold guarantee `1 - e^{-k} k^k / k!`.
pub fn gamma(k: usize) -> Result<f64> {
    check_supply(k)?;
    let kf = k as f64;
    let ln_mode_mass = -kf + kf * kf.ln() - ln_factorial(k);
    Ok(1.0 - ln_mode_mass.exp())
}

/// `P(Pois(k) = k) = e^{-k} k^k / k!`, i.e. `1 - gamma(k)`.
pub fn poisson_mode_mass(k: usize) -> Result<f64> {
    check_supply(k)?;
    let kf = k as f64;
    Ok((-kf + kf * kf.ln() - ln_factorial(k)).exp())
}

/// High-value scale of the worst-case IID instance:
/// `k * P(Pois(k) < k) / P(Pois(k) > k)`.
pub fn w_constant(k: usize) -> Result<f64> {
    check_supply(k)?;
    let law = poisson_law(k as f64)?;
    Ok(k as f64 * law.cdf_below(k) / law.sf_above(k))
}

/// `P(Pois(k) >= k)`, the stockout-probability target.
pub fn poisson_stockout_target(k: usize) -> Result<f64> {
    check_supply(k)?;
    let law = poisson_law(k as f64)?;
    Ok(law.sf_above(k) + law.prob(k))
}

/// Utilization `min(1, d / k)`.
pub fn ut(k: usize, d: usize) -> f64 {
    debug_assert!(k >= 1);
    if d >= k {
        1.0
    } else {
        d as f64 / k as f64
    }
}

/// Acceptance rate `min(1, k / (d + 1))`.
pub fn ar(k: usize, d: usize) -> f64 {
    debug_assert!(k >= 1);
    if d < k {
        1.0
    } else {
        k as f64 / (d as f64 + 1.0)
    }
}

/// A probability mass function on `offset, offset + 1, ...` stored densely.
///
/// Used for truncated Poisson laws, binomials and convolutions of
/// binomial blocks. Mass outside the stored window is either exactly zero
/// (binomial ends) or below the truncation cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw {
    offset: usize,
    probs: Vec<f64>,
}

impl DiscreteLaw {
    pub fn point(at: usize) -> Self {
        Self {
            offset: at,
            probs: vec![1.0],
        }
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    /// Largest value in the stored window.
    pub fn max_value(&self) -> usize {
        self.offset + self.probs.len() - 1
    }

    pub fn prob(&self, j: usize) -> f64 {
        if j < self.offset {
            return 0.0;
        }
        self.probs.get(j - self.offset).copied().unwrap_or(0.0)
    }

    /// Iterator over `(value, mass)` pairs of the stored window.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| (self.offset + i, p))
    }

    /// `P(X < j)`.
    pub fn cdf_below(&self, j: usize) -> f64 {
        self.iter().take_while(|&(v, _)| v < j).map(|(_, p)| p).sum()
    }

    /// `P(X > j)`, summed from the top for accuracy.
    pub fn sf_above(&self, j: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .rev()
            .take_while(|&(i, _)| self.offset + i > j)
            .map(|(_, &p)| p)
            .sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|j| j as f64)
    }

    pub fn expect<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        self.iter().map(|(j, p)| p * f(j)).sum()
    }

    pub fn convolve(&self, other: &DiscreteLaw) -> DiscreteLaw {
        let mut probs = vec![0.0; self.probs.len() + other.probs.len() - 1];
        for (i, &a) in self.probs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.probs.iter().enumerate() {
                probs[i + j] += a * b;
            }
        }
        DiscreteLaw {
            offset: self.offset + other.offset,
            probs,
        }
    }
}

/// Poisson law with mean `lambda`, truncated at the smallest `m` with
/// `P(Pois(lambda) > m) < POISSON_TAIL_CUTOFF`.
pub fn poisson_law(lambda: f64) -> Result<DiscreteLaw> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Poisson mean must be finite and nonnegative, got {lambda}"
        )));
    }
    if lambda == 0.0 {
        return Ok(DiscreteLaw::point(0));
    }
    let bound = (lambda + 12.0 * lambda.sqrt() + 40.0).ceil() as usize;
    let ln_lambda = lambda.ln();
    let mut probs: Vec<f64> = (0..=bound)
        .map(|j| (-lambda + j as f64 * ln_lambda - ln_factorial(j)).exp())
        .collect();
    // tail[m] = P(X > m) within the computed window
    let mut tail = 0.0;
    let mut cut = bound;
    for m in (0..=bound).rev() {
        if tail >= POISSON_TAIL_CUTOFF {
            break;
        }
        cut = m;
        tail += probs[m];
    }
    probs.truncate(cut + 1);
    Ok(DiscreteLaw { offset: 0, probs })
}

/// Binomial law `Bin(n, p)`.
///
/// Weights are built outward from the mode by the ratio recurrence and
/// normalized, so no factorial is ever formed in linear space. Weights below
/// `1e-22` of the mode weight are dropped.
pub fn binomial_law(n: usize, p: f64) -> Result<DiscreteLaw> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::ProbabilityOutOfRange { index: 0, value: p });
    }
    if p == 0.0 || n == 0 {
        return Ok(DiscreteLaw::point(0));
    }
    if p == 1.0 {
        return Ok(DiscreteLaw::point(n));
    }
    let odds = p / (1.0 - p);
    let mode = (((n + 1) as f64 * p).floor() as usize).min(n);

    let mut upper = vec![1.0];
    let mut w = 1.0;
    for j in mode..n {
        w *= (n - j) as f64 / (j + 1) as f64 * odds;
        if w < BINOMIAL_WEIGHT_CUTOFF {
            break;
        }
        upper.push(w);
    }
    let mut lower = Vec::new();
    let mut w = 1.0;
    for j in (1..=mode).rev() {
        w *= j as f64 / (n - j + 1) as f64 / odds;
        if w < BINOMIAL_WEIGHT_CUTOFF {
            break;
        }
        lower.push(w);
    }
    let offset = mode - lower.len();
    lower.reverse();
    lower.extend(upper);
    let mut probs = lower;
    let total: f64 = probs.iter().sum();
    for v in probs.iter_mut() {
        *v /= total;
    }
    Ok(DiscreteLaw { offset, probs })
}

/// Exact law of `D = sum_i B_i` with independent `B_i ~ Bernoulli(q_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonBinomial {
    probs: Vec<f64>,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl PoissonBinomial {
    /// Builds the pmf by convolving in one Bernoulli at a time (O(n²)).
    pub fn new(probs: &[f64]) -> Result<Self> {
        validate_probs(probs)?;
        let n = probs.len();
        let mut pmf = vec![0.0; n + 1];
        pmf[0] = 1.0;
        for (i, &q) in probs.iter().enumerate() {
            let r = 1.0 - q;
            for j in (1..=i + 1).rev() {
                pmf[j] = pmf[j] * r + pmf[j - 1] * q;
            }
            pmf[0] *= r;
        }
        Ok(Self::from_parts(probs.to_vec(), pmf))
    }

    /// `Bin(n, p)` as a Poisson Binomial with `n` equal means.
    pub fn binomial(n: usize, p: f64) -> Result<Self> {
        let law = binomial_law(n, p)?;
        let mut pmf = vec![0.0; n + 1];
        for (j, m) in law.iter() {
            pmf[j] = m;
        }
        Ok(Self::from_parts(vec![p; n], pmf))
    }

    fn from_parts(probs: Vec<f64>, pmf: Vec<f64>) -> Self {
        let cdf = pmf
            .iter()
            .scan(0.0, |acc, &h| {
                *acc += h;
                Some(*acc)
            })
            .collect();
        Self { probs, pmf, cdf }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n(&self) -> usize {
        self.probs.len()
    }

    /// `h_j = P(D = j)` for `j = 0..=n`.
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// `H_j = P(D <= j)` for `j = 0..=n`.
    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// `sum_i q_i`.
    pub fn mean(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn expect<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        self.pmf.iter().enumerate().map(|(j, &h)| h * f(j)).sum()
    }

    /// `P(D >= j)`.
    pub fn at_least(&self, j: usize) -> f64 {
        self.pmf.iter().skip(j).rev().sum()
    }
}

/// Convenience alias for [`PoissonBinomial::new`].
pub fn poisson_binomial(probs: &[f64]) -> Result<PoissonBinomial> {
    PoissonBinomial::new(probs)
}

/// Law of a Poisson Binomial whose means come in groups of equal value,
/// given as `(mean, count)`. Each group is a binomial block.
pub fn grouped_poisson_binomial(groups: &[(f64, usize)]) -> Result<DiscreteLaw> {
    let mut law = DiscreteLaw::point(0);
    for &(q, count) in groups {
        if count == 0 {
            continue;
        }
        law = law.convolve(&binomial_law(count, q)?);
    }
    Ok(law)
}

pub(crate) fn validate_probs(probs: &[f64]) -> Result<()> {
    for (index, &value) in probs.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::ProbabilityOutOfRange { index, value });
        }
    }
    Ok(())
}

/// Which demand statistic a threshold is calibrated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    ExpectedDemand,
    ExpectedUtilization,
    AcceptanceRate,
    StockoutProbability,
}

impl StatisticKind {
    pub const ALL: [StatisticKind; 4] = [
        StatisticKind::ExpectedDemand,
        StatisticKind::ExpectedUtilization,
        StatisticKind::AcceptanceRate,
        StatisticKind::StockoutProbability,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StatisticKind::ExpectedDemand => "expected_demand",
            StatisticKind::ExpectedUtilization => "expected_utilization",
            StatisticKind::AcceptanceRate => "acceptance_rate",
            StatisticKind::StockoutProbability => "stockout_probability",
        }
    }

    /// True when the expectation grows with every eligibility probability.
    pub fn is_increasing(self) -> bool {
        !matches!(self, StatisticKind::AcceptanceRate)
    }
}

impl std::fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StatisticKind::ALL
            .into_iter()
            .find(|kind| kind.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown statistic `{s}`; expected one of expected_demand, \
                     expected_utilization, acceptance_rate, stockout_probability"
                ))
            })
    }
}

/// A demand statistic `E[g(D)]` with its supply `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandStatistic {
    pub kind: StatisticKind,
    pub k: usize,
}

impl DemandStatistic {
    pub fn new(kind: StatisticKind, k: usize) -> Result<Self> {
        check_supply(k)?;
        Ok(Self { kind, k })
    }

    /// The integrand `g(d)`.
    pub fn g(&self, d: usize) -> f64 {
        match self.kind {
            StatisticKind::ExpectedDemand => d as f64,
            StatisticKind::ExpectedUtilization => ut(self.k, d),
            StatisticKind::AcceptanceRate => ar(self.k, d),
            StatisticKind::StockoutProbability => {
                if d >= self.k {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `E[g(D)]` for the statistic's `g`.
pub fn expect_statistic(law: &PoissonBinomial, stat: &DemandStatistic) -> f64 {
    match stat.kind {
        StatisticKind::ExpectedDemand => law.mean(),
        StatisticKind::StockoutProbability => law.at_least(stat.k),
        _ => law.expect(|d| stat.g(d)),
    }
}

/// `E[AR_k(Bin(n, k/n))]` via
/// `P[Bin(n,k/n) < k] + n/(n+1) * P[Bin(n+1,k/n) > k]`.
pub fn binomial_ar_closed(n: usize, k: usize) -> Result<f64> {
    check_supply(k)?;
    if n < k {
        return Err(Error::InvalidArgument(format!(
            "binomial acceptance rate needs n >= k, got n={n}, k={k}"
        )));
    }
    let p = k as f64 / n as f64;
    let below = binomial_law(n, p)?.cdf_below(k);
    let above = binomial_law(n + 1, p)?.sf_above(k);
    Ok(below + n as f64 / (n as f64 + 1.0) * above)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gamma_values() {
        assert!(close(gamma(1).unwrap(), 1.0 - (-1.0f64).exp(), 1e-15));
        assert!(close(gamma(2).unwrap(), 1.0 - 2.0 * (-2.0f64).exp(), 1e-15));
        assert!(gamma(100).unwrap() > 0.96);
        assert_eq!(gamma(0), Err(Error::InvalidSupply(0)));
    }

    #[test]
    fn w_constant_small_k() {
        let e1 = (-1.0f64).exp();
        let w1 = w_constant(1).unwrap();
        assert!(close(w1, e1 / (1.0 - 2.0 * e1), 1e-13));
        assert!(w1 >= 1.0);
        for k in 1..=60 {
            assert!(w_constant(k).unwrap() > 0.0);
        }
    }

    #[test]
    fn ut_and_ar_tables() {
        assert_eq!(ut(3, 0), 0.0);
        assert_eq!(ut(3, 3), 1.0);
        assert_eq!(ut(4, 2), 0.5);
        assert_eq!(ar(1, 0), 1.0);
        assert_eq!(ar(1, 1), 0.5);
        assert!(close(ar(2, 5), 1.0 / 3.0, 1e-15));
    }

    fn enumerate_pmf(q: &[f64]) -> Vec<f64> {
        let n = q.len();
        let mut pmf = vec![0.0; n + 1];
        for mask in 0u32..(1 << n) {
            let mut prob = 1.0;
            for (i, &qi) in q.iter().enumerate() {
                prob *= if mask >> i & 1 == 1 { qi } else { 1.0 - qi };
            }
            pmf[mask.count_ones() as usize] += prob;
        }
        pmf
    }

    #[test]
    fn poisson_binomial_examples() {
        let pb = poisson_binomial(&[0.5, 0.5]).unwrap();
        assert_eq!(pb.pmf(), &[0.25, 0.5, 0.25]);
        let pb = poisson_binomial(&[1.0, 0.3]).unwrap();
        assert_eq!(pb.pmf()[0], 0.0);
        assert!(close(pb.pmf()[1], 0.7, 1e-15));
        assert!(close(pb.pmf()[2], 0.3, 1e-15));
        let q = [0.2, 0.4, 0.6];
        let pb = poisson_binomial(&q).unwrap();
        for (a, b) in pb.pmf().iter().zip(enumerate_pmf(&q)) {
            assert!(close(*a, b, 1e-15));
        }
        assert!(close(*pb.cdf().last().unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn poisson_binomial_rejects_bad_probability() {
        assert_eq!(
            poisson_binomial(&[0.5, 1.5]).unwrap_err(),
            Error::ProbabilityOutOfRange {
                index: 1,
                value: 1.5
            }
        );
        assert!(poisson_binomial(&[-0.1]).is_err());
    }

    #[test]
    fn statistic_expectations_on_two_coins() {
        let pb = poisson_binomial(&[0.5, 0.5]).unwrap();
        let s = |kind| DemandStatistic::new(kind, 1).unwrap();
        assert!(close(
            expect_statistic(&pb, &s(StatisticKind::ExpectedUtilization)),
            0.75,
            1e-15
        ));
        assert!(close(
            expect_statistic(&pb, &s(StatisticKind::AcceptanceRate)),
            0.25 + 0.25 + 0.25 / 3.0,
            1e-15
        ));
        assert!(close(
            expect_statistic(&pb, &s(StatisticKind::ExpectedDemand)),
            1.0,
            1e-15
        ));
        assert!(close(
            expect_statistic(&pb, &s(StatisticKind::StockoutProbability)),
            0.75,
            1e-15
        ));
    }

    #[test]
    fn binomial_law_matches_dp() {
        for &(n, p) in &[(1usize, 0.3), (7, 0.5), (20, 0.05), (40, 0.93)] {
            let law = binomial_law(n, p).unwrap();
            let pb = poisson_binomial(&vec![p; n]).unwrap();
            for j in 0..=n {
                assert!(close(law.prob(j), pb.pmf()[j], 1e-14), "n={n} p={p} j={j}");
            }
        }
    }

    #[test]
    fn grouped_matches_itemwise() {
        let groups = [(0.1, 3), (0.55, 2), (1.0, 1), (0.0, 4)];
        let mut items = Vec::new();
        for &(q, c) in &groups {
            items.extend(std::iter::repeat_n(q, c));
        }
        let law = grouped_poisson_binomial(&groups).unwrap();
        let pb = poisson_binomial(&items).unwrap();
        for j in 0..=items.len() {
            assert!(close(law.prob(j), pb.pmf()[j], 1e-15));
        }
    }

    #[test]
    fn binomial_ar_closed_matches_direct_sum() {
        assert!(close(binomial_ar_closed(1, 1).unwrap(), 0.5, 1e-15));
        for k in 1..=8 {
            assert!(close(
                binomial_ar_closed(k, k).unwrap(),
                k as f64 / (k as f64 + 1.0),
                1e-14
            ));
            for n in k..k + 40 {
                let pb = PoissonBinomial::binomial(n, k as f64 / n as f64).unwrap();
                let stat = DemandStatistic::new(StatisticKind::AcceptanceRate, k).unwrap();
                let direct = expect_statistic(&pb, &stat);
                assert!(close(binomial_ar_closed(n, k).unwrap(), direct, 1e-12));
            }
        }
        assert!(binomial_ar_closed(2, 3).is_err());
    }

    #[test]
    fn binomial_ar_closed_approaches_poisson_limit() {
        let k = 5;
        let pois = poisson_law(k as f64).unwrap();
        let limit = pois.expect(|d| ar(k, d));
        let value = binomial_ar_closed(100_000, k).unwrap();
        assert!(close(value, limit, 2e-4));
        assert!(close(value, gamma(k).unwrap(), 2e-4));
    }

    #[test]
    fn poisson_truncation_is_certified() {
        for &lambda in &[0.5, 1.0, 7.0, 90.0] {
            let law = poisson_law(lambda).unwrap();
            assert!(close(law.total_mass(), 1.0, 1e-13));
            assert!(close(law.mean(), lambda, 1e-11 * lambda.max(1.0)));
        }
        assert_eq!(poisson_law(0.0).unwrap(), DiscreteLaw::point(0));
        assert!(poisson_law(-1.0).is_err());
    }

    #[test]
    fn stockout_target_k1_equals_gamma1() {
        let target = poisson_stockout_target(1).unwrap();
        assert!(close(target, 1.0 - (-1.0f64).exp(), 1e-15));
    }

    #[test]
    fn statistic_kind_parses() {
        for kind in StatisticKind::ALL {
            assert_eq!(kind.name().parse::<StatisticKind>().unwrap(), kind);
        }
        assert!("median".parse::<StatisticKind>().is_err());
    }
}
