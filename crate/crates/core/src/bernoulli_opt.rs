//! Minimizing `E[f(D_p)]` subject to `E[g(D_p)] = phi` over Bernoulli means
//! `p in [0,1]^n`, where `D_p` is the sum of independent Bernoullis.
//!
//! [`phi_structured`] searches only vectors whose entries take values in
//! `{0, p, 1}` for a single common `p`; [`phi_brute`] is the grid oracle it is
//! checked against. The two-variable subproblem that drives the structure
//! result is solved in closed form by [`two_opt_solve`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::probcore::{ar, binomial_ar_closed, binomial_law, ut};

/// Feasibility tolerance for `E[g] = phi` in the structured solver.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

const SCAN_STEP: f64 = 1e-3;

/// Tabulated `f` and `g` on `{0, ..., n}` with constraint target `phi`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernoulliProgram {
    f: Vec<f64>,
    g: Vec<f64>,
    phi: f64,
}

impl BernoulliProgram {
    pub fn new(f: Vec<f64>, g: Vec<f64>, phi: f64) -> Result<Self> {
        if f.len() != g.len() || f.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "f and g need equal length n + 1 >= 2, got {} and {}",
                f.len(),
                g.len()
            )));
        }
        if !f.iter().chain(&g).all(|v| v.is_finite()) || !phi.is_finite() {
            return Err(Error::InvalidArgument("tables and phi must be finite".into()));
        }
        Ok(Self { f, g, phi })
    }

    /// Tabulates `f` and `g` on `{0, ..., n}`.
    pub fn from_fns(n: usize, f: impl Fn(usize) -> f64, g: impl Fn(usize) -> f64, phi: f64) -> Result<Self> {
        Self::new((0..=n).map(&f).collect(), (0..=n).map(&g).collect(), phi)
    }

    pub fn n(&self) -> usize {
        self.f.len() - 1
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn g(&self) -> &[f64] {
        &self.g
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// `(E[f(D_p)], E[g(D_p)])`.
    pub fn evaluate(&self, p: &[f64]) -> (f64, f64) {
        let pmf = small_pmf(p);
        (dot(&self.f, &pmf, 0), dot(&self.g, &pmf, 0))
    }

    /// Largest jump `max_j |f(j+1) - f(j)|`.
    pub fn f_lipschitz(&self) -> f64 {
        max_jump(&self.f)
    }

    pub fn g_lipschitz(&self) -> f64 {
        max_jump(&self.g)
    }
}

fn max_jump(table: &[f64]) -> f64 {
    table
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max)
}

fn small_pmf(p: &[f64]) -> Vec<f64> {
    let mut pmf = vec![0.0; p.len() + 1];
    pmf[0] = 1.0;
    for (i, &q) in p.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            pmf[j] = pmf[j] * (1.0 - q) + pmf[j - 1] * q;
        }
        pmf[0] *= 1.0 - q;
    }
    pmf
}

fn dot(table: &[f64], pmf: &[f64], shift: usize) -> f64 {
    pmf.iter().enumerate().map(|(j, &h)| h * table[j + shift]).sum()
}

/// Grid-search optimum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BruteResult {
    pub value: f64,
    pub argmin: Vec<f64>,
    /// `|E[g] - phi|` at the returned point.
    pub violation: f64,
}

/// Exhaustive search over the grid `{0, step, ..., 1}^n`.
///
/// Since `E[g]` is affine in each coordinate, every grid point also yields a
/// line completion: the last coordinate is solved exactly for `E[g] = phi`.
/// Among candidates with minimal violation (within `1e-12`) the smallest
/// `E[f]` wins. The objective is symmetric in the coordinates, so only
/// nondecreasing prefixes are visited.
pub fn phi_brute(prog: &BernoulliProgram, grid_step: f64) -> Result<BruteResult> {
    let n = prog.n();
    if n > 5 {
        return Err(Error::InvalidArgument(format!(
            "brute force is limited to n <= 5, got n={n}"
        )));
    }
    let cells = (1.0 / grid_step).round();
    if !(grid_step > 0.0 && (cells * grid_step - 1.0).abs() < 1e-9 && (2.0..=100.0).contains(&cells)) {
        return Err(Error::InvalidArgument(format!(
            "grid step must be 1/m for an integer 2 <= m <= 100, got {grid_step}"
        )));
    }
    let cells = cells as usize;
    let grid: Vec<f64> = (0..=cells).map(|i| i as f64 / cells as f64).collect();

    let mut best: Option<BruteResult> = None;
    let mut consider = |violation: f64, value: f64, point: &dyn Fn() -> Vec<f64>| {
        let replace = match &best {
            None => true,
            Some(b) => {
                violation < b.violation - 1e-12
                    || (violation <= b.violation + 1e-12 && value < b.value)
            }
        };
        if replace {
            best = Some(BruteResult {
                value,
                argmin: point(),
                violation,
            });
        }
    };

    let mut prefix = vec![0usize; n - 1];
    loop {
        let head: Vec<f64> = prefix.iter().map(|&i| grid[i]).collect();
        let pmf = small_pmf(&head);
        let (f0, f1) = (dot(&prog.f, &pmf, 0), dot(&prog.f, &pmf, 1));
        let (g0, g1) = (dot(&prog.g, &pmf, 0), dot(&prog.g, &pmf, 1));
        let with_last = |x: f64| {
            let mut p = head.clone();
            p.push(x);
            p
        };
        for &x in &grid {
            let violation = (g0 + x * (g1 - g0) - prog.phi).abs();
            consider(violation, f0 + x * (f1 - f0), &|| with_last(x));
        }
        if (g1 - g0).abs() > 1e-15 {
            let x = (prog.phi - g0) / (g1 - g0);
            if (-1e-12..=1.0 + 1e-12).contains(&x) {
                let x = x.clamp(0.0, 1.0);
                let violation = (g0 + x * (g1 - g0) - prog.phi).abs();
                consider(violation, f0 + x * (f1 - f0), &|| with_last(x));
            }
        }
        if !next_sorted_tuple(&mut prefix, cells) {
            break;
        }
    }
    Ok(best.expect("grid is nonempty"))
}

/// Advances a nondecreasing index tuple; false when exhausted.
fn next_sorted_tuple(idx: &mut [usize], max: usize) -> bool {
    for pos in (0..idx.len()).rev() {
        if idx[pos] < max {
            idx[pos] += 1;
            let v = idx[pos];
            for later in &mut idx[pos + 1..] {
                *later = v;
            }
            return true;
        }
    }
    false
}

/// Slack `n * L_f * step / 2` between the grid optimum and the true optimum,
/// where `L_f` bounds how much `E[f]` moves per unit change of one mean.
pub fn grid_slack(prog: &BernoulliProgram, grid_step: f64) -> f64 {
    prog.n() as f64 * prog.f_lipschitz() * grid_step / 2.0
}

/// Optimum restricted to `a` ones, `j` entries equal to `p` and zeros.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructuredResult {
    pub value: f64,
    pub ones: usize,
    pub at_p: usize,
    pub p: f64,
    pub violation: f64,
}

fn shifted_binomial_expectation(table: &[f64], a: usize, j: usize, p: f64) -> f64 {
    let law = binomial_law(j, p).expect("p in [0, 1]");
    law.iter().map(|(i, m)| m * table[a + i]).sum()
}

/// Roots of `h` on `(0, 1)` to within `tol`: a scan at step `1e-3`, bisection
/// on sign changes, and golden-section refinement of near-tangent minima.
fn roots_in_unit_interval<H: Fn(f64) -> f64>(h: H, tol: f64) -> Vec<f64> {
    let steps = (1.0 / SCAN_STEP).round() as usize;
    let xs: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
    let hs: Vec<f64> = xs.iter().map(|&x| h(x)).collect();
    let mut roots = Vec::new();
    for i in 0..=steps {
        if hs[i].abs() <= tol {
            roots.push(xs[i]);
            continue;
        }
        if i < steps && hs[i + 1].abs() > tol && hs[i].signum() != hs[i + 1].signum() {
            let (mut lo, mut hi) = (xs[i], xs[i + 1]);
            let lo_sign = hs[i].signum();
            let mut best = (f64::INFINITY, lo);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let v = h(mid);
                if v.abs() < best.0 {
                    best = (v.abs(), mid);
                }
                if v.abs() <= tol * 1e-3 || mid <= lo || mid >= hi {
                    break;
                }
                if v.signum() == lo_sign {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            if best.0 <= tol {
                roots.push(best.1);
            }
        }
        // a local minimum of |h| with no sign change may hide a tangent root
        if i > 0
            && i < steps
            && hs[i].abs() < hs[i - 1].abs()
            && hs[i].abs() <= hs[i + 1].abs()
            && hs[i].signum() == hs[i - 1].signum()
            && hs[i].signum() == hs[i + 1].signum()
        {
            let x = golden_min(|x| h(x).abs(), xs[i - 1], xs[i + 1]);
            if h(x).abs() <= tol {
                roots.push(x);
            }
        }
    }
    roots.retain(|&x| x > 1e-12 && x < 1.0 - 1e-12);
    roots
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 {
            break;
        }
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - ratio * (b - a);
        d = a + ratio * (b - a);
    }
    0.5 * (a + b)
}

/// Optimum over vectors with entries in `{0, p, 1}`.
///
/// Enumerates every `(ones, at_p)` split; for each, finds every `p` in
/// `(0, 1)` with `|E[g(ones + Bin(at_p, p))] - phi| <= tol`. Ties go to fewer
/// ones, then fewer entries at `p`.
pub fn phi_structured(prog: &BernoulliProgram, tol: f64) -> Result<StructuredResult> {
    let n = prog.n();
    let mut best: Option<StructuredResult> = None;
    let mut nearest = f64::INFINITY;
    let mut offer = |cand: StructuredResult| {
        if best.is_none_or(|b| cand.value < b.value - 1e-12) {
            best = Some(cand);
        }
    };
    for ones in 0..=n {
        for at_p in 0..=n - ones {
            if at_p == 0 {
                let violation = (prog.g[ones] - prog.phi).abs();
                nearest = nearest.min(violation);
                if violation <= tol {
                    offer(StructuredResult {
                        value: prog.f[ones],
                        ones,
                        at_p,
                        p: 0.0,
                        violation,
                    });
                }
                continue;
            }
            let h = |p: f64| shifted_binomial_expectation(&prog.g, ones, at_p, p) - prog.phi;
            for p in roots_in_unit_interval(h, tol) {
                let violation = h(p).abs();
                nearest = nearest.min(violation);
                offer(StructuredResult {
                    value: shifted_binomial_expectation(&prog.f, ones, at_p, p),
                    ones,
                    at_p,
                    p,
                    violation,
                });
            }
        }
    }
    best.ok_or_else(|| {
        let (lo, hi) = prog
            .g
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        Error::Infeasible(format!(
            "no structure meets E[g] = {} within {tol}; g ranges over [{lo}, {hi}], \
             nearest vertex violation {nearest}",
            prog.phi
        ))
    })
}

fn binomial_expect(n: usize, p: f64, f: impl Fn(usize) -> f64) -> f64 {
    binomial_law(n, p).expect("p in [0, 1]").expect(f)
}

/// Solves `E[UT_k(Bin(n, p))] = phi` for `p` and returns
/// `(E[AR_k(Bin(n, p))], p)`.
pub fn phi_ar_ut(n: usize, k: usize, phi: f64) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::InvalidSupply(k));
    }
    if n <= k {
        return Err(Error::InvalidArgument(format!("need n > k, got n={n}, k={k}")));
    }
    if !(phi > 0.0 && phi <= 1.0) {
        return Err(Error::Unattainable { target: phi, lo: 0.0, hi: 1.0 });
    }
    let utilization = |p: f64| binomial_expect(n, p, |d| ut(k, d));
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if utilization(mid) < phi {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = if (utilization(lo) - phi).abs() <= (utilization(hi) - phi).abs() { lo } else { hi };
    Ok((binomial_expect(n, p, |d| ar(k, d)), p))
}

/// `min_{m in k..=n} E[AR_k(Bin(m, k/m))]` with its minimizing `m`.
pub fn phi_ar_demand(n: usize, k: usize) -> Result<(f64, usize)> {
    if k == 0 {
        return Err(Error::InvalidSupply(k));
    }
    if n < k {
        return Err(Error::InvalidArgument(format!("need n >= k, got n={n}, k={k}")));
    }
    let mut best = (f64::INFINITY, k);
    for m in k..=n {
        let v = binomial_ar_closed(m, k)?;
        if v < best.0 {
            best = (v, m);
        }
    }
    Ok(best)
}

/// `min B0 + B1 (p1 + p2) + B2 p1 p2` s.t. `A0 + A1 (p1 + p2) + A2 p1 p2 = phi`
/// over the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoOptProblem {
    pub a: [f64; 3],
    pub b: [f64; 3],
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TwoOptCase {
    /// Constraint vacuous.
    Case1a,
    /// Constraint linear in `p1 + p2`.
    Case1b,
    /// Quadratic constraint forcing a shifted coordinate to zero.
    Case2a,
    /// General quadratic constraint.
    Case2b,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoOptSolution {
    pub value: f64,
    pub p: (f64, f64),
    pub case: TwoOptCase,
}

impl TwoOptProblem {
    pub fn objective(&self, p1: f64, p2: f64) -> f64 {
        self.b[0] + self.b[1] * (p1 + p2) + self.b[2] * p1 * p2
    }

    pub fn constraint(&self, p1: f64, p2: f64) -> f64 {
        self.a[0] + self.a[1] * (p1 + p2) + self.a[2] * p1 * p2
    }

    /// Range of the constraint function; bilinear, so attained at corners.
    pub fn constraint_range(&self) -> (f64, f64) {
        let corners = [self.constraint(0.0, 0.0), self.constraint(1.0, 0.0), self.constraint(1.0, 1.0)];
        corners
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

const TWO_OPT_EPS: f64 = 1e-12;

/// Global minimum by the case analysis on the constraint's shape.
pub fn two_opt_solve(prob: &TwoOptProblem) -> Result<TwoOptSolution> {
    let (lo, hi) = prob.constraint_range();
    let infeasible = || {
        Error::Infeasible(format!(
            "constraint target {} outside attainable range [{lo}, {hi}]",
            prob.phi
        ))
    };
    if prob.phi < lo - 1e-9 || prob.phi > hi + 1e-9 {
        return Err(infeasible());
    }
    let [a0, a1, a2] = prob.a;
    let in_unit = |x: f64| (-TWO_OPT_EPS..=1.0 + TWO_OPT_EPS).contains(&x);
    let pick = |cands: &[(f64, f64)], case| {
        cands
            .iter()
            .map(|&(x, y)| (x.clamp(0.0, 1.0), y.clamp(0.0, 1.0)))
            .map(|(x, y)| TwoOptSolution { value: prob.objective(x, y), p: (x, y), case })
            .fold(None, |best: Option<TwoOptSolution>, s| match best {
                Some(b) if b.value <= s.value + 1e-15 => Some(b),
                _ => Some(s),
            })
    };

    if a2.abs() <= TWO_OPT_EPS {
        if a1.abs() <= TWO_OPT_EPS {
            // objective is bilinear, so its minimum over the square is at a corner
            let corners = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)];
            return pick(&corners, TwoOptCase::Case1a).ok_or_else(infeasible);
        }
        let sum = (prob.phi - a0) / a1;
        if !(-TWO_OPT_EPS..=2.0 + TWO_OPT_EPS).contains(&sum) {
            return Err(infeasible());
        }
        let sum = sum.clamp(0.0, 2.0);
        let b2 = prob.b[2];
        let point = if b2 > 0.0 {
            let p1 = (sum - 1.0).max(0.0);
            (p1, sum - p1)
        } else {
            (sum / 2.0, sum / 2.0)
        };
        return pick(&[point], TwoOptCase::Case1b).ok_or_else(infeasible);
    }

    // shift q_i = p_i + r turns the constraint into q1 q2 = gamma
    let r = a1 / a2;
    let gamma = (prob.phi - a0) / a2 + r * r;
    if gamma.abs() <= TWO_OPT_EPS {
        let p1 = -r;
        if !in_unit(p1) {
            return Err(infeasible());
        }
        let slope = prob.b[1] + prob.b[2] * p1;
        let p2 = if slope < 0.0 { 1.0 } else { 0.0 };
        return pick(&[(p1, p2)], TwoOptCase::Case2a).ok_or_else(infeasible);
    }
    let mut q_cands = vec![r, r + 1.0];
    if r.abs() > TWO_OPT_EPS {
        q_cands.push(gamma / r);
    }
    if (r + 1.0).abs() > TWO_OPT_EPS {
        q_cands.push(gamma / (r + 1.0));
    }
    if gamma > 0.0 {
        q_cands.push(gamma.sqrt());
        q_cands.push(-gamma.sqrt());
    }
    let points: Vec<(f64, f64)> = q_cands
        .into_iter()
        .filter(|q1| q1.abs() > TWO_OPT_EPS)
        .map(|q1| (q1 - r, gamma / q1 - r))
        .filter(|&(p1, p2)| in_unit(p1) && in_unit(p2))
        .collect();
    pick(&points, TwoOptCase::Case2b).ok_or_else(infeasible)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probcore::gamma;

    fn ar_ut_program(n: usize, k: usize, phi: f64) -> BernoulliProgram {
        BernoulliProgram::from_fns(n, |d| ar(k, d), |d| ut(k, d), phi).unwrap()
    }

    #[test]
    fn brute_examples() {
        let prog = ar_ut_program(2, 1, 1.0);
        let r = phi_brute(&prog, 0.05).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.argmin, vec![1.0, 1.0]);

        // one coordinate: the constraint pins p, the objective follows
        let prog = BernoulliProgram::new(vec![0.3, -0.7], vec![0.0, 2.0], 0.8).unwrap();
        let r = phi_brute(&prog, 0.02).unwrap();
        assert!((r.argmin[0] - 0.4).abs() < 1e-12);
        assert!((r.value - (0.3 - 0.4)).abs() < 1e-12);
        assert!(r.violation < 1e-12);

        assert!(phi_brute(&ar_ut_program(6, 1, 0.5), 0.05).is_err());
        assert!(phi_brute(&ar_ut_program(2, 1, 0.5), 0.3).is_err());
    }

    #[test]
    fn structured_examples() {
        let prog = ar_ut_program(2, 1, 1.0);
        let r = phi_structured(&prog, FEASIBILITY_TOLERANCE).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!((r.ones, r.at_p), (2, 0));

        let prog = ar_ut_program(3, 2, 0.5);
        let s = phi_structured(&prog, FEASIBILITY_TOLERANCE).unwrap();
        let b = phi_brute(&prog, 0.01).unwrap();
        assert!(b.value >= s.value - 1e-9);
        assert!(b.value <= s.value + grid_slack(&prog, 0.01));
    }

    #[test]
    fn structured_reports_infeasibility() {
        let prog = BernoulliProgram::new(vec![0.0, 1.0], vec![0.0, 1.0], 2.0).unwrap();
        assert!(matches!(
            phi_structured(&prog, FEASIBILITY_TOLERANCE),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn structured_finds_equal_means_for_ar_ut() {
        for k in 1..=3 {
            let n = 8;
            let prog = ar_ut_program(n, k, gamma(k).unwrap());
            let s = phi_structured(&prog, FEASIBILITY_TOLERANCE).unwrap();
            let (all_equal, _) = phi_ar_ut(n, k, gamma(k).unwrap()).unwrap();
            assert!((s.value - all_equal).abs() < 1e-8, "k={k}: {} vs {all_equal}", s.value);
        }
    }

    #[test]
    fn structured_ar_demand_matches_binomial_minimum() {
        for k in 1..=3 {
            let n = 9;
            let prog = BernoulliProgram::from_fns(n, |d| ar(k, d), |d| d as f64, k as f64).unwrap();
            let s = phi_structured(&prog, FEASIBILITY_TOLERANCE).unwrap();
            let (best, _) = phi_ar_demand(n, k).unwrap();
            assert!((s.value - best).abs() < 1e-8, "k={k}: {} vs {best}", s.value);
        }
    }

    #[test]
    fn ar_ut_examples() {
        let (value, p) = phi_ar_ut(2, 1, 0.75).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        assert!((value - (0.25 + 0.25 + 0.25 / 3.0)).abs() < 1e-12);

        let g1 = gamma(1).unwrap();
        let (value, p) = phi_ar_ut(10_000, 1, g1).unwrap();
        assert!((value - g1).abs() < 5e-4);
        assert!(p <= 1.0 / 10_000.0);
        assert!(phi_ar_ut(3, 3, 0.5).is_err());
        assert!(phi_ar_ut(5, 1, 1.5).is_err());
    }

    #[test]
    fn ar_demand_examples() {
        for k in 1..=5 {
            let (v, m) = phi_ar_demand(k, k).unwrap();
            assert!((v - k as f64 / (k as f64 + 1.0)).abs() < 1e-14);
            assert_eq!(m, k);
        }
        let (v, m) = phi_ar_demand(10_000, 2).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-14);
        assert_eq!(m, 2);
    }

    #[test]
    fn two_opt_examples() {
        let s = two_opt_solve(&TwoOptProblem { a: [0.0, 1.0, 0.0], b: [0.0, 0.0, -1.0], phi: 1.0 }).unwrap();
        assert_eq!(s.p, (0.5, 0.5));
        assert!((s.value + 0.25).abs() < 1e-15);
        assert_eq!(s.case, TwoOptCase::Case1b);

        let s = two_opt_solve(&TwoOptProblem { a: [0.0, 1.0, 0.0], b: [0.0, 0.0, 1.0], phi: 1.0 }).unwrap();
        assert!(s.p == (0.0, 1.0) || s.p == (1.0, 0.0));
        assert_eq!(s.value, 0.0);

        let s = two_opt_solve(&TwoOptProblem { a: [0.0, 0.0, 0.0], b: [0.0, 1.0, 0.0], phi: 0.0 }).unwrap();
        assert_eq!((s.p, s.value, s.case), ((0.0, 0.0), 0.0, TwoOptCase::Case1a));

        let err = two_opt_solve(&TwoOptProblem { a: [0.0, 1.0, 0.0], b: [0.0, 0.0, 1.0], phi: 3.0 });
        assert!(matches!(err, Err(Error::Infeasible(_))));
    }

    #[test]
    fn two_opt_quadratic_cases() {
        // p1 p2 = 0.25 with objective p1 + p2: symmetric interior optimum
        let s = two_opt_solve(&TwoOptProblem { a: [0.0, 0.0, 1.0], b: [0.0, 1.0, 0.0], phi: 0.25 }).unwrap();
        assert_eq!(s.case, TwoOptCase::Case2b);
        assert!((s.p.0 - 0.5).abs() < 1e-12 && (s.p.1 - 0.5).abs() < 1e-12);
        assert!((s.value - 1.0).abs() < 1e-12);

        // (p1 - 0.5)(p2 - 0.5) = 0 forces one coordinate to 0.5
        let s = two_opt_solve(&TwoOptProblem { a: [0.25, -0.5, 1.0], b: [0.0, 1.0, 0.0], phi: 0.0 }).unwrap();
        assert_eq!(s.case, TwoOptCase::Case2a);
        assert!((s.value - 0.5).abs() < 1e-12);
    }
}
