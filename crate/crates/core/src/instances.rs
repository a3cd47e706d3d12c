//! Problem instances: independent discrete value distributions, the
//! `(t, p)` threshold policy, eligibility at a threshold, the two worst-case
//! families, seeded random instances and the JSON instance file format.
//!
//! A scored-type model (applicants described by observable types mapped to
//! a real score) is handled by using the score as the value here: the
//! threshold policy only ever compares against `t`.

use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probcore::w_constant;

const MASS_TOLERANCE: f64 = 1e-12;

/// One atom of a discrete distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub value: f64,
    pub mass: f64,
}

/// A discrete distribution with strictly increasing atom values.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueDistribution {
    atoms: Vec<Atom>,
}

impl ValueDistribution {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        for (i, a) in atoms.iter().enumerate() {
            if !a.value.is_finite() || a.value < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "atom {i}: value {} must be finite and nonnegative",
                    a.value
                )));
            }
            if !a.mass.is_finite() || a.mass <= 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "atom {i}: mass {} must be positive",
                    a.mass
                )));
            }
            if i > 0 && atoms[i - 1].value >= a.value {
                return Err(Error::InvalidDistribution(format!(
                    "atom {i}: values must be strictly increasing ({} then {})",
                    atoms[i - 1].value,
                    a.value
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.mass).sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "masses sum to {total}, expected 1"
            )));
        }
        Ok(Self { atoms })
    }

    /// Builds from `(value, mass)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(value, mass)| Atom { value, mass })
                .collect(),
        )
    }

    pub fn point(value: f64) -> Result<Self> {
        Self::from_pairs(&[(value, 1.0)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.value * a.mass).sum()
    }

    pub fn max_value(&self) -> f64 {
        self.atoms.last().map(|a| a.value).unwrap_or(0.0)
    }

    /// `(P(V > t) + p P(V = t), E[V 1(V > t)] + p t P(V = t))`.
    pub fn eligibility_at(&self, t: f64, p: f64) -> (f64, f64) {
        let mut q = 0.0;
        let mut m = 0.0;
        for a in &self.atoms {
            if a.value > t {
                q += a.mass;
                m += a.value * a.mass;
            } else if a.value == t {
                q += p * a.mass;
                m += p * a.value * a.mass;
            }
        }
        (q.min(1.0), m)
    }

    /// `E[max(V - t, 0)]`.
    pub fn surplus(&self, t: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.value > t)
            .map(|a| (a.value - t) * a.mass)
            .sum()
    }

    /// Atom index for a uniform draw `u` in `[0, 1)`.
    pub fn sample_index(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, a) in self.atoms.iter().enumerate() {
            acc += a.mass;
            if u < acc {
                return i;
            }
        }
        self.atoms.len() - 1
    }
}

/// Supply `k` and one value distribution per applicant.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    k: usize,
    dists: Vec<ValueDistribution>,
}

impl Instance {
    pub fn new(k: usize, dists: Vec<ValueDistribution>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidSupply(k));
        }
        if dists.is_empty() {
            return Err(Error::InvalidArgument(
                "an instance needs at least one applicant".into(),
            ));
        }
        Ok(Self { k, dists })
    }

    /// `n` copies of the same distribution.
    pub fn iid(k: usize, n: usize, dist: ValueDistribution) -> Result<Self> {
        Self::new(k, vec![dist; n])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.dists.len()
    }

    pub fn dists(&self) -> &[ValueDistribution] {
        &self.dists
    }

    pub fn is_iid(&self) -> bool {
        self.dists.windows(2).all(|w| w[0] == w[1])
    }

    /// Distinct atom values over all applicants, largest first.
    pub fn distinct_values_desc(&self) -> Vec<f64> {
        let mut values: Vec<f64> = self
            .dists
            .iter()
            .flat_map(|d| d.atoms.iter().map(|a| a.value))
            .collect();
        values.sort_by(|a, b| b.total_cmp(a));
        values.dedup();
        values
    }

    /// Number of joint outcomes, as a float to avoid overflow.
    pub fn joint_outcomes(&self) -> f64 {
        self.dists.iter().map(|d| d.atoms.len() as f64).product()
    }
}

/// Accept values above `t`; accept values equal to `t` with probability `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub t: f64,
    pub p: f64,
}

impl ThresholdPolicy {
    pub fn new(t: f64, p: f64) -> Result<Self> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "threshold must be finite and nonnegative, got {t}"
            )));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "tie-break probability must lie in [0, 1], got {p}"
            )));
        }
        Ok(Self { t, p })
    }
}

/// Per-applicant eligibility probability `q_i` and eligible value mass `m_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EligibilitySummary {
    pub q: Vec<f64>,
    pub m: Vec<f64>,
}

pub fn eligibility(inst: &Instance, pol: &ThresholdPolicy) -> EligibilitySummary {
    let (q, m) = inst
        .dists
        .iter()
        .map(|d| d.eligibility_at(pol.t, pol.p))
        .unzip();
    EligibilitySummary { q, m }
}

/// `U(t, F) = sum_i E[max(V_i - t, 0)]`.
pub fn surplus_mass(inst: &Instance, t: f64) -> f64 {
    inst.dists.iter().map(|d| d.surplus(t)).sum()
}

/// IID instance where each value is `n W_k` with mass `1/n²` and `1` otherwise.
pub fn example_hard_iid(k: usize, n: usize) -> Result<Instance> {
    if n < k {
        return Err(Error::InvalidArgument(format!(
            "hard instance needs n >= k, got n={n}, k={k}"
        )));
    }
    let rare = 1.0 / (n as f64 * n as f64);
    let high = n as f64 * w_constant(k)?;
    let dist = ValueDistribution::from_pairs(&[(1.0, 1.0 - rare), (high, rare)])?;
    Instance::iid(k, n, dist)
}

/// `k` near-certain unit values plus one rare value `1/eps²` with mass `eps`.
pub fn example_demand_bad(k: usize, eps: f64) -> Result<Instance> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidSupply(k));
    }
    let low = eps / k as f64;
    let common = ValueDistribution::from_pairs(&[(0.0, low), (1.0, 1.0 - low)])?;
    let rare = ValueDistribution::from_pairs(&[(0.0, 1.0 - eps), (1.0 / (eps * eps), eps)])?;
    let mut dists = vec![common; k];
    dists.push(rare);
    Instance::new(k, dists)
}

/// Reproducible random instance. Values are drawn without replacement from
/// the grid `{0.5, 1.0, ..., 10.0}` so that applicants share atoms often.
pub fn random_instance(seed: u64, n_max: usize, atoms_max: usize, k_max: usize) -> Result<Instance> {
    if n_max == 0 || atoms_max == 0 || k_max == 0 {
        return Err(Error::InvalidArgument(
            "random instance bounds must be at least 1".into(),
        ));
    }
    const GRID: usize = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=n_max);
    let k = rng.gen_range(1..=k_max.min(n));
    let mut dists = Vec::with_capacity(n);
    for _ in 0..n {
        let count = rng.gen_range(1..=atoms_max.min(GRID));
        let mut slots = sample(&mut rng, GRID, count).into_vec();
        slots.sort_unstable();
        let weights: Vec<f64> = (0..count).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let atoms = slots
            .iter()
            .zip(&weights)
            .map(|(&s, &w)| Atom {
                value: 0.5 * (s + 1) as f64,
                mass: w / total,
            })
            .collect();
        dists.push(ValueDistribution::new(atoms)?);
    }
    Instance::new(k, dists)
}

#[derive(Serialize, Deserialize)]
struct AtomFile {
    value: String,
    mass: String,
}

#[derive(Serialize, Deserialize)]
struct ApplicantFile {
    atoms: Vec<AtomFile>,
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    k: usize,
    applicants: Vec<ApplicantFile>,
}

fn parse_decimal(text: &str, field: String) -> Result<f64> {
    let value: f64 = text.trim().parse().map_err(|_| Error::Parse {
        field: field.clone(),
        message: format!("`{text}` is not a decimal number"),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            field,
            message: format!("`{text}` is not finite"),
        });
    }
    Ok(value)
}

/// Parses the JSON instance format. Values and masses are decimal strings.
pub fn instance_from_json(text: &str) -> Result<Instance> {
    let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        field: "document".into(),
        message: e.to_string(),
    })?;
    let mut dists = Vec::with_capacity(file.applicants.len());
    for (i, applicant) in file.applicants.iter().enumerate() {
        let mut atoms = Vec::with_capacity(applicant.atoms.len());
        for (j, atom) in applicant.atoms.iter().enumerate() {
            let value = parse_decimal(&atom.value, format!("applicants[{i}].atoms[{j}].value"))?;
            let mass = parse_decimal(&atom.mass, format!("applicants[{i}].atoms[{j}].mass"))?;
            atoms.push(Atom { value, mass });
        }
        let dist = ValueDistribution::new(atoms).map_err(|e| match e {
            Error::InvalidDistribution(msg) => {
                Error::InvalidDistribution(format!("applicants[{i}]: {msg}"))
            }
            other => other,
        })?;
        dists.push(dist);
    }
    Instance::new(file.k, dists)
}

/// Serializes to the JSON instance format. `f64` display is the shortest
/// string that parses back to the same bits, so round trips are exact.
pub fn instance_to_json(inst: &Instance) -> String {
    let file = InstanceFile {
        k: inst.k,
        applicants: inst
            .dists
            .iter()
            .map(|d| ApplicantFile {
                atoms: d
                    .atoms
                    .iter()
                    .map(|a| AtomFile {
                        value: a.value.to_string(),
                        mass: a.mass.to_string(),
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("instance file serializes")
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let text = std::fs::read_to_string(path)?;
    instance_from_json(&text)
}

pub fn save_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, instance_to_json(inst))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn eligibility_examples() {
        let inst = Instance::new(1, vec![ValueDistribution::point(1.0).unwrap()]).unwrap();
        let e = eligibility(&inst, &ThresholdPolicy::new(1.0, 0.5).unwrap());
        assert_eq!((e.q[0], e.m[0]), (0.5, 0.5));

        let dist = ValueDistribution::from_pairs(&[(1.0, 0.9), (4.0, 0.1)]).unwrap();
        let inst = Instance::new(1, vec![dist]).unwrap();
        let e = eligibility(&inst, &ThresholdPolicy::new(1.0, 0.0).unwrap());
        assert!(close(e.q[0], 0.1, 1e-15) && close(e.m[0], 0.4, 1e-15));

        let e = eligibility(&inst, &ThresholdPolicy::new(4.5, 0.7).unwrap());
        assert_eq!((e.q[0], e.m[0]), (0.0, 0.0));
    }

    #[test]
    fn surplus_examples() {
        let inst = Instance::new(1, vec![ValueDistribution::point(5.0).unwrap()]).unwrap();
        assert_eq!(surplus_mass(&inst, 2.0), 3.0);
        assert_eq!(surplus_mass(&inst, 5.0), 0.0);
        let d = ValueDistribution::from_pairs(&[(1.0, 0.5), (3.0, 0.5)]).unwrap();
        let inst = Instance::iid(1, 2, d).unwrap();
        assert!(close(surplus_mass(&inst, 1.0), 2.0, 1e-15));
    }

    #[test]
    fn hard_instance_shape() {
        let inst = example_hard_iid(1, 10).unwrap();
        assert!(inst.is_iid());
        assert_eq!(inst.n(), 10);
        let atoms = inst.dists()[0].atoms();
        assert_eq!(atoms.len(), 2);
        assert!(close(atoms[0].mass, 0.99, 1e-15));
        assert!(close(atoms[1].value, 10.0 * w_constant(1).unwrap(), 1e-12));

        let inst = example_hard_iid(2, 100).unwrap();
        let atoms = inst.dists()[0].atoms();
        assert!(close(atoms[1].value, 100.0 * w_constant(2).unwrap(), 1e-10));
        assert!(close(atoms[1].mass, 1e-4, 1e-18));
        assert!(example_hard_iid(3, 2).is_err());
    }

    #[test]
    fn demand_bad_shape() {
        let inst = example_demand_bad(1, 0.5).unwrap();
        assert_eq!(inst.n(), 2);
        assert_eq!(
            inst.dists()[0],
            ValueDistribution::from_pairs(&[(0.0, 0.5), (1.0, 0.5)]).unwrap()
        );
        assert_eq!(
            inst.dists()[1],
            ValueDistribution::from_pairs(&[(0.0, 0.5), (4.0, 0.5)]).unwrap()
        );
        for k in 1..6 {
            let inst = example_demand_bad(k, 0.01).unwrap();
            assert_eq!(inst.n(), k + 1);
            let e = eligibility(&inst, &ThresholdPolicy::new(0.0, 0.0).unwrap());
            assert!(close(e.q.iter().sum::<f64>(), k as f64, 1e-12));
        }
        assert!(example_demand_bad(2, 1.0).is_err());
    }

    #[test]
    fn random_instances_are_reproducible_and_valid() {
        assert_eq!(
            random_instance(7, 8, 4, 4).unwrap(),
            random_instance(7, 8, 4, 4).unwrap()
        );
        let inst = random_instance(1, 8, 4, 4).unwrap();
        assert!(inst.n() <= 8 && inst.k() <= inst.n().min(4));
        for seed in 0..200 {
            let inst = random_instance(seed, 8, 4, 4).unwrap();
            for d in inst.dists() {
                // revalidate through the checked constructor
                ValueDistribution::new(d.atoms().to_vec()).unwrap();
                assert!(d.atoms().len() <= 4);
            }
        }
    }

    #[test]
    fn distribution_validation() {
        assert!(ValueDistribution::from_pairs(&[(1.0, 0.5), (0.5, 0.5)]).is_err());
        assert!(ValueDistribution::from_pairs(&[(1.0, -0.5), (2.0, 1.5)]).is_err());
        assert!(ValueDistribution::from_pairs(&[(1.0, 0.5), (2.0, 0.4)]).is_err());
        assert!(ValueDistribution::from_pairs(&[(-1.0, 1.0)]).is_err());
        assert!(ValueDistribution::from_pairs(&[(f64::NAN, 1.0)]).is_err());
        assert!(ValueDistribution::new(vec![]).is_err());
    }

    #[test]
    fn json_round_trip_and_errors() {
        let inst = random_instance(11, 8, 4, 4).unwrap();
        assert_eq!(instance_from_json(&instance_to_json(&inst)).unwrap(), inst);

        let bad_mass = r#"{"k":1,"applicants":[{"atoms":[{"value":"1","mass":"-0.5"},{"value":"2","mass":"1.5"}]}]}"#;
        assert!(matches!(
            instance_from_json(bad_mass),
            Err(Error::InvalidDistribution(_))
        ));
        let unsorted = r#"{"k":1,"applicants":[{"atoms":[{"value":"2","mass":"0.5"},{"value":"1","mass":"0.5"}]}]}"#;
        assert!(matches!(
            instance_from_json(unsorted),
            Err(Error::InvalidDistribution(_))
        ));
        let garbled = r#"{"k":1,"applicants":[{"atoms":[{"value":"abc","mass":"1"}]}]}"#;
        match instance_from_json(garbled) {
            Err(Error::Parse { field, .. }) => assert_eq!(field, "applicants[0].atoms[0].value"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            instance_from_json("{\"k\": 1}"),
            Err(Error::Parse { .. })
        ));
    }
}
