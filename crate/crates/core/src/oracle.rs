//! Exact joint laws of small binary urn models in big-rational arithmetic,
//! and exact checks of the c.i.d. and exchangeability properties.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::processes::{PolyaUrnSpec, Reinforcement};
use crate::sampling::ScalarDist;

/// Largest depth accepted by [`enumerate_polya_joint`].
pub const MAX_DEPTH: usize = 12;
/// Largest depth accepted by [`check_permuted_cid`].
pub const MAX_PERMUTED_DEPTH: usize = 10;

/// Exact law of `(X_1, …, X_n) ∈ {0,1}^n`. Atom `a` encodes
/// `x_i = (a >> (i-1)) & 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactJointLaw {
    n: usize,
    pmf: Vec<BigRational>,
}

pub fn bits_of(atom: usize, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((atom >> i) & 1) as u8).collect()
}

pub fn atom_of(bits: &[u8]) -> usize {
    bits.iter()
        .enumerate()
        .fold(0, |a, (i, b)| a | ((*b as usize & 1) << i))
}

impl ExactJointLaw {
    /// Validates nonnegativity and total mass one.
    pub fn from_pmf(n: usize, pmf: Vec<BigRational>) -> Result<Self> {
        if pmf.len() != 1 << n {
            return Err(Error::Law(format!(
                "pmf of depth {n} needs {} atoms",
                1usize << n
            )));
        }
        if pmf.iter().any(Signed::is_negative) {
            return Err(Error::Law("negative probability".into()));
        }
        let total: BigRational = pmf.iter().sum();
        if !total.is_one() {
            return Err(Error::Law(format!("probabilities sum to {total}")));
        }
        Ok(Self { n, pmf })
    }

    /// `n` i.i.d. Bernoulli(`p`) coordinates.
    pub fn product(p: &BigRational, n: usize) -> Self {
        let q = BigRational::one() - p;
        let pmf = (0..1usize << n)
            .map(|a| {
                let ones = a.count_ones() as usize;
                pow(p, ones) * pow(&q, n - ones)
            })
            .collect();
        Self { n, pmf }
    }

    pub fn depth(&self) -> usize {
        self.n
    }

    pub fn prob(&self, bits: &[u8]) -> &BigRational {
        &self.pmf[atom_of(bits)]
    }

    pub fn pmf(&self) -> &[BigRational] {
        &self.pmf
    }

    pub fn total(&self) -> BigRational {
        self.pmf.iter().sum()
    }
}

fn pow(x: &BigRational, k: usize) -> BigRational {
    (0..k).fold(BigRational::one(), |acc, _| acc * x)
}

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Possible reinforcements at step `k` with their exact probabilities.
fn reinforcement_options(
    r: &Reinforcement,
    k: usize,
    prev: Option<bool>,
) -> Result<Vec<(u64, BigRational)>> {
    if let Some(d) = r.deterministic_at(k, prev) {
        return Ok(vec![(d, BigRational::one())]);
    }
    match r {
        Reinforcement::Iid {
            dist: ScalarDist::Discrete { weights },
        } => {
            let exact: Vec<BigRational> = weights
                .iter()
                .map(|w| {
                    BigRational::from_float(*w)
                        .ok_or_else(|| Error::Parameter(format!("weight {w}")))
                })
                .collect::<Result<_>>()?;
            let total: BigRational = exact.iter().sum();
            Ok(exact
                .into_iter()
                .enumerate()
                .filter(|(_, w)| !w.is_zero())
                .map(|(d, w)| (d as u64, w / &total))
                .collect())
        }
        _ => Err(Error::Unsupported(
            "exact enumeration needs finitely supported reinforcement".into(),
        )),
    }
}

/// Exact joint law of the first `n` draws of the urn.
pub fn enumerate_polya_joint(spec: &PolyaUrnSpec, n: usize) -> Result<ExactJointLaw> {
    spec.validate()?;
    if n > MAX_DEPTH {
        return Err(Error::Size(format!("depth {n} exceeds {MAX_DEPTH}")));
    }
    // (prefix atom, white, total) -> probability; the map keeps the
    // reduction order independent of insertion order.
    let mut states: BTreeMap<(usize, u64, u64), BigRational> = BTreeMap::new();
    states.insert((0, spec.white, spec.white + spec.red), BigRational::one());
    for k in 1..=n {
        let mut next: BTreeMap<(usize, u64, u64), BigRational> = BTreeMap::new();
        for ((prefix, white, total), weight) in states {
            let prev = (k > 1).then(|| (prefix >> (k - 2)) & 1 == 1);
            for (d, pd) in reinforcement_options(&spec.reinforcement, k, prev)? {
                let w = &weight * &pd;
                let p_white = ratio(white, total);
                let p_red = BigRational::one() - &p_white;
                *next
                    .entry((prefix | 1 << (k - 1), white + d, total + d))
                    .or_insert_with(BigRational::zero) += &w * p_white;
                *next
                    .entry((prefix, white, total + d))
                    .or_insert_with(BigRational::zero) += w * p_red;
            }
        }
        states = next;
    }
    let mut pmf = vec![BigRational::zero(); 1 << n];
    for ((prefix, _, _), w) in states {
        pmf[prefix] += w;
    }
    Ok(ExactJointLaw { n, pmf })
}

/// Exact law of `(X_{i_1}, …, X_{i_m})` for 1-based `indices`.
pub fn marginal_law(joint: &ExactJointLaw, indices: &[usize]) -> Result<ExactJointLaw> {
    let mut seen = vec![false; joint.n + 1];
    for &i in indices {
        if i == 0 || i > joint.n {
            return Err(Error::Index(format!("index {i} outside 1..={}", joint.n)));
        }
        if seen[i] {
            return Err(Error::Index(format!("index {i} repeated")));
        }
        seen[i] = true;
    }
    let mut pmf = vec![BigRational::zero(); 1 << indices.len()];
    for (a, p) in joint.pmf.iter().enumerate() {
        let b = indices
            .iter()
            .enumerate()
            .fold(0, |acc, (j, &i)| acc | (((a >> (i - 1)) & 1) << j));
        pmf[b] += p;
    }
    Ok(ExactJointLaw {
        n: indices.len(),
        pmf,
    })
}

/// Outcome of an exact check, with the first violation found.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub violated: bool,
    /// Prefix length `n` of the failing comparison.
    pub n: Option<usize>,
    pub atom: Option<Vec<u8>>,
    #[serde(serialize_with = "ser_opt_rational")]
    pub lhs: Option<BigRational>,
    #[serde(serialize_with = "ser_opt_rational")]
    pub rhs: Option<BigRational>,
    /// For exchangeability: the atom compared against, as a permutation image.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub permutation: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_atom: Option<Vec<u8>>,
}

impl Certificate {
    fn pass() -> Self {
        Self {
            violated: false,
            n: None,
            atom: None,
            lhs: None,
            rhs: None,
            permutation: None,
            reference_atom: None,
        }
    }

    pub fn holds(&self) -> bool {
        !self.violated
    }
}

/// Serializes a rational as `{"num": .., "den": ..}`, falling back to decimal
/// strings when a component does not fit in `i64`.
pub struct RationalJson<'a>(pub &'a BigRational);

impl Serialize for RationalJson<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Rational", 2)?;
        match (self.0.numer().to_i64(), self.0.denom().to_i64()) {
            (Some(n), Some(d)) => {
                st.serialize_field("num", &n)?;
                st.serialize_field("den", &d)?;
            }
            _ => {
                st.serialize_field("num", &self.0.numer().to_string())?;
                st.serialize_field("den", &self.0.denom().to_string())?;
            }
        }
        st.end()
    }
}

fn ser_opt_rational<S: Serializer>(
    v: &Option<BigRational>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(r) => RationalJson(r).serialize(s),
        None => s.serialize_none(),
    }
}

/// Compares `(X_1..X_n, X_{n+2})` with `(X_1..X_n, X_{n+1})` exactly for
/// every `n` with `n + 2 <= depth`.
pub fn check_cid_predictive_law(joint: &ExactJointLaw) -> Certificate {
    (0..joint.n.saturating_sub(1))
        .find_map(|n| compare_predictive(joint, n))
        .unwrap_or_else(Certificate::pass)
}

fn compare_predictive(joint: &ExactJointLaw, n: usize) -> Option<Certificate> {
    let head: Vec<usize> = (1..=n).collect();
    let skip: Vec<usize> = head.iter().copied().chain([n + 2]).collect();
    let next: Vec<usize> = head.iter().copied().chain([n + 1]).collect();
    let lhs = marginal_law(joint, &skip).expect("indices within depth");
    let rhs = marginal_law(joint, &next).expect("indices within depth");
    for a in 0..lhs.pmf.len() {
        if lhs.pmf[a] != rhs.pmf[a] {
            return Some(Certificate {
                violated: true,
                n: Some(n),
                atom: Some(bits_of(a, n + 1)),
                lhs: Some(lhs.pmf[a].clone()),
                rhs: Some(rhs.pmf[a].clone()),
                permutation: None,
                reference_atom: None,
            });
        }
    }
    None
}

/// Exact check of condition (X_1..X_n, X_{n+2}) ~ (X_1..X_n, X_{n+1}) for
/// all `n < n_max`.
pub fn check_cid_predictive(spec: &PolyaUrnSpec, n_max: usize) -> Result<Certificate> {
    if n_max + 2 > MAX_DEPTH {
        return Err(Error::Size(format!(
            "need n_max + 2 <= {MAX_DEPTH}, got n_max = {n_max}"
        )));
    }
    Ok(check_cid_predictive_law(&enumerate_polya_joint(
        spec,
        n_max + 1,
    )?))
}

/// Atoms with `ones` ones in lexicographic order, ones first.
fn class_atoms(n: usize, ones: usize) -> Vec<Vec<u8>> {
    fn rec(n: usize, ones: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if prefix.len() == n {
            if ones == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        let left = n - prefix.len();
        if ones > 0 {
            prefix.push(1);
            rec(n, ones - 1, prefix, out);
            prefix.pop();
        }
        if left > ones {
            prefix.push(0);
            rec(n, ones, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, ones, &mut Vec::new(), &mut out);
    out
}

/// A permutation `π` (1-based) with `reference[i] = atom[π(i)]`.
fn permutation_between(atom: &[u8], reference: &[u8]) -> Vec<usize> {
    let mut ones = atom
        .iter()
        .enumerate()
        .filter(|(_, b)| **b == 1)
        .map(|(i, _)| i + 1);
    let mut zeros = atom
        .iter()
        .enumerate()
        .filter(|(_, b)| **b == 0)
        .map(|(i, _)| i + 1);
    reference
        .iter()
        .map(|b| {
            if *b == 1 {
                ones.next().expect("same number of ones")
            } else {
                zeros.next().expect("same number of zeros")
            }
        })
        .collect()
}

/// Invariance of the pmf under coordinate permutations. Permutations act
/// transitively on atoms with the same number of ones, so comparing each
/// atom with its class representative covers all `n!` permutations.
pub fn check_exchangeable(joint: &ExactJointLaw) -> Certificate {
    let n = joint.n;
    for ones in 0..=n {
        let atoms = class_atoms(n, ones);
        let reference = &atoms[0];
        let p_ref = joint.prob(reference);
        for atom in &atoms[1..] {
            let p = joint.prob(atom);
            if p != p_ref {
                return Certificate {
                    violated: true,
                    n: Some(n),
                    atom: Some(atom.clone()),
                    lhs: Some(p.clone()),
                    rhs: Some(p_ref.clone()),
                    permutation: Some(permutation_between(atom, reference)),
                    reference_atom: Some(reference.clone()),
                };
            }
        }
    }
    Certificate::pass()
}

/// Law of `(X_{τ(1)}, …, X_{τ(n)})` for a permutation `tau` of `1..=m`,
/// extended by the identity beyond `m`.
pub fn permuted_law(joint: &ExactJointLaw, tau: &[usize]) -> Result<ExactJointLaw> {
    let m = tau.len();
    if m > joint.n {
        return Err(Error::Index(format!(
            "permutation of {m} indices exceeds depth {}",
            joint.n
        )));
    }
    let mut sorted = tau.to_vec();
    sorted.sort_unstable();
    if sorted != (1..=m).collect::<Vec<_>>() {
        return Err(Error::Index(format!(
            "{tau:?} is not a permutation of 1..={m}"
        )));
    }
    let indices: Vec<usize> = tau.iter().copied().chain(m + 1..=joint.n).collect();
    marginal_law(joint, &indices)
}

/// Builds the joint law of the permuted sequence at `depth` and checks the
/// c.i.d. condition on it. `tau` must act on the first `depth - 2` indices.
pub fn check_permuted_cid(spec: &PolyaUrnSpec, tau: &[usize], depth: usize) -> Result<Certificate> {
    if depth > MAX_PERMUTED_DEPTH {
        return Err(Error::Size(format!(
            "depth {depth} exceeds {MAX_PERMUTED_DEPTH}"
        )));
    }
    if tau.len() + 2 > depth {
        return Err(Error::Size(format!(
            "permutation of {} indices needs depth at least {}",
            tau.len(),
            tau.len() + 2
        )));
    }
    let joint = enumerate_polya_joint(spec, depth)?;
    Ok(check_cid_predictive_law(&permuted_law(&joint, tau)?))
}

/// All permutations of `1..=m` in lexicographic order.
pub fn permutations(m: usize) -> Vec<Vec<usize>> {
    let mut current: Vec<usize> = (1..=m).collect();
    let mut out = vec![current.clone()];
    // next lexicographic permutation
    loop {
        let Some(i) = (1..m).rev().find(|&i| current[i - 1] < current[i]) else {
            return out;
        };
        let j = (i..m)
            .rev()
            .find(|&j| current[j] > current[i - 1])
            .expect("pivot exists");
        current.swap(i - 1, j);
        current[i..].reverse();
        out.push(current.clone());
    }
}

/// `P(X_{n+1..n+w} = pattern)` for a window pattern.
pub fn window_prob(joint: &ExactJointLaw, n: usize, pattern: &[u8]) -> Result<BigRational> {
    let indices: Vec<usize> = (n + 1..=n + pattern.len()).collect();
    Ok(marginal_law(joint, &indices)?.prob(pattern).clone())
}
