//! Centered statistics `W`, `B`, `C`, the quantity `M_n`, and empirical
//! processes indexed by half-line indicators.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::processes::PathSample;
use crate::sampling::ScalarDist;

/// A function `f` applied to each observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionDescriptor {
    Identity,
    /// `I{x <= t}`.
    Indicator {
        t: f64,
    },
    /// `x^p`.
    Power {
        p: u32,
    },
    /// Lookup table `(x, f(x))` for finitely supported families.
    Custom {
        table: Vec<(f64, f64)>,
    },
}

impl FunctionDescriptor {
    pub fn apply(&self, x: f64) -> Result<f64> {
        Ok(match self {
            FunctionDescriptor::Identity => x,
            FunctionDescriptor::Indicator { t } => {
                if x <= *t {
                    1.0
                } else {
                    0.0
                }
            }
            FunctionDescriptor::Power { p } => x.powi(i32::try_from(*p).unwrap_or(i32::MAX)),
            FunctionDescriptor::Custom { table } => table
                .iter()
                .find(|(k, _)| *k == x)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Unsupported(format!("custom function undefined at {x}")))?,
        })
    }

    /// `∫ f d law`.
    pub fn expect(&self, law: &ScalarDist) -> Result<f64> {
        match self {
            FunctionDescriptor::Identity => Ok(law.mean()),
            FunctionDescriptor::Indicator { t } => Ok(law.cdf(*t)),
            FunctionDescriptor::Power { p } => Ok(law.moment(*p)),
            FunctionDescriptor::Custom { .. } => {
                let atoms = law.atoms().ok_or_else(|| {
                    Error::Unsupported("custom function needs a finitely supported law".into())
                })?;
                atoms
                    .iter()
                    .try_fold(0.0, |acc, (v, m)| Ok(acc + self.apply(*v)? * m))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CenteredKind {
    W,
    B,
    C,
}

impl fmt::Display for CenteredKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CenteredKind::W => "W",
            CenteredKind::B => "B",
            CenteredKind::C => "C",
        };
        f.write_str(s)
    }
}

/// Where the centering constant of a `W` statistic came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VSource {
    Supplied,
    /// Exact directing law known to the generator.
    DirectingMeasure,
    /// Predictive law after the last observation.
    TerminalPredictive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenteredValue {
    pub value: f64,
    pub v_source: Option<VSource>,
}

/// `V_f` for a path: supplied, else from the directing law, else from the
/// terminal predictive law.
pub fn resolve_v(
    path: &PathSample,
    f: &FunctionDescriptor,
    v_f: Option<f64>,
) -> Result<(f64, VSource)> {
    if let Some(v) = v_f {
        return Ok((v, VSource::Supplied));
    }
    if let Some(law) = path.directing_law() {
        return Ok((f.expect(&law)?, VSource::DirectingMeasure));
    }
    let law = path.predictive_law(path.len())?;
    Ok((f.expect(&law)?, VSource::TerminalPredictive))
}

/// `a_k(f) = E[f(X_{k+1}) | G_k]` for `k = 0..=n`.
pub fn predictive_values(path: &PathSample, f: &FunctionDescriptor) -> Result<Vec<f64>> {
    if let (FunctionDescriptor::Identity, Some(a)) = (f, &path.predictive_mean) {
        return Ok(a.clone());
    }
    (0..=path.len())
        .map(|k| {
            let law = path.predictive_law(k).map_err(unsupported)?;
            f.expect(&law)
        })
        .collect()
}

fn unsupported(e: Error) -> Error {
    match e {
        Error::UnsupportedFamily(m) => Error::Unsupported(m),
        other => other,
    }
}

fn f_values(path: &PathSample, f: &FunctionDescriptor) -> Result<Vec<f64>> {
    path.x.iter().map(|x| f.apply(*x)).collect()
}

pub fn centered_stat(
    path: &PathSample,
    f: &FunctionDescriptor,
    kind: CenteredKind,
    v_f: Option<f64>,
) -> Result<f64> {
    Ok(centered_stat_detailed(path, f, kind, v_f)?.value)
}

pub fn centered_stat_detailed(
    path: &PathSample,
    f: &FunctionDescriptor,
    kind: CenteredKind,
    v_f: Option<f64>,
) -> Result<CenteredValue> {
    let n = path.len();
    let root = (n as f64).sqrt();
    let fx = f_values(path, f)?;
    let sum: f64 = fx.iter().sum();
    match kind {
        CenteredKind::W => {
            let (v, source) = resolve_v(path, f, v_f).map_err(unsupported)?;
            Ok(CenteredValue {
                value: (sum - n as f64 * v) / root,
                v_source: Some(source),
            })
        }
        CenteredKind::B => {
            let a = predictive_values(path, f)?;
            let s: f64 = fx.iter().zip(&a).map(|(y, ak)| y - ak).sum();
            Ok(CenteredValue {
                value: s / root,
                v_source: None,
            })
        }
        CenteredKind::C => {
            let a_n = predictive_values(path, f)?[n];
            Ok(CenteredValue {
                value: (sum - n as f64 * a_n) / root,
                v_source: None,
            })
        }
    }
}

/// Martingale increments `f(X_k) - a_{k-1}(f)`, `k = 1..=n`, of `√n B_n`.
pub fn b_increments(path: &PathSample, f: &FunctionDescriptor) -> Result<Vec<f64>> {
    let a = predictive_values(path, f)?;
    Ok(f_values(path, f)?
        .iter()
        .zip(&a)
        .map(|(y, ak)| y - ak)
        .collect())
}

/// `D_k = a_k(f) - a_{k-1}(f)`, `k = 1..=n`.
pub fn d_values(path: &PathSample, f: &FunctionDescriptor) -> Result<Vec<f64>> {
    let a = predictive_values(path, f)?;
    Ok(a.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Summands `f(X_k) - k a_k(f) + (k-1) a_{k-1}(f)`, `k = 1..=n`.
pub fn m_terms(path: &PathSample, f: &FunctionDescriptor) -> Result<Vec<f64>> {
    let a = predictive_values(path, f)?;
    let fx = f_values(path, f)?;
    Ok(fx
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let k = (i + 1) as f64;
            y - k * a[i + 1] + (k - 1.0) * a[i]
        })
        .collect())
}

/// `M_n = (1/n) Σ (f(X_k) - k a_k(f) + (k-1) a_{k-1}(f))²`.
pub fn m_stat(path: &PathSample, f: &FunctionDescriptor) -> Result<f64> {
    let terms = m_terms(path, f)?;
    Ok(terms.iter().map(|q| q * q).sum::<f64>() / terms.len() as f64)
}

/// `q_k(t)` for `k = 1..=n`.
pub fn q_k_values(path: &PathSample, t: f64) -> Result<Vec<f64>> {
    m_terms(path, &FunctionDescriptor::Indicator { t })
}

/// `(1/n) Σ k² D_k(t)²`.
pub fn weighted_increment_energy(path: &PathSample, t: f64) -> Result<f64> {
    let d = d_values(path, &FunctionDescriptor::Indicator { t })?;
    let s: f64 = d
        .iter()
        .enumerate()
        .map(|(i, dk)| {
            let k = (i + 1) as f64;
            k * k * dk * dk
        })
        .sum();
    Ok(s / d.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaEstimate {
    pub mean: f64,
    pub std_dev: f64,
    pub per_path: Vec<f64>,
}

/// Per-path `(1/n) Σ q_k(s) q_k(t)`, with its across-path mean and spread.
pub fn sigma_estimate(paths: &[PathSample], s: f64, t: f64) -> Result<SigmaEstimate> {
    if paths.is_empty() {
        return Err(Error::Size("sigma_estimate needs at least one path".into()));
    }
    let per_path = paths
        .iter()
        .map(|p| sigma_path(p, s, t))
        .collect::<Result<Vec<f64>>>()?;
    Ok(SigmaEstimate {
        mean: crate::summary::mean(&per_path),
        std_dev: crate::summary::variance(&per_path).sqrt(),
        per_path,
    })
}

pub fn sigma_path(path: &PathSample, s: f64, t: f64) -> Result<f64> {
    let qs = q_k_values(path, s)?;
    let qt = if s == t {
        qs.clone()
    } else {
        q_k_values(path, t)?
    };
    Ok(qs.iter().zip(&qt).map(|(a, b)| a * b).sum::<f64>() / qs.len() as f64)
}

/// `(1/(n-k+1)) Σ_{i=0}^{n-k} Π_j f_j(X_{i+j})` over complete windows.
pub fn block_product_mean(path: &PathSample, fs: &[FunctionDescriptor]) -> Result<f64> {
    let k = fs.len();
    let n = path.len();
    if k == 0 {
        return Err(Error::Size("need at least one function".into()));
    }
    if n <= k {
        return Err(Error::Size(format!(
            "path length {n} must exceed block length {k}"
        )));
    }
    let cols = fs
        .iter()
        .map(|f| f_values(path, f))
        .collect::<Result<Vec<_>>>()?;
    let windows = n - k + 1;
    let total: f64 = (0..windows)
        .map(|i| {
            cols.iter()
                .enumerate()
                .map(|(j, c)| c[i + j])
                .product::<f64>()
        })
        .sum();
    Ok(total / windows as f64)
}

// ---------------------------------------------------------------------------
// Empirical processes

/// `Z_{n,t}` on a finite grid of thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalProcessPath {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub n: usize,
    pub centering: CenteredKind,
}

enum Centering<'a> {
    Law(ScalarDist),
    Average(Vec<ScalarDist>),
    Func(&'a dyn Fn(f64) -> f64),
}

impl Centering<'_> {
    fn at(&self, t: f64) -> f64 {
        match self {
            Centering::Law(d) => d.cdf(t),
            Centering::Average(laws) => {
                laws.iter().map(|d| d.cdf(t)).sum::<f64>() / laws.len() as f64
            }
            Centering::Func(g) => g(t),
        }
    }

    fn left(&self, t: f64) -> f64 {
        match self {
            Centering::Law(d) => d.cdf_left(t),
            Centering::Average(laws) => {
                laws.iter().map(|d| d.cdf_left(t)).sum::<f64>() / laws.len() as f64
            }
            Centering::Func(g) => g(t),
        }
    }
}

/// Distribution function `G` with `Z_{n,t} = √n (F̂_n(t) - G(t))`.
fn centering<'a>(
    path: &PathSample,
    kind: CenteredKind,
    v_fn: Option<&'a dyn Fn(f64) -> f64>,
) -> Result<Centering<'a>> {
    let n = path.len();
    match kind {
        CenteredKind::W => {
            if let Some(g) = v_fn {
                return Ok(Centering::Func(g));
            }
            match path.directing_law() {
                Some(law) => Ok(Centering::Law(law)),
                None => Ok(Centering::Law(path.predictive_law(n).map_err(unsupported)?)),
            }
        }
        CenteredKind::C => Ok(Centering::Law(path.predictive_law(n).map_err(unsupported)?)),
        CenteredKind::B => {
            let laws = (0..n)
                .map(|k| path.predictive_law(k))
                .collect::<Result<Vec<_>>>()
                .map_err(unsupported)?;
            Ok(average_laws(laws))
        }
    }
}

/// The average of `laws`, collapsed to a single law when that is exact.
fn average_laws<'a>(laws: Vec<ScalarDist>) -> Centering<'a> {
    if laws.iter().all(|d| *d == laws[0]) {
        return Centering::Law(laws[0].clone());
    }
    if laws
        .iter()
        .all(|d| matches!(d, ScalarDist::Bernoulli { .. }))
    {
        let p = laws.iter().map(ScalarDist::mean).sum::<f64>() / laws.len() as f64;
        return Centering::Law(ScalarDist::Bernoulli { p });
    }
    Centering::Average(laws)
}

fn sorted_values(path: &PathSample) -> Vec<f64> {
    let mut xs = path.x.clone();
    xs.sort_by(f64::total_cmp);
    xs
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|t| t.is_nan()) {
        return Err(Error::Parameter("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Evaluates the `kind` process on `grid`. For `W`, `v_fn` gives `t ↦ V(t)`;
/// when absent the exact directing law is used if the generator knows it,
/// otherwise the terminal predictive law.
pub fn empirical_process(
    path: &PathSample,
    grid: &[f64],
    kind: CenteredKind,
    v_fn: Option<&dyn Fn(f64) -> f64>,
) -> Result<EmpiricalProcessPath> {
    check_grid(grid)?;
    let g = centering(path, kind, v_fn)?;
    let xs = sorted_values(path);
    let n = xs.len();
    let root = (n as f64).sqrt();
    let mut below = 0;
    let values = grid
        .iter()
        .map(|&t| {
            while below < n && xs[below] <= t {
                below += 1;
            }
            root * (below as f64 / n as f64 - g.at(t))
        })
        .collect();
    Ok(EmpiricalProcessPath {
        grid: grid.to_vec(),
        values,
        n,
        centering: kind,
    })
}

/// `sup_t |Z_{n,t}|` over all real `t`, evaluated at the order statistics
/// and their left limits. Exact when the centering is a distribution
/// function.
pub fn exact_sup_norm(
    path: &PathSample,
    kind: CenteredKind,
    v_fn: Option<&dyn Fn(f64) -> f64>,
) -> Result<f64> {
    let g = centering(path, kind, v_fn)?;
    let xs = sorted_values(path);
    let n = xs.len();
    let nf = n as f64;
    let mut sup: f64 = 0.0;
    let mut i = 0;
    while i < n {
        let x = xs[i];
        let mut j = i;
        while j < n && xs[j] == x {
            j += 1;
        }
        let left = (i as f64 / nf - g.left(x)).abs();
        let right = (j as f64 / nf - g.at(x)).abs();
        sup = sup.max(left).max(right);
        i = j;
    }
    Ok(nf.sqrt() * sup)
}

/// Sorted sample of the path, the grid on which the indicator processes
/// attain their supremum.
pub fn order_statistic_grid(path: &PathSample) -> Vec<f64> {
    let mut xs = sorted_values(path);
    xs.dedup();
    xs
}

pub fn sup_norm(ep: &EmpiricalProcessPath) -> Result<f64> {
    if ep.values.is_empty() {
        return Err(Error::Size("empty grid".into()));
    }
    Ok(ep.values.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Right-open interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// Partition of the real line at the strictly increasing `cuts`.
    pub fn from_cuts(cuts: &[f64]) -> Vec<Interval> {
        let mut edges = vec![f64::NEG_INFINITY];
        edges.extend_from_slice(cuts);
        edges.push(f64::INFINITY);
        edges
            .windows(2)
            .map(|w| Interval { lo: w[0], hi: w[1] })
            .collect()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo <= t && t < self.hi
    }
}

fn check_partition(partition: &[Interval]) -> Result<()> {
    let first = partition
        .first()
        .ok_or_else(|| Error::Partition("empty partition".into()))?;
    let last = partition.last().expect("nonempty");
    if first.lo != f64::NEG_INFINITY || last.hi != f64::INFINITY {
        return Err(Error::Partition(
            "intervals must cover the real line".into(),
        ));
    }
    if partition.iter().any(|i| !(i.lo < i.hi)) {
        return Err(Error::Partition("every interval needs lo < hi".into()));
    }
    if partition.windows(2).any(|w| w[0].hi != w[1].lo) {
        return Err(Error::Partition(
            "intervals must be ordered and contiguous".into(),
        ));
    }
    Ok(())
}

/// `max_k sup_{s,t ∈ I_k} |Z_{n,s} - Z_{n,t}|` over the grid points.
pub fn oscillation(ep: &EmpiricalProcessPath, partition: &[Interval]) -> Result<f64> {
    check_partition(partition)?;
    let mut worst: f64 = 0.0;
    let mut j = 0;
    for interval in partition {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        while j < ep.grid.len() && interval.contains(ep.grid[j]) {
            lo = lo.min(ep.values[j]);
            hi = hi.max(ep.values[j]);
            j += 1;
        }
        if hi >= lo {
            worst = worst.max(hi - lo);
        }
    }
    Ok(worst)
}

#[derive(Serialize)]
struct CsvHeader<'a> {
    n: usize,
    kind: CenteredKind,
    family: &'a str,
    seed: u64,
}

impl EmpiricalProcessPath {
    /// CSV with a `# {json}` metadata line followed by `t,value` rows.
    pub fn to_csv(&self, family: &str, seed: u64) -> String {
        let header = CsvHeader {
            n: self.n,
            kind: self.centering,
            family,
            seed,
        };
        let mut out = format!(
            "# {}\nt,value\n",
            serde_json::to_string(&header).expect("serializable header")
        );
        for (t, v) in self.grid.iter().zip(&self.values) {
            out.push_str(&format!("{t},{v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::{
        gen_compensated_gaussian, gen_definetti, gen_polya, CompensatedGaussianSpec, DeFinettiSpec,
        PolyaUrnSpec, ProcessSpec, Reinforcement, StopLaw, StoppedExchangeableSpec,
    };
    use crate::sampling::{open_stream, Stream, StreamKey};
    use crate::summary::{mean, quantile, variance};
    use proptest::prelude::*;

    fn stream(r: u64) -> Stream {
        open_stream(StreamKey::new(99, r, 0))
    }

    fn uniform_iid() -> DeFinettiSpec {
        DeFinettiSpec::iid(ScalarDist::Uniform { lo: 0.0, hi: 1.0 })
    }

    fn urn(d: &[u64]) -> PolyaUrnSpec {
        PolyaUrnSpec::new(1, 1, Reinforcement::Deterministic { d: d.to_vec() })
    }

    fn white_first(spec: &PolyaUrnSpec, n: usize) -> PathSample {
        (0..)
            .map(|r| gen_polya(spec, n, &mut stream(r)).unwrap())
            .find(|p| p.x[0] == 1.0)
            .unwrap()
    }

    #[test]
    fn w_at_n_one() {
        let p = gen_definetti(
            &DeFinettiSpec::iid(ScalarDist::standard_normal()),
            1,
            &mut stream(0),
        )
        .unwrap();
        let w = centered_stat(
            &p,
            &FunctionDescriptor::Identity,
            CenteredKind::W,
            Some(0.3),
        )
        .unwrap();
        assert_eq!(w, p.x[0] - 0.3);
    }

    #[test]
    fn iid_normal_b_is_scaled_sum() {
        let spec = DeFinettiSpec::iid(ScalarDist::standard_normal());
        let bs: Vec<f64> = (0..4000)
            .map(|r| {
                let p = gen_definetti(&spec, 50, &mut stream(r)).unwrap();
                let b = centered_stat(&p, &FunctionDescriptor::Identity, CenteredKind::B, None)
                    .unwrap();
                let direct = p.x.iter().sum::<f64>() / 50f64.sqrt();
                assert!((b - direct).abs() < 1e-12);
                b
            })
            .collect();
        assert!((variance(&bs) - 1.0).abs() < 0.1);
    }

    #[test]
    fn urn_c_after_one_white() {
        let p = white_first(&urn(&[1]), 1);
        let c = centered_stat(&p, &FunctionDescriptor::Identity, CenteredKind::C, None).unwrap();
        assert!((c - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn m_stat_vanishes_on_constant_path() {
        let p = gen_definetti(
            &DeFinettiSpec::iid(ScalarDist::point_mass(2.0)),
            100,
            &mut stream(0),
        )
        .unwrap();
        for f in [
            FunctionDescriptor::Identity,
            FunctionDescriptor::Power { p: 3 },
            FunctionDescriptor::Indicator { t: 2.0 },
        ] {
            assert_eq!(m_stat(&p, &f).unwrap(), 0.0);
        }
        let g = gen_compensated_gaussian(
            &CompensatedGaussianSpec::harmonic(1.0, 0.0),
            100,
            &mut stream(1),
        )
        .unwrap();
        assert!(m_stat(&g, &FunctionDescriptor::Identity).unwrap().abs() < 1e-20);
    }

    fn fraction_within(values: &[f64], target: f64, tol: f64) -> f64 {
        values.iter().filter(|v| (*v - target).abs() <= tol).count() as f64 / values.len() as f64
    }

    #[test]
    fn m_stat_limits() {
        let iid = DeFinettiSpec::iid(ScalarDist::standard_normal());
        let ms: Vec<f64> = (0..200)
            .map(|r| {
                m_stat(
                    &gen_definetti(&iid, 10_000, &mut stream(r)).unwrap(),
                    &FunctionDescriptor::Identity,
                )
                .unwrap()
            })
            .collect();
        assert!(fraction_within(&ms, 1.0, 0.05) >= 0.95);
        let gauss = CompensatedGaussianSpec::harmonic(1.0, 0.5);
        let ms: Vec<f64> = (0..200)
            .map(|r| {
                let p = gen_compensated_gaussian(&gauss, 10_000, &mut stream(r)).unwrap();
                m_stat(&p, &FunctionDescriptor::Identity).unwrap()
            })
            .collect();
        assert!(fraction_within(&ms, 0.5, 0.05) >= 0.95);
    }

    #[test]
    fn q_values_outside_support() {
        let p = gen_definetti(&uniform_iid(), 100, &mut stream(0)).unwrap();
        assert!(q_k_values(&p, -1.0).unwrap().iter().all(|q| *q == 0.0));
        assert!(q_k_values(&p, 2.0).unwrap().iter().all(|q| *q == 0.0));
        let u = gen_polya(&urn(&[1, 2]), 100, &mut stream(0)).unwrap();
        assert!(q_k_values(&u, -0.5).unwrap().iter().all(|q| *q == 0.0));
        assert!(q_k_values(&u, 1.5).unwrap().iter().all(|q| *q == 0.0));
        assert_eq!(sigma_path(&u, -0.5, -0.5).unwrap(), 0.0);
    }

    #[test]
    fn q_values_iid_match_b() {
        let p = gen_definetti(&uniform_iid(), 500, &mut stream(3)).unwrap();
        let t = 0.4;
        let q = q_k_values(&p, t).unwrap();
        for (i, (qk, x)) in q.iter().zip(&p.x).enumerate() {
            let ind = if *x <= t { 1.0 } else { 0.0 };
            // k t - (k-1) t rounds at the scale of k
            assert!((qk - (ind - t)).abs() <= 4.0 * f64::EPSILON * (i + 1) as f64);
        }
        let b = centered_stat(
            &p,
            &FunctionDescriptor::Indicator { t },
            CenteredKind::B,
            None,
        )
        .unwrap();
        assert!((q.iter().sum::<f64>() / 500f64.sqrt() - b).abs() < 1e-12);
    }

    #[test]
    fn sigma_for_uniform() {
        let paths: Vec<PathSample> = (0..100)
            .map(|r| gen_definetti(&uniform_iid(), 10_000, &mut stream(r)).unwrap())
            .collect();
        let same = sigma_estimate(&paths, 0.5, 0.5).unwrap();
        assert!(fraction_within(&same.per_path, 0.25, 0.02) >= 0.95);
        let cross = sigma_estimate(&paths, 0.25, 0.75).unwrap();
        assert!(fraction_within(&cross.per_path, 0.0625, 0.02) >= 0.95);
        assert!(sigma_estimate(&[], 0.0, 0.0).is_err());
    }

    #[test]
    fn block_products() {
        let p = gen_definetti(&uniform_iid(), 200, &mut stream(0)).unwrap();
        let k1 = block_product_mean(&p, &[FunctionDescriptor::Identity]).unwrap();
        assert!((k1 - mean(&p.x)).abs() < 1e-12);
        let c = gen_definetti(
            &DeFinettiSpec::iid(ScalarDist::point_mass(1.5)),
            50,
            &mut stream(0),
        )
        .unwrap();
        let fs = [
            FunctionDescriptor::Identity,
            FunctionDescriptor::Power { p: 2 },
        ];
        assert_eq!(block_product_mean(&c, &fs).unwrap(), 1.5 * 2.25);
        let short = gen_definetti(&uniform_iid(), 2, &mut stream(0)).unwrap();
        assert!(matches!(
            block_product_mean(&short, &fs),
            Err(Error::Size(_))
        ));

        let coin = DeFinettiSpec::iid(ScalarDist::Bernoulli { p: 0.5 });
        let pair = [FunctionDescriptor::Identity, FunctionDescriptor::Identity];
        let vals: Vec<f64> = (0..200)
            .map(|r| {
                block_product_mean(
                    &gen_definetti(&coin, 10_000, &mut stream(r)).unwrap(),
                    &pair,
                )
                .unwrap()
            })
            .collect();
        assert!(fraction_within(&vals, 0.25, 0.02) >= 0.95);
    }

    #[test]
    fn empirical_process_examples() {
        let p = gen_definetti(
            &DeFinettiSpec::iid(ScalarDist::point_mass(0.3)),
            1,
            &mut stream(0),
        )
        .unwrap();
        let v = |t: f64| t;
        let ep = empirical_process(&p, &[0.5], CenteredKind::W, Some(&v)).unwrap();
        assert_eq!(ep.values, vec![0.5]);

        let p = gen_definetti(&uniform_iid(), 400, &mut stream(1)).unwrap();
        let grid: Vec<f64> = (1..=9).map(|j| j as f64 / 10.0).collect();
        let ep = empirical_process(&p, &grid, CenteredKind::W, Some(&v)).unwrap();
        for (t, z) in grid.iter().zip(&ep.values) {
            let fhat = p.x.iter().filter(|x| **x <= *t).count() as f64 / 400.0;
            assert!((z - 20.0 * (fhat - t)).abs() < 1e-12);
        }
        // default centering is the exact directing law, Uniform(0,1)
        let ep2 = empirical_process(&p, &grid, CenteredKind::W, None).unwrap();
        for (a, b) in ep.values.iter().zip(&ep2.values) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(empirical_process(&p, &[0.5, 0.5], CenteredKind::W, None).is_err());
    }

    #[test]
    fn urn_c_process_two_ways() {
        let p = gen_polya(&urn(&[1, 2, 2]), 300, &mut stream(5)).unwrap();
        let grid = [-0.5, 0.0, 0.5, 1.0, 1.5];
        let ep = empirical_process(&p, &grid, CenteredKind::C, None).unwrap();
        for (t, z) in grid.iter().zip(&ep.values) {
            let c = centered_stat(
                &p,
                &FunctionDescriptor::Indicator { t: *t },
                CenteredKind::C,
                None,
            )
            .unwrap();
            assert!((z - c).abs() < 1e-12, "t={t}");
        }
        let ep = empirical_process(&p, &grid, CenteredKind::B, None).unwrap();
        for (t, z) in grid.iter().zip(&ep.values) {
            let b = centered_stat(
                &p,
                &FunctionDescriptor::Indicator { t: *t },
                CenteredKind::B,
                None,
            )
            .unwrap();
            assert!((z - b).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn exact_sup_dominates_grid_sup() {
        let p = gen_definetti(&uniform_iid(), 1000, &mut stream(2)).unwrap();
        let grid: Vec<f64> = (0..512).map(|j| (j as f64 + 0.5) / 512.0).collect();
        let ep = empirical_process(&p, &grid, CenteredKind::W, None).unwrap();
        let exact = exact_sup_norm(&p, CenteredKind::W, None).unwrap();
        let on_grid = sup_norm(&ep).unwrap();
        assert!(exact >= on_grid - 1e-12);
        // the largest gap between grid points is at most one jump of F̂ plus the grid spacing
        assert!(exact - on_grid <= 1000f64.sqrt() * (1.0 / 512.0 + 5.0 / 1000.0));
        let og = order_statistic_grid(&p);
        let ep = empirical_process(&p, &og, CenteredKind::W, None).unwrap();
        assert!(sup_norm(&ep).unwrap() <= exact + 1e-12);
    }

    #[test]
    fn sup_norm_and_oscillation_basics() {
        let mut ep = EmpiricalProcessPath {
            grid: vec![0.0, 1.0],
            values: vec![0.0, 0.0],
            n: 1,
            centering: CenteredKind::W,
        };
        assert_eq!(sup_norm(&ep).unwrap(), 0.0);
        ep.values = vec![-2.0, 1.0];
        assert_eq!(sup_norm(&ep).unwrap(), 2.0);
        assert_eq!(oscillation(&ep, &Interval::from_cuts(&[])).unwrap(), 3.0);
        assert_eq!(oscillation(&ep, &Interval::from_cuts(&[0.5])).unwrap(), 0.0);
        let empty = EmpiricalProcessPath {
            grid: vec![],
            values: vec![],
            n: 1,
            centering: CenteredKind::W,
        };
        assert!(matches!(sup_norm(&empty), Err(Error::Size(_))));
        let gap = [
            Interval {
                lo: f64::NEG_INFINITY,
                hi: 0.0,
            },
            Interval {
                lo: 0.5,
                hi: f64::INFINITY,
            },
        ];
        assert!(matches!(oscillation(&ep, &gap), Err(Error::Partition(_))));
        let partial = [Interval {
            lo: 0.0,
            hi: f64::INFINITY,
        }];
        assert!(matches!(
            oscillation(&ep, &partial),
            Err(Error::Partition(_))
        ));
    }

    #[test]
    fn oscillation_shrinks_with_refinement() {
        let grid: Vec<f64> = (0..512).map(|j| (j as f64 + 0.5) / 512.0).collect();
        let cuts = |m: usize| -> Vec<f64> { (1..m).map(|j| j as f64 / m as f64).collect() };
        let (p32, p128) = (
            Interval::from_cuts(&cuts(32)),
            Interval::from_cuts(&cuts(128)),
        );
        let mut o32 = Vec::new();
        let mut o128 = Vec::new();
        for r in 0..200 {
            let p = gen_definetti(&uniform_iid(), 10_000, &mut stream(r)).unwrap();
            let ep = empirical_process(&p, &grid, CenteredKind::W, None).unwrap();
            o32.push(oscillation(&ep, &p32).unwrap());
            o128.push(oscillation(&ep, &p128).unwrap());
        }
        assert!(mean(&o128) < mean(&o32));
    }

    #[test]
    fn csv_header() {
        let ep = EmpiricalProcessPath {
            grid: vec![0.5],
            values: vec![0.25],
            n: 4,
            centering: CenteredKind::C,
        };
        let csv = ep.to_csv("polya_urn", 7);
        assert_eq!(
            csv,
            "# {\"n\":4,\"kind\":\"C\",\"family\":\"polya_urn\",\"seed\":7}\nt,value\n0.5,0.25\n"
        );
    }

    #[test]
    fn unsupported_combinations() {
        let spec = DeFinettiSpec {
            mixing: ScalarDist::Uniform { lo: 0.0, hi: 1.0 },
            kernel: crate::processes::Kernel::NormalMean { variance: 1.0 },
        };
        let p = gen_definetti(&spec, 10, &mut stream(0)).unwrap();
        assert!(matches!(
            centered_stat(&p, &FunctionDescriptor::Identity, CenteredKind::B, None),
            Err(Error::Unsupported(_))
        ));
        // W is still available through the exact directing law.
        assert!(centered_stat(&p, &FunctionDescriptor::Identity, CenteredKind::W, None).is_ok());
        let g = gen_compensated_gaussian(
            &CompensatedGaussianSpec::harmonic(1.0, 0.5),
            10,
            &mut stream(0),
        )
        .unwrap();
        let custom = FunctionDescriptor::Custom {
            table: vec![(0.0, 1.0)],
        };
        assert!(matches!(
            centered_stat(&g, &custom, CenteredKind::C, None),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn v_source_is_recorded() {
        let u = gen_polya(&urn(&[1]), 20, &mut stream(0)).unwrap();
        let v = centered_stat_detailed(&u, &FunctionDescriptor::Identity, CenteredKind::W, None)
            .unwrap();
        assert_eq!(v.v_source, Some(VSource::TerminalPredictive));
        let d =
            gen_definetti(&DeFinettiSpec::beta_bernoulli(1.0, 1.0), 20, &mut stream(0)).unwrap();
        let v = centered_stat_detailed(&d, &FunctionDescriptor::Identity, CenteredKind::W, None)
            .unwrap();
        assert_eq!(v.v_source, Some(VSource::DirectingMeasure));
        let v = centered_stat_detailed(
            &d,
            &FunctionDescriptor::Identity,
            CenteredKind::W,
            Some(0.5),
        )
        .unwrap();
        assert_eq!(v.v_source, Some(VSource::Supplied));
    }

    #[test]
    fn slln_band_gaussian() {
        let spec = CompensatedGaussianSpec::harmonic(1.0, 0.5);
        let n = 10_000;
        let bound = 3.0 * (spec.w_variance(n) / n as f64).sqrt();
        let gaps: Vec<f64> = (0..200)
            .map(|r| {
                let p = gen_compensated_gaussian(&spec, n, &mut stream(r)).unwrap();
                (mean(&p.x) - p.v_hat().unwrap()).abs()
            })
            .collect();
        assert!(fraction_within(&gaps, 0.0, bound) >= 0.95);
        assert!(quantile(&gaps, 0.95) < 0.025);
    }

    fn binary_specs() -> Vec<ProcessSpec> {
        vec![
            ProcessSpec::PolyaUrn(urn(&[1, 2, 2])),
            ProcessSpec::PolyaUrn(PolyaUrnSpec::new(
                2,
                1,
                Reinforcement::Iid {
                    dist: ScalarDist::Discrete {
                        weights: vec![0.0, 1.0, 1.0],
                    },
                },
            )),
            ProcessSpec::DeFinetti(DeFinettiSpec::beta_bernoulli(1.0, 2.0)),
            ProcessSpec::StoppedExchangeable(StoppedExchangeableSpec {
                base: DeFinettiSpec::beta_bernoulli(1.0, 1.0),
                stop: StopLaw::Geometric { p: 0.2 },
            }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn c_matches_terminal_predictive_and_bc_bridge(seed in any::<u64>(), n in 1usize..300, which in 0usize..5) {
            let spec = match which {
                4 => ProcessSpec::CompensatedGaussian(CompensatedGaussianSpec::harmonic(1.0, 0.5)),
                i => binary_specs()[i].clone(),
            };
            let p = spec.generate(n, &mut open_stream(StreamKey::new(seed, 0, 0))).unwrap();
            let f = FunctionDescriptor::Identity;
            let a = p.predictive_mean.clone().unwrap();
            let root = (n as f64).sqrt();
            let c = centered_stat(&p, &f, CenteredKind::C, None).unwrap();
            let direct = (p.x.iter().sum::<f64>() - n as f64 * a[n]) / root;
            prop_assert!((c - direct).abs() < 1e-12);
            let b = centered_stat(&p, &f, CenteredKind::B, None).unwrap();
            let d = d_values(&p, &f).unwrap();
            let bridge: f64 = d.iter().enumerate().map(|(i, dk)| (i + 1) as f64 * dk).sum::<f64>() / root;
            let scale = 1.0 + p.x.iter().map(|x| x.abs()).sum::<f64>() / root;
            prop_assert!((b - c - bridge).abs() < 1e-10 * scale);
        }

        #[test]
        fn scaling_equivariance(seed in any::<u64>(), n in 2usize..200, which in 0usize..4, power in -3i32..4) {
            let spec = &binary_specs()[which];
            let p = spec.generate(n, &mut open_stream(StreamKey::new(seed, 1, 0))).unwrap();
            let lambda = 2f64.powi(power);
            let f = FunctionDescriptor::Custom { table: vec![(0.0, 0.0), (1.0, 1.0)] };
            let g = FunctionDescriptor::Custom { table: vec![(0.0, 0.0), (1.0, lambda)] };
            for kind in [CenteredKind::W, CenteredKind::B, CenteredKind::C] {
                let a = centered_stat(&p, &f, kind, None).unwrap();
                let b = centered_stat(&p, &g, kind, None).unwrap();
                prop_assert_eq!(b, lambda * a);
            }
            prop_assert_eq!(m_stat(&p, &g).unwrap(), lambda * lambda * m_stat(&p, &f).unwrap());
        }

        #[test]
        fn exact_sup_is_grid_limit(seed in any::<u64>(), n in 1usize..100) {
            let p = gen_definetti(&uniform_iid(), n, &mut open_stream(StreamKey::new(seed, 2, 0))).unwrap();
            // a grid containing every order statistic and points just below them
            let mut grid: Vec<f64> = order_statistic_grid(&p)
                .iter()
                .flat_map(|x| [x - 1e-13, *x])
                .collect();
            grid.dedup();
            let ep = empirical_process(&p, &grid, CenteredKind::W, None).unwrap();
            let exact = exact_sup_norm(&p, CenteredKind::W, None).unwrap();
            prop_assert!((sup_norm(&ep).unwrap() - exact).abs() < 1e-9);
        }
    }
}
