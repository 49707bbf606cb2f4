//! Generators for the c.i.d. families together with their predictive laws.
//!
//! Every generator returns a [`PathSample`] holding the observations, the
//! latent variables that make up the filtration, and the one-step predictive
//! law `P(X_{k+1} ∈ · | G_k)` for `k = 0..=n` whenever it has a closed form.

use num_integer::Integer;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{ScalarDist, Stream, SymMatrix};

// ---------------------------------------------------------------------------
// Compensated Gaussian family

/// Variance schedule `b_1 ≤ b_2 ≤ … ≤ c` of the compensated Gaussian family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// Explicit `b_1..b_m`; generation needs `m >= n`.
    Explicit { b: Vec<f64> },
    /// `b_k = c - u/k`.
    Harmonic { u: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompensatedGaussianSpec {
    pub c: f64,
    pub schedule: Schedule,
}

impl CompensatedGaussianSpec {
    pub fn harmonic(c: f64, u: f64) -> Self {
        Self {
            c,
            schedule: Schedule::Harmonic { u },
        }
    }

    pub fn explicit(c: f64, b: Vec<f64>) -> Self {
        Self {
            c,
            schedule: Schedule::Explicit { b },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.c;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Parameter(format!("c must be positive, got {c}")));
        }
        match &self.schedule {
            Schedule::Harmonic { u } => {
                if !(*u >= 0.0 && *u < c) {
                    return Err(Error::Parameter(format!(
                        "need 0 <= u < c, got u = {u}, c = {c}"
                    )));
                }
            }
            Schedule::Explicit { b } => {
                let first = b
                    .first()
                    .ok_or_else(|| Error::Parameter("empty variance schedule".into()))?;
                if !(*first > 0.0) {
                    return Err(Error::Parameter("b_1 must be strictly positive".into()));
                }
                if b.windows(2).any(|w| w[1] < w[0]) || b.iter().any(|v| !(*v <= c)) {
                    return Err(Error::Parameter(
                        "schedule must be nondecreasing and bounded by c".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if let Schedule::Explicit { b } = &self.schedule {
            if b.len() < n {
                return Err(Error::Size(format!(
                    "schedule has {} entries, need {n}",
                    b.len()
                )));
            }
        }
        Ok(())
    }

    /// `b_k` with `b_0 = 0`.
    pub fn b(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        match &self.schedule {
            Schedule::Harmonic { u } => self.c - u / k as f64,
            Schedule::Explicit { b } => b[k - 1],
        }
    }

    /// Exact `Var[W_n]` for `f` the identity, centered at the limit `V`.
    pub fn w_variance(&self, n: usize) -> f64 {
        let nf = n as f64;
        self.c_variance(n) + nf * (self.c - self.b(n))
    }

    /// Exact `Var[C_n]` for `f` the identity.
    pub fn c_variance(&self, n: usize) -> f64 {
        let c = self.c;
        let sum: f64 = (1..=n)
            .map(|k| {
                let km1 = (k - 1) as f64;
                c - self.b(k) + km1 * km1 * (self.b(k) - self.b(k - 1))
            })
            .sum();
        sum / n as f64
    }

    /// Exact `Var[B_n]` for `f` the identity: `(1/n) Σ_{k≤n} (c - b_{k-1})`.
    pub fn b_variance(&self, n: usize) -> f64 {
        (1..=n).map(|k| self.c - self.b(k - 1)).sum::<f64>() / n as f64
    }
}

/// Covariance `γ_ii = c`, `γ_ij = b_{i∧j}` of `(X_1, …, X_n)`.
pub fn gamma_matrix(spec: &CompensatedGaussianSpec, n: usize) -> Result<SymMatrix> {
    spec.validate()?;
    spec.check_len(n)?;
    Ok(SymMatrix::from_fn(n, |i, j| {
        if i == j {
            spec.c
        } else {
            spec.b(i.min(j) + 1)
        }
    }))
}

/// Checks that `Γ_{n+2}` restricted to `(1..n, n+2)` equals its restriction to
/// `(1..n, n+1)` entry by entry, for every `n < n_max`.
pub fn gaussian_cid_witness(spec: &CompensatedGaussianSpec, n_max: usize) -> Result<bool> {
    let g = gamma_matrix(spec, n_max + 1)?;
    for n in 0..n_max {
        let left: Vec<usize> = (0..n).chain(std::iter::once(n + 1)).collect();
        let right: Vec<usize> = (0..n).chain(std::iter::once(n)).collect();
        for (a, (&li, &ri)) in left.iter().zip(&right).enumerate() {
            for (&lj, &rj) in left.iter().zip(&right).skip(a) {
                if g.get(li, lj) != g.get(ri, rj) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

pub fn gen_compensated_gaussian(
    spec: &CompensatedGaussianSpec,
    n: usize,
    stream: &mut Stream,
) -> Result<PathSample> {
    spec.validate()?;
    check_n(n)?;
    spec.check_len(n)?;
    let c = spec.c;
    let mut z = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut partial = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    let mut s = 0.0;
    for k in 1..=n {
        let zk = ScalarDist::Normal {
            mean: 0.0,
            variance: spec.b(k) - spec.b(k - 1),
        }
        .sample_valid(stream);
        let uk = ScalarDist::Normal {
            mean: 0.0,
            variance: c - spec.b(k),
        }
        .sample_valid(stream);
        s += zk;
        z.push(zk);
        u.push(uk);
        partial.push(s);
        x.push(s + uk);
    }
    // Σ_{i>n} Z_i, so that S_n + tail is the almost-sure limit of X_k.
    let tail = ScalarDist::Normal {
        mean: 0.0,
        variance: c - spec.b(n),
    }
    .sample_valid(stream);
    let means: Vec<f64> = std::iter::once(0.0)
        .chain(partial.iter().copied())
        .collect();
    let variances: Vec<f64> = (0..=n).map(|k| c - spec.b(k)).collect();
    Ok(PathSample::new(
        Family::CompensatedGaussian,
        x,
        Latent::CompensatedGaussian {
            c,
            b: (1..=n).map(|k| spec.b(k)).collect(),
            z,
            u,
            partial_sums: partial,
            tail,
        },
        PredictiveTrack::Normal { means, variances },
    ))
}

// ---------------------------------------------------------------------------
// Reinforced urn

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reinforcement {
    /// `d_1, d_2, …`; the last entry repeats forever.
    Deterministic { d: Vec<u64> },
    /// `d_n = d[(n - 1) mod len]`.
    Cyclic { d: Vec<u64> },
    /// `d_n` i.i.d. from a `Discrete` law on positive integers, independent
    /// of everything drawn before step `n`.
    Iid { dist: ScalarDist },
    /// `d_1 = first`, then `d_n` depends on the colour drawn at step `n-1`.
    PathDependent {
        first: u64,
        after_white: u64,
        after_red: u64,
    },
}

impl Reinforcement {
    pub fn constant(d: u64) -> Self {
        Reinforcement::Deterministic { d: vec![d] }
    }

    /// Deterministic reinforcement at step `k` (1-based) given the previous
    /// colour, or `None` for i.i.d. reinforcement.
    pub fn deterministic_at(&self, k: usize, prev: Option<bool>) -> Option<u64> {
        match self {
            Reinforcement::Deterministic { d } => Some(d[(k - 1).min(d.len() - 1)]),
            Reinforcement::Cyclic { d } => Some(d[(k - 1) % d.len()]),
            Reinforcement::PathDependent {
                first,
                after_white,
                after_red,
            } => Some(match prev {
                None => *first,
                Some(true) => *after_white,
                Some(false) => *after_red,
            }),
            Reinforcement::Iid { .. } => None,
        }
    }
}

/// Urn with `white` white and `red` red balls. `X_n = 1` when white is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyaUrnSpec {
    pub white: u64,
    pub red: u64,
    pub reinforcement: Reinforcement,
}

impl PolyaUrnSpec {
    pub fn new(white: u64, red: u64, reinforcement: Reinforcement) -> Self {
        Self {
            white,
            red,
            reinforcement,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.white == 0 || self.red == 0 {
            return Err(Error::Parameter(
                "urn needs at least one ball of each colour".into(),
            ));
        }
        match &self.reinforcement {
            Reinforcement::Deterministic { d } | Reinforcement::Cyclic { d } => {
                if d.is_empty() || d.contains(&0) {
                    return Err(Error::Parameter(
                        "reinforcements must be a nonempty list of positive integers".into(),
                    ));
                }
            }
            Reinforcement::PathDependent {
                first,
                after_white,
                after_red,
            } => {
                if [first, after_white, after_red].iter().any(|d| **d == 0) {
                    return Err(Error::Parameter("reinforcements must be positive".into()));
                }
            }
            Reinforcement::Iid { dist } => match dist {
                ScalarDist::Discrete { weights } if weights.first() == Some(&0.0) => {
                    dist.validate()?
                }
                _ => {
                    return Err(Error::Parameter(
                        "i.i.d. reinforcement must be a discrete law with no mass at 0".into(),
                    ))
                }
            },
        }
        Ok(())
    }

    /// `δ = Var[d_1] / E[d_1]²`; zero for non-random reinforcement.
    pub fn delta(&self) -> f64 {
        match &self.reinforcement {
            Reinforcement::Iid { dist } => {
                let m = dist.mean();
                dist.variance() / (m * m)
            }
            _ => 0.0,
        }
    }
}

/// Exact nonnegative rational, serialized as `{"num": .., "den": ..}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Self {
        let g = num.gcd(&den).max(1);
        Self {
            num: num / g,
            den: den / g,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

pub fn gen_polya(spec: &PolyaUrnSpec, n: usize, stream: &mut Stream) -> Result<PathSample> {
    spec.validate()?;
    check_n(n)?;
    let mut white = spec.white;
    let mut total = spec.white + spec.red;
    let mut x = Vec::with_capacity(n);
    let mut ds = Vec::with_capacity(n);
    let mut whites = Vec::with_capacity(n + 1);
    let mut totals = Vec::with_capacity(n + 1);
    whites.push(white);
    totals.push(total);
    let mut prev = None;
    for k in 1..=n {
        let d = match spec.reinforcement.deterministic_at(k, prev) {
            Some(d) => d,
            None => match &spec.reinforcement {
                Reinforcement::Iid { dist } => dist.sample_valid(stream) as u64,
                _ => unreachable!("only i.i.d. reinforcement is random"),
            },
        };
        let is_white = stream.random_range(0..total) < white;
        if is_white {
            white += d;
        }
        total += d;
        x.push(if is_white { 1.0 } else { 0.0 });
        ds.push(d);
        whites.push(white);
        totals.push(total);
        prev = Some(is_white);
    }
    let p: Vec<f64> = whites
        .iter()
        .zip(&totals)
        .map(|(w, t)| *w as f64 / *t as f64)
        .collect();
    Ok(PathSample::new(
        Family::PolyaUrn,
        x,
        Latent::PolyaUrn {
            white: spec.white,
            red: spec.red,
            d: ds,
            white_weight: whites,
            total_weight: totals,
        },
        PredictiveTrack::Bernoulli { p },
    ))
}

// ---------------------------------------------------------------------------
// De Finetti mixtures and stopped exchangeable sequences

/// Conditional law of one observation given the latent parameter `θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// `Bernoulli(θ)`.
    Bernoulli,
    /// `Normal(θ, variance)`.
    NormalMean { variance: f64 },
    /// `dist`, ignoring `θ` (an i.i.d. sequence).
    Fixed { dist: ScalarDist },
}

impl Kernel {
    pub fn law(&self, theta: f64) -> ScalarDist {
        match self {
            Kernel::Bernoulli => ScalarDist::Bernoulli { p: theta },
            Kernel::NormalMean { variance } => ScalarDist::Normal {
                mean: theta,
                variance: *variance,
            },
            Kernel::Fixed { dist } => dist.clone(),
        }
    }
}

/// `θ ~ mixing`, then `Z_1, Z_2, …` i.i.d. from `kernel(θ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeFinettiSpec {
    pub mixing: ScalarDist,
    pub kernel: Kernel,
}

impl DeFinettiSpec {
    pub fn iid(dist: ScalarDist) -> Self {
        Self {
            mixing: ScalarDist::point_mass(0.0),
            kernel: Kernel::Fixed { dist },
        }
    }

    pub fn beta_bernoulli(a: f64, b: f64) -> Self {
        Self {
            mixing: ScalarDist::Beta { a, b },
            kernel: Kernel::Bernoulli,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.mixing.validate()?;
        match &self.kernel {
            Kernel::Bernoulli => {
                let inside = match &self.mixing {
                    ScalarDist::Beta { .. } | ScalarDist::Bernoulli { .. } => true,
                    ScalarDist::Uniform { lo, hi } => *lo >= 0.0 && *hi <= 1.0,
                    ScalarDist::Normal { mean, variance } => {
                        *variance == 0.0 && (0.0..=1.0).contains(mean)
                    }
                    ScalarDist::Discrete { weights } => weights.len() <= 2,
                };
                if !inside {
                    return Err(Error::Parameter(
                        "Bernoulli kernel needs a mixing law on [0, 1]".into(),
                    ));
                }
            }
            Kernel::NormalMean { variance } => {
                if !(*variance >= 0.0 && variance.is_finite()) {
                    return Err(Error::Parameter(
                        "kernel variance must be nonnegative".into(),
                    ));
                }
            }
            Kernel::Fixed { dist } => dist.validate()?,
        }
        Ok(())
    }

    /// Predictive laws `P(Z_{k+1} ∈ · | Z_1..Z_k)` for `k = 0..=z.len()`.
    fn predictive(&self, z: &[f64]) -> PredictiveTrack {
        let n = z.len();
        if let Kernel::Fixed { dist } = &self.kernel {
            return PredictiveTrack::Fixed(dist.clone());
        }
        if let Some(atoms) = self.mixing.atoms() {
            if atoms.len() == 1 {
                return PredictiveTrack::Fixed(self.kernel.law(atoms[0].0));
            }
        }
        match (&self.mixing, &self.kernel) {
            (ScalarDist::Beta { a, b }, Kernel::Bernoulli) => {
                let mut s = 0.0;
                let mut p = Vec::with_capacity(n + 1);
                p.push(a / (a + b));
                for (k, zk) in z.iter().enumerate() {
                    s += zk;
                    p.push((a + s) / (a + b + (k + 1) as f64));
                }
                PredictiveTrack::Bernoulli { p }
            }
            (ScalarDist::Normal { mean, variance: v }, Kernel::NormalMean { variance: s2 })
                if *s2 > 0.0 =>
            {
                let mut sum = 0.0;
                let mut means = Vec::with_capacity(n + 1);
                let mut variances = Vec::with_capacity(n + 1);
                for k in 0..=n {
                    let precision = 1.0 / v + k as f64 / s2;
                    means.push((mean / v + sum / s2) / precision);
                    variances.push(1.0 / precision + s2);
                    if k < n {
                        sum += z[k];
                    }
                }
                PredictiveTrack::Normal { means, variances }
            }
            _ => PredictiveTrack::Unavailable,
        }
    }
}

pub fn gen_definetti(spec: &DeFinettiSpec, n: usize, stream: &mut Stream) -> Result<PathSample> {
    spec.validate()?;
    check_n(n)?;
    let theta = spec.mixing.sample_valid(stream);
    let law = spec.kernel.law(theta);
    let x: Vec<f64> = (0..n).map(|_| law.sample_valid(stream)).collect();
    let track = spec.predictive(&x);
    Ok(
        PathSample::new(Family::DeFinetti, x, Latent::DeFinetti { theta }, track)
            .with_kernel(&spec.kernel),
    )
}

/// Law of the stopping index `T ∈ {1, 2, …, ∞}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StopLaw {
    /// `P(T = k) = p (1-p)^{k-1}`.
    Geometric {
        p: f64,
    },
    Fixed {
        t: u64,
    },
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopIndex {
    Finite(u64),
    Infinite,
}

impl StopIndex {
    pub fn finite(self) -> Option<u64> {
        match self {
            StopIndex::Finite(t) => Some(t),
            StopIndex::Infinite => None,
        }
    }

    fn stopped_by(self, k: usize) -> bool {
        matches!(self, StopIndex::Finite(t) if t <= k as u64)
    }
}

impl StopLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            StopLaw::Geometric { p } if !(*p > 0.0 && *p <= 1.0) => Err(Error::Parameter(format!(
                "geometric stop needs 0 < p <= 1, got {p}"
            ))),
            StopLaw::Fixed { t: 0 } => {
                Err(Error::Parameter("stop index must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    fn sample(&self, stream: &mut Stream) -> StopIndex {
        match self {
            StopLaw::Never => StopIndex::Infinite,
            StopLaw::Fixed { t } => StopIndex::Finite(*t),
            StopLaw::Geometric { p } => {
                if *p >= 1.0 {
                    return StopIndex::Finite(1);
                }
                // Inversion: T = 1 + floor(ln U / ln(1-p)).
                let u: f64 = 1.0 - stream.random::<f64>();
                let t = 1.0 + (u.ln() / (1.0 - p).ln()).floor();
                if t.is_finite() && t < u64::MAX as f64 {
                    StopIndex::Finite(t as u64)
                } else {
                    StopIndex::Finite(u64::MAX)
                }
            }
        }
    }
}

/// `X_n = Z_{T∧n}` with `Z` exchangeable and `T` independent of `Z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppedExchangeableSpec {
    pub base: DeFinettiSpec,
    pub stop: StopLaw,
}

pub fn gen_stopped_exchangeable(
    spec: &StoppedExchangeableSpec,
    n: usize,
    stream: &mut Stream,
) -> Result<PathSample> {
    spec.base.validate()?;
    spec.stop.validate()?;
    check_n(n)?;
    let theta = spec.base.mixing.sample_valid(stream);
    let law = spec.base.kernel.law(theta);
    let z: Vec<f64> = (0..n).map(|_| law.sample_valid(stream)).collect();
    let stop = spec.stop.sample(stream);
    let x: Vec<f64> = (1..=n)
        .map(|k| {
            let idx = match stop {
                StopIndex::Finite(t) if t < k as u64 => t as usize,
                _ => k,
            };
            z[idx - 1]
        })
        .collect();
    // Z_T itself when T lies beyond the generated horizon.
    let terminal = match stop {
        StopIndex::Finite(t) if t as usize <= n => Some(z[t as usize - 1]),
        StopIndex::Finite(_) => Some(law.sample_valid(stream)),
        StopIndex::Infinite => None,
    };
    // G_k carries Z_1..Z_k and whether T <= k. Before the stop the base
    // posterior applies, afterwards X_{k+1} = X_k.
    let base = spec.base.predictive(&z);
    let track = base.stopped(&x, |k| stop.stopped_by(k));
    Ok(PathSample::new(
        Family::StoppedExchangeable,
        x,
        Latent::StoppedExchangeable {
            theta,
            stop,
            z,
            terminal,
        },
        track,
    )
    .with_kernel(&spec.base.kernel))
}

// ---------------------------------------------------------------------------
// Path samples

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    CompensatedGaussian,
    PolyaUrn,
    StoppedExchangeable,
    DeFinetti,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::CompensatedGaussian => "compensated_gaussian",
            Family::PolyaUrn => "polya_urn",
            Family::StoppedExchangeable => "stopped_exchangeable",
            Family::DeFinetti => "de_finetti",
        }
    }
}

/// Family-specific latent variables. Sequences are indexed from step 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Latent {
    CompensatedGaussian {
        c: f64,
        b: Vec<f64>,
        z: Vec<f64>,
        u: Vec<f64>,
        partial_sums: Vec<f64>,
        /// `Σ_{i>n} Z_i`.
        tail: f64,
    },
    PolyaUrn {
        white: u64,
        red: u64,
        d: Vec<u64>,
        /// White weight after `k` draws, `k = 0..=n`.
        white_weight: Vec<u64>,
        total_weight: Vec<u64>,
    },
    StoppedExchangeable {
        theta: f64,
        stop: StopIndex,
        z: Vec<f64>,
        /// `Z_T` for finite `T`.
        terminal: Option<f64>,
    },
    DeFinetti {
        theta: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum PredictiveTrack {
    Normal {
        means: Vec<f64>,
        variances: Vec<f64>,
    },
    Bernoulli {
        p: Vec<f64>,
    },
    Fixed(ScalarDist),
    General(Vec<ScalarDist>),
    Unavailable,
}

impl PredictiveTrack {
    fn law(&self, k: usize) -> Option<ScalarDist> {
        match self {
            PredictiveTrack::Normal { means, variances } => Some(ScalarDist::Normal {
                mean: means[k],
                variance: variances[k],
            }),
            PredictiveTrack::Bernoulli { p } => Some(ScalarDist::Bernoulli { p: p[k] }),
            PredictiveTrack::Fixed(d) => Some(d.clone()),
            PredictiveTrack::General(laws) => Some(laws[k].clone()),
            PredictiveTrack::Unavailable => None,
        }
    }

    fn mean(&self, k: usize) -> Option<f64> {
        match self {
            PredictiveTrack::Normal { means, .. } => Some(means[k]),
            PredictiveTrack::Bernoulli { p } => Some(p[k]),
            PredictiveTrack::Fixed(d) => Some(d.mean()),
            PredictiveTrack::General(laws) => Some(laws[k].mean()),
            PredictiveTrack::Unavailable => None,
        }
    }

    /// Replaces the law at step `k` by the point mass at `x_k` once `stopped(k)`.
    fn stopped(self, x: &[f64], stopped: impl Fn(usize) -> bool) -> Self {
        let n = x.len();
        match self {
            PredictiveTrack::Unavailable => PredictiveTrack::Unavailable,
            PredictiveTrack::Bernoulli { mut p } => {
                for k in 1..=n {
                    if stopped(k) {
                        p[k] = x[k - 1];
                    }
                }
                PredictiveTrack::Bernoulli { p }
            }
            PredictiveTrack::Normal {
                mut means,
                mut variances,
            } => {
                for k in 1..=n {
                    if stopped(k) {
                        means[k] = x[k - 1];
                        variances[k] = 0.0;
                    }
                }
                PredictiveTrack::Normal { means, variances }
            }
            other => {
                let laws = (0..=n)
                    .map(|k| {
                        if k > 0 && stopped(k) {
                            ScalarDist::point_mass(x[k - 1])
                        } else {
                            other.law(k).expect("available track")
                        }
                    })
                    .collect();
                PredictiveTrack::General(laws)
            }
        }
    }

    fn truncated(&self, m: usize) -> Self {
        match self {
            PredictiveTrack::Normal { means, variances } => PredictiveTrack::Normal {
                means: means[..=m].to_vec(),
                variances: variances[..=m].to_vec(),
            },
            PredictiveTrack::Bernoulli { p } => PredictiveTrack::Bernoulli {
                p: p[..=m].to_vec(),
            },
            PredictiveTrack::General(laws) => PredictiveTrack::General(laws[..=m].to_vec()),
            other => other.clone(),
        }
    }
}

/// One realized trajectory `X_1..X_n` with its filtration content.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSample {
    pub family: Family,
    pub x: Vec<f64>,
    pub latent: Latent,
    /// `a_k = E[X_{k+1} | G_k]` for `k = 0..=n`, when available.
    pub predictive_mean: Option<Vec<f64>>,
    #[serde(skip)]
    track: PredictiveTrack,
    #[serde(skip)]
    kernel: Option<Kernel>,
}

impl PathSample {
    fn new(family: Family, x: Vec<f64>, latent: Latent, track: PredictiveTrack) -> Self {
        let predictive_mean = (0..=x.len())
            .map(|k| track.mean(k))
            .collect::<Option<Vec<f64>>>();
        Self {
            family,
            x,
            latent,
            predictive_mean,
            track,
            kernel: None,
        }
    }

    fn with_kernel(mut self, kernel: &Kernel) -> Self {
        self.kernel = Some(kernel.clone());
        self
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn has_predictive(&self) -> bool {
        !matches!(self.track, PredictiveTrack::Unavailable)
    }

    /// `P(X_{k+1} ∈ · | G_k)` for `k <= n`.
    pub fn predictive_law(&self, k: usize) -> Result<ScalarDist> {
        if k > self.len() {
            return Err(Error::Index(format!(
                "step {k} beyond path length {}",
                self.len()
            )));
        }
        self.track.law(k).ok_or_else(|| {
            Error::UnsupportedFamily(format!(
                "{} path has no closed-form predictive",
                self.family.name()
            ))
        })
    }

    /// `P(X_{k+1} <= t | G_k)`.
    pub fn predictive_cdf(&self, k: usize, t: f64) -> Result<f64> {
        Ok(self.predictive_law(k)?.cdf(t))
    }

    /// Exact rational predictive mean of an urn path.
    pub fn exact_predictive(&self, k: usize) -> Option<Fraction> {
        match &self.latent {
            Latent::PolyaUrn {
                white_weight,
                total_weight,
                ..
            } => Some(Fraction::new(*white_weight.get(k)?, *total_weight.get(k)?)),
            _ => None,
        }
    }

    /// The directing law `α` of the path when the generator knows it exactly.
    pub fn directing_law(&self) -> Option<ScalarDist> {
        match &self.latent {
            Latent::CompensatedGaussian {
                partial_sums, tail, ..
            } => Some(ScalarDist::point_mass(
                partial_sums.last().copied().unwrap_or(0.0) + tail,
            )),
            Latent::StoppedExchangeable {
                terminal: Some(v), ..
            } => Some(ScalarDist::point_mass(*v)),
            Latent::StoppedExchangeable { theta, .. } | Latent::DeFinetti { theta } => {
                self.kernel.as_ref().map(|k| k.law(*theta))
            }
            Latent::PolyaUrn { .. } => None,
        }
    }

    /// Per-path estimate of `V = lim a_n` for the identity.
    pub fn v_hat(&self) -> Option<f64> {
        match self.directing_law() {
            Some(law) => Some(law.mean()),
            None => self
                .predictive_mean
                .as_ref()
                .and_then(|a| a.last().copied()),
        }
    }

    /// The prefix `X_1..X_m` with matching latent state and predictive laws.
    pub fn truncated(&self, m: usize) -> Result<PathSample> {
        if m == 0 || m > self.len() {
            return Err(Error::Size(format!(
                "cannot truncate a path of length {} to {m}",
                self.len()
            )));
        }
        let latent = match &self.latent {
            Latent::CompensatedGaussian {
                c,
                b,
                z,
                u,
                partial_sums,
                tail,
            } => Latent::CompensatedGaussian {
                c: *c,
                b: b[..m].to_vec(),
                z: z[..m].to_vec(),
                u: u[..m].to_vec(),
                partial_sums: partial_sums[..m].to_vec(),
                tail: partial_sums[self.len() - 1] - partial_sums[m - 1] + tail,
            },
            Latent::PolyaUrn {
                white,
                red,
                d,
                white_weight,
                total_weight,
            } => Latent::PolyaUrn {
                white: *white,
                red: *red,
                d: d[..m].to_vec(),
                white_weight: white_weight[..=m].to_vec(),
                total_weight: total_weight[..=m].to_vec(),
            },
            Latent::StoppedExchangeable {
                theta,
                stop,
                z,
                terminal,
            } => Latent::StoppedExchangeable {
                theta: *theta,
                stop: *stop,
                z: z[..m].to_vec(),
                terminal: *terminal,
            },
            Latent::DeFinetti { theta } => Latent::DeFinetti { theta: *theta },
        };
        let mut out = PathSample::new(
            self.family,
            self.x[..m].to_vec(),
            latent,
            self.track.truncated(m),
        );
        out.kernel = self.kernel.clone();
        Ok(out)
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::Size("path length must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Declarative description of one generator, tagged by `"family"` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProcessSpec {
    CompensatedGaussian(CompensatedGaussianSpec),
    PolyaUrn(PolyaUrnSpec),
    StoppedExchangeable(StoppedExchangeableSpec),
    DeFinetti(DeFinettiSpec),
}

impl ProcessSpec {
    pub fn generate(&self, n: usize, stream: &mut Stream) -> Result<PathSample> {
        match self {
            ProcessSpec::CompensatedGaussian(s) => gen_compensated_gaussian(s, n, stream),
            ProcessSpec::PolyaUrn(s) => gen_polya(s, n, stream),
            ProcessSpec::StoppedExchangeable(s) => gen_stopped_exchangeable(s, n, stream),
            ProcessSpec::DeFinetti(s) => gen_definetti(s, n, stream),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ProcessSpec::CompensatedGaussian(s) => s.validate(),
            ProcessSpec::PolyaUrn(s) => s.validate(),
            ProcessSpec::StoppedExchangeable(s) => {
                s.base.validate()?;
                s.stop.validate()
            }
            ProcessSpec::DeFinetti(s) => s.validate(),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            ProcessSpec::CompensatedGaussian(_) => Family::CompensatedGaussian,
            ProcessSpec::PolyaUrn(_) => Family::PolyaUrn,
            ProcessSpec::StoppedExchangeable(_) => Family::StoppedExchangeable,
            ProcessSpec::DeFinetti(_) => Family::DeFinetti,
        }
    }
}
