//! Deterministic random streams and the scalar laws used by every generator.
//!
//! A [`Stream`] is addressed by a [`StreamKey`] `(seed, replica, lane)`. The
//! seed and replica form the ChaCha8 key and the lane selects the ChaCha
//! stream id, so any stream can be opened directly without fast-forwarding
//! through its predecessors.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::{beta::beta_reg, erf::erfc};

use crate::error::{Error, Result};

const KEY_TAG: &[u8; 8] = b"cidlab\x00\x01";

/// Address of a reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub seed: u64,
    pub replica: u64,
    pub lane: u32,
}

impl StreamKey {
    pub fn new(seed: u64, replica: u64, lane: u32) -> Self {
        Self {
            seed,
            replica,
            lane,
        }
    }

    pub fn with_lane(self, lane: u32) -> Self {
        Self { lane, ..self }
    }
}

/// Single-owner random stream. Implements [`RngCore`] so any `rand`
/// distribution can draw from it.
#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl RngCore for Stream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

pub fn open_stream(key: StreamKey) -> Stream {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&key.seed.to_le_bytes());
    seed[8..16].copy_from_slice(&key.replica.to_le_bytes());
    seed[16..24].copy_from_slice(KEY_TAG);
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(u64::from(key.lane));
    Stream { rng }
}

/// Scalar probability law.
///
/// `Normal` with zero variance is the point mass at its mean. `Discrete`
/// puts mass proportional to `weights[i]` on the integer `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarDist {
    Normal { mean: f64, variance: f64 },
    Bernoulli { p: f64 },
    Beta { a: f64, b: f64 },
    Uniform { lo: f64, hi: f64 },
    Discrete { weights: Vec<f64> },
}

impl ScalarDist {
    pub fn point_mass(value: f64) -> Self {
        ScalarDist::Normal {
            mean: value,
            variance: 0.0,
        }
    }

    pub fn standard_normal() -> Self {
        ScalarDist::Normal {
            mean: 0.0,
            variance: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            ScalarDist::Normal { mean, variance } => {
                mean.is_finite() && *variance >= 0.0 && variance.is_finite()
            }
            ScalarDist::Bernoulli { p } => (0.0..=1.0).contains(p),
            ScalarDist::Beta { a, b } => *a > 0.0 && *b > 0.0 && a.is_finite() && b.is_finite(),
            ScalarDist::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            ScalarDist::Discrete { weights } => {
                !weights.is_empty()
                    && weights.iter().all(|w| *w >= 0.0 && w.is_finite())
                    && weights.iter().sum::<f64>() > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid scalar law {self:?}")))
        }
    }

    pub fn is_point_mass(&self) -> bool {
        match self {
            ScalarDist::Normal { variance, .. } => *variance == 0.0,
            ScalarDist::Bernoulli { p } => *p == 0.0 || *p == 1.0,
            ScalarDist::Discrete { weights } => weights.iter().filter(|w| **w > 0.0).count() == 1,
            _ => false,
        }
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn variance(&self) -> f64 {
        match self {
            ScalarDist::Normal { variance, .. } => *variance,
            ScalarDist::Bernoulli { p } => p * (1.0 - p),
            ScalarDist::Beta { a, b } => a * b / ((a + b) * (a + b) * (a + b + 1.0)),
            ScalarDist::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
            ScalarDist::Discrete { .. } => {
                let m = self.moment(1);
                self.moment(2) - m * m
            }
        }
    }

    /// Raw moment `E[X^p]`.
    pub fn moment(&self, p: u32) -> f64 {
        if p == 0 {
            return 1.0;
        }
        match self {
            ScalarDist::Normal { mean, variance } => {
                // E[X^k] = mean E[X^{k-1}] + (k-1) variance E[X^{k-2}]
                let (mut prev, mut cur) = (1.0, *mean);
                for k in 2..=p {
                    let next = mean * cur + f64::from(k - 1) * variance * prev;
                    prev = cur;
                    cur = next;
                }
                cur
            }
            ScalarDist::Bernoulli { p: prob } => *prob,
            ScalarDist::Beta { a, b } => (0..p)
                .map(|j| (a + f64::from(j)) / (a + b + f64::from(j)))
                .product(),
            ScalarDist::Uniform { lo, hi } => {
                let q = i32::try_from(p).unwrap_or(i32::MAX) + 1;
                (hi.powi(q) - lo.powi(q)) / (f64::from(q) * (hi - lo))
            }
            ScalarDist::Discrete { weights } => {
                let total: f64 = weights.iter().sum();
                let q = i32::try_from(p).unwrap_or(i32::MAX);
                weights
                    .iter()
                    .enumerate()
                    .map(|(i, w)| w * (i as f64).powi(q))
                    .sum::<f64>()
                    / total
            }
        }
    }

    /// `P(X <= t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            ScalarDist::Normal { mean, variance } => {
                if *variance == 0.0 {
                    if t >= *mean {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    0.5 * erfc(-(t - mean) / (variance.sqrt() * std::f64::consts::SQRT_2))
                }
            }
            ScalarDist::Bernoulli { p } => {
                if t < 0.0 {
                    0.0
                } else if t < 1.0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
            ScalarDist::Beta { a, b } => {
                if t <= 0.0 {
                    0.0
                } else if t >= 1.0 {
                    1.0
                } else {
                    beta_reg(*a, *b, t)
                }
            }
            ScalarDist::Uniform { lo, hi } => ((t - lo) / (hi - lo)).clamp(0.0, 1.0),
            ScalarDist::Discrete { weights } => {
                let total: f64 = weights.iter().sum();
                let below: f64 = weights
                    .iter()
                    .enumerate()
                    .take_while(|(i, _)| (*i as f64) <= t)
                    .map(|(_, w)| w)
                    .sum();
                below / total
            }
        }
    }

    /// Left limit `P(X < t)`.
    pub fn cdf_left(&self, t: f64) -> f64 {
        match self {
            ScalarDist::Normal { mean, variance } if *variance == 0.0 => {
                if t > *mean {
                    1.0
                } else {
                    0.0
                }
            }
            ScalarDist::Bernoulli { p } => {
                if t <= 0.0 {
                    0.0
                } else if t <= 1.0 {
                    1.0 - p
                } else {
                    1.0
                }
            }
            ScalarDist::Discrete { weights } => {
                let total: f64 = weights.iter().sum();
                let below: f64 = weights
                    .iter()
                    .enumerate()
                    .take_while(|(i, _)| (*i as f64) < t)
                    .map(|(_, w)| w)
                    .sum();
                below / total
            }
            _ => self.cdf(t),
        }
    }

    /// Atoms `(value, probability)` of a finitely supported law, zero-mass
    /// atoms omitted. `None` for laws with a continuous part.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            ScalarDist::Normal { mean, variance } if *variance == 0.0 => Some(vec![(*mean, 1.0)]),
            ScalarDist::Bernoulli { p } => Some(
                [(0.0, 1.0 - p), (1.0, *p)]
                    .into_iter()
                    .filter(|(_, m)| *m > 0.0)
                    .collect(),
            ),
            ScalarDist::Discrete { weights } => {
                let total: f64 = weights.iter().sum();
                Some(
                    weights
                        .iter()
                        .enumerate()
                        .filter(|(_, w)| **w > 0.0)
                        .map(|(i, w)| (i as f64, w / total))
                        .collect(),
                )
            }
            _ => None,
        }
    }

    /// Draws without re-validating parameters. Callers must have validated.
    pub(crate) fn sample_valid<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ScalarDist::Normal { mean, variance } => {
                if *variance == 0.0 {
                    *mean
                } else {
                    let z: f64 = StandardNormal.sample(rng);
                    mean + variance.sqrt() * z
                }
            }
            ScalarDist::Bernoulli { p } => {
                if rng.random::<f64>() < *p {
                    1.0
                } else {
                    0.0
                }
            }
            ScalarDist::Beta { a, b } => rand_distr::Beta::new(*a, *b)
                .expect("validated beta parameters")
                .sample(rng),
            ScalarDist::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            ScalarDist::Discrete { weights } => {
                let total: f64 = weights.iter().sum();
                let mut target = rng.random::<f64>() * total;
                let mut last = 0;
                for (i, w) in weights.iter().enumerate() {
                    if *w <= 0.0 {
                        continue;
                    }
                    last = i;
                    if target < *w {
                        return i as f64;
                    }
                    target -= w;
                }
                last as f64
            }
        }
    }
}

/// Draws one value from `dist`.
pub fn draw(stream: &mut Stream, dist: &ScalarDist) -> Result<f64> {
    dist.validate()?;
    Ok(dist.sample_valid(stream))
}

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn from_fn(n: usize, mut entry: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = entry(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self { n, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Matrix("matrix is not square".into()));
        }
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (rows[i][j], rows[j][i]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::Matrix(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.n.max(1))
            .take(self.n)
            .map(<[f64]>::to_vec)
            .collect()
    }
}

/// Diagonal-pivoted Cholesky factor `P Σ Pᵀ = L Lᵀ` of a PSD matrix,
/// truncated at its numerical rank.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    rank: usize,
    perm: Vec<usize>,
    // n x rank, row-major
    lower: Vec<f64>,
}

/// Relative tolerance for the PSD check, scaled by the largest diagonal entry.
pub const PSD_TOLERANCE: f64 = 1e-10;

impl CholeskyFactor {
    pub fn new(cov: &SymMatrix) -> Result<Self> {
        let n = cov.dim();
        let mut a = cov.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let max_diag = (0..n).map(|i| a[i * n + i]).fold(0.0_f64, f64::max);
        let tol = PSD_TOLERANCE * max_diag.max(f64::MIN_POSITIVE);
        if (0..n).any(|i| a[i * n + i] < -tol) {
            return Err(Error::Matrix("negative diagonal entry".into()));
        }
        let mut l = vec![0.0; n * n];
        let mut rank = n;
        for k in 0..n {
            let pivot = (k..n)
                .max_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]))
                .expect("non-empty pivot range");
            if pivot != k {
                swap_sym(&mut a, n, k, pivot);
                for c in 0..k {
                    l.swap(k * n + c, pivot * n + c);
                }
                perm.swap(k, pivot);
            }
            let d = a[k * n + k];
            if d <= tol {
                // Remaining Schur complement must vanish.
                for i in k..n {
                    for j in k..n {
                        let v = a[i * n + j];
                        if (i == j && v < -tol) || (i != j && v.abs() > tol) {
                            return Err(Error::Matrix(format!(
                                "matrix is not positive semidefinite (residual {v:e} at rank {k})"
                            )));
                        }
                    }
                }
                rank = k;
                break;
            }
            let root = d.sqrt();
            l[k * n + k] = root;
            for i in k + 1..n {
                l[i * n + k] = a[i * n + k] / root;
            }
            for i in k + 1..n {
                let lik = l[i * n + k];
                for j in k + 1..=i {
                    let v = a[i * n + j] - lik * l[j * n + k];
                    a[i * n + j] = v;
                    a[j * n + i] = v;
                }
            }
        }
        let lower = (0..n)
            .flat_map(|i| (0..rank).map(move |c| (i, c)))
            .map(|(i, c)| l[i * n + c])
            .collect();
        Ok(Self {
            n,
            rank,
            perm,
            lower,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn sample(&self, stream: &mut Stream) -> Vec<f64> {
        let z: Vec<f64> = (0..self.rank)
            .map(|_| StandardNormal.sample(stream))
            .collect();
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let row = &self.lower[i * self.rank..(i + 1) * self.rank];
            out[self.perm[i]] = row.iter().zip(&z).map(|(a, b)| a * b).sum();
        }
        out
    }
}

fn swap_sym(a: &mut [f64], n: usize, p: usize, q: usize) {
    for c in 0..n {
        a.swap(p * n + c, q * n + c);
    }
    for r in 0..n {
        a.swap(r * n + p, r * n + q);
    }
}

/// Draws a zero-mean Gaussian vector with covariance `cov`.
pub fn draw_gaussian_vector(stream: &mut Stream, cov: &SymMatrix) -> Result<Vec<f64>> {
    Ok(CholeskyFactor::new(cov)?.sample(stream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::summary::{covariance_matrix, mean, variance};

    fn key(replica: u64, lane: u32) -> StreamKey {
        StreamKey::new(7, replica, lane)
    }

    #[test]
    fn same_key_same_draws() {
        let mut a = open_stream(key(3, 1));
        let mut b = open_stream(key(3, 1));
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn replicas_differ() {
        let mut a = open_stream(key(0, 0));
        let mut b = open_stream(key(1, 0));
        let da: Vec<u64> = (0..1000).map(|_| a.next_u64()).collect();
        let db: Vec<u64> = (0..1000).map(|_| b.next_u64()).collect();
        assert_ne!(da, db);
    }

    #[test]
    fn lanes_are_uncorrelated() {
        let mut a = open_stream(key(0, 0));
        let mut b = open_stream(key(0, 1));
        let n = 100_000;
        let xa: Vec<f64> = (0..n).map(|_| a.random::<f64>()).collect();
        let xb: Vec<f64> = (0..n).map(|_| b.random::<f64>()).collect();
        let (ma, mb) = (mean(&xa), mean(&xb));
        let cov: f64 = xa
            .iter()
            .zip(&xb)
            .map(|(x, y)| (x - ma) * (y - mb))
            .sum::<f64>()
            / n as f64;
        let corr = cov / (variance(&xa) * variance(&xb)).sqrt();
        assert!(corr.abs() < 0.01, "corr = {corr}");
    }

    #[test]
    fn degenerate_draws_are_exact() {
        let mut s = open_stream(key(0, 0));
        for _ in 0..100 {
            assert_eq!(
                draw(
                    &mut s,
                    &ScalarDist::Normal {
                        mean: 0.0,
                        variance: 0.0
                    }
                )
                .unwrap(),
                0.0
            );
            assert_eq!(draw(&mut s, &ScalarDist::point_mass(2.5)).unwrap(), 2.5);
            assert_eq!(
                draw(&mut s, &ScalarDist::Bernoulli { p: 1.0 }).unwrap(),
                1.0
            );
            assert_eq!(
                draw(&mut s, &ScalarDist::Bernoulli { p: 0.0 }).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn beta_one_one_mean() {
        let mut s = open_stream(key(0, 2));
        let xs: Vec<f64> = (0..100_000)
            .map(|_| draw(&mut s, &ScalarDist::Beta { a: 1.0, b: 1.0 }).unwrap())
            .collect();
        assert!((mean(&xs) - 0.5).abs() < 0.01);
    }

    #[test]
    fn invalid_parameters_rejected() {
        let mut s = open_stream(key(0, 0));
        let bad = [
            ScalarDist::Normal {
                mean: 0.0,
                variance: -1.0,
            },
            ScalarDist::Bernoulli { p: 1.5 },
            ScalarDist::Beta { a: 0.0, b: 1.0 },
            ScalarDist::Uniform { lo: 1.0, hi: 1.0 },
            ScalarDist::Discrete {
                weights: vec![0.0, 0.0],
            },
            ScalarDist::Discrete {
                weights: vec![1.0, -0.5],
            },
        ];
        for d in bad {
            assert!(
                matches!(draw(&mut s, &d), Err(Error::Parameter(_))),
                "{d:?}"
            );
        }
    }

    #[test]
    fn first_two_moments_within_five_standard_errors() {
        let laws = [
            ScalarDist::Normal {
                mean: 1.5,
                variance: 2.0,
            },
            ScalarDist::Bernoulli { p: 0.3 },
            ScalarDist::Beta { a: 2.0, b: 5.0 },
            ScalarDist::Uniform { lo: -1.0, hi: 3.0 },
            ScalarDist::Discrete {
                weights: vec![0.0, 1.0, 3.0],
            },
        ];
        let n = 100_000;
        for (lane, law) in laws.iter().enumerate() {
            let mut s = open_stream(key(11, lane as u32));
            let xs: Vec<f64> = (0..n).map(|_| draw(&mut s, law).unwrap()).collect();
            let m = law.mean();
            let v = law.variance();
            let se_mean = (v / n as f64).sqrt();
            assert!((mean(&xs) - m).abs() < 5.0 * se_mean, "{law:?} mean");
            // Var of (X - m)^2 is the fourth central moment minus v^2.
            let c4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64;
            let se_var = ((c4 - v * v) / n as f64).sqrt();
            let sq = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
            assert!((sq - v).abs() < 5.0 * se_var, "{law:?} variance");
        }
    }

    #[test]
    fn cdf_and_left_limits() {
        let b = ScalarDist::Bernoulli { p: 0.25 };
        assert_eq!(b.cdf(0.0), 0.75);
        assert_eq!(b.cdf_left(0.0), 0.0);
        assert_eq!(b.cdf_left(1.0), 0.75);
        let n = ScalarDist::standard_normal();
        assert!((n.cdf(0.0) - 0.5).abs() < 1e-15);
        let got = n.cdf(1.959963984540054);
        assert!((got - 0.975).abs() < 1e-11, "{got}");
        let pm = ScalarDist::point_mass(1.0);
        assert_eq!((pm.cdf(1.0), pm.cdf_left(1.0)), (1.0, 0.0));
        let d = ScalarDist::Discrete {
            weights: vec![0.0, 1.0, 1.0],
        };
        assert_eq!((d.cdf(1.0), d.cdf_left(2.0), d.cdf(2.0)), (0.5, 0.5, 1.0));
        assert!((ScalarDist::Beta { a: 2.0, b: 2.0 }.cdf(0.5) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn normal_moment_recursion() {
        let n = ScalarDist::Normal {
            mean: 1.0,
            variance: 2.0,
        };
        // E[X^3] = m^3 + 3 m v, E[X^4] = m^4 + 6 m^2 v + 3 v^2
        assert!((n.moment(3) - 7.0).abs() < 1e-12);
        assert!((n.moment(4) - 25.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_gives_zero_vector() {
        let mut s = open_stream(key(0, 0));
        let m = SymMatrix::from_rows(&[vec![0.0]]).unwrap();
        assert_eq!(draw_gaussian_vector(&mut s, &m).unwrap(), vec![0.0]);
    }

    fn check_covariance(target: &SymMatrix, lane: u32) {
        let factor = CholeskyFactor::new(target).unwrap();
        let mut s = open_stream(key(5, lane));
        let draws: Vec<Vec<f64>> = (0..100_000).map(|_| factor.sample(&mut s)).collect();
        let cov = covariance_matrix(&draws);
        for i in 0..target.dim() {
            for j in 0..target.dim() {
                assert!(
                    (cov[i][j] - target.get(i, j)).abs() < 0.02,
                    "entry ({i},{j}): {} vs {}",
                    cov[i][j],
                    target.get(i, j)
                );
            }
        }
    }

    #[test]
    fn identity_covariance() {
        check_covariance(
            &SymMatrix::from_fn(3, |i, j| if i == j { 1.0 } else { 0.0 }),
            0,
        );
    }

    #[test]
    fn gamma_three_covariance() {
        let g = SymMatrix::from_rows(&[
            vec![1.0, 0.5, 0.5],
            vec![0.5, 1.0, 0.75],
            vec![0.5, 0.75, 1.0],
        ])
        .unwrap();
        check_covariance(&g, 1);
    }

    #[test]
    fn singular_psd_is_factored() {
        // rank one: v vᵀ with v = (1, 2, 0)
        let m = SymMatrix::from_rows(&[
            vec![1.0, 2.0, 0.0],
            vec![2.0, 4.0, 0.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let f = CholeskyFactor::new(&m).unwrap();
        assert_eq!(f.rank(), 1);
        let mut s = open_stream(key(0, 0));
        for _ in 0..10 {
            let v = f.sample(&mut s);
            assert!((v[1] - 2.0 * v[0]).abs() < 1e-12);
            assert_eq!(v[2], 0.0);
        }
    }

    #[test]
    fn indefinite_matrices_rejected() {
        for rows in [
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![vec![1.0, 2.0], vec![2.0, 1.0]],
            vec![vec![-1.0]],
        ] {
            let m = SymMatrix::from_rows(&rows).unwrap();
            assert!(
                matches!(CholeskyFactor::new(&m), Err(Error::Matrix(_))),
                "{rows:?}"
            );
        }
        assert!(SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]).is_err());
    }
}
