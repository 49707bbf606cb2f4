//! Limit laws: normal variance mixtures `N(0, L)` and the time-changed
//! Brownian bridge `G^F`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{draw_gaussian_vector, ScalarDist, Stream, SymMatrix};

/// Law of the random variance `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarianceLaw {
    Constant {
        value: f64,
    },
    Discrete {
        values: Vec<f64>,
        weights: Vec<f64>,
    },
    /// `δ V (1 - V)` with `V ~ mixing`.
    ScaledBernoulliVariance {
        delta: f64,
        mixing: ScalarDist,
    },
    /// Uniform draw from realized per-path values.
    Empirical {
        values: Vec<f64>,
    },
}

impl VarianceLaw {
    pub fn sample(&self, stream: &mut Stream) -> Result<f64> {
        let l = match self {
            VarianceLaw::Constant { value } => *value,
            VarianceLaw::Discrete { values, weights } => {
                if values.len() != weights.len() {
                    return Err(Error::Law("values and weights differ in length".into()));
                }
                let idx = ScalarDist::Discrete {
                    weights: weights.clone(),
                };
                idx.validate().map_err(|e| Error::Law(e.to_string()))?;
                values[idx.sample_valid(stream) as usize]
            }
            VarianceLaw::ScaledBernoulliVariance { delta, mixing } => {
                mixing.validate().map_err(|e| Error::Law(e.to_string()))?;
                let v = mixing.sample_valid(stream);
                delta * v * (1.0 - v)
            }
            VarianceLaw::Empirical { values } => {
                if values.is_empty() {
                    return Err(Error::Law("empty empirical variance law".into()));
                }
                values[stream.random_range(0..values.len())]
            }
        };
        if l < 0.0 || l.is_nan() {
            return Err(Error::Law(format!("sampled variance {l} is negative")));
        }
        Ok(l)
    }
}

/// `N(0, L)` mixed over the law of `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureNormalLaw {
    pub variance: VarianceLaw,
}

impl MixtureNormalLaw {
    pub fn constant(value: f64) -> Self {
        Self {
            variance: VarianceLaw::Constant { value },
        }
    }
}

pub fn sample_mixture_normal(law: &MixtureNormalLaw, stream: &mut Stream) -> Result<f64> {
    let l = law.variance.sample(stream)?;
    if l == 0.0 {
        return Ok(0.0);
    }
    let z: f64 = StandardNormal.sample(stream);
    Ok(l.sqrt() * z)
}

/// Law of the random distribution function `F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RandomDistributionFunction {
    Fixed {
        law: ScalarDist,
    },
    /// Bernoulli(V) with `V ~ mixing`.
    BernoulliMixed {
        mixing: ScalarDist,
    },
    /// Bernoulli(V) with `V` drawn uniformly from `values`.
    BernoulliEmpirical {
        values: Vec<f64>,
    },
    /// Normal(M, variance) with `M ~ mean`.
    NormalMixed {
        mean: ScalarDist,
        variance: f64,
    },
}

impl RandomDistributionFunction {
    pub fn sample(&self, stream: &mut Stream) -> Result<ScalarDist> {
        let law = match self {
            RandomDistributionFunction::Fixed { law } => law.clone(),
            RandomDistributionFunction::BernoulliMixed { mixing } => {
                mixing.validate()?;
                ScalarDist::Bernoulli {
                    p: mixing.sample_valid(stream).clamp(0.0, 1.0),
                }
            }
            RandomDistributionFunction::BernoulliEmpirical { values } => {
                if values.is_empty() {
                    return Err(Error::Law("empty list of success probabilities".into()));
                }
                ScalarDist::Bernoulli {
                    p: values[stream.random_range(0..values.len())],
                }
            }
            RandomDistributionFunction::NormalMixed { mean, variance } => {
                mean.validate()?;
                ScalarDist::Normal {
                    mean: mean.sample_valid(stream),
                    variance: *variance,
                }
            }
        };
        law.validate().map_err(|e| Error::Law(e.to_string()))?;
        Ok(law)
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Parameter("grid must be strictly increasing".into()));
    }
    Ok(())
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.iter().any(|u| !(0.0..=1.0).contains(u)) || levels.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Law(
            "distribution function values must be nondecreasing in [0, 1]".into(),
        ));
    }
    Ok(())
}

/// `Σ_ij = F(t_i ∧ t_j)(1 - F(t_i ∨ t_j))` from the values `F(t_i)`.
pub fn bridge_covariance(levels: &[f64]) -> Result<SymMatrix> {
    check_levels(levels)?;
    Ok(SymMatrix::from_fn(levels.len(), |i, j| {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        levels[lo] * (1.0 - levels[hi])
    }))
}

/// `G^F` on the grid given the values `F(t_i)`, sampled from the covariance.
pub fn sample_gf_levels(levels: &[f64], stream: &mut Stream) -> Result<Vec<f64>> {
    draw_gaussian_vector(stream, &bridge_covariance(levels)?)
}

pub fn sample_gf_path(f: &ScalarDist, grid: &[f64], stream: &mut Stream) -> Result<Vec<f64>> {
    check_grid(grid)?;
    let levels: Vec<f64> = grid.iter().map(|t| f.cdf(*t)).collect();
    sample_gf_levels(&levels, stream)
}

/// Brownian bridge at nondecreasing levels via `B(u) - u B(1)` with `B`
/// built from independent increments. Same law as [`sample_gf_levels`] at
/// linear cost.
pub fn bridge_at_levels(levels: &[f64], stream: &mut Stream) -> Result<Vec<f64>> {
    check_levels(levels)?;
    let mut b = Vec::with_capacity(levels.len());
    let mut prev = 0.0;
    let mut walk = 0.0;
    for &u in levels {
        let step = u - prev;
        if step > 0.0 {
            let z: f64 = StandardNormal.sample(stream);
            walk += step.sqrt() * z;
        }
        b.push(walk);
        prev = u;
    }
    let last = 1.0 - prev;
    let b1 = if last > 0.0 {
        let z: f64 = StandardNormal.sample(stream);
        walk + last.sqrt() * z
    } else {
        walk
    };
    Ok(levels
        .iter()
        .zip(&b)
        .map(|(&u, &bu)| {
            if u == 0.0 || u == 1.0 {
                0.0
            } else {
                bu - u * b1
            }
        })
        .collect())
}

/// `max_i |G^F(t_i)|` for one draw of `F`.
pub fn sample_gf_supnorm(
    f_law: &RandomDistributionFunction,
    grid: &[f64],
    stream: &mut Stream,
) -> Result<f64> {
    check_grid(grid)?;
    let f = f_law.sample(stream)?;
    let levels: Vec<f64> = grid.iter().map(|t| f.cdf(*t)).collect();
    let g = bridge_at_levels(&levels, stream)?;
    Ok(g.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Distribution function of `sup_u |G⁰(u)|`.
pub fn kolmogorov_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < 1.0 {
        // Theta-function form, fast for small x:
        // K(x) = √(2π)/x Σ_{k≥1} exp(-(2k-1)² π² / (8x²))
        let mut sum = 0.0;
        for k in 1.. {
            let m = (2 * k - 1) as f64;
            let term = (-m * m * PI * PI / (8.0 * x * x)).exp();
            sum += term;
            if term < 1e-12 * sum.max(f64::MIN_POSITIVE) || term == 0.0 {
                break;
            }
        }
        return ((2.0 * PI).sqrt() / x * sum).min(1.0);
    }
    let mut sum = 0.0;
    for k in 1.. {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-12 {
            break;
        }
    }
    (1.0 - 2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ks::ks_one_sample;
    use crate::sampling::{open_stream, StreamKey};
    use crate::summary::{covariance_matrix, mean, variance};

    fn stream(lane: u32) -> Stream {
        open_stream(StreamKey::new(31, 0, lane))
    }

    #[test]
    fn zero_variance_mixture_is_exact_zero() {
        let mut s = stream(0);
        for _ in 0..100 {
            assert_eq!(
                sample_mixture_normal(&MixtureNormalLaw::constant(0.0), &mut s).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn mixture_variances() {
        let mut s = stream(1);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_mixture_normal(&MixtureNormalLaw::constant(4.0), &mut s).unwrap())
            .collect();
        assert!((variance(&xs) - 4.0).abs() < 0.1);
        let two = MixtureNormalLaw {
            variance: VarianceLaw::Discrete {
                values: vec![1.0, 4.0],
                weights: vec![1.0, 1.0],
            },
        };
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_mixture_normal(&two, &mut s).unwrap())
            .collect();
        assert!((variance(&xs) - 2.5).abs() < 0.08);
    }

    #[test]
    fn negative_variance_is_a_law_error() {
        let mut s = stream(0);
        let bad = MixtureNormalLaw {
            variance: VarianceLaw::Empirical { values: vec![-1.0] },
        };
        assert!(matches!(
            sample_mixture_normal(&bad, &mut s),
            Err(Error::Law(_))
        ));
        let bad = MixtureNormalLaw {
            variance: VarianceLaw::ScaledBernoulliVariance {
                delta: 1.0,
                mixing: ScalarDist::Normal {
                    mean: 2.0,
                    variance: 0.0,
                },
            },
        };
        assert!(matches!(
            sample_mixture_normal(&bad, &mut s),
            Err(Error::Law(_))
        ));
    }

    #[test]
    fn constant_mixture_is_scaled_normal() {
        let mut s = stream(2);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_mixture_normal(&MixtureNormalLaw::constant(2.0), &mut s).unwrap())
            .collect();
        let target = ScalarDist::Normal {
            mean: 0.0,
            variance: 2.0,
        };
        let d = ks_one_sample(&xs, |x| target.cdf(x)).unwrap();
        assert!(d < 1.63 / (1e5f64).sqrt(), "D = {d}");
    }

    #[test]
    fn gf_path_examples() {
        let mut s = stream(3);
        let uniform = ScalarDist::Uniform { lo: 0.0, hi: 1.0 };
        let grid = [-1.0, 0.25, 0.5, 2.0];
        let paths: Vec<Vec<f64>> = (0..20_000)
            .map(|_| sample_gf_path(&uniform, &grid, &mut s).unwrap())
            .collect();
        assert!(paths.iter().all(|p| p[0] == 0.0 && p[3] == 0.0));
        let at_half: Vec<f64> = paths.iter().map(|p| p[2]).collect();
        assert!((variance(&at_half) - 0.25).abs() < 0.015);
        let bern = ScalarDist::Bernoulli { p: 0.5 };
        let xs: Vec<f64> = (0..20_000)
            .map(|_| sample_gf_path(&bern, &[0.5], &mut s).unwrap()[0])
            .collect();
        assert!((variance(&xs) - 0.25).abs() < 0.015);
        assert!(matches!(bridge_covariance(&[0.5, 0.4]), Err(Error::Law(_))));
    }

    fn check_covariance(rows: &[Vec<f64>], levels: &[f64]) {
        let cov = covariance_matrix(rows);
        let sigma = bridge_covariance(levels).unwrap();
        let n = rows.len() as f64;
        for i in 0..levels.len() {
            for j in 0..levels.len() {
                let s = sigma.get(i, j);
                let se = ((sigma.get(i, i) * sigma.get(j, j) + s * s) / n).sqrt();
                assert!(
                    (cov[i][j] - s).abs() <= 5.0 * se + 1e-12,
                    "({i},{j}) {} vs {s}",
                    cov[i][j]
                );
            }
        }
    }

    #[test]
    fn gf_covariance_matches_sigma() {
        let normal = ScalarDist::Normal {
            mean: 0.0,
            variance: 1.0,
        };
        let grid = [-1.5, -0.5, 0.0, 0.7, 1.2];
        let levels: Vec<f64> = grid.iter().map(|t| normal.cdf(*t)).collect();
        let mut s = stream(4);
        let rows: Vec<Vec<f64>> = (0..100_000)
            .map(|_| sample_gf_path(&normal, &grid, &mut s).unwrap())
            .collect();
        check_covariance(&rows, &levels);
        let rows: Vec<Vec<f64>> = (0..100_000)
            .map(|_| bridge_at_levels(&levels, &mut s).unwrap())
            .collect();
        check_covariance(&rows, &levels);
    }

    #[test]
    fn degenerate_f_has_zero_sup() {
        let mut s = stream(5);
        let point = RandomDistributionFunction::Fixed {
            law: ScalarDist::point_mass(0.3),
        };
        let grid: Vec<f64> = (0..50).map(|j| j as f64 / 50.0).collect();
        for _ in 0..100 {
            assert_eq!(sample_gf_supnorm(&point, &grid, &mut s).unwrap(), 0.0);
        }
    }

    #[test]
    fn uniform_sup_is_kolmogorov() {
        let mut s = stream(6);
        let f = RandomDistributionFunction::Fixed {
            law: ScalarDist::Uniform { lo: 0.0, hi: 1.0 },
        };
        let grid: Vec<f64> = (1..4096).map(|j| j as f64 / 4096.0).collect();
        let sups: Vec<f64> = (0..1000)
            .map(|_| sample_gf_supnorm(&f, &grid, &mut s).unwrap())
            .collect();
        let d = ks_one_sample(&sups, kolmogorov_cdf).unwrap();
        assert!(d < 1.25 * 1.63 / 1000f64.sqrt(), "D = {d}");
    }

    /// `E|N(0, V(1-V))|` for `V ~ Uniform(0,1)` by Simpson's rule.
    fn mixed_bernoulli_sup_mean() -> f64 {
        let m = 20_000;
        let h = 1.0 / m as f64;
        let g = |v: f64| (2.0 / PI).sqrt() * (v * (1.0 - v)).sqrt();
        let mut acc = g(0.0) + g(1.0);
        for i in 1..m {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn bernoulli_mixed_sup_mean() {
        let oracle = mixed_bernoulli_sup_mean();
        assert!((oracle - (2.0 * PI).sqrt() / 8.0).abs() < 1e-5);
        let mut s = stream(7);
        let f = RandomDistributionFunction::BernoulliMixed {
            mixing: ScalarDist::Beta { a: 1.0, b: 1.0 },
        };
        let grid = [-0.5, 0.5, 1.5];
        let sups: Vec<f64> = (0..100_000)
            .map(|_| sample_gf_supnorm(&f, &grid, &mut s).unwrap())
            .collect();
        assert!((mean(&sups) - oracle).abs() < 0.02);
    }

    #[test]
    fn kolmogorov_values() {
        assert_eq!(kolmogorov_cdf(0.0), 0.0);
        assert!((kolmogorov_cdf(1.3581) - 0.95).abs() < 1e-3);
        assert!((kolmogorov_cdf(0.5) - 0.0361).abs() < 1e-3);
        // reference values from an independent implementation
        assert!((kolmogorov_cdf(1.3581) - 0.9500003695683326).abs() < 1e-10);
        assert!((kolmogorov_cdf(0.5) - 0.03605475633512489).abs() < 1e-10);
        assert!((kolmogorov_cdf(1.0) - 0.7300003283226455).abs() < 1e-10);
        assert!((kolmogorov_cdf(2.0) - 0.9993290747442203).abs() < 1e-10);
        // both series agree where they overlap
        let x: f64 = 0.999_999_999;
        let mut alt = 0.0;
        for k in 1..50 {
            let kf = k as f64;
            alt += if k % 2 == 1 { 1.0 } else { -1.0 } * (-2.0 * kf * kf * x * x).exp();
        }
        assert!((kolmogorov_cdf(x) - (1.0 - 2.0 * alt)).abs() < 1e-10);
    }
}
