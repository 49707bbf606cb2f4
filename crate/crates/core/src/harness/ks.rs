//! Kolmogorov–Smirnov statistics and the thresholds used by the harness.

use crate::error::{Error, Result};

/// Smallest sample accepted by the distributional tests.
pub const MIN_SAMPLES: usize = 100;

/// 1% asymptotic critical value of `√R D`.
pub const KS_CRITICAL_1PCT: f64 = 1.63;

/// Finite-sample allowance applied on top of the asymptotic critical value.
pub const FINITE_N_ALLOWANCE: f64 = 1.25;

fn check_len(len: usize) -> Result<()> {
    if len < MIN_SAMPLES {
        Err(Error::Size(format!(
            "need at least {MIN_SAMPLES} samples, got {len}"
        )))
    } else {
        Ok(())
    }
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `D = sup_x |F̂(x) - F(x)|` for a distribution function `cdf`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    check_len(samples.len())?;
    let xs = sorted(samples);
    let r = xs.len() as f64;
    Ok(xs.iter().enumerate().fold(0.0, |d: f64, (i, x)| {
        let f = cdf(*x);
        let above = (i + 1) as f64 / r - f;
        let below = f - i as f64 / r;
        d.max(above.abs()).max(below.abs())
    }))
}

/// `D = sup_x |F̂_a(x) - F̂_b(x)|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(a.len())?;
    check_len(b.len())?;
    let (xa, xb) = (sorted(a), sorted(b));
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// `1.25 × 1.63 / √R`.
pub fn one_sample_threshold(r: usize) -> f64 {
    FINITE_N_ALLOWANCE * KS_CRITICAL_1PCT / (r as f64).sqrt()
}

/// `1.25 × 1.63 × √((R_a + R_b) / (R_a R_b))`.
pub fn two_sample_threshold(ra: usize, rb: usize) -> f64 {
    let (ra, rb) = (ra as f64, rb as f64);
    FINITE_N_ALLOWANCE * KS_CRITICAL_1PCT * ((ra + rb) / (ra * rb)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{draw, open_stream, ScalarDist, StreamKey};
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn plug_in_quantiles() {
        let r = 200;
        let xs: Vec<f64> = (1..=r).map(|i| (i as f64 - 0.5) / r as f64).collect();
        let d = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!((d - 0.5 / r as f64).abs() < 1e-15);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (1..=r)
            .map(|i| normal.inverse_cdf((i as f64 - 0.5) / r as f64))
            .collect();
        let d = ks_one_sample(&xs, |x| normal.cdf(x)).unwrap();
        assert!((d - 0.5 / r as f64).abs() < 1e-9);
    }

    #[test]
    fn degenerate_sample() {
        let xs = vec![0.3; 150];
        let d = ks_one_sample(&xs, |x| x).unwrap();
        assert!((d - 0.7).abs() < 1e-15);
        assert!(matches!(
            ks_one_sample(&xs[..99], |x| x),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn two_sample_edges() {
        let a: Vec<f64> = (0..150).map(f64::from).collect();
        assert_eq!(ks_two_sample(&a, &a).unwrap(), 0.0);
        let b: Vec<f64> = a.iter().map(|x| x + 1000.0).collect();
        assert_eq!(ks_two_sample(&a, &b).unwrap(), 1.0);
        assert!(ks_two_sample(&a, &b[..10]).is_err());
    }

    fn normal_batch(seed: u64, rerun: u64, r: usize) -> Vec<f64> {
        let mut s = open_stream(StreamKey::new(seed, rerun, 0));
        (0..r)
            .map(|_| draw(&mut s, &ScalarDist::standard_normal()).unwrap())
            .collect()
    }

    // At most a 1% rejection rate, judged with three binomial standard errors.
    fn max_rejections(reruns: usize) -> usize {
        let p = 0.01;
        let n = reruns as f64;
        (n * p + 3.0 * (n * p * (1.0 - p)).sqrt()).floor() as usize
    }

    #[test]
    fn one_sample_size_under_null() {
        let reruns = 300;
        let crit = KS_CRITICAL_1PCT / 100.0;
        let phi = ScalarDist::standard_normal();
        let rejections = (0..reruns as u64)
            .filter(|r| {
                ks_one_sample(&normal_batch(1, *r, 10_000), |x| phi.cdf(x)).unwrap() >= crit
            })
            .count();
        assert!(
            rejections <= max_rejections(reruns),
            "{rejections} rejections"
        );
    }

    #[test]
    fn two_sample_size_under_null() {
        let reruns = 300;
        let crit = KS_CRITICAL_1PCT * (2.0f64 / 1000.0).sqrt();
        let rejections = (0..reruns as u64)
            .filter(|r| {
                ks_two_sample(&normal_batch(2, *r, 1000), &normal_batch(3, *r, 1000)).unwrap()
                    >= crit
            })
            .count();
        assert!(
            rejections <= max_rejections(reruns),
            "{rejections} rejections"
        );
    }

    #[test]
    fn thresholds() {
        assert!((one_sample_threshold(2000) - 0.04556).abs() < 1e-4);
        assert!((one_sample_threshold(1000) - 0.06443).abs() < 1e-4);
        assert!((two_sample_threshold(1000, 1000) - 0.09112).abs() < 1e-4);
    }
}
