//! Declarative experiment configurations and the replica runner.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::ks::{ks_one_sample, ks_two_sample, MIN_SAMPLES};
use crate::harness::report::{Comparison, VerificationReport};
use crate::limits::{
    kolmogorov_cdf, sample_gf_supnorm, sample_mixture_normal, MixtureNormalLaw,
    RandomDistributionFunction,
};
use crate::processes::{PathSample, ProcessSpec};
use crate::sampling::{
    draw_gaussian_vector, open_stream, ScalarDist, Stream, StreamKey, SymMatrix,
};
use crate::statistics::{
    block_product_mean, centered_stat, empirical_process, exact_sup_norm, m_stat, resolve_v,
    sigma_path, sup_norm, CenteredKind, FunctionDescriptor,
};
use crate::summary::quantile;

pub const CONFIG_VERSION: u32 = 1;

/// Stream lanes of one replica.
pub const LANE_PATH: u32 = 0;
pub const LANE_LIMIT: u32 = 1;
pub const LANE_AUXILIARY_PATH: u32 = 2;

/// Per-path variances below this are excluded from standardized tests.
pub const MIN_PATH_VARIANCE: f64 = 1e-6;

/// Largest excluded fraction before a standardized test is inconclusive.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.05;

fn identity() -> FunctionDescriptor {
    FunctionDescriptor::Identity
}

/// Scalar computed from one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StatisticSpec {
    Centered {
        centering: CenteredKind,
        #[serde(default = "identity")]
        function: FunctionDescriptor,
        #[serde(default)]
        v_f: Option<f64>,
    },
    /// `sup_t |Z_{n,t}|` over the whole line.
    SupNorm {
        centering: CenteredKind,
    },
    /// `max_i |Z_{n,t_i}|` over a fixed grid.
    GridSupNorm {
        centering: CenteredKind,
        grid: Vec<f64>,
    },
    MartingaleM {
        #[serde(default = "identity")]
        function: FunctionDescriptor,
    },
    /// `|mean_n f - V_f|`.
    SllnGap {
        #[serde(default = "identity")]
        function: FunctionDescriptor,
    },
    BlockProduct {
        functions: Vec<FunctionDescriptor>,
    },
}

impl StatisticSpec {
    pub fn evaluate(&self, path: &PathSample) -> Result<f64> {
        match self {
            StatisticSpec::Centered {
                centering,
                function,
                v_f,
            } => centered_stat(path, function, *centering, *v_f),
            StatisticSpec::SupNorm { centering } => exact_sup_norm(path, *centering, None),
            StatisticSpec::GridSupNorm { centering, grid } => {
                sup_norm(&empirical_process(path, grid, *centering, None)?)
            }
            StatisticSpec::MartingaleM { function } => m_stat(path, function),
            StatisticSpec::SllnGap { function } => {
                let w = centered_stat(path, function, CenteredKind::W, None)?;
                Ok(w.abs() / (path.len() as f64).sqrt())
            }
            StatisticSpec::BlockProduct { functions } => block_product_mean(path, functions),
        }
    }
}

/// Per-path rescaling applied before comparing with the limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Standardization {
    #[default]
    None,
    /// Divide by `√variance`.
    Constant { variance: f64 },
    /// Divide by `√(δ V̂ (1 - V̂))`.
    ScaledBernoulli { delta: f64 },
    /// Divide by the standard deviation of `f` under the directing law, or
    /// under the terminal predictive law when the directing law is unknown.
    DirectingVariance {
        #[serde(default = "identity")]
        function: FunctionDescriptor,
    },
}

impl Standardization {
    /// The variance to divide by on `path`, `None` for no rescaling.
    pub fn path_variance(&self, path: &PathSample) -> Result<Option<f64>> {
        match self {
            Standardization::None => Ok(None),
            Standardization::Constant { variance } => Ok(Some(*variance)),
            Standardization::ScaledBernoulli { delta } => {
                let v = path
                    .v_hat()
                    .ok_or_else(|| Error::Unsupported("path has no estimate of V".into()))?;
                Ok(Some(delta * v * (1.0 - v)))
            }
            Standardization::DirectingVariance { function } => {
                let law = match path.directing_law() {
                    Some(law) => law,
                    None => path.predictive_law(path.len())?,
                };
                let m1 = function.expect(&law)?;
                let m2 = second_moment(function, &law)?;
                Ok(Some((m2 - m1 * m1).max(0.0)))
            }
        }
    }
}

fn second_moment(f: &FunctionDescriptor, law: &ScalarDist) -> Result<f64> {
    match (f, law.atoms()) {
        (_, Some(atoms)) => atoms
            .iter()
            .try_fold(0.0, |acc, (v, m)| Ok(acc + f.apply(*v)?.powi(2) * m)),
        (FunctionDescriptor::Identity, None) => Ok(law.moment(2)),
        (FunctionDescriptor::Power { p }, None) => Ok(law.moment(2 * p)),
        (FunctionDescriptor::Indicator { t }, None) => Ok(law.cdf(*t)),
        (FunctionDescriptor::Custom { .. }, None) => Err(Error::Unsupported(
            "second moment of a table function under a continuous law".into(),
        )),
    }
}

/// Reference law of the (standardized) statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitRef {
    Normal {
        variance: f64,
    },
    MixtureNormal {
        law: MixtureNormalLaw,
    },
    /// `sup_u |G⁰(u)|`.
    Kolmogorov,
    /// `max_i |G^F(t_i)|` with `F` drawn from `law`.
    GfSupnorm {
        law: RandomDistributionFunction,
        grid: Vec<f64>,
    },
    /// `max_i |G(t_i)|` for the centered Gaussian process with covariance
    /// `σ(s, t)` estimated from an independent path of the same process.
    SigmaSupnorm {
        grid: Vec<f64>,
    },
    PointMass {
        value: f64,
    },
}

impl LimitRef {
    pub fn cdf(&self, x: f64) -> Result<f64> {
        match self {
            LimitRef::Normal { variance } => Ok(ScalarDist::Normal {
                mean: 0.0,
                variance: *variance,
            }
            .cdf(x)),
            LimitRef::Kolmogorov => Ok(kolmogorov_cdf(x)),
            LimitRef::PointMass { value } => Ok(if x >= *value { 1.0 } else { 0.0 }),
            _ => Err(Error::Config(
                "limit has no closed-form distribution function".into(),
            )),
        }
    }

    pub fn has_cdf(&self) -> bool {
        matches!(
            self,
            LimitRef::Normal { .. } | LimitRef::Kolmogorov | LimitRef::PointMass { .. }
        )
    }

    /// One draw for replica `r`.
    pub fn sample(&self, config: &ExperimentConfig, r: u64) -> Result<f64> {
        let mut stream = open_stream(StreamKey::new(config.seed, r, LANE_LIMIT));
        match self {
            LimitRef::Normal { variance } => {
                sample_mixture_normal(&MixtureNormalLaw::constant(*variance), &mut stream)
            }
            LimitRef::MixtureNormal { law } => sample_mixture_normal(law, &mut stream),
            LimitRef::GfSupnorm { law, grid } => sample_gf_supnorm(law, grid, &mut stream),
            LimitRef::SigmaSupnorm { grid } => {
                let mut aux = open_stream(StreamKey::new(config.seed, r, LANE_AUXILIARY_PATH));
                let path = config.process.generate(config.n, &mut aux)?;
                let cov = sigma_matrix(&path, grid)?;
                let g = draw_gaussian_vector(&mut stream, &cov)?;
                Ok(g.iter().fold(0.0, |m, v| m.max(v.abs())))
            }
            LimitRef::PointMass { value } => Ok(*value),
            LimitRef::Kolmogorov => Err(Error::Config(
                "kolmogorov limit is only used through its cdf".into(),
            )),
        }
    }
}

/// `σ(s, t)` on `grid` from one path.
pub fn sigma_matrix(path: &PathSample, grid: &[f64]) -> Result<SymMatrix> {
    let m = grid.len();
    let mut rows = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i..m {
            let v = sigma_path(path, grid[i], grid[j])?;
            rows[i][j] = v;
            rows[j][i] = v;
        }
    }
    SymMatrix::from_rows(&rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestKind {
    /// One-sample KS against the limit's distribution function.
    KsOneSample,
    /// Two-sample KS against as many draws from the limit as replicas.
    KsTwoSample,
    /// Sample variance below the tolerance.
    VarianceBound,
    /// The `level` quantile of `|value - limit|` below the tolerance, for a
    /// `point_mass` limit.
    Band { level: f64 },
    /// Two-sample KS between the values and their negatives.
    Symmetry,
    /// Summaries only.
    Describe,
}

/// A complete Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub version: u32,
    pub id: String,
    pub process: ProcessSpec,
    pub statistic: StatisticSpec,
    #[serde(default)]
    pub standardization: Standardization,
    pub n: usize,
    pub replicas: usize,
    pub seed: u64,
    pub limit: Option<LimitRef>,
    pub test: TestKind,
    pub tolerance: f64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {}, expected {CONFIG_VERSION}",
                self.version
            )));
        }
        if self.n == 0 || self.replicas == 0 {
            return Err(Error::Config("n and replicas must be positive".into()));
        }
        if !(self.tolerance > 0.0) && self.test != TestKind::Describe {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        self.process.validate()?;
        let needs_many = matches!(
            self.test,
            TestKind::KsOneSample | TestKind::KsTwoSample | TestKind::Symmetry
        );
        if needs_many && self.replicas < MIN_SAMPLES {
            return Err(Error::Config(format!(
                "distributional tests need at least {MIN_SAMPLES} replicas"
            )));
        }
        match (&self.test, &self.limit) {
            (TestKind::KsOneSample, Some(l)) if !l.has_cdf() => Err(Error::Config(
                "ks_one_sample needs a limit with a distribution function".into(),
            )),
            (TestKind::KsOneSample | TestKind::KsTwoSample, None) => {
                Err(Error::Config("distributional test without a limit".into()))
            }
            (TestKind::KsTwoSample, Some(LimitRef::Kolmogorov)) => Err(Error::Config(
                "use ks_one_sample for the kolmogorov limit".into(),
            )),
            (TestKind::Band { .. }, l) if !matches!(l, Some(LimitRef::PointMass { .. })) => {
                Err(Error::Config("band test needs a point_mass limit".into()))
            }
            (TestKind::Band { level }, _) if !(0.0..=1.0).contains(level) => {
                Err(Error::Config("band level must lie in [0, 1]".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn stream_key(&self, r: u64) -> StreamKey {
        StreamKey::new(self.seed, r, LANE_PATH)
    }
}

/// Runs `f` on replicas `0..replicas`, each on its own path stream, and
/// returns the results in replica order.
pub fn run_replicas<T, F>(seed: u64, replicas: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, &mut Stream) -> Result<T> + Sync,
{
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| f(r, &mut open_stream(StreamKey::new(seed, r, LANE_PATH))))
        .collect()
}

/// Statistic of one replica together with its rescaling variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicaValue {
    pub raw: f64,
    pub variance: Option<f64>,
}

impl ReplicaValue {
    pub fn standardized(&self) -> Option<f64> {
        match self.variance {
            None => Some(self.raw),
            Some(v) if v < MIN_PATH_VARIANCE => None,
            Some(v) => Some(self.raw / v.sqrt()),
        }
    }
}

pub fn replica_value(config: &ExperimentConfig, path: &PathSample) -> Result<ReplicaValue> {
    Ok(ReplicaValue {
        raw: config.statistic.evaluate(path)?,
        variance: config.standardization.path_variance(path)?,
    })
}

/// Raw replica values of `config`.
pub fn simulate_values(config: &ExperimentConfig) -> Result<Vec<ReplicaValue>> {
    config.validate()?;
    run_replicas(config.seed, config.replicas, |_, stream| {
        let path = config.process.generate(config.n, stream)?;
        replica_value(config, &path)
    })
}

/// Standardized values, dropping paths whose variance is numerically zero.
pub fn standardize(values: &[ReplicaValue]) -> (Vec<f64>, usize) {
    let kept: Vec<f64> = values
        .iter()
        .filter_map(ReplicaValue::standardized)
        .collect();
    let excluded = values.len() - kept.len();
    (kept, excluded)
}

/// Applies `config.test` to already standardized `values` with the given
/// tolerance.
pub fn judge_values(
    config: &ExperimentConfig,
    values: Vec<f64>,
    tolerance: f64,
) -> Result<VerificationReport> {
    let report = VerificationReport::new(&config.id, describe(config), config.seed);
    let (statistic, comparison) = match config.test {
        TestKind::KsOneSample => {
            let limit = config
                .limit
                .as_ref()
                .ok_or_else(|| Error::Config("missing limit".into()))?;
            // Validated above: the limit has a closed-form cdf.
            (
                ks_one_sample(&values, |x| limit.cdf(x).unwrap_or(f64::NAN))?,
                Comparison::Below,
            )
        }
        TestKind::KsTwoSample => {
            let limit = config
                .limit
                .as_ref()
                .ok_or_else(|| Error::Config("missing limit".into()))?;
            let reference = (0..values.len() as u64)
                .into_par_iter()
                .map(|r| limit.sample(config, r))
                .collect::<Result<Vec<f64>>>()?;
            (ks_two_sample(&values, &reference)?, Comparison::Below)
        }
        TestKind::VarianceBound => (crate::summary::variance(&values), Comparison::Below),
        TestKind::Band { level } => {
            let centre = match config.limit {
                Some(LimitRef::PointMass { value }) => value,
                _ => return Err(Error::Config("band test needs a point_mass limit".into())),
            };
            let dev: Vec<f64> = values.iter().map(|v| (v - centre).abs()).collect();
            (quantile(&dev, level), Comparison::Below)
        }
        TestKind::Symmetry => {
            let neg: Vec<f64> = values.iter().map(|v| -v).collect();
            (ks_two_sample(&values, &neg)?, Comparison::Below)
        }
        TestKind::Describe => (f64::NAN, Comparison::Below),
    };
    let report = report
        .with_samples(values)
        .judge(statistic, tolerance, comparison);
    Ok(match config.test {
        TestKind::Describe => report.with_kind(crate::harness::report::ReportKind::Exploratory),
        _ => report,
    })
}

/// Simulates `config`, standardizes, and applies its test.
pub fn run_config(config: &ExperimentConfig) -> Result<VerificationReport> {
    let start = Instant::now();
    let values = simulate_values(config)?;
    let (kept, excluded) = standardize(&values);
    let mut report = judge_values(config, kept, config.tolerance)?
        .detail("limit", &config.limit)
        .detail("standardization", &config.standardization);
    if excluded > 0 {
        report = report.detail("excluded", excluded);
        let fraction = excluded as f64 / values.len() as f64;
        if fraction > MAX_EXCLUDED_FRACTION {
            report = report.detail("inconclusive", true);
            report.pass = false;
        }
    }
    report.wall_time = start.elapsed();
    Ok(report)
}

fn describe(config: &ExperimentConfig) -> String {
    format!(
        "{} n={} replicas={} {:?}",
        config.process.family().name(),
        config.n,
        config.replicas,
        config.test
    )
}

/// `V_f` of a path, for reporting.
pub fn path_v(path: &PathSample, f: &FunctionDescriptor) -> Result<f64> {
    Ok(resolve_v(path, f, None)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::{CompensatedGaussianSpec, DeFinettiSpec};

    fn gaussian_w(replicas: usize, variance: f64) -> ExperimentConfig {
        ExperimentConfig {
            version: 1,
            id: "w".into(),
            process: ProcessSpec::CompensatedGaussian(CompensatedGaussianSpec::harmonic(1.0, 0.5)),
            statistic: StatisticSpec::Centered {
                centering: CenteredKind::W,
                function: FunctionDescriptor::Identity,
                v_f: None,
            },
            standardization: Standardization::Constant { variance },
            n: 500,
            replicas,
            seed: 9,
            limit: Some(LimitRef::Normal { variance: 1.0 }),
            test: TestKind::KsOneSample,
            tolerance: 0.1,
        }
    }

    #[test]
    fn json_round_trip() {
        let c = gaussian_w(200, 1.0);
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = gaussian_w(200, 1.0);
        c.version = 2;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = gaussian_w(50, 1.0);
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = gaussian_w(200, 1.0);
        c.limit = Some(LimitRef::SigmaSupnorm { grid: vec![0.0] });
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn replicas_are_reproducible_and_ordered() {
        let c = gaussian_w(120, 1.0);
        let a = simulate_values(&c).unwrap();
        let b = simulate_values(&c).unwrap();
        assert_eq!(a, b);
        let mut stream = open_stream(c.stream_key(7));
        let path = c.process.generate(c.n, &mut stream).unwrap();
        assert_eq!(a[7].raw, c.statistic.evaluate(&path).unwrap());
    }

    #[test]
    fn correct_limit_passes_and_wrong_limit_fails() {
        let u = 0.5;
        let ok = run_config(&gaussian_w(400, 2.0 * u)).unwrap();
        assert!(ok.pass, "{ok:?}");
        let wrong = run_config(&gaussian_w(400, u)).unwrap();
        assert!(!wrong.pass);
    }

    #[test]
    fn directing_variance_of_bernoulli_mixture() {
        let spec = ProcessSpec::DeFinetti(DeFinettiSpec::beta_bernoulli(1.0, 1.0));
        let mut s = open_stream(StreamKey::new(1, 0, 0));
        let path = spec.generate(50, &mut s).unwrap();
        let v = Standardization::DirectingVariance {
            function: FunctionDescriptor::Identity,
        }
        .path_variance(&path)
        .unwrap()
        .unwrap();
        let theta = path.v_hat().unwrap();
        assert!((v - theta * (1.0 - theta)).abs() < 1e-12);
    }
}
