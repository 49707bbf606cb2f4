//! Experiments that need more than one statistic per path.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{
    judge_values, replica_value, run_config, run_replicas, standardize, ExperimentConfig,
    ReplicaValue, Standardization, StatisticSpec, TestKind, MAX_EXCLUDED_FRACTION,
};
use crate::harness::report::{Comparison, ReportKind, VerificationReport};
use crate::limits::bridge_at_levels;
use crate::processes::{PathSample, ProcessSpec, Reinforcement};
use crate::sampling::{open_stream, ScalarDist, StreamKey};
use crate::statistics::{
    b_increments, empirical_process, exact_sup_norm, m_stat, oscillation,
    weighted_increment_energy, CenteredKind, FunctionDescriptor, Interval,
};
use crate::summary::{mean, quantile, std_error};

/// Centered-statistic experiment: simulate, standardize, test.
pub fn clt_experiment(config: &ExperimentConfig) -> Result<VerificationReport> {
    if !matches!(config.statistic, StatisticSpec::Centered { .. }) {
        return Err(Error::Config(
            "clt_experiment needs a centered statistic".into(),
        ));
    }
    run_config(config)
}

/// `C_n` of a two-colour urn, standardized per path by `δ V̂ (1 - V̂)`.
/// With a constant reinforcement (`δ = 0`) the test becomes a variance
/// bound on the unstandardized statistic.
pub fn polya_clt_experiment(config: &ExperimentConfig) -> Result<VerificationReport> {
    let ProcessSpec::PolyaUrn(spec) = &config.process else {
        return Err(Error::Config(
            "polya_clt_experiment needs an urn process".into(),
        ));
    };
    let mut config = config.clone();
    let delta = spec.delta();
    if delta == 0.0 {
        config.standardization = Standardization::None;
        config.test = TestKind::VarianceBound;
        config.limit = None;
    } else if config.standardization == Standardization::None {
        config.standardization = Standardization::ScaledBernoulli { delta };
    }
    let report = run_config(&config)?;
    Ok(report.detail("delta", delta))
}

/// An event on a single coordinate `X_m`, `1 <= m <= n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Above { coordinate: usize, t: f64 },
    AtMost { coordinate: usize, t: f64 },
}

impl Event {
    pub fn holds(&self, path: &PathSample) -> Result<bool> {
        let (m, t, above) = match *self {
            Event::Above { coordinate, t } => (coordinate, t, true),
            Event::AtMost { coordinate, t } => (coordinate, t, false),
        };
        if m == 0 || m > path.len() {
            return Err(Error::Index(format!(
                "event coordinate {m} outside 1..={}",
                path.len()
            )));
        }
        let x = path.x[m - 1];
        Ok(if above { x > t } else { x <= t })
    }
}

/// Repeats the test of `config` on the replicas where `event` occurred.
/// KS tolerances, stated for the full replica count, are rescaled by
/// `√(R / R_event)`.
pub fn stable_conditional_test(
    config: &ExperimentConfig,
    event: Event,
) -> Result<VerificationReport> {
    config.validate()?;
    let start = Instant::now();
    let tagged = run_replicas(config.seed, config.replicas, |_, stream| {
        let path = config.process.generate(config.n, stream)?;
        Ok((event.holds(&path)?, replica_value(config, &path)?))
    })?;
    let selected: Vec<ReplicaValue> = tagged.iter().filter(|(e, _)| *e).map(|(_, v)| *v).collect();
    let probability = selected.len() as f64 / config.replicas as f64;
    if selected.len() < crate::harness::ks::MIN_SAMPLES {
        return Err(Error::Size(format!(
            "event occurred on {} of {} replicas",
            selected.len(),
            config.replicas
        )));
    }
    let (kept, excluded) = standardize(&selected);
    let tolerance = match config.test {
        TestKind::KsOneSample | TestKind::KsTwoSample | TestKind::Symmetry => {
            config.tolerance * (config.replicas as f64 / kept.len() as f64).sqrt()
        }
        _ => config.tolerance,
    };
    let mut report = judge_values(config, kept, tolerance)?
        .detail("limit", &config.limit)
        .detail("standardization", &config.standardization)
        .detail("event", event)
        .detail("event_probability", probability)
        .detail("excluded", excluded);
    if excluded as f64 > MAX_EXCLUDED_FRACTION * selected.len() as f64 {
        report = report.detail("inconclusive", true);
        report.pass = false;
    }
    report.wall_time = start.elapsed();
    Ok(report)
}

/// `sup_t |F̂_m - G_m|` at each checkpoint `m`, computed on prefixes of one
/// path of length `config.n` per replica. Passes when the 95th percentile
/// strictly decreases along the checkpoints and ends below the tolerance.
pub fn uniform_convergence_test(
    config: &ExperimentConfig,
    checkpoints: &[usize],
) -> Result<VerificationReport> {
    config.validate()?;
    check_checkpoints(checkpoints, config.n)?;
    let start = Instant::now();
    let per_replica = run_replicas(config.seed, config.replicas, |_, stream| {
        let path = config.process.generate(config.n, stream)?;
        checkpoints
            .iter()
            .map(|&m| {
                let prefix = if m == path.len() {
                    path.clone()
                } else {
                    path.truncated(m)?
                };
                Ok(exact_sup_norm(&prefix, CenteredKind::C, None)? / (m as f64).sqrt())
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let curve: Vec<(usize, f64)> = checkpoints
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            (
                m,
                quantile(&per_replica.iter().map(|v| v[j]).collect::<Vec<_>>(), 0.95),
            )
        })
        .collect();
    let decreasing = curve.windows(2).all(|w| w[1].1 < w[0].1);
    let last: Vec<f64> = per_replica
        .iter()
        .map(|v| v[checkpoints.len() - 1])
        .collect();
    let p95 = curve[curve.len() - 1].1;
    let mut report = VerificationReport::new(
        &config.id,
        "p95 of sup_t |F̂_n(t) - G_n(t)| along n",
        config.seed,
    )
    .with_samples(last)
    .judge(p95, config.tolerance, Comparison::Below)
    .detail("p95_curve", &curve)
    .detail("decreasing", decreasing);
    report.pass &= decreasing;
    report.wall_time = start.elapsed();
    Ok(report)
}

fn check_checkpoints(checkpoints: &[usize], n: usize) -> Result<()> {
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] >= w[1]) || checkpoints[0] == 0
    {
        return Err(Error::Config(
            "checkpoints must be positive and strictly increasing".into(),
        ));
    }
    if *checkpoints.last().unwrap() > n {
        return Err(Error::Config(format!("checkpoint beyond path length {n}")));
    }
    Ok(())
}

/// Gap estimates at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub n: usize,
    pub gap: f64,
    pub std_error: f64,
}

/// Monte Carlo estimates of
/// `P(X_{n+1}=1, X_{n+2}=0) - P(X_{n+1}=0, X_{n+2}=1)` and
/// `P((X_{n+1}, X_{n+2}, X_{n+3}) = (1,0,0)) - P(... = (0,1,0))`
/// at each checkpoint, from one path of length `max + 3` per replica.
pub fn window_gaps(
    config: &ExperimentConfig,
    checkpoints: &[usize],
) -> Result<(Vec<GapEstimate>, Vec<GapEstimate>)> {
    check_checkpoints(checkpoints, usize::MAX)?;
    let len = checkpoints.last().unwrap() + 3;
    let per_replica = run_replicas(config.seed, config.replicas, |_, stream| {
        let path = config.process.generate(len, stream)?;
        let bit = |i: usize| path.x[i - 1] > 0.5;
        Ok(checkpoints
            .iter()
            .map(|&n| {
                let (a, b, c) = (bit(n + 1), bit(n + 2), bit(n + 3));
                let pair = (a && !b) as i8 - (!a && b) as i8;
                let triple = (a && !b && !c) as i8 - (!a && b && !c) as i8;
                (pair, triple)
            })
            .collect::<Vec<_>>())
    })?;
    let estimate = |j: usize, triple: bool| {
        let xs: Vec<f64> = per_replica
            .iter()
            .map(|v| if triple { v[j].1 } else { v[j].0 } as f64)
            .collect();
        GapEstimate {
            n: checkpoints[j],
            gap: mean(&xs),
            std_error: std_error(&xs),
        }
    };
    let pairs = (0..checkpoints.len()).map(|j| estimate(j, false)).collect();
    let triples = (0..checkpoints.len()).map(|j| estimate(j, true)).collect();
    Ok((pairs, triples))
}

/// Largest `|gap| / SE` allowed for a gap that vanishes exactly.
pub const NULL_GAP_Z: f64 = 4.0;

/// What the triple-window gap should do along the checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripleGap {
    /// Zero at every checkpoint.
    Vanish,
    /// Significantly smaller in absolute value at the last checkpoint than
    /// at the first, by at least `config.tolerance` standard errors.
    Decay,
}

/// Reports for asymptotic exchangeability of a binary process. The pair
/// gap vanishes for every c.i.d. sequence and is checked to be zero at
/// every checkpoint; the triple gap is checked according to `triple`.
pub fn asymptotic_exchangeability_test(
    config: &ExperimentConfig,
    checkpoints: &[usize],
    triple: TripleGap,
) -> Result<Vec<VerificationReport>> {
    config.validate()?;
    let start = Instant::now();
    let (pairs, triples) = window_gaps(config, checkpoints)?;
    let mut pair = VerificationReport::new(
        format!("{}-pair", config.id),
        "max |pair gap| / SE over checkpoints",
        config.seed,
    )
    .judge(max_z(&pairs), NULL_GAP_Z, Comparison::AtMost)
    .detail("gaps", &pairs);
    let mut triple_report = match triple {
        TripleGap::Vanish => VerificationReport::new(
            format!("{}-triple", config.id),
            "max |triple gap| / SE over checkpoints",
            config.seed,
        )
        .judge(max_z(&triples), NULL_GAP_Z, Comparison::AtMost),
        TripleGap::Decay => {
            let (first, last) = (triples[0], triples[triples.len() - 1]);
            let se = (first.std_error.powi(2) + last.std_error.powi(2)).sqrt();
            let z_drop = if se > 0.0 {
                (first.gap.abs() - last.gap.abs()) / se
            } else {
                0.0
            };
            VerificationReport::new(
                format!("{}-triple", config.id),
                "drop of |triple gap| from first to last checkpoint, in SE",
                config.seed,
            )
            .judge(z_drop, config.tolerance, Comparison::AtLeast)
        }
    }
    .detail("gaps", &triples);
    let elapsed = start.elapsed();
    pair.wall_time = elapsed;
    triple_report.wall_time = elapsed;
    Ok(vec![pair, triple_report])
}

fn max_z(gaps: &[GapEstimate]) -> f64 {
    gaps.iter()
        .map(|g| {
            if g.std_error > 0.0 {
                g.gap.abs() / g.std_error
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Sup-norm experiment for an empirical process, with the mean of
/// `(1/n) Σ k² D_k(t)²` at `probe` reported on prefixes of the first
/// hundred replicas.
pub fn empirical_process_experiment(
    config: &ExperimentConfig,
    probe: &[f64],
) -> Result<VerificationReport> {
    if !matches!(
        config.statistic,
        StatisticSpec::SupNorm { .. } | StatisticSpec::GridSupNorm { .. }
    ) {
        return Err(Error::Config(
            "empirical_process_experiment needs a sup-norm statistic".into(),
        ));
    }
    let mut report = run_config(config)?;
    if probe.is_empty() {
        return Ok(report);
    }
    let start = Instant::now();
    let prefixes: Vec<usize> = [100, 1_000, 10_000]
        .into_iter()
        .filter(|&m| m <= config.n)
        .collect();
    let probes = config.replicas.min(100);
    let values = run_replicas(config.seed, probes, |_, stream| {
        let path = config.process.generate(config.n, stream)?;
        prefixes
            .iter()
            .map(|&m| {
                let prefix = if m == path.len() {
                    path.clone()
                } else {
                    path.truncated(m)?
                };
                let s = probe
                    .iter()
                    .map(|&t| weighted_increment_energy(&prefix, t))
                    .sum::<Result<f64>>()?;
                Ok(s / probe.len() as f64)
            })
            .collect::<Result<Vec<f64>>>()
    });
    match values {
        Ok(values) => {
            let curve: Vec<(usize, f64)> = prefixes
                .iter()
                .enumerate()
                .map(|(j, &m)| (m, mean(&values.iter().map(|v| v[j]).collect::<Vec<_>>())))
                .collect();
            report = report.detail("weighted_increment_curve", curve);
        }
        Err(Error::Unsupported(_) | Error::UnsupportedFamily(_)) => {}
        Err(e) => return Err(e),
    }
    report.wall_time += start.elapsed();
    Ok(report)
}

/// 95th percentile of `max_k |f(X_k) - a_{k-1}(f)| / √m` on prefixes `m`.
/// Passes when it decreases from the first to the last checkpoint.
pub fn martingale_side_condition(
    id: &str,
    process: &ProcessSpec,
    checkpoints: &[usize],
    replicas: usize,
    seed: u64,
) -> Result<VerificationReport> {
    check_checkpoints(checkpoints, usize::MAX)?;
    let start = Instant::now();
    let n = *checkpoints.last().unwrap();
    let per_replica = run_replicas(seed, replicas, |_, stream| {
        let path = process.generate(n, stream)?;
        let inc = b_increments(&path, &FunctionDescriptor::Identity)?;
        let mut running = 0.0_f64;
        let mut maxima = Vec::with_capacity(checkpoints.len());
        let mut next = 0;
        for (i, d) in inc.iter().enumerate() {
            running = running.max(d.abs());
            if i + 1 == checkpoints[next] {
                maxima.push(running / ((i + 1) as f64).sqrt());
                next += 1;
            }
        }
        Ok(maxima)
    })?;
    let curve: Vec<(usize, f64)> = checkpoints
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            (
                m,
                quantile(&per_replica.iter().map(|v| v[j]).collect::<Vec<_>>(), 0.95),
            )
        })
        .collect();
    let mut report = VerificationReport::new(id, "p95 of max_k |B increment| / √n along n", seed)
        .judge(curve[curve.len() - 1].1, curve[0].1, Comparison::Below)
        .detail("p95_curve", &curve);
    report.wall_time = start.elapsed();
    Ok(report)
}

/// Mean oscillation of the `W` process of i.i.d. `Uniform(0, 1)` data and
/// of `G⁰` over equiprobable partitions with each cell count in `cells`.
/// Passes when the simulated mean oscillation shrinks with the mesh.
pub fn oscillation_diagnostic(
    id: &str,
    n: usize,
    cells: &[usize],
    replicas: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let process =
        ProcessSpec::DeFinetti(crate::processes::DeFinettiSpec::iid(ScalarDist::Uniform {
            lo: 0.0,
            hi: 1.0,
        }));
    let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    let partitions: Vec<Vec<Interval>> = cells
        .iter()
        .map(|&m| Interval::from_cuts(&(0..=m).map(|i| i as f64 / m as f64).collect::<Vec<_>>()))
        .collect();
    let per_replica = run_replicas(seed, replicas, |r, stream| {
        let path = process.generate(n, stream)?;
        let ep = empirical_process(&path, &grid, CenteredKind::W, None)?;
        let bridge = bridge_at_levels(&grid, &mut open_stream(StreamKey::new(seed, r, 1)))?;
        let limit = crate::statistics::EmpiricalProcessPath {
            grid: grid.clone(),
            values: bridge,
            n,
            centering: CenteredKind::W,
        };
        partitions
            .iter()
            .map(|p| Ok((oscillation(&ep, p)?, oscillation(&limit, p)?)))
            .collect::<Result<Vec<(f64, f64)>>>()
    })?;
    let rows: Vec<(usize, f64, f64)> = cells
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            let sim: Vec<f64> = per_replica.iter().map(|v| v[j].0).collect();
            let lim: Vec<f64> = per_replica.iter().map(|v| v[j].1).collect();
            (m, mean(&sim), mean(&lim))
        })
        .collect();
    let mut report =
        VerificationReport::new(id, "mean oscillation over equiprobable partitions", seed)
            .judge(rows[rows.len() - 1].1, rows[0].1, Comparison::Below)
            .detail("cells_simulated_limit", &rows)
            .with_kind(ReportKind::Diagnostic);
    report.wall_time = start.elapsed();
    Ok(report)
}

/// Mean and spread of `M_n` on prefixes, without a verdict.
pub fn m_stat_exploration(
    id: &str,
    process: &ProcessSpec,
    checkpoints: &[usize],
    replicas: usize,
    seed: u64,
) -> Result<VerificationReport> {
    check_checkpoints(checkpoints, usize::MAX)?;
    let start = Instant::now();
    let n = *checkpoints.last().unwrap();
    let per_replica = run_replicas(seed, replicas, |_, stream| {
        let path = process.generate(n, stream)?;
        checkpoints
            .iter()
            .map(|&m| {
                let prefix = if m == n {
                    path.clone()
                } else {
                    path.truncated(m)?
                };
                m_stat(&prefix, &FunctionDescriptor::Identity)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let rows: Vec<(usize, f64, f64)> = checkpoints
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            let xs: Vec<f64> = per_replica.iter().map(|v| v[j]).collect();
            (m, mean(&xs), crate::summary::variance(&xs).sqrt())
        })
        .collect();
    let last: Vec<f64> = per_replica
        .iter()
        .map(|v| v[checkpoints.len() - 1])
        .collect();
    let mut report = VerificationReport::new(id, "M_n mean and standard deviation along n", seed)
        .with_samples(last)
        .judge(f64::NAN, f64::NAN, Comparison::Below)
        .detail("n_mean_sd", &rows)
        .with_kind(ReportKind::Exploratory);
    report.wall_time = start.elapsed();
    Ok(report)
}

/// Urn with i.i.d. reinforcement uniform on `{1, ..., k}`.
pub fn iid_uniform_reinforcement(k: usize) -> Reinforcement {
    let mut weights = vec![1.0; k + 1];
    weights[0] = 0.0;
    Reinforcement::Iid {
        dist: ScalarDist::Discrete { weights },
    }
}

/// Draws of a limit, exposed for plotting.
pub fn limit_draws(config: &ExperimentConfig, count: usize) -> Result<Vec<f64>> {
    let limit = config
        .limit
        .as_ref()
        .ok_or_else(|| Error::Config("missing limit".into()))?;
    (0..count as u64).map(|r| limit.sample(config, r)).collect()
}

/// Sup-norm reference grid for binary data.
pub fn binary_grid() -> Vec<f64> {
    vec![-0.5, 0.5, 1.5]
}
