//! Named verification suites run by `cidlab verify`.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::harness::config::{
    run_config, run_replicas, ExperimentConfig, LimitRef, Standardization, StatisticSpec, TestKind,
    CONFIG_VERSION,
};
use crate::harness::experiments::{
    asymptotic_exchangeability_test, binary_grid, clt_experiment, empirical_process_experiment,
    iid_uniform_reinforcement, m_stat_exploration, martingale_side_condition,
    oscillation_diagnostic, polya_clt_experiment, stable_conditional_test,
    uniform_convergence_test, Event, TripleGap,
};
use crate::harness::ks::two_sample_threshold;
use crate::harness::report::{Comparison, ReportKind, VerificationReport};
use crate::limits::{MixtureNormalLaw, RandomDistributionFunction, VarianceLaw};
use crate::oracle::{
    check_cid_predictive, check_cid_predictive_law, check_exchangeable, check_permuted_cid,
    enumerate_polya_joint, permutations, Certificate, ExactJointLaw,
};
use crate::processes::{
    gamma_matrix, gaussian_cid_witness, CompensatedGaussianSpec, DeFinettiSpec, PolyaUrnSpec,
    ProcessSpec, Reinforcement, StopLaw, StoppedExchangeableSpec,
};
use crate::sampling::ScalarDist;
use crate::statistics::{CenteredKind, FunctionDescriptor};
use crate::summary::{covariance_matrix, mean, variance};

/// KS tolerance of the distributional gates run with 2000 replicas.
pub const KS_TOLERANCE_2000: f64 = 0.045;
/// KS tolerance of the Kolmogorov sup-norm gate run with 1000 replicas.
pub const KS_TOLERANCE_1000: f64 = 0.065;
/// Bound on the sample variance of `B_n` for the degenerate Gaussian example.
pub const B_VARIANCE_BOUND: f64 = 2e-3;

pub const SUITES: [&str; 13] = [
    "exact-cid",
    "permuted-cid",
    "gaussian-cov",
    "variance-formula",
    "gaussian-clt",
    "urn-clt",
    "slln",
    "kolmogorov",
    "exchangeable-gf",
    "uniform-predictive",
    "stable",
    "asymptotic-exchangeability",
    "diagnostics",
];

pub fn run_suite(name: &str, seed: u64) -> Result<Vec<VerificationReport>> {
    match name {
        "exact-cid" => exact_cid(seed),
        "permuted-cid" => permuted_cid(seed),
        "gaussian-cov" => gaussian_cov(seed),
        "variance-formula" => variance_formula(seed),
        "gaussian-clt" => gaussian_clt(seed),
        "urn-clt" => urn_clt(seed),
        "slln" => slln(seed),
        "kolmogorov" => kolmogorov(seed),
        "exchangeable-gf" => exchangeable_gf(seed),
        "uniform-predictive" => uniform_predictive(seed),
        "stable" => stable(seed),
        "asymptotic-exchangeability" => asymptotic_exchangeability(seed),
        "diagnostics" => diagnostics(seed),
        "all" => {
            let mut out = Vec::new();
            for s in SUITES {
                out.extend(run_suite(s, seed)?);
            }
            Ok(out)
        }
        other => Err(Error::Config(format!(
            "unknown suite {other:?}; expected one of {} or all",
            SUITES.join(", ")
        ))),
    }
}

// ---------------------------------------------------------------------------
// Processes used by the suites

/// `c = 1`, `b_k = u H_k`.
pub fn gaussian(u: f64) -> CompensatedGaussianSpec {
    CompensatedGaussianSpec::harmonic(1.0, u)
}

pub fn standard_urn() -> PolyaUrnSpec {
    PolyaUrnSpec::new(1, 1, Reinforcement::constant(1))
}

pub fn deterministic_urn(d: &[u64]) -> PolyaUrnSpec {
    PolyaUrnSpec::new(1, 1, Reinforcement::Deterministic { d: d.to_vec() })
}

/// `d_n` i.i.d. uniform on `{1, 2}`.
pub fn iid_urn() -> PolyaUrnSpec {
    PolyaUrnSpec::new(1, 1, iid_uniform_reinforcement(2))
}

fn uniform_iid() -> ProcessSpec {
    ProcessSpec::DeFinetti(DeFinettiSpec::iid(ScalarDist::Uniform { lo: 0.0, hi: 1.0 }))
}

fn centered(kind: CenteredKind) -> StatisticSpec {
    StatisticSpec::Centered {
        centering: kind,
        function: FunctionDescriptor::Identity,
        v_f: None,
    }
}

fn config(
    id: &str,
    process: ProcessSpec,
    statistic: StatisticSpec,
    n: usize,
    replicas: usize,
    seed: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        version: CONFIG_VERSION,
        id: id.into(),
        process,
        statistic,
        standardization: Standardization::None,
        n,
        replicas,
        seed,
        limit: Some(LimitRef::Normal { variance: 1.0 }),
        test: TestKind::KsOneSample,
        tolerance: KS_TOLERANCE_2000,
    }
}

/// Runs `config` and turns it into a negative control: the gate passes when
/// the statistic reaches the threshold.
fn negative_control(config: &ExperimentConfig, description: &str) -> Result<VerificationReport> {
    let r = run_config(config)?;
    let (statistic, threshold, wall) = (r.statistic, r.threshold, r.wall_time);
    let mut r = r
        .renamed(&config.id, format!("negative control: {description}"))
        .judge(statistic, threshold, Comparison::AtLeast);
    r.wall_time = wall;
    Ok(r)
}

fn timed(start: Instant, mut r: VerificationReport) -> VerificationReport {
    r.wall_time = start.elapsed();
    r
}

// ---------------------------------------------------------------------------
// Exact suites

fn certificate_report(
    id: &str,
    description: &str,
    cert: &Certificate,
    expect_hold: bool,
    seed: u64,
) -> VerificationReport {
    let violated = cert.violated as u8 as f64;
    let r = VerificationReport::new(id, description, seed).detail("certificate", cert);
    if expect_hold {
        r.judge(violated, 0.0, Comparison::AtMost)
    } else {
        r.judge(violated, 1.0, Comparison::AtLeast)
    }
}

fn exact_cid(seed: u64) -> Result<Vec<VerificationReport>> {
    let mut out = Vec::new();
    let urns = [
        ("cid-standard-urn", "standard urn, depth 4", standard_urn()),
        (
            "cid-urn-d122",
            "urn with d = (1, 2, 2, ...), depth 4",
            deterministic_urn(&[1, 2, 2]),
        ),
        (
            "cid-urn-cyclic",
            "urn with d = (1, 2, 1, 2, ...), depth 4",
            PolyaUrnSpec::new(1, 1, Reinforcement::Cyclic { d: vec![1, 2] }),
        ),
        (
            "cid-urn-path-dependent",
            "urn whose d depends on the previous colour, depth 4",
            PolyaUrnSpec::new(
                1,
                1,
                Reinforcement::PathDependent {
                    first: 1,
                    after_white: 2,
                    after_red: 3,
                },
            ),
        ),
        (
            "cid-urn-iid-d",
            "urn with d i.i.d. uniform on {1, 2}, depth 4",
            iid_urn(),
        ),
    ];
    for (id, description, spec) in urns {
        let start = Instant::now();
        let cert = check_cid_predictive(&spec, 4)?;
        out.push(timed(
            start,
            certificate_report(id, description, &cert, true, seed),
        ));
    }

    let start = Instant::now();
    let joint = enumerate_polya_joint(&standard_urn(), 4)?;
    let cert = check_exchangeable(&joint);
    out.push(timed(
        start,
        certificate_report(
            "exchangeable-standard-urn",
            "standard urn is exchangeable, depth 4",
            &cert,
            true,
            seed,
        ),
    ));

    let start = Instant::now();
    let joint = enumerate_polya_joint(&deterministic_urn(&[1, 2]), 3)?;
    let cert = check_exchangeable(&joint);
    out.push(timed(
        start,
        certificate_report(
            "not-exchangeable-urn-d12",
            "urn with d = (1, 2, 2, ...) is not exchangeable, depth 3",
            &cert,
            false,
            seed,
        ),
    ));

    let start = Instant::now();
    let cert = check_cid_predictive_law(&ExactJointLaw::product(
        &num_rational::BigRational::new(1.into(), 3.into()),
        6,
    ));
    out.push(timed(
        start,
        certificate_report(
            "cid-iid-bernoulli",
            "i.i.d. Bernoulli(1/3), depth 6",
            &cert,
            true,
            seed,
        ),
    ));

    let start = Instant::now();
    let holds = gaussian_cid_witness(&gaussian(0.5), 8)?;
    out.push(timed(
        start,
        VerificationReport::new(
            "cid-gaussian-covariance",
            "Gaussian covariance shift identity up to n = 8",
            seed,
        )
        .judge(!holds as u8 as f64, 0.0, Comparison::AtMost),
    ));
    Ok(out)
}

fn permuted_cid(seed: u64) -> Result<Vec<VerificationReport>> {
    let perms = permutations(4);
    let mut out = Vec::new();
    for (id, description, spec, expect_all) in [
        (
            "permuted-cid-standard-urn",
            "violations among the 24 permutations of X_1..X_4, standard urn, depth 6",
            standard_urn(),
            true,
        ),
        (
            "permuted-cid-urn-d12",
            "violations among the 24 permutations of X_1..X_4, urn with d = (1, 2, 2, ...), depth 6",
            deterministic_urn(&[1, 2]),
            false,
        ),
    ] {
        let start = Instant::now();
        let mut failing = Vec::new();
        for tau in &perms {
            if check_permuted_cid(&spec, tau, 6)?.violated {
                failing.push(tau.clone());
            }
        }
        let count = failing.len() as f64;
        let r = VerificationReport::new(id, description, seed).detail("failing_permutations", &failing);
        let r = if expect_all {
            r.judge(count, 0.0, Comparison::AtMost)
        } else {
            r.judge(count, 1.0, Comparison::AtLeast)
        };
        out.push(timed(start, r));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Gaussian suites

fn gaussian_cov(seed: u64) -> Result<Vec<VerificationReport>> {
    let start = Instant::now();
    let spec = gaussian(0.5);
    let process = ProcessSpec::CompensatedGaussian(spec.clone());
    let rows = run_replicas(seed, 100_000, |_, stream| {
        Ok(process.generate(3, stream)?.x)
    })?;
    let cov = covariance_matrix(&rows);
    let gamma = gamma_matrix(&spec, 3)?;
    let mut worst: f64 = 0.0;
    for (i, row) in cov.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            worst = worst.max((v - gamma.get(i, j)).abs());
        }
    }
    Ok(vec![timed(
        start,
        VerificationReport::new(
            "gaussian-covariance",
            "max entrywise |empirical covariance - Γ| of 10^5 triples",
            seed,
        )
        .judge(worst, 0.02, Comparison::Below)
        .detail("empirical", &cov)
        .detail("exact", gamma.rows()),
    )])
}

fn variance_formula(seed: u64) -> Result<Vec<VerificationReport>> {
    let spec = gaussian(0.5);
    let mut out = Vec::new();
    for n in [10, 100] {
        let start = Instant::now();
        let mut c = config(
            &format!("variance-formula-n{n}"),
            ProcessSpec::CompensatedGaussian(spec.clone()),
            centered(CenteredKind::W),
            n,
            100_000,
            seed,
        );
        c.test = TestKind::Describe;
        let values = crate::harness::config::simulate_values(&c)?;
        let w: Vec<f64> = values.iter().map(|v| v.raw).collect();
        let m = mean(&w);
        let sq: Vec<f64> = w.iter().map(|x| (x - m).powi(2)).collect();
        let se = (variance(&sq) / sq.len() as f64).sqrt();
        let simulated = variance(&w);
        let exact = spec.w_variance(n);
        out.push(timed(
            start,
            VerificationReport::new(
                c.id.clone(),
                format!("|simulated - exact| Var[W_n] in standard errors, n = {n}"),
                seed,
            )
            .with_samples(w)
            .judge((simulated - exact).abs() / se, 5.0, Comparison::AtMost)
            .detail("simulated", simulated)
            .detail("exact", exact)
            .detail("std_error", se),
        ));
    }
    Ok(out)
}

const U: f64 = 0.5;
const CLT_N: usize = 10_000;
const CLT_REPLICAS: usize = 2000;

fn gaussian_process() -> ProcessSpec {
    ProcessSpec::CompensatedGaussian(gaussian(U))
}

fn gaussian_w() -> ExperimentConfig {
    let mut c = config(
        "gaussian-w",
        gaussian_process(),
        centered(CenteredKind::W),
        CLT_N,
        CLT_REPLICAS,
        0,
    );
    c.standardization = Standardization::Constant { variance: 2.0 * U };
    c
}

fn gaussian_c() -> ExperimentConfig {
    let mut c = config(
        "gaussian-c",
        gaussian_process(),
        centered(CenteredKind::C),
        CLT_N,
        CLT_REPLICAS,
        0,
    );
    c.standardization = Standardization::Constant { variance: U };
    c
}

fn gaussian_b() -> ExperimentConfig {
    let mut c = config(
        "gaussian-b",
        gaussian_process(),
        centered(CenteredKind::B),
        CLT_N,
        CLT_REPLICAS,
        0,
    );
    c.test = TestKind::VarianceBound;
    c.limit = None;
    c.tolerance = B_VARIANCE_BOUND;
    c
}

fn seeded(mut c: ExperimentConfig, seed: u64) -> ExperimentConfig {
    c.seed = seed;
    c
}

fn gaussian_clt(seed: u64) -> Result<Vec<VerificationReport>> {
    let w = seeded(gaussian_w(), seed);
    let c = seeded(gaussian_c(), seed);
    let b = seeded(gaussian_b(), seed);
    let mut out = vec![clt_experiment(&w)?, clt_experiment(&c)?];
    let b_report = clt_experiment(&b)?.detail("exact_variance", gaussian(U).b_variance(CLT_N));
    out.push(b_report);

    let mut w_wrong = w.clone();
    w_wrong.id = "gaussian-w-negative".into();
    w_wrong.standardization = Standardization::Constant { variance: U };
    out.push(negative_control(
        &w_wrong,
        "W standardized with half its variance",
    )?);
    let mut c_wrong = c.clone();
    c_wrong.id = "gaussian-c-negative".into();
    c_wrong.standardization = Standardization::Constant { variance: 2.0 * U };
    out.push(negative_control(
        &c_wrong,
        "C standardized with twice its variance",
    )?);
    Ok(out)
}

fn urn_c() -> ExperimentConfig {
    let mut c = config(
        "urn-c",
        ProcessSpec::PolyaUrn(iid_urn()),
        centered(CenteredKind::C),
        CLT_N,
        CLT_REPLICAS,
        0,
    );
    c.standardization = Standardization::ScaledBernoulli {
        delta: iid_urn().delta(),
    };
    c
}

fn urn_clt(seed: u64) -> Result<Vec<VerificationReport>> {
    let c = seeded(urn_c(), seed);
    let mut out = vec![polya_clt_experiment(&c)?];

    let mut raw = c.clone();
    raw.id = "urn-c-negative-unstandardized".into();
    raw.standardization = Standardization::None;
    out.push(negative_control(
        &raw,
        "unstandardized C against the standard normal",
    )?);
    let mut doubled = c.clone();
    doubled.id = "urn-c-negative-doubled".into();
    doubled.standardization = Standardization::ScaledBernoulli {
        delta: 2.0 * iid_urn().delta(),
    };
    out.push(negative_control(
        &doubled,
        "C standardized with twice its variance",
    )?);

    // Cross-check: raw C against N(0, L) with L drawn from the realized
    // per-path variances.
    let start = Instant::now();
    let values = crate::harness::config::simulate_values(&c)?;
    let variances: Vec<f64> = values.iter().filter_map(|v| v.variance).collect();
    let mut mixture = c.clone();
    mixture.id = "urn-c-mixture-cross-check".into();
    mixture.standardization = Standardization::None;
    mixture.limit = Some(LimitRef::MixtureNormal {
        law: MixtureNormalLaw {
            variance: VarianceLaw::Empirical { values: variances },
        },
    });
    mixture.test = TestKind::KsTwoSample;
    mixture.tolerance = two_sample_threshold(c.replicas, c.replicas);
    let raw_values = values.iter().map(|v| v.raw).collect();
    let tolerance = mixture.tolerance;
    out.push(timed(
        start,
        crate::harness::config::judge_values(&mixture, raw_values, tolerance)?
            .renamed(&mixture.id, "raw C against the realized variance mixture")
            .with_kind(ReportKind::Diagnostic),
    ));

    let mut constant = c.clone();
    constant.id = "urn-c-constant-d".into();
    constant.process = ProcessSpec::PolyaUrn(standard_urn());
    constant.tolerance = B_VARIANCE_BOUND;
    out.push(polya_clt_experiment(&constant)?);
    Ok(out)
}

fn slln(seed: u64) -> Result<Vec<VerificationReport>> {
    let gap = StatisticSpec::SllnGap {
        function: FunctionDescriptor::Identity,
    };
    let band =
        |id: &str, process: ProcessSpec, statistic: StatisticSpec, centre: f64, tolerance: f64| {
            let mut c = config(id, process, statistic, CLT_N, 200, seed);
            c.limit = Some(LimitRef::PointMass { value: centre });
            c.test = TestKind::Band { level: 0.95 };
            c.tolerance = tolerance;
            run_config(&c)
        };
    let mut out = vec![
        band("slln-gaussian", gaussian_process(), gap.clone(), 0.0, 0.025)?,
        band(
            "slln-urn-iid-d",
            ProcessSpec::PolyaUrn(iid_urn()),
            gap.clone(),
            0.0,
            0.05,
        )?,
        band(
            "slln-urn-d122",
            ProcessSpec::PolyaUrn(deterministic_urn(&[1, 2, 2])),
            gap,
            0.0,
            0.05,
        )?,
        band(
            "slln-block-product",
            ProcessSpec::DeFinetti(DeFinettiSpec::iid(ScalarDist::Bernoulli { p: 0.5 })),
            StatisticSpec::BlockProduct {
                functions: vec![FunctionDescriptor::Identity, FunctionDescriptor::Identity],
            },
            0.25,
            0.02,
        )?,
    ];

    // Per-path band at three exact standard deviations of W_n / √n.
    let start = Instant::now();
    let spec = gaussian(U);
    let limit = 3.0 * (spec.w_variance(CLT_N) / CLT_N as f64).sqrt();
    let mut c = config(
        "slln-gaussian-exact-band",
        gaussian_process(),
        StatisticSpec::SllnGap {
            function: FunctionDescriptor::Identity,
        },
        CLT_N,
        200,
        seed,
    );
    c.test = TestKind::Describe;
    let values = crate::harness::config::simulate_values(&c)?;
    let inside = values.iter().filter(|v| v.raw < limit).count() as f64 / values.len() as f64;
    out.push(timed(
        start,
        VerificationReport::new(
            c.id,
            "fraction of paths with |mean_n - V| < 3 √(Var[W_n] / n)",
            seed,
        )
        .with_samples(values.iter().map(|v| v.raw).collect())
        .judge(inside, 0.95, Comparison::AtLeast)
        .detail("band", limit),
    ));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Empirical-process suites

fn kolmogorov_config(seed: u64) -> ExperimentConfig {
    let mut c = config(
        "kolmogorov-iid-uniform",
        uniform_iid(),
        StatisticSpec::SupNorm {
            centering: CenteredKind::W,
        },
        CLT_N,
        1000,
        seed,
    );
    c.limit = Some(LimitRef::Kolmogorov);
    c.tolerance = KS_TOLERANCE_1000;
    c
}

fn kolmogorov(seed: u64) -> Result<Vec<VerificationReport>> {
    let c = kolmogorov_config(seed);
    let mut out = vec![empirical_process_experiment(&c, &[])?];
    let mut wrong = c.clone();
    wrong.id = "kolmogorov-negative".into();
    wrong.standardization = Standardization::Constant { variance: 2.0 };
    out.push(negative_control(&wrong, "sup-norm rescaled by 1/√2")?);
    Ok(out)
}

fn exchangeable_gf(seed: u64) -> Result<Vec<VerificationReport>> {
    let r = 1000;
    let tolerance = two_sample_threshold(r, r);
    let grid = binary_grid();
    let mut beta = config(
        "gf-beta-bernoulli-w",
        ProcessSpec::DeFinetti(DeFinettiSpec::beta_bernoulli(1.0, 1.0)),
        StatisticSpec::SupNorm {
            centering: CenteredKind::W,
        },
        CLT_N,
        r,
        seed,
    );
    beta.limit = Some(LimitRef::GfSupnorm {
        law: RandomDistributionFunction::BernoulliMixed {
            mixing: ScalarDist::Beta { a: 1.0, b: 1.0 },
        },
        grid: grid.clone(),
    });
    beta.test = TestKind::KsTwoSample;
    beta.tolerance = tolerance;
    let mut out = vec![empirical_process_experiment(&beta, &[0.5])?];

    let mut wrong = beta.clone();
    wrong.id = "gf-beta-bernoulli-negative".into();
    wrong.standardization = Standardization::Constant { variance: 2.0 };
    out.push(negative_control(&wrong, "sup-norm rescaled by 1/√2")?);

    let mut urn = config(
        "gf-urn-iid-d-c",
        ProcessSpec::PolyaUrn(iid_urn()),
        StatisticSpec::GridSupNorm {
            centering: CenteredKind::C,
            grid: grid.clone(),
        },
        CLT_N,
        r,
        seed,
    );
    urn.limit = Some(LimitRef::SigmaSupnorm { grid });
    urn.test = TestKind::KsTwoSample;
    urn.tolerance = tolerance;
    out.push(empirical_process_experiment(&urn, &[0.5])?);
    Ok(out)
}

fn uniform_predictive(seed: u64) -> Result<Vec<VerificationReport>> {
    let checkpoints = [100, 1_000, 10_000];
    let statistic = StatisticSpec::SupNorm {
        centering: CenteredKind::C,
    };
    let mut urn = config(
        "uniform-predictive-urn-d12",
        ProcessSpec::PolyaUrn(deterministic_urn(&[1, 2])),
        statistic.clone(),
        CLT_N,
        500,
        seed,
    );
    urn.test = TestKind::Describe;
    urn.limit = None;
    urn.tolerance = 0.05;
    let mut iid = urn.clone();
    iid.id = "uniform-predictive-iid-uniform".into();
    iid.process = uniform_iid();
    iid.tolerance = 0.025;
    Ok(vec![
        uniform_convergence_test(&urn, &checkpoints)?,
        uniform_convergence_test(&iid, &checkpoints)?,
    ])
}

fn stable(seed: u64) -> Result<Vec<VerificationReport>> {
    let positive = Event::Above {
        coordinate: 1,
        t: 0.0,
    };
    let white = Event::Above {
        coordinate: 1,
        t: 0.5,
    };
    let named = |c: ExperimentConfig, id: &str| {
        let mut c = seeded(c, seed);
        c.id = id.into();
        c
    };
    let mut iid = config(
        "stable-iid-normal-b",
        ProcessSpec::DeFinetti(DeFinettiSpec::iid(ScalarDist::standard_normal())),
        centered(CenteredKind::B),
        CLT_N,
        CLT_REPLICAS,
        seed,
    );
    iid.standardization = Standardization::Constant { variance: 1.0 };
    Ok(vec![
        stable_conditional_test(&named(gaussian_w(), "stable-gaussian-w"), positive)?,
        stable_conditional_test(&named(gaussian_c(), "stable-gaussian-c"), positive)?,
        stable_conditional_test(&named(gaussian_b(), "stable-gaussian-b"), positive)?,
        stable_conditional_test(&named(urn_c(), "stable-urn-c"), white)?,
        stable_conditional_test(
            &iid,
            Event::AtMost {
                coordinate: 1,
                t: 0.0,
            },
        )?,
    ])
}

fn asymptotic_exchangeability(seed: u64) -> Result<Vec<VerificationReport>> {
    let mut cyclic = config(
        "window-gaps-cyclic-urn",
        ProcessSpec::PolyaUrn(PolyaUrnSpec::new(
            1,
            1,
            Reinforcement::Cyclic { d: vec![1, 2] },
        )),
        centered(CenteredKind::C),
        1,
        100_000,
        seed,
    );
    cyclic.test = TestKind::Describe;
    cyclic.limit = None;
    cyclic.tolerance = 3.0;
    let checkpoints = [10, 100, 1_000];
    let mut out = asymptotic_exchangeability_test(&cyclic, &checkpoints, TripleGap::Decay)?;
    for (id, spec) in [
        ("window-gaps-urn-d12", deterministic_urn(&[1, 2])),
        ("window-gaps-standard-urn", standard_urn()),
    ] {
        let mut c = cyclic.clone();
        c.id = id.into();
        c.process = ProcessSpec::PolyaUrn(spec);
        c.replicas = 20_000;
        out.extend(asymptotic_exchangeability_test(
            &c,
            &checkpoints,
            TripleGap::Vanish,
        )?);
    }
    Ok(out)
}

fn diagnostics(seed: u64) -> Result<Vec<VerificationReport>> {
    let checkpoints = [100, 1_000, 10_000];
    let families = [
        ("side-condition-gaussian", gaussian_process()),
        ("side-condition-urn-iid-d", ProcessSpec::PolyaUrn(iid_urn())),
        (
            "side-condition-beta-bernoulli",
            ProcessSpec::DeFinetti(DeFinettiSpec::beta_bernoulli(1.0, 1.0)),
        ),
        (
            "side-condition-stopped",
            ProcessSpec::StoppedExchangeable(StoppedExchangeableSpec {
                base: DeFinettiSpec::beta_bernoulli(1.0, 1.0),
                stop: StopLaw::Geometric { p: 0.01 },
            }),
        ),
    ];
    let mut out = Vec::new();
    for (id, process) in &families {
        out.push(martingale_side_condition(
            id,
            process,
            &checkpoints,
            200,
            seed,
        )?);
    }
    out.push(oscillation_diagnostic(
        "oscillation-iid-uniform",
        CLT_N,
        &[8, 32, 128],
        200,
        seed,
    )?);
    out.push(m_stat_exploration(
        "m-stat-beta-bernoulli",
        &ProcessSpec::DeFinetti(DeFinettiSpec::beta_bernoulli(1.0, 1.0)),
        &checkpoints,
        200,
        seed,
    )?);
    out.push(m_stat_exploration(
        "m-stat-gaussian",
        &gaussian_process(),
        &checkpoints,
        200,
        seed,
    )?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_a_config_error() {
        assert!(matches!(run_suite("nope", 1), Err(Error::Config(_))));
    }

    #[test]
    fn exact_suites_pass() {
        for name in ["exact-cid", "permuted-cid"] {
            for r in run_suite(name, 1).unwrap() {
                assert!(r.pass, "{r:?}");
            }
        }
    }

    #[test]
    fn non_exchangeable_witness_values() {
        let r = run_suite("exact-cid", 1).unwrap();
        let w = r
            .iter()
            .find(|r| r.id == "not-exchangeable-urn-d12")
            .unwrap();
        let cert = &w.details["certificate"];
        let (lhs, rhs) = (&cert["lhs"], &cert["rhs"]);
        let pair = |v: &serde_json::Value| (v["num"].as_i64().unwrap(), v["den"].as_i64().unwrap());
        let mut got = [pair(lhs), pair(rhs)];
        got.sort();
        assert_eq!(got, [(1, 10), (1, 15)]);
    }
}
