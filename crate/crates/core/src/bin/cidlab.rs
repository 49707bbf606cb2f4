use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cidlab::harness::config::{run_config, run_replicas, ExperimentConfig, StatisticSpec};
use cidlab::harness::report::{read_reports, write_reports, VerificationReport};
use cidlab::harness::suites::run_suite;
use cidlab::harness::svg::render_dir;
use cidlab::oracle::{
    check_cid_predictive_law, check_exchangeable, enumerate_polya_joint, permuted_law, Certificate,
};
use cidlab::processes::{PolyaUrnSpec, ProcessSpec};
use cidlab::sampling::open_stream;
use cidlab::statistics::empirical_process;
use cidlab::statistics::order_statistic_grid;
use cidlab::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cidlab",
    version,
    about = "Simulate c.i.d. sequences and verify their limit theorems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and write its statistics, paths and report.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a verification suite and write reports.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "reports")]
        out: PathBuf,
    },
    /// Exact checks on an urn by enumeration; prints a JSON certificate.
    Oracle {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        depth: usize,
        #[arg(long, value_enum, default_value_t = Check::Cid)]
        check: Check,
        /// Permutation of the first indices, 1-based and comma separated.
        #[arg(long, value_delimiter = ',')]
        tau: Vec<usize>,
    },
    /// Summarize a report directory, optionally rendering SVG figures.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        svg: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Check {
    Cid,
    Exchangeable,
    Permuted,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(true)` when every executed gate passed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { config, out } => simulate(&config, &out),
        Command::Verify { suite, seed, out } => {
            let reports = run_suite(&suite, seed)?;
            write_reports(&out, &reports)?;
            print_table(&reports);
            Ok(reports.iter().all(|r| !r.fails_run()))
        }
        Command::Oracle {
            spec,
            depth,
            check,
            tau,
        } => {
            let cert = oracle(&spec, depth, check, &tau)?;
            println!("{}", serde_json::to_string_pretty(&cert)?);
            Ok(cert.holds())
        }
        Command::Report { input, svg } => {
            let reports = read_reports(&input)?;
            print_table(&reports);
            if svg {
                for path in render_dir(&input)? {
                    println!("{}", path.display());
                }
            }
            Ok(reports.iter().all(|r| !r.fails_run()))
        }
    }
}

fn print_table(reports: &[VerificationReport]) {
    for r in reports {
        let verdict = match (r.kind, r.pass) {
            (cidlab::harness::report::ReportKind::Exploratory, _) => "info",
            (_, true) => "pass",
            (_, false) => "FAIL",
        };
        println!(
            "{verdict:4}  {:<44} {:>12.6} {:?} {:<12.6} ({:?})",
            r.id, r.statistic, r.comparison, r.threshold, r.kind
        );
    }
}

/// Number of paths written to `paths.csv`.
const PATHS_WRITTEN: usize = 3;

fn simulate(config_path: &Path, out: &Path) -> Result<bool> {
    let config = ExperimentConfig::from_json(&fs::read_to_string(config_path)?)?;
    fs::create_dir_all(out)?;
    fs::write(
        out.join("config.json"),
        serde_json::to_string_pretty(&config)? + "\n",
    )?;

    let report = run_config(&config)?;
    write_reports(out, std::slice::from_ref(&report))?;

    let shown = config.replicas.min(PATHS_WRITTEN);
    let paths = run_replicas(config.seed, shown, |_, stream| {
        config.process.generate(config.n, stream)
    })?;
    let mut csv = String::from("replica,k,x,predictive_mean\n");
    for (r, path) in paths.iter().enumerate() {
        for (k, x) in path.x.iter().enumerate() {
            let a = path
                .predictive_mean
                .as_ref()
                .map(|a| a[k].to_string())
                .unwrap_or_default();
            csv.push_str(&format!("{r},{},{x},{a}\n", k + 1));
        }
    }
    fs::write(out.join("paths.csv"), csv)?;
    fs::write(
        out.join("path0.json"),
        serde_json::to_string(&paths[0])? + "\n",
    )?;

    if let StatisticSpec::SupNorm { centering } | StatisticSpec::GridSupNorm { centering, .. } =
        &config.statistic
    {
        let path = config
            .process
            .generate(config.n, &mut open_stream(config.stream_key(0)))?;
        let grid = match &config.statistic {
            StatisticSpec::GridSupNorm { grid, .. } => grid.clone(),
            _ => order_statistic_grid(&path),
        };
        let ep = empirical_process(&path, &grid, *centering, None)?;
        fs::write(
            out.join("empirical_process0.csv"),
            ep.to_csv(config.process.family().name(), config.seed),
        )?;
    }
    print_table(std::slice::from_ref(&report));
    Ok(!report.fails_run())
}

fn oracle(spec_path: &Path, depth: usize, check: Check, tau: &[usize]) -> Result<Certificate> {
    let text = fs::read_to_string(spec_path)?;
    let spec: PolyaUrnSpec = match serde_json::from_str::<ProcessSpec>(&text) {
        Ok(ProcessSpec::PolyaUrn(s)) => s,
        Ok(other) => {
            return Err(Error::UnsupportedFamily(format!(
                "exact enumeration covers urns only, got {}",
                other.family().name()
            )))
        }
        Err(_) => serde_json::from_str(&text)?,
    };
    let joint = enumerate_polya_joint(&spec, depth)?;
    match check {
        Check::Cid => Ok(check_cid_predictive_law(&joint)),
        Check::Exchangeable => Ok(check_exchangeable(&joint)),
        Check::Permuted => {
            if tau.is_empty() {
                return Err(Error::Config("--check permuted needs --tau".into()));
            }
            Ok(check_cid_predictive_law(&permuted_law(&joint, tau)?))
        }
    }
}
