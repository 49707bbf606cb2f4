//! Verification reports and their on-disk forms.

use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::Result;
use crate::summary::{f64_or_nan, SampleSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    /// Counts towards the exit status.
    Gate,
    /// Reported with a verdict that never fails a run.
    Diagnostic,
    /// Reported without any verdict.
    Exploratory,
}

/// How the test statistic is compared with the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Below,
    AtMost,
    /// Negative controls: the statistic must reach the threshold.
    AtLeast,
}

impl Comparison {
    pub fn holds(self, statistic: f64, threshold: f64) -> bool {
        match self {
            Comparison::Below => statistic < threshold,
            Comparison::AtMost => statistic <= threshold,
            Comparison::AtLeast => statistic >= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub id: String,
    pub kind: ReportKind,
    pub description: String,
    pub summary: SampleSummary,
    #[serde(deserialize_with = "f64_or_nan")]
    pub statistic: f64,
    #[serde(deserialize_with = "f64_or_nan")]
    pub threshold: f64,
    pub comparison: Comparison,
    pub pass: bool,
    pub seed: u64,
    /// Extra structured output: exclusion counts, convergence curves, certificates.
    pub details: Map<String, Value>,
    /// Kept out of the JSON so that reports are byte-identical across runs;
    /// written to `timings.csv` instead.
    #[serde(skip)]
    pub wall_time: Duration,
    #[serde(skip)]
    pub samples: Vec<f64>,
}

impl VerificationReport {
    pub fn new(id: impl Into<String>, description: impl Into<String>, seed: u64) -> Self {
        Self {
            id: id.into(),
            kind: ReportKind::Gate,
            description: description.into(),
            summary: SampleSummary::empty(),
            statistic: 0.0,
            threshold: 0.0,
            comparison: Comparison::Below,
            pass: false,
            seed,
            details: Map::new(),
            wall_time: Duration::ZERO,
            samples: Vec::new(),
        }
    }

    /// Sets the verdict from `statistic`, `threshold` and `comparison`.
    pub fn judge(mut self, statistic: f64, threshold: f64, comparison: Comparison) -> Self {
        self.statistic = statistic;
        self.threshold = threshold;
        self.comparison = comparison;
        self.pass = comparison.holds(statistic, threshold);
        self
    }

    pub fn with_samples(mut self, samples: Vec<f64>) -> Self {
        self.summary = SampleSummary::of(&samples);
        self.samples = samples;
        self
    }

    pub fn with_kind(mut self, kind: ReportKind) -> Self {
        self.kind = kind;
        if kind == ReportKind::Exploratory {
            self.pass = true;
        }
        self
    }

    pub fn detail(mut self, key: &str, value: impl Serialize) -> Self {
        self.details.insert(
            key.to_string(),
            serde_json::to_value(value).expect("serializable detail"),
        );
        self
    }

    pub fn renamed(mut self, id: impl Into<String>, description: impl Into<String>) -> Self {
        self.id = id.into();
        self.description = description.into();
        self
    }

    /// Whether this report makes a run fail.
    pub fn fails_run(&self) -> bool {
        self.kind == ReportKind::Gate && !self.pass
    }
}

/// Writes `reports.json`, `summary.csv`, `timings.csv` and one
/// `samples/<id>.csv` per report with samples.
pub fn write_reports(dir: &Path, reports: &[VerificationReport]) -> Result<()> {
    fs::create_dir_all(dir.join("samples"))?;
    let json = serde_json::to_string_pretty(reports)?;
    fs::write(dir.join("reports.json"), json + "\n")?;
    let mut summary =
        String::from("id,kind,statistic,threshold,comparison,pass,count,mean,variance\n");
    let mut timings = String::from("id,wall_time_s\n");
    for r in reports {
        summary.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.id,
            serde_json::to_value(r.kind)?.as_str().unwrap_or_default(),
            r.statistic,
            r.threshold,
            serde_json::to_value(r.comparison)?
                .as_str()
                .unwrap_or_default(),
            r.pass,
            r.summary.count,
            r.summary.mean,
            r.summary.variance,
        ));
        timings.push_str(&format!("{},{:.6}\n", r.id, r.wall_time.as_secs_f64()));
        if !r.samples.is_empty() {
            let mut csv = String::from("value\n");
            for v in &r.samples {
                csv.push_str(&format!("{v}\n"));
            }
            fs::write(dir.join("samples").join(format!("{}.csv", r.id)), csv)?;
        }
    }
    fs::write(dir.join("summary.csv"), summary)?;
    fs::write(dir.join("timings.csv"), timings)?;
    Ok(())
}

pub fn read_reports(dir: &Path) -> Result<Vec<VerificationReport>> {
    let text = fs::read_to_string(dir.join("reports.json"))?;
    Ok(serde_json::from_str(&text)?)
}

/// Sample column of `samples/<id>.csv`, if present.
pub fn read_samples(dir: &Path, id: &str) -> Result<Option<Vec<f64>>> {
    let path = dir.join("samples").join(format!("{id}.csv"));
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path)?;
    Ok(Some(
        text.lines()
            .skip(1)
            .filter_map(|l| l.trim().parse().ok())
            .collect(),
    ))
}
