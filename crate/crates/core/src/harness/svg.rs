//! Minimal SVG charts for verification reports: QQ plots, histograms and
//! convergence curves.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::Result;
use crate::harness::report::{read_reports, read_samples, VerificationReport};
use crate::limits::kolmogorov_cdf;

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;

/// Axis-aligned data window mapped onto the plotting area.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    log_x: bool,
}

impl Frame {
    fn fit(
        xs: impl Iterator<Item = f64> + Clone,
        ys: impl Iterator<Item = f64> + Clone,
        log_x: bool,
    ) -> Self {
        let range = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it
                .filter(|v| v.is_finite())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
                    (a.min(v), b.max(v))
                });
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let x = if log_x {
            let (lo, hi) = range(&mut xs.map(f64::log10));
            (lo, hi)
        } else {
            range(&mut xs.clone())
        };
        Self {
            x,
            y: range(&mut ys.clone()),
            log_x,
        }
    }

    fn px(&self, x: f64) -> f64 {
        let x = if self.log_x { x.log10() } else { x };
        MARGIN + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn document(title: &str, x_label: &str, y_label: &str, frame: &Frame, body: &str) -> String {
    let (x0, x1) = frame.x;
    let (y0, y1) = frame.y;
    let fmt_x = |v: f64| {
        if frame.log_x {
            format!("{:.0}", 10f64.powf(v))
        } else {
            format!("{v:.3}")
        }
    };
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"11\">\n",
            "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
            "<text x=\"{cx}\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">{title}</text>\n",
            "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
            "<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
            "<text x=\"{m}\" y=\"{bl}\" text-anchor=\"start\">{x0}</text>\n",
            "<text x=\"{r}\" y=\"{bl}\" text-anchor=\"end\">{x1}</text>\n",
            "<text x=\"{ml}\" y=\"{b}\" text-anchor=\"end\">{y0:.3}</text>\n",
            "<text x=\"{ml}\" y=\"{mt}\" text-anchor=\"end\">{y1:.3}</text>\n",
            "<text x=\"{cx}\" y=\"{xl}\" text-anchor=\"middle\">{x_label}</text>\n",
            "<text x=\"12\" y=\"{cy}\" text-anchor=\"middle\" transform=\"rotate(-90 12 {cy})\">{y_label}</text>\n",
            "{body}</svg>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        cx = WIDTH / 2.0,
        cy = HEIGHT / 2.0,
        m = MARGIN,
        r = WIDTH - MARGIN,
        b = HEIGHT - MARGIN,
        bl = HEIGHT - MARGIN + 14.0,
        ml = MARGIN - 4.0,
        mt = MARGIN + 4.0,
        xl = HEIGHT - 12.0,
        title = escape(title),
        x_label = escape(x_label),
        y_label = escape(y_label),
        x0 = fmt_x(x0),
        x1 = fmt_x(x1),
        y0 = y0,
        y1 = y1,
        body = body,
    )
}

/// Sample quantiles against reference quantiles, with the diagonal.
pub fn qq_plot(title: &str, samples: &[f64], reference_quantile: impl Fn(f64) -> f64) -> String {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let r = xs.len() as f64;
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .enumerate()
        .map(|(i, y)| (reference_quantile((i as f64 + 0.5) / r), *y))
        .filter(|(x, _)| x.is_finite())
        .collect();
    let all = pts.iter().flat_map(|(x, y)| [*x, *y]);
    let frame = Frame::fit(all.clone(), all, false);
    let lo = frame.x.0.max(frame.y.0);
    let hi = frame.x.1.min(frame.y.1);
    let mut body = format!(
        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"gray\" stroke-dasharray=\"4\"/>\n",
        frame.px(lo),
        frame.py(lo),
        frame.px(hi),
        frame.py(hi)
    );
    for (x, y) in &pts {
        body.push_str(&format!(
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"1.5\" fill=\"steelblue\"/>\n",
            frame.px(*x),
            frame.py(*y)
        ));
    }
    document(
        title,
        "reference quantile",
        "sample quantile",
        &frame,
        &body,
    )
}

pub fn histogram(title: &str, samples: &[f64], bins: usize) -> String {
    let bins = bins.max(1);
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo {
        (hi - lo) / bins as f64
    } else {
        1.0
    };
    let mut counts = vec![0usize; bins];
    for v in samples {
        let i = (((v - lo) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let top = *counts.iter().max().unwrap_or(&1) as f64;
    let frame = Frame {
        x: (lo, lo + width * bins as f64),
        y: (0.0, top.max(1.0)),
        log_x: false,
    };
    let mut body = String::new();
    for (i, c) in counts.iter().enumerate() {
        let x0 = lo + i as f64 * width;
        body.push_str(&format!(
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"steelblue\" stroke=\"white\"/>\n",
            frame.px(x0),
            frame.py(*c as f64),
            frame.px(x0 + width) - frame.px(x0),
            frame.py(0.0) - frame.py(*c as f64)
        ));
    }
    document(title, "value", "count", &frame, &body)
}

/// Polyline through `(n, value)` points on a logarithmic `n` axis.
pub fn convergence_curve(title: &str, y_label: &str, points: &[(f64, f64)]) -> String {
    let frame = Frame::fit(
        points.iter().map(|p| p.0),
        points.iter().map(|p| p.1).chain(std::iter::once(0.0)),
        true,
    );
    let coords: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{:.1},{:.1}", frame.px(*x), frame.py(*y)))
        .collect();
    let mut body = format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\"/>\n",
        coords.join(" ")
    );
    for c in &coords {
        let (x, y) = c.split_once(',').unwrap_or(("0", "0"));
        body.push_str(&format!(
            "<circle cx=\"{x}\" cy=\"{y}\" r=\"3\" fill=\"steelblue\"/>\n"
        ));
    }
    document(title, "n", y_label, &frame, &body)
}

fn kolmogorov_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 5.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `(n, value)` pairs from a detail holding `[[n, v], ...]` or a list of
/// gap estimates.
fn curve_points(value: &Value) -> Option<Vec<(f64, f64)>> {
    let items = value.as_array()?;
    items
        .iter()
        .map(|item| match item {
            Value::Array(a) if a.len() >= 2 => Some((a[0].as_f64()?, a[1].as_f64()?)),
            Value::Object(o) => Some((o.get("n")?.as_f64()?, o.get("gap")?.as_f64()?.abs())),
            _ => None,
        })
        .collect()
}

/// Charts for one report: a QQ plot when the limit has closed-form
/// quantiles, a histogram otherwise, plus one curve per curve-valued detail.
pub fn render_report(
    report: &VerificationReport,
    samples: Option<&[f64]>,
) -> Vec<(String, String)> {
    let mut out = Vec::new();
    if let Some(samples) = samples.filter(|s| !s.is_empty()) {
        let limit = report
            .details
            .get("limit")
            .and_then(|l| l.get("kind"))
            .and_then(Value::as_str);
        match limit {
            Some("normal") => {
                let variance = report.details["limit"]["variance"].as_f64().unwrap_or(1.0);
                let normal = Normal::new(0.0, variance.sqrt()).expect("positive variance");
                out.push((
                    format!("{}-qq.svg", report.id),
                    qq_plot(&format!("{} vs normal", report.id), samples, |p| {
                        normal.inverse_cdf(p)
                    }),
                ));
            }
            Some("kolmogorov") => out.push((
                format!("{}-qq.svg", report.id),
                qq_plot(
                    &format!("{} vs Kolmogorov", report.id),
                    samples,
                    kolmogorov_quantile,
                ),
            )),
            _ => out.push((
                format!("{}-hist.svg", report.id),
                histogram(&report.id, samples, 30),
            )),
        }
    }
    for (key, value) in &report.details {
        if let Some(points) =
            curve_points(value).filter(|p| p.len() >= 2 && p.iter().all(|(n, _)| *n > 0.0))
        {
            out.push((
                format!("{}-{key}.svg", report.id),
                convergence_curve(&format!("{} {key}", report.id), key, &points),
            ));
        }
    }
    out
}

/// Renders every report found in `dir` into `dir/figures`, returning the
/// written paths.
pub fn render_dir(dir: &Path) -> Result<Vec<PathBuf>> {
    let reports = read_reports(dir)?;
    let figures = dir.join("figures");
    fs::create_dir_all(&figures)?;
    let mut written = Vec::new();
    for report in &reports {
        let samples = read_samples(dir, &report.id)?;
        for (name, svg) in render_report(report, samples.as_deref()) {
            let path = figures.join(name);
            fs::write(&path, svg)?;
            written.push(path);
        }
    }
    Ok(written)
}
