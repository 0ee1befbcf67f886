use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::experiment::{ExperimentResult, Record, STABILITY};
use super::frontier::FrontierRow;
use super::io::{fmt_float, reader, writer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Svg,
}

pub const RESULTS_HEADER: [&str; 5] = ["config_hash", "outer_run", "method", "metric", "value"];

pub fn write_results_csv(path: &Path, result: &ExperimentResult) -> Result<()> {
    let mut w = writer(path)?;
    let err = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    };
    w.write_record(RESULTS_HEADER).map_err(err)?;
    for r in &result.records {
        let run = r.outer_run.map_or("all".to_string(), |o| o.to_string());
        w.write_record([
            result.config_hash.as_str(),
            run.as_str(),
            r.method.as_str(),
            r.metric.as_str(),
            fmt_float(r.value).as_str(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a results CSV written for a single configuration.
pub fn read_results_csv(path: &Path) -> Result<ExperimentResult> {
    let mut rdr = reader(path)?;
    let bad = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let header = rdr.headers().map_err(|e| bad(1, e.to_string()))?;
    if header.iter().ne(RESULTS_HEADER) {
        return Err(bad(1, format!("expected header {}", RESULTS_HEADER.join(","))));
    }
    let mut out = ExperimentResult::default();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        if rec.len() != 5 {
            return Err(bad(line, "expected 5 columns".into()));
        }
        if out.config_hash.is_empty() {
            out.config_hash = rec[0].to_string();
        } else if out.config_hash != rec[0] {
            return Err(bad(line, "mixed config hashes".into()));
        }
        let outer_run = match &rec[1] {
            "all" => None,
            s => Some(s.parse().map_err(|_| bad(line, format!("bad outer_run {s:?}")))?),
        };
        let value = rec[4].parse().map_err(|_| bad(line, format!("bad value {:?}", &rec[4])))?;
        out.records.push(Record {
            outer_run,
            method: rec[2].to_string(),
            metric: rec[3].to_string(),
            value,
        });
    }
    Ok(out)
}

/// Writes `results.csv` or `methods.svg` (aggregate stability per method)
/// into `dir`.
pub fn emit_report(result: &ExperimentResult, format: ReportFormat, dir: &Path) -> Result<PathBuf> {
    if result.records.is_empty() {
        return Err(Error::invalid("no results to report"));
    }
    match format {
        ReportFormat::Csv => {
            let path = dir.join("results.csv");
            write_results_csv(&path, result)?;
            Ok(path)
        }
        ReportFormat::Svg => {
            let bars: Vec<(String, f64)> = result
                .methods()
                .into_iter()
                .filter_map(|m| result.value(&m, STABILITY).map(|v| (m, v)))
                .collect();
            if bars.is_empty() {
                return Err(Error::invalid("results hold no stability values"));
            }
            let path = dir.join("methods.svg");
            write_file(&path, &bar_chart("Stability by method", &bars))?;
            Ok(path)
        }
    }
}

pub const FRONTIER_HEADER: [&str; 8] = [
    "r",
    "full_scarv",
    "seed_mean",
    "seed_median",
    "seed_borda",
    "best_upper",
    "delta_best",
    "winner_rule",
];

/// Writes `frontier.csv` or `frontier.svg` (stability against `R`, one
/// series per method).
pub fn emit_frontier(rows: &[FrontierRow], format: ReportFormat, dir: &Path) -> Result<PathBuf> {
    if rows.is_empty() {
        return Err(Error::invalid("no frontier rows to report"));
    }
    match format {
        ReportFormat::Csv => {
            let path = dir.join("frontier.csv");
            let mut w = writer(&path)?;
            let err = |e: csv::Error| Error::Parse {
                path: path.clone(),
                line: 0,
                message: e.to_string(),
            };
            w.write_record(FRONTIER_HEADER).map_err(err)?;
            for r in rows {
                let mut rec: Vec<String> = vec![r.r.to_string()];
                rec.extend(
                    [r.full_scarv, r.seed_mean, r.seed_median, r.seed_borda, r.best_upper, r.delta_best]
                        .map(fmt_float),
                );
                rec.push(r.winner_rule.to_string());
                w.write_record(&rec).map_err(err)?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
            Ok(path)
        }
        ReportFormat::Svg => {
            let xs: Vec<f64> = rows.iter().map(|r| r.r as f64).collect();
            let series = vec![
                ("full_scarv".to_string(), rows.iter().map(|r| r.full_scarv).collect()),
                ("seed_mean".to_string(), rows.iter().map(|r| r.seed_mean).collect()),
                ("seed_median".to_string(), rows.iter().map(|r| r.seed_median).collect()),
                ("seed_borda".to_string(), rows.iter().map(|r| r.seed_borda).collect()),
            ];
            let path = dir.join("frontier.svg");
            write_file(&path, &line_chart("Stability vs seed budget R", "R", &xs, &series))?;
            Ok(path)
        }
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 60.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn y_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if hi - lo < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        out,
        r#"<g class="axes" stroke="black"><line x1="{PAD}" y1="{}" x2="{}" y2="{}"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{}"/></g>"#,
        H - PAD,
        W - PAD,
        H - PAD,
        H - PAD
    );
}

fn y_ticks(out: &mut String, lo: f64, hi: f64) {
    for t in 0..=4 {
        let v = lo + (hi - lo) * t as f64 / 4.0;
        let y = H - PAD - (H - 2.0 * PAD) * t as f64 / 4.0;
        let _ = writeln!(out, r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#, PAD - 6.0, y + 4.0, fmt_float((v * 1e4).round() / 1e4));
    }
}

/// One `<polyline class="series">` per series and one `<circle>` per point.
fn line_chart(title: &str, x_label: &str, xs: &[f64], series: &[(String, Vec<f64>)]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (lo, hi) = y_range(series.iter().flat_map(|s| s.1.iter().copied()));
    let (x0, x1) = (xs.iter().copied().fold(f64::INFINITY, f64::min), xs.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let span = if x1 > x0 { x1 - x0 } else { 1.0 };
    let px = |x: f64| PAD + (W - 2.0 * PAD) * if x1 > x0 { (x - x0) / span } else { 0.5 };
    let py = |y: f64| H - PAD - (H - 2.0 * PAD) * (y - lo) / (hi - lo);
    y_ticks(&mut out, lo, hi);
    for &x in xs {
        let _ = writeln!(out, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, px(x), H - PAD + 16.0, fmt_float(x));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 16.0, escape(x_label));
    for (s, (name, ys)) in series.iter().enumerate() {
        let color = COLORS[s % COLORS.len()];
        let points: Vec<String> = xs.iter().zip(ys).map(|(&x, &y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        let _ = writeln!(
            out,
            r#"<g class="series" data-name="{}"><polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            escape(name),
            points.join(" ")
        );
        for (&x, &y) in xs.iter().zip(ys) {
            let _ = writeln!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#, px(x), py(y));
        }
        let _ = writeln!(out, "</g>");
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - PAD + 4.0,
            PAD + 16.0 * s as f64,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// One `<rect class="bar">` per method.
fn bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let (lo, hi) = y_range(bars.iter().map(|b| b.1).chain(std::iter::once(0.0)));
    let lo = lo.min(0.0);
    let py = |y: f64| H - PAD - (H - 2.0 * PAD) * (y - lo) / (hi - lo);
    y_ticks(&mut out, lo, hi);
    let slot = (W - 2.0 * PAD) / bars.len() as f64;
    for (i, (name, v)) in bars.iter().enumerate() {
        let x = PAD + slot * i as f64 + slot * 0.15;
        let (top, base) = (py(v.max(0.0)), py(v.min(0.0)));
        let _ = writeln!(
            out,
            r#"<rect class="bar" data-name="{}" x="{x:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
            escape(name),
            slot * 0.7,
            base - top,
            COLORS[i % COLORS.len()]
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{}" text-anchor="middle" font-size="10">{}</text>"#,
            x + slot * 0.35,
            H - PAD + 16.0,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    out
}
