//! CSV and SVG emission for sweep results.
//!
//! CSV layout: `#`-prefixed provenance lines (config digest, seed, any
//! parameter warnings), then the header `snr_db,metric,value,trials,errors,ci95`
//! and one row per SNR point. Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{AfdmError, Result};

use super::sweep::{SweepResult, SweepRow};

pub const CSV_HEADER: &str = "snr_db,metric,value,trials,errors,ci95";

pub fn csv_string(result: &SweepResult) -> String {
    let mut out = String::new();
    writeln!(out, "# config_digest={}", result.config_digest).unwrap();
    writeln!(out, "# seed={}", result.seed).unwrap();
    for w in &result.warnings {
        writeln!(out, "# warning: {w}").unwrap();
    }
    writeln!(out, "{CSV_HEADER}").unwrap();
    for r in &result.rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.snr_db, r.metric, r.value, r.trials, r.errors, r.ci95
        )
        .unwrap();
    }
    out
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(result)).map_err(|e| AfdmError::io(path, e))
}

/// Parses rows back from [`csv_string`] output, ignoring comment lines.
pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let bad = |msg: String| AfdmError::Parse {
        path: "<csv>".into(),
        message: msg,
    };
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(bad(format!("expected header '{CSV_HEADER}', got {other:?}"))),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad(format!("row {}: expected 6 fields, got {}", i + 1, f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("row {}: {e}", i + 1)));
            let int = |s: &str| s.parse::<u64>().map_err(|e| bad(format!("row {}: {e}", i + 1)));
            Ok(SweepRow {
                snr_db: num(f[0])?,
                metric: f[1].to_string(),
                value: num(f[2])?,
                trials: int(f[3])?,
                errors: int(f[4])?,
                ci95: num(f[5])?,
            })
        })
        .collect()
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Log-scaled plot of one or more labelled results against SNR.
pub fn plot_svg(series: &[(&str, &SweepResult)]) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (70.0, 150.0, 20.0, 50.0);
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|(_, r)| r.rows.iter().map(|row| (row.snr_db, row.value)))
        .collect();
    let positive: Vec<f64> = pts.iter().map(|p| p.1).filter(|v| *v > 0.0).collect();
    let ymin = positive.iter().copied().fold(f64::INFINITY, f64::min);
    let ymax = positive.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (dlo, dhi) = if positive.is_empty() {
        (-1.0, 0.0)
    } else {
        let lo = ymin.log10().floor();
        (lo, ymax.log10().ceil().max(lo + 1.0))
    };
    let xmin = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let xmax = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let (xmin, xmax) = if pts.is_empty() { (0.0, 1.0) } else if xmax > xmin { (xmin, xmax) } else { (xmin - 1.0, xmax + 1.0) };
    let pw = w - left - right;
    let ph = h - top - bottom;
    let sx = |x: f64| left + (x - xmin) / (xmax - xmin) * pw;
    let sy = |y: f64| top + (dhi - y.max(10f64.powf(dlo)).log10()) / (dhi - dlo) * ph;

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#).unwrap();
    for (label, r) in series {
        writeln!(s, "<!-- {label}: config_digest={} seed={} -->", r.config_digest, r.seed).unwrap();
    }
    writeln!(s, r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#).unwrap();
    for d in dlo as i64..=dhi as i64 {
        let y = sy(10f64.powi(d as i32));
        writeln!(s, r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ccc"/>"##, left + pw).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{d}</text>"#, left - 6.0, y + 4.0).unwrap();
    }
    let mut xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    for x in xs {
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x}</text>"#, sx(x), top + ph + 18.0).unwrap();
    }
    writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">SNR (dB)</text>"#, left + pw / 2.0, h - 8.0).unwrap();
    for (i, (label, r)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = r
            .rows
            .iter()
            .filter(|row| row.value > 0.0)
            .map(|row| format!("{:.2},{:.2}", sx(row.snr_db), sy(row.value)))
            .collect();
        writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, path.join(" ")).unwrap();
        for p in &path {
            let (x, y) = p.split_once(',').unwrap();
            writeln!(s, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#).unwrap();
        }
        let ly = top + 16.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        writeln!(s, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0).unwrap();
        let metric = r.rows.first().map_or("", |row| row.metric.as_str());
        writeln!(s, r#"<text x="{}" y="{}">{} ({metric})</text>"#, lx + 26.0, ly + 4.0, escape(label)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn emit_plot(result: &SweepResult, path: &Path) -> Result<()> {
    emit_plot_series(&[("result", result)], path)
}

pub fn emit_plot_series(series: &[(&str, &SweepResult)], path: &Path) -> Result<()> {
    std::fs::write(path, plot_svg(series)).map_err(|e| AfdmError::io(path, e))
}
