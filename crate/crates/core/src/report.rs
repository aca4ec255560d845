//! Plain-text emitters: comma-separated tables, static SVG plots and
//! line-oriented `key: value` reports.

use std::fmt::Write as _;
use std::io::Write;

use nalgebra::DMatrix;

use crate::energy::EnergyProfile;
use crate::error::Result;
use crate::geometry::{CircularityVerdict, PolygonVerdict};
use crate::optimizer::{BandwidthEstimate, TracePoint};

/// Shortest representation that parses back to the same value; exponent
/// notation outside `[1e-4, 1e16)`.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e16).contains(&a) || !a.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, format_float)
}

pub fn write_embedding_csv<W: Write>(z: &DMatrix<f64>, mut out: W) -> Result<()> {
    writeln!(out, "z1,z2")?;
    for i in 0..z.nrows() {
        writeln!(out, "{},{}", format_float(z[(i, 0)]), format_float(z[(i, 1)]))?;
    }
    Ok(())
}

pub fn write_profile_csv<W: Write>(profile: &EnergyProfile, mut out: W) -> Result<()> {
    writeln!(out, "sigma,energy,perimeter,degenerate")?;
    for s in &profile.samples {
        writeln!(
            out,
            "{},{},{},{}",
            format_float(s.sigma),
            opt(s.energy),
            opt(s.perimeter),
            s.degenerate
        )?;
    }
    Ok(())
}

pub fn write_trace_csv<W: Write>(trace: &[TracePoint], mut out: W) -> Result<()> {
    writeln!(out, "phase,sigma,energy")?;
    for p in trace {
        writeln!(
            out,
            "{},{},{}",
            p.phase.as_str(),
            format_float(p.sigma),
            format_float(p.energy)
        )?;
    }
    Ok(())
}

/// Ordered `key: value` pairs, rendered one per line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}: {v}");
        }
        s
    }
}

pub fn estimate_report(est: &BandwidthEstimate, report: &mut Report) {
    report
        .push("exists", est.exists)
        .push("sigma_star", opt(est.sigma_star))
        .push("energy_at_star", opt(est.energy_at_star))
        .push("best_sigma", format_float(est.best_sigma))
        .push("best_energy", format_float(est.best_energy))
        .push(
            "boundary",
            est.boundary.map_or("none", |b| match b {
                crate::optimizer::Boundary::Lower => "lower",
                crate::optimizer::Boundary::Upper => "upper",
            }),
        )
        .push("sigma_min", format_float(est.bounds.0))
        .push("sigma_max", format_float(est.bounds.1))
        .push("rounds", est.rounds)
        .push("trace_points", est.trace.len());
}

pub fn polygon_report(poly: &PolygonVerdict, report: &mut Report) {
    let witnesses: Vec<String> = poly.witnesses.iter().map(ToString::to_string).collect();
    report
        .push("classification", poly.classification.as_str())
        .push("epsilon", format_float(poly.epsilon))
        .push("witness_count", poly.witnesses.len())
        .push("witnesses", witnesses.join(" "));
}

pub fn verdict_report(v: &CircularityVerdict, report: &mut Report) {
    report
        .push("accept_h0", v.accept_h0)
        .push("reason", v.reason.as_str())
        .push("seed", v.seed)
        .push("sigma_star", opt(v.sigma_star))
        .push("energy_at_star", opt(v.energy_at_star));
    match &v.polygon {
        Some(p) => polygon_report(p, report),
        None => {
            report.push("classification", "none");
        }
    }
    if let Some(est) = &v.estimate {
        report
            .push("best_sigma", format_float(est.best_sigma))
            .push("best_energy", format_float(est.best_energy))
            .push("sigma_min", format_float(est.bounds.0))
            .push("sigma_max", format_float(est.bounds.1))
            .push("rounds", est.rounds);
    }
    if let Some(d) = &v.diagnostic {
        report.push("diagnostic", d);
    }
}

const WIDTH: f64 = 640.0;
const PANEL: f64 = 220.0;
const MARGIN: f64 = 48.0;

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo <= f64::EPSILON * lo.abs().max(1.0) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn panel(
    svg: &mut String,
    top: f64,
    label: &str,
    xs: (f64, f64),
    points: &[(f64, Option<f64>)],
    colour: &str,
) {
    let ys = range(points.iter().filter_map(|p| p.1));
    let inner = WIDTH - 2.0 * MARGIN;
    let px = |x: f64| MARGIN + (x - xs.0) / (xs.1 - xs.0) * inner;
    let py = |y: f64| top + PANEL - (y - ys.0) / (ys.1 - ys.0) * PANEL;
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{top}" width="{inner}" height="{PANEL}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="{:.1}" font-size="12">{label} [{:.4e}, {:.4e}]</text>"#,
        top - 6.0,
        ys.0,
        ys.1
    );
    // degenerate samples break the curve
    let mut run: Vec<String> = Vec::new();
    let flush = |run: &mut Vec<String>, svg: &mut String| {
        if run.len() > 1 {
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
                run.join(" ")
            );
        }
        run.clear();
    };
    for &(x, y) in points {
        match y {
            Some(y) => run.push(format!("{:.2},{:.2}", px(x), py(y))),
            None => flush(&mut run, svg),
        }
    }
    flush(&mut run, svg);
}

/// Energy and perimeter against `log10 sigma`, one panel each.
pub fn profile_svg(profile: &EnergyProfile) -> String {
    let xs_of = |s: f64| s.log10();
    let xs = range(profile.samples.iter().map(|s| xs_of(s.sigma)));
    let energy: Vec<(f64, Option<f64>)> = profile
        .samples
        .iter()
        .map(|s| (xs_of(s.sigma), s.energy))
        .collect();
    let perimeter: Vec<(f64, Option<f64>)> = profile
        .samples
        .iter()
        .map(|s| (xs_of(s.sigma), s.perimeter))
        .collect();
    let height = 2.0 * PANEL + 3.0 * MARGIN;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    panel(&mut svg, MARGIN, "L2 energy", xs, &energy, "steelblue");
    panel(&mut svg, 2.0 * MARGIN + PANEL, "L1 perimeter", xs, &perimeter, "darkorange");
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN}" y="{:.1}" font-size="12">log10 sigma [{:.3}, {:.3}]</text>"#,
        height - 12.0,
        xs.0,
        xs.1
    );
    svg.push_str("</svg>\n");
    svg
}

/// The embedding joined in row order with the cycle closed; vertex 0 is
/// marked.
pub fn polygon_svg(z: &DMatrix<f64>, title: &str) -> String {
    let side = 560.0;
    let inner = side - 2.0 * MARGIN;
    let xs = range(z.column(0).iter().copied());
    let ys = range(z.column(1).iter().copied());
    let scale = inner / (xs.1 - xs.0).max(ys.1 - ys.0);
    let px = |x: f64| MARGIN + (x - xs.0) * scale;
    let py = |y: f64| side - MARGIN - (y - ys.0) * scale;
    let pts: Vec<String> = (0..z.nrows())
        .map(|i| format!("{:.2},{:.2}", px(z[(i, 0)]), py(z[(i, 1)])))
        .collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{side}" height="{side}" viewBox="0 0 {side} {side}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{MARGIN}" y="24" font-size="12">{title}</text>"#);
    let _ = writeln!(
        svg,
        r#"<polygon fill="none" stroke="steelblue" stroke-width="1" points="{}"/>"#,
        pts.join(" ")
    );
    if z.nrows() > 0 {
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="crimson"/>"#,
            px(z[(0, 0)]),
            py(z[(0, 1)])
        );
    }
    svg.push_str("</svg>\n");
    svg
}
