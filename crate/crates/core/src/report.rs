//! Sweep export: CSV table and SVG scatter of the value profiles.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::pareto::SweepPoint;

pub const CSV_HEADER: [&str; 6] = ["w1", "w2", "lambda1", "lambda2", "u1", "u2"];

/// Rounds to 12 significant digits and prints the shortest form of the
/// rounded value. Non-finite values print as `NaN`, `inf` or `-inf`.
pub fn sig12(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    // Normalizes -0 to 0.
    format!("{}", r + 0.0)
}

/// One CSV row per sweep point. A failed point keeps its weights and
/// weighting factors and reports `NaN` values.
pub fn sweep_csv(points: &[SweepPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for pt in points {
        let (u1, u2) = match &pt.result {
            Ok(s) => (s.profile.u1, s.profile.u2),
            Err(_) => (f64::NAN, f64::NAN),
        };
        let row = [pt.weights[0], pt.weights[1], pt.lambda[0], pt.lambda[1], u1, u2].map(sig12);
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

/// Parses a weights file: one `w1,w2` pair per line. Blank lines and lines
/// starting with `#` are skipped, as is a `w1,w2` header.
pub fn parse_weights(text: &str) -> Result<Vec<[f64; 2]>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.replace(' ', "") == "w1,w2" {
            continue;
        }
        out.push(parse_weight_pair(line).map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?);
    }
    if out.is_empty() {
        return Err(Error::Format("weights file has no rows".into()));
    }
    Ok(out)
}

/// Parses `w1,w2` and checks that both are non-negative and sum to one.
pub fn parse_weight_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("expected `w1,w2`, got `{s}`"));
    }
    let mut w = [0.0f64; 2];
    for (k, p) in parts.iter().enumerate() {
        w[k] = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
    }
    if !(w[0] >= 0.0 && w[1] >= 0.0) {
        return Err(format!("weights {s} must be non-negative"));
    }
    if (w[0] + w[1] - 1.0).abs() > 1e-9 {
        return Err(format!("weights {s} must sum to 1"));
    }
    Ok(w)
}

/// Plain scatter of `(u1, u2)` over the successful points.
pub fn sweep_svg(points: &[SweepPoint]) -> String {
    let pts: Vec<(f64, f64, f64)> = points
        .iter()
        .filter_map(|p| p.result.as_ref().ok().map(|s| (p.weights[0], s.profile.u1, s.profile.u2)))
        .collect();
    let (w, h, m) = (480.0, 360.0, 50.0);
    let span = |vals: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        }
    };
    let (x0, x1) = span(&mut pts.iter().map(|p| p.1));
    let (y0, y1) = span(&mut pts.iter().map(|p| p.2));
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<path d=\"M{m} {m} V{} H{}\" fill=\"none\" stroke=\"black\"/>",
        h - m,
        w - m
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">u1 (discounted reachability)</text>",
        w / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 {})\">u2 (negated attention cost)</text>",
        h / 2.0,
        h / 2.0
    );
    for (v, x) in [(x0, m), (x1, w - m)] {
        let _ = writeln!(s, "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\" font-size=\"10\">{}</text>", h - m + 14.0, short(v));
    }
    for (v, y) in [(y0, h - m), (y1, m)] {
        let _ = writeln!(s, "<text x=\"{}\" y=\"{y}\" text-anchor=\"end\" font-size=\"10\">{}</text>", m - 4.0, short(v));
    }
    for (b, u1, u2) in &pts {
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"steelblue\"><title>w1={} u1={} u2={}</title></circle>",
            sx(*u1),
            sy(*u2),
            sig12(*b),
            sig12(*u1),
            sig12(*u2)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn short(x: f64) -> String {
    format!("{x:.4}")
}
