//! SVG line charts of experiment reports.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::experiment::Row;
use crate::HarnessError;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 60.0;

/// Parameters a report can be plotted against.
pub const AXES: [&str; 6] = ["cns", "dps", "vns", "records", "t", "t_sub"];

fn param(row: &Row, name: &str) -> Option<f64> {
    let p = &row.point;
    Some(match name {
        "cns" => p.cns as f64,
        "dps" => p.dps as f64,
        "vns" => p.vns as f64,
        "records" => p.records as f64,
        "t" => p.t,
        "t_sub" => p.t_sub,
        _ => return None,
    })
}

/// Reads a numeric field of a row; `cpu_ms.<role>` picks one role kind.
fn metric(row: &Row, name: &str) -> Option<f64> {
    if let Some(kind) = name.strip_prefix("cpu_ms.") {
        return row.cpu_ms.get(kind).copied();
    }
    serde_json::to_value(row).ok()?.get(name)?.as_f64()
}

/// The axis that varies across `rows`, if exactly one does.
pub fn swept_axis(rows: &[Row]) -> Option<&'static str> {
    let varying: Vec<&str> = AXES
        .into_iter()
        .filter(|a| rows.iter().any(|r| param(r, a) != param(&rows[0], a)))
        .collect();
    match varying[..] {
        [a] => Some(a),
        _ => None,
    }
}

/// Mean of `metric` per value of `x`, averaging over repetitions.
pub fn series(rows: &[Row], x: &str, y: &str) -> Result<Vec<(f64, f64)>, HarnessError> {
    let mut acc: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
    for r in rows {
        let xv = param(r, x).ok_or_else(|| HarnessError::Invalid(format!("unknown axis {x}")))?;
        let Some(yv) = metric(r, y) else {
            return Err(HarnessError::Invalid(format!("row has no numeric {y}")));
        };
        let e = acc.entry(xv.to_bits()).or_insert((xv, 0.0, 0));
        e.1 += yv;
        e.2 += 1;
    }
    let mut pts: Vec<(f64, f64)> = acc.into_values().map(|(x, s, n)| (x, s / n as f64)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pts)
}

fn span(vals: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let lo = vals.clone().fold(f64::INFINITY, f64::min);
    let hi = vals.fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

fn label(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e9 {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

/// Draws `y` against `x` as a polyline with one marker per point.
pub fn line_chart(points: &[(f64, f64)], x: &str, y: &str) -> String {
    let (x0, x1) = span(points.iter().map(|p| p.0));
    let (y0, y1) = span(points.iter().map(|p| p.1).chain([0.0]));
    let sx = |v: f64| MARGIN + (v - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |v: f64| H - MARGIN - (v - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let (left, right, top, bottom) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{left} {top} V{bottom} H{right}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let v = y0 + (y1 - y0) * i as f64 / 4.0;
        let py = sy(v);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{py:.1}" x2="{right}" y2="{py:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            left - 6.0,
            py + 4.0,
            label(v)
        );
    }
    for &(vx, _) in points {
        let px = sx(vx);
        let _ = writeln!(
            s,
            r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            bottom + 18.0,
            label(vx)
        );
    }
    let path: Vec<String> = points.iter().map(|&(a, b)| format!("{:.1},{:.1}", sx(a), sy(b))).collect();
    let _ = writeln!(
        s,
        r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##,
        path.join(" ")
    );
    for &(a, b) in points {
        let _ = writeln!(s, r##"<circle cx="{:.1}" cy="{:.1}" r="3" fill="#1f77b4"/>"##, sx(a), sy(b));
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x}</text>"#,
        W / 2.0,
        H - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{y}</text>"#,
        H / 2.0,
        H / 2.0
    );
    s.push_str("</svg>\n");
    s
}

/// Plots `y` over the axis the report sweeps.
pub fn plot_report(rows: &[Row], y: &str) -> Result<String, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Invalid("empty report".into()));
    }
    let x = swept_axis(rows)
        .ok_or_else(|| HarnessError::Invalid("the report must sweep exactly one parameter".into()))?;
    Ok(line_chart(&series(rows, x, y)?, x, y))
}
