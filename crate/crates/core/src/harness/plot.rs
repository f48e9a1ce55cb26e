//! Minimal SVG line plots from CSV results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const COLORS: &[&str] = &[
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn column(header: &[&str], name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| *h == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

/// Renders `y` against `x` with one polyline per distinct value of
/// `series`. Rows sharing a series and x value are averaged. The output
/// depends only on the CSV contents.
pub fn emit_plot(csv: &str, x: &str, y: &str, series: &str) -> Result<String> {
    let mut lines = csv.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Empty("csv has no header".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    let (xi, yi, si) = (column(&header, x)?, column(&header, y)?, column(&header, series)?);

    // series -> x (as ordered bits) -> (sum, count)
    let mut data: BTreeMap<String, BTreeMap<u64, (f64, f64, u32)>> = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |c: usize| {
            cells
                .get(c)
                .ok_or_else(|| Error::parse(i + 2, "short row"))
        };
        let xv: f64 = get(xi)?.parse().map_err(|e| Error::parse(i + 2, format!("{e}")))?;
        let yv: f64 = get(yi)?.parse().map_err(|e| Error::parse(i + 2, format!("{e}")))?;
        let key = ordered_bits(xv);
        let e = data
            .entry(get(si)?.to_string())
            .or_default()
            .entry(key)
            .or_insert((xv, 0.0, 0));
        e.1 += yv;
        e.2 += 1;
    }
    if data.is_empty() {
        return Err(Error::Empty("csv has no data rows".into()));
    }

    let points: Vec<(&String, Vec<(f64, f64)>)> = data
        .iter()
        .map(|(s, m)| (s, m.values().map(|&(x, sum, n)| (x, sum / n as f64)).collect()))
        .collect();
    let all = points.iter().flat_map(|(_, p)| p.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(px, py) in all {
        x0 = x0.min(px);
        x1 = x1.max(px);
        y0 = y0.min(py);
        y1 = y1.max(py);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |v: f64| MARGIN + (v - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |v: f64| HEIGHT - MARGIN - (v - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{m} {m} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape(x)
    );
    let _ = writeln!(
        svg,
        r#"<text x="14" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y)
    );
    for (label, v, anchor_x, anchor_y) in [
        (x0, true, sx(x0), HEIGHT - MARGIN + 14.0),
        (x1, true, sx(x1), HEIGHT - MARGIN + 14.0),
        (y0, false, MARGIN - 4.0, sy(y0)),
        (y1, false, MARGIN - 4.0, sy(y1)),
    ] {
        let anchor = if v { "middle" } else { "end" };
        let _ = writeln!(
            svg,
            r#"<text x="{anchor_x:.1}" y="{anchor_y:.1}" font-size="10" text-anchor="{anchor}">{}</text>"#,
            fmt_tick(label)
        );
    }
    for (i, (name, pts)) in points.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|&(px, py)| format!("{:.2},{:.2}", sx(px), sy(py)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = MARGIN + 14.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{ly:.1}" font-size="11" fill="{color}">{}</text>"#,
            WIDTH - MARGIN + 4.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// [`emit_plot`] written to `path`; nothing is written on error.
pub fn write_plot(csv: &str, x: &str, y: &str, series: &str, path: &Path) -> Result<()> {
    let svg = emit_plot(csv, x, y, series)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

// Monotone map from f64 to u64 so BTreeMap orders x numerically.
fn ordered_bits(v: f64) -> u64 {
    let b = v.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
