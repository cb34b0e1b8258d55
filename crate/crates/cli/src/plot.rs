//! SVG line plots of sweep CSV files.
//!
//! Rows sharing a group value and an x value are reduced to their median.
//! Infinite y values are drawn at the top of the axis with a hollow marker.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use smdma::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 140.0;
const TOP: f64 = 24.0;
const BOTTOM: f64 = 48.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    /// `(x, median y)` sorted by x.
    pub points: Vec<(f64, f64)>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Groups CSV rows into series.
pub fn series_from_csv(text: &str, x: &str, y: &str, group: &str) -> Result<Vec<Series>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Data("CSV is empty".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::Data(format!("CSV has no column {name:?}")))
    };
    let (xi, yi, gi) = (col(x)?, col(y)?, col(group)?);
    let mut groups: BTreeMap<String, BTreeMap<u64, (f64, Vec<f64>)>> = BTreeMap::new();
    for (n, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != header.len() {
            return Err(Error::Data(format!("CSV row {} has {} cells, header has {}", n + 2, cells.len(), header.len())));
        }
        let num = |i: usize| {
            cells[i]
                .parse::<f64>()
                .map_err(|_| Error::Data(format!("CSV row {}: {:?} is not a number", n + 2, cells[i])))
        };
        let (xv, yv) = (num(xi)?, num(yi)?);
        if xv.is_nan() || yv.is_nan() {
            return Err(Error::Data(format!("CSV row {} contains NaN", n + 2)));
        }
        let key = (xv + 0.0).to_bits();
        groups
            .entry(cells[gi].to_string())
            .or_default()
            .entry(key)
            .or_insert_with(|| (xv, Vec::new()))
            .1
            .push(yv);
    }
    if groups.is_empty() {
        return Err(Error::Data("CSV has a header but no data rows".into()));
    }
    Ok(groups
        .into_iter()
        .map(|(name, pts)| {
            let mut points: Vec<(f64, f64)> = pts.into_values().map(|(x, ys)| (x, median(ys))).collect();
            points.sort_by(|a, b| a.0.total_cmp(&b.0));
            Series { name, points }
        })
        .collect())
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    (0..=4).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 0.01 && v.abs() < 1e4) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn finite_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo > hi {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn render_svg(series: &[Series], x_label: &str, y_label: &str, group: &str) -> String {
    let (x0, x1) = finite_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = finite_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| {
        let x = if x == f64::INFINITY { x1 } else if x == f64::NEG_INFINITY { x0 } else { x };
        LEFT + (x - x0) / (x1 - x0) * pw
    };
    let sy = |y: f64| {
        let y = if y == f64::INFINITY { y1 } else if y == f64::NEG_INFINITY { y0 } else { y };
        TOP + ph - (y - y0) / (y1 - y0) * ph
    };

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#).unwrap();
    writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#).unwrap();
    for t in nice_ticks(x0, x1) {
        let x = sx(t);
        writeln!(s, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, TOP + ph, TOP + ph + 4.0).unwrap();
        writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, TOP + ph + 16.0, fmt_tick(t)).unwrap();
    }
    for t in nice_ticks(y0, y1) {
        let y = sy(t);
        writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 4.0).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, fmt_tick(t)).unwrap();
    }
    writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 10.0, escape(x_label)).unwrap();
    writeln!(s, r#"<text transform="translate(14 {:.2}) rotate(-90)" text-anchor="middle">{}</text>"#, TOP + ph / 2.0, escape(y_label)).unwrap();

    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" ")).unwrap();
        for &(x, y) in &ser.points {
            if x.is_infinite() || y.is_infinite() {
                writeln!(s, r#"<circle class="inf" cx="{:.2}" cy="{:.2}" r="4" fill="white" stroke="{color}"><title>inf</title></circle>"#, sx(x), sy(y)).unwrap();
            } else {
                writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(x), sy(y)).unwrap();
            }
        }
        let ly = TOP + 12.0 + 16.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        writeln!(s, r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#, lx + 18.0).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}={}</text>"#, lx + 22.0, ly + 4.0, escape(group), escape(&ser.name)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "snr_db,ratio,seed,user,psnr_db\n0,1,0,1,10\n0,1,1,1,14\n0,1,2,1,12\n5,1,0,1,inf\n0,1,0,2,3\n";

    #[test]
    fn medians_per_group_and_x() {
        let s = series_from_csv(CSV, "snr_db", "psnr_db", "user").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].name, "1");
        assert_eq!(s[0].points, vec![(0.0, 12.0), (5.0, f64::INFINITY)]);
        assert_eq!(s[1].points, vec![(0.0, 3.0)]);
    }

    #[test]
    fn infinite_values_get_a_marker() {
        let s = series_from_csv(CSV, "snr_db", "psnr_db", "user").unwrap();
        let svg = render_svg(&s, "snr_db", "psnr_db", "user");
        assert_eq!(svg.matches(r#"class="inf""#).count(), 1);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(!svg.contains("NaN") && !svg.contains("inf,"));
    }

    #[test]
    fn empty_and_malformed_input_rejected() {
        assert!(series_from_csv("", "a", "b", "c").is_err());
        assert!(series_from_csv("snr_db,psnr_db,user\n", "snr_db", "psnr_db", "user").is_err());
        assert!(series_from_csv("snr_db,psnr_db,user\n1,2\n", "snr_db", "psnr_db", "user").is_err());
        assert!(series_from_csv("snr_db,psnr_db,user\n1,x,1\n", "snr_db", "psnr_db", "user").is_err());
        assert!(series_from_csv(CSV, "snr_db", "ssim", "user").is_err());
    }
}
