//! Static SVG line charts of odometry signals.
//!
//! Four stacked panels: `t_x`, `t_y` and `theta` per step, then the
//! integrated path. Every series is one `<path>` per panel; non-finite
//! values break the line.

use std::fmt::Write as _;

use rdo_core::eval::integrate;
use rdo_core::SE2Pose;

use crate::Series;

const WIDTH: f64 = 800.0;
const PANEL_HEIGHT: f64 = 180.0;
const MARGIN: f64 = 50.0;
const LEGEND_HEIGHT: f64 = 30.0;
const COLORS: [&str; 8] = [
    "#000000", "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
];

/// Panel names in drawing order.
pub const PANELS: [&str; 4] = ["t_x", "t_y", "theta", "path"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// `(x, y)` points of one series in one panel.
fn points(series: &Series, panel: &str) -> Vec<(f64, f64)> {
    let per_step = |f: fn(&SE2Pose) -> f64| -> Vec<(f64, f64)> {
        series.poses.iter().enumerate().map(|(k, p)| (k as f64, f(p))).collect()
    };
    match panel {
        "t_x" => per_step(|p| p.t_x),
        "t_y" => per_step(|p| p.t_y),
        "theta" => per_step(|p| p.theta),
        _ => integrate(&series.poses).iter().map(|p| (p.t_x, p.t_y)).collect(),
    }
}

fn bounds(pts: impl Iterator<Item = (f64, f64)>) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for (x, y) in pts.filter(|(x, y)| x.is_finite() && y.is_finite()) {
        b = [b[0].min(x), b[1].max(x), b[2].min(y), b[3].max(y)];
    }
    if !b[0].is_finite() {
        return [0.0, 1.0, 0.0, 1.0];
    }
    for k in [0, 2] {
        if b[k + 1] - b[k] < 1e-9 {
            b[k] -= 0.5;
            b[k + 1] += 0.5;
        }
    }
    b
}

pub fn render_svg(series: &[Series]) -> String {
    let height = LEGEND_HEIGHT + PANELS.len() as f64 * (PANEL_HEIGHT + MARGIN) + MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<g class="legend">"#);
    for (i, ser) in series.iter().enumerate() {
        let x = MARGIN + 150.0 * i as f64;
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(
            s,
            r#"<line x1="{x}" y1="15" x2="{}" y2="15" stroke="{color}" stroke-width="2"/><text class="label" x="{}" y="19">{}</text>"#,
            x + 20.0,
            x + 25.0,
            escape(&ser.label)
        );
    }
    let _ = writeln!(s, "</g>");

    let inner_w = WIDTH - 2.0 * MARGIN;
    for (p, panel) in PANELS.iter().enumerate() {
        let top = LEGEND_HEIGHT + MARGIN + p as f64 * (PANEL_HEIGHT + MARGIN);
        let all: Vec<Vec<(f64, f64)>> = series.iter().map(|ser| points(ser, panel)).collect();
        let [x0, x1, y0, y1] = bounds(all.iter().flatten().copied());
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * inner_w;
        let sy = |y: f64| top + PANEL_HEIGHT - (y - y0) / (y1 - y0) * PANEL_HEIGHT;
        let _ = writeln!(s, r#"<g class="panel" data-panel="{panel}">"#);
        let _ = writeln!(
            s,
            r##"<rect x="{MARGIN}" y="{top}" width="{inner_w}" height="{PANEL_HEIGHT}" fill="none" stroke="#999"/>"##
        );
        let _ = writeln!(s, r#"<text x="{MARGIN}" y="{:.1}">{panel}</text>"#, top - 6.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y1:.4}</text><text x="{:.1}" y="{:.1}" text-anchor="end">{y0:.4}</text>"#,
            MARGIN - 4.0,
            top + 10.0,
            MARGIN - 4.0,
            top + PANEL_HEIGHT
        );
        for (i, (ser, pts)) in series.iter().zip(&all).enumerate() {
            let mut d = String::new();
            let mut pen_down = false;
            for &(x, y) in pts {
                if !(x.is_finite() && y.is_finite()) {
                    pen_down = false;
                    continue;
                }
                let _ = write!(d, "{}{:.2},{:.2} ", if pen_down { 'L' } else { 'M' }, sx(x), sy(y));
                pen_down = true;
            }
            let _ = writeln!(
                s,
                r#"<path class="series" data-label="{}" d="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                escape(&ser.label),
                d.trim_end(),
                COLORS[i % COLORS.len()]
            );
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

/// Long-format table of everything drawn: per-step values and the
/// integrated position after each step.
pub fn series_csv(series: &[Series]) -> String {
    let mut s = String::from("series,step,t_x,t_y,theta,x,y\n");
    for ser in series {
        let path = integrate(&ser.poses);
        for (k, (p, a)) in ser.poses.iter().zip(&path[1..]).enumerate() {
            let _ = writeln!(s, "{},{k},{},{},{},{},{}", ser.label, p.t_x, p.t_y, p.theta, a.t_x, a.t_y);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(label: &str, n: usize) -> Series {
        Series {
            label: label.into(),
            poses: (0..n).map(|k| SE2Pose::new(1.0 + 0.01 * k as f64, 0.0, 0.001)).collect(),
        }
    }

    #[test]
    fn one_path_per_series_and_panel() {
        let svg = render_svg(&[series("gt", 5), series("fused", 5)]);
        assert_eq!(svg.matches(r#"class="panel""#).count(), 4);
        assert_eq!(svg.matches(r#"class="series""#).count(), 8);
        assert_eq!(svg.matches(r#"class="label""#).count(), 2);
    }

    #[test]
    fn nan_breaks_the_line() {
        let mut s = series("est", 4);
        s.poses[2] = SE2Pose {
            t_x: f64::NAN,
            t_y: f64::NAN,
            theta: f64::NAN,
        };
        let svg = render_svg(&[s]);
        let tx = svg.split(r#"data-panel="t_x""#).nth(1).unwrap();
        let d = tx.split(r#"d=""#).nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(d.matches('M').count(), 2);
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn labels_are_escaped() {
        assert!(render_svg(&[series("a<b", 2)]).contains("a&lt;b"));
    }

    #[test]
    fn csv_rows() {
        let csv = series_csv(&[series("gt", 3), series("x", 3)]);
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.lines().nth(3).unwrap().starts_with("gt,2,"));
    }
}
