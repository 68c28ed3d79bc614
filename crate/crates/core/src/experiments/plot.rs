//! Self-contained log-log SVG of a convergence table.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::fit::fit_rate;
use super::study::{Column, ConvergenceTable};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

struct Series {
    label: &'static str,
    color: &'static str,
    points: Column,
    bound: Column,
}

const SERIES: [Series; 2] = [
    Series {
        label: "TV",
        color: "#1f77b4",
        points: Column::MeanTv,
        bound: Column::BoundTvExpected,
    },
    Series {
        label: "W1",
        color: "#d62728",
        points: Column::MeanW1,
        bound: Column::BoundW1Expected,
    },
];

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, log_x: f64) -> f64 {
        let span = (self.x1 - self.x0).max(1e-12);
        LEFT + (log_x - self.x0) / span * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, log_y: f64) -> f64 {
        let span = (self.y1 - self.y0).max(1e-12);
        HEIGHT - BOTTOM - (log_y - self.y0) / span * (HEIGHT - TOP - BOTTOM)
    }
}

fn positive_points(table: &ConvergenceTable, c: Column) -> Vec<(f64, f64)> {
    table
        .rows
        .iter()
        .filter_map(|r| r.get(c).filter(|v| *v > 0.0 && v.is_finite()).map(|v| ((r.n as f64).log10(), v.log10())))
        .collect()
}

/// Renders the plot: mean distances as markers, analytic bounds as dashed
/// curves, fitted rates as solid lines (only when the fit is defined).
pub fn render_svg(table: &ConvergenceTable) -> Result<String> {
    if table.is_empty() {
        return Err(Error::InvalidArgument("cannot plot an empty table".into()));
    }
    let mut all = Vec::new();
    for s in &SERIES {
        all.extend(positive_points(table, s.points));
        all.extend(positive_points(table, s.bound));
    }
    let ns: Vec<f64> = table.rows.iter().map(|r| (r.n as f64).log10()).collect();
    let mut frame = Frame {
        x0: ns.iter().copied().fold(f64::INFINITY, f64::min).floor(),
        x1: ns.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil(),
        y0: all.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).floor(),
        y1: all.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).ceil(),
    };
    if frame.x1 <= frame.x0 {
        frame.x1 = frame.x0 + 1.0;
    }
    if !frame.y0.is_finite() {
        frame.y0 = -1.0;
        frame.y1 = 0.0;
    }
    if frame.y1 <= frame.y0 {
        frame.y1 = frame.y0 + 1.0;
    }

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (l, r, t, b) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        s,
        r#"<rect x="{l:.2}" y="{t:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        r - l,
        b - t
    );
    for e in frame.x0 as i32..=frame.x1 as i32 {
        let x = frame.px(e as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{b:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{e}</text>"#,
            b + 5.0,
            b + 18.0
        );
    }
    for e in frame.y0 as i32..=frame.y1 as i32 {
        let y = frame.py(e as f64);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{l:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">1e{e}</text>"#,
            l - 5.0,
            l - 8.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">N</text>"#,
        (l + r) / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">distance</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0
    );

    let mut legend_y = t + 10.0;
    for series in &SERIES {
        let pts = positive_points(table, series.points);
        for (x, y) in &pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{}"/>"#,
                frame.px(*x),
                frame.py(*y),
                series.color
            );
        }
        let bound = positive_points(table, series.bound);
        if bound.len() >= 2 {
            let path: Vec<String> = bound
                .iter()
                .map(|(x, y)| format!("{:.2},{:.2}", frame.px(*x), frame.py(*y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-dasharray="6 4"/>"#,
                path.join(" "),
                series.color
            );
        }
        let mut label = format!("mean {}", series.label);
        if let Ok(fit) = fit_rate(table, series.points) {
            let y_at = |x: f64| (fit.intercept + fit.slope * x * std::f64::consts::LN_10) / std::f64::consts::LN_10;
            let (xa, xb) = (ns[0], ns[ns.len() - 1]);
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}"/>"#,
                frame.px(xa),
                frame.py(y_at(xa)),
                frame.px(xb),
                frame.py(y_at(xb)),
                series.color
            );
            label = format!("{label} (slope {:.3})", fit.slope);
        }
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{legend_y:.2}" r="3.5" fill="{}"/><text x="{:.2}" y="{:.2}">{label}</text>"#,
            r + 12.0,
            series.color,
            r + 20.0,
            legend_y + 4.0
        );
        legend_y += 16.0;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{legend_y:.2}" x2="{:.2}" y2="{legend_y:.2}" stroke="{}" stroke-dasharray="6 4"/><text x="{:.2}" y="{:.2}">{} bound</text>"#,
            r + 6.0,
            r + 18.0,
            series.color,
            r + 20.0,
            legend_y + 4.0,
            series.label
        );
        legend_y += 20.0;
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_plot(table: &ConvergenceTable, path: &Path) -> Result<()> {
    let svg = render_svg(table)?;
    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::study::ConvergenceRow;

    fn row(n: usize, v: f64) -> ConvergenceRow {
        ConvergenceRow {
            n,
            mean_tv: v,
            se_tv: 0.0,
            mean_w1: v / 2.0,
            se_w1: 0.0,
            bound_tv_expected: Some(4.0 * v),
            bound_w1_expected: Some(2.0 * v),
        }
    }

    #[test]
    fn empty_table_is_an_error() {
        assert!(render_svg(&ConvergenceTable::default()).is_err());
    }

    #[test]
    fn single_row_has_no_lines() {
        let t = ConvergenceTable::new(vec![row(16, 0.1)]).unwrap();
        let svg = render_svg(&t).unwrap();
        assert_eq!(svg.matches("<circle").count(), 2 + 2);
        assert!(!svg.contains("<polyline"));
        assert!(!svg.contains("slope"));
    }

    #[test]
    fn full_table_has_fit_and_bounds() {
        let rows = [4usize, 16, 64, 256].iter().map(|&n| row(n, 1.0 / (n as f64).sqrt())).collect();
        let t = ConvergenceTable::new(rows).unwrap();
        let svg = render_svg(&t).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("slope -0.500"));
        assert_eq!(svg, render_svg(&t.clone()).unwrap());
    }

    #[test]
    fn zero_rows_are_skipped() {
        let rows = [1usize, 2, 4, 8].iter().map(|&n| row(n, 0.0)).collect();
        let t = ConvergenceTable::new(rows).unwrap();
        let svg = render_svg(&t).unwrap();
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }
}
