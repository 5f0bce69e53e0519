//! Critical-difference chart as a standalone SVG document.

use std::fmt::Write as _;
use std::path::Path;

use super::{CdReport, StatsError};

/// Geometry of the chart. Rank `r` of `k` maps to
/// `axis_left + (r - 1) / (k - 1) * (axis_right - axis_left)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartLayout {
    pub width: f64,
    pub axis_left: f64,
    pub axis_right: f64,
    pub axis_y: f64,
    pub bar_top: f64,
    pub bar_gap: f64,
    pub row_height: f64,
}

impl Default for ChartLayout {
    fn default() -> Self {
        Self {
            width: 900.0,
            axis_left: 220.0,
            axis_right: 680.0,
            axis_y: 70.0,
            bar_top: 14.0,
            bar_gap: 7.0,
            row_height: 20.0,
        }
    }
}

impl ChartLayout {
    pub fn rank_to_x(&self, rank: f64, k: usize) -> f64 {
        let span = (k.max(2) - 1) as f64;
        self.axis_left + (rank - 1.0) / span * (self.axis_right - self.axis_left)
    }

    fn scale(&self, k: usize) -> f64 {
        (self.axis_right - self.axis_left) / (k.max(2) - 1) as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChartOptions {
    pub layout: ChartLayout,
    /// Method whose mean score the labels report deltas against, in
    /// percentage points of mean score over seeds.
    pub baseline: Option<String>,
    pub title: Option<String>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub fn render_cd_chart(report: &CdReport, opts: &ChartOptions) -> String {
    let lay = &opts.layout;
    let k = report.methods.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        report.avg_ranks[a]
            .total_cmp(&report.avg_ranks[b])
            .then(a.cmp(&b))
    });
    let left_count = k.div_ceil(2);
    let bars_bottom = lay.axis_y + lay.bar_top + lay.bar_gap * report.groups.len() as f64;
    let rows_top = bars_bottom + 16.0;
    let height = rows_top + lay.row_height * left_count as f64 + 20.0;

    let baseline_mean = opts.baseline.as_ref().and_then(|b| {
        let i = report.methods.iter().position(|m| m == b)?;
        report.mean_scores.get(i).copied()
    });

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="12">"#,
        w = lay.width,
        h = height
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    if let Some(t) = &opts.title {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="16" text-anchor="middle" font-size="14">{}</text>"#,
            lay.width / 2.0,
            esc(t)
        );
    }

    // CD ruler above the axis.
    let ruler_y = lay.axis_y - 38.0;
    let ruler_end = lay.axis_left + report.cd * lay.scale(k);
    let _ = writeln!(
        s,
        r#"<g class="cd-ruler"><line x1="{:.2}" y1="{ry:.2}" x2="{:.2}" y2="{ry:.2}" stroke="black" stroke-width="1.5"/><text x="{:.2}" y="{:.2}" text-anchor="middle">CD = {:.3}</text></g>"#,
        lay.axis_left,
        ruler_end,
        (lay.axis_left + ruler_end) / 2.0,
        ruler_y - 5.0,
        report.cd,
        ry = ruler_y
    );

    // Rank axis with integer ticks.
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black"/>"#,
        lay.axis_left,
        lay.axis_right,
        y = lay.axis_y
    );
    for r in 1..=k {
        let x = lay.rank_to_x(r as f64, k);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{r}</text>"#,
            lay.axis_y - 6.0,
            lay.axis_y,
            lay.axis_y - 10.0
        );
    }

    // Groups of indistinguishable methods.
    for (g, members) in report.groups.iter().enumerate() {
        let ranks: Vec<f64> = members
            .iter()
            .filter_map(|m| report.methods.iter().position(|x| x == m))
            .map(|i| report.avg_ranks[i])
            .collect();
        let lo = ranks.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ranks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let y = lay.axis_y + lay.bar_top + lay.bar_gap * g as f64;
        let _ = writeln!(
            s,
            r#"<line class="group-bar" x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="black" stroke-width="3" stroke-linecap="round"/>"#,
            lay.rank_to_x(lo, k),
            lay.rank_to_x(hi, k)
        );
    }

    // Method labels: best half on the left, the rest on the right.
    for (pos, &i) in order.iter().enumerate() {
        let x = lay.rank_to_x(report.avg_ranks[i], k);
        let (row, left) = if pos < left_count {
            (pos, true)
        } else {
            (k - 1 - pos, false)
        };
        let y = rows_top + lay.row_height * row as f64;
        let (end_x, anchor, text_x) = if left {
            (lay.axis_left - 10.0, "end", lay.axis_left - 14.0)
        } else {
            (lay.axis_right + 10.0, "start", lay.axis_right + 14.0)
        };
        let mut label = esc(&report.methods[i]);
        if let (Some(base), Some(&mean)) = (baseline_mean, report.mean_scores.get(i)) {
            if opts.baseline.as_deref() != Some(report.methods[i].as_str()) {
                let _ = write!(label, " ({:+.2}%)", 100.0 * (mean - base));
            }
        }
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="gray" points="{x:.2},{:.2} {x:.2},{y:.2} {end_x:.2},{y:.2}"/>"#,
            lay.axis_y
        );
        let _ = writeln!(
            s,
            r#"<text class="method-label" x="{text_x:.2}" y="{:.2}" text-anchor="{anchor}">{label} <tspan fill="gray">{:.2}</tspan></text>"#,
            y + 4.0,
            report.avg_ranks[i]
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_cd_chart(report: &CdReport, opts: &ChartOptions, path: &Path) -> Result<(), StatsError> {
    std::fs::write(path, render_cd_chart(report, opts))?;
    Ok(())
}
