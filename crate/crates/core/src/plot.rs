//! Self-contained SVG bar charts of per-class average precision.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::report::MetricReport;
use crate::risk_grid;
use crate::sampler::Task;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN_LEFT: f64 = 50.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 40.0;

/// Renders the per-class AP of `report`, one bar per class; classes without
/// an AP get a zero-height bar. Risk reports get a background band per region, shaded by the
/// region's risk weight.
pub fn per_class_ap_svg(report: &MetricReport) -> Result<String> {
    if report.per_class.is_empty() {
        return Err(Error::MissingSection("per_class"));
    }
    let n = report.per_class.len();
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let slot = plot_w / n as f64;
    let base_y = MARGIN_TOP + plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{HEIGHT:.0}" viewBox="0 0 {WIDTH:.0} {HEIGHT:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{} / {}: per-class AP</text>"#,
        WIDTH / 2.0,
        escape(&report.model),
        report.task
    );

    if report.task == Task::Risk {
        let grid = report.config_echo.grid();
        for i in 0..n {
            let w = risk_grid::risk_weight(i as u32 + 1, &grid);
            let _ = writeln!(
                s,
                r##"<rect class="risk" x="{:.2}" y="{MARGIN_TOP:.2}" width="{slot:.2}" height="{plot_h:.2}" fill="#d62728" fill-opacity="{:.3}"/>"##,
                MARGIN_LEFT + slot * i as f64,
                0.25 * w
            );
        }
    }

    for tick in 0..=4 {
        let v = tick as f64 / 4.0;
        let y = base_y - v * plot_h;
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#cccccc"/>"##,
            MARGIN_LEFT + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.2}</text>"#,
            MARGIN_LEFT - 6.0,
            y + 4.0
        );
    }

    let bar_w = slot * 0.7;
    for (i, e) in report.per_class.iter().enumerate() {
        let x = MARGIN_LEFT + slot * i as f64 + (slot - bar_w) / 2.0;
        let h = e.ap.unwrap_or(0.0).clamp(0.0, 1.0) * plot_h;
        let value = e.ap.map_or_else(|| "n/a".to_string(), |ap| format!("{ap:.3}"));
        let _ = writeln!(
            s,
            r##"<rect class="bar" x="{x:.2}" y="{:.2}" width="{bar_w:.2}" height="{h:.2}" fill="#1f77b4"><title>{} {value}</title></rect>"##,
            base_y - h,
            escape(&e.class)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x + bar_w / 2.0,
            base_y + 16.0,
            escape(&e.class)
        );
    }
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN_LEFT:.2}" y1="{base_y:.2}" x2="{:.2}" y2="{base_y:.2}" stroke="black"/>"#,
        MARGIN_LEFT + plot_w
    );
    s.push_str("</svg>\n");
    Ok(s)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
