//! Minimal SVG figures: measured-vs-predicted scatter and loss-budget bars.

use std::fmt::Write;

use crate::domain::DesignKind;
use crate::predict::{BudgetReport, PredictReport};
use crate::region::Region;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 30.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 70.0;
const PALETTE: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn header(out: &mut String) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
    log: bool,
}

impl Axis {
    fn map(&self, v: f64) -> f64 {
        let (v, lo, hi) = if self.log {
            (v.max(f64::MIN_POSITIVE).log10(), self.lo.log10(), self.hi.log10())
        } else {
            (v, self.lo, self.hi)
        };
        self.px_lo + (v - lo) / (hi - lo) * (self.px_hi - self.px_lo)
    }
}

/// Measured mean Q_TLS (vertical bars: one standard error) against the
/// predicted mean (horizontal bars: `multiplier × std`), log-log, with the
/// line of perfect agreement.
pub fn scatter_svg(reports: &[PredictReport]) -> String {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for rep in reports {
        for (p, m) in rep.predicted.iter().zip(&rep.measured) {
            let k = rep.horizontal_error_bar_multiplier;
            for v in [
                p.mean_q_tls - k * p.std_q_tls,
                p.mean_q_tls + k * p.std_q_tls,
                m.mean_q_tls - m.std_err_q_tls,
                m.mean_q_tls + m.std_err_q_tls,
            ] {
                if v.is_finite() && v > 0.0 {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
    }
    if !(lo.is_finite() && hi > 0.0) {
        lo = 1e5;
        hi = 1e7;
    }
    let (lo, hi) = (10f64.powf(lo.log10().floor()), 10f64.powf(hi.log10().ceil()));
    let x = Axis { lo, hi, px_lo: MARGIN_LEFT, px_hi: WIDTH - MARGIN_RIGHT, log: true };
    let y = Axis { lo, hi, px_lo: HEIGHT - MARGIN_BOTTOM, px_hi: MARGIN_TOP, log: true };

    let mut out = String::new();
    header(&mut out);
    frame(&mut out, "Predicted Q_TLS", "Measured Q_TLS");
    let mut decade = lo;
    while decade <= hi * 1.000_001 {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{decade:.0e}</text>"#,
            x.map(decade),
            HEIGHT - MARGIN_BOTTOM + 16.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{decade:.0e}</text>"#,
            MARGIN_LEFT - 6.0,
            y.map(decade) + 4.0
        );
        decade *= 10.0;
    }
    let _ = writeln!(
        out,
        r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#2ca02c" stroke-width="1.5"/>"##,
        x.map(lo),
        y.map(lo),
        x.map(hi),
        y.map(hi)
    );

    for (k, rep) in reports.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        for (p, m) in rep.predicted.iter().zip(&rep.measured) {
            if !p.mean_q_tls.is_finite() {
                continue;
            }
            let cx = x.map(p.mean_q_tls);
            let cy = y.map(m.mean_q_tls);
            let half = rep.horizontal_error_bar_multiplier * p.std_q_tls;
            let _ = writeln!(
                out,
                r##"<line x1="{:.1}" y1="{cy:.1}" x2="{:.1}" y2="{cy:.1}" stroke="#1f77b4"/>"##,
                x.map((p.mean_q_tls - half).max(lo)),
                x.map(p.mean_q_tls + half)
            );
            let _ = writeln!(
                out,
                r##"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="#d62728"/>"##,
                y.map((m.mean_q_tls - m.std_err_q_tls).max(lo)),
                y.map(m.mean_q_tls + m.std_err_q_tls)
            );
            let _ = writeln!(
                out,
                r#"<circle cx="{cx:.1}" cy="{cy:.1}" r="4" fill="{color}"><title>{}</title></circle>"#,
                escape(&format!("{}: {}", rep.label, p.design))
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{}</text>"#,
            MARGIN_LEFT + 10.0,
            MARGIN_TOP + 14.0 * (k as f64 + 1.0),
            escape(&rep.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

fn frame(out: &mut String, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
        HEIGHT - 20.0,
        escape(xlabel)
    );
    let cy = (MARGIN_TOP + HEIGHT - MARGIN_BOTTOM) / 2.0;
    let _ = writeln!(
        out,
        r#"<text x="20" y="{cy:.1}" text-anchor="middle" transform="rotate(-90 20 {cy:.1})">{}</text>"#,
        escape(ylabel)
    );
}

/// Grouped bars per design: the measured loss of each dataset in gray with
/// the predicted `highlight` component drawn inside it.
pub fn budget_svg(report: &BudgetReport, highlight: Region) -> String {
    let groups: Vec<DesignKind> = DesignKind::ALL
        .into_iter()
        .filter(|k| {
            report
                .datasets
                .iter()
                .any(|s| s.budgets.iter().any(|b| b.design.design == *k))
        })
        .collect();
    let top = report
        .datasets
        .iter()
        .flat_map(|s| &s.budgets)
        .flat_map(|b| [b.total_loss, b.predicted_total_loss])
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let top = if top > 0.0 { top * 1.1 } else { 1.0 };
    let y = Axis { lo: 0.0, hi: top, px_lo: HEIGHT - MARGIN_BOTTOM, px_hi: MARGIN_TOP, log: false };

    let mut out = String::new();
    header(&mut out);
    frame(&mut out, "Design", "Dielectric loss (1/Q_TLS)");
    for i in 0..=4 {
        let v = top * i as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.1e}</text>"#,
            MARGIN_LEFT - 6.0,
            y.map(v) + 4.0
        );
    }

    let n_sets = report.datasets.len().max(1);
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let group_w = plot_w / groups.len().max(1) as f64;
    let bar_w = group_w * 0.7 / n_sets as f64;
    for (g, kind) in groups.iter().enumerate() {
        let gx = MARGIN_LEFT + g as f64 * group_w + group_w * 0.15;
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + (g as f64 + 0.5) * group_w,
            HEIGHT - MARGIN_BOTTOM + 16.0,
            kind.name()
        );
        for (s, set) in report.datasets.iter().enumerate() {
            let Some(b) = set.budgets.iter().find(|b| b.design.design == *kind) else {
                continue;
            };
            let bx = gx + s as f64 * bar_w;
            let total_y = y.map(b.total_loss);
            let _ = writeln!(
                out,
                r##"<rect x="{bx:.1}" y="{total_y:.1}" width="{:.1}" height="{:.1}" fill="#bbbbbb" stroke="#555555"><title>{}</title></rect>"##,
                bar_w * 0.9,
                y.map(0.0) - total_y,
                escape(&format!("{} {}: measured {:.3e}", set.label, kind, b.total_loss))
            );
            let part = b.per_region_loss[highlight];
            let part_y = y.map(part);
            let _ = writeln!(
                out,
                r##"<rect x="{:.1}" y="{part_y:.1}" width="{:.1}" height="{:.1}" fill="#1f77b4"><title>{}</title></rect>"##,
                bx + bar_w * 0.2,
                bar_w * 0.5,
                y.map(0.0) - part_y,
                escape(&format!("{} {}: {highlight} {:.3e}", set.label, kind, part))
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="9">{}</text>"#,
                bx + bar_w * 0.45,
                HEIGHT - MARGIN_BOTTOM + 30.0,
                escape(&set.label)
            );
        }
    }
    let _ = writeln!(
        out,
        r##"<text x="{:.1}" y="{:.1}" fill="#1f77b4">predicted {highlight} loss</text>"##,
        WIDTH - MARGIN_RIGHT - 150.0,
        MARGIN_TOP + 14.0
    );
    out.push_str("</svg>\n");
    out
}
