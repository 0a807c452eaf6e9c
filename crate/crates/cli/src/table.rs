//! Console rendering. Tangents are shown in fixed per-region powers of ten
//! (×10⁻⁴ for MS, ×10⁻³ for SA and MA, ×10⁻⁷ for Si) with one decimal.

use std::fmt::Write;

use surfloss::predict::{BudgetReport, PredictReport};
use surfloss::synth::SynthSpec;
use surfloss::{ExtractionResult, Region};

fn superscript(n: i32) -> String {
    n.to_string()
        .chars()
        .map(|c| match c {
            '-' => '⁻',
            '0' => '⁰',
            '1' => '¹',
            '2' => '²',
            '3' => '³',
            '4' => '⁴',
            '5' => '⁵',
            '6' => '⁶',
            '7' => '⁷',
            '8' => '⁸',
            '9' => '⁹',
            _ => c,
        })
        .collect()
}

/// `(×10⁻³)` for the region's display exponent.
pub fn scale_suffix(region: Region) -> String {
    format!("(×10{})", superscript(region.display_exponent()))
}

fn scaled(region: Region, v: f64) -> f64 {
    v / 10f64.powi(region.display_exponent())
}

/// One table row, e.g. `MA 3.3 ± 0.4 (×10⁻³)` or `SA <1.2 (×10⁻³)`.
pub fn estimate_row(region: Region, mean: f64, std: f64, resolvable: bool, bound: Option<f64>) -> String {
    let body = match (resolvable, bound) {
        (true, _) => format!("{:.1} ± {:.1}", scaled(region, mean), scaled(region, std)),
        (false, Some(b)) => format!("<{:.1}", scaled(region, b)),
        (false, None) => "unresolved".to_string(),
    };
    format!("{:<2} {} {}", region.label(), body, scale_suffix(region))
}

pub fn estimates_table(label: &str, result: &ExtractionResult) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{label}: loss tangents ({} samples, seed {})",
        result.config.n_samples, result.config.rng_seed
    );
    for (region, e) in result.estimates.iter() {
        let _ = writeln!(s, "{}", estimate_row(region, e.mean, e.std, e.resolvable, e.upper_bound));
    }
    if result.ill_conditioned {
        let _ = writeln!(s, "warning: condition number {:.3e}", result.condition_diagnostic);
    }
    s
}

pub fn predict_table(report: &PredictReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}: Q_TLS measured vs predicted", report.label);
    for (p, m) in report.predicted.iter().zip(&report.measured) {
        let _ = writeln!(
            s,
            "{:<10} measured {:.3e} ± {:.2e}  predicted {:.3e} ± {:.2e}",
            p.design.design.name(),
            m.mean_q_tls,
            m.std_err_q_tls,
            p.mean_q_tls,
            report.horizontal_error_bar_multiplier * p.std_q_tls
        );
    }
    s
}

pub fn budget_table(report: &BudgetReport, highlight: Region) -> String {
    let mut s = String::new();
    for set in &report.datasets {
        let _ = writeln!(s, "{}: measured loss, predicted {highlight} part, dominant region", set.label);
        for b in &set.budgets {
            let _ = writeln!(
                s,
                "{:<10} {:.3e}  {:.3e}  {}",
                b.design.design.name(),
                b.total_loss,
                b.per_region_loss[highlight],
                b.dominant_region
            );
        }
    }
    s
}

pub fn bound_line(label: &str, region: Region, bound: f64, resolvable: bool) -> String {
    let note = if resolvable { " (region is resolvable)" } else { "" };
    format!(
        "{label}: {} <{:.1} {}{note}\n",
        region.label(),
        scaled(region, bound),
        scale_suffix(region)
    )
}

pub fn synth_summary(spec: &SynthSpec) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} resonators per design, noise {}, seed {}",
        spec.n_per_design, spec.relative_noise, spec.rng_seed
    );
    for (design, q) in spec.matrix.designs().iter().zip(spec.true_q_tls()) {
        let _ = writeln!(s, "{:<10} true Q_TLS {:.4e}", design.design.name(), q);
    }
    s
}
