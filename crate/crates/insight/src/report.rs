//! Human-readable report rendering: aligned-column tables with percentages
//! to one decimal place, and delta columns when comparing two runs.
//! Internal values stay at full precision; only the rendering rounds.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::metrics::{EvalReport, MetricBlock};
use crate::types::VeracityLabel;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("missing run artifact: {0}")]
    MissingArtifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn load_report(run_dir: &Path) -> Result<EvalReport, ReportError> {
    let path = run_dir.join("report.json");
    if !path.is_file() {
        return Err(ReportError::MissingArtifact(path.display().to_string()));
    }
    let bytes = std::fs::read(&path)?;
    serde_json::from_slice(&bytes).map_err(|e| ReportError::MissingArtifact(e.to_string()))
}

fn pct(value: f64) -> String {
    format!("{:.1}", value * 100.0)
}

fn delta(value: f64, baseline: f64) -> String {
    format!("{:+.1}", (value - baseline) * 100.0)
}

fn block_row(block: &MetricBlock) -> [f64; 4] {
    [block.f1, block.precision, block.recall, block.accuracy]
}

fn render_metric_table(
    out: &mut String,
    title: &str,
    block: Option<&MetricBlock>,
    compare: Option<&MetricBlock>,
) {
    let _ = writeln!(out, "== {title} ==");
    let Some(block) = block else {
        let _ = writeln!(out, "(no scored items)\n");
        return;
    };
    let _ = writeln!(out, "{:<10} {:>8} {:>8} {:>8} {:>8}", "", "F1", "Pre", "Rec", "ACC");
    let row = block_row(block);
    let _ = writeln!(
        out,
        "{:<10} {:>8} {:>8} {:>8} {:>8}",
        "run",
        pct(row[0]),
        pct(row[1]),
        pct(row[2]),
        pct(row[3])
    );
    if let Some(compare) = compare {
        let base = block_row(compare);
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:>8} {:>8} {:>8}",
            "imp.",
            delta(row[0], base[0]),
            delta(row[1], base[1]),
            delta(row[2], base[2]),
            delta(row[3], base[3])
        );
    }
    let _ = writeln!(out);
}

/// Render the four table sections; with a comparison report, each table
/// gains a delta row (run minus baseline).
pub fn render(report: &EvalReport, compare: Option<&EvalReport>) -> String {
    let mut out = String::new();

    render_metric_table(
        &mut out,
        "Multiclass",
        report.multiclass.as_ref(),
        compare.and_then(|c| c.multiclass.as_ref()),
    );
    render_metric_table(
        &mut out,
        "Binary",
        report.binary.as_ref(),
        compare.and_then(|c| c.binary.as_ref()),
    );

    let _ = writeln!(out, "== Per-source F1 ==");
    match &report.per_source {
        None => {
            let _ = writeln!(out, "(no scored items)\n");
        }
        Some(per_source) => {
            let names: Vec<&str> = VeracityLabel::ALL.iter().map(|l| l.name()).collect();
            let header =
                names.iter().map(|n| format!("{n:>8}")).collect::<Vec<_>>().join(" ");
            let _ = writeln!(out, "{:<10} {header} {:>8}", "", "Overall");
            let row = names
                .iter()
                .map(|n| format!("{:>8}", pct(*per_source.per_class.get(*n).unwrap_or(&0.0))))
                .collect::<Vec<_>>()
                .join(" ");
            let _ = writeln!(out, "{:<10} {row} {:>8}", "run", pct(per_source.overall));
            if let Some(base) = compare.and_then(|c| c.per_source.as_ref()) {
                let row = names
                    .iter()
                    .map(|n| {
                        format!(
                            "{:>8}",
                            delta(
                                *per_source.per_class.get(*n).unwrap_or(&0.0),
                                *base.per_class.get(*n).unwrap_or(&0.0)
                            )
                        )
                    })
                    .collect::<Vec<_>>()
                    .join(" ");
                let _ = writeln!(
                    out,
                    "{:<10} {row} {:>8}",
                    "imp.",
                    delta(per_source.overall, base.overall)
                );
            }
            let _ = writeln!(out);
        }
    }

    let _ = writeln!(out, "== Detection success rate ==");
    if report.success_rate.is_empty() {
        let _ = writeln!(out, "(no tagged items)");
    } else {
        for (tag, rate) in &report.success_rate {
            match compare.and_then(|c| c.success_rate.get(tag)) {
                Some(base) => {
                    let _ =
                        writeln!(out, "{tag:<24} {:>8} ({})", pct(*rate), delta(*rate, *base));
                }
                None => {
                    let _ = writeln!(out, "{tag:<24} {:>8}", pct(*rate));
                }
            }
        }
    }
    let _ = writeln!(out);

    let _ = writeln!(
        out,
        "items: {}  scored: {}  skipped: {}",
        report.counts.items, report.counts.scored, report.counts.skipped
    );
    if !report.flags.is_empty() {
        let _ = writeln!(out, "flags:");
        for (flag, count) in &report.flags {
            let _ = writeln!(out, "  {flag}: {count}");
        }
    }
    out
}
