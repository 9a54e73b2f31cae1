//! Evaluation surfaces: multiclass macro-F1/precision/recall/accuracy over
//! the 4-class confusion matrix, the binary projection of the same verdicts,
//! per-class one-vs-rest F1, and per-generation-tag detection success rate.
//!
//! Conventions: per-class precision and recall use 0/0 := 0; per-class F1 is
//! the harmonic mean (0 when p + r = 0); macro averages run over all four
//! classes regardless of support, so ablation runs stay comparable.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{BinaryLabel, VeracityLabel};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("prediction and gold vectors differ in length ({preds} vs {golds})")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("cannot score an empty verdict list")]
    Empty,
    #[error("no items carry a generation tag")]
    NoTaggedItems,
}

/// 4x4 counts; rows are gold labels, columns are predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 4]; 4],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..4).map(|i| self.counts[i][i]).sum()
    }

    fn column_sum(&self, col: usize) -> u64 {
        (0..4).map(|row| self.counts[row][col]).sum()
    }

    fn row_sum(&self, row: usize) -> u64 {
        self.counts[row].iter().sum()
    }
}

pub fn confusion(
    preds: &[VeracityLabel],
    golds: &[VeracityLabel],
) -> Result<ConfusionMatrix, MetricsError> {
    if preds.len() != golds.len() {
        return Err(MetricsError::LengthMismatch { preds: preds.len(), golds: golds.len() });
    }
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut counts = [[0u64; 4]; 4];
    for (p, g) in preds.iter().zip(golds) {
        counts[g.code() as usize][p.code() as usize] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroScores {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_from(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Per-class one-vs-rest scores in label order Real, TVD, VVD, CCD.
pub fn per_class_scores(matrix: &ConfusionMatrix) -> [(f64, f64, f64); 4] {
    let mut out = [(0.0, 0.0, 0.0); 4];
    for (class, slot) in out.iter_mut().enumerate() {
        let tp = matrix.counts[class][class];
        let precision = ratio(tp, matrix.column_sum(class));
        let recall = ratio(tp, matrix.row_sum(class));
        *slot = (precision, recall, f1_from(precision, recall));
    }
    out
}

/// Unweighted mean over all four classes.
pub fn macro_scores(matrix: &ConfusionMatrix) -> MacroScores {
    let per_class = per_class_scores(matrix);
    let n = per_class.len() as f64;
    MacroScores {
        f1: per_class.iter().map(|c| c.2).sum::<f64>() / n,
        precision: per_class.iter().map(|c| c.0).sum::<f64>() / n,
        recall: per_class.iter().map(|c| c.1).sum::<f64>() / n,
    }
}

pub fn accuracy(matrix: &ConfusionMatrix) -> f64 {
    ratio(matrix.trace(), matrix.total())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricBlock {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
}

/// Binary metrics: project both sides through the real/fake partition and
/// macro-average over the two classes. Never a separate prediction path.
pub fn binary_report(
    preds: &[VeracityLabel],
    golds: &[VeracityLabel],
) -> Result<MetricBlock, MetricsError> {
    if preds.len() != golds.len() {
        return Err(MetricsError::LengthMismatch { preds: preds.len(), golds: golds.len() });
    }
    if preds.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut counts = [[0u64; 2]; 2];
    for (p, g) in preds.iter().zip(golds) {
        counts[g.to_binary().index()][p.to_binary().index()] += 1;
    }

    let mut f1_sum = 0.0;
    let mut p_sum = 0.0;
    let mut r_sum = 0.0;
    for (class, row_counts) in counts.iter().enumerate() {
        let tp = row_counts[class];
        let col: u64 = (0..2).map(|row| counts[row][class]).sum();
        let row: u64 = row_counts.iter().sum();
        let precision = ratio(tp, col);
        let recall = ratio(tp, row);
        p_sum += precision;
        r_sum += recall;
        f1_sum += f1_from(precision, recall);
    }
    let total: u64 = counts.iter().flatten().sum();
    let correct: u64 = (0..2).map(|i| counts[i][i]).sum();
    Ok(MetricBlock {
        f1: f1_sum / 2.0,
        precision: p_sum / 2.0,
        recall: r_sum / 2.0,
        accuracy: ratio(correct, total),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerSourceF1 {
    pub per_class: BTreeMap<String, f64>,
    /// Macro mean over the four classes; equals the multiclass macro-F1.
    pub overall: f64,
}

pub fn per_source_f1(matrix: &ConfusionMatrix) -> PerSourceF1 {
    let per_class_all = per_class_scores(matrix);
    let mut per_class = BTreeMap::new();
    for label in VeracityLabel::ALL {
        per_class.insert(label.name().to_string(), per_class_all[label.code() as usize].2);
    }
    PerSourceF1 { per_class, overall: macro_scores(matrix).f1 }
}

/// Fraction of items carrying each generation tag whose binary verdict is
/// fake; tags mark forged items, so this is per-tag recall.
pub fn detection_success_rate(
    tagged: &[(String, BinaryLabel)],
) -> Result<BTreeMap<String, f64>, MetricsError> {
    if tagged.is_empty() {
        return Err(MetricsError::NoTaggedItems);
    }
    let mut totals: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for (tag, predicted) in tagged {
        let entry = totals.entry(tag.as_str()).or_default();
        entry.1 += 1;
        if *predicted == BinaryLabel::Fake {
            entry.0 += 1;
        }
    }
    Ok(totals
        .into_iter()
        .map(|(tag, (fake, total))| (tag.to_string(), ratio(fake, total)))
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportCounts {
    pub items: u64,
    pub scored: u64,
    pub skipped: u64,
    pub per_gold_class: BTreeMap<String, u64>,
}

/// Every metric surface of one run, serialized as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiclass: Option<MetricBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binary: Option<MetricBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_source: Option<PerSourceF1>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub success_rate: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
    pub counts: ReportCounts,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub flags: BTreeMap<String, u64>,
}

impl EvalReport {
    /// Assemble the full report from scored (pred, gold) pairs plus the
    /// tagged binary verdicts for the success-rate surface.
    pub fn assemble(
        pairs: &[(VeracityLabel, VeracityLabel)],
        tagged: &[(String, BinaryLabel)],
        counts: ReportCounts,
        flags: BTreeMap<String, u64>,
    ) -> Result<EvalReport, MetricsError> {
        let (preds, golds): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
        let (multiclass, binary, per_source, confusion_matrix) = if pairs.is_empty() {
            (None, None, None, None)
        } else {
            let matrix = confusion(&preds, &golds)?;
            let macros = macro_scores(&matrix);
            (
                Some(MetricBlock {
                    f1: macros.f1,
                    precision: macros.precision,
                    recall: macros.recall,
                    accuracy: accuracy(&matrix),
                }),
                Some(binary_report(&preds, &golds)?),
                Some(per_source_f1(&matrix)),
                Some(matrix),
            )
        };
        let success_rate =
            if tagged.is_empty() { BTreeMap::new() } else { detection_success_rate(tagged)? };
        Ok(EvalReport {
            multiclass,
            binary,
            per_source,
            success_rate,
            confusion: confusion_matrix,
            counts,
            flags,
        })
    }
}
