//! Evaluation metrics: AUROC/AUPRC at macro and micro levels, AP@k, and the
//! polarity-aware suite (polarity degree C, its log transform, CP@k, and the
//! signed polar-edge AUC).

mod export;
mod report;

pub use export::{render_c_histogram_svg, render_paired_ranks_svg, write_report_files};
pub use report::{evaluate, EvalError, EvalReport, PerRelationRow, PolarRow};

use thiserror::Error;

use crate::graph::{Polarity, Triplet};
use crate::train::AucPolarityMode;

#[derive(Error, Debug)]
pub enum MetricError {
    #[error("undefined metric: input has a single class")]
    SingleClass,
    #[error("undefined metric: empty input")]
    Empty,
    #[error("domain error: {0}")]
    Domain(String),
}

/// One scored test example.
#[derive(Debug, Clone)]
pub struct PredictionRecord {
    pub triplet: Triplet,
    pub label: u8,
    pub score: f64,
}

/// One polar test pair scored for both polarities.
#[derive(Debug, Clone)]
pub struct PolarRecord {
    pub chem: u32,
    pub gene: u32,
    /// Positive for a true Increase edge, Negative for a true Decrease edge.
    pub truth: Polarity,
    pub p_increase: f64,
    pub p_decrease: f64,
}

impl PolarRecord {
    /// Correct iff the strictly larger probability names the true polarity;
    /// exact ties are incorrect.
    pub fn correct(&self) -> bool {
        match self.truth {
            Polarity::Positive => self.p_increase > self.p_decrease,
            Polarity::Negative => self.p_decrease > self.p_increase,
            Polarity::None => false,
        }
    }
}

/// AUROC via the rank statistic with tie-averaged ranks.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    if scores.is_empty() {
        return Err(MetricError::Empty);
    }
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    // average ranks over tie groups (1-based)
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &ix in &order[i..=j] {
            if labels[ix] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// AUPRC in average-precision form: step integration over distinct score
/// thresholds in descending order.
pub fn auprc(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    if scores.is_empty() {
        return Err(MetricError::Empty);
    }
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    if n_pos == 0.0 || n_pos == scores.len() as f64 {
        return Err(MetricError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut ap = 0.0;
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let tp_before = tp;
        for &ix in &order[i..=j] {
            if labels[ix] == 1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
        }
        let precision = tp / (tp + fp);
        let recall_step = (tp - tp_before) / n_pos;
        ap += recall_step * precision;
        i = j + 1;
    }
    Ok(ap)
}

/// Macro (per-relation mean) and micro (pooled) AUROC/AUPRC.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroMicro {
    pub macro_auroc: f64,
    pub micro_auroc: f64,
    pub macro_auprc: f64,
    pub micro_auprc: f64,
    /// Relations excluded from the macro means for having one class.
    pub excluded: Vec<String>,
}

/// `groups` holds `(relation label, scores, labels)` per relation.
pub fn macro_micro(groups: &[(String, Vec<f64>, Vec<u8>)]) -> Result<MacroMicro, MetricError> {
    let mut macro_auroc = Vec::new();
    let mut macro_auprc = Vec::new();
    let mut excluded = Vec::new();
    let mut pooled_scores = Vec::new();
    let mut pooled_labels = Vec::new();

    for (name, scores, labels) in groups {
        pooled_scores.extend_from_slice(scores);
        pooled_labels.extend_from_slice(labels);
        match (auroc(scores, labels), auprc(scores, labels)) {
            (Ok(roc), Ok(prc)) => {
                macro_auroc.push(roc);
                macro_auprc.push(prc);
            }
            _ => excluded.push(name.clone()),
        }
    }
    if macro_auroc.is_empty() {
        return Err(MetricError::SingleClass);
    }
    Ok(MacroMicro {
        macro_auroc: macro_auroc.iter().sum::<f64>() / macro_auroc.len() as f64,
        micro_auroc: auroc(&pooled_scores, &pooled_labels)?,
        macro_auprc: macro_auprc.iter().sum::<f64>() / macro_auprc.len() as f64,
        micro_auprc: auprc(&pooled_scores, &pooled_labels)?,
        excluded,
    })
}

/// AP@k over `(score, label)` records: mean precision at each positive hit
/// within the top k, normalized by the positives found there.
///
/// Ties keep input order (stable sort). Returns `(value, clamped)` where
/// `clamped` flags fewer than `k` records.
pub fn average_precision_at_k(records: &[(f64, u8)], k: usize) -> (f64, bool) {
    assert!(k >= 1);
    let clamped = records.len() < k;
    let k_used = k.min(records.len());
    if k_used == 0 {
        return (0.0, clamped);
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[b].0.partial_cmp(&records[a].0).unwrap());

    let mut hits = 0usize;
    let mut precision_sum = 0.0;
    for (i, &ix) in order[..k_used].iter().enumerate() {
        if records[ix].1 == 1 {
            hits += 1;
            precision_sum += hits as f64 / (i + 1) as f64;
        }
    }
    if hits == 0 {
        return (0.0, clamped);
    }
    (precision_sum / hits as f64, clamped)
}

/// Polarity degree C = |P_increase − P_decrease|.
pub fn polarity_degree(p_increase: f64, p_decrease: f64) -> f64 {
    (p_increase - p_decrease).abs()
}

/// Log-compression of C: C' = ln(1 + 2π²·C) / ln(2π² + 1).
///
/// Strictly increasing on [0, 1] with C'(0) = 0 and C'(1) = 1.
pub fn transform_c(c: f64) -> Result<f64, MetricError> {
    if !(0.0..=1.0).contains(&c) {
        return Err(MetricError::Domain(format!("C must be in [0, 1], got {c}")));
    }
    let scale = 2.0 * std::f64::consts::PI * std::f64::consts::PI;
    Ok((1.0 + scale * c).ln() / (scale + 1.0).ln())
}

/// CP@k: sort polar records by C descending (stable) and report the fraction
/// of correct polarity calls among the top k. Returns `(value, clamped)`.
pub fn cp_at_k(records: &[PolarRecord], k: usize) -> (f64, bool) {
    assert!(k >= 1);
    let clamped = records.len() < k;
    let k_used = k.min(records.len());
    if k_used == 0 {
        return (0.0, clamped);
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        let ca = polarity_degree(records[a].p_increase, records[a].p_decrease);
        let cb = polarity_degree(records[b].p_increase, records[b].p_decrease);
        cb.partial_cmp(&ca).unwrap()
    });
    let correct = order[..k_used]
        .iter()
        .filter(|&&ix| records[ix].correct())
        .count();
    (correct as f64 / k_used as f64, clamped)
}

/// Polar-edge AUC. [`AucPolarityMode::Signed`] gives
/// (N_correct − N_wrong)/N in [−1, 1]; exact ties count as wrong.
pub fn auc_polarity(records: &[PolarRecord], mode: AucPolarityMode) -> Result<f64, MetricError> {
    if records.is_empty() {
        return Err(MetricError::Empty);
    }
    let n = records.len() as f64;
    let correct = records.iter().filter(|r| r.correct()).count() as f64;
    match mode {
        AucPolarityMode::Signed => Ok((correct - (n - correct)) / n),
        AucPolarityMode::Accuracy => Ok(correct / n),
    }
}
