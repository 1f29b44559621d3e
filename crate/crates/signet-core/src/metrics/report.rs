//! Full evaluation of a trained model on the test split.

use thiserror::Error;

use super::{
    auc_polarity, average_precision_at_k, cp_at_k, macro_micro, polarity_degree, transform_c,
    MetricError, PolarRecord, PredictionRecord,
};
use crate::graph::{sample_negatives, HeteroGraph, Polarity, RelationType, Triplet};
use crate::model::{sample_neighbors, Model, ModelKind, NeighborSamples};
use crate::train::{eval_rng, TrainConfig};
use crate::{EdgeSplit, TensorError};

#[derive(Error, Debug)]
pub enum EvalError {
    #[error("test split is empty")]
    EmptyTestSplit,
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Per-relation AUROC/AUPRC (absent when the relation's records are
/// single-class or the relation has no test edges).
#[derive(Debug, Clone)]
pub struct PerRelationRow {
    pub relation: RelationType,
    pub n_pos: usize,
    pub n_neg: usize,
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
}

/// One polar pair with everything the exports need.
#[derive(Debug, Clone)]
pub struct PolarRow {
    pub chem: u32,
    pub gene: u32,
    pub truth: Polarity,
    pub p_increase: f64,
    pub p_decrease: f64,
    pub c: f64,
    pub c_prime: f64,
    pub correct: bool,
    pub log2_rank_decrease: f64,
    pub log2_rank_increase: f64,
}

/// Metric values plus the ranked-prediction and polarity tables.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub macro_auroc: f64,
    pub micro_auroc: f64,
    pub macro_auprc: f64,
    pub micro_auprc: f64,
    pub ap_at_k: f64,
    pub ap_k: usize,
    pub ap_clamped: bool,
    pub auc_polarity: Option<f64>,
    pub cp_at_k: Option<f64>,
    pub cp_k: usize,
    pub cp_clamped: bool,
    pub per_relation: Vec<PerRelationRow>,
    pub excluded_from_macro: Vec<String>,
    pub polar_rows: Vec<PolarRow>,
    pub records: Vec<PredictionRecord>,
    pub n_test_positives: usize,
}

/// Score the test split and assemble every metric.
///
/// Negatives are drawn 1:1 per relation with true-edge filtering from the
/// evaluation RNG stream of `config.seed`; polar test pairs are scored for
/// both Increase and Decrease on the same (head, tail).
pub fn evaluate(
    model: &Model,
    graph: &HeteroGraph,
    split: &EdgeSplit,
    config: &TrainConfig,
) -> Result<EvalReport, EvalError> {
    if split.test.is_empty() {
        return Err(EvalError::EmptyTestSplit);
    }
    let mut rng = eval_rng(config.seed);
    let samples: Option<NeighborSamples> = (model.kind() == ModelKind::GraphSage)
        .then(|| sample_neighbors(graph, model.hyper.neighbor_samples, &mut rng));

    let score_all = |triplets: &[Triplet]| -> Result<Vec<f64>, TensorError> {
        let mut out = Vec::with_capacity(triplets.len());
        for chunk in triplets.chunks(config.test_batch_size.max(1)) {
            out.extend(model.score_probs(graph, chunk, samples.as_ref())?);
        }
        Ok(out)
    };

    // labeled records per relation, negatives drawn 1:1
    let mut groups: Vec<(String, Vec<f64>, Vec<u8>)> = Vec::new();
    let mut per_relation = Vec::new();
    let mut records = Vec::new();
    let mut n_test_positives = 0usize;
    for rel in RelationType::ALL {
        let positives: Vec<Triplet> = split
            .test
            .iter()
            .filter(|t| t.relation == rel)
            .copied()
            .collect();
        if positives.is_empty() {
            continue;
        }
        n_test_positives += positives.len();
        let labeled = sample_negatives(&positives, graph, 1, &mut rng).records;
        let triplets: Vec<Triplet> = labeled.iter().map(|(t, _)| *t).collect();
        let labels: Vec<u8> = labeled.iter().map(|(_, l)| *l as u8).collect();
        let scores = score_all(&triplets)?;

        for ((t, label), score) in labeled.iter().zip(&scores) {
            records.push(PredictionRecord {
                triplet: *t,
                label: *label as u8,
                score: *score,
            });
        }
        per_relation.push(PerRelationRow {
            relation: rel,
            n_pos: labels.iter().filter(|&&l| l == 1).count(),
            n_neg: labels.iter().filter(|&&l| l == 0).count(),
            auroc: super::auroc(&scores, &labels).ok(),
            auprc: super::auprc(&scores, &labels).ok(),
        });
        groups.push((rel.to_string(), scores, labels));
    }

    let mm = macro_micro(&groups)?;

    let pooled: Vec<(f64, u8)> = records.iter().map(|r| (r.score, r.label)).collect();
    let (ap_at_k, ap_clamped) = average_precision_at_k(&pooled, config.ap_k);

    // both polarities on every polar test pair
    let polar_positives: Vec<Triplet> = split
        .test
        .iter()
        .filter(|t| t.relation.is_polar())
        .copied()
        .collect();
    let mut polar_records = Vec::new();
    if !polar_positives.is_empty() {
        let mut probes = Vec::with_capacity(polar_positives.len() * 2);
        for t in &polar_positives {
            probes.push(Triplet::new(t.head, RelationType::Increase, t.tail));
            probes.push(Triplet::new(t.head, RelationType::Decrease, t.tail));
        }
        let probs = score_all(&probes)?;
        for (i, t) in polar_positives.iter().enumerate() {
            polar_records.push(PolarRecord {
                chem: t.head.0,
                gene: t.tail.0,
                truth: t.relation.polarity(),
                p_increase: probs[2 * i],
                p_decrease: probs[2 * i + 1],
            });
        }
    }

    let (auc_pol, cp, cp_clamped) = if polar_records.is_empty() {
        (None, None, false)
    } else {
        let (cp_value, clamped) = cp_at_k(&polar_records, config.cp_k);
        (
            Some(auc_polarity(&polar_records, config.auc_polarity_mode)?),
            Some(cp_value),
            clamped,
        )
    };

    // independent descending ranks of the two probability columns
    let rank_of = |key: &dyn Fn(&PolarRecord) -> f64| -> Vec<usize> {
        let mut order: Vec<usize> = (0..polar_records.len()).collect();
        order.sort_by(|&a, &b| {
            key(&polar_records[b])
                .partial_cmp(&key(&polar_records[a]))
                .unwrap()
        });
        let mut rank = vec![0usize; polar_records.len()];
        for (pos, &ix) in order.iter().enumerate() {
            rank[ix] = pos + 1;
        }
        rank
    };
    let dec_ranks = rank_of(&|r: &PolarRecord| r.p_decrease);
    let inc_ranks = rank_of(&|r: &PolarRecord| r.p_increase);

    let polar_rows: Vec<PolarRow> = polar_records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let c = polarity_degree(r.p_increase, r.p_decrease);
            PolarRow {
                chem: r.chem,
                gene: r.gene,
                truth: r.truth,
                p_increase: r.p_increase,
                p_decrease: r.p_decrease,
                c,
                c_prime: transform_c(c).expect("C is within [0, 1]"),
                correct: r.correct(),
                log2_rank_decrease: (dec_ranks[i] as f64).log2(),
                log2_rank_increase: (inc_ranks[i] as f64).log2(),
            }
        })
        .collect();

    Ok(EvalReport {
        macro_auroc: mm.macro_auroc,
        micro_auroc: mm.micro_auroc,
        macro_auprc: mm.macro_auprc,
        micro_auprc: mm.micro_auprc,
        ap_at_k,
        ap_k: config.ap_k,
        ap_clamped,
        auc_polarity: auc_pol,
        cp_at_k: cp,
        cp_k: config.cp_k,
        cp_clamped,
        per_relation,
        excluded_from_macro: mm.excluded,
        polar_rows,
        records,
        n_test_positives,
    })
}

impl EvalReport {
    /// The seven headline metrics as `(name, value)` rows, in table order.
    pub fn headline_metrics(&self) -> Vec<(String, f64)> {
        vec![
            ("MACRO_AUROC".to_string(), self.macro_auroc),
            ("MICRO_AUROC".to_string(), self.micro_auroc),
            ("MACRO_AUPRC".to_string(), self.macro_auprc),
            ("MICRO_AUPRC".to_string(), self.micro_auprc),
            (format!("AP@{}", self.ap_k), self.ap_at_k),
            ("AUC_polarity".to_string(), self.auc_polarity.unwrap_or(f64::NAN)),
            (format!("CP@{}", self.cp_k), self.cp_at_k.unwrap_or(f64::NAN)),
        ]
    }
}
