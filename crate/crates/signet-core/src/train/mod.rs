//! Joint training: supervised loss + constraint loss, Adam updates, early
//! stopping on validation loss, and checkpointing.

mod checkpoint;
mod config;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use config::{AucPolarityMode, ClReduction, TrainConfig};

use std::rc::Rc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use thiserror::Error;

use crate::graph::{
    build_constraint_pairs, sample_negatives, ClMode,ConstraintKind, ConstraintPair, EdgeSplit,
    GraphError, HeteroGraph, Triplet,
};
use crate::model::{sample_neighbors, Model, ModelKind, NeighborSamples};
use crate::tensor::{adam_step, AdamState, Tape, Tensor, TensorError, Var};

#[derive(Error, Debug)]
pub enum TrainError {
    #[error("invalid configuration:\n{0}")]
    Config(String),
    #[error("numeric health failure at epoch {epoch}, batch {batch}: {source}")]
    NumericHealth {
        epoch: usize,
        batch: usize,
        source: TensorError,
    },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Seed streams, so every consumer of randomness is isolated.
mod streams {
    pub const INIT: u64 = 0x01;
    pub const SHUFFLE: u64 = 0x1000;
    pub const NEGATIVES: u64 = 0x2000;
    pub const SAGE: u64 = 0x3000;
    pub const VAL_NEGATIVES: u64 = 0x02;
    pub const EVAL: u64 = 0x03;
}

/// RNG for one purpose within one seeded run.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// RNG stream for evaluation-time sampling.
pub fn eval_rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, streams::EVAL)
}

/// One row of the training log.
#[derive(Debug, Clone)]
pub struct LogRecord {
    pub epoch: usize,
    pub split: &'static str,
    pub loss: f64,
    pub seconds: f64,
}

/// Learned parameters plus optimizer and progress bookkeeping.
pub struct ModelState {
    pub model: Model,
    pub adam: AdamState,
    pub epoch: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Result of a training run; `state.model` holds the restored best snapshot.
pub struct TrainOutcome {
    pub state: ModelState,
    pub log: Vec<LogRecord>,
    pub collisions: u64,
    pub stopped_early: bool,
}

/// Mean fused-logit cross-entropy plus `lambda * ||θ||²` over all parameters.
pub fn supervised_loss(
    tape: &mut Tape,
    logits: Var,
    labels: Rc<Vec<f64>>,
    params: &[Var],
    lambda: f64,
) -> Result<Var, TensorError> {
    let ce = tape.bce_with_logits(logits, labels)?;
    add_regularization(tape, ce, params, lambda)
}

/// Probability-domain variant of the supervised loss (clamped CE).
pub fn supervised_loss_from_probs(
    tape: &mut Tape,
    probs: Var,
    labels: Rc<Vec<f64>>,
    params: &[Var],
    lambda: f64,
) -> Result<Var, TensorError> {
    let ce = tape.bce_from_probs(probs, labels)?;
    add_regularization(tape, ce, params, lambda)
}

fn add_regularization(
    tape: &mut Tape,
    loss: Var,
    params: &[Var],
    lambda: f64,
) -> Result<Var, TensorError> {
    if lambda == 0.0 || params.is_empty() {
        return Ok(loss);
    }
    let mut reg: Option<Var> = None;
    for &p in params {
        let sq = tape.square(p)?;
        let s = tape.sum(sq)?;
        reg = Some(match reg {
            Some(acc) => tape.add(acc, s)?,
            None => s,
        });
    }
    let reg = tape.scale(reg.unwrap(), lambda)?;
    tape.add(loss, reg)
}

/// Constraint loss over ML/CL pairs: Σ_{ML} (1 - S)² + Σ_{CL} S².
///
/// `scores` must align with `pairs` (the probe scores). Mean-reduced by
/// default; [`ClReduction::Sum`] restores the plain sum.
pub fn constraint_loss(
    tape: &mut Tape,
    scores: Var,
    pairs: &[ConstraintPair],
    reduction: ClReduction,
) -> Result<Var, TensorError> {
    if pairs.is_empty() {
        return Ok(tape.constant(Tensor::scalar(0.0)));
    }
    let targets: Vec<f64> = pairs
        .iter()
        .map(|p| match p.kind {
            ConstraintKind::MustLink => 1.0,
            ConstraintKind::CannotLink => 0.0,
        })
        .collect();
    let target_var = tape.constant(Tensor::vector(targets));
    let diff = tape.sub(scores, target_var)?;
    let sq = tape.square(diff)?;
    match reduction {
        ClReduction::Mean => tape.mean(sq),
        ClReduction::Sum => tape.sum(sq),
    }
}

/// Score the probes of `pairs` and fold them into the constraint loss.
fn constraint_loss_for(
    tape: &mut Tape,
    bound: &crate::model::BoundModel,
    pairs: &[ConstraintPair],
    reduction: ClReduction,
) -> Result<Var, TensorError> {
    if pairs.is_empty() {
        let zero = tape.constant(Tensor::scalar(0.0));
        return Ok(zero);
    }
    let probes: Vec<Triplet> = pairs.iter().map(|p| p.probe).collect();
    let logits = bound.logits(tape, &probes)?;
    let scores = tape.sigmoid(logits)?;
    constraint_loss(tape, scores, pairs, reduction)
}

/// Train a model on the train split, early-stopping on validation loss.
pub fn train(
    graph: &HeteroGraph,
    split: &EdgeSplit,
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate().map_err(TrainError::Config)?;
    let hyper = config.model_hyper();
    let mut init_rng = stream_rng(config.seed, streams::INIT);
    let mut model = Model::new(graph, &hyper, &mut init_rng)?;
    let shapes = model.bag().shapes();
    let mut adam = AdamState::new(&shapes, config.learning_rate);
    if config.grad_norm > 0.0 {
        adam.clip = Some(config.grad_norm);
    }
    // regularization flows through the loss, not the optimizer
    let names: Vec<String> = model.bag().names().to_vec();

    // validation records frozen once per run so epochs are comparable
    let val_records: Vec<(Triplet, f64)> = if split.validation.is_empty() {
        Vec::new()
    } else {
        let mut rng = stream_rng(config.seed, streams::VAL_NEGATIVES);
        sample_negatives(&split.validation, graph, config.n_negatives, &mut rng).records
    };

    let mut log = Vec::new();
    let mut collisions = 0u64;
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_snapshot: Option<Vec<Tensor>> = None;
    let mut since_improvement = 0usize;
    let mut stopped_early = false;
    let mut final_epoch = 0usize;

    for epoch in 1..=config.epochs {
        let t0 = Instant::now();
        final_epoch = epoch;

        let mut order: Vec<Triplet> = split.train.clone();
        let mut shuffle_rng = stream_rng(config.seed, streams::SHUFFLE + epoch as u64);
        order.shuffle(&mut shuffle_rng);

        let samples: Option<NeighborSamples> = (model.kind() == ModelKind::GraphSage).then(|| {
            let mut rng = stream_rng(config.seed, streams::SAGE + epoch as u64);
            sample_neighbors(graph, config.neighbor_samples, &mut rng)
        });

        let mut neg_rng = stream_rng(config.seed, streams::NEGATIVES + epoch as u64);
        let mut epoch_loss = 0.0;
        let mut n_batches = 0usize;

        for (batch_ix, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut run_batch = || -> Result<f64, TensorError> {
                let sample = sample_negatives(chunk, graph, config.n_negatives, &mut neg_rng);
                collisions += sample.collisions;

                let mut tape = Tape::new();
                let bound = model.bind(&mut tape, graph, samples.as_ref())?;
                let triplets: Vec<Triplet> = sample.records.iter().map(|(t, _)| *t).collect();
                let labels: Rc<Vec<f64>> =
                    Rc::new(sample.records.iter().map(|(_, l)| *l).collect());
                let logits = bound.logits(&mut tape, &triplets)?;
                let sup = supervised_loss(
                    &mut tape,
                    logits,
                    labels,
                    bound.param_vars(),
                    config.regularization,
                )?;
                let total = if config.cl_enabled {
                    let pairs = build_constraint_pairs(chunk, ClMode::WithCl);
                    let cl = constraint_loss_for(&mut tape, &bound, &pairs, config.cl_reduction)?;
                    let weighted = tape.scale(cl, config.cl_weight)?;
                    tape.add(sup, weighted)?
                } else {
                    sup
                };
                let loss_value = tape.value(total).data()[0];
                tape.backward(total)?;

                let grads: Vec<Tensor> = bound
                    .param_vars()
                    .iter()
                    .zip(model.bag().tensors())
                    .map(|(&v, t)| tape.grad(v).unwrap_or_else(|| Tensor::zeros(t.shape())))
                    .collect();
                adam_step(model.bag_mut().tensors_mut(), &grads, &mut adam, &names)?;
                Ok(loss_value)
            };
            let loss_value = run_batch().map_err(|source| TrainError::NumericHealth {
                epoch,
                batch: batch_ix,
                source,
            })?;
            epoch_loss += loss_value;
            n_batches += 1;
        }

        let train_loss = if n_batches > 0 {
            epoch_loss / n_batches as f64
        } else {
            0.0
        };
        let elapsed = t0.elapsed().as_secs_f64();
        log.push(LogRecord {
            epoch,
            split: "train",
            loss: train_loss,
            seconds: elapsed,
        });

        if !val_records.is_empty() {
            let val_loss = validation_loss(&model, graph, &val_records, samples.as_ref(), config)
                .map_err(|source| TrainError::NumericHealth {
                    epoch,
                    batch: usize::MAX,
                    source,
                })?;
            log.push(LogRecord {
                epoch,
                split: "validation",
                loss: val_loss,
                seconds: t0.elapsed().as_secs_f64(),
            });

            if val_loss < best_val {
                best_val = val_loss;
                best_epoch = epoch;
                best_snapshot = Some(model.bag().tensors().to_vec());
                since_improvement = 0;
            } else {
                since_improvement += 1;
                if since_improvement >= config.patience {
                    stopped_early = true;
                    break;
                }
            }
        }
    }

    if let Some(snapshot) = &best_snapshot {
        model.restore(snapshot)?;
    } else {
        best_epoch = final_epoch;
    }

    Ok(TrainOutcome {
        state: ModelState {
            model,
            adam,
            epoch: final_epoch,
            best_epoch,
            best_val_loss: best_val,
        },
        log,
        collisions,
        stopped_early,
    })
}

/// Supervised loss over the frozen validation records.
fn validation_loss(
    model: &Model,
    graph: &HeteroGraph,
    records: &[(Triplet, f64)],
    samples: Option<&NeighborSamples>,
    config: &TrainConfig,
) -> Result<f64, TensorError> {
    let mut tape = Tape::new();
    let bound = model.bind(&mut tape, graph, samples)?;
    let triplets: Vec<Triplet> = records.iter().map(|(t, _)| *t).collect();
    let labels: Rc<Vec<f64>> = Rc::new(records.iter().map(|(_, l)| *l).collect());
    let logits = bound.logits(&mut tape, &triplets)?;
    let loss = supervised_loss(
        &mut tape,
        logits,
        labels,
        bound.param_vars(),
        config.regularization,
    )?;
    Ok(tape.value(loss).data()[0])
}

/// Render the training log as the CSV interface format.
pub fn log_to_csv(log: &[LogRecord]) -> String {
    let mut out = String::from("epoch,split,loss,seconds\n");
    for r in log {
        out.push_str(&format!(
            "{},{},{:.6},{:.3}\n",
            r.epoch, r.split, r.loss, r.seconds
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{split_edges, NodeId, RelationType, SyntheticConfig};
    use crate::tensor::sigmoid;

    fn tiny_graph() -> HeteroGraph {
        let (graph, _) = crate::graph::generate_synthetic(&SyntheticConfig {
            n_chem: 12,
            n_gene: 12,
            density: 0.25,
            polarity_signal: 0.9,
            binding_fraction: 0.2,
            homo_density: 0.0,
            seed: 13,
        })
        .unwrap();
        graph
    }

    fn tiny_config() -> TrainConfig {
        let mut config = TrainConfig::default();
        config.hidden_dimensions = vec![6, 4];
        config.epochs = 3;
        config.batch_size = 64;
        config.n_bases = 2;
        config
    }

    #[test]
    fn supervised_loss_hand_values() {
        let mut tape = Tape::new();
        // p = 0.5 -> ln 2 with no regularization
        let probs = tape.constant(Tensor::vector(vec![0.5; 8]));
        let labels = Rc::new(vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let loss = supervised_loss_from_probs(&mut tape, probs, labels, &[], 0.0).unwrap();
        assert!((tape.value(loss).data()[0] - 2f64.ln()).abs() < 1e-12);

        // perfect predictions, lambda = 0 -> below 1e-10
        let exact = tape.constant(Tensor::vector(vec![1.0, 0.0]));
        let labels = Rc::new(vec![1.0, 0.0]);
        let loss = supervised_loss_from_probs(&mut tape, exact, labels, &[], 0.0).unwrap();
        assert!(tape.value(loss).data()[0] < 1e-10);

        // zero-CE batch with lambda > 0 -> exactly lambda * ||theta||^2
        let p = tape.parameter(Tensor::vector(vec![2.0, -1.0]));
        let exact = tape.constant(Tensor::vector(vec![1.0, 0.0]));
        let labels = Rc::new(vec![1.0, 0.0]);
        let loss = supervised_loss_from_probs(&mut tape, exact, labels, &[p], 0.5).unwrap();
        // CE term is ~1e-12, reg term is 0.5 * 5 = 2.5
        assert!((tape.value(loss).data()[0] - 2.5).abs() < 1e-10);
    }

    #[test]
    fn constraint_loss_hand_values() {
        let ml = ConstraintPair {
            kind: ConstraintKind::MustLink,
            anchor: Triplet::new(NodeId(0), RelationType::Increase, NodeId(0)),
            probe: Triplet::new(NodeId(0), RelationType::Increase, NodeId(0)),
        };
        let cl = ConstraintPair {
            kind: ConstraintKind::CannotLink,
            anchor: ml.anchor,
            probe: Triplet::new(NodeId(0), RelationType::Decrease, NodeId(0)),
        };

        // optimum: S = 1 on ML, S = 0 on CL -> 0
        let mut tape = Tape::new();
        let scores = tape.constant(Tensor::vector(vec![1.0, 0.0]));
        let loss = constraint_loss(&mut tape, scores, &[ml, cl], ClReduction::Sum).unwrap();
        assert_eq!(tape.value(loss).data()[0], 0.0);

        // single CL pair with S = 0.8 -> 0.64
        let scores = tape.constant(Tensor::vector(vec![0.8]));
        let loss = constraint_loss(&mut tape, scores, &[cl], ClReduction::Sum).unwrap();
        assert!((tape.value(loss).data()[0] - 0.64).abs() < 1e-12);

        // ML S=0.6 and CL S=0.3, mean -> (0.16 + 0.09)/2 = 0.125
        let scores = tape.constant(Tensor::vector(vec![0.6, 0.3]));
        let loss = constraint_loss(&mut tape, scores, &[ml, cl], ClReduction::Mean).unwrap();
        assert!((tape.value(loss).data()[0] - 0.125).abs() < 1e-12);

        // empty pair list -> 0
        let scores = tape.constant(Tensor::vector(vec![]));
        let loss = constraint_loss(&mut tape, scores, &[], ClReduction::Mean).unwrap();
        assert_eq!(tape.value(loss).data()[0], 0.0);
    }

    #[test]
    fn training_is_deterministic() {
        let graph = tiny_graph();
        let config = tiny_config();
        let split = split_edges(&graph, config.ratios().unwrap(), config.seed).unwrap();
        let a = train(&graph, &split, &config).unwrap();
        let b = train(&graph, &split, &config).unwrap();
        assert_eq!(a.state.model.bag().tensors(), b.state.model.bag().tensors());
        assert_eq!(a.log.len(), b.log.len());
        for (x, y) in a.log.iter().zip(&b.log) {
            assert_eq!(x.loss.to_bits(), y.loss.to_bits());
        }
    }

    #[test]
    fn early_stopping_restores_best_epoch() {
        let graph = tiny_graph();
        let mut config = tiny_config();
        config.epochs = 50;
        config.patience = 1;
        let split = split_edges(&graph, config.ratios().unwrap(), config.seed).unwrap();
        let out = train(&graph, &split, &config).unwrap();
        if out.stopped_early {
            assert_eq!(out.state.epoch, out.state.best_epoch + config.patience);
            // restored state reproduces the best validation loss
            let mut rng = stream_rng(config.seed, streams::VAL_NEGATIVES);
            let records =
                sample_negatives(&split.validation, &graph, config.n_negatives, &mut rng).records;
            let v = validation_loss(&out.state.model, &graph, &records, None, &config).unwrap();
            assert!((v - out.state.best_val_loss).abs() < 1e-12);
        }
    }

    #[test]
    fn cl_disabled_excludes_constraint_loss_from_total() {
        // mu = 0 path: loss with cl_enabled=false equals supervised only;
        // enabling CL on the same seed changes the loss trajectory
        let graph = tiny_graph();
        let mut config = tiny_config();
        config.epochs = 2;
        let split = split_edges(&graph, config.ratios().unwrap(), config.seed).unwrap();
        let base = train(&graph, &split, &config).unwrap();
        config.cl_enabled = true;
        let with_cl = train(&graph, &split, &config).unwrap();
        assert_ne!(
            base.log[0].loss.to_bits(),
            with_cl.log[0].loss.to_bits()
        );
    }

    #[test]
    fn total_loss_nonnegative_and_finite() {
        let graph = tiny_graph();
        let mut config = tiny_config();
        config.cl_enabled = true;
        let split = split_edges(&graph, config.ratios().unwrap(), config.seed).unwrap();
        let out = train(&graph, &split, &config).unwrap();
        for r in &out.log {
            assert!(r.loss.is_finite());
            assert!(r.loss >= 0.0);
        }
    }

    #[test]
    fn every_model_kind_trains() {
        let graph = tiny_graph();
        for kind in ModelKind::ALL {
            let mut config = tiny_config();
            config.model = kind;
            config.epochs = 2;
            let split = split_edges(&graph, config.ratios().unwrap(), config.seed).unwrap();
            let out = train(&graph, &split, &config).unwrap();
            assert!(out.log.iter().all(|r| r.loss.is_finite()), "{kind}");
        }
    }

    #[test]
    fn fused_and_prob_losses_agree_inside_the_stable_range() {
        let mut tape = Tape::new();
        let logits_raw = vec![0.7, -2.0, 1.3, 0.0, -0.4];
        let labels: Rc<Vec<f64>> = Rc::new(vec![1.0, 0.0, 1.0, 1.0, 0.0]);
        let logits = tape.constant(Tensor::vector(logits_raw.clone()));
        let fused = supervised_loss(&mut tape, logits, Rc::clone(&labels), &[], 0.0).unwrap();
        let probs = tape.constant(Tensor::vector(
            logits_raw.iter().map(|&z| sigmoid(z)).collect(),
        ));
        let plain = supervised_loss_from_probs(&mut tape, probs, labels, &[], 0.0).unwrap();
        assert!(
            (tape.value(fused).data()[0] - tape.value(plain).data()[0]).abs() < 1e-12
        );
    }
}
