//! Signed heterogeneous link prediction.
//!
//! An end-to-end engine for chemical–gene interaction graphs whose edges
//! carry a polarity: a relational graph-convolutional encoder feeding a
//! tensor-decomposition decoder, Must-Link/Cannot-Link conflict-aware
//! training, three baseline scorers, and a polarity-aware evaluation suite.
//! Everything runs on a small built-in tensor engine with reverse-mode
//! differentiation; all randomized steps are seeded and reproducible.

pub mod decoder;
pub mod encoder;
pub mod graph;
pub mod metrics;
pub mod model;
pub mod tensor;
pub mod train;

pub use graph::{
    build_constraint_pairs, generate_synthetic, ingest_tsv, sample_negatives, split_edges,
    ClMode, ConstraintKind, ConstraintPair, EdgeSplit, GraphError, HeteroGraph, IngestSummary,
    NegativeSample, NodeId, NodeKind, Polarity, RelationType, SplitRatios, SyntheticConfig,
    SyntheticMeta, Triplet,
};
pub use tensor::{adam_step, grad_check, Activation, AdamState, Tape, Tensor, TensorError, Var};
pub use graph::write_tsv;
pub use encoder::SubgraphToggles;
pub use metrics::{
    auc_polarity, auprc, auroc, average_precision_at_k, cp_at_k, evaluate, macro_micro,
    polarity_degree, transform_c, write_report_files, EvalError, EvalReport, MetricError,
    PolarRecord, PredictionRecord,
};
pub use model::{sample_neighbors, Model, ModelHyper, ModelKind, NeighborSamples, ParamBag};
pub use train::{
    constraint_loss, eval_rng, load_checkpoint, log_to_csv, save_checkpoint, stream_rng,
    supervised_loss, train, AucPolarityMode, CheckpointError, ClReduction, LogRecord, ModelState,
    TrainConfig, TrainError, TrainOutcome,
};
