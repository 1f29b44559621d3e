//! Deterministic per-relation stratified train/validation/test splitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GraphError, HeteroGraph, NodeId, RelationType, Triplet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self, GraphError> {
        let r = SplitRatios {
            train,
            validation,
            test,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|&p| p <= 0.0) {
            return Err(GraphError::InvalidArgument(format!(
                "split ratios must be positive, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(GraphError::InvalidArgument(format!(
                "split ratios must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

/// Disjoint triplet sets covering the chemical–gene edges of one graph.
#[derive(Debug, Clone)]
pub struct EdgeSplit {
    pub train: Vec<Triplet>,
    pub validation: Vec<Triplet>,
    pub test: Vec<Triplet>,
    pub seed: u64,
    pub ratios: SplitRatios,
    pub warnings: Vec<String>,
}

/// Split every chemical–gene edge, stratified per relation.
///
/// Pure in (graph, ratios, seed): the shuffle RNG stream is derived from the
/// seed and the relation index only.
pub fn split_edges(
    graph: &HeteroGraph,
    ratios: SplitRatios,
    seed: u64,
) -> Result<EdgeSplit, GraphError> {
    ratios.validate()?;
    let mut split = EdgeSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        seed,
        ratios,
        warnings: Vec::new(),
    };

    for rel in RelationType::ALL {
        let mut triplets: Vec<Triplet> = graph
            .edges(rel)
            .iter()
            .map(|&(c, g)| Triplet::new(NodeId(c), rel, NodeId(g)))
            .collect();
        if triplets.is_empty() {
            continue;
        }
        if triplets.len() < 3 {
            split.warnings.push(format!(
                "relation {} has {} edge(s); placed wholly in train",
                rel,
                triplets.len()
            ));
            split.train.extend(triplets);
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rel.index() as u64 + 1);
        triplets.shuffle(&mut rng);

        let n = triplets.len();
        let mut n_val = (n as f64 * ratios.validation).round() as usize;
        n_val = n_val.min(n);
        let mut n_test = (n as f64 * ratios.test).round() as usize;
        n_test = n_test.min(n - n_val);

        split.test.extend(triplets.drain(..n_test));
        split.validation.extend(triplets.drain(..n_val));
        split.train.extend(triplets);
    }
    Ok(split)
}
