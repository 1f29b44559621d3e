//! Negative sampling by head/tail corruption and ML/CL constraint pairs.

use rand::Rng;

use super::{HeteroGraph, NodeId, Triplet};

/// Labeled triplets plus the collision statistic from bounded-retry filtering.
#[derive(Debug, Clone)]
pub struct NegativeSample {
    /// `(triplet, label)` with label 1.0 for positives, 0.0 for negatives.
    pub records: Vec<(Triplet, f64)>,
    /// Corruption slots where 100 attempts failed to find a non-edge.
    pub collisions: u64,
}

const MAX_ATTEMPTS: usize = 100;

/// For each positive, emit it (label 1) plus `n_per_positive` corrupted
/// triplets (label 0) with head or tail replaced uniformly at random.
///
/// Candidates that exist as true edges in `graph` are rejected and redrawn;
/// after 100 attempts the last candidate is emitted anyway and counted in
/// `collisions`, so dense toy graphs cannot livelock the sampler.
pub fn sample_negatives(
    batch: &[Triplet],
    graph: &HeteroGraph,
    n_per_positive: usize,
    rng: &mut impl Rng,
) -> NegativeSample {
    assert!(n_per_positive >= 1, "n_per_positive must be >= 1");
    let mut records = Vec::with_capacity(batch.len() * (1 + n_per_positive));
    let mut collisions = 0u64;

    for &pos in batch {
        records.push((pos, 1.0));
        for _ in 0..n_per_positive {
            let mut candidate = pos;
            let mut accepted = false;
            for _ in 0..MAX_ATTEMPTS {
                candidate = if rng.random_bool(0.5) {
                    Triplet::new(
                        NodeId(rng.random_range(0..graph.n_chem() as u32)),
                        pos.relation,
                        pos.tail,
                    )
                } else {
                    Triplet::new(
                        pos.head,
                        pos.relation,
                        NodeId(rng.random_range(0..graph.n_gene() as u32)),
                    )
                };
                if !graph.has_edge(candidate.relation, candidate.head, candidate.tail) {
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                collisions += 1;
            }
            records.push((candidate, 0.0));
        }
    }
    NegativeSample {
        records,
        collisions,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    MustLink,
    CannotLink,
}

/// Whether Cannot-Link pairs are generated alongside Must-Link pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClMode {
    WithCl,
    WithoutCl,
}

/// An anchor edge paired with a probe relation on the same (head, tail).
///
/// Must-Link probes share the anchor's polarity class; Cannot-Link probes
/// carry the opposite polar relation. Non-polar anchors never form pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintPair {
    pub kind: ConstraintKind,
    pub anchor: Triplet,
    pub probe: Triplet,
}

/// Build ML (and, with [`ClMode::WithCl`], CL) pairs for every polar triplet.
///
/// The construction is deterministic: one ML pair per polar positive with the
/// probe relation equal to the label, plus one CL pair probing the opposite
/// relation when enabled.
pub fn build_constraint_pairs(batch: &[Triplet], mode: ClMode) -> Vec<ConstraintPair> {
    let mut pairs = Vec::new();
    for &t in batch {
        if !t.relation.is_polar() {
            continue;
        }
        pairs.push(ConstraintPair {
            kind: ConstraintKind::MustLink,
            anchor: t,
            probe: t,
        });
        if mode == ClMode::WithCl {
            let opposite = t.relation.opposite().expect("polar relation has an opposite");
            pairs.push(ConstraintPair {
                kind: ConstraintKind::CannotLink,
                anchor: t,
                probe: Triplet::new(t.head, opposite, t.tail),
            });
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::RelationType;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sparse_graph() -> HeteroGraph {
        let mut b = HeteroGraph::builder(8, 8);
        b.add_edge(RelationType::Increase, NodeId(0), NodeId(0)).unwrap();
        b.add_edge(RelationType::Decrease, NodeId(1), NodeId(2)).unwrap();
        b.build()
    }

    #[test]
    fn count_contract_one_positive_one_negative() {
        let g = sparse_graph();
        let batch = vec![Triplet::new(NodeId(0), RelationType::Increase, NodeId(0))];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sample = sample_negatives(&batch, &g, 1, &mut rng);
        assert_eq!(sample.records.len(), 2);
        assert_eq!(sample.records.iter().filter(|(_, l)| *l == 1.0).count(), 1);
    }

    #[test]
    fn negatives_avoid_true_edges() {
        let g = sparse_graph();
        let batch = g.all_triplets();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sample = sample_negatives(&batch, &g, 4, &mut rng);
        assert_eq!(sample.collisions, 0);
        for (t, label) in &sample.records {
            if *label == 0.0 {
                assert!(!g.has_edge(t.relation, t.head, t.tail));
            }
        }
    }

    #[test]
    fn complete_bipartite_graph_counts_collisions() {
        let mut b = HeteroGraph::builder(2, 2);
        for c in 0..2 {
            for g in 0..2 {
                b.add_edge(RelationType::Binding, NodeId(c), NodeId(g)).unwrap();
            }
        }
        let g = b.build();
        let batch = vec![Triplet::new(NodeId(0), RelationType::Binding, NodeId(0))];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sample = sample_negatives(&batch, &g, 1, &mut rng);
        assert!(sample.collisions > 0);
        assert_eq!(sample.records.len(), 2);
    }

    #[test]
    fn determinism_under_fixed_seed() {
        let g = sparse_graph();
        let batch: Vec<Triplet> = (0..64)
            .map(|i| Triplet::new(NodeId(i % 8), RelationType::Increase, NodeId((i * 3) % 8)))
            .collect();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(42);
            sample_negatives(&batch, &g, 1, &mut rng).records
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn ml_and_cl_pairs_from_polar_triplet() {
        let t = Triplet::new(NodeId(0), RelationType::Increase, NodeId(1));
        let pairs = build_constraint_pairs(&[t], ClMode::WithCl);
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].kind, ConstraintKind::MustLink);
        assert_eq!(pairs[0].probe.relation, RelationType::Increase);
        assert_eq!(pairs[1].kind, ConstraintKind::CannotLink);
        assert_eq!(pairs[1].probe.relation, RelationType::Decrease);
        assert_eq!(pairs[1].probe.head, t.head);
        assert_eq!(pairs[1].probe.tail, t.tail);
    }

    #[test]
    fn non_polar_triplets_produce_nothing() {
        let t = Triplet::new(NodeId(0), RelationType::Binding, NodeId(1));
        assert!(build_constraint_pairs(&[t], ClMode::WithCl).is_empty());
    }

    #[test]
    fn without_cl_emits_ml_only() {
        let t = Triplet::new(NodeId(0), RelationType::Decrease, NodeId(1));
        let pairs = build_constraint_pairs(&[t], ClMode::WithoutCl);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].kind, ConstraintKind::MustLink);
        assert_eq!(pairs[0].probe.relation, RelationType::Decrease);
    }
}
