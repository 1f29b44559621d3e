//! Planted-polarity synthetic graphs for desk-scale benchmarks.
//!
//! Every chemical and gene carries a latent sign; with probability
//! `polarity_signal` a sampled pair's relation is determined by the sign
//! product (+ gives Increase, − gives Decrease), otherwise it is uniform
//! over all four relation types. A configurable fraction of pairs receive an
//! additional Binding edge so polar and non-polar relations coexist on the
//! same pair, and sparse homogeneous edges (sign-assortative) support the
//! subgraph ablation arms.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GraphError, HeteroGraph, NodeId, RelationType};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_chem: usize,
    pub n_gene: usize,
    /// Bernoulli probability that a (chemical, gene) pair gets an edge.
    pub density: f64,
    /// Probability that a sampled pair's relation follows the sign product.
    pub polarity_signal: f64,
    /// Probability that a sampled pair gets a coexisting Binding edge.
    pub binding_fraction: f64,
    /// Base probability of a same-sign homogeneous edge; opposite-sign pairs
    /// connect at a quarter of this rate.
    pub homo_density: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_chem: 50,
            n_gene: 50,
            density: 0.05,
            polarity_signal: 0.9,
            binding_fraction: 0.15,
            homo_density: 0.03,
            seed: 0,
        }
    }
}

/// Latent generator state kept for diagnostics.
#[derive(Debug, Clone)]
pub struct SyntheticMeta {
    pub chem_signs: Vec<i8>,
    pub gene_signs: Vec<i8>,
}

pub fn generate_synthetic(
    config: &SyntheticConfig,
) -> Result<(HeteroGraph, SyntheticMeta), GraphError> {
    if config.n_chem < 2 || config.n_gene < 2 {
        return Err(GraphError::InvalidArgument(
            "need at least 2 nodes of each kind".into(),
        ));
    }
    if !(config.density > 0.0 && config.density <= 1.0) {
        return Err(GraphError::InvalidArgument(format!(
            "density must be in (0, 1], got {}",
            config.density
        )));
    }
    for (name, v) in [
        ("polarity_signal", config.polarity_signal),
        ("binding_fraction", config.binding_fraction),
        ("homo_density", config.homo_density),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(GraphError::InvalidArgument(format!(
                "{name} must be in [0, 1], got {v}"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sign = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { 1i8 } else { -1i8 };
    let chem_signs: Vec<i8> = (0..config.n_chem).map(|_| sign(&mut rng)).collect();
    let gene_signs: Vec<i8> = (0..config.n_gene).map(|_| sign(&mut rng)).collect();

    let mut builder = HeteroGraph::builder(config.n_chem, config.n_gene);
    let mut hetero_edges = 0usize;
    for c in 0..config.n_chem {
        for g in 0..config.n_gene {
            if !rng.random_bool(config.density) {
                continue;
            }
            let relation = if rng.random_bool(config.polarity_signal) {
                if chem_signs[c] * gene_signs[g] > 0 {
                    RelationType::Increase
                } else {
                    RelationType::Decrease
                }
            } else {
                RelationType::ALL[rng.random_range(0..4)]
            };
            builder.add_edge(relation, NodeId(c as u32), NodeId(g as u32))?;
            hetero_edges += 1;
            if relation != RelationType::Binding && rng.random_bool(config.binding_fraction) {
                builder.add_edge(RelationType::Binding, NodeId(c as u32), NodeId(g as u32))?;
            }
        }
    }
    if hetero_edges == 0 {
        return Err(GraphError::InvalidArgument(format!(
            "density {} produced 0 chemical-gene edges",
            config.density
        )));
    }

    if config.homo_density > 0.0 {
        for a in 0..config.n_chem {
            for b in (a + 1)..config.n_chem {
                let p = if chem_signs[a] == chem_signs[b] {
                    config.homo_density
                } else {
                    config.homo_density * 0.25
                };
                if rng.random_bool(p) {
                    builder.add_chem_chem(NodeId(a as u32), NodeId(b as u32))?;
                }
            }
        }
        for a in 0..config.n_gene {
            for b in (a + 1)..config.n_gene {
                let p = if gene_signs[a] == gene_signs[b] {
                    config.homo_density
                } else {
                    config.homo_density * 0.25
                };
                if rng.random_bool(p) {
                    builder.add_gene_gene(NodeId(a as u32), NodeId(b as u32))?;
                }
            }
        }
    }

    Ok((
        builder.build(),
        SyntheticMeta {
            chem_signs,
            gene_signs,
        },
    ))
}
