//! Heterogeneous chemical–gene graph: typed nodes, per-relation adjacency,
//! ingestion, splitting, sampling, and the planted-polarity generator.

mod ingest;
mod sampling;
mod split;
mod synthetic;

pub use ingest::{ingest_tsv, write_tsv, IngestSummary};
pub use sampling::{
    build_constraint_pairs, sample_negatives, ClMode, ConstraintKind, ConstraintPair,
    NegativeSample,
};
pub use split::{split_edges, EdgeSplit, SplitRatios};
pub use synthetic::{generate_synthetic, SyntheticConfig, SyntheticMeta};

use std::collections::HashSet;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: unknown node id `{id}`")]
    UnknownNode { line: usize, id: String },
    #[error("line {line}: {msg}")]
    Schema { line: usize, msg: String },
    #[error("node index {index} out of range for {kind:?} ({count} nodes)")]
    NodeOutOfRange {
        kind: NodeKind,
        index: u32,
        count: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Dense node index, unique within a [`NodeKind`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Chemical,
    Gene,
}

/// Sign class of a relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
    None,
}

/// The four chemical–gene relation labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationType {
    Increase,
    Decrease,
    Binding,
    Affect,
}

impl RelationType {
    pub const ALL: [RelationType; 4] = [
        RelationType::Increase,
        RelationType::Decrease,
        RelationType::Binding,
        RelationType::Affect,
    ];

    pub fn polarity(self) -> Polarity {
        match self {
            RelationType::Increase => Polarity::Positive,
            RelationType::Decrease => Polarity::Negative,
            RelationType::Binding | RelationType::Affect => Polarity::None,
        }
    }

    pub fn is_polar(self) -> bool {
        self.polarity() != Polarity::None
    }

    /// The mutually exclusive opposite for polar relations.
    pub fn opposite(self) -> Option<RelationType> {
        match self {
            RelationType::Increase => Some(RelationType::Decrease),
            RelationType::Decrease => Some(RelationType::Increase),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            RelationType::Increase => 0,
            RelationType::Decrease => 1,
            RelationType::Binding => 2,
            RelationType::Affect => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<RelationType> {
        RelationType::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelationType::Increase => "increase",
            RelationType::Decrease => "decrease",
            RelationType::Binding => "binding",
            RelationType::Affect => "affect",
        }
    }
}

impl std::fmt::Display for RelationType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A chemical–gene edge: head is always the chemical, tail the gene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triplet {
    pub head: NodeId,
    pub relation: RelationType,
    pub tail: NodeId,
}

impl Triplet {
    pub fn new(head: NodeId, relation: RelationType, tail: NodeId) -> Self {
        Triplet {
            head,
            relation,
            tail,
        }
    }
}

/// Immutable heterogeneous graph with per-relation neighbor indexes.
///
/// Chemical–gene edges are stored per [`RelationType`]; the optional
/// homogeneous subgraphs (chemical–chemical, gene–gene) are undirected
/// single-label edge lists. All neighbor lists are sorted, so iteration
/// order is deterministic.
#[derive(Debug, Clone)]
pub struct HeteroGraph {
    n_chem: usize,
    n_gene: usize,
    edges: [Vec<(u32, u32)>; 4],
    chem_chem: Vec<(u32, u32)>,
    gene_gene: Vec<(u32, u32)>,
    /// per relation: genes adjacent to each chemical
    chem_nbrs: [Vec<Vec<u32>>; 4],
    /// per relation: chemicals adjacent to each gene
    gene_nbrs: [Vec<Vec<u32>>; 4],
    chem_chem_nbrs: Vec<Vec<u32>>,
    gene_gene_nbrs: Vec<Vec<u32>>,
    edge_set: HashSet<(u8, u32, u32)>,
}

impl HeteroGraph {
    pub fn builder(n_chem: usize, n_gene: usize) -> GraphBuilder {
        GraphBuilder {
            n_chem,
            n_gene,
            edges: Default::default(),
            chem_chem: Vec::new(),
            gene_gene: Vec::new(),
            duplicates: 0,
        }
    }

    pub fn n_chem(&self) -> usize {
        self.n_chem
    }

    pub fn n_gene(&self) -> usize {
        self.n_gene
    }

    pub fn edges(&self, relation: RelationType) -> &[(u32, u32)] {
        &self.edges[relation.index()]
    }

    pub fn chem_chem_edges(&self) -> &[(u32, u32)] {
        &self.chem_chem
    }

    pub fn gene_gene_edges(&self) -> &[(u32, u32)] {
        &self.gene_gene
    }

    /// All chemical–gene triplets in relation order.
    pub fn all_triplets(&self) -> Vec<Triplet> {
        let mut out = Vec::new();
        for rel in RelationType::ALL {
            for &(c, g) in self.edges(rel) {
                out.push(Triplet::new(NodeId(c), rel, NodeId(g)));
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, relation: RelationType, chem: NodeId, gene: NodeId) -> bool {
        self.edge_set
            .contains(&(relation.index() as u8, chem.0, gene.0))
    }

    /// Genes adjacent to `chem` under `relation`.
    pub fn gene_neighbors(&self, relation: RelationType, chem: NodeId) -> &[u32] {
        &self.chem_nbrs[relation.index()][chem.idx()]
    }

    /// Chemicals adjacent to `gene` under `relation`.
    pub fn chem_neighbors(&self, relation: RelationType, gene: NodeId) -> &[u32] {
        &self.gene_nbrs[relation.index()][gene.idx()]
    }

    pub fn chem_chem_neighbors(&self, chem: NodeId) -> &[u32] {
        &self.chem_chem_nbrs[chem.idx()]
    }

    pub fn gene_gene_neighbors(&self, gene: NodeId) -> &[u32] {
        &self.gene_gene_nbrs[gene.idx()]
    }

    /// |N_i^r| for a chemical node.
    pub fn chem_degree(&self, relation: RelationType, chem: NodeId) -> usize {
        self.gene_neighbors(relation, chem).len()
    }

    /// |N_i^r| for a gene node.
    pub fn gene_degree(&self, relation: RelationType, gene: NodeId) -> usize {
        self.chem_neighbors(relation, gene).len()
    }
}

/// Accumulates edges, then freezes them into a [`HeteroGraph`].
pub struct GraphBuilder {
    n_chem: usize,
    n_gene: usize,
    edges: [Vec<(u32, u32)>; 4],
    chem_chem: Vec<(u32, u32)>,
    gene_gene: Vec<(u32, u32)>,
    duplicates: usize,
}

impl GraphBuilder {
    pub fn add_edge(
        &mut self,
        relation: RelationType,
        chem: NodeId,
        gene: NodeId,
    ) -> Result<(), GraphError> {
        if chem.idx() >= self.n_chem {
            return Err(GraphError::NodeOutOfRange {
                kind: NodeKind::Chemical,
                index: chem.0,
                count: self.n_chem,
            });
        }
        if gene.idx() >= self.n_gene {
            return Err(GraphError::NodeOutOfRange {
                kind: NodeKind::Gene,
                index: gene.0,
                count: self.n_gene,
            });
        }
        self.edges[relation.index()].push((chem.0, gene.0));
        Ok(())
    }

    pub fn add_chem_chem(&mut self, a: NodeId, b: NodeId) -> Result<(), GraphError> {
        for n in [a, b] {
            if n.idx() >= self.n_chem {
                return Err(GraphError::NodeOutOfRange {
                    kind: NodeKind::Chemical,
                    index: n.0,
                    count: self.n_chem,
                });
            }
        }
        self.chem_chem.push((a.0.min(b.0), a.0.max(b.0)));
        Ok(())
    }

    pub fn add_gene_gene(&mut self, a: NodeId, b: NodeId) -> Result<(), GraphError> {
        for n in [a, b] {
            if n.idx() >= self.n_gene {
                return Err(GraphError::NodeOutOfRange {
                    kind: NodeKind::Gene,
                    index: n.0,
                    count: self.n_gene,
                });
            }
        }
        self.gene_gene.push((a.0.min(b.0), a.0.max(b.0)));
        Ok(())
    }

    /// Number of duplicate edges dropped so far (set during `build`).
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn build(mut self) -> HeteroGraph {
        let mut duplicates = 0;
        for list in self.edges.iter_mut() {
            let before = list.len();
            list.sort_unstable();
            list.dedup();
            duplicates += before - list.len();
        }
        for list in [&mut self.chem_chem, &mut self.gene_gene] {
            let before = list.len();
            list.sort_unstable();
            list.dedup();
            duplicates += before - list.len();
        }
        self.duplicates = duplicates;

        let mut chem_nbrs: [Vec<Vec<u32>>; 4] =
            std::array::from_fn(|_| vec![Vec::new(); self.n_chem]);
        let mut gene_nbrs: [Vec<Vec<u32>>; 4] =
            std::array::from_fn(|_| vec![Vec::new(); self.n_gene]);
        let mut edge_set = HashSet::new();
        for (r, list) in self.edges.iter().enumerate() {
            for &(c, g) in list {
                chem_nbrs[r][c as usize].push(g);
                gene_nbrs[r][g as usize].push(c);
                edge_set.insert((r as u8, c, g));
            }
        }

        let mut chem_chem_nbrs = vec![Vec::new(); self.n_chem];
        for &(a, b) in &self.chem_chem {
            chem_chem_nbrs[a as usize].push(b);
            if a != b {
                chem_chem_nbrs[b as usize].push(a);
            }
        }
        let mut gene_gene_nbrs = vec![Vec::new(); self.n_gene];
        for &(a, b) in &self.gene_gene {
            gene_gene_nbrs[a as usize].push(b);
            if a != b {
                gene_gene_nbrs[b as usize].push(a);
            }
        }
        for lists in chem_nbrs.iter_mut().chain(gene_nbrs.iter_mut()) {
            for l in lists.iter_mut() {
                l.sort_unstable();
            }
        }
        for l in chem_chem_nbrs.iter_mut().chain(gene_gene_nbrs.iter_mut()) {
            l.sort_unstable();
        }

        HeteroGraph {
            n_chem: self.n_chem,
            n_gene: self.n_gene,
            edges: self.edges,
            chem_chem: self.chem_chem,
            gene_gene: self.gene_gene,
            chem_nbrs,
            gene_nbrs,
            chem_chem_nbrs,
            gene_gene_nbrs,
            edge_set,
        }
    }
}
