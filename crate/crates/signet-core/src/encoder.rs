//! Two-layer relational graph convolutional encoder.
//!
//! Node inputs are one-hot, realized as identity feature matrices so the
//! first layer reduces to per-node row selection from the relation tables.
//! Each layer aggregates symmetric-normalized neighbor messages per relation
//! plus a degree-normalized self term routed through the same relation
//! weight (the raw self term is only well-typed when a layer preserves its
//! width). Nodes isolated under every relation pass through an identity
//! projection so no information is dropped.
//!
//! Optional homogeneous branches (chemical–chemical, gene–gene) run the same
//! propagation over their single relation; the final embedding concatenates
//! the heterogeneous branch with every enabled subgraph branch. A kind with
//! no enabled branch of its own receives a zero block of the branch width so
//! both kinds stay in one embedding space.

use std::rc::Rc;

use crate::graph::{HeteroGraph, NodeId, RelationType};
use crate::tensor::{Activation, Tape, Tensor, TensorError, Var};

/// A chemical-side and gene-side value of the same shape family.
#[derive(Debug, Clone, Copy)]
pub struct KindPair<T> {
    pub chem: T,
    pub gene: T,
}

/// Per-relation weights keyed by the kind of the message source.
///
/// Layer 0 uses two distinct tables (the per-kind one-hot spaces differ);
/// deeper layers pass the same `Var` twice, which keeps Eq-style single
/// relation weights while letting gradients accumulate once.
#[derive(Debug, Clone, Copy)]
pub struct RelWeights {
    pub from_chem: Var,
    pub from_gene: Var,
}

/// Which homogeneous subgraph branches participate in the embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SubgraphToggles {
    pub chem: bool,
    pub gene: bool,
}

/// All encoder weights bound onto a tape.
#[derive(Debug, Clone)]
pub struct EncoderWeightVars {
    /// One entry per layer; each holds the four relation weights.
    pub hetero: Vec<[RelWeights; 4]>,
    /// Per-layer weights of the chemical–chemical branch, when enabled.
    pub chem_branch: Option<Vec<Var>>,
    /// Per-layer weights of the gene–gene branch, when enabled.
    pub gene_branch: Option<Vec<Var>>,
}

fn out_width(tape: &Tape, weights: &[RelWeights; 4]) -> usize {
    tape.value(weights[0].from_chem).cols()
}

/// One relational graph convolution step over the chemical–gene relations.
///
/// For node i: act( Σ_r [ Σ_{j∈N_i^r} W_r h_j / √(|N_i^r||N_j^r|)
/// + W_r h_i / |N_i^r| ] ), with the self term skipped for relations where
/// the node has no neighbors and an identity projection for nodes isolated
/// under every relation.
pub fn rgc_layer(
    tape: &mut Tape,
    graph: &HeteroGraph,
    feats: KindPair<Var>,
    weights: &[RelWeights; 4],
    activation: Activation,
) -> Result<KindPair<Var>, TensorError> {
    let (n_chem, n_gene) = (graph.n_chem(), graph.n_gene());
    let dout = out_width(tape, weights);

    let mut chem_acc = tape.constant(Tensor::zeros(&[n_chem, dout]));
    let mut gene_acc = tape.constant(Tensor::zeros(&[n_gene, dout]));

    for rel in RelationType::ALL {
        let edges = graph.edges(rel);
        let w = &weights[rel.index()];
        if !edges.is_empty() {
            let mut chem_idx = Vec::with_capacity(edges.len());
            let mut gene_idx = Vec::with_capacity(edges.len());
            let mut coeffs = Vec::with_capacity(edges.len());
            for &(c, g) in edges {
                let dc = graph.chem_degree(rel, NodeId(c)) as f64;
                let dg = graph.gene_degree(rel, NodeId(g)) as f64;
                chem_idx.push(c as usize);
                gene_idx.push(g as usize);
                coeffs.push(1.0 / (dc * dg).sqrt());
            }
            let chem_idx = Rc::new(chem_idx);
            let gene_idx = Rc::new(gene_idx);
            let coeffs = Rc::new(coeffs);

            // chem -> gene messages
            let picked = tape.gather_rows(feats.chem, Rc::clone(&chem_idx))?;
            let scaled = tape.mul_rows_const(picked, Rc::clone(&coeffs))?;
            let msg = tape.matmul(scaled, w.from_chem)?;
            let agg = tape.scatter_add_rows(msg, Rc::clone(&gene_idx), n_gene)?;
            gene_acc = tape.add(gene_acc, agg)?;

            // gene -> chem messages
            let picked = tape.gather_rows(feats.gene, gene_idx)?;
            let scaled = tape.mul_rows_const(picked, coeffs)?;
            let msg = tape.matmul(scaled, w.from_gene)?;
            let agg = tape.scatter_add_rows(msg, chem_idx, n_chem)?;
            chem_acc = tape.add(chem_acc, agg)?;
        }

        // self terms: 1/|N_i^r| through the node's own kind weight, skipped
        // at degree zero
        let chem_self: Vec<f64> = (0..n_chem)
            .map(|i| match graph.chem_degree(rel, NodeId(i as u32)) {
                0 => 0.0,
                d => 1.0 / d as f64,
            })
            .collect();
        if chem_self.iter().any(|&c| c != 0.0) {
            let scaled = tape.mul_rows_const(feats.chem, Rc::new(chem_self))?;
            let msg = tape.matmul(scaled, w.from_chem)?;
            chem_acc = tape.add(chem_acc, msg)?;
        }
        let gene_self: Vec<f64> = (0..n_gene)
            .map(|i| match graph.gene_degree(rel, NodeId(i as u32)) {
                0 => 0.0,
                d => 1.0 / d as f64,
            })
            .collect();
        if gene_self.iter().any(|&c| c != 0.0) {
            let scaled = tape.mul_rows_const(feats.gene, Rc::new(gene_self))?;
            let msg = tape.matmul(scaled, w.from_gene)?;
            gene_acc = tape.add(gene_acc, msg)?;
        }
    }

    let chem_iso: Vec<usize> = (0..n_chem)
        .filter(|&i| {
            RelationType::ALL
                .iter()
                .all(|&r| graph.chem_degree(r, NodeId(i as u32)) == 0)
        })
        .collect();
    chem_acc = add_identity_path(tape, feats.chem, chem_acc, &chem_iso, n_chem, dout)?;
    let gene_iso: Vec<usize> = (0..n_gene)
        .filter(|&i| {
            RelationType::ALL
                .iter()
                .all(|&r| graph.gene_degree(r, NodeId(i as u32)) == 0)
        })
        .collect();
    gene_acc = add_identity_path(tape, feats.gene, gene_acc, &gene_iso, n_gene, dout)?;

    Ok(KindPair {
        chem: activation.apply(tape, chem_acc)?,
        gene: activation.apply(tape, gene_acc)?,
    })
}

/// Identity pass-through for fully isolated nodes, truncated or zero-padded
/// to the layer width via a constant rectangular projection.
fn add_identity_path(
    tape: &mut Tape,
    feats: Var,
    acc: Var,
    isolated: &[usize],
    rows: usize,
    dout: usize,
) -> Result<Var, TensorError> {
    if isolated.is_empty() {
        return Ok(acc);
    }
    let din = tape.value(feats).cols();
    let idx = Rc::new(isolated.to_vec());
    let picked = tape.gather_rows(feats, Rc::clone(&idx))?;
    let proj = tape.constant(Tensor::eye(din, dout));
    let mapped = tape.matmul(picked, proj)?;
    let spread = tape.scatter_add_rows(mapped, idx, rows)?;
    tape.add(acc, spread)
}

/// One propagation step over a homogeneous (single-relation) subgraph.
///
/// `neighbor_of` yields the symmetric neighbor list of each node. Same
/// normalization and self-term rules as [`rgc_layer`] with a one-element
/// relation set.
pub fn homo_layer(
    tape: &mut Tape,
    n_nodes: usize,
    neighbor_of: impl Fn(usize) -> Vec<u32>,
    feats: Var,
    weight: Var,
    activation: Activation,
) -> Result<Var, TensorError> {
    let dout = tape.value(weight).cols();
    let mut acc = tape.constant(Tensor::zeros(&[n_nodes, dout]));

    let adjacency: Vec<Vec<u32>> = (0..n_nodes).map(&neighbor_of).collect();
    let degree = |i: usize| adjacency[i].len();

    let mut src_idx = Vec::new();
    let mut dst_idx = Vec::new();
    let mut coeffs = Vec::new();
    for (dst, nbrs) in adjacency.iter().enumerate() {
        for &src in nbrs {
            src_idx.push(src as usize);
            dst_idx.push(dst);
            coeffs.push(1.0 / ((degree(dst) * degree(src as usize)) as f64).sqrt());
        }
    }
    if !src_idx.is_empty() {
        let picked = tape.gather_rows(feats, Rc::new(src_idx))?;
        let scaled = tape.mul_rows_const(picked, Rc::new(coeffs))?;
        let msg = tape.matmul(scaled, weight)?;
        let agg = tape.scatter_add_rows(msg, Rc::new(dst_idx), n_nodes)?;
        acc = tape.add(acc, agg)?;
    }

    let self_coeffs: Vec<f64> = (0..n_nodes)
        .map(|i| match degree(i) {
            0 => 0.0,
            d => 1.0 / d as f64,
        })
        .collect();
    if self_coeffs.iter().any(|&c| c != 0.0) {
        let scaled = tape.mul_rows_const(feats, Rc::new(self_coeffs))?;
        let msg = tape.matmul(scaled, weight)?;
        acc = tape.add(acc, msg)?;
    }

    let isolated: Vec<usize> = (0..n_nodes).filter(|&i| degree(i) == 0).collect();
    acc = add_identity_path(tape, feats, acc, &isolated, n_nodes, dout)?;
    activation.apply(tape, acc)
}

/// Run the full encoder: identity (one-hot) inputs, the heterogeneous stack,
/// optional subgraph branches, and the final concatenation.
pub fn encode(
    tape: &mut Tape,
    graph: &HeteroGraph,
    weights: &EncoderWeightVars,
    toggles: SubgraphToggles,
    activation: Activation,
) -> Result<KindPair<Var>, TensorError> {
    if toggles.chem && graph.chem_chem_edges().is_empty() {
        return Err(TensorError::Invalid {
            op: "encode",
            msg: "chemical subgraph enabled but the graph has no chem_chem edges".into(),
        });
    }
    if toggles.gene && graph.gene_gene_edges().is_empty() {
        return Err(TensorError::Invalid {
            op: "encode",
            msg: "gene subgraph enabled but the graph has no gene_gene edges".into(),
        });
    }
    if toggles.chem != weights.chem_branch.is_some() || toggles.gene != weights.gene_branch.is_some()
    {
        return Err(TensorError::Invalid {
            op: "encode",
            msg: "subgraph toggles do not match the provided branch weights".into(),
        });
    }

    let mut feats = KindPair {
        chem: tape.constant(Tensor::identity(graph.n_chem())),
        gene: tape.constant(Tensor::identity(graph.n_gene())),
    };
    for layer in &weights.hetero {
        feats = rgc_layer(tape, graph, feats, layer, activation)?;
    }
    let mut chem_out = feats.chem;
    let mut gene_out = feats.gene;

    if let Some(branch) = &weights.chem_branch {
        let mut b = tape.constant(Tensor::identity(graph.n_chem()));
        for &w in branch {
            b = homo_layer(
                tape,
                graph.n_chem(),
                |i| graph.chem_chem_neighbors(NodeId(i as u32)).to_vec(),
                b,
                w,
                activation,
            )?;
        }
        let width = tape.value(b).cols();
        chem_out = tape.concat_cols(chem_out, b)?;
        let pad = tape.constant(Tensor::zeros(&[graph.n_gene(), width]));
        gene_out = tape.concat_cols(gene_out, pad)?;
    }
    if let Some(branch) = &weights.gene_branch {
        let mut b = tape.constant(Tensor::identity(graph.n_gene()));
        for &w in branch {
            b = homo_layer(
                tape,
                graph.n_gene(),
                |i| graph.gene_gene_neighbors(NodeId(i as u32)).to_vec(),
                b,
                w,
                activation,
            )?;
        }
        let width = tape.value(b).cols();
        gene_out = tape.concat_cols(gene_out, b)?;
        let pad = tape.constant(Tensor::zeros(&[graph.n_chem(), width]));
        chem_out = tape.concat_cols(chem_out, pad)?;
    }

    Ok(KindPair {
        chem: chem_out,
        gene: gene_out,
    })
}
