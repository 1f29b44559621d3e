//! RGCNTD decoder: a basis-decomposed relational refinement layer feeding a
//! tensor-decomposition scorer.
//!
//! The refinement step aggregates neighbor messages per relation with row
//! normalization (c_ij = |N_i^r|) and no self term; relation weights are
//! mixtures of shared basis matrices. The scorer combines K global
//! interaction vectors with per-relation mixing coefficients:
//!
//! logit(i, r, j) = Σ_k a[r][k] · ⟨E_i ⊙ E_j ⊙ R_k⟩
//!
//! and maps it through the logistic function. Scores therefore depend on the
//! pair only through E_i ⊙ E_j.

use std::rc::Rc;

use crate::encoder::KindPair;
use crate::graph::{HeteroGraph, NodeId, RelationType, Triplet};
use crate::tensor::{sigmoid, Activation, Tape, Tensor, TensorError, Var};

/// Decoder weights bound onto a tape.
#[derive(Debug, Clone, Copy)]
pub struct DecoderWeightVars {
    /// `[n_bases, d*d]` shared basis matrices, flattened row-major.
    pub bases_flat: Var,
    /// `[4, n_bases]` per-relation basis coefficients.
    pub rel_coeffs: Var,
    /// `[K, d]` global interaction vectors R_k.
    pub factors: Var,
    /// `[4, K]` per-relation mixing coefficients a_{r,k}.
    pub mixing: Var,
}

/// Keep probabilities strictly inside (0, 1).
pub const SCORE_EPS: f64 = 1e-12;

/// One basis-decomposed relational refinement layer (no self term).
pub fn rgcn_refine(
    tape: &mut Tape,
    graph: &HeteroGraph,
    emb: KindPair<Var>,
    bases_flat: Var,
    rel_coeffs: Var,
    activation: Activation,
) -> Result<KindPair<Var>, TensorError> {
    let d = tape.value(emb.chem).cols();
    let bases = tape.value(bases_flat);
    if bases.cols() != d * d {
        return Err(TensorError::ShapeMismatch {
            op: "rgcn_refine",
            lhs: tape.value(emb.chem).shape().to_vec(),
            rhs: bases.shape().to_vec(),
        });
    }
    let (n_chem, n_gene) = (graph.n_chem(), graph.n_gene());
    let mut chem_acc = tape.constant(Tensor::zeros(&[n_chem, d]));
    let mut gene_acc = tape.constant(Tensor::zeros(&[n_gene, d]));

    for rel in RelationType::ALL {
        let edges = graph.edges(rel);
        if edges.is_empty() {
            continue;
        }
        let coeff_row = tape.gather_rows(rel_coeffs, Rc::new(vec![rel.index()]))?;
        let w_flat = tape.matmul(coeff_row, bases_flat)?;
        let w = tape.reshape(w_flat, &[d, d])?;

        let mut chem_idx = Vec::with_capacity(edges.len());
        let mut gene_idx = Vec::with_capacity(edges.len());
        let mut to_gene_coeffs = Vec::with_capacity(edges.len());
        let mut to_chem_coeffs = Vec::with_capacity(edges.len());
        for &(c, g) in edges {
            chem_idx.push(c as usize);
            gene_idx.push(g as usize);
            to_gene_coeffs.push(1.0 / graph.gene_degree(rel, NodeId(g)) as f64);
            to_chem_coeffs.push(1.0 / graph.chem_degree(rel, NodeId(c)) as f64);
        }
        let chem_idx = Rc::new(chem_idx);
        let gene_idx = Rc::new(gene_idx);

        // chem -> gene, normalized by the receiving gene's degree
        let picked = tape.gather_rows(emb.chem, Rc::clone(&chem_idx))?;
        let scaled = tape.mul_rows_const(picked, Rc::new(to_gene_coeffs))?;
        let msg = tape.matmul(scaled, w)?;
        let agg = tape.scatter_add_rows(msg, Rc::clone(&gene_idx), n_gene)?;
        gene_acc = tape.add(gene_acc, agg)?;

        // gene -> chem, normalized by the receiving chemical's degree
        let picked = tape.gather_rows(emb.gene, gene_idx)?;
        let scaled = tape.mul_rows_const(picked, Rc::new(to_chem_coeffs))?;
        let msg = tape.matmul(scaled, w)?;
        let agg = tape.scatter_add_rows(msg, chem_idx, n_chem)?;
        chem_acc = tape.add(chem_acc, agg)?;
    }

    Ok(KindPair {
        chem: activation.apply(tape, chem_acc)?,
        gene: activation.apply(tape, gene_acc)?,
    })
}

/// Raw scores for a batch of triplets over refined embeddings.
pub fn score_batch_logits(
    tape: &mut Tape,
    refined: KindPair<Var>,
    weights: &DecoderWeightVars,
    triplets: &[Triplet],
) -> Result<Var, TensorError> {
    let heads: Rc<Vec<usize>> = Rc::new(triplets.iter().map(|t| t.head.idx()).collect());
    let tails: Rc<Vec<usize>> = Rc::new(triplets.iter().map(|t| t.tail.idx()).collect());
    let rels: Rc<Vec<usize>> = Rc::new(triplets.iter().map(|t| t.relation.index()).collect());

    let h = tape.gather_rows(refined.chem, heads)?;
    let t = tape.gather_rows(refined.gene, tails)?;
    let a = tape.gather_rows(weights.mixing, rels)?;
    let q = tape.matmul(a, weights.factors)?;
    let pair = tape.hadamard(h, t)?;
    let mixed = tape.hadamard(pair, q)?;
    tape.row_sum(mixed)
}

/// Probabilities for a batch of triplets, clamped strictly inside (0, 1).
pub fn score_batch(
    tape: &mut Tape,
    refined: KindPair<Var>,
    weights: &DecoderWeightVars,
    triplets: &[Triplet],
) -> Result<Vec<f64>, TensorError> {
    let logits = score_batch_logits(tape, refined, weights, triplets)?;
    Ok(tape
        .value(logits)
        .data()
        .iter()
        .map(|&z| sigmoid(z).clamp(SCORE_EPS, 1.0 - SCORE_EPS))
        .collect())
}

/// Probability for one (head, relation, tail).
pub fn score(
    tape: &mut Tape,
    refined: KindPair<Var>,
    weights: &DecoderWeightVars,
    triplet: Triplet,
) -> Result<f64, TensorError> {
    Ok(score_batch(tape, refined, weights, &[triplet])?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_tensor(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
        Tensor::from_vec(
            &[rows, cols],
            (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    fn bind_decoder(
        tape: &mut Tape,
        d: usize,
        n_bases: usize,
        k: usize,
        rng: &mut ChaCha8Rng,
    ) -> DecoderWeightVars {
        DecoderWeightVars {
            bases_flat: tape.parameter(rand_tensor(n_bases, d * d, rng)),
            rel_coeffs: tape.parameter(rand_tensor(4, n_bases, rng)),
            factors: tape.parameter(rand_tensor(k, d, rng)),
            mixing: tape.parameter(rand_tensor(4, k, rng)),
        }
    }

    #[test]
    fn single_neighbor_identity_weight_copies_neighbor() {
        let mut b = HeteroGraph::builder(1, 1);
        b.add_edge(RelationType::Increase, NodeId(0), NodeId(0)).unwrap();
        let graph = b.build();
        let mut tape = Tape::new();
        let emb = KindPair {
            chem: tape.constant(Tensor::matrix(1, 2, vec![3.0, 4.0]).unwrap()),
            gene: tape.constant(Tensor::matrix(1, 2, vec![5.0, 6.0]).unwrap()),
        };
        // one basis = flattened identity, coefficients all one
        let weights = DecoderWeightVars {
            bases_flat: tape.constant(
                Tensor::from_vec(&[1, 4], Tensor::identity(2).data().to_vec()).unwrap(),
            ),
            rel_coeffs: tape.constant(Tensor::matrix(4, 1, vec![1.0; 4]).unwrap()),
            factors: tape.constant(Tensor::matrix(1, 2, vec![1.0, 1.0]).unwrap()),
            mixing: tape.constant(Tensor::matrix(4, 1, vec![1.0; 4]).unwrap()),
        };
        let out = rgcn_refine(&mut tape, &graph, emb, weights.bases_flat, weights.rel_coeffs, Activation::Identity).unwrap();
        // c_ij = 1: chem gets its gene neighbor, gene gets the chemical
        assert_eq!(tape.value(out.chem).data(), &[5.0, 6.0]);
        assert_eq!(tape.value(out.gene).data(), &[3.0, 4.0]);
    }

    #[test]
    fn refine_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..8 {
            let mut b = HeteroGraph::builder(5, 5);
            for c in 0..5u32 {
                for g in 0..5u32 {
                    for rel in RelationType::ALL {
                        if rng.random_bool(0.25) {
                            b.add_edge(rel, NodeId(c), NodeId(g)).unwrap();
                        }
                    }
                }
            }
            let graph = b.build();
            let d = 3;
            let chem_emb = rand_tensor(5, d, &mut rng);
            let gene_emb = rand_tensor(5, d, &mut rng);
            let n_bases = 2;
            let bases = rand_tensor(n_bases, d * d, &mut rng);
            let coeffs = rand_tensor(4, n_bases, &mut rng);

            let mut tape = Tape::new();
            let emb = KindPair {
                chem: tape.constant(chem_emb.clone()),
                gene: tape.constant(gene_emb.clone()),
            };
            let weights = DecoderWeightVars {
                bases_flat: tape.constant(bases.clone()),
                rel_coeffs: tape.constant(coeffs.clone()),
                factors: tape.constant(rand_tensor(2, d, &mut rng)),
                mixing: tape.constant(rand_tensor(4, 2, &mut rng)),
            };
            let out = rgcn_refine(&mut tape, &graph, emb, weights.bases_flat, weights.rel_coeffs, Activation::Tanh).unwrap();

            // naive per-node double loop
            let w_of = |r: usize| -> Vec<f64> {
                let mut w = vec![0.0; d * d];
                for b_ix in 0..n_bases {
                    let c = coeffs.data()[r * n_bases + b_ix];
                    for (wi, bv) in w.iter_mut().zip(&bases.data()[b_ix * d * d..(b_ix + 1) * d * d])
                    {
                        *wi += c * bv;
                    }
                }
                w
            };
            for i in 0..5 {
                let mut expect = vec![0.0; d];
                for rel in RelationType::ALL {
                    let deg = graph.chem_degree(rel, NodeId(i));
                    if deg == 0 {
                        continue;
                    }
                    let w = w_of(rel.index());
                    for &j in graph.gene_neighbors(rel, NodeId(i)) {
                        let hj = &gene_emb.data()[j as usize * d..(j as usize + 1) * d];
                        for o in 0..d {
                            let mut dot = 0.0;
                            for p in 0..d {
                                dot += hj[p] * w[p * d + o];
                            }
                            expect[o] += dot / deg as f64;
                        }
                    }
                }
                let got = &tape.value(out.chem).data()[i as usize * d..(i as usize + 1) * d];
                for o in 0..d {
                    assert!((got[o] - expect[o].tanh()).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn basis_identity_coefficients_reproduce_unconstrained_weights() {
        // n_bases = n_relations with identity coefficients: relation r's
        // weight is exactly basis r
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut b = HeteroGraph::builder(4, 4);
        for c in 0..4u32 {
            for g in 0..4u32 {
                if rng.random_bool(0.4) {
                    let rel = RelationType::ALL[rng.random_range(0..4)];
                    b.add_edge(rel, NodeId(c), NodeId(g)).unwrap();
                }
            }
        }
        let graph = b.build();
        let d = 3;
        let per_rel: Vec<Tensor> = (0..4).map(|_| rand_tensor(d, d, &mut rng)).collect();
        let emb_c = rand_tensor(4, d, &mut rng);
        let emb_g = rand_tensor(4, d, &mut rng);

        let run = |bases: Vec<f64>, coeffs: Tensor| {
            let mut tape = Tape::new();
            let emb = KindPair {
                chem: tape.constant(emb_c.clone()),
                gene: tape.constant(emb_g.clone()),
            };
            let weights = DecoderWeightVars {
                bases_flat: tape.constant(Tensor::from_vec(&[4, d * d], bases).unwrap()),
                rel_coeffs: tape.constant(coeffs),
                factors: tape.constant(Tensor::matrix(1, d, vec![1.0; d]).unwrap()),
                mixing: tape.constant(Tensor::matrix(4, 1, vec![1.0; 4]).unwrap()),
            };
            let out = rgcn_refine(&mut tape, &graph, emb, weights.bases_flat, weights.rel_coeffs, Activation::Identity).unwrap();
            (
                tape.value(out.chem).data().to_vec(),
                tape.value(out.gene).data().to_vec(),
            )
        };

        let flat: Vec<f64> = per_rel.iter().flat_map(|t| t.data().to_vec()).collect();
        let (c1, g1) = run(flat.clone(), Tensor::identity(4));
        let (c2, g2) = run(flat, Tensor::identity(4));
        assert_eq!(c1, c2);
        assert_eq!(g1, g2);
    }

    #[test]
    fn score_closed_form_all_ones() {
        // E_i = E_j = R_k = 1-vectors, K = 1, a = 1 -> sigma(d)
        let d = 4;
        let mut tape = Tape::new();
        let refined = KindPair {
            chem: tape.constant(Tensor::matrix(1, d, vec![1.0; d]).unwrap()),
            gene: tape.constant(Tensor::matrix(1, d, vec![1.0; d]).unwrap()),
        };
        let weights = DecoderWeightVars {
            bases_flat: tape.constant(Tensor::zeros(&[1, d * d])),
            rel_coeffs: tape.constant(Tensor::zeros(&[4, 1])),
            factors: tape.constant(Tensor::matrix(1, d, vec![1.0; d]).unwrap()),
            mixing: tape.constant(Tensor::matrix(4, 1, vec![1.0; 4]).unwrap()),
        };
        let t = Triplet::new(NodeId(0), RelationType::Increase, NodeId(0));
        let p = score(&mut tape, refined, &weights, t).unwrap();
        assert!((p - sigmoid(4.0)).abs() < 1e-12);
        assert!((p - 0.9820).abs() < 1e-4);
    }

    #[test]
    fn zero_mixing_or_zero_embedding_gives_half() {
        let d = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut tape = Tape::new();
        let refined = KindPair {
            chem: tape.constant(Tensor::zeros(&[2, d])),
            gene: tape.constant(rand_tensor(2, d, &mut rng)),
        };
        let weights = bind_decoder(&mut tape, d, 2, 2, &mut rng);
        let t = Triplet::new(NodeId(0), RelationType::Increase, NodeId(1));
        // E_i = 0 -> logit 0 -> 0.5
        assert_eq!(score(&mut tape, refined, &weights, t).unwrap(), 0.5);

        let refined = KindPair {
            chem: tape.constant(rand_tensor(2, d, &mut rng)),
            gene: tape.constant(rand_tensor(2, d, &mut rng)),
        };
        let zero_mix = DecoderWeightVars {
            mixing: tape.constant(Tensor::zeros(&[4, 2])),
            ..bind_decoder(&mut tape, d, 2, 2, &mut rng)
        };
        for rel in RelationType::ALL {
            let t = Triplet::new(NodeId(1), rel, NodeId(0));
            assert_eq!(score(&mut tape, refined, &zero_mix, t).unwrap(), 0.5);
        }
    }

    #[test]
    fn batch_matches_per_triplet_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 5;
        let mut tape = Tape::new();
        let refined = KindPair {
            chem: tape.constant(rand_tensor(10, d, &mut rng)),
            gene: tape.constant(rand_tensor(10, d, &mut rng)),
        };
        let weights = bind_decoder(&mut tape, d, 3, 4, &mut rng);
        let triplets: Vec<Triplet> = (0..200)
            .map(|_| {
                Triplet::new(
                    NodeId(rng.random_range(0..10)),
                    RelationType::ALL[rng.random_range(0..4)],
                    NodeId(rng.random_range(0..10)),
                )
            })
            .collect();
        let batch = score_batch(&mut tape, refined, &weights, &triplets).unwrap();
        for (i, &t) in triplets.iter().enumerate() {
            let single = score(&mut tape, refined, &weights, t).unwrap();
            assert!((batch[i] - single).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_batch_gives_empty_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut tape = Tape::new();
        let refined = KindPair {
            chem: tape.constant(rand_tensor(2, 3, &mut rng)),
            gene: tape.constant(rand_tensor(2, 3, &mut rng)),
        };
        let weights = bind_decoder(&mut tape, 3, 2, 2, &mut rng);
        let out = score_batch(&mut tape, refined, &weights, &[]).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn score_is_symmetric_in_pair_embeddings() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let d = 4;
        let e1 = rand_tensor(1, d, &mut rng);
        let e2 = rand_tensor(1, d, &mut rng);
        let mut tape = Tape::new();
        let weights = bind_decoder(&mut tape, d, 2, 3, &mut rng);
        let t = Triplet::new(NodeId(0), RelationType::Decrease, NodeId(0));

        let forward = KindPair {
            chem: tape.constant(e1.clone()),
            gene: tape.constant(e2.clone()),
        };
        let swapped = KindPair {
            chem: tape.constant(e2),
            gene: tape.constant(e1),
        };
        let a = score(&mut tape, forward, &weights, t).unwrap();
        let b = score(&mut tape, swapped, &weights, t).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn probabilities_open_interval_and_monotone() {
        let mut tape = Tape::new();
        let make = |tape: &mut Tape, v: f64| {
            let refined = KindPair {
                chem: tape.constant(Tensor::matrix(1, 1, vec![v]).unwrap()),
                gene: tape.constant(Tensor::matrix(1, 1, vec![1.0]).unwrap()),
            };
            let weights = DecoderWeightVars {
                bases_flat: tape.constant(Tensor::zeros(&[1, 1])),
                rel_coeffs: tape.constant(Tensor::zeros(&[4, 1])),
                factors: tape.constant(Tensor::matrix(1, 1, vec![1.0]).unwrap()),
                mixing: tape.constant(Tensor::matrix(4, 1, vec![1.0; 4]).unwrap()),
            };
            score(
                tape,
                refined,
                &weights,
                Triplet::new(NodeId(0), RelationType::Increase, NodeId(0)),
            )
            .unwrap()
        };
        // strictly monotone wherever the clamp is inactive
        let mut last = 0.0;
        for logit in [-25.0, -1.0, 0.0, 1.0, 25.0] {
            let p = make(&mut tape, logit);
            assert!(p > 0.0 && p < 1.0, "p = {p} at logit {logit}");
            assert!(p > last);
            last = p;
        }
        // extreme logits stay inside the open interval
        for logit in [-1e6, 1e6] {
            let p = make(&mut tape, logit);
            assert!(p > 0.0 && p < 1.0, "p = {p} at logit {logit}");
        }
    }
}
