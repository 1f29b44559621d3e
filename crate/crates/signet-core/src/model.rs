//! Model assembly: parameter storage, initialization, and per-batch binding
//! of the RGCNTD model and the three baseline scorers onto a gradient tape.

use rand::Rng;

use crate::decoder::{rgcn_refine, score_batch_logits, DecoderWeightVars, SCORE_EPS};
use crate::encoder::{encode, EncoderWeightVars, KindPair, RelWeights, SubgraphToggles};
use crate::graph::{HeteroGraph, NodeId, RelationType, Triplet};
use crate::tensor::{sigmoid, Activation, Tape, Tensor, TensorError, Var};

use std::rc::Rc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Rgcntd,
    Rgcn,
    GraphSage,
    TransE,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Rgcntd,
        ModelKind::Rgcn,
        ModelKind::GraphSage,
        ModelKind::TransE,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Rgcntd => "rgcntd",
            ModelKind::Rgcn => "rgcn",
            ModelKind::GraphSage => "graphsage",
            ModelKind::TransE => "transe",
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            ModelKind::Rgcntd => 0,
            ModelKind::Rgcn => 1,
            ModelKind::GraphSage => 2,
            ModelKind::TransE => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<ModelKind> {
        ModelKind::ALL.into_iter().find(|k| k.tag() == tag)
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rgcntd" => Ok(ModelKind::Rgcntd),
            "rgcn" => Ok(ModelKind::Rgcn),
            "graphsage" => Ok(ModelKind::GraphSage),
            "transe" => Ok(ModelKind::TransE),
            other => Err(format!(
                "unknown model `{other}` (expected rgcntd|rgcn|graphsage|transe)"
            )),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Named, ordered parameter storage. The order is the flat order used by the
/// optimizer, the checkpoint format, and tape binding.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBag {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

impl ParamBag {
    pub fn new() -> Self {
        ParamBag {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(tensor);
        ParamId(self.names.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn shapes(&self) -> Vec<&[usize]> {
        self.tensors.iter().map(|t| t.shape()).collect()
    }

    /// Total squared L2 norm over every parameter.
    pub fn sq_l2(&self) -> f64 {
        self.tensors.iter().map(Tensor::sq_l2).sum()
    }
}

impl Default for ParamBag {
    fn default() -> Self {
        Self::new()
    }
}

/// Hyperparameters that shape a model's parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelHyper {
    pub kind: ModelKind,
    pub hidden_dims: Vec<usize>,
    pub n_bases: usize,
    pub toggles: SubgraphToggles,
    pub hidden_activation: Activation,
    /// GraphSAGE neighbor sample size.
    pub neighbor_samples: usize,
    /// TransE probability offset: score = sigma(gamma - distance).
    pub transe_gamma: f64,
}

impl Default for ModelHyper {
    fn default() -> Self {
        ModelHyper {
            kind: ModelKind::Rgcntd,
            hidden_dims: vec![32, 16],
            n_bases: 4,
            toggles: SubgraphToggles::default(),
            hidden_activation: Activation::Relu,
            neighbor_samples: 10,
            transe_gamma: 2.0,
        }
    }
}

enum Layout {
    Rgcntd {
        /// (from_chem, from_gene) per relation per layer; equal ids above layer 0.
        hetero: Vec<[(ParamId, ParamId); 4]>,
        chem_branch: Option<Vec<ParamId>>,
        gene_branch: Option<Vec<ParamId>>,
        dec_bases: ParamId,
        dec_coeffs: ParamId,
        dec_factors: ParamId,
        dec_mixing: ParamId,
    },
    Rgcn {
        chem_emb: ParamId,
        gene_emb: ParamId,
        bases: ParamId,
        coeffs: ParamId,
        rel_vecs: ParamId,
    },
    Sage {
        chem_emb: ParamId,
        gene_emb: ParamId,
        w_agg: ParamId,
        rel_vecs: ParamId,
    },
    TransE {
        chem_emb: ParamId,
        gene_emb: ParamId,
        rel_vecs: ParamId,
    },
}

/// A scoring model: parameter bag plus the wiring to run it on a tape.
pub struct Model {
    pub hyper: ModelHyper,
    bag: ParamBag,
    layout: Layout,
}

/// Per-epoch neighbor samples for GraphSAGE (with replacement; empty for
/// isolated nodes).
#[derive(Debug, Clone)]
pub struct NeighborSamples {
    pub chem: Vec<Vec<u32>>,
    pub gene: Vec<Vec<u32>>,
}

/// Draw `size` neighbors per node, pooled over the four chemical–gene
/// relations, with replacement.
pub fn sample_neighbors(
    graph: &HeteroGraph,
    size: usize,
    rng: &mut impl Rng,
) -> NeighborSamples {
    let chem = (0..graph.n_chem())
        .map(|c| {
            let pool: Vec<u32> = RelationType::ALL
                .iter()
                .flat_map(|&r| graph.gene_neighbors(r, NodeId(c as u32)).iter().copied())
                .collect();
            if pool.is_empty() {
                Vec::new()
            } else {
                (0..size).map(|_| pool[rng.random_range(0..pool.len())]).collect()
            }
        })
        .collect();
    let gene = (0..graph.n_gene())
        .map(|g| {
            let pool: Vec<u32> = RelationType::ALL
                .iter()
                .flat_map(|&r| graph.chem_neighbors(r, NodeId(g as u32)).iter().copied())
                .collect();
            if pool.is_empty() {
                Vec::new()
            } else {
                (0..size).map(|_| pool[rng.random_range(0..pool.len())]).collect()
            }
        })
        .collect();
    NeighborSamples { chem, gene }
}

enum BoundInner {
    Rgcntd {
        refined: KindPair<Var>,
        dec: DecoderWeightVars,
    },
    DistMult {
        z: KindPair<Var>,
        rel_vecs: Var,
    },
    TransE {
        chem: Var,
        gene: Var,
        rel_vecs: Var,
        gamma: f64,
    },
}

/// A model bound onto one tape: embeddings computed, parameters registered.
pub struct BoundModel {
    inner: BoundInner,
    param_vars: Vec<Var>,
}

impl BoundModel {
    /// Tape handles of every parameter, in bag order.
    pub fn param_vars(&self) -> &[Var] {
        &self.param_vars
    }

    /// Raw scores for a batch of triplets.
    pub fn logits(&self, tape: &mut Tape, triplets: &[Triplet]) -> Result<Var, TensorError> {
        let heads: Rc<Vec<usize>> = Rc::new(triplets.iter().map(|t| t.head.idx()).collect());
        let tails: Rc<Vec<usize>> = Rc::new(triplets.iter().map(|t| t.tail.idx()).collect());
        let rels: Rc<Vec<usize>> = Rc::new(triplets.iter().map(|t| t.relation.index()).collect());
        match &self.inner {
            BoundInner::Rgcntd { refined, dec } => {
                score_batch_logits(tape, *refined, dec, triplets)
            }
            BoundInner::DistMult { z, rel_vecs } => {
                let h = tape.gather_rows(z.chem, heads)?;
                let t = tape.gather_rows(z.gene, tails)?;
                let w = tape.gather_rows(*rel_vecs, rels)?;
                let pair = tape.hadamard(h, t)?;
                let mixed = tape.hadamard(pair, w)?;
                tape.row_sum(mixed)
            }
            BoundInner::TransE {
                chem,
                gene,
                rel_vecs,
                gamma,
            } => {
                let h = tape.gather_rows(*chem, heads)?;
                let t = tape.gather_rows(*gene, tails)?;
                let w = tape.gather_rows(*rel_vecs, rels)?;
                let shifted = tape.add(h, w)?;
                let diff = tape.sub(shifted, t)?;
                let sq = tape.square(diff)?;
                let dist_sq = tape.row_sum(sq)?;
                let dist = tape.sqrt(dist_sq)?;
                let neg = tape.scale(dist, -1.0)?;
                tape.add_const(neg, *gamma)
            }
        }
    }

    /// Probabilities clamped strictly inside (0, 1).
    pub fn probabilities(
        &self,
        tape: &mut Tape,
        triplets: &[Triplet],
    ) -> Result<Vec<f64>, TensorError> {
        let logits = self.logits(tape, triplets)?;
        Ok(tape
            .value(logits)
            .data()
            .iter()
            .map(|&z| sigmoid(z).clamp(SCORE_EPS, 1.0 - SCORE_EPS))
            .collect())
    }
}

impl Model {
    /// Initialize parameters (Glorot-style, seeded by `rng`) for `hyper`.
    pub fn new(graph: &HeteroGraph, hyper: &ModelHyper, rng: &mut impl Rng) -> Result<Self, TensorError> {
        if hyper.hidden_dims.is_empty() {
            return Err(TensorError::Invalid {
                op: "model",
                msg: "hidden_dimensions must not be empty".into(),
            });
        }
        let mut bag = ParamBag::new();
        let (n_chem, n_gene) = (graph.n_chem(), graph.n_gene());
        let emb_dim = *hyper.hidden_dims.last().unwrap();

        let layout = match hyper.kind {
            ModelKind::Rgcntd => {
                let mut hetero = Vec::new();
                let mut din_chem = n_chem;
                let mut din_gene = n_gene;
                for (k, &d) in hyper.hidden_dims.iter().enumerate() {
                    let layer: [(ParamId, ParamId); 4] = std::array::from_fn(|r| {
                        let rel = RelationType::from_index(r).unwrap();
                        if k == 0 {
                            (
                                bag.add(
                                    format!("encoder.l0.{rel}.from_chem"),
                                    Tensor::glorot(din_chem, d, rng),
                                ),
                                bag.add(
                                    format!("encoder.l0.{rel}.from_gene"),
                                    Tensor::glorot(din_gene, d, rng),
                                ),
                            )
                        } else {
                            let w = bag.add(
                                format!("encoder.l{k}.{rel}.w"),
                                Tensor::glorot(din_chem, d, rng),
                            );
                            (w, w)
                        }
                    });
                    hetero.push(layer);
                    din_chem = d;
                    din_gene = d;
                }

                let mut branch = |tag: &str, n0: usize, bag: &mut ParamBag| -> Vec<ParamId> {
                    let mut din = n0;
                    hyper
                        .hidden_dims
                        .iter()
                        .enumerate()
                        .map(|(k, &d)| {
                            let id = bag.add(
                                format!("encoder.{tag}.l{k}"),
                                Tensor::glorot(din, d, rng),
                            );
                            din = d;
                            id
                        })
                        .collect()
                };
                let chem_branch = hyper
                    .toggles
                    .chem
                    .then(|| branch("chem_branch", n_chem, &mut bag));
                let gene_branch = hyper
                    .toggles
                    .gene
                    .then(|| branch("gene_branch", n_gene, &mut bag));

                // embedding width after concatenation
                let mut d = emb_dim;
                if hyper.toggles.chem {
                    d += emb_dim;
                }
                if hyper.toggles.gene {
                    d += emb_dim;
                }
                let k = hyper.n_bases;
                Layout::Rgcntd {
                    hetero,
                    chem_branch,
                    gene_branch,
                    dec_bases: bag.add("decoder.bases", Tensor::glorot(hyper.n_bases, d * d, rng)),
                    dec_coeffs: bag.add("decoder.rel_coeffs", Tensor::glorot(4, hyper.n_bases, rng)),
                    dec_factors: bag.add("decoder.factors", Tensor::glorot(k, d, rng)),
                    dec_mixing: bag.add("decoder.mixing", Tensor::glorot(4, k, rng)),
                }
            }
            ModelKind::Rgcn => Layout::Rgcn {
                chem_emb: bag.add("rgcn.chem_emb", Tensor::glorot(n_chem, emb_dim, rng)),
                gene_emb: bag.add("rgcn.gene_emb", Tensor::glorot(n_gene, emb_dim, rng)),
                bases: bag.add(
                    "rgcn.bases",
                    Tensor::glorot(hyper.n_bases, emb_dim * emb_dim, rng),
                ),
                coeffs: bag.add("rgcn.rel_coeffs", Tensor::glorot(4, hyper.n_bases, rng)),
                rel_vecs: bag.add("rgcn.rel_vecs", Tensor::glorot(4, emb_dim, rng)),
            },
            ModelKind::GraphSage => Layout::Sage {
                chem_emb: bag.add("sage.chem_emb", Tensor::glorot(n_chem, emb_dim, rng)),
                gene_emb: bag.add("sage.gene_emb", Tensor::glorot(n_gene, emb_dim, rng)),
                w_agg: bag.add("sage.w_agg", Tensor::glorot(2 * emb_dim, emb_dim, rng)),
                rel_vecs: bag.add("sage.rel_vecs", Tensor::glorot(4, emb_dim, rng)),
            },
            ModelKind::TransE => Layout::TransE {
                chem_emb: bag.add("transe.chem_emb", Tensor::glorot(n_chem, emb_dim, rng)),
                gene_emb: bag.add("transe.gene_emb", Tensor::glorot(n_gene, emb_dim, rng)),
                rel_vecs: bag.add("transe.rel_vecs", Tensor::glorot(4, emb_dim, rng)),
            },
        };

        Ok(Model {
            hyper: hyper.clone(),
            bag,
            layout,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.hyper.kind
    }

    pub fn bag(&self) -> &ParamBag {
        &self.bag
    }

    pub fn bag_mut(&mut self) -> &mut ParamBag {
        &mut self.bag
    }

    /// Replace all parameters (shapes must match; used by checkpoint load
    /// and best-snapshot restore).
    pub fn restore(&mut self, tensors: &[Tensor]) -> Result<(), TensorError> {
        if tensors.len() != self.bag.len() {
            return Err(TensorError::Invalid {
                op: "restore",
                msg: format!(
                    "{} tensors provided, model has {}",
                    tensors.len(),
                    self.bag.len()
                ),
            });
        }
        for (slot, t) in self.bag.tensors_mut().iter_mut().zip(tensors) {
            if slot.shape() != t.shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "restore",
                    lhs: slot.shape().to_vec(),
                    rhs: t.shape().to_vec(),
                });
            }
            *slot = t.clone();
        }
        Ok(())
    }

    /// Register parameters on `tape` and run the embedding forward pass.
    ///
    /// GraphSAGE requires `samples`; the other models ignore it.
    pub fn bind(
        &self,
        tape: &mut Tape,
        graph: &HeteroGraph,
        samples: Option<&NeighborSamples>,
    ) -> Result<BoundModel, TensorError> {
        let param_vars: Vec<Var> = self
            .bag
            .tensors()
            .iter()
            .map(|t| tape.parameter(t.clone()))
            .collect();
        self.bind_with_vars(tape, param_vars, graph, samples)
    }

    /// Like [`Model::bind`] but over caller-registered parameter handles (in
    /// bag order), which lets gradient checkers own the registration.
    pub fn bind_with_vars(
        &self,
        tape: &mut Tape,
        param_vars: Vec<Var>,
        graph: &HeteroGraph,
        samples: Option<&NeighborSamples>,
    ) -> Result<BoundModel, TensorError> {
        assert_eq!(param_vars.len(), self.bag.len());
        let v = |id: ParamId| param_vars[id.0];
        let act = self.hyper.hidden_activation;

        let inner = match &self.layout {
            Layout::Rgcntd {
                hetero,
                chem_branch,
                gene_branch,
                dec_bases,
                dec_coeffs,
                dec_factors,
                dec_mixing,
            } => {
                let weights = EncoderWeightVars {
                    hetero: hetero
                        .iter()
                        .map(|layer| {
                            std::array::from_fn(|r| RelWeights {
                                from_chem: v(layer[r].0),
                                from_gene: v(layer[r].1),
                            })
                        })
                        .collect(),
                    chem_branch: chem_branch
                        .as_ref()
                        .map(|ids| ids.iter().map(|&id| v(id)).collect()),
                    gene_branch: gene_branch
                        .as_ref()
                        .map(|ids| ids.iter().map(|&id| v(id)).collect()),
                };
                let emb = encode(tape, graph, &weights, self.hyper.toggles, act)?;
                let dec = DecoderWeightVars {
                    bases_flat: v(*dec_bases),
                    rel_coeffs: v(*dec_coeffs),
                    factors: v(*dec_factors),
                    mixing: v(*dec_mixing),
                };
                let refined = rgcn_refine(tape, graph, emb, dec.bases_flat, dec.rel_coeffs, act)?;
                BoundInner::Rgcntd { refined, dec }
            }
            Layout::Rgcn {
                chem_emb,
                gene_emb,
                bases,
                coeffs,
                rel_vecs,
            } => {
                let emb = KindPair {
                    chem: v(*chem_emb),
                    gene: v(*gene_emb),
                };
                let z = rgcn_refine(tape, graph, emb, v(*bases), v(*coeffs), act)?;
                BoundInner::DistMult {
                    z,
                    rel_vecs: v(*rel_vecs),
                }
            }
            Layout::Sage {
                chem_emb,
                gene_emb,
                w_agg,
                rel_vecs,
            } => {
                let samples = samples.ok_or_else(|| TensorError::Invalid {
                    op: "bind",
                    msg: "graphsage requires neighbor samples".into(),
                })?;
                let z_chem = sage_forward(
                    tape,
                    v(*chem_emb),
                    v(*gene_emb),
                    &samples.chem,
                    v(*w_agg),
                    act,
                )?;
                let z_gene = sage_forward(
                    tape,
                    v(*gene_emb),
                    v(*chem_emb),
                    &samples.gene,
                    v(*w_agg),
                    act,
                )?;
                BoundInner::DistMult {
                    z: KindPair {
                        chem: z_chem,
                        gene: z_gene,
                    },
                    rel_vecs: v(*rel_vecs),
                }
            }
            Layout::TransE {
                chem_emb,
                gene_emb,
                rel_vecs,
            } => BoundInner::TransE {
                chem: v(*chem_emb),
                gene: v(*gene_emb),
                rel_vecs: v(*rel_vecs),
                gamma: self.hyper.transe_gamma,
            },
        };

        Ok(BoundModel { inner, param_vars })
    }

    /// Forward-only scoring on a scratch tape.
    pub fn score_probs(
        &self,
        graph: &HeteroGraph,
        triplets: &[Triplet],
        samples: Option<&NeighborSamples>,
    ) -> Result<Vec<f64>, TensorError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape, graph, samples)?;
        bound.probabilities(&mut tape, triplets)
    }
}

/// GraphSAGE step: z_i = act(W · [e_i ‖ mean of sampled neighbor embeddings]).
///
/// The mean over an empty sample is the zero vector.
fn sage_forward(
    tape: &mut Tape,
    self_emb: Var,
    other_emb: Var,
    samples: &[Vec<u32>],
    w_agg: Var,
    act: Activation,
) -> Result<Var, TensorError> {
    let n = tape.value(self_emb).rows();
    let d = tape.value(self_emb).cols();
    if samples.len() != n {
        return Err(TensorError::Invalid {
            op: "sage_forward",
            msg: format!("{} sample lists for {} nodes", samples.len(), n),
        });
    }
    let mut src = Vec::new();
    let mut dst = Vec::new();
    let mut coeff = Vec::new();
    for (i, list) in samples.iter().enumerate() {
        for &j in list {
            src.push(j as usize);
            dst.push(i);
            coeff.push(1.0 / list.len() as f64);
        }
    }
    let mean = if src.is_empty() {
        tape.constant(Tensor::zeros(&[n, d]))
    } else {
        let picked = tape.gather_rows(other_emb, Rc::new(src))?;
        let scaled = tape.mul_rows_const(picked, Rc::new(coeff))?;
        tape.scatter_add_rows(scaled, Rc::new(dst), n)?
    };
    let cat = tape.concat_cols(self_emb, mean)?;
    let z = tape.matmul(cat, w_agg)?;
    act.apply(tape, z)
}
