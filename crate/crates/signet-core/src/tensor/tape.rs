//! The gradient tape: operation recording and reverse sweep.

use std::rc::Rc;

use super::{sigmoid, Tensor, TensorError};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Elementwise nonlinearity selector shared by the graph layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, tape: &mut Tape, x: Var) -> Result<Var, TensorError> {
        match self {
            Activation::Identity => Ok(x),
            Activation::Relu => tape.relu(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Sigmoid => tape.sigmoid(x),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(format!("unknown activation `{other}`")),
        }
    }
}

enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    /// Matrix [m,n] times a vector [n] broadcast along rows.
    HadamardBcastRow(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    /// Each row i of the input scaled by a fixed coefficient c[i].
    MulRowsConst(Var, Rc<Vec<f64>>),
    Matmul(Var, Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Square(Var),
    Sqrt(Var),
    GatherRows(Var, Rc<Vec<usize>>),
    ScatterAddRows {
        src: Var,
        idx: Rc<Vec<usize>>,
    },
    ConcatCols(Var, Var),
    RowSum(Var),
    Sum(Var),
    Mean(Var),
    Reshape(Var),
    BceWithLogits {
        logits: Var,
        labels: Rc<Vec<f64>>,
    },
    BceFromProbs {
        probs: Var,
        labels: Rc<Vec<f64>>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    param: bool,
}

/// Records a forward computation and differentiates it in reverse.
///
/// Nodes are appended in topological order, so the backward pass is a single
/// reverse sweep. Gradients of non-parameter nodes are dropped as soon as
/// they have been propagated; parameter gradients stay queryable until the
/// next `backward` call.
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

const PROB_EPS: f64 = 1e-12;

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    pub fn parameter(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` root with respect to `v`.
    ///
    /// Present only for parameters (and the root); other gradients are
    /// released during the sweep.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        self.grads[v.0].as_ref().map(|g| Tensor {
            shape: self.nodes[v.0].value.shape().to_vec(),
            data: g.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, param: bool) -> Var {
        self.nodes.push(Node { value, op, param });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn emit(&mut self, op_name: &'static str, value: Tensor, op: Op) -> Result<Var, TensorError> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: op_name });
        }
        Ok(self.push(value, op, false))
    }

    fn shape_err(
        op: &'static str,
        a: &Tensor,
        b: &Tensor,
    ) -> TensorError {
        TensorError::ShapeMismatch {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if ta.shape() != tb.shape() {
            return Err(Self::shape_err("add", ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
        let out = Tensor {
            shape: ta.shape().to_vec(),
            data,
        };
        self.emit("add", out, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if ta.shape() != tb.shape() {
            return Err(Self::shape_err("sub", ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x - y).collect();
        let out = Tensor {
            shape: ta.shape().to_vec(),
            data,
        };
        self.emit("sub", out, Op::Sub(a, b))
    }

    /// Elementwise product; `b` may also be a vector broadcast along the last axis.
    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if ta.shape() == tb.shape() {
            let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
            let out = Tensor {
                shape: ta.shape().to_vec(),
                data,
            };
            return self.emit("hadamard", out, Op::Hadamard(a, b));
        }
        // Broadcast: a is [m, n], b is [n].
        if ta.shape().len() == 2 && tb.shape().len() == 1 && ta.cols() == tb.len() {
            let (m, n) = (ta.rows(), ta.cols());
            let mut data = Vec::with_capacity(m * n);
            for r in 0..m {
                for c in 0..n {
                    data.push(ta.data()[r * n + c] * tb.data()[c]);
                }
            }
            let out = Tensor {
                shape: vec![m, n],
                data,
            };
            return self.emit("hadamard", out, Op::HadamardBcastRow(a, b));
        }
        Err(Self::shape_err("hadamard", ta, tb))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var, TensorError> {
        let ta = &self.nodes[a.0].value;
        let out = Tensor {
            shape: ta.shape().to_vec(),
            data: ta.data().iter().map(|x| x * c).collect(),
        };
        self.emit("scale", out, Op::Scale(a, c))
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Result<Var, TensorError> {
        let ta = &self.nodes[a.0].value;
        let out = Tensor {
            shape: ta.shape().to_vec(),
            data: ta.data().iter().map(|x| x + c).collect(),
        };
        self.emit("add_const", out, Op::AddConst(a))
    }

    /// Scale each row of `a` by the fixed (non-differentiated) coefficient `coeffs[row]`.
    pub fn mul_rows_const(&mut self, a: Var, coeffs: Rc<Vec<f64>>) -> Result<Var, TensorError> {
        let ta = &self.nodes[a.0].value;
        if ta.rows() != coeffs.len() {
            return Err(TensorError::Invalid {
                op: "mul_rows_const",
                msg: format!("{} rows vs {} coefficients", ta.rows(), coeffs.len()),
            });
        }
        let n = ta.cols();
        let mut data = Vec::with_capacity(ta.len());
        for (r, &c) in coeffs.iter().enumerate() {
            for v in &ta.data()[r * n..(r + 1) * n] {
                data.push(v * c);
            }
        }
        let out = Tensor {
            shape: ta.shape().to_vec(),
            data,
        };
        self.emit("mul_rows_const", out, Op::MulRowsConst(a, coeffs))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.cols() != tb.rows() {
            return Err(Self::shape_err("matmul", ta, tb));
        }
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        let out = matmul_raw(ta.data(), tb.data(), m, k, n);
        let out = Tensor {
            shape: vec![m, n],
            data: out,
        };
        self.emit("matmul", out, Op::Matmul(a, b))
    }

    pub fn relu(&mut self, a: Var) -> Result<Var, TensorError> {
        let ta = &self.nodes[a.0].value;
        let out = Tensor {
            shape: ta.shape().to_vec(),
            data: ta.data().iter().map(|&x| x.max(0.0)).collect(),
        };
        self.emit("relu", out, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, TensorError> {
        let ta = &self.nodes[a.0].value;
        let out = Tensor {
            shape: ta.shape().to_vec(),
            data: ta.data().iter().map(|x| x.tanh()).collect(),
        };
        self.emit("tanh", out, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, TensorError> {
        let ta = &self.nodes[a.0].value;
        let out = Tensor {
            shape: ta.shape().to_vec(),
            data: ta.data().iter().map(|&x| sigmoid(x)).collect(),
        };
        self.emit("sigmoid", out, Op::Sigmoid(a))
    }

    pub fn square(&mut self, a: Var) -> Result<Var, TensorError> {
        let ta = &self.nodes[a.0].value;
        let out = Tensor {
            shape: ta.shape().to_vec(),
            data: ta.data().iter().map(|x| x * x).collect(),
        };
        self.emit("square", out, Op::Square(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var, TensorError> {
        let ta = &self.nodes[a.0].value;
        let out = Tensor {
            shape: ta.shape().to_vec(),
            data: ta.data().iter().map(|x| x.sqrt()).collect(),
        };
        self.emit("sqrt", out, Op::Sqrt(a))
    }

    /// Select rows of a 2-D tensor by index, in order, with repetition allowed.
    pub fn gather_rows(&mut self, a: Var, idx: Rc<Vec<usize>>) -> Result<Var, TensorError> {
        let ta = &self.nodes[a.0].value;
        if ta.shape().len() != 2 {
            return Err(TensorError::Invalid {
                op: "gather_rows",
                msg: format!("expected 2-D input, got {:?}", ta.shape()),
            });
        }
        let n = ta.cols();
        let mut data = Vec::with_capacity(idx.len() * n);
        for &i in idx.iter() {
            if i >= ta.rows() {
                return Err(TensorError::Invalid {
                    op: "gather_rows",
                    msg: format!("row {} out of range ({} rows)", i, ta.rows()),
                });
            }
            data.extend_from_slice(&ta.data()[i * n..(i + 1) * n]);
        }
        let out = Tensor {
            shape: vec![idx.len(), n],
            data,
        };
        self.emit("gather_rows", out, Op::GatherRows(a, idx))
    }

    /// Accumulate row e of `src` into row `idx[e]` of a fresh `[rows, n]` output.
    pub fn scatter_add_rows(
        &mut self,
        src: Var,
        idx: Rc<Vec<usize>>,
        rows: usize,
    ) -> Result<Var, TensorError> {
        let ts = &self.nodes[src.0].value;
        if ts.rows() != idx.len() {
            return Err(TensorError::Invalid {
                op: "scatter_add_rows",
                msg: format!("{} source rows vs {} indices", ts.rows(), idx.len()),
            });
        }
        let n = ts.cols();
        let mut data = vec![0.0; rows * n];
        for (e, &i) in idx.iter().enumerate() {
            if i >= rows {
                return Err(TensorError::Invalid {
                    op: "scatter_add_rows",
                    msg: format!("target row {} out of range ({} rows)", i, rows),
                });
            }
            for c in 0..n {
                data[i * n + c] += ts.data()[e * n + c];
            }
        }
        let out = Tensor {
            shape: vec![rows, n],
            data,
        };
        self.emit("scatter_add_rows", out, Op::ScatterAddRows { src, idx })
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.rows() != tb.rows() {
            return Err(Self::shape_err("concat_cols", ta, tb));
        }
        let (m, p, q) = (ta.rows(), ta.cols(), tb.cols());
        let mut data = Vec::with_capacity(m * (p + q));
        for r in 0..m {
            data.extend_from_slice(&ta.data()[r * p..(r + 1) * p]);
            data.extend_from_slice(&tb.data()[r * q..(r + 1) * q]);
        }
        let out = Tensor {
            shape: vec![m, p + q],
            data,
        };
        self.emit("concat_cols", out, Op::ConcatCols(a, b))
    }

    /// Sum along the last axis of a 2-D tensor, producing a vector.
    pub fn row_sum(&mut self, a: Var) -> Result<Var, TensorError> {
        let ta = &self.nodes[a.0].value;
        if ta.shape().len() != 2 {
            return Err(TensorError::Invalid {
                op: "row_sum",
                msg: format!("expected 2-D input, got {:?}", ta.shape()),
            });
        }
        let n = ta.cols();
        let data = (0..ta.rows())
            .map(|r| ta.data()[r * n..(r + 1) * n].iter().sum())
            .collect();
        let out = Tensor {
            shape: vec![ta.rows()],
            data,
        };
        self.emit("row_sum", out, Op::RowSum(a))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, TensorError> {
        let total: f64 = self.nodes[a.0].value.data().iter().sum();
        self.emit("sum", Tensor::scalar(total), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var, TensorError> {
        let ta = &self.nodes[a.0].value;
        if ta.is_empty() {
            return Err(TensorError::Invalid {
                op: "mean",
                msg: "empty tensor".into(),
            });
        }
        let m = ta.data().iter().sum::<f64>() / ta.len() as f64;
        self.emit("mean", Tensor::scalar(m), Op::Mean(a))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, TensorError> {
        let ta = &self.nodes[a.0].value;
        let want: usize = shape.iter().product();
        if want != ta.len() {
            return Err(TensorError::Invalid {
                op: "reshape",
                msg: format!("cannot view {:?} as {:?}", ta.shape(), shape),
            });
        }
        let out = Tensor {
            shape: shape.to_vec(),
            data: ta.data().to_vec(),
        };
        self.emit("reshape", out, Op::Reshape(a))
    }

    /// Mean binary cross-entropy over raw logits (the numerically stable path).
    pub fn bce_with_logits(&mut self, logits: Var, labels: Rc<Vec<f64>>) -> Result<Var, TensorError> {
        let tl = &self.nodes[logits.0].value;
        if tl.is_empty() {
            return Err(TensorError::Invalid {
                op: "bce_with_logits",
                msg: "empty batch".into(),
            });
        }
        if tl.len() != labels.len() {
            return Err(TensorError::Invalid {
                op: "bce_with_logits",
                msg: format!("{} logits vs {} labels", tl.len(), labels.len()),
            });
        }
        let mut total = 0.0;
        for (&z, &y) in tl.data().iter().zip(labels.iter()) {
            total += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        }
        let loss = total / labels.len() as f64;
        self.emit(
            "bce_with_logits",
            Tensor::scalar(loss),
            Op::BceWithLogits { logits, labels },
        )
    }

    /// Mean binary cross-entropy over probabilities, clamped away from {0, 1}.
    pub fn bce_from_probs(&mut self, probs: Var, labels: Rc<Vec<f64>>) -> Result<Var, TensorError> {
        let tp = &self.nodes[probs.0].value;
        if tp.is_empty() {
            return Err(TensorError::Invalid {
                op: "bce_from_probs",
                msg: "empty batch".into(),
            });
        }
        if tp.len() != labels.len() {
            return Err(TensorError::Invalid {
                op: "bce_from_probs",
                msg: format!("{} probabilities vs {} labels", tp.len(), labels.len()),
            });
        }
        let mut total = 0.0;
        for (&p, &y) in tp.data().iter().zip(labels.iter()) {
            let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
            total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        }
        let loss = total / labels.len() as f64;
        self.emit(
            "bce_from_probs",
            Tensor::scalar(loss),
            Op::BceFromProbs { probs, labels },
        )
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&mut self, root: Var) -> Result<(), TensorError> {
        if self.nodes[root.0].value.len() != 1 {
            return Err(TensorError::Invalid {
                op: "backward",
                msg: format!(
                    "root must be scalar, got shape {:?}",
                    self.nodes[root.0].value.shape()
                ),
            });
        }
        for g in &mut self.grads {
            *g = None;
        }
        self.grads[root.0] = Some(vec![1.0]);

        for i in (0..self.nodes.len()).rev() {
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            self.propagate(i, &g);
            if self.nodes[i].param || i == root.0 {
                self.grads[i] = Some(g);
            }
        }
        Ok(())
    }

    fn accumulate(&mut self, target: usize, f: impl FnOnce(&mut [f64])) {
        let len = self.nodes[target].value.len();
        let slot = self.grads[target].get_or_insert_with(|| vec![0.0; len]);
        f(slot);
    }

    fn propagate(&mut self, i: usize, g: &[f64]) {
        match &self.nodes[i].op {
            Op::Leaf => {}
            &Op::Add(a, b) => {
                self.accumulate(a.0, |ga| {
                    for (x, y) in ga.iter_mut().zip(g) {
                        *x += y;
                    }
                });
                self.accumulate(b.0, |gb| {
                    for (x, y) in gb.iter_mut().zip(g) {
                        *x += y;
                    }
                });
            }
            &Op::Sub(a, b) => {
                self.accumulate(a.0, |ga| {
                    for (x, y) in ga.iter_mut().zip(g) {
                        *x += y;
                    }
                });
                self.accumulate(b.0, |gb| {
                    for (x, y) in gb.iter_mut().zip(g) {
                        *x -= y;
                    }
                });
            }
            &Op::Hadamard(a, b) => {
                let av: Vec<f64> = self.nodes[a.0].value.data().to_vec();
                let bv: Vec<f64> = self.nodes[b.0].value.data().to_vec();
                self.accumulate(a.0, |ga| {
                    for ((x, y), w) in ga.iter_mut().zip(g).zip(&bv) {
                        *x += y * w;
                    }
                });
                self.accumulate(b.0, |gb| {
                    for ((x, y), w) in gb.iter_mut().zip(g).zip(&av) {
                        *x += y * w;
                    }
                });
            }
            &Op::HadamardBcastRow(a, b) => {
                let av: Vec<f64> = self.nodes[a.0].value.data().to_vec();
                let bv: Vec<f64> = self.nodes[b.0].value.data().to_vec();
                let n = bv.len();
                self.accumulate(a.0, |ga| {
                    for (k, (x, y)) in ga.iter_mut().zip(g).enumerate() {
                        *x += y * bv[k % n];
                    }
                });
                self.accumulate(b.0, |gb| {
                    for (k, y) in g.iter().enumerate() {
                        gb[k % n] += y * av[k];
                    }
                });
            }
            &Op::Scale(a, c) => {
                self.accumulate(a.0, |ga| {
                    for (x, y) in ga.iter_mut().zip(g) {
                        *x += y * c;
                    }
                });
            }
            &Op::AddConst(a) => {
                self.accumulate(a.0, |ga| {
                    for (x, y) in ga.iter_mut().zip(g) {
                        *x += y;
                    }
                });
            }
            Op::MulRowsConst(a, coeffs) => {
                let a = *a;
                let coeffs = Rc::clone(coeffs);
                let n = self.nodes[a.0].value.cols();
                self.accumulate(a.0, |ga| {
                    for (r, &c) in coeffs.iter().enumerate() {
                        for k in 0..n {
                            ga[r * n + k] += g[r * n + k] * c;
                        }
                    }
                });
            }
            &Op::Matmul(a, b) => {
                // dA = dC · Bᵀ; dB = Aᵀ · dC
                let (m, k) = (self.nodes[a.0].value.rows(), self.nodes[a.0].value.cols());
                let n = self.nodes[b.0].value.cols();
                let av: Vec<f64> = self.nodes[a.0].value.data().to_vec();
                let bv: Vec<f64> = self.nodes[b.0].value.data().to_vec();
                self.accumulate(a.0, |ga| {
                    for i in 0..m {
                        for j in 0..n {
                            let gij = g[i * n + j];
                            if gij == 0.0 {
                                continue;
                            }
                            for p in 0..k {
                                ga[i * k + p] += gij * bv[p * n + j];
                            }
                        }
                    }
                });
                self.accumulate(b.0, |gb| {
                    for i in 0..m {
                        for p in 0..k {
                            let aip = av[i * k + p];
                            if aip == 0.0 {
                                continue;
                            }
                            for j in 0..n {
                                gb[p * n + j] += aip * g[i * n + j];
                            }
                        }
                    }
                });
            }
            &Op::Relu(a) => {
                let av: Vec<f64> = self.nodes[a.0].value.data().to_vec();
                self.accumulate(a.0, |ga| {
                    for ((x, y), v) in ga.iter_mut().zip(g).zip(&av) {
                        if *v > 0.0 {
                            *x += y;
                        }
                    }
                });
            }
            &Op::Tanh(a) => {
                let out: Vec<f64> = self.nodes[i].value.data().to_vec();
                self.accumulate(a.0, |ga| {
                    for ((x, y), t) in ga.iter_mut().zip(g).zip(&out) {
                        *x += y * (1.0 - t * t);
                    }
                });
            }
            &Op::Sigmoid(a) => {
                let out: Vec<f64> = self.nodes[i].value.data().to_vec();
                self.accumulate(a.0, |ga| {
                    for ((x, y), s) in ga.iter_mut().zip(g).zip(&out) {
                        *x += y * s * (1.0 - s);
                    }
                });
            }
            &Op::Square(a) => {
                let av: Vec<f64> = self.nodes[a.0].value.data().to_vec();
                self.accumulate(a.0, |ga| {
                    for ((x, y), v) in ga.iter_mut().zip(g).zip(&av) {
                        *x += y * 2.0 * v;
                    }
                });
            }
            &Op::Sqrt(a) => {
                let out: Vec<f64> = self.nodes[i].value.data().to_vec();
                self.accumulate(a.0, |ga| {
                    for ((x, y), s) in ga.iter_mut().zip(g).zip(&out) {
                        *x += y / (2.0 * s);
                    }
                });
            }
            Op::GatherRows(a, idx) => {
                let a = *a;
                let idx = Rc::clone(idx);
                let n = self.nodes[a.0].value.cols();
                self.accumulate(a.0, |ga| {
                    for (e, &row) in idx.iter().enumerate() {
                        for c in 0..n {
                            ga[row * n + c] += g[e * n + c];
                        }
                    }
                });
            }
            Op::ScatterAddRows { src, idx } => {
                let src = *src;
                let idx = Rc::clone(idx);
                let n = self.nodes[src.0].value.cols();
                self.accumulate(src.0, |gs| {
                    for (e, &row) in idx.iter().enumerate() {
                        for c in 0..n {
                            gs[e * n + c] += g[row * n + c];
                        }
                    }
                });
            }
            &Op::ConcatCols(a, b) => {
                let (m, p) = (self.nodes[a.0].value.rows(), self.nodes[a.0].value.cols());
                let q = self.nodes[b.0].value.cols();
                self.accumulate(a.0, |ga| {
                    for r in 0..m {
                        for c in 0..p {
                            ga[r * p + c] += g[r * (p + q) + c];
                        }
                    }
                });
                self.accumulate(b.0, |gb| {
                    for r in 0..m {
                        for c in 0..q {
                            gb[r * q + c] += g[r * (p + q) + p + c];
                        }
                    }
                });
            }
            &Op::RowSum(a) => {
                let n = self.nodes[a.0].value.cols();
                self.accumulate(a.0, |ga| {
                    for (k, x) in ga.iter_mut().enumerate() {
                        *x += g[k / n];
                    }
                });
            }
            &Op::Sum(a) => {
                self.accumulate(a.0, |ga| {
                    for x in ga.iter_mut() {
                        *x += g[0];
                    }
                });
            }
            &Op::Mean(a) => {
                let n = self.nodes[a.0].value.len() as f64;
                self.accumulate(a.0, |ga| {
                    for x in ga.iter_mut() {
                        *x += g[0] / n;
                    }
                });
            }
            &Op::Reshape(a) => {
                self.accumulate(a.0, |ga| {
                    for (x, y) in ga.iter_mut().zip(g) {
                        *x += y;
                    }
                });
            }
            Op::BceWithLogits { logits, labels } => {
                let logits = *logits;
                let labels = Rc::clone(labels);
                let zv: Vec<f64> = self.nodes[logits.0].value.data().to_vec();
                let n = labels.len() as f64;
                self.accumulate(logits.0, |gl| {
                    for (k, (&z, &y)) in zv.iter().zip(labels.iter()).enumerate() {
                        gl[k] += g[0] * (sigmoid(z) - y) / n;
                    }
                });
            }
            Op::BceFromProbs { probs, labels } => {
                let probs = *probs;
                let labels = Rc::clone(labels);
                let pv: Vec<f64> = self.nodes[probs.0].value.data().to_vec();
                let n = labels.len() as f64;
                self.accumulate(probs.0, |gp| {
                    for (k, (&p, &y)) in pv.iter().zip(labels.iter()).enumerate() {
                        if p < PROB_EPS || p > 1.0 - PROB_EPS {
                            continue; // clamped region: flat
                        }
                        gp[k] += g[0] * (p - y) / (p * (1.0 - p)) / n;
                    }
                });
            }
        }
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity_and_hand_values() {
        let mut tape = Tape::new();
        let id = tape.constant(Tensor::identity(3));
        let x = tape.constant(Tensor::matrix(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let y = tape.matmul(id, x).unwrap();
        assert_eq!(tape.value(y).data(), tape.value(x).data());

        let a = tape.constant(Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let b = tape.constant(Tensor::matrix(2, 1, vec![1.0, 1.0]).unwrap());
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[3.0, 7.0]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[2, 3]));
        let err = tape.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
    }

    #[test]
    fn hadamard_identity_and_values() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::vector(vec![1.0, 2.0, 3.0]));
        let ones = tape.constant(Tensor::vector(vec![1.0, 1.0, 1.0]));
        let out = tape.hadamard(a, ones).unwrap();
        assert_eq!(tape.value(out).data(), &[1.0, 2.0, 3.0]);

        let b = tape.constant(Tensor::vector(vec![4.0, 5.0, 6.0]));
        let prod = tape.hadamard(a, b).unwrap();
        assert_eq!(tape.value(prod).data(), &[4.0, 10.0, 18.0]);
    }

    #[test]
    fn hadamard_broadcast_row_vector() {
        let mut tape = Tape::new();
        let a = tape.parameter(Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let v = tape.parameter(Tensor::vector(vec![2.0, 0.0, -1.0]));
        let out = tape.hadamard(a, v).unwrap();
        assert_eq!(tape.value(out).data(), &[2.0, 0.0, -3.0, 8.0, 0.0, -6.0]);
        let s = tape.sum(out).unwrap();
        tape.backward(s).unwrap();
        // d/dv_c = sum of column c of a
        assert_eq!(tape.grad(v).unwrap().data(), &[5.0, 7.0, 9.0]);
    }

    #[test]
    fn sigmoid_relu_basics() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![0.0, -3.0, 3.0, 40.0, -40.0]));
        let s = tape.sigmoid(x).unwrap();
        let r = tape.relu(x).unwrap();
        let sv = tape.value(s).data();
        assert_eq!(sv[0], 0.5);
        assert!((sv[3] - 1.0).abs() < 1e-15);
        assert!(sv[4].abs() < 1e-15);
        assert_eq!(tape.value(r).data(), &[0.0, 0.0, 3.0, 40.0, 0.0]);
    }

    #[test]
    fn bce_against_hand_values() {
        let mut tape = Tape::new();
        // p = 0.5 everywhere -> ln 2 regardless of labels.
        let p = tape.constant(Tensor::vector(vec![0.5, 0.5, 0.5, 0.5]));
        let labels = Rc::new(vec![0.0, 1.0, 1.0, 0.0]);
        let loss = tape.bce_from_probs(p, labels).unwrap();
        assert!((tape.value(loss).data()[0] - 2f64.ln()).abs() < 1e-12);

        // p = y exactly -> loss under 1e-10 with clamping.
        let exact = tape.constant(Tensor::vector(vec![0.0, 1.0]));
        let labels = Rc::new(vec![0.0, 1.0]);
        let loss = tape.bce_from_probs(exact, labels).unwrap();
        assert!(tape.value(loss).data()[0] < 1e-10);
    }

    #[test]
    fn bce_with_logits_matches_prob_form() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::vector(vec![0.3, -1.2, 2.0, 0.0]));
        let labels = Rc::new(vec![1.0, 0.0, 1.0, 0.0]);
        let fused = tape.bce_with_logits(z, Rc::clone(&labels)).unwrap();
        let p = tape.sigmoid(z).unwrap();
        let plain = tape.bce_from_probs(p, labels).unwrap();
        let diff = (tape.value(fused).data()[0] - tape.value(plain).data()[0]).abs();
        assert!(diff < 1e-12);
    }

    #[test]
    fn bce_empty_batch_is_error() {
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::vector(vec![]));
        assert!(tape.bce_with_logits(z, Rc::new(vec![])).is_err());
    }

    #[test]
    fn backward_releases_intermediate_grads() {
        let mut tape = Tape::new();
        let p = tape.parameter(Tensor::vector(vec![1.0, 2.0]));
        let sq = tape.square(p).unwrap();
        let s = tape.sum(sq).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(p).unwrap().data(), &[2.0, 4.0]);
        assert!(tape.grad(sq).is_none());
    }

    #[test]
    fn gather_scatter_roundtrip_gradients() {
        let mut tape = Tape::new();
        let table = tape.parameter(Tensor::matrix(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let idx = Rc::new(vec![2usize, 0, 2]);
        let picked = tape.gather_rows(table, Rc::clone(&idx)).unwrap();
        assert_eq!(tape.value(picked).data(), &[5.0, 6.0, 1.0, 2.0, 5.0, 6.0]);
        let spread = tape.scatter_add_rows(picked, Rc::new(vec![0, 1, 1]), 2).unwrap();
        assert_eq!(tape.value(spread).data(), &[5.0, 6.0, 6.0, 8.0]);
        let total = tape.sum(spread).unwrap();
        tape.backward(total).unwrap();
        // row 2 used twice, row 0 once, row 1 never
        assert_eq!(tape.grad(table).unwrap().data(), &[1.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
    }

    #[test]
    fn nonfinite_output_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![-1.0]));
        let r = tape.sqrt(x);
        assert!(matches!(r, Err(TensorError::NonFinite { .. })));
    }
}
