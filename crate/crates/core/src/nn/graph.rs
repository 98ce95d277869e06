use super::softmax::{log_softmax_masked, softmax};
use super::tensor::{dot, sigmoid};
use super::{Grads, ModelParams, NnError, ParamId};

/// The handful of vector operations the programmer is built from.
///
/// [`Eager`] evaluates them directly; [`Trace`] records them so the reverse
/// pass can run afterwards.
pub trait Graph {
    type V: Clone;

    fn params(&self) -> &ModelParams;
    fn constant(&mut self, v: Vec<f64>) -> Self::V;
    /// A whole parameter tensor, flattened.
    fn param(&mut self, id: ParamId) -> Self::V;
    fn row(&mut self, id: ParamId, r: usize) -> Self::V;
    fn matvec(&mut self, id: ParamId, x: &Self::V) -> Self::V;
    fn add(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn mul(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn one_minus(&mut self, a: &Self::V) -> Self::V;
    fn sigmoid(&mut self, a: &Self::V) -> Self::V;
    fn tanh(&mut self, a: &Self::V) -> Self::V;
    fn concat(&mut self, parts: &[Self::V]) -> Self::V;
    fn mean(&mut self, parts: &[Self::V]) -> Self::V;
    /// `[q · k_i]` for every key.
    fn dots(&mut self, q: &Self::V, keys: &[Self::V]) -> Self::V;
    fn softmax(&mut self, a: &Self::V) -> Self::V;
    /// `Σ_i w_i · items_i`.
    fn weighted_sum(&mut self, w: &Self::V, items: &[Self::V]) -> Self::V;
    fn value<'a>(&'a self, v: &'a Self::V) -> &'a [f64];
}

/// Direct evaluation on plain vectors.
pub struct Eager<'p> {
    params: &'p ModelParams,
}

impl<'p> Eager<'p> {
    pub fn new(params: &'p ModelParams) -> Self {
        Eager { params }
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect()
}

fn matvec_raw(w: &[f64], cols: usize, x: &[f64]) -> Vec<f64> {
    assert_eq!(cols, x.len(), "matvec shape mismatch");
    w.chunks_exact(cols).map(|row| dot(row, x)).collect()
}

fn weighted_sum_raw(w: &[f64], items: &[&[f64]]) -> Vec<f64> {
    let mut out = vec![0.0; items.first().map_or(0, |v| v.len())];
    for (wi, item) in w.iter().zip(items) {
        for (o, x) in out.iter_mut().zip(item.iter()) {
            *o += wi * x;
        }
    }
    out
}

fn mean_raw(parts: &[&[f64]]) -> Vec<f64> {
    let n = parts.len() as f64;
    let mut out = vec![0.0; parts[0].len()];
    for p in parts {
        for (o, x) in out.iter_mut().zip(p.iter()) {
            *o += x;
        }
    }
    out.iter_mut().for_each(|o| *o /= n);
    out
}

impl Graph for Eager<'_> {
    type V = Vec<f64>;

    fn params(&self) -> &ModelParams {
        self.params
    }
    fn constant(&mut self, v: Vec<f64>) -> Vec<f64> {
        v
    }
    fn param(&mut self, id: ParamId) -> Vec<f64> {
        self.params.get(id).data.clone()
    }
    fn row(&mut self, id: ParamId, r: usize) -> Vec<f64> {
        self.params.get(id).row(r).to_vec()
    }
    fn matvec(&mut self, id: ParamId, x: &Vec<f64>) -> Vec<f64> {
        let w = self.params.get(id);
        matvec_raw(&w.data, w.cols(), x)
    }
    fn add(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        zip_map(a, b, |x, y| x + y)
    }
    fn mul(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        zip_map(a, b, |x, y| x * y)
    }
    fn one_minus(&mut self, a: &Vec<f64>) -> Vec<f64> {
        a.iter().map(|x| 1.0 - x).collect()
    }
    fn sigmoid(&mut self, a: &Vec<f64>) -> Vec<f64> {
        a.iter().map(|x| sigmoid(*x)).collect()
    }
    fn tanh(&mut self, a: &Vec<f64>) -> Vec<f64> {
        a.iter().map(|x| x.tanh()).collect()
    }
    fn concat(&mut self, parts: &[Vec<f64>]) -> Vec<f64> {
        parts.concat()
    }
    fn mean(&mut self, parts: &[Vec<f64>]) -> Vec<f64> {
        mean_raw(&parts.iter().map(Vec::as_slice).collect::<Vec<_>>())
    }
    fn dots(&mut self, q: &Vec<f64>, keys: &[Vec<f64>]) -> Vec<f64> {
        keys.iter().map(|k| dot(q, k)).collect()
    }
    fn softmax(&mut self, a: &Vec<f64>) -> Vec<f64> {
        softmax(a)
    }
    fn weighted_sum(&mut self, w: &Vec<f64>, items: &[Vec<f64>]) -> Vec<f64> {
        weighted_sum_raw(w, &items.iter().map(Vec::as_slice).collect::<Vec<_>>())
    }
    fn value<'a>(&'a self, v: &'a Vec<f64>) -> &'a [f64] {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Const,
    Param(ParamId),
    Row(ParamId, usize),
    MatVec(ParamId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    OneMinus(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Concat(Vec<NodeId>),
    Mean(Vec<NodeId>),
    Dots(NodeId, Vec<NodeId>),
    Softmax(NodeId),
    WeightedSum(NodeId, Vec<NodeId>),
    /// Stores the masked probabilities for the reverse pass.
    LogProb {
        logits: NodeId,
        probs: Vec<f64>,
        target: usize,
    },
}

#[derive(Debug)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

/// Record of every forward operation of one question's encode/decode.
pub struct Trace<'p> {
    params: &'p ModelParams,
    nodes: Vec<Node>,
}

impl<'p> Trace<'p> {
    pub fn new(params: &'p ModelParams) -> Self {
        Trace { params, nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    fn val(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    /// Scalar node `log p(target)` under the masked softmax of `logits`.
    pub fn log_prob(&mut self, logits: NodeId, mask: &[bool], target: usize) -> Result<NodeId, NnError> {
        let lp = log_softmax_masked(self.val(logits), mask)?;
        if !mask.get(target).copied().unwrap_or(false) {
            return Err(NnError::Shape(format!("target {target} is masked out")));
        }
        let probs = lp.iter().map(|x| if x.is_finite() { x.exp() } else { 0.0 }).collect();
        Ok(self.push(vec![lp[target]], Op::LogProb { logits, probs, target }))
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.val(id)[0]
    }

    /// Reverse pass for the objective `Σ coef · node` over scalar nodes.
    pub fn backward(&self, objective: &[(NodeId, f64)]) -> Grads {
        let mut grads = self.params.zero_grads();
        let mut adj: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        fn acc(adj: &mut [Option<Vec<f64>>], id: NodeId, g: impl IntoIterator<Item = f64>, len: usize) {
            let slot = adj[id.0].get_or_insert_with(|| vec![0.0; len]);
            for (s, x) in slot.iter_mut().zip(g) {
                *s += x;
            }
        }
        for &(id, coef) in objective {
            let len = self.nodes[id.0].value.len();
            acc(&mut adj, id, std::iter::repeat_n(coef, len), len);
        }
        for i in (0..self.nodes.len()).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            let y = &node.value;
            let len_of = |n: NodeId| self.nodes[n.0].value.len();
            match &node.op {
                Op::Const => {}
                Op::Param(p) => {
                    for (d, x) in grads.get_mut(*p).iter_mut().zip(&g) {
                        *d += x;
                    }
                }
                Op::Row(p, r) => {
                    let cols = self.params.get(*p).cols();
                    for (d, x) in grads.get_mut(*p)[r * cols..(r + 1) * cols].iter_mut().zip(&g) {
                        *d += x;
                    }
                }
                Op::MatVec(p, x) => {
                    let w = self.params.get(*p);
                    let cols = w.cols();
                    let xv = self.val(*x);
                    let gw = grads.get_mut(*p);
                    for (r, gr) in g.iter().enumerate() {
                        if *gr != 0.0 {
                            for (d, xc) in gw[r * cols..(r + 1) * cols].iter_mut().zip(xv) {
                                *d += gr * xc;
                            }
                        }
                    }
                    let mut gx = vec![0.0; cols];
                    for (r, gr) in g.iter().enumerate() {
                        for (d, wv) in gx.iter_mut().zip(w.row(r)) {
                            *d += gr * wv;
                        }
                    }
                    acc(&mut adj, *x, gx, cols);
                }
                Op::Add(a, b) => {
                    acc(&mut adj, *a, g.iter().copied(), g.len());
                    acc(&mut adj, *b, g.iter().copied(), g.len());
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.val(*a), self.val(*b));
                    let ga: Vec<f64> = g.iter().zip(bv).map(|(x, y)| x * y).collect();
                    let gb: Vec<f64> = g.iter().zip(av).map(|(x, y)| x * y).collect();
                    acc(&mut adj, *a, ga, g.len());
                    acc(&mut adj, *b, gb, g.len());
                }
                Op::OneMinus(a) => acc(&mut adj, *a, g.iter().map(|x| -x), g.len()),
                Op::Sigmoid(a) => acc(&mut adj, *a, g.iter().zip(y).map(|(x, s)| x * s * (1.0 - s)), g.len()),
                Op::Tanh(a) => acc(&mut adj, *a, g.iter().zip(y).map(|(x, t)| x * (1.0 - t * t)), g.len()),
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let n = len_of(*p);
                        acc(&mut adj, *p, g[off..off + n].iter().copied(), n);
                        off += n;
                    }
                }
                Op::Mean(parts) => {
                    let k = parts.len() as f64;
                    for p in parts {
                        acc(&mut adj, *p, g.iter().map(|x| x / k), g.len());
                    }
                }
                Op::Dots(q, keys) => {
                    let qv = self.val(*q);
                    let mut gq = vec![0.0; qv.len()];
                    for (gi, k) in g.iter().zip(keys) {
                        let kv = self.val(*k);
                        for (d, x) in gq.iter_mut().zip(kv) {
                            *d += gi * x;
                        }
                        acc(&mut adj, *k, qv.iter().map(|x| gi * x), qv.len());
                    }
                    acc(&mut adj, *q, gq, qv.len());
                }
                Op::Softmax(a) => {
                    let gy = dot(&g, y);
                    acc(&mut adj, *a, g.iter().zip(y).map(|(x, s)| s * (x - gy)), g.len());
                }
                Op::WeightedSum(w, items) => {
                    let gw: Vec<f64> = items.iter().map(|it| dot(&g, self.val(*it))).collect();
                    let wv = self.val(*w).to_vec();
                    acc(&mut adj, *w, gw, items.len());
                    for (wi, it) in wv.iter().zip(items) {
                        acc(&mut adj, *it, g.iter().map(|x| wi * x), g.len());
                    }
                }
                Op::LogProb { logits, probs, target } => {
                    let g0 = g[0];
                    let gl = probs.iter().enumerate().map(|(j, p)| g0 * (if j == *target { 1.0 } else { 0.0 } - p));
                    acc(&mut adj, *logits, gl, probs.len());
                }
            }
        }
        grads
    }
}

/// Exact gradient of `Σ coef · node` with respect to every model parameter.
pub fn backprop_sequence(trace: &Trace<'_>, objective: &[(NodeId, f64)]) -> Grads {
    trace.backward(objective)
}

impl Graph for Trace<'_> {
    type V = NodeId;

    fn params(&self) -> &ModelParams {
        self.params
    }
    fn constant(&mut self, v: Vec<f64>) -> NodeId {
        self.push(v, Op::Const)
    }
    fn param(&mut self, id: ParamId) -> NodeId {
        let v = self.params.get(id).data.clone();
        self.push(v, Op::Param(id))
    }
    fn row(&mut self, id: ParamId, r: usize) -> NodeId {
        let v = self.params.get(id).row(r).to_vec();
        self.push(v, Op::Row(id, r))
    }
    fn matvec(&mut self, id: ParamId, x: &NodeId) -> NodeId {
        let w = self.params.get(id);
        let v = matvec_raw(&w.data, w.cols(), self.val(*x));
        self.push(v, Op::MatVec(id, *x))
    }
    fn add(&mut self, a: &NodeId, b: &NodeId) -> NodeId {
        let v = zip_map(self.val(*a), self.val(*b), |x, y| x + y);
        self.push(v, Op::Add(*a, *b))
    }
    fn mul(&mut self, a: &NodeId, b: &NodeId) -> NodeId {
        let v = zip_map(self.val(*a), self.val(*b), |x, y| x * y);
        self.push(v, Op::Mul(*a, *b))
    }
    fn one_minus(&mut self, a: &NodeId) -> NodeId {
        let v = self.val(*a).iter().map(|x| 1.0 - x).collect();
        self.push(v, Op::OneMinus(*a))
    }
    fn sigmoid(&mut self, a: &NodeId) -> NodeId {
        let v = self.val(*a).iter().map(|x| sigmoid(*x)).collect();
        self.push(v, Op::Sigmoid(*a))
    }
    fn tanh(&mut self, a: &NodeId) -> NodeId {
        let v = self.val(*a).iter().map(|x| x.tanh()).collect();
        self.push(v, Op::Tanh(*a))
    }
    fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let v = parts.iter().flat_map(|p| self.val(*p).iter().copied()).collect();
        self.push(v, Op::Concat(parts.to_vec()))
    }
    fn mean(&mut self, parts: &[NodeId]) -> NodeId {
        let v = mean_raw(&parts.iter().map(|p| self.val(*p)).collect::<Vec<_>>());
        self.push(v, Op::Mean(parts.to_vec()))
    }
    fn dots(&mut self, q: &NodeId, keys: &[NodeId]) -> NodeId {
        let qv = self.val(*q);
        let v = keys.iter().map(|k| dot(qv, self.val(*k))).collect();
        self.push(v, Op::Dots(*q, keys.to_vec()))
    }
    fn softmax(&mut self, a: &NodeId) -> NodeId {
        let v = softmax(self.val(*a));
        self.push(v, Op::Softmax(*a))
    }
    fn weighted_sum(&mut self, w: &NodeId, items: &[NodeId]) -> NodeId {
        let v = weighted_sum_raw(self.val(*w), &items.iter().map(|p| self.val(*p)).collect::<Vec<_>>());
        self.push(v, Op::WeightedSum(*w, items.to_vec()))
    }
    fn value<'a>(&'a self, v: &'a NodeId) -> &'a [f64] {
        self.val(*v)
    }
}
