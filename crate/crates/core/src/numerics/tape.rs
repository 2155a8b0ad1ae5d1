//! Define-by-run reverse-mode automatic differentiation.
//!
//! Each op records a node and computes its value immediately, so the tape is
//! topologically ordered by construction and `backward` is a single reverse
//! sweep. Every freshly computed value (and every gradient, as it is consumed)
//! is checked for NaN/Inf; a violation is an error naming the node, never a
//! silently propagated value.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul { a: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Tanh { a: NodeId },
    Relu { a: NodeId },
    Exp { a: NodeId },
    Log { a: NodeId },
    Square { a: NodeId },
    Neg { a: NodeId },
    Scale { a: NodeId, c: f64 },
    Sum { a: NodeId },
    Mean { a: NodeId },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul { .. } => "matmul",
            Op::Add { .. } => "add",
            Op::Mul { .. } => "mul",
            Op::Tanh { .. } => "tanh",
            Op::Relu { .. } => "relu",
            Op::Exp { .. } => "exp",
            Op::Log { .. } => "log",
            Op::Square { .. } => "square",
            Op::Neg { .. } => "neg",
            Op::Scale { .. } => "scale",
            Op::Sum { .. } => "sum",
            Op::Mean { .. } => "mean",
        }
    }
}

struct Node {
    op: Op,
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Parallelize matrix products only when there is enough work per row.
const PAR_FLOP_THRESHOLD: usize = 1 << 19;

fn par_rows(m: usize, flops: usize) -> bool {
    m >= 8 && flops >= PAR_FLOP_THRESHOLD
}

/// out[m,n] = a[m,k] @ b[k,n]
fn matmul_nn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    let body = |i: usize, row: &mut [f64]| {
        row.fill(0.0);
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &aip) in a_row.iter().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &bpj) in row.iter_mut().zip(b_row.iter()) {
                *o += aip * bpj;
            }
        }
    };
    if par_rows(m, m * k * n) {
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| body(i, row));
    } else {
        for (i, row) in out.chunks_mut(n).enumerate() {
            body(i, row);
        }
    }
}

/// out[m,k] = g[m,n] @ b[k,n]^T  (gradient w.r.t. the left matmul operand)
fn matmul_nt(g: &[f64], b: &[f64], m: usize, n: usize, k: usize, out: &mut [f64]) {
    let body = |i: usize, row: &mut [f64]| {
        let g_row = &g[i * n..(i + 1) * n];
        for (p, o) in row.iter_mut().enumerate() {
            let b_row = &b[p * n..(p + 1) * n];
            *o = g_row.iter().zip(b_row.iter()).map(|(x, y)| x * y).sum();
        }
    };
    if par_rows(m, m * k * n) {
        out.par_chunks_mut(k).enumerate().for_each(|(i, row)| body(i, row));
    } else {
        for (i, row) in out.chunks_mut(k).enumerate() {
            body(i, row);
        }
    }
}

/// out[k,n] = a[m,k]^T @ g[m,n]  (gradient w.r.t. the right matmul operand)
fn matmul_tn(a: &[f64], g: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    let body = |p: usize, row: &mut [f64]| {
        row.fill(0.0);
        for i in 0..m {
            let aip = a[i * k + p];
            let g_row = &g[i * n..(i + 1) * n];
            for (o, &gij) in row.iter_mut().zip(g_row.iter()) {
                *o += aip * gij;
            }
        }
    };
    if par_rows(k, m * k * n) {
        out.par_chunks_mut(n).enumerate().for_each(|(p, row)| body(p, row));
    } else {
        for (p, row) in out.chunks_mut(n).enumerate() {
            body(p, row);
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Insert a tensor as a leaf, honoring its `requires_grad`.
    pub fn leaf(&mut self, t: &Tensor) -> NodeId {
        self.push_leaf(t.data().to_vec(), t.shape().to_vec(), t.requires_grad)
    }

    /// Insert a tensor as a constant (no gradient regardless of the flag);
    /// used for frozen parameters and data batches.
    pub fn constant(&mut self, t: &Tensor) -> NodeId {
        self.push_leaf(t.data().to_vec(), t.shape().to_vec(), false)
    }

    pub fn constant_parts(&mut self, data: Vec<f64>, shape: Vec<usize>) -> Result<NodeId> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::ShapeMismatch {
                op: "leaf",
                details: format!("shape {shape:?} vs data length {}", data.len()),
            });
        }
        Ok(self.push_leaf(data, shape, false))
    }

    fn push_leaf(&mut self, data: Vec<f64>, shape: Vec<usize>, requires_grad: bool) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { op: Op::Leaf, shape, data, requires_grad, grad: None });
        id
    }

    fn push(&mut self, op: Op, data: Vec<f64>, shape: Vec<usize>, requires_grad: bool) -> Result<NodeId> {
        let id = NodeId(self.nodes.len());
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { node: id.0, op: op.name() });
        }
        self.nodes.push(Node { op, shape, data, requires_grad, grad: None });
        Ok(id)
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn data(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].data
    }

    /// Scalar value of a 1-element node.
    pub fn scalar_value(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.nodes[id.0].data.len(), 1);
        self.nodes[id.0].data[0]
    }

    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id.0].grad.as_deref()
    }

    fn needs(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    // ---- forward ops -------------------------------------------------

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (&self.nodes[a.0].shape, &self.nodes[b.0].shape);
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                details: format!("{sa:?} x {sb:?}"),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        matmul_nn(&self.nodes[a.0].data, &self.nodes[b.0].data, m, k, n, &mut out);
        let rg = self.needs(a) || self.needs(b);
        self.push(Op::MatMul { a, b }, out, vec![m, n], rg)
    }

    /// Elementwise add. The right operand may be a `[m]` or `[1, m]` bias
    /// broadcast over the leading batch dimension of a `[n, m]` left operand.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.nodes[a.0].shape.clone(), self.nodes[b.0].shape.clone());
        let out = if sa == sb {
            self.nodes[a.0]
                .data
                .iter()
                .zip(self.nodes[b.0].data.iter())
                .map(|(x, y)| x + y)
                .collect::<Vec<_>>()
        } else if Self::broadcastable(&sa, &sb) {
            let m = *sa.last().unwrap();
            let bd = &self.nodes[b.0].data;
            self.nodes[a.0]
                .data
                .chunks(m)
                .flat_map(|row| row.iter().zip(bd.iter()).map(|(x, y)| x + y))
                .collect()
        } else {
            return Err(Error::ShapeMismatch { op: "add", details: format!("{sa:?} + {sb:?}") });
        };
        let rg = self.needs(a) || self.needs(b);
        self.push(Op::Add { a, b }, out, sa, rg)
    }

    fn broadcastable(sa: &[usize], sb: &[usize]) -> bool {
        sa.len() == 2
            && ((sb.len() == 1 && sb[0] == sa[1]) || (sb.len() == 2 && sb[0] == 1 && sb[1] == sa[1]))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.nodes[a.0].shape.clone(), self.nodes[b.0].shape.clone());
        if sa != sb {
            return Err(Error::ShapeMismatch { op: "mul", details: format!("{sa:?} * {sb:?}") });
        }
        let out: Vec<f64> = self.nodes[a.0]
            .data
            .iter()
            .zip(self.nodes[b.0].data.iter())
            .map(|(x, y)| x * y)
            .collect();
        let rg = self.needs(a) || self.needs(b);
        self.push(Op::Mul { a, b }, out, sa, rg)
    }

    fn unary(&mut self, a: NodeId, op: Op, f: impl Fn(f64) -> f64) -> Result<NodeId> {
        let out: Vec<f64> = self.nodes[a.0].data.iter().map(|&x| f(x)).collect();
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.needs(a);
        self.push(op, out, shape, rg)
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Tanh { a }, f64::tanh)
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Relu { a }, |x| x.max(0.0))
    }

    pub fn exp(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Exp { a }, f64::exp)
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Log { a }, f64::ln)
    }

    pub fn square(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Square { a }, |x| x * x)
    }

    pub fn neg(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(a, Op::Neg { a }, |x| -x)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        self.unary(a, Op::Scale { a, c }, |x| c * x)
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let s: f64 = self.nodes[a.0].data.iter().sum();
        let rg = self.needs(a);
        self.push(Op::Sum { a }, vec![s], vec![1], rg)
    }

    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        let n = self.nodes[a.0].data.len() as f64;
        let s: f64 = self.nodes[a.0].data.iter().sum();
        let rg = self.needs(a);
        self.push(Op::Mean { a }, vec![s / n], vec![1], rg)
    }

    // ---- backward ----------------------------------------------------

    /// Reverse sweep from a scalar output. Gradients accumulate (`+=`) across
    /// fan-out and are only materialized for nodes on a `requires_grad` path.
    pub fn backward(&mut self, out: NodeId) -> Result<()> {
        let out_node = &self.nodes[out.0];
        if out_node.data.len() != 1 {
            return Err(Error::NonScalarOutput { shape: out_node.shape.clone() });
        }
        self.nodes[out.0].grad = Some(vec![1.0]);

        for i in (0..=out.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(grad) = self.nodes[i].grad.take() else { continue };
            if !grad.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite { node: i, op: self.nodes[i].op.name() });
            }
            let op = self.nodes[i].op.clone();
            match op {
                Op::Leaf => {}
                Op::MatMul { a, b } => {
                    let sa = self.nodes[a.0].shape.clone();
                    let sb = self.nodes[b.0].shape.clone();
                    let (m, k, n) = (sa[0], sa[1], sb[1]);
                    if self.needs(a) {
                        let mut da = vec![0.0; m * k];
                        matmul_nt(&grad, &self.nodes[b.0].data, m, n, k, &mut da);
                        self.accumulate(a, &da);
                    }
                    if self.needs(b) {
                        let mut db = vec![0.0; k * n];
                        matmul_tn(&self.nodes[a.0].data, &grad, m, k, n, &mut db);
                        self.accumulate(b, &db);
                    }
                }
                Op::Add { a, b } => {
                    if self.needs(a) {
                        self.accumulate(a, &grad);
                    }
                    if self.needs(b) {
                        let sb = &self.nodes[b.0].shape;
                        if *sb == self.nodes[i].shape {
                            self.accumulate(b, &grad);
                        } else {
                            // bias broadcast: sum gradient over rows
                            let m = self.nodes[b.0].data.len();
                            let mut db = vec![0.0; m];
                            for row in grad.chunks(m) {
                                for (o, &g) in db.iter_mut().zip(row.iter()) {
                                    *o += g;
                                }
                            }
                            self.accumulate(b, &db);
                        }
                    }
                }
                Op::Mul { a, b } => {
                    if self.needs(a) {
                        let da: Vec<f64> =
                            grad.iter().zip(self.nodes[b.0].data.iter()).map(|(g, y)| g * y).collect();
                        self.accumulate(a, &da);
                    }
                    if self.needs(b) {
                        let db: Vec<f64> =
                            grad.iter().zip(self.nodes[a.0].data.iter()).map(|(g, x)| g * x).collect();
                        self.accumulate(b, &db);
                    }
                }
                Op::Tanh { a } => {
                    let da: Vec<f64> =
                        grad.iter().zip(self.nodes[i].data.iter()).map(|(g, t)| g * (1.0 - t * t)).collect();
                    self.accumulate(a, &da);
                }
                Op::Relu { a } => {
                    let da: Vec<f64> = grad
                        .iter()
                        .zip(self.nodes[a.0].data.iter())
                        .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                        .collect();
                    self.accumulate(a, &da);
                }
                Op::Exp { a } => {
                    let da: Vec<f64> =
                        grad.iter().zip(self.nodes[i].data.iter()).map(|(g, e)| g * e).collect();
                    self.accumulate(a, &da);
                }
                Op::Log { a } => {
                    let da: Vec<f64> =
                        grad.iter().zip(self.nodes[a.0].data.iter()).map(|(g, x)| g / x).collect();
                    self.accumulate(a, &da);
                }
                Op::Square { a } => {
                    let da: Vec<f64> =
                        grad.iter().zip(self.nodes[a.0].data.iter()).map(|(g, x)| 2.0 * g * x).collect();
                    self.accumulate(a, &da);
                }
                Op::Neg { a } => {
                    let da: Vec<f64> = grad.iter().map(|g| -g).collect();
                    self.accumulate(a, &da);
                }
                Op::Scale { a, c } => {
                    let da: Vec<f64> = grad.iter().map(|g| c * g).collect();
                    self.accumulate(a, &da);
                }
                Op::Sum { a } => {
                    let g = grad[0];
                    let da = vec![g; self.nodes[a.0].data.len()];
                    self.accumulate(a, &da);
                }
                Op::Mean { a } => {
                    let n = self.nodes[a.0].data.len();
                    let g = grad[0] / n as f64;
                    let da = vec![g; n];
                    self.accumulate(a, &da);
                }
            }
            // Leaves keep their gradient readable after the sweep.
            if matches!(self.nodes[i].op, Op::Leaf) {
                self.nodes[i].grad = Some(grad);
            }
        }
        Ok(())
    }

    fn accumulate(&mut self, id: NodeId, add: &[f64]) {
        let node = &mut self.nodes[id.0];
        match node.grad {
            Some(ref mut g) => {
                for (o, &v) in g.iter_mut().zip(add.iter()) {
                    *o += v;
                }
            }
            None => node.grad = Some(add.to_vec()),
        }
    }
}
