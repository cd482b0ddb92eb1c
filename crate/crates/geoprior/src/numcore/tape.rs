//! Recording tape for reverse-mode differentiation.
//!
//! The tape is deliberately not a general autodiff engine: it records only
//! the primitives the model's loss graph needs (affine, relu, dropout mask,
//! residual add, parameter-column dots, sigmoid, log, and the stable fused
//! log-sigmoid forms) with their forward values, and replays them in exact
//! reverse order. Gradients accumulate additively into a [`Gradients`]
//! buffer, so one buffer can collect a whole mini-batch.

use crate::error::{Error, Result};
use crate::numcore::{
    affine_into, log_one_minus_sigmoid, log_sigmoid, sigmoid, Gradients, ParamId,
    ParamSet,
};

/// Handle to a recorded node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    /// Constant leaf; receives no gradient.
    Input,
    Affine { w: ParamId, b: ParamId, x: NodeId },
    Relu { x: NodeId },
    Dropout { x: NodeId, mask: Vec<f64> },
    Add { a: NodeId, b: NodeId },
    /// Dot of a vector node with column `col` of parameter matrix `m`.
    DotCol { m: ParamId, col: usize, x: NodeId },
    /// Dot of two parameter-matrix columns.
    DotColCol {
        a: ParamId,
        a_col: usize,
        b: ParamId,
        b_col: usize,
    },
    Sigmoid { x: NodeId },
    Ln { x: NodeId },
    LogSigmoid { x: NodeId },
    LogOneMinusSigmoid { x: NodeId },
    /// Scalar `sum_i coeff_i * term_i` over scalar nodes.
    WeightedSum { terms: Vec<(f64, NodeId)> },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Vec<f64>,
}

/// Eagerly evaluated operation record.
///
/// Building a node computes its forward value immediately, so the tape always
/// holds a completed forward pass and [`Tape::backward`] can replay it.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, op: Op, value: Vec<f64>) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.nodes[id.0].value.len(), 1);
        self.nodes[id.0].value[0]
    }

    pub fn input(&mut self, value: Vec<f64>) -> NodeId {
        self.push(Op::Input, value)
    }

    pub fn affine(&mut self, params: &ParamSet, w: ParamId, b: ParamId, x: NodeId) -> NodeId {
        let weight = params.get(w);
        let mut out = vec![0.0; weight.rows()];
        affine_into(&mut out, weight, params.get(b), &self.nodes[x.0].value);
        self.push(Op::Affine { w, b, x }, out)
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let out: Vec<f64> = self.nodes[x.0].value.iter().map(|v| v.max(0.0)).collect();
        self.push(Op::Relu { x }, out)
    }

    /// Elementwise product with a fixed mask whose surviving entries carry
    /// the `1/(1-rate)` scale.
    pub fn dropout(&mut self, x: NodeId, mask: Vec<f64>) -> NodeId {
        debug_assert_eq!(mask.len(), self.nodes[x.0].value.len());
        let out: Vec<f64> = self.nodes[x.0]
            .value
            .iter()
            .zip(&mask)
            .map(|(v, m)| v * m)
            .collect();
        self.push(Op::Dropout { x, mask }, out)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let out: Vec<f64> = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x + y)
            .collect();
        self.push(Op::Add { a, b }, out)
    }

    pub fn dot_col(&mut self, params: &ParamSet, m: ParamId, col: usize, x: NodeId) -> NodeId {
        let v = params.get(m).col_dot(col, &self.nodes[x.0].value);
        self.push(Op::DotCol { m, col, x }, vec![v])
    }

    pub fn dot_col_col(
        &mut self,
        params: &ParamSet,
        a: ParamId,
        a_col: usize,
        b: ParamId,
        b_col: usize,
    ) -> NodeId {
        let ma = params.get(a);
        let mb = params.get(b);
        debug_assert_eq!(ma.rows(), mb.rows());
        let mut v = 0.0;
        for i in 0..ma.rows() {
            v += ma.get(i, a_col) * mb.get(i, b_col);
        }
        self.push(
            Op::DotColCol { a, a_col, b, b_col },
            vec![v],
        )
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let out: Vec<f64> = self.nodes[x.0].value.iter().map(|&v| sigmoid(v)).collect();
        self.push(Op::Sigmoid { x }, out)
    }

    pub fn ln(&mut self, x: NodeId) -> NodeId {
        let out: Vec<f64> = self.nodes[x.0].value.iter().map(|v| v.ln()).collect();
        self.push(Op::Ln { x }, out)
    }

    pub fn log_sigmoid(&mut self, x: NodeId) -> NodeId {
        let out: Vec<f64> = self.nodes[x.0]
            .value
            .iter()
            .map(|&v| log_sigmoid(v))
            .collect();
        self.push(Op::LogSigmoid { x }, out)
    }

    pub fn log_one_minus_sigmoid(&mut self, x: NodeId) -> NodeId {
        let out: Vec<f64> = self.nodes[x.0]
            .value
            .iter()
            .map(|&v| log_one_minus_sigmoid(v))
            .collect();
        self.push(Op::LogOneMinusSigmoid { x }, out)
    }

    pub fn weighted_sum(&mut self, terms: Vec<(f64, NodeId)>) -> NodeId {
        let mut v = 0.0;
        for (c, t) in &terms {
            debug_assert_eq!(self.nodes[t.0].value.len(), 1);
            v += c * self.nodes[t.0].value[0];
        }
        self.push(Op::WeightedSum { terms }, vec![v])
    }

    /// Replay the tape backward from scalar node `root`, seeding its adjoint
    /// with `seed`, and accumulate parameter gradients into `grads`.
    pub fn backward(
        &self,
        params: &ParamSet,
        root: NodeId,
        seed: f64,
        grads: &mut Gradients,
    ) -> Result<()> {
        if root.0 >= self.nodes.len() {
            return Err(Error::Config(
                "backward requires a completed forward pass for the root node".into(),
            ));
        }
        if self.nodes[root.0].value.len() != 1 {
            return Err(Error::Shape("backward root must be scalar".into()));
        }
        let mut adj: Vec<Vec<f64>> = self
            .nodes
            .iter()
            .map(|n| vec![0.0; n.value.len()])
            .collect();
        adj[root.0][0] = seed;

        for idx in (0..=root.0).rev() {
            if adj[idx].iter().all(|&g| g == 0.0) {
                continue;
            }
            // Take the adjoint out so we can borrow `adj` mutably below.
            let g = std::mem::take(&mut adj[idx]);
            match &self.nodes[idx].op {
                Op::Input => {}
                Op::Affine { w, b, x } => {
                    let weight = params.get(*w);
                    let input = &self.nodes[x.0].value;
                    let dw = grads.get_mut(*w);
                    for i in 0..weight.rows() {
                        let gi = g[i];
                        if gi == 0.0 {
                            continue;
                        }
                        let row = &mut dw.data_mut()[i * input.len()..(i + 1) * input.len()];
                        for (r, xv) in row.iter_mut().zip(input) {
                            *r += gi * xv;
                        }
                    }
                    let db = grads.get_mut(*b);
                    for (d, gi) in db.data_mut().iter_mut().zip(&g) {
                        *d += gi;
                    }
                    let dx = &mut adj[x.0];
                    for i in 0..weight.rows() {
                        let gi = g[i];
                        if gi == 0.0 {
                            continue;
                        }
                        for (d, wv) in dx.iter_mut().zip(weight.row(i)) {
                            *d += gi * wv;
                        }
                    }
                }
                Op::Relu { x } => {
                    let out = &self.nodes[idx].value;
                    for (i, gi) in g.iter().enumerate() {
                        if out[i] > 0.0 {
                            adj[x.0][i] += gi;
                        }
                    }
                }
                Op::Dropout { x, mask } => {
                    for (i, gi) in g.iter().enumerate() {
                        adj[x.0][i] += gi * mask[i];
                    }
                }
                Op::Add { a, b } => {
                    for (i, gi) in g.iter().enumerate() {
                        adj[a.0][i] += gi;
                    }
                    for (i, gi) in g.iter().enumerate() {
                        adj[b.0][i] += gi;
                    }
                }
                Op::DotCol { m, col, x } => {
                    let gs = g[0];
                    let mat = params.get(*m);
                    let input = &self.nodes[x.0].value;
                    let dm = grads.get_mut(*m);
                    let cols = mat.cols();
                    for i in 0..mat.rows() {
                        dm.data_mut()[i * cols + col] += gs * input[i];
                    }
                    let dx = &mut adj[x.0];
                    for i in 0..mat.rows() {
                        dx[i] += gs * mat.get(i, *col);
                    }
                }
                Op::DotColCol { a, a_col, b, b_col } => {
                    let gs = g[0];
                    let rows = params.get(*a).rows();
                    for i in 0..rows {
                        let av = params.get(*a).get(i, *a_col);
                        let bv = params.get(*b).get(i, *b_col);
                        let ca = params.get(*a).cols();
                        let cb = params.get(*b).cols();
                        grads.get_mut(*a).data_mut()[i * ca + a_col] += gs * bv;
                        grads.get_mut(*b).data_mut()[i * cb + b_col] += gs * av;
                    }
                }
                Op::Sigmoid { x } => {
                    let out = &self.nodes[idx].value;
                    for (i, gi) in g.iter().enumerate() {
                        adj[x.0][i] += gi * out[i] * (1.0 - out[i]);
                    }
                }
                Op::Ln { x } => {
                    let input = &self.nodes[x.0].value;
                    for (i, gi) in g.iter().enumerate() {
                        adj[x.0][i] += gi / input[i];
                    }
                }
                Op::LogSigmoid { x } => {
                    let input = &self.nodes[x.0].value;
                    for (i, gi) in g.iter().enumerate() {
                        adj[x.0][i] += gi * sigmoid(-input[i]);
                    }
                }
                Op::LogOneMinusSigmoid { x } => {
                    let input = &self.nodes[x.0].value;
                    for (i, gi) in g.iter().enumerate() {
                        adj[x.0][i] -= gi * sigmoid(input[i]);
                    }
                }
                Op::WeightedSum { terms } => {
                    let gs = g[0];
                    for (c, t) in terms {
                        adj[t.0][0] += gs * c;
                    }
                }
            }
        }
        Ok(())
    }
}
