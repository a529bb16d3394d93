//! Define-by-run reverse-mode differentiation.
//!
//! A [`Graph`] records every operation as it is evaluated. Nodes are appended
//! in evaluation order, so parents always precede children and the backward
//! sweep is a single reverse pass over the node list. A fresh graph is built
//! for every example.

mod gradcheck;

pub use gradcheck::{grad_check, GradCheckReport, Offender};

use std::borrow::Cow;

use crate::error::{Error, Result};
use crate::params::{ParamGrads, ParamId, ParamSet};
use crate::tensor::Tensor;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Operation tag, used for fault injection and diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OpKind {
    Leaf,
    MatVec,
    Add,
    Sub,
    Mul,
    Sigmoid,
    Tanh,
    Relu,
    Abs,
    Softmax,
    Concat,
    CrossEntropy,
    Sum,
    Row,
    Select,
    ScaleBy,
    Affine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EwOp {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Sigmoid,
    Tanh,
    Relu,
    Abs,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatVec(Var, Var),
    Ew(EwOp, Var, Var),
    Unary(UnaryOp, Var),
    Softmax(Var),
    Concat(Vec<Var>),
    CrossEntropy(Var, usize),
    Sum(Var),
    Row(Var, usize),
    Select(Var, usize),
    ScaleBy(Var, Var),
    Affine(Var, f64),
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::MatVec(..) => OpKind::MatVec,
            Op::Ew(EwOp::Add, ..) => OpKind::Add,
            Op::Ew(EwOp::Sub, ..) => OpKind::Sub,
            Op::Ew(EwOp::Mul, ..) => OpKind::Mul,
            Op::Unary(UnaryOp::Sigmoid, _) => OpKind::Sigmoid,
            Op::Unary(UnaryOp::Tanh, _) => OpKind::Tanh,
            Op::Unary(UnaryOp::Relu, _) => OpKind::Relu,
            Op::Unary(UnaryOp::Abs, _) => OpKind::Abs,
            Op::Softmax(_) => OpKind::Softmax,
            Op::Concat(_) => OpKind::Concat,
            Op::CrossEntropy(..) => OpKind::CrossEntropy,
            Op::Sum(_) => OpKind::Sum,
            Op::Row(..) => OpKind::Row,
            Op::Select(..) => OpKind::Select,
            Op::ScaleBy(..) => OpKind::ScaleBy,
            Op::Affine(..) => OpKind::Affine,
        }
    }
}

struct Node<'p> {
    shape: Vec<usize>,
    value: Cow<'p, [f64]>,
    op: Op,
}

/// The tape. Parameter leaves borrow their values from a [`ParamSet`].
pub struct Graph<'p> {
    nodes: Vec<Node<'p>>,
    params: Option<&'p ParamSet>,
    bound: Vec<Option<Var>>,
    fault: Option<OpKind>,
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p> Graph<'p> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            params: None,
            bound: Vec::new(),
            fault: None,
        }
    }

    pub fn with_params(params: &'p ParamSet) -> Self {
        Graph {
            nodes: Vec::with_capacity(1024),
            params: Some(params),
            bound: vec![None; params.len()],
            fault: None,
        }
    }

    /// Debug hook: doubles the local gradient of every `kind` node during
    /// backward. Used to confirm that gradient checking catches faults.
    pub fn inject_fault(&mut self, kind: OpKind) {
        self.fault = Some(kind);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Cow<'p, [f64]>, op: Op) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node { shape, value, op });
        Var(self.nodes.len() - 1)
    }

    /// A leaf holding `t`. Gradients are still computed for it.
    pub fn constant(&mut self, t: Tensor) -> Var {
        let shape = t.shape().to_vec();
        self.push(shape, Cow::Owned(t.into_data()), Op::Leaf)
    }

    pub fn vector(&mut self, values: &[f64]) -> Var {
        self.push(vec![values.len()], Cow::Owned(values.to_vec()), Op::Leaf)
    }

    pub fn zeros(&mut self, n: usize) -> Var {
        self.push(vec![n], Cow::Owned(vec![0.0; n]), Op::Leaf)
    }

    /// Leaf for a parameter, bound once per graph.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.bound[id.index()] {
            return v;
        }
        let params = self.params.expect("graph has no parameter set");
        let t = params.value(id);
        let v = self.push(t.shape().to_vec(), Cow::Borrowed(t.data()), Op::Leaf);
        self.bound[id.index()] = Some(v);
        v
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        Tensor::new(self.shape(v).to_vec(), self.value(v).to_vec()).expect("node shape")
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        let val = self.value(v);
        assert_eq!(val.len(), 1, "not a scalar");
        val[0]
    }

    fn vec_len(&self, op: &'static str, v: Var) -> Result<usize> {
        match self.shape(v) {
            [n] => Ok(*n),
            s => Err(Error::Rank {
                op,
                expected: 1,
                shape: s.to_vec(),
            }),
        }
    }

    /// Matrix-vector product `w x`.
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (rows, cols) = match self.shape(w) {
            [r, c] => (*r, *c),
            s => {
                return Err(Error::Rank {
                    op: "matvec",
                    expected: 2,
                    shape: s.to_vec(),
                })
            }
        };
        if self.shape(x) != [cols] {
            return Err(Error::dim("matvec", self.shape(w), self.shape(x)));
        }
        let wv = self.value(w);
        let xv = self.value(x);
        let out: Vec<f64> = (0..rows)
            .map(|i| dot(&wv[i * cols..(i + 1) * cols], xv))
            .collect();
        Ok(self.push(vec![rows], Cow::Owned(out), Op::MatVec(w, x)))
    }

    pub fn ew(&mut self, op: EwOp, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            let name = match op {
                EwOp::Add => "add",
                EwOp::Sub => "sub",
                EwOp::Mul => "mul",
            };
            return Err(Error::dim(name, self.shape(a), self.shape(b)));
        }
        let (av, bv) = (self.value(a), self.value(b));
        let out: Vec<f64> = match op {
            EwOp::Add => av.iter().zip(bv).map(|(x, y)| x + y).collect(),
            EwOp::Sub => av.iter().zip(bv).map(|(x, y)| x - y).collect(),
            EwOp::Mul => av.iter().zip(bv).map(|(x, y)| x * y).collect(),
        };
        let shape = self.shape(a).to_vec();
        Ok(self.push(shape, Cow::Owned(out), Op::Ew(op, a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.ew(EwOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.ew(EwOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.ew(EwOp::Mul, a, b)
    }

    pub fn unary(&mut self, op: UnaryOp, a: Var) -> Var {
        let f: fn(f64) -> f64 = match op {
            UnaryOp::Sigmoid => sigmoid,
            UnaryOp::Tanh => f64::tanh,
            UnaryOp::Relu => |x| x.max(0.0),
            UnaryOp::Abs => f64::abs,
        };
        let out: Vec<f64> = self.value(a).iter().map(|&x| f(x)).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, Cow::Owned(out), Op::Unary(op, a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(UnaryOp::Sigmoid, a)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(UnaryOp::Tanh, a)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(UnaryOp::Relu, a)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(UnaryOp::Abs, a)
    }

    /// Softmax over a nonempty vector, stabilised by max subtraction.
    pub fn softmax(&mut self, z: Var) -> Result<Var> {
        let n = self.vec_len("softmax", z)?;
        if n == 0 {
            return Err(Error::Input("softmax of an empty vector".into()));
        }
        let out = softmax(self.value(z));
        Ok(self.push(vec![n], Cow::Owned(out), Op::Softmax(z)))
    }

    /// Order-preserving concatenation of vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut out = Vec::new();
        for &p in parts {
            self.vec_len("concat", p)?;
            out.extend_from_slice(self.value(p));
        }
        let n = out.len();
        Ok(self.push(vec![n], Cow::Owned(out), Op::Concat(parts.to_vec())))
    }

    /// `-log softmax(logits)[target]`.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let k = self.vec_len("cross_entropy", logits)?;
        if target >= k {
            return Err(Error::Index {
                op: "cross_entropy",
                index: target,
                len: k,
            });
        }
        let z = self.value(logits);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - z[target];
        Ok(self.push(vec![1], Cow::Owned(vec![loss]), Op::CrossEntropy(logits, target)))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        self.push(vec![1], Cow::Owned(vec![s]), Op::Sum(a))
    }

    /// Row `index` of a matrix, as a vector.
    pub fn row(&mut self, table: Var, index: usize) -> Result<Var> {
        let (rows, cols) = match self.shape(table) {
            [r, c] => (*r, *c),
            s => {
                return Err(Error::Rank {
                    op: "row",
                    expected: 2,
                    shape: s.to_vec(),
                })
            }
        };
        if index >= rows {
            return Err(Error::Index {
                op: "row",
                index,
                len: rows,
            });
        }
        let out = self.value(table)[index * cols..(index + 1) * cols].to_vec();
        Ok(self.push(vec![cols], Cow::Owned(out), Op::Row(table, index)))
    }

    /// Element `index` of a vector, as a one-element vector.
    pub fn select(&mut self, v: Var, index: usize) -> Result<Var> {
        let n = self.vec_len("select", v)?;
        if index >= n {
            return Err(Error::Index {
                op: "select",
                index,
                len: n,
            });
        }
        let x = self.value(v)[index];
        Ok(self.push(vec![1], Cow::Owned(vec![x]), Op::Select(v, index)))
    }

    /// Vector `v` scaled by the one-element node `s`.
    pub fn scale_by(&mut self, v: Var, s: Var) -> Result<Var> {
        if self.value(s).len() != 1 {
            return Err(Error::dim("scale_by", self.shape(v), self.shape(s)));
        }
        let k = self.value(s)[0];
        let out: Vec<f64> = self.value(v).iter().map(|x| x * k).collect();
        let shape = self.shape(v).to_vec();
        Ok(self.push(shape, Cow::Owned(out), Op::ScaleBy(v, s)))
    }

    /// `scale * a + offset`, with constant `scale` and `offset`.
    pub fn affine(&mut self, a: Var, scale: f64, offset: f64) -> Var {
        let out: Vec<f64> = self.value(a).iter().map(|x| scale * x + offset).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, Cow::Owned(out), Op::Affine(a, scale))
    }

    /// `1 - a`.
    pub fn one_minus(&mut self, a: Var) -> Var {
        self.affine(a, -1.0, 1.0)
    }

    /// Reverse sweep from a scalar root. Nodes that do not reach the root
    /// get zero gradient.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if self.value(root).len() != 1 || self.shape(root).len() > 1 {
            return Err(Error::Rank {
                op: "backward",
                expected: 0,
                shape: self.shape(root).to_vec(),
            });
        }
        let mut grads: Vec<Vec<f64>> = Vec::with_capacity(root.0 + 1);
        grads.extend(self.nodes[..=root.0].iter().map(|n| vec![0.0; n.value.len()]));
        grads[root.0][0] = 1.0;

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let mut up = std::mem::take(&mut grads[i]);
            if up.iter().all(|&g| g == 0.0) {
                grads[i] = up;
                continue;
            }
            if self.fault == Some(node.op.kind()) {
                up.iter_mut().for_each(|g| *g *= 2.0);
            }
            self.propagate(node, &up, &mut grads);
            grads[i] = up;
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node<'_>, up: &[f64], grads: &mut [Vec<f64>]) {
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatVec(w, x) => {
                let cols = self.shape(*w)[1];
                let wv = self.value(*w);
                let xv = self.value(*x);
                {
                    let gw = &mut grads[w.0];
                    for (i, &u) in up.iter().enumerate() {
                        if u == 0.0 {
                            continue;
                        }
                        let row = &mut gw[i * cols..(i + 1) * cols];
                        for (g, &xj) in row.iter_mut().zip(xv) {
                            *g += u * xj;
                        }
                    }
                }
                let gx = &mut grads[x.0];
                for (i, &u) in up.iter().enumerate() {
                    if u == 0.0 {
                        continue;
                    }
                    for (g, &wij) in gx.iter_mut().zip(&wv[i * cols..(i + 1) * cols]) {
                        *g += u * wij;
                    }
                }
            }
            Op::Ew(op, a, b) => match op {
                EwOp::Add => {
                    axpy(&mut grads[a.0], 1.0, up);
                    axpy(&mut grads[b.0], 1.0, up);
                }
                EwOp::Sub => {
                    axpy(&mut grads[a.0], 1.0, up);
                    axpy(&mut grads[b.0], -1.0, up);
                }
                EwOp::Mul => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    for ((g, &u), &y) in grads[a.0].iter_mut().zip(up).zip(bv) {
                        *g += u * y;
                    }
                    for ((g, &u), &x) in grads[b.0].iter_mut().zip(up).zip(av) {
                        *g += u * x;
                    }
                }
            },
            Op::Unary(op, a) => {
                let av = self.value(*a);
                let ga = &mut grads[a.0];
                for i in 0..up.len() {
                    let local = match op {
                        UnaryOp::Sigmoid => out[i] * (1.0 - out[i]),
                        UnaryOp::Tanh => 1.0 - out[i] * out[i],
                        UnaryOp::Relu => f64::from(u8::from(av[i] > 0.0)),
                        UnaryOp::Abs => {
                            if av[i] > 0.0 {
                                1.0
                            } else if av[i] < 0.0 {
                                -1.0
                            } else {
                                0.0
                            }
                        }
                    };
                    ga[i] += up[i] * local;
                }
            }
            Op::Softmax(z) => {
                let s = dot(up, out);
                for ((g, &u), &y) in grads[z.0].iter_mut().zip(up).zip(out.iter()) {
                    *g += y * (u - s);
                }
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = self.nodes[p.0].value.len();
                    axpy(&mut grads[p.0], 1.0, &up[offset..offset + n]);
                    offset += n;
                }
            }
            Op::CrossEntropy(logits, target) => {
                let probs = softmax(self.value(*logits));
                let g = &mut grads[logits.0];
                for (k, p) in probs.into_iter().enumerate() {
                    let one_hot = if k == *target { 1.0 } else { 0.0 };
                    g[k] += up[0] * (p - one_hot);
                }
            }
            Op::Sum(a) => {
                grads[a.0].iter_mut().for_each(|g| *g += up[0]);
            }
            Op::Row(table, index) => {
                let cols = self.shape(*table)[1];
                axpy(&mut grads[table.0][index * cols..(index + 1) * cols], 1.0, up);
            }
            Op::Select(v, index) => {
                grads[v.0][*index] += up[0];
            }
            Op::ScaleBy(v, s) => {
                let k = self.value(*s)[0];
                let vv = self.value(*v);
                grads[s.0][0] += dot(up, vv);
                axpy(&mut grads[v.0], k, up);
            }
            Op::Affine(a, scale) => {
                axpy(&mut grads[a.0], *scale, up);
            }
        }
    }

    /// Gradients of every parameter bound on this graph; unbound parameters
    /// get zeros.
    pub fn param_grads(&self, grads: &Gradients) -> ParamGrads {
        let params = self.params.expect("graph has no parameter set");
        ParamGrads::from_vec(
            params
                .iter()
                .map(|(id, p)| match self.bound[id.index()] {
                    Some(v) if v.0 < grads.grads.len() => {
                        Tensor::new(p.value.shape().to_vec(), grads.grads[v.0].clone())
                            .expect("gradient shape")
                    }
                    _ => Tensor::zeros(p.value.shape()),
                })
                .collect(),
        )
    }
}

/// Result of [`Graph::backward`].
pub struct Gradients {
    grads: Vec<Vec<f64>>,
}

impl Gradients {
    /// Gradient with respect to `v`; zero if `v` was created after the root.
    pub fn wrt(&self, v: Var) -> &[f64] {
        self.grads.get(v.0).map_or(&[], |g| g.as_slice())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax of a slice.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= total);
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
