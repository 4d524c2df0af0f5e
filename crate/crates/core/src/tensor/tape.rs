//! Wengert tape for reverse-mode differentiation.
//!
//! A [`Tape`] records every operation applied to its [`Var`]s. Values are
//! immutable once recorded; [`Tape::backward`] walks the record in reverse and
//! returns a fresh [`Gradients`] table, so nothing on the tape is mutated.
//! Nodes created by [`Tape::constant`] (and anything computed only from
//! constants) never receive gradients.

use std::cell::RefCell;
use std::rc::Rc;

use super::{gemm, Tensor};
use crate::error::{Error, Result};

#[derive(Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    AddRow(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Scale(usize, f64),
    Offset(usize),
    Sigmoid(usize),
    Relu(usize),
    Log(usize),
    Exp(usize),
    Clamp(usize, f64, f64),
    Powf(usize, f64),
    MatMul(usize, usize),
    Transpose(usize),
    Reshape(usize),
    Sum(usize, Option<usize>),
    Mean(usize, Option<usize>),
    Max(usize, Vec<usize>),
    SoftmaxRows(usize),
    LogSoftmaxRows(usize),
    Select(usize, Vec<usize>),
    ConcatCols(Vec<usize>),
    Outer(usize, usize),
    ChannelMatMul(usize, usize, usize),
    SpatialTranspose(usize, usize),
}

struct Node {
    value: Rc<Tensor>,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.value().shape())
    }
}

/// Gradients produced by one backward pass, indexed by node.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn wrt(&self, v: Var<'_>) -> Option<&[f64]> {
        self.grads.get(v.id).and_then(|g| g.as_deref())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    /// Trainable leaf.
    pub fn param(&self, t: Tensor) -> Var<'_> {
        self.push(t, Op::Leaf, true)
    }

    /// Leaf that never receives gradients.
    pub fn constant(&self, t: Tensor) -> Var<'_> {
        self.push(t, Op::Leaf, false)
    }

    fn value(&self, id: usize) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    fn requires(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// Reverse sweep from a scalar root.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.id];
        if root.value.numel() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar root, got shape {:?}",
                root.value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.id + 1];
        grads[loss.id] = Some(vec![1.0]);
        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            backprop(&nodes, id, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], nodes: &[Node], id: usize, contrib: Vec<f64>) {
    if !nodes[id].requires_grad {
        return;
    }
    match &mut grads[id] {
        Some(g) => g.iter_mut().zip(&contrib).for_each(|(a, b)| *a += b),
        slot => *slot = Some(contrib),
    }
}

/// Reduces a full-size gradient onto a broadcast scalar operand when needed.
fn fit(contrib: Vec<f64>, target_numel: usize) -> Vec<f64> {
    if contrib.len() == target_numel {
        contrib
    } else {
        vec![contrib.iter().sum()]
    }
}

fn broadcast_get(v: &[f64], i: usize) -> f64 {
    if v.len() == 1 {
        v[0]
    } else {
        v[i]
    }
}

/// (outer, len, inner) view of a reduction over `axis`.
fn axis_view(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn backprop(nodes: &[Node], id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let node = &nodes[id];
    let out = &node.value;
    let val = |i: usize| &nodes[i].value;
    match &node.op {
        Op::Leaf => {}
        &Op::Add(a, b) => {
            accumulate(grads, nodes, a, fit(g.to_vec(), val(a).numel()));
            accumulate(grads, nodes, b, fit(g.to_vec(), val(b).numel()));
        }
        &Op::AddRow(a, b) => {
            accumulate(grads, nodes, a, g.to_vec());
            if nodes[b].requires_grad {
                let cols = val(b).numel();
                let mut c = vec![0.0; cols];
                for row in g.chunks(cols) {
                    c.iter_mut().zip(row).for_each(|(x, y)| *x += y);
                }
                accumulate(grads, nodes, b, c);
            }
        }
        &Op::Sub(a, b) => {
            accumulate(grads, nodes, a, fit(g.to_vec(), val(a).numel()));
            accumulate(grads, nodes, b, fit(g.iter().map(|x| -x).collect(), val(b).numel()));
        }
        &Op::Mul(a, b) => {
            let (av, bv) = (val(a).data(), val(b).data());
            if nodes[a].requires_grad {
                let c = g.iter().enumerate().map(|(i, x)| x * broadcast_get(bv, i)).collect();
                accumulate(grads, nodes, a, fit(c, av.len()));
            }
            if nodes[b].requires_grad {
                let c = g.iter().enumerate().map(|(i, x)| x * broadcast_get(av, i)).collect();
                accumulate(grads, nodes, b, fit(c, bv.len()));
            }
        }
        &Op::Div(a, b) => {
            let (av, bv) = (val(a).data(), val(b).data());
            if nodes[a].requires_grad {
                let c = g.iter().enumerate().map(|(i, x)| x / broadcast_get(bv, i)).collect();
                accumulate(grads, nodes, a, fit(c, av.len()));
            }
            if nodes[b].requires_grad {
                let c = g
                    .iter()
                    .enumerate()
                    .map(|(i, x)| {
                        let d = broadcast_get(bv, i);
                        -x * broadcast_get(av, i) / (d * d)
                    })
                    .collect();
                accumulate(grads, nodes, b, fit(c, bv.len()));
            }
        }
        &Op::Scale(a, s) => accumulate(grads, nodes, a, g.iter().map(|x| x * s).collect()),
        &Op::Offset(a) => accumulate(grads, nodes, a, g.to_vec()),
        &Op::Sigmoid(a) => {
            let c = g.iter().zip(out.data()).map(|(x, y)| x * y * (1.0 - y)).collect();
            accumulate(grads, nodes, a, c);
        }
        &Op::Relu(a) => {
            let c = g
                .iter()
                .zip(val(a).data())
                .map(|(x, &z)| if z > 0.0 { *x } else { 0.0 })
                .collect();
            accumulate(grads, nodes, a, c);
        }
        &Op::Log(a) => {
            let c = g.iter().zip(val(a).data()).map(|(x, z)| x / z).collect();
            accumulate(grads, nodes, a, c);
        }
        &Op::Exp(a) => {
            let c = g.iter().zip(out.data()).map(|(x, y)| x * y).collect();
            accumulate(grads, nodes, a, c);
        }
        &Op::Clamp(a, lo, hi) => {
            let c = g
                .iter()
                .zip(val(a).data())
                .map(|(x, &z)| if (lo..=hi).contains(&z) { *x } else { 0.0 })
                .collect();
            accumulate(grads, nodes, a, c);
        }
        &Op::Powf(a, p) => {
            let c = g
                .iter()
                .zip(val(a).data())
                .map(|(x, z)| x * p * z.powf(p - 1.0))
                .collect();
            accumulate(grads, nodes, a, c);
        }
        &Op::MatMul(a, b) => {
            let (av, bv) = (val(a), val(b));
            let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
            if nodes[a].requires_grad {
                // dA = G @ B^T
                let mut c = vec![0.0; m * k];
                gemm(m, n, k, g, false, bv.data(), true, &mut c, false);
                accumulate(grads, nodes, a, c);
            }
            if nodes[b].requires_grad {
                // dB = A^T @ G
                let mut c = vec![0.0; k * n];
                gemm(k, m, n, av.data(), true, g, false, &mut c, false);
                accumulate(grads, nodes, b, c);
            }
        }
        &Op::Transpose(a) => {
            let (r, c) = (out.shape()[0], out.shape()[1]);
            let mut t = vec![0.0; r * c];
            for i in 0..r {
                for j in 0..c {
                    t[j * r + i] = g[i * c + j];
                }
            }
            accumulate(grads, nodes, a, t);
        }
        &Op::Reshape(a) => accumulate(grads, nodes, a, g.to_vec()),
        &Op::Sum(a, axis) | &Op::Mean(a, axis) => {
            let shape = val(a).shape();
            let numel = val(a).numel();
            let is_mean = matches!(node.op, Op::Mean(..));
            let c = match axis {
                None => {
                    let s = if is_mean { g[0] / numel as f64 } else { g[0] };
                    vec![s; numel]
                }
                Some(ax) => {
                    let (outer, len, inner) = axis_view(shape, ax);
                    let div = if is_mean { len as f64 } else { 1.0 };
                    let mut c = vec![0.0; numel];
                    for o in 0..outer {
                        for l in 0..len {
                            for i in 0..inner {
                                c[(o * len + l) * inner + i] = g[o * inner + i] / div;
                            }
                        }
                    }
                    c
                }
            };
            accumulate(grads, nodes, a, c);
        }
        Op::Max(a, arg) => {
            let mut c = vec![0.0; val(*a).numel()];
            for (gi, &src) in g.iter().zip(arg) {
                c[src] += gi;
            }
            accumulate(grads, nodes, *a, c);
        }
        &Op::SoftmaxRows(a) => {
            let cols = *out.shape().last().unwrap();
            let mut c = vec![0.0; g.len()];
            for (row, (gr, yr)) in c.chunks_mut(cols).zip(g.chunks(cols).zip(out.data().chunks(cols))) {
                let dot: f64 = gr.iter().zip(yr).map(|(x, y)| x * y).sum();
                for ((ci, gi), yi) in row.iter_mut().zip(gr).zip(yr) {
                    *ci = yi * (gi - dot);
                }
            }
            accumulate(grads, nodes, a, c);
        }
        &Op::LogSoftmaxRows(a) => {
            let cols = *out.shape().last().unwrap();
            let mut c = vec![0.0; g.len()];
            for (row, (gr, yr)) in c.chunks_mut(cols).zip(g.chunks(cols).zip(out.data().chunks(cols))) {
                let gsum: f64 = gr.iter().sum();
                for ((ci, gi), yi) in row.iter_mut().zip(gr).zip(yr) {
                    *ci = gi - yi.exp() * gsum;
                }
            }
            accumulate(grads, nodes, a, c);
        }
        Op::Select(a, idx) => {
            let mut c = vec![0.0; val(*a).numel()];
            for (gi, &src) in g.iter().zip(idx) {
                c[src] += gi;
            }
            accumulate(grads, nodes, *a, c);
        }
        Op::ConcatCols(parts) => {
            let rows = out.shape()[0];
            let total = out.shape()[1];
            let mut offset = 0;
            for &p in parts {
                let w = val(p).shape()[1];
                if nodes[p].requires_grad {
                    let mut c = vec![0.0; rows * w];
                    for r in 0..rows {
                        c[r * w..(r + 1) * w].copy_from_slice(&g[r * total + offset..r * total + offset + w]);
                    }
                    accumulate(grads, nodes, p, c);
                }
                offset += w;
            }
        }
        &Op::Outer(u, v) => {
            let (uv, vv) = (val(u).data(), val(v).data());
            let cols = vv.len();
            if nodes[u].requires_grad {
                let c = g.chunks(cols).map(|row| row.iter().zip(vv).map(|(x, y)| x * y).sum()).collect();
                accumulate(grads, nodes, u, c);
            }
            if nodes[v].requires_grad {
                let mut c = vec![0.0; cols];
                for (row, ui) in g.chunks(cols).zip(uv) {
                    for (cj, gj) in c.iter_mut().zip(row) {
                        *cj += gj * ui;
                    }
                }
                accumulate(grads, nodes, v, c);
            }
        }
        &Op::ChannelMatMul(a, b, n) => {
            let h = out.shape()[1];
            let (av, bv) = (val(a).data(), val(b).data());
            if nodes[a].requires_grad {
                // dA[(i,l),k] = sum_j G[(i,j),k] B[(l,j),k]
                let mut c = vec![0.0; av.len()];
                for i in 0..n {
                    for l in 0..n {
                        let dst = &mut c[(i * n + l) * h..(i * n + l + 1) * h];
                        for j in 0..n {
                            let gr = &g[(i * n + j) * h..(i * n + j + 1) * h];
                            let br = &bv[(l * n + j) * h..(l * n + j + 1) * h];
                            for ((d, x), y) in dst.iter_mut().zip(gr).zip(br) {
                                *d += x * y;
                            }
                        }
                    }
                }
                accumulate(grads, nodes, a, c);
            }
            if nodes[b].requires_grad {
                // dB[(l,j),k] = sum_i A[(i,l),k] G[(i,j),k]
                let mut c = vec![0.0; bv.len()];
                for i in 0..n {
                    for l in 0..n {
                        let ar = &av[(i * n + l) * h..(i * n + l + 1) * h];
                        for j in 0..n {
                            let gr = &g[(i * n + j) * h..(i * n + j + 1) * h];
                            let dst = &mut c[(l * n + j) * h..(l * n + j + 1) * h];
                            for ((d, x), y) in dst.iter_mut().zip(ar).zip(gr) {
                                *d += x * y;
                            }
                        }
                    }
                }
                accumulate(grads, nodes, b, c);
            }
        }
        &Op::SpatialTranspose(a, n) => {
            let h = out.shape()[1];
            accumulate(grads, nodes, a, spatial_transpose(g, n, h));
        }
    }
}

fn spatial_transpose(x: &[f64], n: usize, h: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for i in 0..n {
        for j in 0..n {
            out[(j * n + i) * h..(j * n + i + 1) * h].copy_from_slice(&x[(i * n + j) * h..(i * n + j + 1) * h]);
        }
    }
    out
}

fn check_binary(a: &Tensor, b: &Tensor, what: &str) -> Result<Vec<usize>> {
    if a.shape() == b.shape() {
        Ok(a.shape().to_vec())
    } else if b.numel() == 1 {
        Ok(a.shape().to_vec())
    } else if a.numel() == 1 {
        Ok(b.shape().to_vec())
    } else {
        Err(Error::Shape(format!("{what}: {:?} vs {:?}", a.shape(), b.shape())))
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Rc<Tensor> {
        self.tape.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.requires(self.id)
    }

    fn unary(&self, op: Op, value: Tensor) -> Var<'t> {
        self.tape.push(value, op, self.requires_grad())
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        let v = self.value();
        Tensor::from_parts(v.shape().to_vec(), v.data().iter().map(|&x| f(x)).collect())
    }

    fn binary(&self, other: Var<'t>, what: &str, f: impl Fn(f64, f64) -> f64) -> Result<(Tensor, bool)> {
        let (a, b) = (self.value(), other.value());
        let shape = check_binary(&a, &b, what)?;
        let n = shape.iter().product::<usize>();
        let data = (0..n)
            .map(|i| f(broadcast_get(a.data(), i), broadcast_get(b.data(), i)))
            .collect();
        Ok((Tensor::from_parts(shape, data), self.requires_grad() || other.requires_grad()))
    }

    pub fn add(&self, other: Var<'t>) -> Result<Var<'t>> {
        let (t, rg) = self.binary(other, "add", |x, y| x + y)?;
        Ok(self.tape.push(t, Op::Add(self.id, other.id), rg))
    }

    /// Adds a length-`c` vector to every row of an `r x c` matrix.
    pub fn add_row(&self, row: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), row.value());
        if a.rank() != 2 || b.numel() != a.shape()[1] {
            return Err(Error::Shape(format!("add_row: {:?} + {:?}", a.shape(), b.shape())));
        }
        let cols = b.numel();
        let mut data = a.data().to_vec();
        for r in data.chunks_mut(cols) {
            r.iter_mut().zip(b.data()).for_each(|(x, y)| *x += y);
        }
        let t = Tensor::from_parts(a.shape().to_vec(), data);
        Ok(self.tape.push(t, Op::AddRow(self.id, row.id), self.requires_grad() || row.requires_grad()))
    }

    pub fn sub(&self, other: Var<'t>) -> Result<Var<'t>> {
        let (t, rg) = self.binary(other, "sub", |x, y| x - y)?;
        Ok(self.tape.push(t, Op::Sub(self.id, other.id), rg))
    }

    pub fn mul(&self, other: Var<'t>) -> Result<Var<'t>> {
        let (t, rg) = self.binary(other, "mul", |x, y| x * y)?;
        Ok(self.tape.push(t, Op::Mul(self.id, other.id), rg))
    }

    pub fn div(&self, other: Var<'t>) -> Result<Var<'t>> {
        let (t, rg) = self.binary(other, "div", |x, y| x / y)?;
        Ok(self.tape.push(t, Op::Div(self.id, other.id), rg))
    }

    pub fn scale(&self, s: f64) -> Var<'t> {
        self.unary(Op::Scale(self.id, s), self.map(|x| x * s))
    }

    pub fn neg(&self) -> Var<'t> {
        self.scale(-1.0)
    }

    pub fn add_scalar(&self, s: f64) -> Var<'t> {
        self.unary(Op::Offset(self.id), self.map(|x| x + s))
    }

    /// `s - self`
    pub fn rsub(&self, s: f64) -> Var<'t> {
        self.neg().add_scalar(s)
    }

    pub fn sigmoid(&self) -> Var<'t> {
        self.unary(Op::Sigmoid(self.id), self.map(sigmoid))
    }

    pub fn relu(&self) -> Var<'t> {
        self.unary(Op::Relu(self.id), self.map(|x| x.max(0.0)))
    }

    /// Natural log; every entry must be strictly positive.
    pub fn log(&self) -> Result<Var<'t>> {
        let v = self.value();
        if let Some(bad) = v.data().iter().find(|&&x| !(x > 0.0)) {
            return Err(Error::Numeric(format!("log of non-positive value {bad}")));
        }
        Ok(self.unary(Op::Log(self.id), self.map(f64::ln)))
    }

    pub fn exp(&self) -> Var<'t> {
        self.unary(Op::Exp(self.id), self.map(f64::exp))
    }

    pub fn clamp(&self, lo: f64, hi: f64) -> Var<'t> {
        self.unary(Op::Clamp(self.id, lo, hi), self.map(|x| x.clamp(lo, hi)))
    }

    pub fn powf(&self, p: f64) -> Var<'t> {
        self.unary(Op::Powf(self.id, p), self.map(|x| x.powf(p)))
    }

    pub fn matmul(&self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        let t = a.matmul(&b)?;
        Ok(self.tape.push(t, Op::MatMul(self.id, other.id), self.requires_grad() || other.requires_grad()))
    }

    pub fn transpose(&self) -> Result<Var<'t>> {
        let v = self.value();
        if v.rank() != 2 {
            return Err(Error::Shape(format!("transpose needs a matrix, got {:?}", v.shape())));
        }
        let (r, c) = (v.shape()[0], v.shape()[1]);
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = v.data()[i * c + j];
            }
        }
        Ok(self.unary(Op::Transpose(self.id), Tensor::from_parts(vec![c, r], data)))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var<'t>> {
        let t = (*self.value()).clone().reshaped(shape)?;
        Ok(self.unary(Op::Reshape(self.id), t))
    }

    fn reduce(&self, axis: Option<usize>, what: &str, f: impl Fn(&[f64]) -> (f64, usize)) -> Result<(Tensor, Vec<usize>)> {
        let v = self.value();
        match axis {
            None => {
                let (x, i) = f(v.data());
                Ok((Tensor::scalar(x), vec![i]))
            }
            Some(ax) if ax < v.rank() => {
                let (outer, len, inner) = axis_view(v.shape(), ax);
                let mut data = Vec::with_capacity(outer * inner);
                let mut arg = Vec::with_capacity(outer * inner);
                let mut buf = vec![0.0; len];
                for o in 0..outer {
                    for i in 0..inner {
                        for (l, b) in buf.iter_mut().enumerate() {
                            *b = v.data()[(o * len + l) * inner + i];
                        }
                        let (x, l) = f(&buf);
                        data.push(x);
                        arg.push((o * len + l) * inner + i);
                    }
                }
                let mut shape = v.shape().to_vec();
                shape.remove(ax);
                Ok((Tensor::from_parts(shape, data), arg))
            }
            Some(ax) => Err(Error::Shape(format!("{what}: axis {ax} out of range for {:?}", v.shape()))),
        }
    }

    pub fn sum(&self, axis: Option<usize>) -> Result<Var<'t>> {
        let (t, _) = self.reduce(axis, "sum", |xs| (xs.iter().sum(), 0))?;
        Ok(self.unary(Op::Sum(self.id, axis), t))
    }

    pub fn mean(&self, axis: Option<usize>) -> Result<Var<'t>> {
        let (t, _) = self.reduce(axis, "mean", |xs| (xs.iter().sum::<f64>() / xs.len().max(1) as f64, 0))?;
        Ok(self.unary(Op::Mean(self.id, axis), t))
    }

    /// Maximum along an axis; ties go to the lowest index.
    pub fn max(&self, axis: Option<usize>) -> Result<Var<'t>> {
        let (t, arg) = self.reduce(axis, "max", |xs| {
            let i = super::argmax(xs);
            (xs[i], i)
        })?;
        Ok(self.unary(Op::Max(self.id, arg), t))
    }

    /// Flat indices of the maxima recorded by a previous `max` call.
    pub fn argmax_indices(&self) -> Option<Vec<usize>> {
        match &self.tape.nodes.borrow()[self.id].op {
            Op::Max(_, arg) => Some(arg.clone()),
            _ => None,
        }
    }

    fn row_map(&self, what: &str, f: impl Fn(&[f64], &mut [f64])) -> Result<Tensor> {
        let v = self.value();
        let cols = *v
            .shape()
            .last()
            .ok_or_else(|| Error::Shape(format!("{what} of a scalar")))?;
        let mut data = vec![0.0; v.numel()];
        for (src, dst) in v.data().chunks(cols).zip(data.chunks_mut(cols)) {
            f(src, dst);
        }
        Ok(Tensor::from_parts(v.shape().to_vec(), data))
    }

    /// Softmax over the last axis.
    pub fn softmax(&self) -> Result<Var<'t>> {
        let t = self.row_map("softmax", |src, dst| {
            let m = src.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (d, s) in dst.iter_mut().zip(src) {
                *d = (s - m).exp();
                z += *d;
            }
            dst.iter_mut().for_each(|d| *d /= z);
        })?;
        Ok(self.unary(Op::SoftmaxRows(self.id), t))
    }

    pub fn log_softmax(&self) -> Result<Var<'t>> {
        let t = self.row_map("log_softmax", |src, dst| {
            let m = src.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + src.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
            for (d, s) in dst.iter_mut().zip(src) {
                *d = s - lse;
            }
        })?;
        Ok(self.unary(Op::LogSoftmaxRows(self.id), t))
    }

    /// Gathers entries by flat index into a vector.
    pub fn select(&self, flat: &[usize]) -> Result<Var<'t>> {
        let v = self.value();
        if let Some(&bad) = flat.iter().find(|&&i| i >= v.numel()) {
            return Err(Error::Shape(format!("select index {bad} out of {}", v.numel())));
        }
        let data = flat.iter().map(|&i| v.data()[i]).collect();
        Ok(self.unary(Op::Select(self.id, flat.to_vec()), Tensor::vector(data)))
    }

    /// Concatenates matrices with equal row counts along columns.
    pub fn concat_cols(parts: &[Var<'t>]) -> Result<Var<'t>> {
        let first = parts.first().ok_or_else(|| Error::Shape("concat of nothing".into()))?;
        let tape = first.tape;
        let values: Vec<Rc<Tensor>> = parts.iter().map(|p| p.value()).collect();
        let rows = values[0].shape()[0];
        if values.iter().any(|v| v.rank() != 2 || v.shape()[0] != rows) {
            return Err(Error::Shape("concat_cols needs matrices with equal rows".into()));
        }
        let total: usize = values.iter().map(|v| v.shape()[1]).sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for v in &values {
                let w = v.shape()[1];
                data.extend_from_slice(&v.data()[r * w..(r + 1) * w]);
            }
        }
        let rg = parts.iter().any(|p| p.requires_grad());
        let ids = parts.iter().map(|p| p.id).collect();
        Ok(tape.push(Tensor::from_parts(vec![rows, total], data), Op::ConcatCols(ids), rg))
    }

    /// `out[i][j] = self[i] * other[j]` for two vectors.
    pub fn outer(&self, other: Var<'t>) -> Result<Var<'t>> {
        let (u, v) = (self.value(), other.value());
        if u.rank() != 1 || v.rank() != 1 {
            return Err(Error::Shape("outer needs two vectors".into()));
        }
        let data = u
            .data()
            .iter()
            .flat_map(|a| v.data().iter().map(move |b| a * b))
            .collect();
        let t = Tensor::from_parts(vec![u.numel(), v.numel()], data);
        Ok(self.tape.push(t, Op::Outer(self.id, other.id), self.requires_grad() || other.requires_grad()))
    }

    /// Per-channel `n x n` matrix product of two `(n*n) x h` tensors whose row
    /// `i*n + j` holds the channel vector at position `(i, j)`.
    pub fn channel_matmul(&self, other: Var<'t>, n: usize) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        if a.shape() != b.shape() || a.rank() != 2 || a.shape()[0] != n * n {
            return Err(Error::Shape(format!(
                "channel_matmul: {:?} vs {:?} for n={n}",
                a.shape(),
                b.shape()
            )));
        }
        let h = a.shape()[1];
        let (av, bv) = (a.data(), b.data());
        let mut out = vec![0.0; n * n * h];
        for i in 0..n {
            for l in 0..n {
                let ar = &av[(i * n + l) * h..(i * n + l + 1) * h];
                for j in 0..n {
                    let br = &bv[(l * n + j) * h..(l * n + j + 1) * h];
                    let dst = &mut out[(i * n + j) * h..(i * n + j + 1) * h];
                    for ((d, x), y) in dst.iter_mut().zip(ar).zip(br) {
                        *d += x * y;
                    }
                }
            }
        }
        let t = Tensor::from_parts(vec![n * n, h], out);
        Ok(self.tape.push(t, Op::ChannelMatMul(self.id, other.id, n), self.requires_grad() || other.requires_grad()))
    }

    /// Swaps the two spatial axes of an `(n*n) x h` tensor.
    pub fn spatial_transpose(&self, n: usize) -> Result<Var<'t>> {
        let v = self.value();
        if v.rank() != 2 || v.shape()[0] != n * n {
            return Err(Error::Shape(format!("spatial_transpose: {:?} for n={n}", v.shape())));
        }
        let h = v.shape()[1];
        let t = Tensor::from_parts(v.shape().to_vec(), spatial_transpose(v.data(), n, h));
        Ok(self.unary(Op::SpatialTranspose(self.id, n), t))
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
