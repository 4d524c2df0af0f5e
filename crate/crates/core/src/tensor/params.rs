use super::{Gradients, Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Ordered, named parameter tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: Tensor) -> usize {
        self.names.push(name.into());
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.values[i])
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Tensor] {
        &mut self.values
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::numel).sum()
    }

    /// Records every parameter as a trainable leaf.
    pub fn bind<'t>(&self, tape: &'t Tape) -> Vec<Var<'t>> {
        self.values.iter().map(|v| tape.param(v.clone())).collect()
    }

    /// Records every parameter as a constant; no gradient can reach these.
    pub fn bind_frozen<'t>(&self, tape: &'t Tape) -> Vec<Var<'t>> {
        self.values.iter().map(|v| tape.constant(v.clone())).collect()
    }
}

/// One gradient buffer per parameter. Accumulation is additive; call
/// [`GradBuffer::zero`] between optimizer steps.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBuffer {
    grads: Vec<Vec<f64>>,
}

impl GradBuffer {
    pub fn zeros_like(params: &ParamSet) -> Self {
        Self {
            grads: params.values().iter().map(|v| vec![0.0; v.numel()]).collect(),
        }
    }

    pub fn zero(&mut self) {
        self.grads.iter_mut().for_each(|g| g.iter_mut().for_each(|x| *x = 0.0));
    }

    /// Adds the gradients of `bound` (as returned by [`ParamSet::bind`]).
    pub fn accumulate(&mut self, grads: &Gradients, bound: &[Var<'_>]) {
        for (buf, v) in self.grads.iter_mut().zip(bound) {
            if let Some(g) = grads.wrt(*v) {
                buf.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
        }
    }

    pub fn add(&mut self, other: &GradBuffer) {
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.grads.iter_mut().for_each(|g| g.iter_mut().for_each(|x| *x *= s));
    }

    pub fn grads_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.grads
    }

    pub fn grads(&self) -> &[Vec<f64>] {
        &self.grads
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().flatten().all(|x| x.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.grads.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }
}
