//! Small building blocks shared by the classifier and the denoiser.

use rand::Rng as _;

use crate::error::Result;
use crate::rng::Rng;
use crate::tensor::{ParamSet, Tensor, Var};

/// Glorot-uniform weight and zero bias registered as `{name}.weight`,
/// `{name}.bias`. Returns the index of the weight; the bias follows it.
pub(crate) fn push_linear(params: &mut ParamSet, name: &str, fan_in: usize, fan_out: usize, rng: &mut Rng) -> usize {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let w = (0..fan_in * fan_out).map(|_| rng.gen_range(-a..a)).collect();
    let idx = params.push(format!("{name}.weight"), Tensor::from_parts(vec![fan_in, fan_out], w));
    params.push(format!("{name}.bias"), Tensor::zeros(&[fan_out]));
    idx
}

/// `x @ W + b` with the weight at `bound[idx]` and the bias right after it.
pub(crate) fn linear<'t>(x: Var<'t>, bound: &[Var<'t>], idx: usize) -> Result<Var<'t>> {
    x.matmul(bound[idx])?.add_row(bound[idx + 1])
}

/// Reads a metadata tensor of small non-negative integers.
pub(crate) fn meta_values(params: &ParamSet, name: &str, len: usize) -> Result<Vec<usize>> {
    let t = params.get(name).ok_or_else(|| crate::Error::Checkpoint(format!("missing metadata tensor {name}")))?;
    if t.numel() != len || t.data().iter().any(|&v| v < 0.0 || v.fract() != 0.0) {
        return Err(crate::Error::Checkpoint(format!("malformed metadata tensor {name}")));
    }
    Ok(t.data().iter().map(|&v| v as usize).collect())
}

/// Checks that the non-metadata `{prefix}*` tensors of `params` have exactly
/// the names, order and shapes of `expected`.
pub(crate) fn check_layout(expected: &ParamSet, params: &ParamSet, prefix: &str) -> Result<()> {
    let meta = format!("{prefix}meta");
    let got: Vec<(&str, &Tensor)> = params
        .iter()
        .filter(|(n, _)| n.starts_with(prefix) && *n != meta)
        .collect();
    if got.len() != expected.len() {
        return Err(crate::Error::Checkpoint(format!(
            "expected {} {prefix}* tensors, found {}",
            expected.len(),
            got.len()
        )));
    }
    for ((en, et), (gn, gt)) in expected.iter().zip(&got) {
        if en != *gn || et.shape() != gt.shape() {
            return Err(crate::Error::Checkpoint(format!(
                "tensor {gn} {:?} does not match expected {en} {:?}",
                gt.shape(),
                et.shape()
            )));
        }
    }
    Ok(())
}
