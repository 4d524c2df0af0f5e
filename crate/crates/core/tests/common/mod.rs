//! Gradient checks shared by the integration and acceptance suites. Each check
//! builds a random 5-6 node problem, differentiates it on the tape, and
//! compares against central differences from the oracle crate.

#![allow(dead_code)]

use d4x_core::diffusion::NoiseLevel;
use d4x_core::gcn::Gcn;
use d4x_core::graph::{pairs, Graph, Task};
use d4x_core::ppgn::{Ppgn, PpgnConfig};
use d4x_core::rng::{self, Rng};
use d4x_core::tensor::{ParamSet, Tape, Tensor, Var};
use d4x_core::train::{concrete_with_noise, counterfactual_loss, distribution_loss};
use d4x_oracles::{finite_diff, max_relative_error};
use rand::Rng as _;

pub const FD_STEP: f64 = 1e-6;
/// Components smaller than this are compared absolutely.
pub const REL_FLOOR: f64 = 1e-5;

fn random_graph(r: &mut Rng, n: usize) -> Graph {
    let edges: Vec<(usize, usize)> = pairs(n).filter(|_| r.gen_bool(0.4)).collect();
    Graph::from_edges(n, &edges).unwrap()
}

fn relaxed(r: &mut Rng, n: usize) -> Vec<f64> {
    pairs(n).map(|_| r.gen_range(0.05..0.95)).collect()
}

fn symmetric(n: usize, upper: &[f64]) -> Tensor {
    let mut t = Tensor::zeros(&[n, n]);
    for (k, (i, j)) in pairs(n).enumerate() {
        t.data_mut()[i * n + j] = upper[k];
        t.data_mut()[j * n + i] = upper[k];
    }
    t
}

/// d/d(upper entry) from a full-matrix gradient.
fn fold_symmetric(n: usize, full: &[f64]) -> Vec<f64> {
    pairs(n).map(|(i, j)| full[i * n + j] + full[j * n + i]).collect()
}

fn flatten(params: &ParamSet) -> Vec<f64> {
    params.values().iter().flat_map(|t| t.data().to_vec()).collect()
}

fn unflatten(template: &ParamSet, flat: &[f64]) -> ParamSet {
    let mut out = ParamSet::new();
    let mut at = 0;
    for (name, t) in template.iter() {
        let k = t.numel();
        out.push(name, Tensor::new(t.shape().to_vec(), flat[at..at + k].to_vec()).unwrap());
        at += k;
    }
    out
}

/// GCN probability of a random class w.r.t. relaxed adjacency entries and all
/// parameters. Returns the max relative error.
pub fn gcn_trial(seed: u64) -> f64 {
    let mut r = rng::stream(seed, "grad-gcn", 0);
    let n = r.gen_range(5..=6);
    let task = if r.gen_bool(0.5) { Task::GraphClassification } else { Task::NodeClassification };
    let gcn = Gcn::new(2, 3, task, 3, 6, seed).unwrap();
    let x = Tensor::new(vec![n, 2], (0..2 * n).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap();
    let upper = relaxed(&mut r, n);
    let class = r.gen_range(0..3);
    let center = (task == Task::NodeClassification).then(|| r.gen_range(0..n));
    let eval = |params: &ParamSet, upper: &[f64]| -> f64 {
        let tape = Tape::new();
        let bound = params.bind_frozen(&tape);
        let p = gcn
            .instance_probs(&bound, tape.constant(symmetric(n, upper)), tape.constant(x.clone()), center)
            .unwrap();
        p.value().data()[class]
    };
    let tape = Tape::new();
    let bound = gcn.params().bind(&tape);
    let adj = tape.param(symmetric(n, &upper));
    let p = gcn.instance_probs(&bound, adj, tape.constant(x.clone()), center).unwrap();
    let target = p.select(&[class]).unwrap().sum(None).unwrap();
    let grads = tape.backward(target).unwrap();
    let mut analytic = fold_symmetric(n, grads.wrt(adj).unwrap());
    for v in &bound {
        analytic.extend_from_slice(grads.wrt(*v).unwrap());
    }
    let k = upper.len();
    let mut point = upper.clone();
    point.extend(flatten(gcn.params()));
    let numeric = finite_diff(|z| eval(&unflatten(gcn.params(), &z[k..]), &z[..k]), &point, FD_STEP);
    max_relative_error(&analytic, &numeric, REL_FLOOR)
}

/// Weighted sum of denoiser outputs w.r.t. every denoiser parameter.
pub fn ppgn_trial(seed: u64) -> f64 {
    let mut r = rng::stream(seed, "grad-ppgn", 0);
    let n = r.gen_range(5..=6);
    let center_channel = r.gen_bool(0.5);
    let cfg = PpgnConfig { blocks: 2, hidden: 4, time_hidden: 3, feature_dim: 1, center_channel };
    let ppgn = Ppgn::new(cfg, seed).unwrap();
    let mut g = random_graph(&mut r, n);
    if center_channel {
        g.center = Some(r.gen_range(0..n));
    }
    let x = ppgn.node_features(&g).unwrap();
    let level = NoiseLevel::new(r.gen_range(0.0..0.5), 100).unwrap();
    let weights: Vec<f64> = (0..n * n).map(|_| r.gen_range(-1.0..1.0)).collect();
    // zero-initialized biases meet zero inputs exactly at a ReLU kink
    let jittered: Vec<f64> = flatten(ppgn.params()).iter().map(|v| v + r.gen_range(-0.1..0.1)).collect();
    let params = unflatten(ppgn.params(), &jittered);
    fn objective<'t>(ppgn: &Ppgn, g: &Graph, x: &Tensor, level: NoiseLevel, w: &[f64], bound: &[Var<'t>]) -> Var<'t> {
        let n = g.n();
        let tape = bound[0].tape();
        let dense = ppgn.denoise_var(bound, g, x, level).unwrap();
        dense.mul(tape.constant(Tensor::new(vec![n, n], w.to_vec()).unwrap())).unwrap().sum(None).unwrap()
    }
    let tape = Tape::new();
    let bound = params.bind(&tape);
    let grads = tape.backward(objective(&ppgn, &g, &x, level, &weights, &bound)).unwrap();
    let analytic: Vec<f64> = bound.iter().flat_map(|v| grads.wrt(*v).unwrap().to_vec()).collect();
    let numeric = finite_diff(
        |z| {
            let params = unflatten(ppgn.params(), z);
            let tape = Tape::new();
            let bound = params.bind_frozen(&tape);
            objective(&ppgn, &g, &x, level, &weights, &bound).value().item()
        },
        &jittered,
        FD_STEP,
    );
    max_relative_error(&analytic, &numeric, REL_FLOOR)
}

/// Distribution loss w.r.t. the dense prediction.
pub fn dist_loss_trial(seed: u64) -> f64 {
    let mut r = rng::stream(seed, "grad-dist", 0);
    let n = r.gen_range(5..=6);
    let g = random_graph(&mut r, n);
    let level = NoiseLevel::new(r.gen_range(0.0..0.5), 100).unwrap();
    let upper = relaxed(&mut r, n);
    let eval = |u: &[f64]| -> f64 {
        let tape = Tape::new();
        distribution_loss(tape.constant(symmetric(n, u)), &g, level, 100, 1e-7).unwrap().value().item()
    };
    let tape = Tape::new();
    let dense = tape.param(symmetric(n, &upper));
    let loss = distribution_loss(dense, &g, level, 100, 1e-7).unwrap();
    let grads = tape.backward(loss).unwrap();
    let analytic = fold_symmetric(n, grads.wrt(dense).unwrap());
    let numeric = finite_diff(eval, &upper, FD_STEP);
    max_relative_error(&analytic, &numeric, REL_FLOOR)
}

/// Counterfactual loss through a fixed-noise Concrete sample and a frozen
/// classifier, w.r.t. the dense prediction.
pub fn cf_loss_trial(seed: u64) -> f64 {
    let mut r = rng::stream(seed, "grad-cf", 0);
    let n = r.gen_range(5..=6);
    let gcn = Gcn::new(1, 2, Task::GraphClassification, 3, 6, seed).unwrap();
    let upper = relaxed(&mut r, n);
    let noise: Vec<f64> = pairs(n)
        .map(|_| {
            let u: f64 = r.gen_range(0.01..0.99);
            u.ln() - (1.0 - u).ln()
        })
        .collect();
    let label = r.gen_range(0..2);
    let x = Tensor::ones(&[n, 1]);
    let eval = |u: &[f64]| -> f64 {
        let tape = Tape::new();
        let frozen = gcn.params().bind_frozen(&tape);
        let relaxed = concrete_with_noise(tape.constant(symmetric(n, u)), 1.0, 1e-7, &noise).unwrap();
        counterfactual_loss(&gcn, &frozen, relaxed, tape.constant(x.clone()), None, label, 1e-7)
            .unwrap()
            .value()
            .item()
    };
    let tape = Tape::new();
    let frozen = gcn.params().bind_frozen(&tape);
    let dense = tape.param(symmetric(n, &upper));
    let relaxed = concrete_with_noise(dense, 1.0, 1e-7, &noise).unwrap();
    let loss = counterfactual_loss(&gcn, &frozen, relaxed, tape.constant(x.clone()), None, label, 1e-7).unwrap();
    let grads = tape.backward(loss).unwrap();
    let analytic = fold_symmetric(n, grads.wrt(dense).unwrap());
    let numeric = finite_diff(eval, &upper, FD_STEP);
    max_relative_error(&analytic, &numeric, REL_FLOOR)
}
