//! Explainer training: re-weighted distribution loss, Concrete relaxation and
//! counterfactual loss against a frozen classifier.
//!
//! Per instance and step: draw `β̄ ~ U[0, ½]`, corrupt the clean graph,
//! denoise, and score
//!
//! ```text
//! L_dist = (1 - 2β̄ + 1/T) · BCE(p̂, A0)          over unordered pairs
//! L_cf   = -log(clamp(1 - f(G̃)[ŷ], ε, 1))       G̃ = Concrete(p̂, λ)
//! L      = L_dist + α · L_cf
//! ```
//!
//! where `ŷ` is the classifier's prediction on the clean graph. Model-level
//! training uses `L_dist` only.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::diffusion::{self, NoiseLevel, DEFAULT_STEPS};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::gcn::Gcn;
use crate::graph::{extract_computational_subgraph, pairs, Dataset, Graph, Task};
use crate::ppgn::{Ppgn, PpgnConfig};
use crate::rng::{self, Rng};
use crate::tensor::{Adam, ExponentialDecay, GradBuffer, Tape, Tensor, Var};

/// Clamp applied inside every log.
pub const DEFAULT_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Counterfactual,
    ModelLevel,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Counterfactual => "counterfactual",
            Mode::ModelLevel => "model-level",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "counterfactual" | "cf" => Some(Mode::Counterfactual),
            "model-level" | "model" => Some(Mode::ModelLevel),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub alpha: f64,
    /// Diffusion step count `T` used in the loss weight.
    pub steps: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub gamma: f64,
    /// Concrete temperature `λ`.
    pub lambda: f64,
    pub eps: f64,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            steps: DEFAULT_STEPS,
            epochs: 300,
            batch: 32,
            lr: 1e-3,
            gamma: 0.998,
            lambda: 1.0,
            eps: DEFAULT_EPS,
            seed: 0,
            mode: Mode::Counterfactual,
        }
    }
}

/// Published per-dataset denoiser sizes, batch size and counterfactual weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub hidden: usize,
    pub blocks: usize,
    pub batch: usize,
    pub alpha: f64,
}

impl Preset {
    /// `tree-cycle`, `tree-grid` or `ba-3motif`.
    pub fn for_kind(kind: &str) -> Option<Self> {
        let (hidden, blocks, batch, alpha) = match kind {
            "tree-cycle" => (64, 6, 32, 0.1),
            "tree-grid" => (128, 8, 32, 0.05),
            "ba-3motif" => (128, 6, 32, 0.05),
            _ => return None,
        };
        Some(Self { hidden, blocks, batch, alpha })
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) {
            return Err(Error::Param(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Param(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::Param(format!("eps must lie in (0, 0.5), got {}", self.eps)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Param(format!("lr must be positive and finite, got {}", self.lr)));
        }
        if self.steps == 0 || self.batch == 0 {
            return Err(Error::Param("steps and batch must be positive".into()));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Param(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        Ok(())
    }
}

/// One graph to explain with the classifier's prediction on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    /// Graph index (graph tasks) or node index (node tasks) in the dataset.
    pub id: usize,
    /// The graph itself, or the computational subgraph with its center set.
    pub graph: Graph,
    /// Dataset node index of each node of `graph`.
    pub nodes: Vec<usize>,
    /// Predicted class on the unmodified graph.
    pub label: usize,
    /// Predicted probability of `label`.
    pub prob: f64,
}

/// Explanation instances for dataset items. Node tasks explain motif members
/// (ground-truth class other than 0) through their `hops`-hop subgraphs;
/// graph tasks explain every listed graph.
pub fn instances(ds: &Dataset, gcn: &Gcn, items: &[usize], hops: usize) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    for &i in items {
        let (graph, nodes) = match ds.task {
            Task::GraphClassification => (ds.graphs[i].clone(), (0..ds.graphs[i].n()).collect()),
            Task::NodeClassification => {
                if ds.label_of(i) == 0 {
                    continue;
                }
                let sub = extract_computational_subgraph(&ds.graphs[0], i, hops)?;
                (sub.graph, sub.mapping)
            }
        };
        let p = gcn.predict(&graph)?;
        out.push(Instance {
            id: i,
            label: p.label,
            prob: p.probs[p.label],
            graph,
            nodes,
        });
    }
    Ok(out)
}

/// `1 - 2β̄ + 1/T`.
pub fn loss_weight(level: NoiseLevel, steps: usize) -> f64 {
    1.0 - 2.0 * level.beta_bar + 1.0 / steps as f64
}

fn upper_indices(n: usize) -> Vec<usize> {
    pairs(n).map(|(i, j)| i * n + j).collect()
}

/// Weighted binary cross-entropy between `dense` and the clean adjacency,
/// averaged over unordered pairs.
pub fn distribution_loss<'t>(dense: Var<'t>, g0: &Graph, level: NoiseLevel, steps: usize, eps: f64) -> Result<Var<'t>> {
    let tape = dense.tape();
    let n = g0.n();
    if dense.shape() != [n, n] {
        return Err(Error::Shape(format!("dense {:?} for a {n}-node graph", dense.shape())));
    }
    if dense.value().data().iter().any(|v| v.is_nan()) {
        return Err(Error::Numeric("NaN in denoiser output".into()));
    }
    let idx = upper_indices(n);
    if idx.is_empty() {
        return Ok(tape.constant(Tensor::scalar(0.0)));
    }
    let target: Vec<f64> = pairs(n).map(|(i, j)| f64::from(u8::from(g0.has_edge(i, j)))).collect();
    let anti: Vec<f64> = target.iter().map(|a| 1.0 - a).collect();
    let p = dense.select(&idx)?.clamp(eps, 1.0 - eps);
    let pos = p.log()?.mul(tape.constant(Tensor::vector(target)))?;
    let neg = p.rsub(1.0).log()?.mul(tape.constant(Tensor::vector(anti)))?;
    Ok(pos.add(neg)?.mean(None)?.scale(-loss_weight(level, steps)))
}

/// Concrete relaxation of independent Bernoulli edges:
/// `σ((log p - log(1-p) + log u - log(1-u)) / λ)` per unordered pair, mirrored,
/// zero diagonal. The noise `u` is drawn in lexicographic pair order.
pub fn sample_concrete<'t>(dense: Var<'t>, lambda: f64, eps: f64, rng: &mut Rng) -> Result<Var<'t>> {
    let n = dense.shape()[0];
    let noise: Vec<f64> = pairs(n)
        .map(|_| {
            let u: f64 = rng.gen::<f64>().clamp(1e-12, 1.0 - 1e-12);
            u.ln() - (1.0 - u).ln()
        })
        .collect();
    concrete_with_noise(dense, lambda, eps, &noise)
}

/// [`sample_concrete`] with the logistic noise `log u - log(1-u)` supplied.
pub fn concrete_with_noise<'t>(dense: Var<'t>, lambda: f64, eps: f64, noise: &[f64]) -> Result<Var<'t>> {
    let tape = dense.tape();
    let n = dense.shape()[0];
    let idx = upper_indices(n);
    if noise.len() != idx.len() {
        return Err(Error::Shape(format!("{} noise values for {} pairs", noise.len(), idx.len())));
    }
    if idx.is_empty() {
        return Ok(tape.constant(Tensor::zeros(&[n, n])));
    }
    let p = dense.select(&idx)?.clamp(eps, 1.0 - eps);
    let logit = p.log()?.sub(p.rsub(1.0).log()?)?;
    let relaxed = logit
        .add(tape.constant(Tensor::vector(noise.to_vec())))?
        .scale(1.0 / lambda)
        .sigmoid();
    // scatter back: slot 0 holds the zero used on the diagonal
    let padded = Var::concat_cols(&[tape.constant(Tensor::zeros(&[1, 1])), relaxed.reshape(&[1, idx.len()])?])?;
    let mut slot = vec![0usize; n * n];
    for (k, (i, j)) in pairs(n).enumerate() {
        slot[i * n + j] = k + 1;
        slot[j * n + i] = k + 1;
    }
    padded.select(&slot)?.reshape(&[n, n])
}

/// `-log(clamp(1 - f(G̃)[y], ε, 1))` through a frozen classifier.
pub fn counterfactual_loss<'t>(
    gcn: &Gcn,
    frozen: &[Var<'t>],
    relaxed: Var<'t>,
    x: Var<'t>,
    center: Option<usize>,
    label: usize,
    eps: f64,
) -> Result<Var<'t>> {
    let p = gcn.instance_probs(frozen, relaxed, x, center)?.select(&[label])?;
    Ok(p.rsub(1.0).clamp(eps, 1.0).log()?.sum(None)?.neg())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub epoch: usize,
    pub l_dist: f64,
    pub l_cf: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedExplainer {
    /// Final parameters, or the last finite ones if training diverged.
    pub ppgn: Ppgn,
    /// Mean per-instance losses per completed epoch.
    pub trace: Vec<LossRecord>,
    /// Set when a non-finite loss or gradient stopped training early.
    pub diverged: Option<String>,
}

/// Per-instance losses and the gradient of `(L_dist + α L_cf) * scale`.
pub fn instance_step(
    ppgn: &Ppgn,
    gcn: &Gcn,
    inst: &Instance,
    cfg: &TrainConfig,
    rng: &mut Rng,
    scale: f64,
) -> Result<(f64, f64, GradBuffer)> {
    let g0 = &inst.graph;
    let level = diffusion::sample_noise_level(rng, cfg.steps);
    let g_t = diffusion::corrupt(g0, level, rng);
    let mut concrete_rng = rng::seeded(rng.gen());
    let x = ppgn.node_features(g0)?;
    let tape = Tape::new();
    let bound = ppgn.params().bind(&tape);
    let dense = ppgn.denoise_var(&bound, &g_t, &x, level)?;
    let l_dist = distribution_loss(dense, g0, level, cfg.steps, cfg.eps)?;
    let mut total = l_dist;
    let mut l_cf_value = 0.0;
    if cfg.mode == Mode::Counterfactual {
        let frozen = gcn.params().bind_frozen(&tape);
        if cfg.alpha > 0.0 {
            let relaxed = sample_concrete(dense, cfg.lambda, cfg.eps, &mut concrete_rng)?;
            let xg = tape.constant(g0.features_tensor());
            let l_cf = counterfactual_loss(gcn, &frozen, relaxed, xg, g0.center, inst.label, cfg.eps)?;
            l_cf_value = l_cf.value().item();
            total = l_dist.add(l_cf.scale(cfg.alpha))?;
        } else {
            // logged only; nothing flows into the objective
            let side = Tape::new();
            let frozen = gcn.params().bind_frozen(&side);
            let d = side.constant((*dense.value()).clone());
            let relaxed = sample_concrete(d, cfg.lambda, cfg.eps, &mut concrete_rng)?;
            let xg = side.constant(g0.features_tensor());
            l_cf_value = counterfactual_loss(gcn, &frozen, relaxed, xg, g0.center, inst.label, cfg.eps)?.value().item();
        }
    }
    let objective = total.scale(scale);
    let grads = tape.backward(objective)?;
    let mut buf = GradBuffer::zeros_like(ppgn.params());
    buf.accumulate(&grads, &bound);
    Ok((l_dist.value().item(), l_cf_value, buf))
}

/// Trains a fresh denoiser on `instances`. Each epoch visits every instance
/// once in a seeded order; gradients are averaged per batch and applied with
/// Adam at learning rate `lr · γ^epoch`.
pub fn train_explainer(
    instances: &[Instance],
    gcn: &Gcn,
    ppgn_cfg: &PpgnConfig,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<TrainedExplainer> {
    train_explainer_from(Ppgn::new(ppgn_cfg.clone(), cfg.seed)?, instances, gcn, cfg, exec)
}

/// Continues training an existing denoiser.
pub fn train_explainer_from(
    mut ppgn: Ppgn,
    instances: &[Instance],
    gcn: &Gcn,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<TrainedExplainer> {
    cfg.validate()?;
    if instances.is_empty() {
        return Err(Error::Param("no training instances".into()));
    }
    if ppgn.config().feature_dim != gcn.feature_dim() {
        return Err(Error::Contract(format!(
            "denoiser feature dim {} differs from classifier's {}",
            ppgn.config().feature_dim,
            gcn.feature_dim()
        )));
    }
    let schedule = ExponentialDecay { lr0: cfg.lr, gamma: cfg.gamma };
    let mut adam = Adam::new(ppgn.params(), cfg.lr);
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        adam.lr = schedule.lr_at(epoch);
        let mut order: Vec<usize> = (0..instances.len()).collect();
        order.shuffle(&mut rng::stream(cfg.seed, "explainer-epoch", epoch as u64));
        let (mut sum_dist, mut sum_cf) = (0.0, 0.0);
        for batch in order.chunks(cfg.batch) {
            let scale = 1.0 / batch.len() as f64;
            let parts = exec.map(batch, |_, &k| {
                let mut r = rng::stream(cfg.seed, "explainer-step", (epoch * instances.len() + k) as u64);
                instance_step(&ppgn, gcn, &instances[k], cfg, &mut r, scale)
            });
            let mut grads = GradBuffer::zeros_like(ppgn.params());
            let mut bad = None;
            for (part, &k) in parts.into_iter().zip(batch) {
                let (ld, lc, g) = part?;
                if !ld.is_finite() || !lc.is_finite() || !g.is_finite() {
                    bad = Some(format!(
                        "non-finite loss at epoch {epoch}, instance {} (l_dist {ld}, l_cf {lc})",
                        instances[k].id
                    ));
                    break;
                }
                sum_dist += ld;
                sum_cf += lc;
                grads.add(&g);
            }
            if let Some(msg) = bad {
                log::error!("{msg}");
                return Ok(TrainedExplainer { ppgn, trace, diverged: Some(msg) });
            }
            let before = ppgn.params().clone();
            adam.step(ppgn.params_mut(), &grads);
            if ppgn.params().values().iter().any(|t| t.data().iter().any(|v| !v.is_finite())) {
                *ppgn.params_mut() = before;
                let msg = format!("non-finite parameters after the update at epoch {epoch}");
                return Ok(TrainedExplainer { ppgn, trace, diverged: Some(msg) });
            }
        }
        let k = instances.len() as f64;
        let alpha = if cfg.mode == Mode::Counterfactual { cfg.alpha } else { 0.0 };
        let rec = LossRecord {
            epoch,
            l_dist: sum_dist / k,
            l_cf: sum_cf / k,
            total: (sum_dist + alpha * sum_cf) / k,
        };
        log::debug!("epoch {epoch}: l_dist {:.5} l_cf {:.5} total {:.5}", rec.l_dist, rec.l_cf, rec.total);
        trace.push(rec);
    }
    Ok(TrainedExplainer { ppgn, trace, diverged: None })
}

/// Writes the loss trace as `epoch,l_dist,l_cf,total`.
pub fn write_loss_csv(trace: &[LossRecord], mut w: impl Write) -> Result<()> {
    writeln!(w, "epoch,l_dist,l_cf,total")?;
    for r in trace {
        writeln!(w, "{},{},{},{}", r.epoch, r.l_dist, r.l_cf, r.total)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_of(v: Var<'_>) -> f64 {
        v.value().item()
    }

    #[test]
    fn weight_endpoints() {
        let half = NoiseLevel::new(0.5, 100).unwrap();
        assert!((loss_weight(half, 100) - 0.01).abs() < 1e-15);
        assert_eq!(loss_weight(NoiseLevel::clean(), 20), 1.0 + 1.0 / 20.0);
    }

    #[test]
    fn perfect_prediction_is_near_zero() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let tape = Tape::new();
        let dense = tape.constant(g.adjacency_tensor());
        let l = distribution_loss(dense, &g, NoiseLevel::clean(), 100, DEFAULT_EPS).unwrap();
        let expected = -(1.0f64 - DEFAULT_EPS).ln() * 1.01;
        assert!((scalar_of(l) - expected).abs() < 1e-15);
    }

    #[test]
    fn uniform_half_gives_log_two() {
        let g = Graph::from_edges(3, &[(0, 1)]).unwrap();
        let tape = Tape::new();
        let dense = tape.constant(Tensor::full(&[3, 3], 0.5));
        let l = distribution_loss(dense, &g, NoiseLevel::new(0.5, 100).unwrap(), 100, DEFAULT_EPS).unwrap();
        assert!((scalar_of(l) - 0.01 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn median_noise_returns_p() {
        let tape = Tape::new();
        let p = Tensor::from_rows(&[vec![0.0, 0.3, 0.9], vec![0.3, 0.0, 0.6], vec![0.9, 0.6, 0.0]]).unwrap();
        let out = concrete_with_noise(tape.constant(p.clone()), 1.0, DEFAULT_EPS, &[0.0; 3]).unwrap();
        let v = out.value();
        for i in 0..3 {
            for j in 0..3 {
                assert!((v.at2(i, j) - p.at2(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn counterfactual_loss_values() {
        // a 2-class graph classifier whose readout is forced to fixed logits
        let mut gcn = Gcn::new(1, 2, Task::GraphClassification, 2, 2, 0).unwrap();
        let tape = Tape::new();
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        for (logit, expected) in [(0.0, 2f64.ln()), (60.0, -DEFAULT_EPS.ln()), (-60.0, 0.0)] {
            let ck = {
                let mut ck = gcn.to_checkpoint();
                let w = ck.tensors.index_of("gcn.readout.weight").unwrap();
                let b = ck.tensors.index_of("gcn.readout.bias").unwrap();
                let vals = ck.tensors.clone();
                let mut fresh = crate::tensor::ParamSet::new();
                for (k, (name, t)) in vals.iter().enumerate() {
                    let t = if k == w {
                        Tensor::zeros(t.shape())
                    } else if k == b {
                        Tensor::vector(vec![logit, 0.0])
                    } else {
                        t.clone()
                    };
                    fresh.push(name, t);
                }
                ck.tensors = fresh;
                ck
            };
            gcn = Gcn::from_checkpoint(&ck).unwrap();
            let frozen = gcn.params().bind_frozen(&tape);
            let l = counterfactual_loss(
                &gcn,
                &frozen,
                tape.constant(g.adjacency_tensor()),
                tape.constant(g.features_tensor()),
                None,
                0,
                DEFAULT_EPS,
            )
            .unwrap();
            assert!((scalar_of(l) - expected).abs() < 1e-9, "logit {logit}: {}", scalar_of(l));
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig { alpha: -1.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { lambda: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { eps: 0.5, ..Default::default() }.validate().is_err());
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn loss_csv_header() {
        let mut buf = Vec::new();
        let rec = LossRecord { epoch: 0, l_dist: 0.5, l_cf: 0.25, total: 0.525 };
        write_loss_csv(&[rec], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "epoch,l_dist,l_cf,total\n0,0.5,0.25,0.525\n");
    }

    fn toy_setup() -> (Vec<Instance>, Gcn, PpgnConfig) {
        let graphs: Vec<Graph> = (0..4)
            .map(|k| {
                let mut e = vec![(0, 1), (1, 2), (2, 3)];
                if k % 2 == 0 {
                    e.push((0, 3));
                }
                Graph::from_edges(4 + k % 2, &e).unwrap()
            })
            .collect();
        let gcn = Gcn::new(1, 2, Task::GraphClassification, 2, 8, 3).unwrap();
        let inst = graphs
            .into_iter()
            .enumerate()
            .map(|(id, graph)| {
                let p = gcn.predict(&graph).unwrap();
                let nodes = (0..graph.n()).collect();
                Instance { id, label: p.label, prob: p.probs[p.label], graph, nodes }
            })
            .collect();
        let pc = PpgnConfig { blocks: 2, hidden: 8, time_hidden: 4, ..Default::default() };
        (inst, gcn, pc)
    }

    fn held_out_loss(ppgn: &Ppgn, inst: &[Instance]) -> f64 {
        let mut total = 0.0;
        for (k, it) in inst.iter().enumerate() {
            for &bb in &[0.05, 0.1, 0.2] {
                let level = NoiseLevel::new(bb, 100).unwrap();
                let g_t = diffusion::corrupt(&it.graph, level, &mut rng::stream(5, "held-out", k as u64));
                let tape = Tape::new();
                let bound = ppgn.params().bind(&tape);
                let x = ppgn.node_features(&it.graph).unwrap();
                let dense = ppgn.denoise_var(&bound, &g_t, &x, level).unwrap();
                total += distribution_loss(dense, &it.graph, level, 100, DEFAULT_EPS).unwrap().value().item();
            }
        }
        total
    }

    #[test]
    fn distribution_loss_decreases() {
        let (inst, gcn, pc) = toy_setup();
        let cfg = TrainConfig { epochs: 80, batch: 2, lr: 0.01, alpha: 0.0, gamma: 1.0, ..Default::default() };
        let init = Ppgn::new(pc, cfg.seed).unwrap();
        let before = held_out_loss(&init, &inst);
        let out = train_explainer_from(init, &inst, &gcn, &cfg, Exec::Sequential).unwrap();
        assert!(out.diverged.is_none());
        let after = held_out_loss(&out.ppgn, &inst);
        assert!(after < 0.7 * before, "{before} -> {after}");
    }

    #[test]
    fn alpha_zero_ignores_the_classifier() {
        let (inst, gcn, pc) = toy_setup();
        let other = Gcn::new(1, 2, Task::GraphClassification, 2, 8, 99).unwrap();
        let cfg = TrainConfig { epochs: 3, batch: 2, alpha: 0.0, ..Default::default() };
        let a = train_explainer(&inst, &gcn, &pc, &cfg, Exec::Sequential).unwrap();
        let b = train_explainer(&inst, &other, &pc, &cfg, Exec::Sequential).unwrap();
        assert_eq!(a.ppgn, b.ppgn);
        let da: Vec<f64> = a.trace.iter().map(|r| r.total).collect();
        let db: Vec<f64> = b.trace.iter().map(|r| r.total).collect();
        assert_eq!(da, db);
    }

    #[test]
    fn classifier_receives_no_gradient() {
        let (inst, gcn, pc) = toy_setup();
        let before = gcn.clone();
        let cfg = TrainConfig { epochs: 2, batch: 4, alpha: 1.0, ..Default::default() };
        train_explainer(&inst, &gcn, &pc, &cfg, Exec::Sequential).unwrap();
        assert_eq!(gcn, before);
        // frozen views never appear in the gradient
        let tape = Tape::new();
        let frozen = gcn.params().bind_frozen(&tape);
        assert!(frozen.iter().all(|v| !v.requires_grad()));
    }

    #[test]
    fn parallel_matches_sequential() {
        let (inst, gcn, pc) = toy_setup();
        let cfg = TrainConfig { epochs: 2, batch: 3, alpha: 0.5, ..Default::default() };
        let a = train_explainer(&inst, &gcn, &pc, &cfg, Exec::Sequential).unwrap();
        let b = train_explainer(&inst, &gcn, &pc, &cfg, Exec::Parallel).unwrap();
        assert_eq!(a.ppgn, b.ppgn);
    }
}
