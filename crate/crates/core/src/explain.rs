//! Counterfactual explanations at a controlled modification ratio.
//!
//! A graph is corrupted, denoised to edge probabilities `p̂`, and every pair
//! gets the change score `|p̂ij - a0ij|`. The top `⌈mr · |E|⌉` pairs are
//! flipped (deleting present edges, adding absent ones) and the classifier is
//! queried again.

use std::cmp::Ordering;
use std::io::Write;

use rand::Rng as _;
use serde::Serialize;

use crate::diffusion::{self, NoiseLevel, DEFAULT_STEPS};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::gcn::Gcn;
use crate::graph::{extract_computational_subgraph, pairs, Graph};
use crate::ppgn::Ppgn;
use crate::rng::{self, Rng};
use crate::tensor::Tensor;
use crate::train::Instance;

/// Noise level used for single-view inference.
pub const DEFAULT_INFERENCE_BETA_BAR: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlipStrategy {
    /// Flip the highest-scoring pairs up to the edge budget.
    TopK,
    /// Draw each pair from `Bernoulli(p̂)`; the ratio is whatever results.
    Bernoulli,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplainConfig {
    /// Fixed inference noise level; `None` draws `β̄ ~ U[0, ½]` per view.
    pub beta_bar: Option<f64>,
    /// Number of corrupted views whose denoised matrices are averaged.
    pub num_views: usize,
    pub strategy: FlipStrategy,
    pub steps: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            beta_bar: Some(DEFAULT_INFERENCE_BETA_BAR),
            num_views: 1,
            strategy: FlipStrategy::TopK,
            steps: DEFAULT_STEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationRecord {
    /// Graph index, or center node index for node tasks.
    pub graph_id: usize,
    pub original: Graph,
    pub explanation: Graph,
    /// Dataset node index of each local node.
    pub nodes: Vec<usize>,
    pub target_mr: f64,
    /// Changed pairs divided by the original edge count.
    pub achieved_mr: f64,
    pub y_orig: usize,
    pub probs_orig: Vec<f64>,
    pub y_new: usize,
    pub probs_new: Vec<f64>,
    /// `n x n` change scores.
    pub scores: Tensor,
    pub added: Vec<(usize, usize)>,
    pub deleted: Vec<(usize, usize)>,
    /// The center node had no neighbors, so nothing could be changed.
    pub isolated: bool,
}

impl ExplanationRecord {
    pub fn p_orig(&self) -> f64 {
        self.probs_orig[self.y_orig]
    }

    pub fn p_new(&self) -> f64 {
        self.probs_new[self.y_new]
    }

    /// Drop in probability of the originally predicted class.
    pub fn probability_drop(&self) -> f64 {
        self.probs_orig[self.y_orig] - self.probs_new[self.y_orig]
    }

    pub fn is_counterfactual(&self) -> bool {
        self.y_new != self.y_orig
    }

    /// Changed pairs, highest score first, ties in lexicographic order.
    pub fn changed_by_score(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self.added.iter().chain(&self.deleted).copied().collect();
        out.sort_by(|a, b| by_score(&self.scores, *a, *b));
        out
    }

    /// One JSON object with dataset-level node indices.
    pub fn to_json_line(&self) -> String {
        let map = |v: &[(usize, usize)]| -> Vec<[usize; 2]> {
            let mut out: Vec<[usize; 2]> = v
                .iter()
                .map(|&(i, j)| {
                    let (a, b) = (self.nodes[i], self.nodes[j]);
                    [a.min(b), a.max(b)]
                })
                .collect();
            out.sort_unstable();
            out
        };
        let line = RecordLine {
            graph_id: self.graph_id,
            target_mr: self.target_mr,
            achieved_mr: self.achieved_mr,
            y_orig: self.y_orig,
            p_orig: self.p_orig(),
            y_new: self.y_new,
            p_new: self.p_new(),
            added: map(&self.added),
            deleted: map(&self.deleted),
        };
        serde_json::to_string(&line).expect("plain record serializes")
    }
}

#[derive(Serialize)]
struct RecordLine {
    graph_id: usize,
    target_mr: f64,
    achieved_mr: f64,
    y_orig: usize,
    p_orig: f64,
    y_new: usize,
    p_new: f64,
    added: Vec<[usize; 2]>,
    deleted: Vec<[usize; 2]>,
}

/// Writes records as line-delimited JSON.
pub fn write_records<'a>(records: impl IntoIterator<Item = &'a ExplanationRecord>, mut w: impl Write) -> Result<()> {
    for r in records {
        writeln!(w, "{}", r.to_json_line())?;
    }
    Ok(())
}

fn by_score(scores: &Tensor, a: (usize, usize), b: (usize, usize)) -> Ordering {
    scores.at2(b.0, b.1).total_cmp(&scores.at2(a.0, a.1)).then(a.cmp(&b))
}

/// `min(⌈mr · |E|⌉, P)`. Products within 1e-9 of an integer count as that
/// integer so that e.g. `0.1 · 30` gives 3, not 4.
pub fn flip_budget(target_mr: f64, num_edges: usize, num_pairs: usize) -> usize {
    let raw = target_mr * num_edges as f64;
    let budget = if (raw - raw.round()).abs() < 1e-9 { raw.round() } else { raw.ceil() };
    (budget.max(0.0) as usize).min(num_pairs)
}

/// All unordered pairs ordered by descending score, ties lexicographic.
pub fn ranked_pairs(scores: &Tensor) -> Vec<(usize, usize)> {
    let mut all: Vec<(usize, usize)> = pairs(scores.shape()[0]).collect();
    all.sort_by(|a, b| by_score(scores, *a, *b));
    all
}

/// `|p̂ - A0|` with a zero diagonal.
pub fn change_scores(g: &Graph, dense: &Tensor) -> Tensor {
    let n = g.n();
    let mut s = Tensor::zeros(&[n, n]);
    for (i, j) in pairs(n) {
        let v = (dense.at2(i, j) - f64::from(u8::from(g.has_edge(i, j)))).abs();
        s.data_mut()[i * n + j] = v;
        s.data_mut()[j * n + i] = v;
    }
    s
}

fn check_compat(ppgn: &Ppgn, gcn: &Gcn, g: &Graph) -> Result<()> {
    if ppgn.config().feature_dim != gcn.feature_dim() || g.feature_dim() != gcn.feature_dim() {
        return Err(Error::Contract(format!(
            "feature dims differ: denoiser {}, classifier {}, graph {}",
            ppgn.config().feature_dim,
            gcn.feature_dim(),
            g.feature_dim()
        )));
    }
    Ok(())
}

/// Denoised edge probabilities averaged over `cfg.num_views` corruptions.
pub fn denoise_views(ppgn: &Ppgn, g: &Graph, cfg: &ExplainConfig, rng: &mut Rng) -> Result<Tensor> {
    if cfg.num_views == 0 {
        return Err(Error::Param("num_views must be at least 1".into()));
    }
    let n = g.n();
    let mut acc = vec![0.0; n * n];
    for _ in 0..cfg.num_views {
        let level = match cfg.beta_bar {
            Some(b) => NoiseLevel::new(b, cfg.steps)?,
            None => diffusion::sample_noise_level(rng, cfg.steps),
        };
        let g_t = diffusion::corrupt(g, level, rng);
        let dense = ppgn.denoise(&g_t, g, level)?;
        for (a, v) in acc.iter_mut().zip(dense.data()) {
            *a += v;
        }
    }
    let k = cfg.num_views as f64;
    Tensor::new(vec![n, n], acc.into_iter().map(|v| v / k).collect())
}

/// Builds the record for `g` with the given flipped pairs.
pub(crate) fn record_from_flips(
    gcn: &Gcn,
    g: &Graph,
    flips: &[(usize, usize)],
    scores: Tensor,
    target_mr: f64,
    original: &crate::gcn::Prediction,
) -> Result<ExplanationRecord> {
    let mut explanation = g.clone();
    let (mut added, mut deleted) = (Vec::new(), Vec::new());
    for &(i, j) in flips {
        if g.has_edge(i, j) {
            deleted.push((i, j));
        } else {
            added.push((i, j));
        }
        explanation.flip(i, j);
    }
    let after = gcn.predict(&explanation)?;
    Ok(ExplanationRecord {
        graph_id: 0,
        original: g.clone(),
        explanation,
        nodes: (0..g.n()).collect(),
        target_mr,
        achieved_mr: flips.len() as f64 / g.num_edges().max(1) as f64,
        y_orig: original.label,
        probs_orig: original.probs.clone(),
        y_new: after.label,
        probs_new: after.probs,
        scores,
        added,
        deleted,
        isolated: false,
    })
}

/// Explanation of `g` from an already denoised matrix.
pub fn explain_with_dense(
    gcn: &Gcn,
    g: &Graph,
    dense: &Tensor,
    target_mr: f64,
    strategy: FlipStrategy,
    rng: &mut Rng,
) -> Result<ExplanationRecord> {
    if !(0.0..=1.0).contains(&target_mr) {
        return Err(Error::Param(format!("target_mr {target_mr} outside [0, 1]")));
    }
    let original = gcn.predict(g)?;
    let scores = change_scores(g, dense);
    if g.center.is_some_and(|c| g.degree(c) == 0) {
        let mut rec = record_from_flips(gcn, g, &[], scores, target_mr, &original)?;
        rec.isolated = true;
        return Ok(rec);
    }
    let flips: Vec<(usize, usize)> = match strategy {
        FlipStrategy::TopK => {
            let budget = flip_budget(target_mr, g.num_edges(), g.num_pairs());
            let mut ranked = ranked_pairs(&scores);
            ranked.truncate(budget);
            ranked
        }
        FlipStrategy::Bernoulli => pairs(g.n())
            .filter(|&(i, j)| {
                let present = rng.gen::<f64>() < dense.at2(i, j);
                present != g.has_edge(i, j)
            })
            .collect(),
    };
    record_from_flips(gcn, g, &flips, scores, target_mr, &original)
}

/// Corrupt, denoise, score and flip. For node-task graphs the prediction is
/// read at `g.center`.
pub fn explain_counterfactual(
    ppgn: &Ppgn,
    gcn: &Gcn,
    g: &Graph,
    target_mr: f64,
    cfg: &ExplainConfig,
    rng: &mut Rng,
) -> Result<ExplanationRecord> {
    check_compat(ppgn, gcn, g)?;
    let dense = denoise_views(ppgn, g, cfg, rng)?;
    explain_with_dense(gcn, g, &dense, target_mr, cfg.strategy, rng)
}

/// Averages `num_views` denoisings, each at its own `β̄ ~ U[0, ½]`.
pub fn explain_counterfactual_averaged(
    ppgn: &Ppgn,
    gcn: &Gcn,
    g: &Graph,
    target_mr: f64,
    num_views: usize,
    rng: &mut Rng,
) -> Result<ExplanationRecord> {
    let cfg = ExplainConfig { beta_bar: None, num_views, ..Default::default() };
    explain_counterfactual(ppgn, gcn, g, target_mr, &cfg, rng)
}

/// Explains the prediction at `center` of a node-task graph through its
/// computational subgraph (as many hops as the classifier has layers).
pub fn explain_node(
    ppgn: &Ppgn,
    gcn: &Gcn,
    graph: &Graph,
    center: usize,
    target_mr: f64,
    cfg: &ExplainConfig,
    rng: &mut Rng,
) -> Result<ExplanationRecord> {
    let sub = extract_computational_subgraph(graph, center, gcn.layers())?;
    let mut rec = explain_counterfactual(ppgn, gcn, &sub.graph, target_mr, cfg, rng)?;
    rec.graph_id = center;
    rec.nodes = sub.mapping;
    Ok(rec)
}

/// Explains every instance at every ratio. The denoised matrix is computed
/// once per instance from the stream `(seed, "explain", id)`, so results do
/// not depend on `exec` or on which ratios are requested alongside.
pub fn explain_instances(
    ppgn: &Ppgn,
    gcn: &Gcn,
    instances: &[Instance],
    ratios: &[f64],
    cfg: &ExplainConfig,
    seed: u64,
    exec: Exec,
) -> Result<Vec<Vec<ExplanationRecord>>> {
    exec.map(instances, |_, inst| {
        check_compat(ppgn, gcn, &inst.graph)?;
        let mut r = rng::stream(seed, "explain", inst.id as u64);
        let dense = denoise_views(ppgn, &inst.graph, cfg, &mut r)?;
        ratios
            .iter()
            .enumerate()
            .map(|(k, &mr)| {
                let mut flip_rng = rng::stream(seed, "explain-flip", (inst.id * ratios.len() + k) as u64);
                let mut rec = explain_with_dense(gcn, &inst.graph, &dense, mr, cfg.strategy, &mut flip_rng)?;
                rec.graph_id = inst.id;
                rec.nodes = inst.nodes.clone();
                Ok(rec)
            })
            .collect()
    })
    .into_iter()
    .collect()
}
