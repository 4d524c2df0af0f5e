//! Classifier-guided reverse sampling of model-level explanations.
//!
//! Starting from an Erdős–Rényi(½) graph, each reverse step denoises the
//! current graph, draws `K` hard candidates from the predicted edge
//! probabilities, keeps the one the classifier finds most typical of the
//! target class, and re-noises it to the next (lower) level.

use std::io::Write;

use rand::Rng as _;

use crate::diffusion::{self, NoiseLevel, DEFAULT_STEPS};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::gcn::Gcn;
use crate::graph::{pairs, Graph, Task};
use crate::ppgn::Ppgn;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Nodes in the generated explanation.
    pub nodes: usize,
    /// Candidates per reverse step.
    pub candidates: usize,
    /// Reverse steps.
    pub steps: usize,
    pub class: usize,
    /// Weight of the density penalty in candidate selection; 0 disables it.
    pub density_weight: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { nodes: 6, candidates: 20, steps: 50, class: 1, density_weight: 0.0 }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 || self.candidates == 0 || self.steps == 0 {
            return Err(Error::Param(format!(
                "sampler needs N >= 2, K >= 1, T >= 1; got N={} K={} T={}",
                self.nodes, self.candidates, self.steps
            )));
        }
        Ok(())
    }

    /// `β̄(t) = ½ · t / T`.
    pub fn level(&self, t: usize) -> NoiseLevel {
        NoiseLevel::new(0.5 * t as f64 / self.steps as f64, DEFAULT_STEPS).expect("t <= T")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStep {
    /// Reverse step index, from `T` down to 1.
    pub t: usize,
    /// Class confidence of the selected candidate.
    pub confidence: f64,
    pub graph: Graph,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub graph: Graph,
    pub confidence: f64,
    pub trajectory: Vec<TrajectoryStep>,
}

/// Ordered-pair edge count over `n²`.
pub fn density(g: &Graph) -> f64 {
    if g.n() == 0 {
        return 0.0;
    }
    2.0 * g.num_edges() as f64 / (g.n() * g.n()) as f64
}

/// Probability of `class`. Node classifiers report the mean over nodes.
pub fn class_confidence(gcn: &Gcn, g: &Graph, class: usize) -> Result<f64> {
    if class >= gcn.num_classes() {
        return Err(Error::Param(format!("class {class} out of range for {} classes", gcn.num_classes())));
    }
    match gcn.task() {
        Task::GraphClassification => Ok(gcn.predict(g)?.probs[class]),
        Task::NodeClassification => {
            let rows = gcn.predict_nodes(g)?;
            Ok(rows.iter().map(|p| p.probs[class]).sum::<f64>() / rows.len() as f64)
        }
    }
}

/// Index of the highest score; ties go to the lowest index.
pub fn select_best(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(k);
        }
    }
    best
}

/// `f(C | g) - w · density(g)` for each candidate.
pub fn penalized_scores(confidences: &[f64], densities: &[f64], weight: f64) -> Vec<f64> {
    confidences.iter().zip(densities).map(|(c, d)| c - weight * d).collect()
}

/// Picks the candidate maximizing the penalized class confidence. Returns its
/// index and raw confidence.
pub fn candidate_select(candidates: &[Graph], gcn: &Gcn, class: usize, density_weight: f64, exec: Exec) -> Result<(usize, f64)> {
    if candidates.is_empty() {
        return Err(Error::Contract("no candidates to select from".into()));
    }
    let conf: Vec<f64> = exec
        .map(candidates, |_, g| class_confidence(gcn, g, class))
        .into_iter()
        .collect::<Result<_>>()?;
    let dens: Vec<f64> = candidates.iter().map(density).collect();
    let best = select_best(&penalized_scores(&conf, &dens, density_weight)).expect("nonempty");
    Ok((best, conf[best]))
}

fn bernoulli_graph(template: &Graph, dense: &crate::tensor::Tensor, rng: &mut Rng) -> Graph {
    let mut g = template.clone();
    for (i, j) in pairs(template.n()) {
        g.set_edge(i, j, rng.gen::<f64>() < dense.at2(i, j));
    }
    g
}

/// Runs the guided reverse chain. Candidate `k` of a step is drawn from its own
/// substream, so the first `K` candidates are identical across runs that only
/// differ in `K`.
pub fn sample_model_level(ppgn: &Ppgn, gcn: &Gcn, cfg: &SamplerConfig, rng: &mut Rng, exec: Exec) -> Result<Sample> {
    cfg.validate()?;
    if ppgn.config().feature_dim != gcn.feature_dim() {
        return Err(Error::Contract(format!(
            "denoiser feature dim {} differs from classifier's {}",
            ppgn.config().feature_dim,
            gcn.feature_dim()
        )));
    }
    if ppgn.config().center_channel {
        return Err(Error::Contract("model-level sampling needs a denoiser without the center channel".into()));
    }
    let n = cfg.nodes;
    let mut template = Graph::empty(n);
    template.set_features(gcn.feature_dim(), vec![1.0; n * gcn.feature_dim()])?;
    let mut current = diffusion::corrupt(&template, cfg.level(cfg.steps), rng);
    let mut trajectory = Vec::with_capacity(cfg.steps);
    let mut selected = current.clone();
    let mut confidence = 0.0;
    for t in (1..=cfg.steps).rev() {
        let dense = ppgn.denoise(&current, &template, cfg.level(t))?;
        let step_seed: u64 = rng.gen();
        let candidates: Vec<Graph> = (0..cfg.candidates)
            .map(|k| bernoulli_graph(&template, &dense, &mut rng::stream(step_seed, "candidate", k as u64)))
            .collect();
        let (best, conf) = candidate_select(&candidates, gcn, cfg.class, cfg.density_weight, exec)?;
        selected = candidates.into_iter().nth(best).expect("index in range");
        confidence = conf;
        trajectory.push(TrajectoryStep { t, confidence, graph: selected.clone() });
        current = diffusion::corrupt(&selected, cfg.level(t - 1), rng);
    }
    Ok(Sample { graph: selected, confidence, trajectory })
}

/// Writes `step,confidence,edge_count`, one row per reverse step.
pub fn write_trajectory_csv(trajectory: &[TrajectoryStep], mut w: impl Write) -> Result<()> {
    writeln!(w, "step,confidence,edge_count")?;
    for s in trajectory {
        writeln!(w, "{},{},{}", s.t, s.confidence, s.graph.num_edges())?;
    }
    Ok(())
}
