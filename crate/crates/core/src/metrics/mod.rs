//! Evaluation: counterfactual accuracy and fidelity over modification ratios,
//! in-distribution MMD, Top-K robustness and a random-perturbation baseline.

pub mod mmd;
pub mod protocol;
pub mod stats;

use std::fmt::Write as _;
use std::io::Write;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::diffusion::{self, NoiseLevel, DEFAULT_STEPS};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::explain::{flip_budget, ranked_pairs, record_from_flips, ExplanationRecord};
use crate::gcn::Gcn;
use crate::graph::{pairs, Graph};
use crate::rng::{self, Rng};
use crate::tensor::Tensor;
use crate::train::Instance;

pub use mmd::{mmd_gaussian_emd, mmd_graphs, MmdTriple, DEFAULT_SIGMA};
pub use protocol::{evaluate, EvalConfig, Evaluation};
pub use stats::{emd, graph_statistics, symmetric_eigen, GraphStatistics, Histogram};

/// Points in the modification-ratio grid.
pub const MR_POINTS: usize = 10;
/// Largest ratio in the grid.
pub const MR_MAX: f64 = 0.3;
/// Largest perturbation probability accepted by the robustness test.
pub const MAX_ROBUSTNESS_SIGMA: f64 = 0.1;

/// `linspace(0, 0.3, 10)`.
pub fn mr_grid() -> Vec<f64> {
    (0..MR_POINTS).map(|k| MR_MAX * k as f64 / (MR_POINTS - 1) as f64).collect()
}

/// Fraction of explanations whose predicted label differs from the original.
pub fn cf_accuracy(records: &[ExplanationRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Contract("cf_accuracy of an empty record set".into()));
    }
    Ok(records.iter().filter(|r| r.is_counterfactual()).count() as f64 / records.len() as f64)
}

/// Mean drop in the probability of the originally predicted class.
pub fn fidelity(records: &[ExplanationRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Contract("fidelity of an empty record set".into()));
    }
    Ok(records.iter().map(ExplanationRecord::probability_drop).sum::<f64>() / records.len() as f64)
}

/// Trapezoidal area under a curve sampled on [`mr_grid`], divided by 0.3.
pub fn auc_over_mr(curve: &[f64]) -> Result<f64> {
    if curve.len() != MR_POINTS {
        return Err(Error::Contract(format!("AUC needs {MR_POINTS} points, got {}", curve.len())));
    }
    let h = 1.0 / (MR_POINTS - 1) as f64;
    Ok(curve.windows(2).map(|w| 0.5 * (w[0] + w[1]) * h).sum())
}

/// CF-ACC and fidelity per ratio from `records[instance][ratio]`.
pub fn mr_curves(records: &[Vec<ExplanationRecord>]) -> Result<(Vec<f64>, Vec<f64>)> {
    let width = records.first().map_or(0, Vec::len);
    if records.iter().any(|r| r.len() != width) {
        return Err(Error::Contract("ragged record table".into()));
    }
    let mut cf = Vec::with_capacity(width);
    let mut fid = Vec::with_capacity(width);
    for k in 0..width {
        let column: Vec<ExplanationRecord> = records.iter().map(|r| r[k].clone()).collect();
        cf.push(cf_accuracy(&column)?);
        fid.push(fidelity(&column)?);
    }
    Ok((cf, fid))
}

/// Flips a uniformly random set of `⌈mr · |E|⌉` pairs. The random scores used
/// to pick the set are kept as the record's change scores.
pub fn random_baseline(gcn: &Gcn, g: &Graph, target_mr: f64, rng: &mut Rng) -> Result<ExplanationRecord> {
    if !(0.0..=1.0).contains(&target_mr) {
        return Err(Error::Param(format!("target_mr {target_mr} outside [0, 1]")));
    }
    let n = g.n();
    let mut scores = Tensor::zeros(&[n, n]);
    for (i, j) in pairs(n) {
        let v: f64 = rng.gen();
        scores.data_mut()[i * n + j] = v;
        scores.data_mut()[j * n + i] = v;
    }
    let mut flips = ranked_pairs(&scores);
    flips.truncate(flip_budget(target_mr, g.num_edges(), g.num_pairs()));
    let original = gcn.predict(g)?;
    record_from_flips(gcn, g, &flips, scores, target_mr, &original)
}

/// Random-baseline records for every instance and ratio, one stream per instance.
pub fn random_baseline_instances(
    gcn: &Gcn,
    instances: &[Instance],
    ratios: &[f64],
    seed: u64,
    exec: Exec,
) -> Result<Vec<Vec<ExplanationRecord>>> {
    exec.map(instances, |_, inst| {
        let mut r = rng::stream(seed, "random-baseline", inst.id as u64);
        ratios
            .iter()
            .map(|&mr| {
                let mut rec = random_baseline(gcn, &inst.graph, mr, &mut r)?;
                rec.graph_id = inst.id;
                rec.nodes = inst.nodes.clone();
                Ok(rec)
            })
            .collect()
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessPoint {
    pub sigma: f64,
    /// Mean Top-K recurrence; NaN when no instance could be evaluated.
    #[serde(deserialize_with = "nan_if_null")]
    pub accuracy: f64,
    /// Instances that kept their label under perturbation and had changes.
    pub evaluated: usize,
}

// JSON writes NaN as null
fn nan_if_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// Fraction of the `k` highest-scoring changed pairs of `original` that are
/// also changed in `noisy`. `None` if `original` changed nothing.
pub fn topk_recurrence(original: &ExplanationRecord, noisy: &ExplanationRecord, k: usize) -> Option<f64> {
    let mut top = original.changed_by_score();
    top.truncate(k);
    if top.is_empty() {
        return None;
    }
    let changed: Vec<(usize, usize)> = noisy.added.iter().chain(&noisy.deleted).copied().collect();
    let hits = top.iter().filter(|p| changed.contains(p)).count();
    Some(hits as f64 / top.len() as f64)
}

/// Recurrence expected from an explainer that picks `k` of `num_pairs` pairs
/// uniformly at random.
pub fn random_recurrence_expectation(k: usize, num_pairs: usize) -> f64 {
    k as f64 / num_pairs as f64
}

/// For each `σ`: flip every pair of each instance with probability `σ`, explain
/// the original and the perturbed graph with the same seed at `fixed_mr`, and
/// average the Top-K recurrence. Instances whose perturbation changes the
/// predicted label are skipped.
#[allow(clippy::too_many_arguments)]
pub fn topk_robustness<F>(
    explain: F,
    gcn: &Gcn,
    instances: &[Instance],
    k: usize,
    sigmas: &[f64],
    fixed_mr: f64,
    seed: u64,
    exec: Exec,
) -> Result<Vec<RobustnessPoint>>
where
    F: Fn(&Graph, f64, &mut Rng) -> Result<ExplanationRecord> + Sync,
{
    if k == 0 {
        return Err(Error::Param("K must be at least 1".into()));
    }
    if let Some(s) = sigmas.iter().find(|s| !(0.0..=MAX_ROBUSTNESS_SIGMA).contains(*s)) {
        return Err(Error::Param(format!("noise level {s} outside [0, {MAX_ROBUSTNESS_SIGMA}]")));
    }
    let originals: Vec<ExplanationRecord> = exec
        .map(instances, |_, inst| explain(&inst.graph, fixed_mr, &mut rng::stream(seed, "robust-explain", inst.id as u64)))
        .into_iter()
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(sigmas.len());
    for (s, &sigma) in sigmas.iter().enumerate() {
        let level = NoiseLevel::new(sigma, DEFAULT_STEPS)?;
        let per: Vec<Option<f64>> = exec
            .map(instances, |i, inst| -> Result<Option<f64>> {
                let mut pr = rng::stream(seed, "robust-perturb", (s * instances.len() + i) as u64);
                let noisy_g = diffusion::corrupt(&inst.graph, level, &mut pr);
                if gcn.predict(&noisy_g)?.label != originals[i].y_orig {
                    return Ok(None);
                }
                let noisy = explain(&noisy_g, fixed_mr, &mut rng::stream(seed, "robust-explain", inst.id as u64))?;
                Ok(topk_recurrence(&originals[i], &noisy, k))
            })
            .into_iter()
            .collect::<Result<_>>()?;
        let vals: Vec<f64> = per.into_iter().flatten().collect();
        let accuracy = if vals.is_empty() { f64::NAN } else { vals.iter().sum::<f64>() / vals.len() as f64 };
        out.push(RobustnessPoint { sigma, accuracy, evaluated: vals.len() });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityStats {
    pub mean: f64,
    pub std: f64,
}

impl DensityStats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt() })
    }
}

/// Everything `evaluate` measures; absent parts were not requested.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub instances: usize,
    pub mr_grid: Vec<f64>,
    pub cf_acc: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub cf_auc: Option<f64>,
    pub fidelity_auc: Option<f64>,
    pub random_cf_acc: Vec<f64>,
    pub random_fidelity: Vec<f64>,
    pub random_cf_auc: Option<f64>,
    pub mmd_sigma: f64,
    pub mmd: Option<MmdTriple>,
    pub mmd_random: Option<MmdTriple>,
    pub mmd_mr: Option<f64>,
    pub robustness_k: usize,
    pub robustness: Vec<RobustnessPoint>,
    /// Mean `K/P` over the evaluated instances.
    pub robustness_random: Option<f64>,
    pub density: Option<DensityStats>,
}

impl MetricReport {
    /// Human-readable summary; AUC values are normalized by the grid width.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "instances: {}", self.instances);
        if !self.mr_grid.is_empty() {
            let _ = writeln!(s, "mr        cf_acc    fidelity  random_cf_acc");
            for (k, mr) in self.mr_grid.iter().enumerate() {
                let rnd = self.random_cf_acc.get(k).map_or(String::from("-"), |v| format!("{v:.4}"));
                let _ = writeln!(s, "{mr:<9.4} {:<9.4} {:<9.4} {rnd}", self.cf_acc[k], self.fidelity[k]);
            }
        }
        if let Some(a) = self.cf_auc {
            let _ = writeln!(s, "cf_acc auc (normalized): {a:.4}");
        }
        if let Some(a) = self.fidelity_auc {
            let _ = writeln!(s, "fidelity auc (normalized): {a:.4}");
        }
        if let Some(a) = self.random_cf_auc {
            let _ = writeln!(s, "random cf_acc auc (normalized): {a:.4}");
        }
        for (name, m) in [("mmd", &self.mmd), ("mmd random", &self.mmd_random)] {
            if let Some(m) = m {
                let _ = writeln!(
                    s,
                    "{name} at mr {:.2} (sigma {}): degree {:.5} clustering {:.5} spectrum {:.5} sum {:.5}",
                    self.mmd_mr.unwrap_or(f64::NAN),
                    self.mmd_sigma,
                    m.degree,
                    m.clustering,
                    m.spectrum,
                    m.sum()
                );
            }
        }
        if !self.robustness.is_empty() {
            let _ = writeln!(s, "top-{} robustness:", self.robustness_k);
            for p in &self.robustness {
                let _ = writeln!(s, "  sigma {:.3}: {:.4} ({} instances)", p.sigma, p.accuracy, p.evaluated);
            }
            if let Some(r) = self.robustness_random {
                let _ = writeln!(s, "  random expectation: {r:.4}");
            }
        }
        if let Some(d) = self.density {
            let _ = writeln!(s, "density: mean {:.4} std {:.4}", d.mean, d.std);
        }
        s
    }

    pub fn write_mr_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "mr,cf_acc,fidelity")?;
        for (k, mr) in self.mr_grid.iter().enumerate() {
            writeln!(w, "{mr},{},{}", self.cf_acc[k], self.fidelity[k])?;
        }
        Ok(())
    }

    pub fn write_robustness_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "sigma,topk_acc")?;
        for p in &self.robustness {
            writeln!(w, "{},{}", p.sigma, p.accuracy)?;
        }
        Ok(())
    }

    pub fn write_mmd_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "metric,mmd")?;
        if let Some(m) = self.mmd {
            for (name, v) in [("degree", m.degree), ("clustering", m.clustering), ("spectrum", m.spectrum), ("sum", m.sum())] {
                writeln!(w, "{name},{v}")?;
            }
        }
        if let Some(m) = self.mmd_random {
            for (name, v) in [("degree", m.degree), ("clustering", m.clustering), ("spectrum", m.spectrum), ("sum", m.sum())] {
                writeln!(w, "random_{name},{v}")?;
            }
        }
        Ok(())
    }
}
