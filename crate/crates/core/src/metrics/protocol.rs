//! The full evaluation sweep: MR curves with AUC, the random baseline, MMD
//! against the evaluated graphs, and Top-K robustness.

use super::{
    auc_over_mr, mmd_graphs, mr_curves, mr_grid, random_baseline_instances, random_recurrence_expectation,
    topk_robustness, MetricReport, DEFAULT_SIGMA,
};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::explain::{explain_counterfactual, explain_instances, ExplainConfig, ExplanationRecord};
use crate::gcn::Gcn;
use crate::graph::Graph;
use crate::ppgn::Ppgn;
use crate::train::Instance;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub seed: u64,
    pub random_baseline: bool,
    /// Ratio at which explanations are compared to the data by MMD; `None`
    /// skips MMD.
    pub mmd_mr: Option<f64>,
    pub mmd_sigma: f64,
    pub robustness_k: usize,
    /// Empty skips robustness.
    pub robustness_sigmas: Vec<f64>,
    pub robustness_mr: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            random_baseline: true,
            mmd_mr: Some(0.2),
            mmd_sigma: DEFAULT_SIGMA,
            robustness_k: 5,
            robustness_sigmas: vec![0.0, 0.01, 0.02, 0.05, 0.1],
            robustness_mr: 0.2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MetricReport,
    /// `records[instance][ratio]` over the MR grid.
    pub records: Vec<Vec<ExplanationRecord>>,
    /// Explanations at the MMD ratio.
    pub mmd_records: Vec<ExplanationRecord>,
    pub random_mmd_records: Vec<ExplanationRecord>,
}

pub fn evaluate(
    ppgn: &Ppgn,
    gcn: &Gcn,
    instances: &[Instance],
    explain: &ExplainConfig,
    cfg: &EvalConfig,
    exec: Exec,
) -> Result<Evaluation> {
    if instances.is_empty() {
        return Err(Error::Contract("nothing to evaluate".into()));
    }
    let grid = mr_grid();
    let mut ratios = grid.clone();
    ratios.extend(cfg.mmd_mr);
    let mut all = explain_instances(ppgn, gcn, instances, &ratios, explain, cfg.seed, exec)?;
    let mmd_records: Vec<ExplanationRecord> = match cfg.mmd_mr {
        Some(_) => all.iter_mut().map(|r| r.pop().expect("mmd ratio present")).collect(),
        None => Vec::new(),
    };
    let (cf_acc, fidelity) = mr_curves(&all)?;
    let mut report = MetricReport {
        instances: instances.len(),
        cf_auc: Some(auc_over_mr(&cf_acc)?),
        fidelity_auc: Some(auc_over_mr(&fidelity)?),
        mr_grid: grid,
        cf_acc,
        fidelity,
        mmd_sigma: cfg.mmd_sigma,
        mmd_mr: cfg.mmd_mr,
        robustness_k: cfg.robustness_k,
        ..Default::default()
    };
    let mut random_mmd_records = Vec::new();
    if cfg.random_baseline {
        let mut rnd = random_baseline_instances(gcn, instances, &ratios, cfg.seed, exec)?;
        if cfg.mmd_mr.is_some() {
            random_mmd_records = rnd.iter_mut().map(|r| r.pop().expect("mmd ratio present")).collect();
        }
        let (rcf, rfid) = mr_curves(&rnd)?;
        report.random_cf_auc = Some(auc_over_mr(&rcf)?);
        report.random_cf_acc = rcf;
        report.random_fidelity = rfid;
    }
    if cfg.mmd_mr.is_some() {
        let reference: Vec<Graph> = instances.iter().map(|i| i.graph.clone()).collect();
        let explained: Vec<Graph> = mmd_records.iter().map(|r| r.explanation.clone()).collect();
        report.mmd = Some(mmd_graphs(&explained, &reference, cfg.mmd_sigma)?);
        if !random_mmd_records.is_empty() {
            let random: Vec<Graph> = random_mmd_records.iter().map(|r| r.explanation.clone()).collect();
            report.mmd_random = Some(mmd_graphs(&random, &reference, cfg.mmd_sigma)?);
        }
    }
    if !cfg.robustness_sigmas.is_empty() {
        let explain_one = |g: &Graph, mr: f64, rng: &mut crate::rng::Rng| explain_counterfactual(ppgn, gcn, g, mr, explain, rng);
        report.robustness = topk_robustness(
            explain_one,
            gcn,
            instances,
            cfg.robustness_k,
            &cfg.robustness_sigmas,
            cfg.robustness_mr,
            cfg.seed,
            exec,
        )?;
        let expectations: Vec<f64> = instances
            .iter()
            .filter(|i| i.graph.num_pairs() > 0)
            .map(|i| random_recurrence_expectation(cfg.robustness_k.min(i.graph.num_pairs()), i.graph.num_pairs()))
            .collect();
        if !expectations.is_empty() {
            report.robustness_random = Some(expectations.iter().sum::<f64>() / expectations.len() as f64);
        }
    }
    Ok(Evaluation { report, records: all, mmd_records, random_mmd_records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Task;
    use crate::ppgn::PpgnConfig;

    #[test]
    fn sweep_fills_every_section() {
        let gcn = Gcn::new(1, 2, Task::GraphClassification, 2, 4, 0).unwrap();
        let ppgn = Ppgn::new(PpgnConfig { blocks: 1, hidden: 4, time_hidden: 4, ..Default::default() }, 0).unwrap();
        let instances: Vec<Instance> = (0..3)
            .map(|k| {
                let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (0, 4 - k)]).unwrap();
                let p = gcn.predict(&g).unwrap();
                Instance { id: k, nodes: (0..5).collect(), graph: g, label: p.label, prob: p.probs[p.label] }
            })
            .collect();
        let ev = evaluate(&ppgn, &gcn, &instances, &ExplainConfig::default(), &EvalConfig::default(), Exec::Sequential).unwrap();
        let r = &ev.report;
        assert_eq!(r.cf_acc.len(), 10);
        assert_eq!(r.random_cf_acc.len(), 10);
        assert!(r.mmd.is_some() && r.mmd_random.is_some());
        assert_eq!(r.robustness.len(), 5);
        assert_eq!(r.robustness[0].accuracy, 1.0);
        assert_eq!(ev.mmd_records.len(), 3);
        assert!(ev.records.iter().all(|row| row.len() == 10));
    }
}
