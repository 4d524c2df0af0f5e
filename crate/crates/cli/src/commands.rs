use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use d4x_core::explain::{explain_instances, write_records, ExplainConfig, FlipStrategy, DEFAULT_INFERENCE_BETA_BAR};
use d4x_core::gcn::{self, ClassifierConfig, Gcn};
use d4x_core::graph::{ba3motif, load_dataset, save_dataset, tree_motif, BaMotifConfig, Dataset, Motif, Task, TreeMotifConfig};
use d4x_core::metrics::{self, cf_accuracy, mr_grid, EvalConfig, MetricReport};
use d4x_core::ppgn::{Ppgn, PpgnConfig};
use d4x_core::rng;
use d4x_core::sampler::{sample_model_level, write_trajectory_csv, SamplerConfig};
use d4x_core::tensor::Checkpoint;
use d4x_core::train::{self, instances, write_loss_csv, Instance, Mode, Preset, TrainConfig};
use d4x_core::Exec;
use serde_json::json;

use crate::config::{ConfigFile, View};
use crate::{Evaluate, Explain, Failure, GenData, List, Report, Sample, TrainClassifier, TrainExplainer};

fn root_seed(v: &View, flag: Option<u64>) -> Result<u64, Failure> {
    v.or(flag, "seed", 0)
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(path.as_os_str());
    s.push(suffix);
    PathBuf::from(s)
}

fn write_with(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> d4x_core::Result<()>) -> Result<(), Failure> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    fs::write(path, buf).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json values serialize"));
}

fn open_dataset(path: &Path) -> Result<Dataset, Failure> {
    load_dataset(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn open_checkpoint(path: &Path) -> Result<Checkpoint, Failure> {
    Checkpoint::load(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Loads a classifier and checks it was built for `ds`.
fn open_classifier(path: &Path, ds: Option<&Dataset>) -> Result<Gcn, Failure> {
    let gcn = Gcn::from_checkpoint(&open_checkpoint(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    if let Some(ds) = ds {
        if gcn.task() != ds.task || gcn.num_classes() != ds.num_classes || gcn.feature_dim() != ds.feature_dim {
            return Err(Failure::usage(format!(
                "classifier {} ({} task, {} classes, feature dim {}) does not match the dataset ({} task, {} classes, feature dim {})",
                path.display(),
                gcn.task().as_str(),
                gcn.num_classes(),
                gcn.feature_dim(),
                ds.task.as_str(),
                ds.num_classes,
                ds.feature_dim
            )));
        }
    }
    Ok(gcn)
}

/// Loads a denoiser and checks it pairs with `gcn` and has the expected
/// center channel.
fn open_explainer(path: &Path, gcn: &Gcn, center_channel: bool) -> Result<Ppgn, Failure> {
    let ppgn = Ppgn::from_checkpoint(&open_checkpoint(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let cfg = ppgn.config();
    if cfg.feature_dim != gcn.feature_dim() {
        return Err(Failure::usage(format!(
            "explainer feature dim {} differs from the classifier's {}",
            cfg.feature_dim,
            gcn.feature_dim()
        )));
    }
    if cfg.center_channel != center_channel {
        let want = if center_channel { "with" } else { "without" };
        return Err(Failure::usage(format!("{} must be a denoiser {want} the center channel", path.display())));
    }
    Ok(ppgn)
}

fn split_items(ds: &Dataset, split: &str) -> Result<Vec<usize>, Failure> {
    Ok(match split {
        "train" => ds.splits.train.clone(),
        "val" => ds.splits.val.clone(),
        "test" => ds.splits.test.clone(),
        "all" => (0..ds.num_items()).collect(),
        other => return Err(Failure::usage(format!("unknown split {other:?}"))),
    })
}

fn explain_config(v: &View, views: Option<usize>, beta_bar: Option<String>, strategy: Option<String>) -> Result<ExplainConfig, Failure> {
    let beta_bar = match v.opt(beta_bar, "beta_bar")?.as_deref() {
        None => Some(DEFAULT_INFERENCE_BETA_BAR),
        Some("random") => None,
        Some(s) => Some(s.parse::<f64>().map_err(|_| Failure::usage(format!("beta_bar: not a number or `random`: {s:?}")))?),
    };
    let strategy = match v.or(strategy, "strategy", "topk".to_string())?.as_str() {
        "topk" => FlipStrategy::TopK,
        "bernoulli" => FlipStrategy::Bernoulli,
        other => return Err(Failure::usage(format!("unknown strategy {other:?}"))),
    };
    let num_views = v.or(views, "views", ExplainConfig::default().num_views)?;
    if num_views == 0 {
        return Err(Failure::usage("views must be at least 1"));
    }
    Ok(ExplainConfig { beta_bar, num_views, strategy, ..Default::default() })
}

/// Classifier-predicted instances of a split, with the denoiser check that
/// node tasks explain through the center channel.
fn explain_inputs(ds: &Dataset, gcn: &Gcn, split: &str) -> Result<Vec<Instance>, Failure> {
    let items = split_items(ds, split)?;
    let inst = instances(ds, gcn, &items, gcn.layers())?;
    if inst.is_empty() {
        return Err(Failure::usage(format!("no instances to explain in split {split:?}")));
    }
    Ok(inst)
}

const GEN_KEYS: &[&str] = &["kind", "depth", "motifs", "graphs", "base_min", "base_max", "ba_edges", "out"];

pub fn gen_data(a: &GenData, file: &ConfigFile, seed: Option<u64>) -> Result<(), Failure> {
    let v = file.view("data", GEN_KEYS)?;
    let seed = rng::derive_seed(root_seed(&v, seed)?, "data", 0);
    let kind: String = v.required(a.kind.clone(), "kind")?;
    let out: PathBuf = v.required(a.out.clone(), "out")?;
    let ds = match kind.as_str() {
        "tree-cycle" | "tree-grid" => {
            let d = TreeMotifConfig::default();
            let motif = if kind == "tree-cycle" { Motif::Cycle6 } else { Motif::Grid3x3 };
            tree_motif(&TreeMotifConfig {
                depth: v.or(a.depth, "depth", d.depth)?,
                motif,
                num_motifs: v.or(a.motifs, "motifs", d.num_motifs)?,
                seed,
            })?
        }
        "ba-3motif" | "ba3motif" => {
            let d = BaMotifConfig::default();
            ba3motif(&BaMotifConfig {
                num_graphs: v.or(a.graphs, "graphs", d.num_graphs)?,
                base_nodes: (v.or(a.base_min, "base_min", d.base_nodes.0)?, v.or(a.base_max, "base_max", d.base_nodes.1)?),
                ba_edges: v.or(a.ba_edges, "ba_edges", d.ba_edges)?,
                seed,
            })?
        }
        other => return Err(Failure::usage(format!("unknown kind {other:?}; expected tree-cycle, tree-grid or ba-3motif"))),
    };
    save_dataset(&ds, &out).map_err(|e| Failure::usage(format!("{}: {e}", out.display())))?;
    let s = ds.summary();
    print_json(&json!({
        "kind": kind,
        "task": ds.task.as_str(),
        "graphs": s.graphs,
        "avg_nodes": s.avg_nodes,
        "avg_edges": s.avg_edges,
        "num_classes": s.num_classes,
        "class_counts": s.class_counts,
        "splits": [ds.splits.train.len(), ds.splits.val.len(), ds.splits.test.len()],
    }));
    Ok(())
}

const CLASSIFIER_KEYS: &[&str] = &["layers", "hidden", "epochs", "lr", "batch", "restarts", "out_ckpt"];

pub fn train_classifier(a: &TrainClassifier, file: &ConfigFile, seed: Option<u64>, exec: Exec) -> Result<(), Failure> {
    let v = file.view("classifier", CLASSIFIER_KEYS)?;
    let seed = rng::derive_seed(root_seed(&v, seed)?, "train", 0);
    let dataset: PathBuf = v.required(a.dataset.clone(), "dataset")?;
    let out: PathBuf = v.required(a.out_ckpt.clone(), "out_ckpt")?;
    let ds = open_dataset(&dataset)?;
    let d = ClassifierConfig::for_task(ds.task);
    let cfg = ClassifierConfig {
        layers: v.or(a.layers, "layers", d.layers)?,
        hidden: v.or(a.hidden, "hidden", d.hidden)?,
        epochs: v.or(a.epochs, "epochs", d.epochs)?,
        lr: v.or(a.lr, "lr", d.lr)?,
        batch: v.or(a.batch, "batch", d.batch)?,
        restarts: v.or(a.restarts, "restarts", d.restarts)?,
        seed,
    };
    let trained = gcn::train_classifier(&ds, &cfg, exec)?;
    let loss_path = sibling(&out, ".loss.csv");
    write_with(&loss_path, |w| {
        use std::io::Write;
        writeln!(w, "epoch,loss")?;
        for (e, l) in trained.loss_history.iter().enumerate() {
            writeln!(w, "{e},{l}")?;
        }
        Ok(())
    })?;
    if trained.loss_history.iter().any(|l| !l.is_finite()) {
        return Err(Failure::numeric(format!("classifier loss became non-finite; trace in {}", loss_path.display())));
    }
    trained.gcn.to_checkpoint().save(&out)?;
    print_json(&json!({
        "train_accuracy": trained.train_accuracy,
        "val_accuracy": trained.val_accuracy,
        "test_accuracy": trained.test_accuracy,
        "best_epoch": trained.best_epoch,
        "restart": trained.restart,
    }));
    Ok(())
}

const EXPLAINER_KEYS: &[&str] = &[
    "preset",
    "alpha",
    "T",
    "epochs",
    "batch",
    "lr",
    "gamma",
    "lambda",
    "mode",
    "hidden",
    "blocks",
    "max_instances",
    "out_ckpt",
];

pub fn train_explainer(a: &TrainExplainer, file: &ConfigFile, seed: Option<u64>, exec: Exec) -> Result<(), Failure> {
    let v = file.view("train", EXPLAINER_KEYS)?;
    let seed = rng::derive_seed(root_seed(&v, seed)?, "train", 1);
    let dataset: PathBuf = v.required(a.dataset.clone(), "dataset")?;
    let classifier: PathBuf = v.required(a.classifier_ckpt.clone(), "classifier_ckpt")?;
    let out: PathBuf = v.required(a.out_ckpt.clone(), "out_ckpt")?;
    let ds = open_dataset(&dataset)?;
    let gcn = open_classifier(&classifier, Some(&ds))?;
    let (mut td, mut pd) = (TrainConfig::default(), PpgnConfig::default());
    if let Some(name) = v.opt::<String>(a.preset.clone(), "preset")? {
        let p = Preset::for_kind(&name).ok_or_else(|| Failure::usage(format!("unknown preset {name:?}")))?;
        (td.alpha, td.batch, pd.hidden, pd.blocks) = (p.alpha, p.batch, p.hidden, p.blocks);
    }
    let mode_name = v.or(a.mode.clone(), "mode", td.mode.as_str().to_string())?;
    let mode = Mode::parse(&mode_name).ok_or_else(|| Failure::usage(format!("unknown mode {mode_name:?}")))?;
    let cfg = TrainConfig {
        alpha: v.or(a.alpha, "alpha", td.alpha)?,
        steps: v.or(a.steps, "T", td.steps)?,
        epochs: v.or(a.epochs, "epochs", td.epochs)?,
        batch: v.or(a.batch, "batch", td.batch)?,
        lr: v.or(a.lr, "lr", td.lr)?,
        gamma: v.or(a.gamma, "gamma", td.gamma)?,
        lambda: v.or(a.lambda, "lambda", td.lambda)?,
        mode,
        seed,
        ..td
    };
    cfg.validate()?;
    if mode == Mode::Counterfactual && cfg.alpha == 0.0 {
        log::warn!("alpha = 0 in counterfactual mode: the loss reduces to model-level (distribution-only) training");
    }
    let center = ds.task == Task::NodeClassification && mode == Mode::Counterfactual;
    let pcfg = PpgnConfig {
        hidden: v.or(a.hidden, "hidden", pd.hidden)?,
        blocks: v.or(a.blocks, "blocks", pd.blocks)?,
        feature_dim: ds.feature_dim,
        center_channel: center,
        ..pd
    };
    let mut inst = explain_inputs(&ds, &gcn, "train")?;
    inst.truncate(v.or(a.max_instances, "max_instances", usize::MAX)?);
    if !center {
        inst.iter_mut().for_each(|i| i.graph.center = None);
    }
    let trained = train::train_explainer(&inst, &gcn, &pcfg, &cfg, exec)?;
    let loss_path = sibling(&out, ".loss.csv");
    write_with(&loss_path, |w| write_loss_csv(&trained.trace, w))?;
    if let Some(why) = trained.diverged {
        return Err(Failure::numeric(format!("training diverged: {why}; loss trace in {}", loss_path.display())));
    }
    trained.ppgn.to_checkpoint().save(&out)?;
    let last = trained.trace.last();
    print_json(&json!({
        "instances": inst.len(),
        "epochs": trained.trace.len(),
        "mode": mode.as_str(),
        "alpha": cfg.alpha,
        "hidden": pcfg.hidden,
        "blocks": pcfg.blocks,
        "final_l_dist": last.map(|r| r.l_dist),
        "final_l_cf": last.map(|r| r.l_cf),
        "final_total": last.map(|r| r.total),
    }));
    Ok(())
}

const EXPLAIN_KEYS: &[&str] = &["mr", "split", "views", "beta_bar", "strategy", "out"];

pub fn explain(a: &Explain, file: &ConfigFile, seed: Option<u64>, exec: Exec) -> Result<(), Failure> {
    let v = file.view("explain", EXPLAIN_KEYS)?;
    let seed = rng::derive_seed(root_seed(&v, seed)?, "explain", 0);
    let dataset: PathBuf = v.required(a.dataset.clone(), "dataset")?;
    let classifier: PathBuf = v.required(a.classifier_ckpt.clone(), "classifier_ckpt")?;
    let explainer: PathBuf = v.required(a.explainer_ckpt.clone(), "explainer_ckpt")?;
    let out: PathBuf = v.required(a.out.clone(), "out")?;
    let ratios = v.or(a.mr.clone(), "mr", List(mr_grid()))?.0;
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Failure::usage("modification ratios must lie in [0, 1]"));
    }
    let split = v.or(a.split.clone(), "split", "test".to_string())?;
    let ecfg = explain_config(&v, a.views, a.beta_bar.clone(), a.strategy.clone())?;
    let ds = open_dataset(&dataset)?;
    let gcn = open_classifier(&classifier, Some(&ds))?;
    let ppgn = open_explainer(&explainer, &gcn, ds.task == Task::NodeClassification)?;
    let inst = explain_inputs(&ds, &gcn, &split)?;
    let records = explain_instances(&ppgn, &gcn, &inst, &ratios, &ecfg, seed, exec)?;
    write_with(&out, |w| write_records(records.iter().flatten(), w))?;
    let per_ratio: Vec<serde_json::Value> = (0..ratios.len())
        .map(|k| {
            let column: Vec<_> = records.iter().map(|r| r[k].clone()).collect();
            let acc = cf_accuracy(&column)?;
            Ok(json!({ "mr": ratios[k], "cf_acc": acc }))
        })
        .collect::<d4x_core::Result<_>>()?;
    print_json(&json!({ "instances": inst.len(), "records": records.len() * ratios.len(), "cf_acc": per_ratio }));
    Ok(())
}

const SAMPLE_KEYS: &[&str] = &["n", "k", "t", "class", "density_weight", "out"];

pub fn sample(a: &Sample, file: &ConfigFile, seed: Option<u64>, exec: Exec) -> Result<(), Failure> {
    let v = file.view("sample", SAMPLE_KEYS)?;
    let seed = rng::derive_seed(root_seed(&v, seed)?, "sample", 0);
    let classifier: PathBuf = v.required(a.classifier_ckpt.clone(), "classifier_ckpt")?;
    let explainer: PathBuf = v.required(a.explainer_ckpt.clone(), "explainer_ckpt")?;
    let out: PathBuf = v.required(a.out.clone(), "out")?;
    let d = SamplerConfig::default();
    let cfg = SamplerConfig {
        nodes: v.or(a.n, "n", d.nodes)?,
        candidates: v.or(a.k, "k", d.candidates)?,
        steps: v.or(a.t, "t", d.steps)?,
        class: v.or(a.class, "class", d.class)?,
        density_weight: v.or(a.density_weight, "density_weight", d.density_weight)?,
    };
    cfg.validate()?;
    let gcn = open_classifier(&classifier, None)?;
    if cfg.class >= gcn.num_classes() {
        return Err(Failure::usage(format!("class {} out of range for {} classes", cfg.class, gcn.num_classes())));
    }
    let ppgn = open_explainer(&explainer, &gcn, false)?;
    let s = sample_model_level(&ppgn, &gcn, &cfg, &mut rng::seeded(seed), exec)?;
    write_with(&out, |w| write_trajectory_csv(&s.trajectory, w))?;
    print_json(&json!({
        "class": cfg.class,
        "confidence": s.confidence,
        "nodes": s.graph.n(),
        "edges": s.graph.edges().iter().map(|&(i, j)| [i, j]).collect::<Vec<_>>(),
    }));
    Ok(())
}

const EVAL_KEYS: &[&str] = &[
    "mr_grid",
    "split",
    "views",
    "beta_bar",
    "strategy",
    "mmd_mr",
    "mmd_sigma",
    "random_baseline",
    "robustness",
    "sigmas",
    "topk",
    "robustness_mr",
];

pub fn evaluate(a: &Evaluate, file: &ConfigFile, seed: Option<u64>, exec: Exec) -> Result<(), Failure> {
    let v = file.view("eval", EVAL_KEYS)?;
    let seed = rng::derive_seed(root_seed(&v, seed)?, "eval", 0);
    let dataset: PathBuf = v.required(a.dataset.clone(), "dataset")?;
    let classifier: PathBuf = v.required(a.classifier_ckpt.clone(), "classifier_ckpt")?;
    let explainer: PathBuf = v.required(a.explainer_ckpt.clone(), "explainer_ckpt")?;
    let out_dir: PathBuf = v.required(a.out_dir.clone(), "out_dir")?;
    let grid = v.or(a.mr_grid.clone(), "mr_grid", "default".to_string())?;
    if grid != "default" {
        return Err(Failure::usage(format!("unsupported mr grid {grid:?}; only `default` is available")));
    }
    let split = v.or(a.split.clone(), "split", "test".to_string())?;
    let ecfg = explain_config(&v, a.views, a.beta_bar.clone(), None)?;
    let d = EvalConfig::default();
    let mmd_mr = match v.opt::<String>(a.mmd_mr.clone(), "mmd_mr")?.as_deref() {
        None => d.mmd_mr,
        Some("none") => None,
        Some(s) => Some(s.parse::<f64>().map_err(|_| Failure::usage(format!("mmd_mr: not a number or `none`: {s:?}")))?),
    };
    let robustness = v.or(a.robustness.then_some(true), "robustness", false)?;
    let sigmas = v.or(a.sigmas.clone(), "sigmas", List(d.robustness_sigmas.clone()))?.0;
    if sigmas.iter().any(|s| !(0.0..=metrics::MAX_ROBUSTNESS_SIGMA).contains(s)) {
        return Err(Failure::usage(format!("sigmas must lie in [0, {}]", metrics::MAX_ROBUSTNESS_SIGMA)));
    }
    let cfg = EvalConfig {
        seed,
        random_baseline: v.or(a.no_random.then_some(false), "random_baseline", d.random_baseline)?,
        mmd_mr,
        mmd_sigma: v.or(a.mmd_sigma, "mmd_sigma", d.mmd_sigma)?,
        robustness_k: v.or(a.topk, "topk", d.robustness_k)?,
        robustness_sigmas: if robustness { sigmas } else { Vec::new() },
        robustness_mr: v.or(a.robustness_mr, "robustness_mr", d.robustness_mr)?,
    };
    let ds = open_dataset(&dataset)?;
    let gcn = open_classifier(&classifier, Some(&ds))?;
    let ppgn = open_explainer(&explainer, &gcn, ds.task == Task::NodeClassification)?;
    let inst = explain_inputs(&ds, &gcn, &split)?;
    let ev = metrics::evaluate(&ppgn, &gcn, &inst, &ecfg, &cfg, exec)?;
    fs::create_dir_all(&out_dir).map_err(|e| Failure::usage(format!("{}: {e}", out_dir.display())))?;
    let r = &ev.report;
    write_with(&out_dir.join("mr.csv"), |w| r.write_mr_csv(w))?;
    write_with(&out_dir.join("explanations.jsonl"), |w| write_records(ev.records.iter().flatten(), w))?;
    if r.mmd.is_some() {
        write_with(&out_dir.join("mmd.csv"), |w| r.write_mmd_csv(w))?;
    }
    if !r.robustness.is_empty() {
        write_with(&out_dir.join("robustness.csv"), |w| r.write_robustness_csv(w))?;
    }
    let json = serde_json::to_vec_pretty(r).expect("report serializes");
    fs::write(out_dir.join("report.json"), json)?;
    fs::write(out_dir.join("report.txt"), r.to_text())?;
    print!("{}", r.to_text());
    Ok(())
}

pub fn report(a: &Report) -> Result<(), Failure> {
    let bytes = fs::read(&a.report).map_err(|e| Failure::usage(format!("{}: {e}", a.report.display())))?;
    let r: MetricReport =
        serde_json::from_slice(&bytes).map_err(|e| Failure::usage(format!("{}: not a metric report: {e}", a.report.display())))?;
    print!("{}", r.to_text());
    Ok(())
}
