use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn d4x(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_d4x"))
        .args(args)
        .current_dir(dir)
        .env("D4_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = d4x(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    d4x(dir, args).status.code().expect("exited normally")
}

fn json(s: &str) -> serde_json::Value {
    serde_json::from_str(s).expect("stdout is json")
}

/// Small node-task dataset, classifier and counterfactual explainer in `dir`.
fn pipeline(dir: &Path) {
    ok(dir, &["gen-data", "--kind", "tree-cycle", "--depth", "5", "--motifs", "6", "--seed", "3", "--out", "data.jsonl"]);
    ok(
        dir,
        &["train-classifier", "--dataset", "data.jsonl", "--epochs", "30", "--restarts", "1", "--out-ckpt", "gcn.ckpt"],
    );
    ok(dir, &[
        "train-explainer",
        "--dataset",
        "data.jsonl",
        "--classifier-ckpt",
        "gcn.ckpt",
        "--hidden",
        "8",
        "--blocks",
        "2",
        "--epochs",
        "2",
        "--out-ckpt",
        "ppgn.ckpt",
    ]);
}

fn lines(path: PathBuf) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

#[test]
fn tree_cycle_summary_counts_nodes_and_edges() {
    let dir = TempDir::new().unwrap();
    let s = json(&ok(dir.path(), &["gen-data", "--kind", "tree-cycle", "--depth", "6", "--motifs", "30", "--out", "t.jsonl"]));
    // 2^6 - 1 tree nodes plus 30 six-node rings; tree edges plus ring edges
    // plus one attachment edge per ring
    assert_eq!(s["graphs"], 1);
    assert_eq!(s["avg_nodes"].as_f64().unwrap(), (63 + 30 * 6) as f64);
    assert_eq!(s["avg_edges"].as_f64().unwrap(), (62 + 30 * 7) as f64);
    assert_eq!(s["task"], "node");
}

#[test]
fn ba3motif_is_balanced_and_reproducible() {
    let dir = TempDir::new().unwrap();
    let s = json(&ok(dir.path(), &["gen-data", "--kind", "ba3motif", "--graphs", "300", "--seed", "7", "--out", "a.jsonl"]));
    assert_eq!(s["graphs"], 300);
    assert_eq!(s["class_counts"], serde_json::json!([100, 100, 100]));
    ok(dir.path(), &["gen-data", "--kind", "ba3motif", "--graphs", "300", "--seed", "7", "--out", "b.jsonl"]);
    assert_eq!(fs::read(dir.path().join("a.jsonl")).unwrap(), fs::read(dir.path().join("b.jsonl")).unwrap());
    ok(dir.path(), &["gen-data", "--kind", "ba3motif", "--graphs", "300", "--seed", "8", "--out", "c.jsonl"]);
    assert_ne!(fs::read(dir.path().join("a.jsonl")).unwrap(), fs::read(dir.path().join("c.jsonl")).unwrap());
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    assert_eq!(code(p, &["gen-data", "--kind", "nope", "--out", "x"]), 2);
    assert_eq!(code(p, &["gen-data", "--kind", "ba3motif", "--graphs", "2", "--out", "x"]), 2);
    assert_eq!(code(p, &["train-classifier", "--dataset", "missing.jsonl", "--out-ckpt", "g.ckpt"]), 2);
    assert_eq!(code(p, &["train-classifier", "--dataset", "missing.jsonl"]), 2);
    assert_eq!(code(p, &["frobnicate"]), 2);
    assert_eq!(code(p, &["report", "--report", "missing.json"]), 2);
}

#[test]
fn config_file_sections_and_flag_override() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    fs::write(p.join("run.cfg"), "seed = 7\n[data]\nkind = ba3motif\ngraphs = 30\nout = cfg.jsonl\n").unwrap();
    let s = json(&ok(p, &["--config", "run.cfg", "gen-data"]));
    assert_eq!(s["graphs"], 30);
    ok(p, &["gen-data", "--kind", "ba3motif", "--graphs", "30", "--seed", "7", "--out", "flags.jsonl"]);
    assert_eq!(fs::read(p.join("cfg.jsonl")).unwrap(), fs::read(p.join("flags.jsonl")).unwrap());
    let s = json(&ok(p, &["--config", "run.cfg", "gen-data", "--graphs", "12"]));
    assert_eq!(s["graphs"], 12);
    fs::write(p.join("bad.cfg"), "[data]\nkind = ba3motif\ncolour = blue\n").unwrap();
    assert_eq!(code(p, &["--config", "bad.cfg", "gen-data", "--out", "z"]), 2);
}

#[test]
fn training_reruns_are_byte_identical_and_metadata_is_checked() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    pipeline(p);
    let first = fs::read(p.join("ppgn.ckpt")).unwrap();
    let first_gcn = fs::read(p.join("gcn.ckpt")).unwrap();
    pipeline(p);
    assert_eq!(fs::read(p.join("ppgn.ckpt")).unwrap(), first);
    assert_eq!(fs::read(p.join("gcn.ckpt")).unwrap(), first_gcn);
    assert_eq!(lines(p.join("ppgn.ckpt.loss.csv"))[0], "epoch,l_dist,l_cf,total");
    assert_eq!(lines(p.join("ppgn.ckpt.loss.csv")).len(), 3);

    // classifier where the denoiser belongs, and a dataset of another task
    let swapped = ["explain", "--dataset", "data.jsonl", "--classifier-ckpt", "gcn.ckpt", "--explainer-ckpt", "gcn.ckpt", "--out", "r"];
    assert_eq!(code(p, &swapped), 2);
    ok(p, &["gen-data", "--kind", "ba3motif", "--graphs", "9", "--out", "ba.jsonl"]);
    let other = ["explain", "--dataset", "ba.jsonl", "--classifier-ckpt", "gcn.ckpt", "--explainer-ckpt", "ppgn.ckpt", "--out", "r"];
    assert_eq!(code(p, &other), 2);
    // a counterfactual node-task denoiser cannot drive the model-level sampler
    assert_eq!(code(p, &["sample", "--classifier-ckpt", "gcn.ckpt", "--explainer-ckpt", "ppgn.ckpt", "--out", "t.csv"]), 2);
}

#[test]
fn explain_and_evaluate_outputs() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    pipeline(p);
    let models = ["--dataset", "data.jsonl", "--classifier-ckpt", "gcn.ckpt", "--explainer-ckpt", "ppgn.ckpt"];

    let explain = |out: &str| {
        let mut args = vec!["explain", "--mr", "0.1,0.2", "--out", out];
        args.extend(models);
        json(&ok(p, &args))
    };
    let s = explain("a.jsonl");
    let n = s["instances"].as_u64().unwrap() as usize;
    assert!(n > 0);
    assert_eq!(lines(p.join("a.jsonl")).len(), 2 * n);
    explain("b.jsonl");
    assert_eq!(fs::read(p.join("a.jsonl")).unwrap(), fs::read(p.join("b.jsonl")).unwrap());

    let sigmas = "0,0.02,0.04,0.06,0.08,0.1";
    let evaluate = |out: &str| {
        let mut args = vec!["evaluate", "--mr-grid", "default", "--robustness", "--sigmas", sigmas, "--topk", "5", "--out-dir", out];
        args.extend(models);
        ok(p, &args)
    };
    let text = evaluate("ev1");
    assert!(text.contains("cf_acc auc"));
    let mr = lines(p.join("ev1/mr.csv"));
    assert_eq!(mr[0], "mr,cf_acc,fidelity");
    assert_eq!(mr.len(), 11);
    assert_eq!(lines(p.join("ev1/robustness.csv")).len(), 7);
    assert!(p.join("ev1/mmd.csv").exists());
    evaluate("ev2");
    for f in ["mr.csv", "robustness.csv", "mmd.csv", "report.json", "explanations.jsonl"] {
        assert_eq!(fs::read(p.join("ev1").join(f)).unwrap(), fs::read(p.join("ev2").join(f)).unwrap(), "{f} differs");
    }
    let report = ok(p, &["report", "--report", "ev1/report.json"]);
    assert_eq!(report, fs::read_to_string(p.join("ev1/report.txt")).unwrap());
}

#[test]
fn model_level_sampling_writes_one_row_per_step() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    ok(p, &["gen-data", "--kind", "ba3motif", "--graphs", "30", "--base-min", "6", "--base-max", "8", "--out", "d.jsonl"]);
    ok(p, &["train-classifier", "--dataset", "d.jsonl", "--epochs", "5", "--restarts", "1", "--out-ckpt", "g.ckpt"]);
    ok(p, &[
        "train-explainer",
        "--dataset",
        "d.jsonl",
        "--classifier-ckpt",
        "g.ckpt",
        "--mode",
        "model-level",
        "--hidden",
        "8",
        "--blocks",
        "2",
        "--epochs",
        "1",
        "--out-ckpt",
        "m.ckpt",
    ]);
    let run = |out: &str| {
        json(&ok(p, &[
            "sample", "--classifier-ckpt", "g.ckpt", "--explainer-ckpt", "m.ckpt", "--n", "6", "--k", "4", "--t", "7", "--class", "1",
            "--out", out,
        ]))
    };
    let s = run("t1.csv");
    assert_eq!(s["nodes"], 6);
    let rows = lines(p.join("t1.csv"));
    assert_eq!(rows[0], "step,confidence,edge_count");
    assert_eq!(rows.len(), 8);
    run("t2.csv");
    assert_eq!(fs::read(p.join("t1.csv")).unwrap(), fs::read(p.join("t2.csv")).unwrap());
    let bad_class = ["sample", "--classifier-ckpt", "g.ckpt", "--explainer-ckpt", "m.ckpt", "--class", "3", "--out", "x.csv"];
    assert_eq!(code(p, &bad_class), 2);
}

#[test]
fn zero_alpha_warns_and_divergence_exits_3() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    pipeline(p);
    let base = ["train-explainer", "--dataset", "data.jsonl", "--classifier-ckpt", "gcn.ckpt", "--hidden", "4", "--blocks", "1", "--epochs", "1"];
    let mut args = base.to_vec();
    args.extend(["--alpha", "0", "--out-ckpt", "z.ckpt"]);
    let out = d4x(p, &args);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha = 0"));

    let mut args = base.to_vec();
    args.extend(["--lr", "inf", "--out-ckpt", "inf.ckpt"]);
    assert_eq!(code(p, &args), 2);
    let mut args = base.to_vec();
    args.extend(["--lr", "1e300", "--batch", "1", "--out-ckpt", "inf.ckpt"]);
    assert_eq!(code(p, &args), 3);
    assert!(!p.join("inf.ckpt").exists());
    assert!(p.join("inf.ckpt.loss.csv").exists());
}
