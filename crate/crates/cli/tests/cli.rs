use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn dines(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dines"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = dines(args);
    assert!(
        out.status.success(),
        "dines {args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// 30 nodes, 100 distinct edges, roughly three quarters positive.
fn write_toy(dir: &Path) -> PathBuf {
    let mut text = String::from("# toy signed graph\n");
    let mut seen = std::collections::HashSet::new();
    let mut state = 12345u64;
    while seen.len() < 100 {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let (u, v) = ((state >> 33) % 30, (state >> 17) % 30);
        if u == v || !seen.insert((u, v)) {
            continue;
        }
        let sign = if (u + v) % 4 == 0 { -1 } else { 1 };
        text.push_str(&format!("{u} {v} {sign}\n"));
    }
    let path = dir.join("toy.txt");
    fs::write(&path, text).unwrap();
    path
}

fn prepare(root: &Path, name: &str, seed: &str) -> PathBuf {
    let raw = write_toy(root);
    let out = root.join(name);
    ok(&["prepare", "--input", s(&raw), "--kind", "triple-tsv", "--out", s(&out), "--rank", "8", "--split-seed", seed]);
    out
}

const MODEL: [&str; 6] = ["--k", "2", "--d-out", "8", "--epochs", "5"];

fn train(data: &Path, out: &Path, extra: &[&str]) -> String {
    let mut args = vec!["train", "--data", s(data), "--out", s(out)];
    args.extend(MODEL);
    args.extend(extra);
    ok(&args)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn data_lines(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).count()
}

/// AUC from `probs.tsv` by counting positive-over-negative pairs.
fn auc_from_probs(path: &Path) -> f64 {
    let rows: Vec<(bool, f64)> = fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[2] == "1", f[3].parse().unwrap())
        })
        .collect();
    let (mut wins, mut pairs) = (0.0, 0.0);
    for &(lp, sp) in &rows {
        for &(ln, sn) in &rows {
            if lp && !ln {
                pairs += 1.0;
                wins += if sp > sn { 1.0 } else if sp == sn { 0.5 } else { 0.0 };
            }
        }
    }
    100.0 * wins / pairs
}

#[test]
fn prepare_splits_eight_to_two() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = write_toy(tmp.path());
    let out = tmp.path().join("data");
    let stdout = ok(&["prepare", "--input", s(&raw), "--kind", "triple-tsv", "--out", s(&out), "--rank", "8"]);
    assert!(stdout.contains("|E+|") && stdout.contains("100"), "{stdout}");
    assert_eq!(data_lines(&out.join("train.tsv")), 80);
    assert_eq!(data_lines(&out.join("test.tsv")), 20);
    let meta = json(&out.join("split.json"));
    assert_eq!(meta["counts"]["train"], 80);
    assert_eq!(meta["counts"]["test"], 20);
    assert_eq!(meta["ratio"], 0.8);
    assert_eq!(data_lines(&out.join("features.tsv")), meta["counts"]["nodes"].as_u64().unwrap() as usize);
    assert!(out.join("features.meta.json").exists());
    assert_eq!(json(&out.join("manifest.json"))["command"], "prepare");
}

#[test]
fn prepare_is_byte_identical_for_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let a = prepare(tmp.path(), "a", "7");
    let b = prepare(tmp.path(), "b", "7");
    let c = prepare(tmp.path(), "c", "8");
    for f in ["train.tsv", "test.tsv", "split.json", "features.tsv", "features.meta.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join("train.tsv")).unwrap(), fs::read(c.join("train.tsv")).unwrap());
}

#[test]
fn prepare_rejects_bad_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = write_toy(tmp.path());
    let out = tmp.path().join("x");
    let unknown = dines(&["prepare", "--input", s(&raw), "--kind", "parquet", "--out", s(&out)]);
    assert!(!unknown.status.success());
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("unknown dataset kind"));
    let missing = dines(&["prepare", "--input", "/nonexistent/file", "--kind", "triple-tsv", "--out", s(&out)]);
    assert!(!missing.status.success());
}

#[test]
fn train_writes_outputs_and_eval_reproduces_them() {
    let tmp = tempfile::tempdir().unwrap();
    let data = prepare(tmp.path(), "data", "0");
    let run = tmp.path().join("run");
    train(&data, &run, &[]);
    for f in ["report.json", "probs.tsv", "checkpoint.json", "losses.tsv", "manifest.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let report = json(&run.join("report.json"));
    let auc = report["auc"].as_f64().unwrap();
    assert!((auc_from_probs(&run.join("probs.tsv")) - auc).abs() < 1e-9);
    assert_eq!(data_lines(&run.join("probs.tsv")) - 1, 20);
    assert_eq!(report["config"]["encoder"]["factors"], 2);

    let eval_dir = tmp.path().join("eval");
    ok(&["eval", "--checkpoint", s(&run.join("checkpoint.json")), "--data", s(&data), "--out", s(&eval_dir)]);
    let again = json(&eval_dir.join("report.json"));
    for key in ["auc", "macro_f1", "f1_positive", "f1_negative", "confusion", "test_edges"] {
        assert_eq!(again[key], report[key], "{key}");
    }
    assert_eq!(fs::read(run.join("probs.tsv")).unwrap(), fs::read(eval_dir.join("probs.tsv")).unwrap());
}

#[test]
fn eval_rejects_checkpoint_for_other_graph() {
    let tmp = tempfile::tempdir().unwrap();
    let data = prepare(tmp.path(), "data", "0");
    let run = tmp.path().join("run");
    train(&data, &run, &[]);
    let other = tmp.path().join("other");
    fs::create_dir_all(&other).unwrap();
    let edges: String = (0..60).map(|i| format!("{} {} 1\n", i, (i + 1) % 60)).collect();
    fs::write(other.join("ring.txt"), edges).unwrap();
    let odata = other.join("data");
    ok(&["prepare", "--input", s(&other.join("ring.txt")), "--kind", "triple-tsv", "--out", s(&odata), "--rank", "8"]);
    let out = dines(&["eval", "--checkpoint", s(&run.join("checkpoint.json")), "--data", s(&odata)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension mismatch"));

    let mut ckpt = json(&run.join("checkpoint.json"));
    ckpt["schema_version"] = 0.into();
    fs::write(run.join("old.json"), ckpt.to_string()).unwrap();
    let out = dines(&["eval", "--checkpoint", s(&run.join("old.json")), "--data", s(&data)]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema mismatch"));
}

#[test]
fn training_is_reproducible_and_replayable() {
    let tmp = tempfile::tempdir().unwrap();
    let data = prepare(tmp.path(), "data", "0");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    train(&data, &a, &["--seed", "4", "--aggregator", "attention"]);
    train(&data, &b, &["--seed", "4", "--aggregator", "attention"]);
    assert_eq!(fs::read(a.join("probs.tsv")).unwrap(), fs::read(b.join("probs.tsv")).unwrap());
    assert_eq!(fs::read(a.join("losses.tsv")).unwrap(), fs::read(b.join("losses.tsv")).unwrap());

    let replay = tmp.path().join("replay");
    ok(&["replay", s(&a.join("manifest.json")), "--out", s(&replay)]);
    assert_eq!(fs::read(a.join("probs.tsv")).unwrap(), fs::read(replay.join("probs.tsv")).unwrap());
    assert_eq!(json(&replay.join("manifest.json"))["out_dir"], s(&replay));
}

#[test]
fn entangled_single_factor_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = prepare(tmp.path(), "data", "0");
    let run = tmp.path().join("run");
    ok(&["train", "--data", s(&data), "--out", s(&run), "--k", "1", "--variant", "entangled", "--epochs", "3", "--d-out", "8"]);
    let report = json(&run.join("report.json"));
    assert_eq!(report["model"], "DINES-spd");
    assert_eq!(report["config"]["encoder"]["factors"], 1);
}

#[test]
fn seed_fan_out_summarizes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = prepare(tmp.path(), "data", "0");
    let run = tmp.path().join("run");
    let stdout = train(&data, &run, &["--seeds", "0..2", "--diagnostics"]);
    assert!(stdout.contains("over 3 seeds"), "{stdout}");
    let summary = json(&run.join("summary.json"));
    let values = summary["auc"]["values"].as_array().unwrap();
    assert_eq!(values.len(), 3);
    for (i, v) in values.iter().enumerate() {
        assert_eq!(json(&run.join(format!("seed-{i}/report.json")))["auc"], *v);
    }
    let mean = values.iter().map(|v| v.as_f64().unwrap()).sum::<f64>() / 3.0;
    assert!((summary["auc"]["mean"].as_f64().unwrap() - mean).abs() < 1e-9);
    assert!(summary["silhouette"]["mean"].is_number());
}

#[test]
fn divergence_exits_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let data = prepare(tmp.path(), "data", "0");
    let run = tmp.path().join("run");
    let out = dines(&[
        "train", "--data", s(&data), "--out", s(&run), "--k", "2", "--d-out", "8", "--epochs", "30", "--lr", "1e308",
        "--weight-decay", "0.01",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged"));
}

#[test]
fn ablate_runs_four_variants() {
    let tmp = tempfile::tempdir().unwrap();
    let data = prepare(tmp.path(), "data", "0");
    let run = tmp.path().join("run");
    ok(&["ablate", "--data", s(&data), "--out", s(&run), "--k", "2", "--d-out", "8", "--epochs", "2"]);
    let table = fs::read_to_string(run.join("ablation.tsv")).unwrap();
    let models: Vec<&str> = table.lines().skip(1).map(|l| l.split('\t').nth(1).unwrap()).collect();
    assert_eq!(models, ["DINES", "DINES-s", "DINES-sp", "DINES-spd"]);
}

#[test]
fn scale_writes_timing_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("scale");
    let common = ["--nodes", "200", "--edges", "1000", "--d-in", "8", "--k", "2", "--d-out", "8", "--warmup", "1", "--timing-epochs", "2"];
    let mut args = vec!["scale", "--out", s(&out), "--fractions", "0.25,0.5,1.0"];
    args.extend(common);
    let stdout = ok(&args);
    assert!(stdout.contains("R²"), "{stdout}");
    let rows: Vec<Vec<f64>> = fs::read_to_string(out.join("timing.tsv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split('\t').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2][2], 1000.0);
    assert!(rows.iter().all(|r| r[3] > 0.0 && r[4] > 0.0));

    let single = tmp.path().join("single");
    let mut args = vec!["scale", "--out", s(&single), "--fractions", "1.0"];
    args.extend(common);
    ok(&args);
    assert_eq!(fs::read_to_string(single.join("timing.tsv")).unwrap().lines().count(), 2);

    let bad = dines(&["scale", "--out", s(&single), "--fractions", "0.5,0.2", "--nodes", "50", "--edges", "100"]);
    assert!(!bad.status.success());
}
