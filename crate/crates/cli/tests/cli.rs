use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn splinenet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splinenet")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const TINY: [&str; 16] = [
    "--n-per-class", "10", "--min-len", "5", "--max-len", "10", "--epochs", "2", "--kernels", "2", "--hidden",
    "2", "--segments", "2", "--gru-hidden", "4",
];

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("ck.json");
    assert_eq!(code(&splinenet(&["train", "--out", p(&ck), "--bogus"])), 2);
    assert_eq!(code(&splinenet(&["bench", "--reps", "0"])), 2);
    assert_eq!(code(&splinenet(&["frobnicate"])), 2);

    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[model]\nhiden = 3\n").unwrap();
    let o = splinenet(&["train", "--out", p(&ck), "--config", p(&cfg)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("hiden"), "{}", stderr(&o));
    assert!(!ck.exists());

    assert_eq!(code(&splinenet(&["--help"])), 0);
}

#[test]
fn bad_input_exits_3_and_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.jsonl");
    std::fs::write(&data, "{\"times\":[0,1],\"values\":[[1],[2]]}\n{\"times\":[1,0],\"values\":[[1],[2]]}\n").unwrap();
    let o = splinenet(&["impute", "--input", p(&data)]);
    assert_eq!(code(&o), 3);
    let err = stderr(&o);
    assert!(err.contains("bad.jsonl") && err.contains("line 2"), "{err}");

    let missing = dir.path().join("nope.jsonl");
    assert_eq!(code(&splinenet(&["impute", "--input", p(&missing)])), 3);
}

#[test]
fn impute_writes_csv_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.jsonl");
    std::fs::write(&data, "{\"id\":\"a\",\"times\":[0,1,2],\"values\":[[1,null],[null,4],[3,5]]}\n").unwrap();
    let o = splinenet(&["impute", "--input", p(&data), "--fit", "linear", "--times", "0.5,1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# manifest: {\"tool\":\"splinenet\""));
    assert_eq!(lines.next().unwrap(), "series_id,time,channel,value");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.contains(&"a,1.0,0,2.0") || rows.contains(&"a,1,0,2"), "{rows:?}");
}

#[test]
fn train_then_eval_reproduces_the_test_metric() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("ck.json");
    let report = dir.path().join("report.json");
    let hist = dir.path().join("hist.json");
    let mut args = vec!["train", "--out", p(&ck), "--report", p(&report), "--history", p(&hist), "--seed", "3"];
    args.extend(TINY);
    let o = splinenet(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("(1 run)"));

    let rep = read_json(&report);
    let trained = rep["runs"][0]["test_metric"].as_f64().unwrap();
    let manifest = &read_json(&ck)["manifest"]["manifest"];
    assert_eq!(manifest["config"]["seed"], 3);
    assert_eq!(manifest["config"]["model"]["kernels"], 2);
    assert!(read_json(&hist)["history"]["epochs"].as_array().unwrap().len() <= 2);

    let eval = dir.path().join("eval.json");
    let o = splinenet(&["eval", "--checkpoint", p(&ck), "--report", p(&eval)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let e = read_json(&eval);
    assert_eq!(e["value"].as_f64().unwrap().to_bits(), trained.to_bits());
    assert_eq!(e["subset"], "test");

    let o = splinenet(&["eval", "--checkpoint", p(&ck), "--subset", "all"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("all accuracy"));
    // three synthetic classes: AUROC is refused
    assert_eq!(code(&splinenet(&["eval", "--checkpoint", p(&ck), "--metric", "auroc"])), 2);
}

#[test]
fn repeats_report_mean_and_sample_std() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("ck.json");
    let report = dir.path().join("report.json");
    let hist = dir.path().join("h.json");
    let mut args = vec!["train", "--out", p(&ck), "--history", p(&hist), "--report", p(&report), "--repeats", "4"];
    args.extend(TINY);
    let o = splinenet(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for s in 0..4 {
        assert!(dir.path().join(format!("ck-seed{s}.json")).exists());
        assert!(dir.path().join(format!("h-seed{s}.json")).exists());
    }
    let rep = read_json(&report);
    let xs: Vec<f64> = rep["runs"].as_array().unwrap().iter().map(|r| r["test_metric"].as_f64().unwrap()).collect();
    assert_eq!(xs.len(), 4);
    let mean = xs.iter().sum::<f64>() / 4.0;
    let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
    assert!((rep["mean"].as_f64().unwrap() - mean).abs() < 1e-12);
    assert!((rep["std"].as_f64().unwrap() - std).abs() < 1e-12);
    assert!(String::from_utf8_lossy(&o.stdout).contains("(4 runs)"));
}

/// Class 0 sits at +1 and class 1 at -1; kernel 0 is set to +1 and kernel
/// 1 to -1, so each kernel must rank first for its own class.
#[test]
fn inspect_ranks_the_matching_kernel_first() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.jsonl");
    let mut lines = String::new();
    for i in 0..20 {
        let (label, v) = if i % 2 == 0 { (0, 1.0) } else { (1, -1.0) };
        let times: Vec<f64> = (0..6).map(|k| k as f64 / 5.0).collect();
        let values: Vec<Vec<f64>> = times.iter().map(|_| vec![v]).collect();
        lines += &serde_json::json!({"label": label, "times": times, "values": values}).to_string();
        lines.push('\n');
    }
    std::fs::write(&data, lines).unwrap();
    let ck = dir.path().join("ck.json");
    let o = splinenet(&[
        "train", "--data", p(&data), "--out", p(&ck), "--layers", "kernel", "--kernels", "2", "--kernel-grid", "3",
        "--epochs", "1", "--segments", "2", "--gru-hidden", "4",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let mut ckv = read_json(&ck);
    let tensors = ckv["tensors"].as_array_mut().unwrap();
    let kernels = tensors.iter_mut().find(|t| t["name"] == "block0.kernels").unwrap();
    // 2 kernels x 2 pieces x 1 channel x (order 1 + 1) coefficients
    let coeffs: Vec<f64> = [1.0, 0.0, 1.0, 0.0, -1.0, 0.0, -1.0, 0.0].to_vec();
    kernels["data"] = serde_json::json!(coeffs);
    std::fs::write(&ck, serde_json::to_string(&ckv).unwrap()).unwrap();

    let out = dir.path().join("inspect");
    let o = splinenet(&["inspect-kernels", "--checkpoint", p(&ck), "--out-dir", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.join("block0_kernel0.svg").exists() && out.join("block0_kernel1.svg").exists());

    let ranking = std::fs::read_to_string(out.join("ranking.csv")).unwrap();
    let rows: Vec<Vec<String>> = ranking
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    let rank = |kernel: &str, class: &str| {
        rows.iter().find(|r| r[1] == kernel && r[2] == class).map(|r| r[4].clone()).unwrap()
    };
    assert_eq!(rank("0", "0"), "1");
    assert_eq!(rank("1", "1"), "1");
    assert_eq!(rank("1", "0"), "2");

    let kernels_csv = std::fs::read_to_string(out.join("kernels.csv")).unwrap();
    assert_eq!(kernels_csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 256);

    // a multiply-mode model has nothing to rank
    let ck2 = dir.path().join("mul.json");
    let o = splinenet(&[
        "train", "--data", p(&data), "--out", p(&ck2), "--layers", "kernel", "--kernel-mode", "multiply", "--kernels",
        "1", "--epochs", "1", "--segments", "2", "--gru-hidden", "4",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(code(&splinenet(&["inspect-kernels", "--checkpoint", p(&ck2), "--out-dir", p(&out)])), 3);
}

#[test]
fn bench_writes_a_row_per_algorithm_and_degree() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let o = splinenet(&["bench", "--out", p(&csv), "--min-degree", "4", "--max-degree", "32", "--reps", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("# manifest: "));
    assert_eq!(text.lines().count(), 2 + 4 * 4);
    assert!(String::from_utf8_lossy(&o.stdout).contains("crossover"));
}

#[test]
fn synth_and_csv_import_produce_loadable_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("s.jsonl");
    let o = splinenet(&["synth", "--out", p(&data), "--n-per-class", "4", "--seed", "9"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(&data).unwrap().lines().count(), 12);
    assert_eq!(read_json(&dir.path().join("s.jsonl.manifest.json"))["config"]["seed"], 9);

    let csv = dir.path().join("long.csv");
    std::fs::write(&csv, "series_id,time,channel,value,label\na,0,0,1.5,1\na,1,0,2.5,1\nb,0,0,-1,0\nb,2,0,3,0\n").unwrap();
    let out = dir.path().join("long.jsonl");
    let o = splinenet(&["import-csv", "--input", p(&csv), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = splinenet(&["impute", "--input", p(&out), "--fit", "linear"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 2 + 4);
}
