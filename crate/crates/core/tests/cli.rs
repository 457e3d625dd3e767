use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_dcevae");

fn dcevae(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = dcevae(args);
    assert!(
        out.status.success(),
        "dcevae {args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn prepare_scm(out: &Path, n: usize) {
    ok(&[
        "prepare",
        "--scm",
        "default",
        "--n",
        &n.to_string(),
        "--out",
        p(out),
    ]);
}

fn write_config(path: &Path, extra: &str) -> PathBuf {
    let body =
        format!(r#"{{"latent_d": 2, "latent_r": 2, "hidden": [16], "batch_size": 128{extra}}}"#);
    fs::write(path, body).unwrap();
    path.to_path_buf()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn history_column(dir: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(dir.join("history.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(k).unwrap().parse().unwrap())
        .collect()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

#[test]
fn prepare_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    prepare_scm(&a, 500);
    prepare_scm(&b, 500);
    let (fa, fb) = (files(&a), files(&b));
    assert!(fa.iter().any(|(n, _)| n == "train.csv"));
    assert!(fa.iter().any(|(n, _)| n == "truth.json"));
    assert_eq!(fa, fb);
}

#[test]
fn missing_input_is_a_usage_error_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dcevae(&[
        "prepare",
        "--adult",
        "/nonexistent/adult.data",
        "--out",
        p(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/adult.data"));
}

#[test]
fn unknown_subcommand_and_missing_mode_exit_2() {
    assert_eq!(dcevae(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        dcevae(&["theory", "--out", "/tmp/x"]).status.code(),
        Some(2)
    );
    assert_eq!(dcevae(&[]).status.code(), Some(2));
}

#[test]
fn training_and_reporting_are_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    prepare_scm(&data, 600);
    let cfg = write_config(&tmp.path().join("cfg.json"), r#", "epochs": 2"#);
    let mut reports = Vec::new();
    for run in ["r1", "r2"] {
        let model = tmp.path().join(run);
        ok(&[
            "train",
            "--config",
            p(&cfg),
            "--data",
            p(&data),
            "--out",
            p(&model),
        ]);
        let report = model.join("report");
        let ck = model.join("checkpoint.json");
        ok(&[
            "report",
            "--data",
            p(&data),
            "--checkpoint",
            p(&ck),
            "--out",
            p(&report),
        ]);
        reports.push((
            fs::read(ck).unwrap(),
            fs::read(report.join("report.json")).unwrap(),
        ));
        let manifest = json(&model.join("manifest.json"));
        assert_eq!(manifest["finished_unix"], 1700000000);
    }
    assert_eq!(reports[0], reports[1]);
    let same = ok(&[
        "diff",
        p(&tmp.path().join("r1/report/report.json")),
        p(&tmp.path().join("r2/report/report.json")),
    ]);
    assert!(same.contains("0 differing numeric fields"), "{same}");
}

#[test]
fn diff_refuses_reports_from_different_configs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    prepare_scm(&data, 400);
    for (run, seed) in [("r1", 0), ("r2", 1)] {
        let cfg = write_config(
            &tmp.path().join(format!("{run}.json")),
            &format!(r#", "epochs": 1, "seed": {seed}"#),
        );
        let model = tmp.path().join(run);
        ok(&[
            "train",
            "--config",
            p(&cfg),
            "--data",
            p(&data),
            "--out",
            p(&model),
        ]);
        let ck = model.join("checkpoint.json");
        ok(&[
            "report",
            "--data",
            p(&data),
            "--checkpoint",
            p(&ck),
            "--out",
            p(&model.join("report")),
        ]);
    }
    let out = dcevae(&[
        "diff",
        p(&tmp.path().join("r1/report/report.json")),
        p(&tmp.path().join("r2/report/report.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("different configs"));
}

#[test]
fn zero_tc_weight_writes_a_zero_tc_column() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    prepare_scm(&data, 400);
    let cfg = write_config(
        &tmp.path().join("cfg.json"),
        r#", "epochs": 3, "beta_tc": 0.0"#,
    );
    let model = tmp.path().join("model");
    ok(&[
        "train",
        "--config",
        p(&cfg),
        "--data",
        p(&data),
        "--out",
        p(&model),
    ]);
    let tc = history_column(&model, "tc");
    assert_eq!(tc.len(), 3);
    assert!(tc.iter().all(|v| *v == 0.0), "{tc:?}");
}

#[test]
fn scm_training_reduces_the_loss_over_fifty_epochs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    prepare_scm(&data, 2000);
    let cfg = write_config(&tmp.path().join("cfg.json"), r#", "epochs": 50"#);
    let model = tmp.path().join("model");
    ok(&[
        "train",
        "--config",
        p(&cfg),
        "--data",
        p(&data),
        "--out",
        p(&model),
    ]);
    let total = history_column(&model, "total");
    assert_eq!(total.len(), 50);
    assert!(total[49] < total[0], "{} -> {}", total[0], total[49]);
}

#[test]
fn divergent_learning_rate_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    prepare_scm(&data, 400);
    let cfg = write_config(
        &tmp.path().join("cfg.json"),
        r#", "epochs": 3, "learning_rate": 1e9"#,
    );
    let out = dcevae(&[
        "train",
        "--config",
        p(&cfg),
        "--data",
        p(&data),
        "--out",
        p(&tmp.path().join("m")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite"));
}

#[test]
fn report_against_itself_has_zero_chi_square() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    prepare_scm(&data, 500);
    let out = tmp.path().join("report");
    ok(&[
        "report",
        "--data",
        p(&data),
        "--generated",
        p(&data),
        "--out",
        p(&out),
    ]);
    assert_eq!(json(&out.join("report.json"))["chi2"], 0.0);
}

#[test]
fn theory_with_huge_beta_is_block_diagonal() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("theory");
    ok(&[
        "theory",
        "--spec",
        "random:3,2,1e6",
        "--seed",
        "4",
        "--out",
        p(&out),
    ]);
    let report = json(&out.join("covariance.json"));
    assert_eq!(report["agreement"], true);
    assert!(report["block_score"].as_f64().unwrap() < 1e-3, "{report}");
    assert!(out.join("sigma_star.csv").exists());
}

#[test]
fn theory_on_a_checkpoint_writes_group_covariances() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    prepare_scm(&data, 400);
    let cfg = write_config(&tmp.path().join("cfg.json"), r#", "epochs": 1"#);
    let model = tmp.path().join("model");
    ok(&[
        "train",
        "--config",
        p(&cfg),
        "--data",
        p(&data),
        "--out",
        p(&model),
    ]);
    let out = tmp.path().join("theory");
    let ck = model.join("checkpoint.json");
    ok(&[
        "theory",
        "--checkpoint",
        p(&ck),
        "--data",
        p(&data),
        "--out",
        p(&out),
    ]);
    for group in ["all", "a0", "a1"] {
        assert!(out.join(format!("sigma_empirical_{group}.csv")).exists());
    }
}
