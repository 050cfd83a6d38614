use std::path::Path;
use std::process::{Command, Output};

fn kos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kos"))
        .args(args)
        .output()
        .expect("run kos")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_writes_expected_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let m2 = dir.path().join("m2.csv");
    let out = kos(&["simulate", "--model", "2", "--seed", "7", "--out", p(&m2)]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("n = 400"));
    let lines = std::fs::read_to_string(&m2).unwrap().lines().count();
    assert_eq!(lines, 401);

    let m1 = dir.path().join("m1.csv");
    let out = kos(&["simulate", "--model", "1", "--seed", "7", "--out", p(&m1)]);
    assert!(out.status.success());
    let rows = std::fs::read_to_string(&m1).unwrap().lines().count() - 1;
    assert!((230..300).contains(&rows), "{rows}");
}

#[test]
fn bad_arguments_are_usage_errors() {
    let out = kos(&["simulate", "--model", "3", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let out = kos(&["fit", "--train", "x.csv", "--gamma", "lots"]);
    assert_eq!(out.status.code(), Some(2));
    let out = kos(&["fit", "--train", "x.csv", "--sigma2", "gcv"]);
    assert_eq!(out.status.code(), Some(2));
    let out = kos(&["fit", "--train", "x.csv", "--sparse", "maybe"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_files_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = kos(&[
        "predict",
        "--model",
        p(&dir.path().join("nope.json")),
        "--data",
        "x.csv",
        "--out",
        p(&dir.path().join("pred.csv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
}

#[test]
fn fixed_fit_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("m1.csv");
    assert!(kos(&["simulate", "--model", "1", "--seed", "3", "--out", p(&data)]).status.success());
    let model = dir.path().join("model.json");
    let out = kos(&[
        "fit", "--train", p(&data), "--sigma2", "0.5", "--gamma", "0.001", "--lambda", "0",
        "--sparse", "false", "--model-out", p(&model),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("(Fixed)"), "{text}");
    assert!(text.contains("training error = 0"), "{text}");

    let doc = std::fs::read_to_string(&model).unwrap();
    assert!(doc.contains("\"sigma2_source\": \"fixed\""));
    assert!(doc.contains("\"lambda_source\": \"fixed\""));
    assert!(doc.contains("\"sigma2_cv_errors\": []"));

    let pred = dir.path().join("pred.csv");
    let out = kos(&["predict", "--model", p(&model), "--data", p(&data), "--out", p(&pred)]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("error rate = 0"));
    let lines: Vec<String> = std::fs::read_to_string(&pred).unwrap().lines().map(String::from).collect();
    assert_eq!(lines[0], "row,projection,predicted_label");
    assert_eq!(lines.len(), std::fs::read_to_string(&data).unwrap().lines().count());
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("m1.csv");
    assert!(kos(&["simulate", "--model", "1", "--seed", "4", "--out", p(&data)]).status.success());
    let config = dir.path().join("fit.toml");
    std::fs::write(
        &config,
        format!(
            "train = {:?}\nsigma2 = 0.5\ngamma = \"0.01\"\nlambda = 0.001\nsparse = true\n",
            p(&data)
        ),
    )
    .unwrap();
    let out = kos(&["fit", "--config", p(&config), "--gamma", "0.02"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("sigma2 = 0.5 (Fixed)"), "{text}");
    assert!(text.contains("gamma  = 0.02 (Fixed)"), "{text}");
    assert!(text.contains("lambda = 0.001 (Fixed)"), "{text}");

    std::fs::write(&config, "unknown_key = 1\n").unwrap();
    let out = kos(&["fit", "--config", p(&config)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn tune_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("m1.csv");
    assert!(kos(&["simulate", "--model", "1", "--seed", "5", "--out", p(&data)]).status.success());
    let report = dir.path().join("report.json");
    let out = kos(&["tune", "--train", p(&data), "--lambda", "0", "--seed", "5", "--out", p(&report)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("\"sigma2_source\": \"cross_validated\""));
    assert!(text.contains("\"gamma_method\": \"stabilization\""));
    assert!(text.contains("\"lambda_source\": \"fixed\""));
}

#[test]
fn benchmark_single_replication_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out_dir in [&a, &b] {
        let out = kos(&["benchmark", "--model", "1", "--replications", "1", "--seed", "11", "--out", p(out_dir)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let rows_a = std::fs::read(a.join("rows.csv")).unwrap();
    assert_eq!(rows_a, std::fs::read(b.join("rows.csv")).unwrap());
    let text = String::from_utf8(rows_a).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(a.join("summary.json").exists());
}
