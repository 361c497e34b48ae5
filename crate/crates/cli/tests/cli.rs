use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use xnn::explain;
use xnn::train::{split_indices, FitReport};
use xnn::Dataset;

fn xnn_cmd(args: &[&str]) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_xnn"));
    cmd.args(args).env_remove("XNN_SEED");
    cmd
}

fn xnn_run(args: &[&str]) -> Output {
    xnn_cmd(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = xnn_run(args);
    assert!(
        out.status.success(),
        "xnn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Flags of the Legendre recipe used throughout.
const LEGENDRE_FLAGS: &[&str] = &[
    "--subnets", "5", "--hidden", "12,6", "--lr", "0.01", "--epochs", "600", "--patience", "200",
    "--lambda-beta", "0.01", "--lambda-gamma", "0.01", "--penalty-warmup-epochs", "150",
];

struct LegendreRun {
    dir: PathBuf,
    data: PathBuf,
    model: PathBuf,
    report: FitReport,
}

/// One Legendre dataset and fitted model shared by the tests below.
fn legendre_run() -> &'static LegendreRun {
    static RUN: OnceLock<LegendreRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap().keep();
        let data = dir.join("legendre.csv");
        let model = dir.join("legendre.xnn");
        ok(&["simulate", "legendre", "--n", "10000", "--seed", "7", "--out", s(&data)]);
        let mut args = vec!["train", "--data", s(&data), "--model-out", s(&model)];
        args.extend_from_slice(LEGENDRE_FLAGS);
        ok(&args);
        let report: FitReport =
            serde_json::from_str(&fs::read_to_string(dir.join("legendre.xnn.report.json")).unwrap())
                .unwrap();
        LegendreRun { dir, data, model, report }
    })
}

#[test]
fn simulate_writes_data_sidecar_and_manifest() {
    let run = legendre_run();
    let text = fs::read_to_string(&run.data).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,x3,x4,x5,y"));
    assert_eq!(lines.count(), 10_000);
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.dir.join("legendre.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(sidecar["generator_tag"], "legendre");
    assert_eq!(sidecar["seed"], 7);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.dir.join("legendre.csv.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    assert_eq!(manifest["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&["simulate", "interaction", "--n", "10", "--seed", "1", "--out", s(&a)]);
    ok(&["simulate", "interaction", "--n", "10", "--seed", "1", "--out", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn environment_seed_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let out = xnn_cmd(&["simulate", "nonlinear", "--n", "20", "--seed", "1", "--out", s(&a)])
        .env("XNN_SEED", "5")
        .output()
        .unwrap();
    assert!(out.status.success());
    ok(&["simulate", "nonlinear", "--n", "20", "--seed", "5", "--out", s(&b)]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let bad = xnn_cmd(&["simulate", "nonlinear", "--n", "20", "--out", s(&a)])
        .env("XNN_SEED", "seven")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn simulated_nonlinear_noise_variance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("nl.csv");
    ok(&["simulate", "nonlinear", "--n", "10000", "--seed", "3", "--out", s(&path)]);
    let data = Dataset::load_csv(&path, None).unwrap();
    let resid: Vec<f64> = data
        .features
        .rows()
        .into_iter()
        .zip(data.response.iter())
        .map(|(x, y)| y - x[0].exp() * x[1].sin())
        .collect();
    let n = resid.len() as f64;
    let mean = resid.iter().sum::<f64>() / n;
    let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((var - 0.01).abs() <= 6e-4, "variance {var}");
}

#[test]
fn unknown_generator_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = xnn_run(&["simulate", "sinc", "--out", s(&dir.path().join("x.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sinc"));
}

#[test]
fn bad_flags_are_usage_errors() {
    let run = legendre_run();
    let model = run.dir.join("never.xnn");
    let out = xnn_run(&["train", "--data", s(&run.data), "--model-out", s(&model), "--epochs", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("max_epochs"));
    let out = xnn_run(&["train", "--data", s(&run.data), "--model-out", s(&model), "--lr", "fast"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(xnn_run(&["fly"]).status.code(), Some(2));
    assert!(!model.exists());
}

#[test]
fn legendre_training_finds_three_subnetworks() {
    let run = legendre_run();
    assert_eq!(run.report.active_subnet_count, 3, "{:?}", run.report);
    assert!(run.report.final_holdout_mse <= 0.01);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.dir.join("legendre.xnn.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["config"]["training"]["lambda_beta"], 0.01);
    assert_eq!(manifest["inputs"][0]["path"], s(&run.data));
}

#[test]
fn training_twice_gives_identical_models() {
    let run = legendre_run();
    let a = run.dir.join("short_a.xnn");
    let b = run.dir.join("short_b.xnn");
    for path in [&a, &b] {
        ok(&[
            "train", "--data", s(&run.data), "--model-out", s(path), "--subnets", "3", "--hidden", "4",
            "--epochs", "3", "--seed", "11",
        ]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn explain_writes_profiles_matching_library() {
    let run = legendre_run();
    let out_dir = run.dir.join("explain");
    ok(&["explain", "--model", s(&run.model), "--data", s(&run.data), "--out-dir", s(&out_dir)]);
    for name in ["profiles.csv", "explanation.json", "sparsity.json", "interactions.json", "manifest.json"] {
        assert!(out_dir.join(name).exists(), "{name}");
    }
    let records = explain::read_profiles_csv(fs::File::open(out_dir.join("profiles.csv")).unwrap()).unwrap();
    let series = |kind: &str| {
        let mut ids: Vec<usize> = records
            .iter()
            .filter(|r| r.profile_type == kind)
            .map(|r| r.index)
            .collect();
        ids.dedup();
        ids
    };
    assert_eq!(series("ridge"), vec![0, 1, 2, 3, 4]);
    assert_eq!(series("conditional"), vec![0, 1, 2, 3, 4]);

    let model = xnn::load_model(&run.model).unwrap();
    let data = Dataset::load_csv(&run.data, None).unwrap();
    let x = model.standardization.as_ref().unwrap().standardize_features(data.features.view());
    let ridge = explain::ridge_profiles(&model, x.view()).unwrap();
    let conditional: Vec<_> = (0..5).map(|j| explain::conditional_effects(&model, j).unwrap()).collect();
    let expected = explain::profile_records(&ridge, &conditional);
    assert_eq!(records.len(), expected.len());
    for (got, want) in records.iter().zip(&expected) {
        assert_eq!((&got.profile_type, got.index, &got.series_id), (&want.profile_type, want.index, &want.series_id));
        assert!((got.grid_value - want.grid_value).abs() <= 1e-9);
        assert!((got.value - want.value).abs() <= 1e-9);
    }

    let sparsity: explain::SparsityReport =
        serde_json::from_str(&fs::read_to_string(out_dir.join("sparsity.json")).unwrap()).unwrap();
    assert_eq!(sparsity.active_subnets.len(), run.report.active_subnet_count);
}

#[test]
fn explain_rejects_mismatched_features() {
    let run = legendre_run();
    let other = run.dir.join("interaction.csv");
    ok(&["simulate", "interaction", "--n", "50", "--seed", "2", "--out", s(&other)]);
    let out = xnn_run(&[
        "explain", "--model", s(&run.model), "--data", s(&other), "--out-dir", s(&run.dir.join("bad")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("expected 5, got 6"), "{err}");
}

fn read_predictions(path: &Path) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("row,prediction"));
    lines
        .enumerate()
        .map(|(i, line)| {
            let (row, value) = line.split_once(',').unwrap();
            assert_eq!(row.parse::<usize>().unwrap(), i);
            value.parse().unwrap()
        })
        .collect()
}

#[test]
fn predict_reproduces_training_loss() {
    let run = legendre_run();
    let out = run.dir.join("pred.csv");
    ok(&["predict", "--model", s(&run.model), "--data", s(&run.data), "--out", s(&out)]);
    let pred = read_predictions(&out);
    let data = Dataset::load_csv(&run.data, None).unwrap();
    assert_eq!(pred.len(), data.n_rows());
    let (train, _) = split_indices(data.n_rows(), 0.2, 0);
    let mse = train.iter().map(|&r| (pred[r] - data.response[r]).powi(2)).sum::<f64>() / train.len() as f64;
    assert!((mse - run.report.final_train_mse).abs() <= 1e-6, "{mse} vs {}", run.report.final_train_mse);
}

fn write_probe(path: &Path, data: &Dataset, base: &[f64]) {
    let probe = Dataset::new(data.features.clone(), base.to_vec().into(), data.feature_names.clone(), "probe").unwrap();
    probe
        .write_csv_with_response(fs::File::create(path).unwrap(), "base_prediction")
        .unwrap();
}

#[test]
fn distill_constant_teacher() {
    let run = legendre_run();
    let data = Dataset::load_csv(&run.data, None).unwrap().select_rows(&(0..2000).collect::<Vec<_>>());
    let probe = run.dir.join("constant_probe.csv");
    write_probe(&probe, &data, &vec![1.5; data.n_rows()]);
    let model = run.dir.join("constant.xnn");
    ok(&[
        "distill", "--probe", s(&probe), "--model-out", s(&model), "--subnets", "3", "--hidden", "6",
        "--epochs", "30", "--lr", "0.01",
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.dir.join("constant.xnn.report.json")).unwrap()).unwrap();
    assert!(report["fidelity"]["surrogate_mse"].as_f64().unwrap() <= 1e-6, "{report}");
}

#[test]
fn distill_self_teacher() {
    let run = legendre_run();
    let probe_data = run.dir.join("probe_source.csv");
    ok(&["simulate", "legendre", "--n", "10000", "--seed", "8", "--out", s(&probe_data)]);
    let pred_path = run.dir.join("teacher_pred.csv");
    ok(&["predict", "--model", s(&run.model), "--data", s(&probe_data), "--out", s(&pred_path)]);
    let data = Dataset::load_csv(&probe_data, None).unwrap();
    let probe = run.dir.join("teacher_probe.csv");
    write_probe(&probe, &data, &read_predictions(&pred_path));
    let student = run.dir.join("student.xnn");
    let mut args = vec!["distill", "--probe", s(&probe), "--model-out", s(&student)];
    args.extend_from_slice(LEGENDRE_FLAGS);
    ok(&args);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.dir.join("student.xnn.report.json")).unwrap()).unwrap();
    let r2 = report["fidelity"]["r_squared"].as_f64().unwrap();
    assert!(r2 >= 0.999, "r_squared {r2}");
}

#[test]
fn distill_requires_prediction_column() {
    let run = legendre_run();
    let out = xnn_run(&["distill", "--probe", s(&run.data), "--model-out", s(&run.dir.join("x.xnn"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("base_prediction"));
}

#[test]
fn rerun_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let model = dir.path().join("m.xnn");
    let out = xnn_cmd(&["simulate", "interaction", "--n", "300", "--out", s(&data)])
        .env("XNN_SEED", "9")
        .output()
        .unwrap();
    assert!(out.status.success());
    ok(&[
        "train", "--data", s(&data), "--model-out", s(&model), "--subnets", "2", "--hidden", "3",
        "--epochs", "4", "--seed", "2",
    ]);
    let manifests = [
        dir.path().join("d.csv.manifest.json"),
        dir.path().join("m.xnn.manifest.json"),
    ];
    let before: Vec<Vec<u8>> = [&data, &model].iter().map(|p| fs::read(p).unwrap()).collect();
    fs::remove_file(&data).unwrap();
    fs::remove_file(&model).unwrap();
    for m in &manifests {
        ok(&["rerun", "--manifest", s(m)]);
    }
    let after: Vec<Vec<u8>> = [&data, &model].iter().map(|p| fs::read(p).unwrap()).collect();
    assert_eq!(before, after);

    // A tampered output no longer matches the recorded checksum.
    let mut manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifests[1]).unwrap()).unwrap();
    manifest["outputs"][0]["sha256"] = "00".into();
    fs::write(&manifests[1], manifest.to_string()).unwrap();
    let out = xnn_run(&["rerun", "--manifest", s(&manifests[1])]);
    assert_eq!(out.status.code(), Some(1));
}
