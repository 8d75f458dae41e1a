use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mrmap::io::{save_dataset, DatasetMeta};
use mrmap::Matrix;

fn mrmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrmap")).args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    mrmap(args).status.code().expect("exit code")
}

fn run_ok(args: &[&str]) -> String {
    let out = mrmap(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        files.insert(path.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&path).unwrap());
    }
    files
}

fn assert_rerun_identical(dir: &Path, args: &[&str]) {
    run_ok(args);
    let first = snapshot(dir);
    run_ok(args);
    assert_eq!(first, snapshot(dir), "{args:?} is not reproducible");
}

const MIXTURE_SMALL: [&str; 10] = [
    "--n-train", "40", "--n-val", "50", "--train.epochs", "2", "--train.model.q", "8", "--train.model.ell", "3",
];

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&[]), 2);
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["gauss1d", "--out", out, "--bogus", "1"]), 2);
    assert_eq!(code(&["gauss1d", "--out", out, "--sigma", "-1"]), 2);
    assert_eq!(code(&["gauss1d", "--out", out, "--seed", "minus-one"]), 2);
    assert_eq!(code(&["gauss1d", "--out", out, "--config", "/no/such/file.json"]), 2);
    assert_eq!(code(&["recover", "--out", out, "--checkpoint", "/no/such/ckpt.json", "--dataset", "/no/such.csv"]), 2);
    assert_eq!(code(&["gauss1d", "--out", out, "--ns", "[50]", "--seeds", "2"]), 0);
}

#[test]
fn runtime_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    run_ok(&["gen-images", "--out", &d("img"), "--n-train", "16", "--n-test", "4", "--width", "2", "--height", "2"]);
    run_ok(&["mixture", "--out", &d("mix")]
        .into_iter()
        .chain(MIXTURE_SMALL)
        .collect::<Vec<_>>());
    // A 2-dimensional checkpoint against a 4-dimensional dataset.
    let args = ["recover", "--out", &d("rec"), "--checkpoint", &d("mix/checkpoint.json"), "--dataset", &d("img/images_test.csv")];
    let out = mrmap(&args);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));

    let ckpt = d("mix/checkpoint.json");
    let text = fs::read_to_string(&ckpt).unwrap();
    fs::write(&ckpt, text.replacen("\"format_version\": 1", "\"format_version\": 2", 1)).unwrap();
    let out = mrmap(&["recover", "--out", &d("rec"), "--checkpoint", &ckpt, "--dataset", &d("img/images_test.csv")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));
}

#[test]
fn every_command_is_reproducible_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let d = |s: &str| dir.path().join(s).to_string_lossy().into_owned();

    assert_rerun_identical(&dir.path().join("g"), &["gauss1d", "--out", &d("g"), "--ns", "[100,1000]", "--seeds", "5", "--seed", "4"]);
    assert_rerun_identical(
        &dir.path().join("l"),
        &["langevin", "--out", &d("l"), "--snapshots", "[10,20]", "--chains", "30", "--ratio-chains", "3", "--seed", "4"],
    );
    let mix_out = d("m");
    let mix: Vec<&str> = ["mixture", "--out", &mix_out, "--seed", "4"].into_iter().chain(MIXTURE_SMALL).collect();
    assert_rerun_identical(&dir.path().join("m"), &mix);
    let gen = ["gen-images", "--out", &d("i"), "--n-train", "24", "--n-test", "6", "--width", "4", "--height", "4", "--seed", "4"];
    assert_rerun_identical(&dir.path().join("i"), &gen);
    let train = [
        "train", "--out", &d("t"), "--dataset", &d("i/images_train.csv"), "--train.epochs", "2", "--train.batch-size", "8",
        "--train.model.q", "16", "--train.model.ell", "2", "--seed", "4",
    ];
    assert_rerun_identical(&dir.path().join("t"), &train);
    let recover = [
        "recover", "--out", &d("r"), "--checkpoint", &d("t/checkpoint.json"), "--dataset", &d("i/images_test.csv"),
        "--masks-per-image", "2", "--seed", "4",
    ];
    assert_rerun_identical(&dir.path().join("r"), &recover);

    let before = snapshot(&dir.path().join("g"));
    run_ok(&["gauss1d", "--out", &d("g"), "--ns", "[100,1000]", "--seeds", "5", "--seed", "5"]);
    assert_ne!(before["gauss1d.csv"], snapshot(&dir.path().join("g"))["gauss1d.csv"]);
}

#[test]
fn tiny_samples_flag_negative_estimates_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_ok(&["gauss1d", "--out", dir.path().to_str().unwrap(), "--ns", "[10]", "--seeds", "200"]);
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert!(v["cells"][0]["negative_theta_hat"].as_u64().unwrap() > 0);
    let csv = fs::read_to_string(dir.path().join("gauss1d.csv")).unwrap();
    assert!(csv.starts_with("n,seed,theta_star,theta_hat,theta_hat_negative,theta_tilde\n"));
    assert_eq!(csv.lines().count(), 201);
}

#[test]
fn langevin_without_iterations_returns_the_start_state() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["langevin", "--out", dir.path().to_str().unwrap(), "--snapshots", "[0]", "--chains", "5"]);
    let csv = fs::read_to_string(dir.path().join("langevin.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| l.contains(",langevin,")).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.starts_with("0,") && r.ends_with(",0,0,")));
    assert!(dir.path().join("langevin_0.svg").exists());
}

#[test]
fn default_langevin_emits_four_figures_and_growing_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_ok(&["langevin", "--out", dir.path().to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    let ratios: Vec<f64> = v["snapshots"].as_array().unwrap().iter().map(|s| s["slow_variance_ratio"].as_f64().unwrap()).collect();
    assert_eq!(ratios.len(), 4);
    assert!(ratios.windows(2).all(|w| w[0] <= w[1]), "{ratios:?}");
    for k in [1000, 2000, 3000, 4000] {
        assert!(dir.path().join(format!("langevin_{k}.svg")).exists());
    }
}

#[test]
fn untrained_mixture_model_gives_finite_well_formed_output() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["mixture", "--out", dir.path().to_str().unwrap(), "--train.epochs", "0", "--n-val", "30"]);
    let csv = fs::read_to_string(dir.path().join("mixture_val.csv")).unwrap();
    let mut lines = csv.lines();
    let width = lines.next().unwrap().split(',').count();
    assert_eq!(width, 3 + 3 * 2 + 3);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 30);
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), width);
        assert!(fields.iter().all(|f| f.parse::<f64>().map_or(false, f64::is_finite)));
    }
}

#[test]
fn all_zero_images_are_skipped_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let d = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    run_ok(&["gen-images", "--out", &d("i"), "--n-train", "16", "--n-test", "2", "--width", "2", "--height", "2"]);
    run_ok(&["train", "--out", &d("t"), "--dataset", &d("i/images_train.csv"), "--train.epochs", "1", "--train.batch-size", "4", "--train.model.q", "4", "--train.model.ell", "2"]);
    let images = Matrix::from_rows(&[&[0.0, 0.2], &[0.0, 0.4], &[0.0, 0.6], &[0.0, 0.8]]).unwrap();
    let meta = DatasetMeta { format_version: 1, kind: "images".into(), dim: 4, count: 2, width: Some(2), height: Some(2), seed: 0 };
    save_dataset(&dir.path().join("zero.csv"), &images, &meta).unwrap();
    let out = mrmap(&["recover", "--out", &d("r"), "--checkpoint", &d("t/checkpoint.json"), "--dataset", &d("zero.csv"), "--masks-per-image", "2"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("image 0 is all zero"));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["skipped_zero_images"], serde_json::json!([0]));
    assert_eq!(v["fractions"][0]["count"], 2);
}
