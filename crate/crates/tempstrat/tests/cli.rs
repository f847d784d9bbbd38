//! End-to-end tests of the `tempstrat` binary: exit codes, output files,
//! and byte-level determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempstrat::config::RunConfig;
use tempstrat::synth::reference_cohort;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tempstrat"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "expected success for {args:?}:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(args: &[&str]) -> (i32, String) {
    let out = bin().args(args).output().expect("binary runs");
    (
        out.status.code().expect("no signal"),
        String::from_utf8_lossy(&out.stderr).to_string(),
    )
}

/// Reference data + config scaled down for fast runs.
fn reference_config(dir: &Path, repeats: usize, n_rounds: u32) -> PathBuf {
    let synth = reference_cohort(7);
    let (train, test) = synth.write_to(dir).unwrap();
    let mut config = RunConfig::for_reference_data(train, Some(test), dir.join("out"), 7);
    config.cv.repeats = repeats;
    config.strata_params.n_rounds = n_rounds;
    config.stratum_params.n_rounds = n_rounds;
    let path = dir.join("config.json");
    std::fs::write(&path, config.to_json()).unwrap();
    path
}

/// Small hand-rolled records CSV: 12 patients, 6-day stays, daily labs.
fn toy_csv() -> String {
    let mut csv = String::from("patient_id,record_time,admission_time,discharge_time,outcome,labA,labB\n");
    for i in 0..12 {
        let died = i % 2 == 0;
        let day0 = 10 + i; // distinct discharge dates within February
        for offset in -5..=0i32 {
            let day = day0 + offset;
            let a = if died { 9.0 + 0.1 * i as f64 } else { 1.0 + 0.1 * i as f64 };
            let b = offset as f64 * 1.5 + 0.01 * i as f64;
            csv.push_str(&format!(
                "P{i},2020-02-{day:02} 09:00:00,2020-02-{adm:02} 00:30:00,2020-02-{day0:02} 23:30:00,{y},{a:.2},{b:.2}\n",
                adm = day0 - 5,
                y = u8::from(died),
            ));
        }
    }
    csv
}

fn toy_config(dir: &Path) -> PathBuf {
    let train = dir.join("toy.csv");
    std::fs::write(&train, toy_csv()).unwrap();
    let mut config = RunConfig::for_reference_data(train, None, dir.join("out"), 3);
    config.strata = tempstrat::strata::StrataDefinition::parse("-2").unwrap();
    config.cv.k = 3;
    config.cv.split = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
    config.cv.repeats = 2;
    config.strata_params.n_rounds = 10;
    config.stratum_params.n_rounds = 10;
    let path = dir.join("toy_config.json");
    std::fs::write(&path, config.to_json()).unwrap();
    path
}

#[test]
fn ingest_reports_reference_counts_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = reference_config(dir.path(), 2, 20);
    let config = config.to_str().unwrap();

    run_ok(&["ingest", "--config", config]);
    let summary_path = dir.path().join("out/summary.json");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&summary_path).unwrap()).unwrap();
    assert_eq!(summary["n_patients"], 375);
    assert_eq!(summary["n_deaths"], 174);
    assert_eq!(summary["n_variables"], 10);
    assert!(summary["observed_density"].as_object().unwrap().len() > 10);

    let cohort_bytes = std::fs::read(dir.path().join("out/cohort.json")).unwrap();
    let summary_bytes = std::fs::read(&summary_path).unwrap();
    run_ok(&["ingest", "--config", config]);
    assert_eq!(std::fs::read(dir.path().join("out/cohort.json")).unwrap(), cohort_bytes);
    assert_eq!(std::fs::read(&summary_path).unwrap(), summary_bytes);
}

#[test]
fn bad_schema_column_exits_2_naming_the_column() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = reference_config(dir.path(), 2, 20);
    let mut value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&config_path).unwrap()).unwrap();
    value["dataset"]["schema"]["outcome"] = "status_code".into();
    std::fs::write(&config_path, serde_json::to_string(&value).unwrap()).unwrap();

    let (code, stderr) = exit_code(&["ingest", "--config", config_path.to_str().unwrap()]);
    assert_eq!(code, 2, "stderr: {stderr}");
    assert!(stderr.contains("status_code"), "stderr: {stderr}");
}

#[test]
fn missing_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = reference_config(dir.path(), 2, 20);
    let mut value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&config_path).unwrap()).unwrap();
    value["cv"].as_object_mut().unwrap().remove("seed");
    std::fs::write(&config_path, serde_json::to_string(&value).unwrap()).unwrap();

    let (code, stderr) = exit_code(&["train", "--config", config_path.to_str().unwrap()]);
    assert_eq!(code, 2, "stderr: {stderr}");
    assert!(stderr.contains("seed"), "stderr: {stderr}");
}

#[test]
fn unreachable_stratum_exits_3_naming_the_window() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config(dir.path());
    let (code, stderr) = exit_code(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--strata",
        "-30",
    ]);
    assert_eq!(code, 3, "stderr: {stderr}");
    assert!(stderr.contains("(-inf, -30]"), "stderr: {stderr}");
}

#[test]
fn train_on_toy_fixture_is_fast_and_writes_the_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config(dir.path());
    let start = std::time::Instant::now();
    run_ok(&["train", "--config", config.to_str().unwrap()]);
    assert!(start.elapsed().as_secs() < 5, "toy training should be quick");
    let model = std::fs::read_to_string(dir.path().join("out/model.json")).unwrap();
    let predictor = tempstrat::predictor::StratifiedPredictor::from_json(&model).unwrap();
    assert_eq!(predictor.stratum_models.len(), 2);
    let log: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/training_log.json")).unwrap())
            .unwrap();
    assert!(!log["strata_log"]["rounds"].as_array().unwrap().is_empty());
}

#[test]
fn predict_writes_risks_within_unit_interval() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config(dir.path());
    let config = config.to_str().unwrap();
    run_ok(&["train", "--config", config]);
    let model = dir.path().join("out/model.json");
    let input = dir.path().join("toy.csv");
    run_ok(&[
        "predict",
        "--config",
        config,
        "--model",
        model.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
    ]);
    let predictions = std::fs::read_to_string(dir.path().join("out/predictions.csv")).unwrap();
    let mut lines = predictions.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("patient_id,day_offset"));
    assert!(header.ends_with(",risk"));
    let mut n = 0;
    for line in lines {
        let risk: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&risk), "risk {risk} out of range");
        n += 1;
    }
    // 12 patients x 5 pre-outcome days
    assert_eq!(n, 60);
}

#[test]
fn predict_accepts_single_feature_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config(dir.path());
    let config = config.to_str().unwrap();
    run_ok(&["train", "--config", config]);
    let model = dir.path().join("out/model.json");
    let features = dir.path().join("one_day.csv");
    std::fs::write(&features, "labA,labB\n9.2,-3.0\n1.1,NA\n").unwrap();
    run_ok(&[
        "predict",
        "--config",
        config,
        "--model",
        model.to_str().unwrap(),
        "--input",
        features.to_str().unwrap(),
        "--features",
    ]);
    let predictions = std::fs::read_to_string(dir.path().join("out/predictions.csv")).unwrap();
    assert_eq!(predictions.lines().count(), 3);
    // sick-looking labs score higher than healthy-looking ones
    let risks: Vec<f64> = predictions
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(risks[0] > risks[1]);

    // mismatched columns are an input error
    std::fs::write(&features, "labA,wrong\n1.0,2.0\n").unwrap();
    let (code, stderr) = exit_code(&[
        "predict",
        "--config",
        config,
        "--model",
        model.to_str().unwrap(),
        "--input",
        features.to_str().unwrap(),
        "--features",
    ]);
    assert_eq!(code, 2, "stderr: {stderr}");
}

#[test]
fn evaluate_and_experiments_write_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = reference_config(dir.path(), 2, 20);
    let config = config.to_str().unwrap();
    run_ok(&["evaluate", "--config", config, "--jobs", "2"]);
    run_ok(&["experiments", "--config", config, "--jobs", "2"]);
    for file in [
        "cvreport.json",
        "table5.csv",
        "table4.csv",
        "daily_baseline.csv",
        "importances.csv",
        "retrospective.csv",
    ] {
        let path = dir.path().join("out").join(file);
        assert!(path.exists(), "{file} missing");
        assert!(std::fs::metadata(&path).unwrap().len() > 0, "{file} empty");
    }
    let table5 = std::fs::read_to_string(dir.path().join("out/table5.csv")).unwrap();
    assert!(table5.starts_with("metric,auroc,aupr,accuracy,f1,precision,recall"));
    let table4 = std::fs::read_to_string(dir.path().join("out/table4.csv")).unwrap();
    assert_eq!(table4.lines().count(), 6); // header + 5 strata
}

#[test]
fn same_seed_produces_byte_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = reference_config(dir.path(), 2, 15);
    let config = config.to_str().unwrap();
    let out_a = dir.path().join("run_a");
    let out_b = dir.path().join("run_b");
    run_ok(&["evaluate", "--config", config, "--out", out_a.to_str().unwrap()]);
    run_ok(&["evaluate", "--config", config, "--out", out_b.to_str().unwrap()]);
    for file in ["cvreport.json", "table5.csv"] {
        let a = std::fs::read(out_a.join(file)).unwrap();
        let b = std::fs::read(out_b.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    // a different seed changes the report
    let out_c = dir.path().join("run_c");
    run_ok(&[
        "evaluate", "--config", config, "--out", out_c.to_str().unwrap(), "--seed", "99",
    ]);
    assert_ne!(
        std::fs::read(out_a.join("cvreport.json")).unwrap(),
        std::fs::read(out_c.join("cvreport.json")).unwrap()
    );
}

#[test]
fn strata_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config(dir.path());
    run_ok(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--strata",
        "-1,-3",
    ]);
    let model = std::fs::read_to_string(dir.path().join("out/model.json")).unwrap();
    let predictor = tempstrat::predictor::StratifiedPredictor::from_json(&model).unwrap();
    // "-1,-3" normalizes to the single cut -3 (two strata)
    assert_eq!(predictor.strata_def.cut_points(), &[-3]);
    assert_eq!(predictor.stratum_models.len(), 2);
}
