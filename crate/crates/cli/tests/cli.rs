use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_eegrec");

fn eegrec(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn small_spec(dir: &Path) -> String {
    let path = dir.join("spec.json");
    let spec = r#"{"num_classes":3,"num_subjects":2,"dims":6,"samples_per_cell":20,
        "class_separation":3.0,"subject_jitter":0.3,"noise_sigma":1.0,"baseline":1.0,"seed":5}"#;
    std::fs::write(&path, spec).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_on_synthetic_data_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(dir.path());
    let out = dir.path().join("out");
    let res = eegrec(&[
        "run",
        "--synth",
        &spec,
        "--out",
        out.to_str().unwrap(),
        "--hidden",
        "8",
        "--rounds",
        "5",
        "--normalization",
        "minmax",
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stdout).contains("accuracy"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["settings"]["normalization"], "minmax");
    assert_eq!(report["settings"]["autoencoder"]["hidden_dim"], 8);
    assert_eq!(report["boost"]["loss_history"].as_array().unwrap().len(), 6);
    for name in [
        "confusion.csv",
        "roc.csv",
        "model_ae.json",
        "model_gbt.json",
        "norm_stats.json",
    ] {
        assert!(out.join(name).exists(), "{name}");
    }
}

#[test]
fn generated_csv_feeds_run_and_similarity() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(dir.path());
    let csv = dir.path().join("data.csv");
    let res = eegrec(&[
        "generate",
        "--synth",
        &spec,
        "--out",
        csv.to_str().unwrap(),
        "--seed",
        "9",
    ]);
    assert_eq!(code(&res), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("ch_0,ch_1,ch_2,ch_3,ch_4,ch_5,label,subject\n"));
    assert_eq!(text.lines().count(), 121);

    let out = dir.path().join("sim");
    let res = eegrec(&[
        "similarity",
        "--data",
        csv.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    assert!(out.join("similarity_inter_class.csv").exists());
    assert!(out.join("similarity_inter_person.csv").exists());
    assert!(out.join("similarity_report.json").exists());
}

#[test]
fn sweep_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let cfg = dir.path().join("cfg.json");
    let text = format!(
        r#"{{"data":{{"synth":{{"num_classes":3,"num_subjects":2,"dims":6,"samples_per_cell":20,
            "class_separation":3.0,"subject_jitter":0.3,"noise_sigma":1.0,"baseline":1.0,"seed":5}}}},
           "autoencoder":{{"hidden_dim":8,"iterations":50}},
           "boost":{{"num_rounds":5}},
           "sweep":{{"train_fraction":[0.5,0.8]}},
           "repeats":2,
           "output_dir":{:?}}}"#,
        out.to_str().unwrap()
    );
    std::fs::write(&cfg, text).unwrap();
    let res = eegrec(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let csv = std::fs::read_to_string(out.join("sweep_summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().nth(1).unwrap().starts_with("0.5,"));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(dir.path());
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    for args in [
        vec!["run"],
        vec!["run", "--synth", &spec, "--out", out, "--train-fraction", "1.5"],
        vec!["run", "--synth", &spec, "--out", out, "--normalization", "bogus"],
        vec!["run", "--config", "/nonexistent/cfg.json"],
        vec!["frobnicate"],
    ] {
        let res = eegrec(&args);
        assert_eq!(
            code(&res),
            2,
            "{args:?}: {}",
            String::from_utf8_lossy(&res.stderr)
        );
    }
}

#[test]
fn malformed_data_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "ch_0,ch_1,label,subject\n1.0,2.0,0,0\n1.0,oops,1,0\n").unwrap();
    let res = eegrec(&[
        "run",
        "--data",
        csv.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&res), 3, "{}", String::from_utf8_lossy(&res.stderr));
    assert!(String::from_utf8_lossy(&res.stderr).starts_with("error: "));
}

#[test]
fn divergent_training_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let text = format!(
        r#"{{"data":{{"synth":{{"num_classes":3,"num_subjects":2,"dims":6,"samples_per_cell":20,
            "class_separation":3.0,"subject_jitter":0.3,"noise_sigma":1.0,"baseline":1.0,"seed":5}}}},
           "autoencoder":{{"hidden_dim":8,"iterations":50,"learning_rate":1e300}},
           "output_dir":{:?}}}"#,
        dir.path().join("o").to_str().unwrap()
    );
    std::fs::write(&cfg, text).unwrap();
    let res = eegrec(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&res), 4, "{}", String::from_utf8_lossy(&res.stderr));
}
