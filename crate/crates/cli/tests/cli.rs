use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn emrbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emrbench"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

const TINY_RUN: &str = r#"
seeds = [0]
models = ["lr"]
[synth]
picu_encounters = 200
cticu_encounters = 50
picu_mortality = 0.3
cticu_mortality = 0.3
[grid]
fractions = [0.5]
input_types = ["internals"]
drug_encodings = ["mesh"]
[train]
max_epochs = 10
patience_epochs = 3
"#;

#[test]
fn check_passes() {
    let out = emrbench(&["check"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{stdout}");
}

#[test]
fn synth_writes_ingestable_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("synth.toml");
    write(&cfg, "picu_encounters = 30\ncticu_encounters = 10\nseed = 4\n");
    let out_dir = dir.path().join("cohort");
    let out = emrbench(&["synth", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["catalog.csv", "events.csv", "meta.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let meta = fs::read_to_string(out_dir.join("meta.csv")).unwrap();
    assert!(meta.starts_with("patient_id,encounter_id,unit,disposition,length_of_stay_hours"));
    assert_eq!(meta.lines().count(), 41);
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    write(&cfg, TINY_RUN);
    let out_dir = dir.path().join("out");
    let out = emrbench(&[
        "run",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--workers",
        "2",
        "--seed-offset",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["training_fraction.csv", "input_type.csv", "drug_encoding.csv", "bundle.json", "partition.csv"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let table = fs::read_to_string(out_dir.join("input_type.csv")).unwrap();
    assert!(table.starts_with("row_label,model,test_set,auroc_mean,auroc_std,n_seeds\n"));
    assert!(table.contains("Combined (BL),LR,PICU,"));
    assert!(table.contains("Internals,LR,CTICU,"));
    let bundle = fs::read_to_string(out_dir.join("bundle.json")).unwrap();
    assert!(bundle.contains("\"seed_offset\": 3"));
    assert!(out_dir.join("runs/f1.00_combined_none__lr__s0.ckpt").exists());

    let rerender = dir.path().join("rerender");
    let out = emrbench(&[
        "report",
        out_dir.join("bundle.json").to_str().unwrap(),
        "--out",
        rerender.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["training_fraction.csv", "input_type.csv", "drug_encoding.csv"] {
        assert_eq!(
            fs::read(out_dir.join(f)).unwrap(),
            fs::read(rerender.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    assert_eq!(emrbench(&["run", missing.to_str().unwrap()]).status.code(), Some(1));

    let bad = dir.path().join("bad.toml");
    write(&bad, "models = []\n[synth]\n");
    assert_eq!(emrbench(&["run", bad.to_str().unwrap()]).status.code(), Some(1));

    let unknown = dir.path().join("unknown.toml");
    write(&unknown, "learning_rat = 0.1\n[synth]\n");
    assert_eq!(emrbench(&["run", unknown.to_str().unwrap()]).status.code(), Some(1));

    let rate = dir.path().join("rate.toml");
    write(&rate, "picu_mortality = 1.5\n");
    assert_eq!(emrbench(&["synth", rate.to_str().unwrap()]).status.code(), Some(1));

    assert_eq!(emrbench(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(emrbench(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    // So few deaths that the training set has none.
    write(
        &cfg,
        "seeds = [0]\nmodels = [\"lr\"]\n[synth]\npicu_encounters = 20\ncticu_encounters = 0\npicu_mortality = 0.0001\n[grid]\nfractions = []\ninput_types = []\ndrug_encodings = []\n",
    );
    let out = emrbench(&["run", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("model LR, seed 0"), "{stderr}");
}
