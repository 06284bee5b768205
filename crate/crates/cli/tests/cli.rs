use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
version = 1
losses = ["plain", "tif_linear"]
seeds = [1, 2]

[dataset]
kind = "synthetic"
[dataset.drift]
n_days = 5
samples_per_day = 200
field_count = 3
cardinality = 6

[model]
embedding_dim = 4
hidden_widths = [8]

[train]
max_epochs = 2
batch_size = 64
"#;

fn tif(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tif")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("exp.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn report_without_runs_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = tif(&["report", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no run records found"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.file");
    assert_eq!(tif(&["compare", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(tif(&["compare", "--no-such-flag"]).status.code(), Some(2));
    let bad = write_config(dir.path(), "version = 1\nlearning_rate = 3\n");
    assert_eq!(tif(&["compare", "--config", &bad]).status.code(), Some(2));
    assert_eq!(tif(&["train", "--model", "pnn"]).status.code(), Some(2));
}

#[test]
fn compare_then_report_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let o = tif(&["compare", "--config", &config, "--out", out, "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("tif_linear"));
    let table = std::fs::read(Path::new(out).join("table.csv")).unwrap();

    let again = tif(&["compare", "--config", &config, "--out", out]);
    assert!(stdout(&again).contains("0 trained, 4 reused"));
    let r = tif(&["report", "--out", out]);
    assert!(r.status.success());
    assert_eq!(std::fs::read(Path::new(out).join("table.csv")).unwrap(), table);

    let one = tif(&["report", "--out", out, "--seed", "2"]);
    assert!(stdout(&one).contains("dnn-plain-s2"));
    assert!(!stdout(&one).contains("dnn-plain-s1"));
}

#[test]
fn synth_prepare_and_train() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY);
    let out = dir.path().join("data");
    let o = tif(&["synth", "--config", &config, "--out", out.to_str().unwrap(), "--seed", "4"]);
    assert!(o.status.success());
    let csv = out.join("synth.csv");
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("click,hour,c0,c1,c2\n"));
    assert!(out.join("coefficients.csv").is_file());

    let prep = dir.path().join("prep");
    let o = tif(&["prepare", "--input", csv.to_str().unwrap(), "--out", prep.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["vocab.tsv", "samples.csv", "meta.json"] {
        assert!(prep.join(f).is_file(), "{f}");
    }

    let runs = dir.path().join("runs");
    let args = [
        "train", "--config", &config, "--model", "deepfm", "--loss", "tif_exp", "--seed", "3", "--out",
        runs.to_str().unwrap(),
    ];
    let o = tif(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("deepfm-tif_exp-s3 trained"));
    assert!(runs.join("checkpoints/deepfm-tif_exp-s3.json").is_file());
    assert!(stdout(&tif(&args)).contains("already done"));
}
