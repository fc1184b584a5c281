use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stackguard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stackguard"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth(path: &Path, n: &str, seed: &str) {
    let o = stackguard(&["synth", "--n", n, "--seed", seed, "--output", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
}

const TINY_MODEL: &str = r#"{"hidden_size": 8, "num_layers": 1, "embedding_dim": 8, "epochs": 1, "head_epochs": 2}"#;

fn write_config(dir: &Path, csv: &str) -> String {
    let models: Vec<String> = ["simple_rnn", "lstm", "bilstm", "lstm_autoencoder", "word2vec_clf"]
        .iter()
        .map(|m| format!("\"{m}\": {TINY_MODEL}"))
        .collect();
    let config = format!(
        r#"{{
  "seed": 3,
  "data": {{"csv": "{csv}"}},
  "output_dir": "out",
  "tokenizer": {{"max_sequence_length": 30}},
  "embedding": {{
    "glove": {{"dim": 8, "epochs": 2}},
    "fasttext": {{"dim": 8, "epochs": 1, "bucket_count": 2048}}
  }},
  "models": {{{}}}
}}"#,
        models.join(", ")
    );
    let path = dir.join("experiment.json");
    fs::write(&path, config).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    synth(&a, "50", "9");
    synth(&b, "50", "9");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let stdout = stackguard(&["synth", "--n", "50", "--seed", "9"]);
    assert_eq!(stdout.stdout, fs::read(&a).unwrap());
    synth(&b, "50", "10");
    assert_ne!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn training_before_prepare_exits_with_the_missing_stage() {
    let dir = tempfile::tempdir().unwrap();
    synth(&dir.path().join("data.csv"), "60", "1");
    let config = write_config(dir.path(), "data.csv");
    let out = dir.path().join("out");
    let o = stackguard(&["--config", &config, "--out", out.to_str().unwrap(), "train", "--model", "lstm"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("prepare"), "{}", stderr(&o));
}

#[test]
fn bad_configs_exit_with_code_two_and_a_path() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"data": {"csv": "x.csv"}}"#, "seed"),
        (r#"{"seed": 1, "data": {"csv": "x.csv", "ratios": {"train": 0.9, "validation": 0.2, "test": 0.1}}}"#, "data.ratios"),
        (r#"{"seed": 1, "data": {"csv": "x.csv"}, "models": {"gru": {}}}"#, "models.gru"),
        (r#"{"seed": 1, "data": {"csv": "x.csv"}, "models": {"lstm": {"dropout_rate": 1.5}}}"#, "models.lstm"),
    ];
    for (body, path) in cases {
        let file = dir.path().join("bad.json");
        fs::write(&file, body).unwrap();
        let o = stackguard(&["--config", file.to_str().unwrap(), "prepare"]);
        assert_eq!(o.status.code(), Some(2), "{body}: {}", stderr(&o));
        assert!(stderr(&o).contains(path), "{body}: {}", stderr(&o));
    }
    let o = stackguard(&["prepare"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn both_arms_then_report() {
    let dir = tempfile::tempdir().unwrap();
    synth(&dir.path().join("data.csv"), "160", "2");
    let config = write_config(dir.path(), "data.csv");
    for arm in ["minimal", "stacked"] {
        let o = stackguard(&["--config", &config, "--embedding", arm, "stack"]);
        assert!(o.status.success(), "{arm}: {}", stderr(&o));
        let table = String::from_utf8(o.stdout).unwrap();
        assert!(table.contains("| Proposed Model |"), "{table}");
    }
    let o = stackguard(&["--config", &config, "report"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let md = String::from_utf8(o.stdout).unwrap();
    let header = "| Models | Accuracy | Precision | Recall | F1 Score | Execution Time |";
    assert_eq!(md.matches(header).count(), 2, "{md}");

    let out = dir.path().join("out");
    assert!(out.join("reports/report.md").exists());
    assert!(out.join("embeddings/stacked.txt").exists());
    for arm in ["minimal", "stacked"] {
        assert!(out.join(format!("checkpoints/{arm}/bilstm/weights.bin")).exists());
        assert!(out.join(format!("reports/{arm}/ensemble.metrics.json")).exists());
    }

    let o = stackguard(&["--config", &config, "--embedding", "stacked", "evaluate", "--model", "word2vec_clf"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout).unwrap().contains("accuracy"));
}
