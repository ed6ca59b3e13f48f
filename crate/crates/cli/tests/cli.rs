//! End-to-end runs of the `triage` binary.

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

const SMALL: &str = r#"
folds = 3
[synth]
n_records = 150
[validator]
seq_len = 24
embed_dim = 8
filter_sizes = [2]
filters_per_size = 4
lstm_hidden = 4
dense_hidden = 8
epochs = 1
batch_size = 32
[router]
kind = "decision_tree"
"#;

fn triage(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_triage"))
        .args(args)
        .output()
        .unwrap()
}

fn triage_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_triage"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(input.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, format!("{SMALL}{extra}")).unwrap();
    path.to_str().unwrap().to_string()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = triage(&["synth", "--records", "100", "--seed", "7", "--out", p(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in ["records.jsonl", "truth.tsv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap()
        );
    }
    assert_eq!(
        std::fs::read_to_string(a.join("truth.tsv"))
            .unwrap()
            .lines()
            .count(),
        100
    );
}

#[test]
fn invalid_class_mix_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "[synth.class_mix]\nBoom = 0.5\nControls = 0.4\n",
    );
    let o = triage(&["synth", "--config", &config, "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("class_mix"), "{}", stderr(&o));
}

#[test]
fn usage_and_data_errors_have_distinct_codes() {
    assert_eq!(triage(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(triage(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(triage(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let o = triage(&[
        "train",
        "--corpus",
        p(&dir.path().join("missing.jsonl")),
        "--out",
        p(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = triage(&["train", "--corpus", "x"]);
    assert_eq!(o.status.code(), Some(1));
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\": 1}\n").unwrap();
    let o = triage(&["train", "--corpus", p(&bad), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("1 malformed"), "{}", stderr(&o));
}

#[test]
fn synth_train_route_eval() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let data = dir.path().join("data");
    let models = dir.path().join("models");
    let o = triage(&["synth", "--config", &config, "--out", p(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let corpus = data.join("records.jsonl");

    let o = triage(&[
        "train",
        "--config",
        &config,
        "--corpus",
        p(&corpus),
        "--out",
        p(&models),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fp = stdout(&o)
        .lines()
        .next()
        .unwrap()
        .split('\t')
        .nth(1)
        .unwrap()
        .to_string();
    for f in [
        "manifest.json",
        "vocab.tsv",
        "router.json",
        "validator.json",
        "train_report.txt",
    ] {
        assert!(models.join(f).exists(), "{f}");
    }
    let o2 = triage(&[
        "train",
        "--config",
        &config,
        "--corpus",
        p(&corpus),
        "--out",
        p(&dir.path().join("again")),
    ]);
    assert_eq!(stdout(&o), stdout(&o2));

    let records = std::fs::read_to_string(&corpus).unwrap();
    let o = triage_stdin(
        &["route", "--models", p(&models), "--format", "json-lines"],
        &records,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let ids: Vec<String> = records
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["id"]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    let out = stdout(&o);
    let decisions: Vec<serde_json::Value> = out
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(decisions.len(), ids.len());
    for (d, id) in decisions.iter().zip(&ids) {
        assert_eq!(d["id"].as_str().unwrap(), id);
        assert_eq!(d["fingerprint"].as_str().unwrap(), fp);
        assert_eq!(d["department"].is_string(), d["verdict"] == "Valid");
    }
    let o = triage(&["route", "--models", p(&models), "--input", p(&corpus)]);
    assert_eq!(stdout(&o).lines().count(), ids.len());
    let o = triage_stdin(&["route", "--models", p(&models)], "");
    assert!(o.status.success() && stdout(&o).is_empty());

    let reports = dir.path().join("reports");
    let o = triage(&[
        "eval",
        "--config",
        &config,
        "--corpus",
        p(&corpus),
        "--models",
        p(&models),
        "--out",
        p(&reports),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let routing = std::fs::read_to_string(reports.join("routing_report.txt")).unwrap();
    assert!(routing.contains(&format!("fingerprint\t{fp}")));
    assert!(routing.contains("Accuracy\t") && routing.contains("F-score\t"));
    assert!(reports.join("validation_report.txt").exists());
    assert!(reports.join("roc/validation_Valid.tsv").exists());

    let o = triage(&[
        "eval",
        "--config",
        &config,
        "--ablate-domain-nlp",
        "--corpus",
        p(&corpus),
        "--models",
        p(&models),
        "--out",
        p(&reports),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("vocabulary"), "{}", stderr(&o));
}

#[test]
fn inspect_lexicon() {
    let o = triage(&["inspect-lexicon"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("abbreviations\t"));
    let o = triage(&["inspect-lexicon", "Unit DWN--upr vlv leaking"]);
    assert_eq!(
        stdout(&o),
        "segment 1\tunit down/NOUN\nsegment 2\tupper valve/NOUN leak/VERB\n"
    );
    let o = triage(&[
        "inspect-lexicon",
        "--format",
        "json-lines",
        "service needed",
    ]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["vague"], true);
}
