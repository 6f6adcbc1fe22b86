//! Drives the `hybrid` binary end to end.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hybrid_core::synth;

fn hybrid(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybrid"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("failed to launch hybrid")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn workspace() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.csv");
    synth::zoned(400, 0.7, 0.1, 3)
        .unwrap()
        .save(&data, "label", "bb")
        .unwrap();
    (dir, data)
}

const DATA: [&str; 6] = ["--data", "train.csv", "--label", "label", "--blackbox", "bb"];

fn with_data<'a>(cmd: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd];
    v.extend(DATA);
    v.extend(extra);
    v
}

#[test]
fn train_linear_writes_a_model() {
    let (dir, _) = workspace();
    let o = hybrid(
        &with_data(
            "train-linear",
            &["--alpha1", "0.02", "--alpha2", "0.1", "--out", "m.json"],
        ),
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("m.json")).unwrap();
    assert!(text.contains("\"kind\": \"linear\""));
    assert!(text.contains("\"format_version\": 1"));
}

#[test]
fn missing_data_file_is_a_validation_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = hybrid(
        &[
            "train-linear",
            "--data",
            "absent.csv",
            "--label",
            "label",
            "--blackbox",
            "bb",
            "--alpha1",
            "0.02",
            "--alpha2",
            "0.1",
            "--out",
            "m.json",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("absent.csv"));
    assert!(!dir.path().join("m.json").exists());
}

#[test]
fn unknown_flags_and_bad_values_are_rejected() {
    let (dir, _) = workspace();
    let o = hybrid(
        &with_data(
            "train-linear",
            &["--alpha1", "0.02", "--alpha2", "0.1", "--out", "m.json", "--shiny"],
        ),
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let o = hybrid(
        &with_data(
            "train-linear",
            &["--alpha1", "-1", "--alpha2", "0.1", "--out", "m.json"],
        ),
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let o = hybrid(&["predict", "--model", "nope.json", "--data", "train.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = hybrid(
        &with_data(
            "train-linear",
            &["--alpha1", "0.1", "--alpha2", "0.1", "--out", "x/m.json"],
        ),
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let o = hybrid(&["--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn wrong_label_column_is_named() {
    let (dir, _) = workspace();
    let o = hybrid(
        &[
            "mine",
            "--data",
            "train.csv",
            "--label",
            "target",
            "--blackbox",
            "bb",
            "--alpha1",
            "0.01",
            "--alpha2",
            "0.1",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("target"));
}

#[test]
fn predict_writes_one_row_per_input() {
    let (dir, _) = workspace();
    let o = hybrid(
        &with_data(
            "train-rules",
            &[
                "--alpha1",
                "0.01",
                "--alpha2",
                "0.1",
                "--iterations",
                "500",
                "--out",
                "r.json",
            ],
        ),
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("seed 42"));

    // prediction input without the label column
    let test = synth::zoned(50, 0.7, 0.1, 9).unwrap();
    let mut buf = Vec::new();
    test.write_csv(&mut buf, "label", "bb").unwrap();
    let text = String::from_utf8(buf).unwrap();
    let stripped: String = text
        .lines()
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            format!("{},{}\n", cells[..4].join(","), cells[5])
        })
        .collect();
    std::fs::write(dir.path().join("unlabeled.csv"), stripped).unwrap();

    let o = hybrid(
        &[
            "predict",
            "--model",
            "r.json",
            "--data",
            "unlabeled.csv",
            "--out",
            "p.csv",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "row,label,route");
    assert_eq!(lines.len(), 51);
    for (i, l) in lines[1..].iter().enumerate() {
        let cells: Vec<&str> = l.split(',').collect();
        assert_eq!(cells[0], (i + 1).to_string());
        assert!(cells[1] == "1" || cells[1] == "-1");
        assert!(["positive_rules", "negative_rules", "blackbox"].contains(&cells[2]));
    }
}

#[test]
fn evaluate_reports_metrics() {
    let (dir, _) = workspace();
    hybrid(
        &with_data(
            "train-linear",
            &["--alpha1", "0.01", "--alpha2", "0.3", "--out", "m.json"],
        ),
        dir.path(),
    );
    let o = hybrid(&["evaluate", "--model", "m.json", "--data", "train.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    for key in ["transparency:", "accuracy:", "complexity:", "blackbox_only_accuracy:"] {
        assert!(out.contains(key), "{out}");
    }
}

#[test]
fn future_model_version_fails_closed() {
    let (dir, _) = workspace();
    hybrid(
        &with_data(
            "train-linear",
            &["--alpha1", "0.01", "--alpha2", "0.3", "--out", "m.json"],
        ),
        dir.path(),
    );
    let path = dir.path().join("m.json");
    let text = std::fs::read_to_string(&path)
        .unwrap()
        .replace("\"format_version\": 1", "\"format_version\": 9");
    std::fs::write(&path, text).unwrap();
    let o = hybrid(&["predict", "--model", "m.json", "--data", "train.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("version 9"));
}

#[test]
fn frontier_writes_csv_and_models() {
    let (dir, _) = workspace();
    std::fs::create_dir(dir.path().join("models")).unwrap();
    let o = hybrid(
        &[
            "frontier",
            "--data",
            "train.csv",
            "--label",
            "label",
            "--blackbox",
            "bb",
            "--alpha1",
            "0.01,0.05",
            "--alpha2",
            "0.1,0.4",
            "--iterations",
            "300",
            "--models-dir",
            "models",
            "--out",
            "f.csv",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("f.csv")).unwrap();
    let points = hybrid_core::frontier::parse_frontier(text.as_bytes()).unwrap();
    assert_eq!(points.len(), 5);
    assert_eq!(points[0].transparency, 0.0);
    for p in &points[1..] {
        let path = dir.path().join(p.model_path.as_ref().unwrap());
        hybrid_core::model_io::ModelFile::load(path).unwrap();
    }
    let o = hybrid(
        &[
            "frontier",
            "--data",
            "train.csv",
            "--label",
            "label",
            "--blackbox",
            "bb",
            "--alpha1",
            "0.01,0.05",
            "--alpha2",
            "0.1,0.4",
            "--iterations",
            "300",
            "--pareto",
        ],
        dir.path(),
    );
    let front = hybrid_core::frontier::parse_frontier(o.stdout.as_slice()).unwrap();
    assert!(!front.is_empty() && front.len() <= 5);
}

#[test]
fn verify_single_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let o = hybrid(&["verify", "--criterion", "6"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("PASS [ 6]"));
    let o = hybrid(&["verify", "--criterion", "11"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}
