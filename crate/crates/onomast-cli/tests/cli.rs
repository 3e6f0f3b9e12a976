//! End-to-end checks of the `onomast` binary: the full
//! prepare → train → evaluate → predict → aggregate flow on a synthetic
//! corpus, plus the exit-code contract.

use std::path::Path;
use std::process::{Command, Output};

use onomast::corpus::{write_labeled_csv, CsvSchema};
use onomast::synth::disjoint_alphabet_corpus;

const BIN: &str = env!("CARGO_BIN_EXE_onomast");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

/// Weighted f1 from the `avg / total` row of a report TSV.
fn weighted_f1(report_tsv: &Path) -> f64 {
    let body = std::fs::read_to_string(report_tsv).unwrap();
    let row = body
        .lines()
        .find(|l| l.starts_with("avg / total"))
        .expect("report has a weighted row");
    row.split('\t').nth(3).unwrap().parse().unwrap()
}

#[test]
fn pipeline_reaches_usable_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("names.csv");
    write_labeled_csv(
        &disjoint_alphabet_corpus(2_000, 11),
        &corpus_path,
        &CsvSchema::default(),
    )
    .unwrap();
    let prep_dir = dir.path().join("prep");
    let model_path = dir.path().join("model.nmc");
    let eval_dir = dir.path().join("eval");

    run_ok(&[
        "prepare",
        "--input",
        corpus_path.to_str().unwrap(),
        "--out-dir",
        prep_dir.to_str().unwrap(),
        "--mode",
        "last",
        "--seed",
        "11",
    ]);
    for artifact in ["dataset.json", "train.csv", "test.csv", "vocab.tsv", "manifest.json"] {
        assert!(prep_dir.join(artifact).is_file(), "prepare should write {artifact}");
    }

    let out = run_ok(&[
        "train",
        "--data",
        prep_dir.to_str().unwrap(),
        "--out",
        model_path.to_str().unwrap(),
        "--hidden-dim",
        "16",
        "--epochs",
        "5",
        "--seed",
        "11",
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(
        stdout.lines().filter(|l| l.starts_with("epoch ")).count(),
        5,
        "train should print one loss line per epoch"
    );
    assert!(model_path.is_file());
    assert!(dir.path().join("model.loss.csv").is_file());
    assert!(dir.path().join("model.manifest.json").is_file());

    run_ok(&[
        "evaluate",
        "--data",
        prep_dir.to_str().unwrap(),
        "--model",
        model_path.to_str().unwrap(),
        "--out-dir",
        eval_dir.to_str().unwrap(),
    ]);
    let f1 = weighted_f1(&eval_dir.join("report.tsv"));
    assert!(f1 >= 0.8, "weighted OOS f1 {f1} should be at least 0.8");

    // predict: one output row per input record, probabilities ~sum to 1
    let pred_path = dir.path().join("pred.csv");
    run_ok(&[
        "predict",
        "--model",
        model_path.to_str().unwrap(),
        "--input",
        corpus_path.to_str().unwrap(),
        "--output",
        pred_path.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    let pred = std::fs::read_to_string(&pred_path).unwrap();
    let mut lines = pred.lines();
    let header = lines.next().unwrap();
    assert_eq!(
        header,
        "last_name,first_name,label,p_group_a,p_group_b,p_group_c,p_group_d"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2_000);
    for row in &rows {
        let fields: Vec<&str> = row.split(',').collect();
        let sum: f64 = fields[3..].iter().map(|f| f.parse::<f64>().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-9, "probabilities should sum to 1: {row}");
    }

    // aggregate: per-year share tables over a contributions file
    let contrib_path = dir.path().join("contrib.csv");
    let mut contrib = String::from("last_name,first_name,amount,year\n");
    for (i, record) in disjoint_alphabet_corpus(200, 12).iter().enumerate() {
        let year = match i % 3 {
            0 => "2008",
            1 => "2012",
            _ => "",
        };
        contrib.push_str(&format!("{},,{},{year}\n", record.last_name, 10 + i));
    }
    std::fs::write(&contrib_path, contrib).unwrap();
    let shares_path = dir.path().join("shares.csv");
    run_ok(&[
        "aggregate",
        "--model",
        model_path.to_str().unwrap(),
        "--input",
        contrib_path.to_str().unwrap(),
        "--output",
        shares_path.to_str().unwrap(),
        "--by-year",
    ]);
    let shares = std::fs::read_to_string(&shares_path).unwrap();
    let mut by_year: std::collections::BTreeMap<&str, f64> = Default::default();
    for row in shares.lines().skip(1) {
        let fields: Vec<&str> = row.split(',').collect();
        *by_year.entry(fields[0]).or_default() += fields[2].parse::<f64>().unwrap();
    }
    assert_eq!(
        by_year.keys().copied().collect::<Vec<_>>(),
        ["2008", "2012", "unspecified"]
    );
    for (year, sum) in by_year {
        assert!((sum - 1.0).abs() < 1e-9, "shares for {year} should sum to 1");
    }
}

#[test]
fn census_prepare_expands_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let census_path = dir.path().join("census.csv");
    std::fs::write(
        &census_path,
        "last_name,count,pctwhite,pctblack,pctapi,pcthispanic\n\
         SMITH,2000,70.9,23.1,0.5,2.4\n\
         GARCIA,1000,5.4,0.5,1.4,92.0\n\
         JOHNSON,1500,58.9,34.6,0.4,2.4\n\
         KIM,600,4.5,0.6,93.2,1.1\n\
         WILLIAMS,1400,45.7,47.7,0.4,2.5\n\
         RODRIGUEZ,900,4.7,0.5,0.6,93.8\n\
         BROWN,1300,57.9,35.6,0.5,2.5\n\
         NGUYEN,500,2.6,0.4,95.7,0.6\n\
         MILLER,1100,84.1,10.7,0.5,2.1\n\
         HERNANDEZ,800,3.8,0.4,0.6,94.9\n\
         DAVIS,1000,62.2,31.6,0.5,2.4\n\
         PATEL,400,1.4,0.3,96.5,0.6\n",
    )
    .unwrap();
    let prep_dir = dir.path().join("prep");
    run_ok(&[
        "prepare",
        "--input",
        census_path.to_str().unwrap(),
        "--out-dir",
        prep_dir.to_str().unwrap(),
        "--input-kind",
        "census",
        "--census-samples",
        "3000",
        "--seed",
        "5",
    ]);
    let descriptor: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(prep_dir.join("dataset.json")).unwrap())
            .unwrap();
    let labels: Vec<&str> = descriptor["labels"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert_eq!(labels, ["api", "black", "hispanic", "white"]);
    let n_total = descriptor["n_train"].as_u64().unwrap() + descriptor["n_test"].as_u64().unwrap();
    assert!(
        (2500..=3000).contains(&n_total),
        "expansion should keep most of the 3000 samples, got {n_total}"
    );
}

#[test]
fn identical_evaluations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("names.csv");
    write_labeled_csv(
        &disjoint_alphabet_corpus(600, 21),
        &corpus_path,
        &CsvSchema::default(),
    )
    .unwrap();
    let prep_dir = dir.path().join("prep");
    let model_path = dir.path().join("model.nmc");
    run_ok(&[
        "prepare",
        "--input",
        corpus_path.to_str().unwrap(),
        "--out-dir",
        prep_dir.to_str().unwrap(),
    ]);
    run_ok(&[
        "train",
        "--data",
        prep_dir.to_str().unwrap(),
        "--out",
        model_path.to_str().unwrap(),
        "--hidden-dim",
        "8",
        "--epochs",
        "2",
    ]);
    let evaluate = |out_dir: &Path| {
        run_ok(&[
            "evaluate",
            "--data",
            prep_dir.to_str().unwrap(),
            "--model",
            model_path.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]);
        (
            std::fs::read(out_dir.join("report.txt")).unwrap(),
            std::fs::read(out_dir.join("report.tsv")).unwrap(),
        )
    };
    let first = evaluate(&dir.path().join("eval_a"));
    let second = evaluate(&dir.path().join("eval_b"));
    assert_eq!(first, second, "identical evaluations should write identical reports");
}

#[test]
fn missing_model_is_a_data_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("names.csv");
    std::fs::write(&input, "last_name,first_name\nSmith,Jo\n").unwrap();
    let missing = dir.path().join("no-such-model.nmc");
    let out = run(&[
        "predict",
        "--model",
        missing.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--output",
        dir.path().join("out.csv").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("no-such-model.nmc"),
        "error should name the missing path: {stderr}"
    );
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(exit_code(&run(&["--frobnicate"])), 1);
    assert_eq!(exit_code(&run(&["launder"])), 1);
    assert_eq!(exit_code(&run(&["train", "--no-such-flag"])), 1);
    let help = run(&["--help"]);
    assert_eq!(exit_code(&help), 0);
    let body = String::from_utf8_lossy(&help.stdout);
    for sub in ["prepare", "train", "evaluate", "predict", "aggregate"] {
        assert!(body.contains(sub), "help should list {sub}");
    }
}

#[test]
fn mismatched_dataset_and_model_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("names.csv");
    write_labeled_csv(
        &disjoint_alphabet_corpus(600, 31),
        &corpus_path,
        &CsvSchema::default(),
    )
    .unwrap();
    let prep_a = dir.path().join("prep_a");
    let prep_b = dir.path().join("prep_b");
    run_ok(&[
        "prepare",
        "--input",
        corpus_path.to_str().unwrap(),
        "--out-dir",
        prep_a.to_str().unwrap(),
    ]);
    // different window → different preprocessing → incompatible dataset
    run_ok(&[
        "prepare",
        "--input",
        corpus_path.to_str().unwrap(),
        "--out-dir",
        prep_b.to_str().unwrap(),
        "--window",
        "12",
    ]);
    let model_path = dir.path().join("model.nmc");
    run_ok(&[
        "train",
        "--data",
        prep_a.to_str().unwrap(),
        "--out",
        model_path.to_str().unwrap(),
        "--hidden-dim",
        "8",
        "--epochs",
        "1",
    ]);
    let out = run(&[
        "evaluate",
        "--data",
        prep_b.to_str().unwrap(),
        "--model",
        model_path.to_str().unwrap(),
        "--out-dir",
        dir.path().join("eval").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("preprocessing"),
        "mismatch should be reported: {stderr}"
    );
}
