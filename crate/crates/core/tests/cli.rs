use std::fs;
use std::path::Path;

use cislda::cli::{read_truth_csv, run};
use cislda::dataset::{ClassPair, LabeledMatrix};

fn cislda(dir: &Path, args: &[&str]) -> u8 {
    let mut argv = vec!["cislda"];
    argv.extend_from_slice(args);
    let out = dir.to_str().unwrap();
    argv.extend(["--out-dir", out]);
    run(argv)
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn simulate_is_reproducible_and_writes_truth() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        assert_eq!(cislda(d.path(), &["simulate", "--example", "2", "--p", "60", "--seed", "3"]), 0);
    }
    for f in ["train.csv", "test.csv", "truth.csv", "design.json"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f} differs between runs");
    }
    let train = LabeledMatrix::read_csv(a.path().join("train.csv")).unwrap();
    assert_eq!((train.n(), train.p(), train.k()), (300, 60, 3));
    let manifest: serde_json::Value = serde_json::from_str(&read(a.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["subcommand"], "simulate");
}

#[test]
fn truth_lists_the_twenty_informative_features() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cislda(dir.path(), &["simulate", "--example", "1", "--p", "20", "--seed", "1"]), 0);
    let truth = read_truth_csv(dir.path().join("truth.csv"), ClassPair::new(1, 2)).unwrap();
    assert_eq!(truth, (0..20).collect::<Vec<_>>());
    let other = read_truth_csv(dir.path().join("truth.csv"), ClassPair::new(3, 2)).unwrap();
    assert_eq!(other, vec![0, 1, 2, 3, 4, 10, 11, 12, 13, 14]);
}

#[test]
fn screen_then_classify_with_saved_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = |f: &str| d.join(f).to_str().unwrap().to_owned();
    assert_eq!(cislda(d, &["simulate", "--example", "1", "--p", "300", "--seed", "9"]), 0);
    assert_eq!(
        cislda(d, &["screen", "--train", &p("train.csv"), "--pair", "1-2", "--tau", "1.5", "--truth", &p("truth.csv"), "--full-graph"]),
        0
    );
    let report = read(d, "screening.csv");
    assert_eq!(report.lines().count(), 301);
    assert!(report.starts_with("feature,marginal_difference,component_id,IS,selected,rank"));
    for f in ["edges.csv", "components.csv", "model.json"] {
        assert!(d.join(f).exists(), "{f} missing");
    }
    let summary: serde_json::Value = serde_json::from_str(&read(d, "screening.json")).unwrap();
    assert!(summary["metrics"]["sensitivity"].as_f64().unwrap() > 0.5);

    assert_eq!(
        cislda(d, &["classify", "--test", &p("test.csv"), "--model", &p("model.json"), "--report", &p("screening.csv"), "--truth", &p("truth.csv")]),
        0
    );
    let predictions = read(d, "predictions.csv");
    assert!(predictions.starts_with("row,label,predicted,tied"));
    // A single pairwise model only scores the rows of its two classes.
    assert_eq!(predictions.lines().count(), 1 + 100);
    let classify: serde_json::Value = serde_json::from_str(&read(d, "classify.json")).unwrap();
    assert!(classify["er_percent"].as_f64().unwrap() < 40.0);
}

#[test]
fn classify_votes_over_all_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let p = |f: &str| d.join(f).to_str().unwrap().to_owned();
    assert_eq!(cislda(d, &["simulate", "--example", "1", "--p", "200", "--seed", "2"]), 0);
    assert_eq!(cislda(d, &["classify", "--train", &p("train.csv"), "--test", &p("test.csv"), "--tau", "1.0"]), 0);
    for pair in ["1-2", "1-3", "2-3"] {
        assert!(d.join(format!("model_{pair}.json")).exists());
    }
    let classify: serde_json::Value = serde_json::from_str(&read(d, "classify.json")).unwrap();
    assert_eq!(classify["test_rows"], 150);
    assert!(classify["er_percent"].as_f64().unwrap() < 10.0);
}

#[test]
fn cross_validation_with_bootstrap() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let train = d.join("train.csv").to_str().unwrap().to_owned();
    assert_eq!(cislda(d, &["simulate", "--example", "1", "--p", "150", "--seed", "5"]), 0);
    let code = cislda(
        d,
        &["cv", "--train", &train, "--pair", "1-2", "--folds", "3", "--taus", "1,2", "--alphas", "0.2,0.4", "--bootstrap", "3"],
    );
    assert_eq!(code, 0);
    assert_eq!(read(d, "cv.csv").lines().count(), 1 + 4);
    assert_eq!(read(d, "stability.csv").lines().count(), 1 + 150);
}

#[test]
fn bench_writes_one_row_per_replicate_method_and_pair() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let code = cislda(d, &["bench", "--p", "120", "--replicates", "2", "--alphas", "0.2,0.5", "--seed", "3"]);
    assert_eq!(code, 0);
    let replicates = read(d, "bench_replicates.csv");
    // 2 replicates x 2 methods x 2 pairs x 2 alphas.
    assert_eq!(replicates.lines().count(), 1 + 16);
    assert!(read(d, "bench_summary.csv").lines().count() > 1);
    assert!(read(d, "bench_table.txt").contains("MMS"));
}

#[test]
fn boundary_csv_has_every_curve() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cislda(dir.path(), &["boundary", "--grid-size", "9", "--pis", "0.3,0.6"]), 0);
    let csv = read(dir.path(), "boundary.csv");
    // CaiSun, Detection and two CisUpper curves of 9 points each.
    assert_eq!(csv.lines().count(), 1 + 4 * 9);
}

#[test]
fn bad_invocations() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cislda(dir.path(), &["simulate", "--example", "4"]), 2);
    assert_eq!(cislda(dir.path(), &["screen", "--pair", "1-2"]), 2);
    assert_eq!(cislda(dir.path(), &["boundary", "--sigma=-1"]), 2);
    let missing = dir.path().join("absent.csv");
    assert_eq!(cislda(dir.path(), &["screen", "--train", missing.to_str().unwrap(), "--pair", "1-2"]), 1);
}
