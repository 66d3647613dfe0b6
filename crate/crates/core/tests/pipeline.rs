use std::path::Path;
use std::process::Command;

use ecomrank::dataset::{read_dataset, FeatureRegistry};
use ecomrank::model::ModelFile;

const TINY: &str = "\
catalog.departments = 2
catalog.products-per-department = 12
queries.count = 6
queries.min-sessions = 400
queries.max-sessions = 800
boosting.num-trees = 5
rf.num-trees = 3
ranknet.epochs = 2
linear.epochs = 2
experiment.folds = 2
";

const ALGOS: [&str; 9] =
    ["lambdamart", "rf", "ranknet", "l1lr", "l2lr", "l1l2svmc", "l2l1svmc", "l2l2svmr", "l2l1svmr"];

fn cli(dir: &Path, args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_ecomrank"))
        .current_dir(dir)
        .args(args)
        .args(["--config", "tiny.cfg"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "ecomrank {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn train_save_reload_scores_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("tiny.cfg"), TINY).unwrap();
    cli(dir, &["gen", "--out", "world"]);
    cli(dir, &["featurize", "--world", "world", "--out", "f.letor"]);
    cli(dir, &["labels", "--world", "world", "--features", "f.letor", "--out", "labels"]);
    for o in ["ctr", "atcr", "or", "revr"] {
        assert!(dir.join(format!("labels/{o}.letor")).exists());
    }

    let registry =
        FeatureRegistry::from_csv(&std::fs::read_to_string(dir.join("labels/registry.csv")).unwrap())
            .unwrap();
    let data = read_dataset(dir.join("labels/or.letor"), &registry).unwrap().dataset;
    assert!(data.num_queries() > 0);

    for algo in ALGOS {
        let path = format!("{algo}.txt");
        cli(dir, &["train", "--algo", algo, "--data", "labels/or.letor", "--out", &path]);
        let model = ModelFile::load(dir.join(&path)).unwrap();
        assert_eq!(model.algorithm, algo);
        assert_eq!(model.registry_fingerprint, registry.fingerprint());
        assert_eq!(model.model.num_features(), registry.len());

        let reparsed = ModelFile::parse(&model.to_text()).unwrap();
        assert_eq!(reparsed, model);
        for group in data.groups() {
            for inst in &group.instances {
                let x = inst.features.values();
                let a = model.model.predict(x).unwrap();
                assert!(a.is_finite());
                assert_eq!(a.to_bits(), reparsed.model.predict(x).unwrap().to_bits());
            }
        }

        let csv = format!("{algo}.csv");
        cli(dir, &[
            "eval", "--model", &path, "--data", "labels/or.letor", "--registry", "labels/registry.csv",
            "--out", &csv,
        ]);
        let text = std::fs::read_to_string(dir.join(&csv)).unwrap();
        let rows: Vec<f64> = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.starts_with("query_id"))
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert_eq!(rows.len(), data.num_queries());
        assert!(rows.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn mismatched_registry_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    std::fs::write(dir.join("tiny.cfg"), TINY).unwrap();
    cli(dir, &["gen", "--out", "world"]);
    cli(dir, &["featurize", "--world", "world", "--out", "f.letor"]);
    cli(dir, &["labels", "--world", "world", "--features", "f.letor", "--out", "labels"]);
    cli(dir, &["train", "--algo", "l2lr", "--data", "labels/or.letor", "--out", "m.txt"]);

    std::fs::write(dir.join("other.csv"), FeatureRegistry::anonymous(3).to_csv()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ecomrank"))
        .current_dir(dir)
        .args(["eval", "--model", "m.txt", "--data", "labels/or.letor", "--registry", "other.csv"])
        .args(["--out", "e.csv"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
