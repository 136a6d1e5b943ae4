use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dfunet::metrics::parse_scores_csv;
use dfunet::netzoo::{load_checkpoint, DfunetVariant, LayerSpec};
use tempfile::TempDir;

fn dfunet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfunet"))
        .args(args)
        .current_dir(dir)
        .env_remove("DFU_SEED")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = dfunet(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    dfunet(dir, args).status.code().expect("exit code")
}

/// Synthetic dataset under `data/` plus a 4-fold plan.
fn toy(n: usize) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "synth",
            "--out",
            "data",
            "--n",
            &n.to_string(),
            "--size",
            "32",
            "--seed",
            "3",
        ],
    );
    ok(
        dir.path(),
        &[
            "folds",
            "--manifest",
            "data/manifest.csv",
            "--k",
            "4",
            "--out",
            "folds.json",
        ],
    );
    dir
}

fn header_len(path: &Path) -> usize {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .split(',')
        .count()
}

fn pairwise_auc(path: &Path) -> f64 {
    let s = parse_scores_csv(&fs::read(path).unwrap()).unwrap();
    let (mut wins, mut pairs) = (0.0, 0.0);
    for p in s.iter().filter(|s| s.label == 1) {
        for n in s.iter().filter(|s| s.label == 0) {
            pairs += 1.0;
            wins += if p.score > n.score {
                1.0
            } else if p.score == n.score {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / pairs
}

#[test]
fn augment_writes_fifteen_per_patch_deterministically() {
    let dir = toy(10);
    let out = ok(dir.path(), &["augment", "--in", "data", "--out", "aug", "--seed", "9"]);
    assert!(out.contains("originals 10 outputs 150"), "{out}");
    let files = |root: &str| {
        let mut v: Vec<_> = ["normal", "abnormal"]
            .iter()
            .flat_map(|c| {
                fs::read_dir(dir.path().join(root).join(c))
                    .unwrap()
                    .map(|e| e.unwrap().path())
            })
            .collect();
        v.sort();
        v
    };
    let first = files("aug");
    assert_eq!(first.len(), 150);
    assert_eq!(
        fs::read_to_string(dir.path().join("aug/manifest.csv"))
            .unwrap()
            .lines()
            .count(),
        151
    );
    ok(
        dir.path(),
        &["augment", "--in", "data", "--out", "again", "--seed", "9"],
    );
    for (a, b) in first.iter().zip(files("again")) {
        assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
    }
}

#[test]
fn lenet_train_is_loadable_and_deterministic() {
    let dir = toy(16);
    let args = |out: &'static str| {
        [
            "train",
            "--manifest",
            "data/manifest.csv",
            "--arch",
            "lenet",
            "--folds",
            "folds.json",
            "--fold",
            "0",
            "--epochs",
            "1",
            "--out",
            out,
        ]
    };
    ok(dir.path(), &args("a.ckpt"));
    ok(dir.path(), &args("b.ckpt"));
    let a = fs::read(dir.path().join("a.ckpt")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.ckpt")).unwrap());
    let ckpt = load_checkpoint(dir.path().join("a.ckpt")).unwrap();
    assert_eq!(ckpt.spec.input, [1, 28, 28]);
    assert!(dir.path().join("a.normalizer.json").exists());
    assert_eq!(
        fs::read_to_string(dir.path().join("a.log.csv"))
            .unwrap()
            .lines()
            .count(),
        2
    );

    ok(
        dir.path(),
        &[
            "eval",
            "--model",
            "a.ckpt",
            "--manifest",
            "data/manifest.csv",
            "--folds",
            "folds.json",
            "--fold",
            "0",
            "--out",
            "m.json",
            "--scores",
            "s.csv",
        ],
    );
    let scores = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(scores.starts_with("id,label,score\n"));
    assert_eq!(scores.lines().count(), 1 + 4);
    let metrics: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("m.json")).unwrap()).unwrap();
    let keys = [
        "sensitivity",
        "specificity",
        "precision",
        "accuracy",
        "f_measure",
        "mcc",
        "auc",
        "auc_se",
        "auc_ci_low",
        "auc_ci_high",
    ];
    assert!(keys.iter().all(|k| metrics.get(k).is_some()));
    let auc = metrics["auc"].as_f64().unwrap();
    assert!((auc - pairwise_auc(&dir.path().join("s.csv"))).abs() < 1e-12);

    // report recomputes the same AUC from the scores file
    ok(
        dir.path(),
        &["report", "--scores", "s.csv", "--out", "roc.svg", "--table", "t.csv"],
    );
    let table = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let row: Vec<&str> = table.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1].parse::<f64>().unwrap(), auc);
}

#[test]
fn dfunet_v5_architecture_is_selected() {
    let dir = toy(8);
    ok(
        dir.path(),
        &[
            "train",
            "--manifest",
            "data/manifest.csv",
            "--arch",
            "dfunet-v5",
            "--input-size",
            "32",
            "--folds",
            "folds.json",
            "--fold",
            "0",
            "--epochs",
            "1",
            "--batch-size",
            "4",
            "--out",
            "v5.ckpt",
        ],
    );
    let ckpt = load_checkpoint(dir.path().join("v5.ckpt")).unwrap();
    let widths: Vec<[usize; 3]> = ckpt
        .spec
        .layers
        .iter()
        .filter_map(|l| match l {
            LayerSpec::ParallelConv(p) => Some(p.widths),
            _ => None,
        })
        .collect();
    assert_eq!(widths, DfunetVariant::V5.parallel_widths());
    assert_eq!(ckpt.spec.input, [3, 32, 32]);
}

#[test]
fn feature_columns_and_svm_eval() {
    let dir = toy(16);
    ok(
        dir.path(),
        &[
            "features",
            "--manifest",
            "data/manifest.csv",
            "--which",
            "lbp",
            "--out",
            "lbp.csv",
        ],
    );
    assert_eq!(header_len(&dir.path().join("lbp.csv")), 2 + 59);
    ok(
        dir.path(),
        &[
            "features",
            "--manifest",
            "data/manifest.csv",
            "--which",
            "lbp+hog+color",
            "--out",
            "all.csv",
        ],
    );
    assert_eq!(header_len(&dir.path().join("all.csv")), 2 + 34_943);

    ok(
        dir.path(),
        &[
            "svm-train",
            "--features",
            "all.csv",
            "--manifest",
            "data/manifest.csv",
            "--folds",
            "folds.json",
            "--fold",
            "0",
            "--out",
            "svm.json",
        ],
    );
    assert!(dir.path().join("svm.features.json").exists());
    ok(
        dir.path(),
        &[
            "eval",
            "--model",
            "svm.json",
            "--manifest",
            "data/manifest.csv",
            "--folds",
            "folds.json",
            "--fold",
            "0",
            "--out",
            "m.json",
            "--scores",
            "s.csv",
        ],
    );
    let metrics: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("m.json")).unwrap()).unwrap();
    for k in [
        "sensitivity",
        "specificity",
        "precision",
        "accuracy",
        "f_measure",
        "mcc",
        "auc",
    ] {
        assert_eq!(metrics[k].as_f64(), Some(1.0), "{k}");
    }
    assert_eq!(pairwise_auc(&dir.path().join("s.csv")), 1.0);
}

#[test]
fn svm_train_on_two_point_toy() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("toy.csv"), "id,label,f0\na,0,-1\nb,1,1\n").unwrap();
    ok(
        dir.path(),
        &["svm-train", "--features", "toy.csv", "--C", "10", "--out", "m.json"],
    );
    let model: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("m.json")).unwrap()).unwrap();
    assert!(model["b"].as_f64().unwrap().abs() < 1e-12);
    assert_eq!(model["coef"].as_array().unwrap().len(), 2);

    fs::write(dir.path().join("one.csv"), "id,label,f0\na,1,-1\nb,1,1\n").unwrap();
    assert_eq!(
        code(dir.path(), &["svm-train", "--features", "one.csv", "--out", "x.json"]),
        2
    );
}

#[test]
fn report_tables() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("perfect.csv"),
        "id,label,score\na,1,0.9\nb,1,0.8\nc,0,0.2\nd,0,0.1\n",
    )
    .unwrap();
    fs::write(
        dir.path().join("mixed.csv"),
        "id,label,score\na,1,0.9\nb,1,0.4\nc,0,0.5\nd,0,0.1\n",
    )
    .unwrap();
    ok(
        dir.path(),
        &[
            "report",
            "--scores",
            "perfect.csv,mixed.csv",
            "--out",
            "roc.svg",
            "--table",
            "t.csv",
        ],
    );
    let table = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("model,auc,se,ci_low,ci_high"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows[0][0], "perfect");
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 1.0);
    assert_eq!(rows[1][1].parse::<f64>().unwrap(), 0.75);
    for r in &rows {
        let v: Vec<f64> = r[1..].iter().map(|x| x.parse().unwrap()).collect();
        assert_eq!(v[2], (v[0] - 1.96 * v[1]).clamp(0.0, 1.0));
        assert_eq!(v[3], (v[0] + 1.96 * v[1]).clamp(0.0, 1.0));
    }
    let svg = fs::read_to_string(dir.path().join("roc.svg")).unwrap();
    // the perfect curve visits the top-left corner of the plot box
    assert!(svg.contains("60.00,20.00"));
    assert_eq!(svg.matches("<polyline").count(), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "id,label,score\na,1,zzz\n").unwrap();
    assert_eq!(
        code(
            dir.path(),
            &["report", "--scores", "bad.csv", "--out", "r.svg", "--table", "t.csv"]
        ),
        2
    );
    assert_eq!(
        code(dir.path(), &["folds", "--manifest", "missing.csv", "--out", "f.json"]),
        2
    );
    assert_eq!(code(dir.path(), &["train", "--bogus"]), 2);

    let toy = toy(16);
    let train = |fold: &str, lr: &str| {
        code(
            toy.path(),
            &[
                "train",
                "--manifest",
                "data/manifest.csv",
                "--arch",
                "lenet",
                "--folds",
                "folds.json",
                "--fold",
                fold,
                "--epochs",
                "2",
                "--lr",
                lr,
                "--out",
                "x.ckpt",
            ],
        )
    };
    assert_eq!(train("7", "0.01"), 2);
    // parameters leave the f32 range, and at 1e308 the loss itself overflows
    assert_eq!(train("0", "1e300"), 3);
    assert_eq!(train("0", "1e308"), 3);
}

#[test]
fn seed_from_environment() {
    let dir = toy(20);
    let plan = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_dfunet"));
        cmd.current_dir(dir.path()).env_remove("DFU_SEED");
        if let Some(v) = env {
            cmd.env("DFU_SEED", v);
        }
        let mut args = vec![
            "folds",
            "--manifest",
            "data/manifest.csv",
            "--k",
            "5",
            "--out",
            "p.json",
        ];
        args.extend_from_slice(extra);
        assert!(cmd.args(&args).output().unwrap().status.success());
        fs::read(dir.path().join("p.json")).unwrap()
    };
    let by_env = plan(Some("42"), &[]);
    assert_eq!(by_env, plan(None, &["--seed", "42"]));
    assert_ne!(by_env, plan(None, &[]));
    assert_eq!(plan(Some("42"), &["--seed", "0"]), plan(None, &[]));
}
