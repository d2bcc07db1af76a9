use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "synth": {
    "node_types": [{"name": "author", "count": 120}, {"name": "paper", "count": 60}, {"name": "venue", "count": 8}],
    "edge_types": [
      {"name": "authored_by", "src": "paper", "dst": "author", "per_src": 3.0},
      {"name": "published_in", "src": "paper", "dst": "venue", "per_src": 1.0}
    ],
    "communities": 4,
    "attr_dim": 8,
    "coherence": 0.8,
    "noise": 0.05,
    "intra_prob": 0.9,
    "attr_density": 0.25,
    "scored_type": "paper",
    "metapaths": ["paper-author-paper", "paper-venue-paper"]
  },
  "dim": 8,
  "lr": 0.01,
  "pretrain_epochs": 10,
  "finetune_epochs": 5,
  "score_rounds": 2,
  "k": 10,
  "anomaly_fraction": 0.1
}"#;

fn eagle(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eagle"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = eagle(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn verbs_chain_from_generation_to_evaluation() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("small.json"), SMALL).unwrap();
    let c = ["--config", "small.json", "--seed", "3"];
    let with = |verb: &str, out: &str, extra: &[&str]| -> Vec<String> {
        let mut v = vec![verb.to_string()];
        v.extend(c.iter().map(|s| s.to_string()));
        v.extend(["--out-dir".to_string(), out.to_string()]);
        v.extend(extra.iter().map(|s| s.to_string()));
        v
    };
    let run = |args: Vec<String>| ok(d, &args.iter().map(String::as_str).collect::<Vec<_>>());

    run(with("gen", "g", &[]));
    assert!(d.join("g/schema.txt").exists());
    run(with("inject", "inj", &["--graph", "g"]));
    let labels = fs::read_to_string(d.join("inj/labels.csv")).unwrap();
    assert_eq!(labels.lines().count(), 60);
    assert_eq!(labels.lines().filter(|l| l.ends_with(",1")).count(), 6);
    run(with("split", "sp", &["--graph", "inj", "--labels", "inj/labels.csv"]));
    run(with("pretrain", "pre", &["--graph", "sp/pretrain"]));
    assert!(d.join("pre/checkpoint.json").exists());
    assert_eq!(fs::read_to_string(d.join("pre/loss.tsv")).unwrap().lines().count(), 11);

    let detect = |out: &str| {
        run(with(
            "detect",
            out,
            &[
                "--graph",
                "sp/finetune",
                "--checkpoint",
                "pre/checkpoint.json",
                "--labels",
                "sp/finetune/labels.csv",
            ],
        ))
    };
    let stdout = detect("det");
    assert!(stdout.starts_with("auc\t"));
    detect("det2");
    let a = fs::read(d.join("det/scores.csv")).unwrap();
    assert_eq!(a, fs::read(d.join("det2/scores.csv")).unwrap());

    let eval = run(with("eval", "ev", &["--scores", "det/scores.csv", "--top-k", "3"]));
    assert_eq!(eval, stdout);
    assert_eq!(fs::read_to_string(d.join("ev/flagged.txt")).unwrap().lines().count(), 3);
}

#[test]
fn exit_codes_follow_error_kinds() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("small.json"), SMALL).unwrap();

    let unknown_key = eagle(d, &["gen", "--set", "bogus=1"]);
    assert_eq!(unknown_key.status.code(), Some(2));
    let bad_range = eagle(d, &["gen", "--set", "pretrain_fraction=1.5"]);
    assert_eq!(bad_range.status.code(), Some(2));
    let missing = eagle(d, &["pretrain", "--graph", "nowhere"]);
    assert_eq!(missing.status.code(), Some(3));
    let no_start = eagle(d, &["detect", "--graph", "nowhere"]);
    assert_eq!(no_start.status.code(), Some(2));

    ok(d, &["gen", "--config", "small.json", "--out-dir", "g"]);
    let diverged = eagle(
        d,
        &[
            "pretrain",
            "--config",
            "small.json",
            "--graph",
            "g",
            "--set",
            "lr=1e300",
        ],
    );
    assert_eq!(
        diverged.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&diverged.stderr)
    );
}

#[test]
fn bench_and_sweep_write_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("small.json"), SMALL).unwrap();
    let out = ok(
        d,
        &[
            "bench",
            "--config",
            "small.json",
            "--scales",
            "1,2",
            "--epochs",
            "1",
            "--out-dir",
            "b",
        ],
    );
    assert_eq!(out.lines().count(), 3);
    assert!(d.join("b/bench.tsv").exists());
    let out = ok(d, &["sweep", "readout", "--config", "small.json", "--out-dir", "s"]);
    assert!(out.starts_with("readout\tauc\n"));
    assert_eq!(out.lines().count(), 4);
}
