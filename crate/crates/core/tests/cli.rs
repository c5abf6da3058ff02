use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mimosa::metrics::read_results;
use mimosa::profile::sha256_hex;

fn mimosa() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mimosa"));
    c.env_remove("MIMOSA_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    mimosa().args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const SMALL_TRAIN: &str = "[train]\nepochs = 3\nsynthetic_graphs = 300\n";

#[test]
fn verify_passes_and_negative_control_fails() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write(dir.path(), "ok.toml", "[verify]\nchain_steps = 200000\n");
    let out = dir.path().join("ok");
    let r = run(&["verify", "--profile", s(&ok), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let report = json(&out.join("verify_report.json"));
    assert_eq!(report["passed"], true);
    assert!(out.join("verify.manifest.json").is_file());

    let bad = write(dir.path(), "bad.toml", "[verify]\ngamma = [0.5, 0.4, 0.1]\nchain_steps = 0\n");
    let r = run(&["verify", "--profile", s(&bad), "--out", s(&dir.path().join("bad"))]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("detailed_balance"));
}

#[test]
fn shipped_negative_control_profile_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let profile = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/profiles/negative_control.toml");
    let r = run(&["verify", "--profile", s(&profile), "--out", s(dir.path())]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn single_state_space_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "one.toml",
        "[verify]\nvocab = \"one.tsv\"\nmax_nodes = 1\nchain_steps = 1000\n",
    );
    write(dir.path(), "one.tsv", "0\tatom\tC\t4\n");
    let r = run(&["verify", "--profile", s(&p), "--out", s(&dir.path().join("o"))]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(json(&dir.path().join("o/verify_report.json"))["oracle"]["states"], 1);
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.toml", "[paths]\ncorpus = \"nowhere.smi\"\n");
    let r = run(&["pretrain", "--profile", s(&p), "--out", s(dir.path())]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("nowhere.smi"));

    let p = write(dir.path(), "q.toml", "[run]\nparticles = 0\n");
    assert_eq!(run(&["verify", "--profile", s(&p)]).status.code(), Some(2));
    assert_eq!(run(&["optimize", "--inputs", "missing.smi", "--out", s(dir.path())]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--bogus"]).status.code(), Some(2));

    let p = write(dir.path(), "r.toml", "[model]\nkind = \"pretrained\"\n");
    let inputs = write(dir.path(), "in.smi", "CCO\n");
    let r = run(&["optimize", "--profile", s(&p), "--inputs", s(&inputs), "--out", s(dir.path())]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn pretrain_writes_checkpoint_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.toml", SMALL_TRAIN);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let r = run(&["pretrain", "--profile", s(&p), "--out", s(out), "--seed", "5"]);
        assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    }
    assert_eq!(
        std::fs::read(a.join("checkpoint.json")).unwrap(),
        std::fs::read(b.join("checkpoint.json")).unwrap()
    );
    let curve = std::fs::read_to_string(a.join("training_curve.tsv")).unwrap();
    let losses: Vec<f64> = curve
        .lines()
        .skip(1)
        .map(|l| l.split('\t').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(losses.len(), 3);
    assert!(losses[2] < losses[0]);
    let m = json(&a.join("pretrain.manifest.json"));
    assert_eq!(m["seed"], 5);
    assert_eq!(m["seed_source"], "flag");
    assert_eq!(m["profile_sha256"], sha256_hex(SMALL_TRAIN.as_bytes()));
}

#[test]
fn optimize_with_no_iterations_echoes_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.toml", "[run]\niterations = 0\nburn_in = 0\n");
    let inputs = write(dir.path(), "in.smi", "CCO\nC(\nc1ccccc1O\tphenol\n");
    let r = run(&["optimize", "--profile", s(&p), "--inputs", s(&inputs), "--out", s(dir.path())]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let (props, rows) = read_results(&std::fs::read_to_string(dir.path().join("results.tsv")).unwrap()).unwrap();
    assert_eq!(props, ["plogp_surrogate"]);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].output.as_deref(), Some("CCO"));
    assert_eq!((rows[0].similarity, rows[0].deltas[0]), (1.0, 0.0));
    assert!(rows[1].error.as_deref().unwrap().contains("unbalanced"));
    assert_eq!(rows[2].deltas[0], 0.0);
}

#[test]
fn optimize_keeps_order_and_metrics_are_stable() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.toml", "[run]\nparticles = 4\niterations = 3\nburn_in = 2\n");
    let mols = ["CCO", "CCN", "OCCO", "Oc1ccccc1", "CC(C)O", "NC1CCCCC1", "CSC", "CC(=O)O", "Clc1ccccc1", "CCCl"];
    let inputs = write(dir.path(), "in.smi", &(mols.join("\n") + "\n"));
    let out = dir.path().join("o");
    let r = run(&["optimize", "--profile", s(&p), "--inputs", s(&inputs), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let (_, rows) = read_results(&std::fs::read_to_string(out.join("results.tsv")).unwrap()).unwrap();
    let got: Vec<&str> = rows.iter().map(|r| r.input.as_str()).collect();
    assert_eq!(got, mols);
    // density never drops below the input's, which sits at η0 · 1
    assert!(rows.iter().all(|r| r.log_density >= 1.0 - 1e-12));
    let trace = std::fs::read_to_string(out.join("trace.jsonl")).unwrap();
    let first: serde_json::Value = serde_json::from_str(trace.lines().next().unwrap()).unwrap();
    assert!(first.get("input").is_some() && first.get("accepted").is_some());

    let results = out.join("results.tsv");
    let (m1, m2) = (dir.path().join("m1"), dir.path().join("m2"));
    for m in [&m1, &m2] {
        let r = run(&["metrics", "--profile", s(&p), "--inputs", s(&results), "--out", s(m)]);
        assert_eq!(r.status.code(), Some(0));
    }
    let a = std::fs::read(m1.join("metrics.json")).unwrap();
    assert_eq!(a, std::fs::read(m2.join("metrics.json")).unwrap());
    let rate = json(&m1.join("metrics.json"))["success_rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rate));
}

#[test]
fn seed_sources_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.toml", "[run]\nseed = 3\niterations = 1\nburn_in = 1\nparticles = 2\n");
    let inputs = write(dir.path(), "in.smi", "CCO\n");
    let go = |out: &Path, env: Option<&str>, flag: Option<&str>| {
        let mut c = mimosa();
        c.args(["optimize", "--profile", s(&p), "--inputs", s(&inputs), "--out", s(out)]);
        if let Some(e) = env {
            c.env("MIMOSA_SEED", e);
        }
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        assert!(c.status().unwrap().success());
        json(&out.join("optimize.manifest.json"))
    };
    let m = go(&dir.path().join("a"), None, None);
    assert_eq!((m["seed"].as_u64(), m["seed_source"].as_str()), (Some(3), Some("profile")));
    let m = go(&dir.path().join("b"), Some("17"), None);
    assert_eq!((m["seed"].as_u64(), m["seed_source"].as_str()), (Some(17), Some("environment")));
    let m = go(&dir.path().join("c"), Some("17"), Some("4"));
    assert_eq!((m["seed"].as_u64(), m["seed_source"].as_str()), (Some(4), Some("flag")));
}

#[test]
fn pretrained_model_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let train = write(dir.path(), "train.toml", SMALL_TRAIN);
    let r = run(&["pretrain", "--profile", s(&train), "--out", s(&dir.path().join("ck"))]);
    assert!(r.status.success());
    let p = write(
        dir.path(),
        "opt.toml",
        "[paths]\ncheckpoint = \"ck/checkpoint.json\"\n[model]\nkind = \"pretrained\"\n[run]\nparticles = 3\niterations = 2\nburn_in = 1\n",
    );
    let inputs = write(dir.path(), "in.smi", "CCO\nOc1ccccc1\n");
    let out = dir.path().join("o");
    let r = run(&["optimize", "--profile", s(&p), "--inputs", s(&inputs), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let m = json(&out.join("optimize.manifest.json"));
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
}
