use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SMALL: &str = r#"
scene = "default"
seeds = [0, 1, 2, 3, 4, 5]
max_steps = 40

[[strategy]]
kind = "baseline"

[[strategy]]
kind = "flb"
schedule = "increasing"
gamma = 0.3
lambda = 0.05
beta = 0.1

[[strategy]]
kind = "icd"
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_logit-anchor"));
    c.env_remove("LOGIT_ANCHOR_SEED");
    c
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/golden").join(name)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    if !out.status.success() {
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_then_evaluate_traces() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("sim");
    let o = run(bin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(&out));
    assert!(o.status.success());
    let traces: Vec<_> = std::fs::read_dir(out.join("traces")).unwrap().collect();
    assert_eq!(traces.len(), 18);
    for f in ["report.json", "report.csv", "curves.csv", "annotations.json", "lexicon.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let report = json(&out.join("report.json"));
    assert_eq!(report["scale"], "fraction");
    assert_eq!(report["curve_metric"], "positional_curves(reconstructed)");
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().nth(1).unwrap().contains(",percent,"));

    let eval = dir.path().join("eval");
    let o = run(bin()
        .args(["evaluate", "--traces"])
        .arg(out.join("traces"))
        .arg("--annotations")
        .arg(out.join("annotations.json"))
        .arg("--lexicon")
        .arg(out.join("lexicon.json"))
        .arg("--out")
        .arg(&eval));
    assert!(o.status.success());
    let ev = json(&eval.join("evaluation.json"));
    let rows = ev["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for (row, strat) in rows.iter().zip(report["strategies"].as_array().unwrap()) {
        assert_eq!(row["source"], strat["strategy"]);
        assert_eq!(row["metrics"], strat["metrics"]);
    }
}

#[test]
fn full_dist_traces_carry_distributions() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("sim");
    assert!(run(bin().args(["simulate", "--full-dist", "--seeds", "0", "--config"]).arg(&cfg).arg("--out").arg(&out))
        .status
        .success());
    let first = std::fs::read_dir(out.join("traces")).unwrap().next().unwrap().unwrap().path();
    let text = std::fs::read_to_string(first).unwrap();
    let step: Value = serde_json::from_str(text.lines().nth(1).unwrap()).unwrap();
    assert_eq!(step["dist"].as_array().unwrap().len(), 48);
}

#[test]
fn evaluate_golden_captions() {
    let dir = TempDir::new().unwrap();
    let o = run(bin()
        .args(["evaluate", "--captions"])
        .arg(golden("captions.jsonl"))
        .arg("--annotations")
        .arg(golden("annotations.json"))
        .arg("--lexicon")
        .arg(golden("lexicon.json"))
        .arg("--out")
        .arg(dir.path()));
    assert!(o.status.success());
    let ev = json(&dir.path().join("evaluation.json"));
    let m = &ev["rows"][0]["metrics"];
    assert_eq!(m["chair_i"].as_f64().unwrap(), 6.0 / 17.0);
    assert_eq!(m["chair_s"].as_f64().unwrap(), 3.0 / 5.0);
    assert_eq!(m["cover"].as_f64().unwrap(), 11.0 / 12.0);
    assert_eq!(m["cog"].as_f64().unwrap(), 0.5);
}

#[test]
fn unmatched_ids_are_warnings() {
    let dir = TempDir::new().unwrap();
    let caps = dir.path().join("caps.jsonl");
    std::fs::write(&caps, "{\"id\": \"g1\", \"caption\": \"a dog\"}\n{\"id\": \"zz\", \"caption\": \"a cat\"}\n").unwrap();
    let o = run(bin()
        .args(["evaluate", "--captions"])
        .arg(&caps)
        .arg("--annotations")
        .arg(golden("annotations.json"))
        .arg("--lexicon")
        .arg(golden("lexicon.json"))
        .arg("--out")
        .arg(dir.path()));
    assert!(o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("warning") && err.contains("zz"), "{err}");
    assert!(err.contains("g5"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let bad = write_config(dir.path(), "seeds = [1]\nmax_steps = 0\n[[strategy]]\nkind = \"baseline\"\n");
    let o = run(bin().args(["simulate", "--config"]).arg(&bad).arg("--out").arg(dir.path()));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("max_steps"));

    let caps = dir.path().join("caps.jsonl");
    std::fs::write(&caps, "{\"id\": \"g1\", \"caption\": \"a dog\"}\nnot json\n").unwrap();
    let o = run(bin()
        .args(["evaluate", "--captions"])
        .arg(&caps)
        .arg("--annotations")
        .arg(golden("annotations.json"))
        .arg("--lexicon")
        .arg(golden("lexicon.json"))
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o = run(bin().args(["simulate", "--seeds", "x..y", "--out"]).arg(dir.path()));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_overrides() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("env");
    assert!(run(bin().env("LOGIT_ANCHOR_SEED", "7,8").args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(&out))
        .status
        .success());
    assert_eq!(json(&out.join("report.json"))["seeds"], serde_json::json!([7, 8]));
    assert!(run(bin()
        .env("LOGIT_ANCHOR_SEED", "7,8")
        .args(["simulate", "--seeds", "3..6", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out))
    .status
    .success());
    assert_eq!(json(&out.join("report.json"))["seeds"], serde_json::json!([3, 4, 5]));
    assert_eq!(std::fs::read_dir(out.join("traces")).unwrap().count(), 9);
}

const SWEEP_ZERO: &str = r#"
seeds = { start = 0, count = 8 }
[sweep]
gamma = [0.0]
lambda = [0.01, 0.05, 0.1]
beta = [0.1]
schedule = ["increasing", "constant"]
"#;

#[test]
fn zero_gamma_sweep_ties_with_constrained_baseline() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SWEEP_ZERO);
    assert!(run(bin().args(["sweep", "--config"]).arg(&cfg).arg("--out").arg(dir.path())).status.success());
    let rep = json(&dir.path().join("sweep.json"));
    let reference = &rep["references"][0];
    let rows = rep["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    for r in rows {
        for k in ["chair_i", "chair_s", "cover", "cog", "object_score", "hal_noun_rate"] {
            assert_eq!(r[k], reference[k], "{k}");
        }
    }
    assert_eq!(rows.iter().filter(|r| r["best"] == true).count(), 1);
}

#[test]
fn single_cell_sweep_and_reproducible_grid() {
    let dir = TempDir::new().unwrap();
    let one = write_config(dir.path(), "seeds = [0, 1, 2]\n[sweep]\ngamma = [0.3]\nlambda = [0.05]\nbeta = [0.1]\n");
    assert!(run(bin().args(["sweep", "--config"]).arg(&one).arg("--out").arg(dir.path())).status.success());
    let rep = json(&dir.path().join("sweep.json"));
    assert_eq!(rep["rows"].as_array().unwrap().len(), 1);
    assert_eq!(rep["rows"][0]["strategy"], "flb(increasing,gamma=0.3,lambda=0.05,beta=0.1,l0=full)");
    assert_eq!(rep["rows"][0]["best"], true);

    // Default config: 3x3 grid.
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(bin().args(["sweep", "--seeds", "0..10", "--out"]).arg(&a)).status.success());
    assert!(run(bin().args(["sweep", "--seeds", "0..10", "--jobs", "3", "--out"]).arg(&b)).status.success());
    let ja = std::fs::read(a.join("sweep.json")).unwrap();
    assert_eq!(ja, std::fs::read(b.join("sweep.json")).unwrap());
    let rows = json(&a.join("sweep.json"))["rows"].as_array().unwrap().len();
    assert_eq!(rows, 9);
}

#[test]
fn ablate_and_bench() {
    let dir = TempDir::new().unwrap();
    assert!(run(bin().args(["ablate", "--seeds", "0..10", "--out"]).arg(dir.path())).status.success());
    let rep = json(&dir.path().join("ablate.json"));
    let configs: Vec<&str> = rep["rows"].as_array().unwrap().iter().map(|r| r["config"].as_str().unwrap()).collect();
    assert_eq!(configs, ["baseline", "nouns_only", "the_only", "full"]);

    let o = run(bin().args(["bench", "--seeds", "0..80", "--format", "json", "--out"]).arg(dir.path()));
    assert!(o.status.success());
    let rep = json(&dir.path().join("bench.json"));
    let calls: Vec<f64> =
        rep["rows"].as_array().unwrap().iter().map(|r| r["provider_calls_per_token"].as_f64().unwrap()).collect();
    assert_eq!(calls, [1.0, 1.0, 2.0]);
    assert!(!dir.path().join("bench.csv").exists());

    let o = run(bin().args(["bench", "--seeds", "0", "--out"]).arg(dir.path()));
    assert_eq!(o.status.code(), Some(3));
}
