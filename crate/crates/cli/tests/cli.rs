use std::path::Path;
use std::process::{Command, Output};

fn vsnash(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vsnash"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary launches")
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("exp.toml");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL_RUN: &str = r#"
[instance]
family = "linear_cournot"
n = 3
l = 2
seed = 5

[scheme]
kind = "vs_pgr"
alpha = 0.02

[batch]
kind = "raw_geometric"
rho = 0.9

[run]
replications = 2
max_iters = 5
seed = 1
"#;

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().unwrap_or_else(|| panic!("no stderr in {text:?}"));
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr not JSON ({e}): {text:?}"))
}

#[test]
fn run_writes_artifacts_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RUN);
    let out_dir = tmp.path().join("results");
    let out = vsnash(
        &["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()],
        &[("VSNASH_WORKERS", "1")],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["trace.csv", "summary.json", "instance.json"] {
        assert!(out_dir.join(f).exists(), "missing {f}");
    }
    let brief: serde_json::Value =
        serde_json::from_slice(&out.stdout).expect("stdout is one JSON object");
    assert_eq!(brief["replications"], serde_json::json!(2));
    assert!(brief["final_mse"].as_f64().unwrap().is_finite());
}

#[test]
fn unknown_config_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL_RUN.replace("max_iters", "max_itres"));
    let out = vsnash(&["run", cfg.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "config");
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn failed_contraction_gate_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let body = SMALL_RUN
        .replace("kind = \"vs_pgr\"\nalpha = 0.02", "kind = \"vs_pbr\"\nmu = 1.0")
        .replace("n = 3", "n = 6");
    let cfg = write_config(tmp.path(), &body);
    let out = vsnash(&["run", cfg.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let err = stderr_json(&out);
    assert_eq!(err["error"], "precondition");
    assert!(err["message"].as_str().unwrap().contains("contraction"));
    // the gate fires before any artifact is written
    assert!(!tmp.path().join("trace.csv").exists());
}

#[test]
fn invalid_worker_env_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RUN);
    let out = vsnash(&["run", cfg.to_str().unwrap()], &[("VSNASH_WORKERS", "zero")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_json(&out)["message"].as_str().unwrap().contains("VSNASH_WORKERS"));
}

#[test]
fn predict_emits_bounds_for_each_eps() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL_RUN.replace("alpha = 0.02", "alpha = 0.0001"));
    let out = vsnash(&["predict", cfg.to_str().unwrap(), "--eps", "1e-2,1e-3"], &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let preds = report["predictions"].as_array().unwrap();
    assert_eq!(preds.len(), 2);
    assert!(preds[0]["k_eps"].as_f64().unwrap() <= preds[1]["k_eps"].as_f64().unwrap());
}

#[test]
fn plot_renders_svg_from_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RUN);
    let out_dir = tmp.path().join("results");
    let run = vsnash(
        &["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()],
        &[("VSNASH_WORKERS", "1")],
    );
    assert!(run.status.success());
    let trace = out_dir.join("trace.csv");
    let svg_path = tmp.path().join("conv.svg");
    let plot = vsnash(
        &["plot", trace.to_str().unwrap(), "--out", svg_path.to_str().unwrap()],
        &[],
    );
    assert!(plot.status.success(), "{}", String::from_utf8_lossy(&plot.stderr));
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("<polyline"));

    let bad = vsnash(&["plot", trace.to_str().unwrap(), "--column", "bogus"], &[]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn gen_instance_writes_reloadable_json() {
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("inst.toml");
    std::fs::write(&spec, "[instance]\nfamily = \"linear_cournot\"\nn = 4\nl = 3\nseed = 9\n")
        .unwrap();
    let out_path = tmp.path().join("instance.json");
    let out = vsnash(
        &["gen-instance", spec.to_str().unwrap(), "--out", out_path.to_str().unwrap()],
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["n"], serde_json::json!(4));
    assert_eq!(v["d"].as_array().unwrap().len(), 3);
}
