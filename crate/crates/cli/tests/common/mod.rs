#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

/// Runs the binary with `dir` as the working directory.
pub fn tslpm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tslpm"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("failed to launch tslpm")
}

/// Runs the binary and panics with its stderr on failure.
pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = tslpm(dir, args);
    assert!(
        out.status.success(),
        "tslpm {} failed ({:?}):\n{}",
        args.join(" "),
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub const DEFAULT_CONFIG: &str = r#"{"alpha_mode":"shared","beta_mode":"per_node"}"#;

/// Every pipeline command on a simulated N=5, T=100 panel, all paths
/// relative to `dir`. `hmc` holds the extra sampler flags.
pub fn run_pipeline(dir: &Path, hmc: &[&str]) {
    fs::write(dir.join("config.json"), DEFAULT_CONFIG).unwrap();
    let data = ["--data", "panel.csv", "--config", "config.json"];
    let with = |extra: &[&str]| -> Vec<String> {
        let mut v: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
        v.extend(data.iter().map(|s| s.to_string()));
        v
    };
    let run = |args: Vec<String>| {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        ok(dir, &refs);
    };
    let simulate = ok(
        dir,
        &["simulate", "--nodes", "5", "--timesteps", "100", "--seed", "7", "--out", "panel.csv", "--params-out", "truth.json"],
    );
    fs::write(dir.join("simulate.stdout"), simulate.stdout).unwrap();
    run(with(&["fit", "map", "--seed", "1", "--out", "map.json"]));
    let mut h = vec!["fit", "hmc", "--seed", "2", "--chains", "2", "--init-map", "map.json", "--out-dir", "hmc"];
    h.extend_from_slice(hmc);
    run(with(&h));
    run(vec![
        "align".into(),
        "hmc/chain_0.json".into(),
        "hmc/chain_1.json".into(),
        "--reference-map".into(),
        "map.json".into(),
        "--out-dir".into(),
        "aligned".into(),
    ]);
    run(with(&["forecast", "--fit", "map.json", "--seed", "3", "--out", "forecast_map.json", "--csv", "forecast_map.csv"]));
    run(with(&[
        "forecast", "--chain", "aligned/chain_0.json", "--chain", "aligned/chain_1.json", "--mode", "one-step", "--draws",
        "500", "--seed", "4", "--out", "forecast_one.json", "--csv", "forecast_one.csv",
    ]));
    run(with(&["evaluate", "--seed", "5", "--draws", "50", "--out", "rmse.csv", "--fit-out", "train_map.json"]));
    run(with(&["dic", "--chain", "aligned/chain_0.json", "--chain", "aligned/chain_1.json", "--out", "dic.json"]));
    run(with(&["ppc", "--chain", "hmc/chain_0.json", "--seed", "6", "--out", "ppc.csv"]));
}

/// Contents of every file under `dir`, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}
