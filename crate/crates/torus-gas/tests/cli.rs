//! End-to-end checks of the command-line surface: exit codes, config
//! diagnostics, the resolved-config echo, and run-to-run determinism.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_torus-gas"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("torus_gas_cli_{}_{}", name, std::process::id()));
    std::fs::remove_dir_all(&dir).ok();
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn check_kernel_emits_a_versioned_summary() {
    let dir = scratch("check_kernel");
    let config = write_config(
        &dir,
        "[grid]\nn = 256\n\n[kernel]\nname = \"riesz\"\ngamma = 2.0\n",
    );
    let out = bin()
        .args(["check-kernel", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let summary = std::fs::read_to_string(dir.join("check-kernel/summary.json")).unwrap();
    assert!(summary.contains("\"schema_version\": 1"));
    assert!(summary.contains("\"gamma_fit\""));
    let minima = std::fs::read_to_string(dir.join("check-kernel/heat_minima.csv")).unwrap();
    assert!(minima.starts_with("s,min_p"));
    assert!(dir.join("check-kernel/resolved.toml").exists());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn splitting_command_passes_on_a_small_run() {
    let dir = scratch("splitting");
    let config = write_config(
        &dir,
        "[grid]\nn = 128\n\n[gibbs]\nn_points = 8\n\n[sweeps]\ntrials = 5\n",
    );
    let out = bin()
        .args(["verify-splitting", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let rows = std::fs::read_to_string(dir.join("verify-splitting/splitting.csv")).unwrap();
    assert_eq!(rows.lines().count(), 11, "header plus two variants per trial");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn malformed_config_names_the_offending_key() {
    let dir = scratch("malformed");
    let config = write_config(&dir, "[kernel]\ngama = 2.0\n");
    let out = bin()
        .args(["equilibrium", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("kernel.gama"), "diagnostic should spell the path: {stderr}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn unknown_command_is_rejected_by_the_parser() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn resolved_echo_reproduces_the_run() {
    let dir = scratch("echo");
    let config = write_config(
        &dir,
        "[grid]\nn = 256\n\n[potential]\npreset = \"cosine\"\namplitude = 0.5\n\n[gibbs]\ntheta = 16.0\n",
    );
    let first = dir.join("first");
    let out = bin()
        .args(["equilibrium", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&first)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let echo = first.join("equilibrium/resolved.toml");
    let second = dir.join("second");
    let out = bin()
        .args(["equilibrium", "--config"])
        .arg(&echo)
        .arg("--out")
        .arg(&second)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let a = std::fs::read(first.join("equilibrium/summary.json")).unwrap();
    let b = std::fs::read(second.join("equilibrium/summary.json")).unwrap();
    assert_eq!(a, b, "rerunning from the echoed config must reproduce the summary");
    let a = std::fs::read(first.join("equilibrium/mu_theta.csv")).unwrap();
    let b = std::fs::read(second.join("equilibrium/mu_theta.csv")).unwrap();
    assert_eq!(a, b);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn seeded_sampling_is_bit_identical() {
    let dir = scratch("determinism");
    let config = write_config(
        &dir,
        concat!(
            "seed = 42\n\n[grid]\nn = 256\n\n[gibbs]\nn_points = 16\n\n",
            "[chain]\nsteps = 20000\nburn_in = 2000\nthin = 20\n",
        ),
    );
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.join(run);
        let out = bin()
            .args(["sample", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
        outputs.push((
            std::fs::read(out_dir.join("sample/state.csv")).unwrap(),
            std::fs::read(out_dir.join("sample/energy_series.csv")).unwrap(),
            std::fs::read(out_dir.join("sample/summary.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1], "same config and seed must give identical artifacts");
    std::fs::remove_dir_all(&dir).ok();
}
