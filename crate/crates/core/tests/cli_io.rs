//! File-format and determinism checks of the CLI layer.

mod common;

use std::fs;
use std::path::PathBuf;

use common::demo_config;
use pide_backstep::cli::{
    build_pipeline, cmd_eigs, cmd_kernel, kernel_csv, read_kernel_csv, RunOptions,
};
use pide_backstep::config::{parse_config, ConfigError};

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "pide-backstep-test-{}-{tag}",
        std::process::id()
    ));
    let _ = fs::remove_dir_all(&dir);
    dir
}

#[test]
fn demo_config_parses() {
    let doc = parse_config(&demo_config()).unwrap();
    assert_eq!(doc.plant.n, 2);
    assert_eq!(doc.plant.m, 1);
    let plant = doc.build_plant().unwrap();
    assert_eq!(plant.num_dirichlet(), 1);
    // coefficient spot check: λ_1(0) = 0.5
    assert_eq!((plant.lambda[0])(0.0), 0.5);
}

#[test]
fn malformed_expression_is_a_parse_error() {
    let dir = scratch_dir("badexpr");
    fs::create_dir_all(&dir).unwrap();
    let text = fs::read_to_string(demo_config()).unwrap();
    let bad = text.replace("\"1\", \"1 + z\"", "\"1+q\", \"1 + z\"");
    let path = dir.join("bad.json");
    fs::write(&path, bad).unwrap();
    match parse_config(&path) {
        Err(ConfigError::Parse { .. }) => {}
        other => panic!("expected expression parse error, got {other:?}"),
    }
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn dimension_mismatch_detected() {
    let dir = scratch_dir("dims");
    fs::create_dir_all(&dir).unwrap();
    let text = fs::read_to_string(demo_config()).unwrap();
    let bad = text.replace("\"Q0\": [-1.0]", "\"Q0\": [-1.0, 2.0]");
    let path = dir.join("bad.json");
    fs::write(&path, bad).unwrap();
    assert!(matches!(
        parse_config(&path),
        Err(ConfigError::DimensionMismatch(_))
    ));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn kernel_outputs_are_deterministic_and_reload_bit_exact() {
    let out_a = scratch_dir("det-a");
    let out_b = scratch_dir("det-b");
    let mut run = RunOptions::new(demo_config());
    run.grid = Some(26); // keep the double solve cheap
    run.out = out_a.clone();
    let pipe = cmd_kernel(&run).unwrap();
    run.out = out_b.clone();
    cmd_kernel(&run).unwrap();

    for name in ["K.csv", "G.csv", "A0_tilde.csv", "meta.json"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }

    // round-trip: reloaded samples equal the in-memory kernel bit for bit
    let text = fs::read_to_string(out_a.join("K.csv")).unwrap();
    assert_eq!(text, kernel_csv(&pipe.sol));
    let records = read_kernel_csv(&text);
    let mm = pipe.sol.grid_n;
    assert_eq!(records.len(), pipe.sol.n * pipe.sol.n * (mm * (mm + 1) / 2));
    for (i, j, z, zeta, v) in records {
        let iz = pipe
            .sol
            .z_nodes
            .iter()
            .position(|&x| x == z)
            .expect("z is a stored node");
        let ic = pipe
            .sol
            .z_nodes
            .iter()
            .position(|&x| x == zeta)
            .expect("zeta is a stored node");
        let stored = pipe.sol.k_values[(i - 1) * pipe.sol.n + (j - 1)][iz * mm + ic];
        assert!(v == stored, "bit-exact reload failed at ({i},{j},{z},{zeta})");
    }

    let _ = fs::remove_dir_all(&out_a);
    let _ = fs::remove_dir_all(&out_b);
}

#[test]
fn eigs_writes_per_channel_values() {
    let out = scratch_dir("eigs");
    let mut run = RunOptions::new(demo_config());
    run.out = out.clone();
    let mu_max = cmd_eigs(&run).unwrap();
    assert!((mu_max + 1.36).abs() < 0.05);
    let text = fs::read_to_string(out.join("eigs.csv")).unwrap();
    assert_eq!(text.lines().count(), 3); // header + one per channel
    let _ = fs::remove_dir_all(&out);
}

#[test]
fn mu_c_override_changes_the_kernel() {
    let mut run = RunOptions::new(demo_config());
    run.grid = Some(26);
    let base = build_pipeline(&run).unwrap();
    run.mu_c = Some(8.0);
    let shifted = build_pipeline(&run).unwrap();
    assert_eq!(shifted.sol.mu_c, 8.0);
    let mm = base.sol.grid_n;
    let idx = (mm - 1) * mm + (mm - 1) / 2;
    assert!(
        (base.sol.k_values[0][idx] - shifted.sol.k_values[0][idx]).abs() > 1e-3,
        "kernel must depend on the shift"
    );
}
