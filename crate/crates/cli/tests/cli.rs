//! End-to-end tests of the `nehari` binary: exit codes, output schemas,
//! determinism, and re-verification of emitted solutions.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nehari_core::solver::presets;
use nehari_core::VertexFunction;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_nehari")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn staggered_config() -> &'static str {
    r#"
        [lattice]
        dim = 1
        sides = [16]
        period = 2

        [potential]
        kind = "staggered"
        v = 1.0

        [nonlinearity]
        kind = "power"
        p = 4.0

        [solver]
        seed = 7

        [sweep]
        sides = [8, 16, 32]
    "#
}

#[test]
fn solve_exits_zero_and_every_emitted_solution_reverifies() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", staggered_config());
    let out = dir.path().join("out");
    let result = run(&[
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(0), "{result:?}");

    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("solve.json")).unwrap()).unwrap();
    for key in [
        "version",
        "timestamp",
        "config_echo",
        "gap_report",
        "solutions",
        "c_estimate",
        "diagnostics",
    ] {
        assert!(doc.get(key).is_some(), "missing top-level key {key}");
    }
    let solutions = doc["solutions"].as_array().unwrap();
    assert!(!solutions.is_empty());
    assert!(doc["c_estimate"].as_f64().unwrap() > 0.0);

    // Rebuild the instance independently and re-verify each emitted array.
    let problem = presets::staggered_problem(16, 1.0, 4.0).unwrap();
    for sol in solutions {
        let values: Vec<f64> = sol["values"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect();
        let u = VertexFunction::from_slice(std::sync::Arc::clone(problem.torus()), &values)
            .unwrap();
        let recomputed = problem.phi_gradient(&u).unwrap().linf_norm();
        let reported = sol["residual_pointwise"].as_f64().unwrap();
        assert!(
            (recomputed - reported).abs() <= 1e-12,
            "recomputed {recomputed} vs reported {reported}"
        );
        assert!(reported <= 1e-8);
        let energy = problem.phi(&u).unwrap();
        assert!((energy - sol["energy"].as_f64().unwrap()).abs() <= 1e-12);
    }
}

#[test]
fn identical_seeds_give_byte_identical_json_modulo_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", staggered_config());
    let mut texts = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        let result = run(&[
            "solve",
            "--config",
            config.to_str().unwrap(),
            "--seed",
            "123",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(result.status.code(), Some(0));
        let text = std::fs::read_to_string(out.join("solve.json")).unwrap();
        let without_timestamp: Vec<&str> = text
            .lines()
            .filter(|line| !line.trim_start().starts_with("\"timestamp\""))
            .collect();
        assert_eq!(without_timestamp.len(), text.lines().count() - 1);
        texts.push(without_timestamp.join("\n"));
    }
    assert_eq!(texts[0], texts[1], "same seed must reproduce byte-identical output");
}

#[test]
fn unknown_config_key_is_rejected_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "run.toml",
        &format!("{}\n[extra_block]\nx = 1\n", staggered_config()),
    );
    let result = run(&["solve", "--config", config.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("extra_block"), "{stderr}");
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(run(&["bogus"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["solve", "--help"]).status.code(), Some(0));
}

#[test]
fn zero_eigenvalue_instance_exits_2_and_reports_the_gap() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "run.toml",
        r#"
            [lattice]
            dim = 1
            sides = [8]
            period = 1

            [potential]
            kind = "constant"
            value = -2.0

            [nonlinearity]
            kind = "power"
            p = 4.0
        "#,
    );
    let out = dir.path().join("out");
    let result = run(&[
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2), "{result:?}");
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("solve.json")).unwrap()).unwrap();
    assert_eq!(doc["gap_report"]["pass"], serde_json::json!(false));
    assert!(doc["solutions"].as_array().unwrap().is_empty());

    let gap = run(&[
        "gap-check",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(gap.status.code(), Some(2));
}

#[test]
fn unattainable_tolerance_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "run.toml",
        &staggered_config().replace("seed = 7", "seed = 7\ntol_grad = 0.0\nn_starts = 2"),
    );
    let out = dir.path().join("out");
    let result = run(&[
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(3), "{result:?}");
}

#[test]
fn free_spectrum_csv_and_band_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "run.toml",
        r#"
            [lattice]
            dim = 1
            sides = [64]
            period = 1

            [potential]
            kind = "constant"
            value = 0.0

            [nonlinearity]
            kind = "power"
            p = 4.0
        "#,
    );
    let out = dir.path().join("out");
    let result = run(&[
        "spectrum",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(0));

    let csv = std::fs::read_to_string(out.join("spectrum.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "index,eigenvalue");
    assert_eq!(lines.len(), 65);

    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("spectrum.json")).unwrap())
            .unwrap();
    assert!(doc["min"].as_f64().unwrap() >= -1e-10);
    assert!(doc["max"].as_f64().unwrap() <= 4.0 + 1e-10);
}

#[test]
fn staggered_spectrum_reports_the_unit_gap_edges() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", staggered_config());
    let out = dir.path().join("out");
    let result = run(&[
        "spectrum",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(0));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("spectrum.json")).unwrap())
            .unwrap();
    let lower = doc["gap_report"]["lambda_minus_max"].as_f64().unwrap();
    let upper = doc["gap_report"]["lambda_plus_min"].as_f64().unwrap();
    assert!((lower + 1.0).abs() <= 1e-8, "lower edge {lower}");
    assert!((upper - 1.0).abs() <= 1e-8, "upper edge {upper}");
}

#[test]
fn sweep_emits_one_ok_row_per_side_with_positive_levels() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", staggered_config());
    let out = dir.path().join("out");
    let result = run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--emit-plot-data",
    ]);
    assert_eq!(result.status.code(), Some(0), "{result:?}");

    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "side,c_estimate,residual,n_orbits,status"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    for (row, side) in rows.iter().zip(["8", "16", "32"]) {
        assert_eq!(row[0], side);
        assert_eq!(row[4], "ok");
        assert!(row[1].parse::<f64>().unwrap() > 0.0);
        assert!(row[2].parse::<f64>().unwrap() <= 1e-8);
        assert!(row[3].parse::<usize>().unwrap() >= 1);
    }
    assert!(out.join("sweep.dat").exists());
}

#[test]
fn assumptions_passes_pure_power_and_catches_the_linear_term() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let good = write_config(dir.path(), "good.toml", staggered_config());
    let result = run(&[
        "assumptions",
        "--config",
        good.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(0));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("assumptions.json")).unwrap())
            .unwrap();
    assert_eq!(doc["audits"]["all_pass"], serde_json::json!(true));
    let table = doc["audits"]["epsilon_bounds"].as_array().unwrap();
    assert_eq!(table.len(), 4);
    for entry in table {
        let c = entry["c_epsilon"].as_f64().unwrap();
        assert!((c - 1.0).abs() <= 1e-3, "pure quartic has C = 1, got {c}");
    }

    let broken = write_config(
        dir.path(),
        "broken.toml",
        r#"
            [lattice]
            dim = 1
            sides = [16]
            period = 2

            [potential]
            kind = "staggered"
            v = 1.0

            [nonlinearity]
            kind = "table"
            terms = [{ p = 4.0, coeff = 1.0 }, { p = 2.0, coeff = 1.0 }]
        "#,
    );
    let result = run(&[
        "assumptions",
        "--config",
        broken.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(0), "failures are report content");
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("assumptions.json")).unwrap())
            .unwrap();
    assert_eq!(doc["audits"]["all_pass"], serde_json::json!(false));
    assert_eq!(doc["audits"]["small_o"]["pass"], serde_json::json!(false));
    assert!(!doc["audits"]["small_o"]["witness"].is_null());
    assert_eq!(doc["audits"]["growth"]["pass"], serde_json::json!(true));
    assert_eq!(
        doc["audits"]["superquadratic"]["pass"],
        serde_json::json!(true)
    );
}

#[test]
fn plot_flag_writes_gnuplot_columns_for_solve() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", staggered_config());
    let out = dir.path().join("out");
    let result = run(&[
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--emit-plot-data",
    ]);
    assert_eq!(result.status.code(), Some(0));
    let dat = std::fs::read_to_string(out.join("solve_orbit_0.dat")).unwrap();
    let mut lines = dat.lines();
    assert_eq!(lines.next().unwrap(), "# vertex u");
    assert_eq!(lines.count(), 16);
}
