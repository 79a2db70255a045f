use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn qmaxwell(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmaxwell"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--output-dir")
        .arg(out)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

const UNIFORM16: &str = r#"{
  "grid": { "N": 16, "length": 1.0 },
  "profile": { "family": "uniform" },
  "entropy": { "kind": "boltzmann", "T": 1.0 }
}"#;

#[test]
fn solve_uniform_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = qmaxwell(&["solve"], &write_config(dir.path(), UNIFORM16), &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("report.json"));
    assert!(report["converged"].as_bool().unwrap());
    assert!(report["equilibrium"]["constraint_residual"].as_f64().unwrap() < 1e-10);
    assert!(report["provenance"]["timestamp"].as_u64().is_some());
    let checks = report["checks"].as_array().unwrap();
    let pass = |name: &str| checks.iter().find(|c| c["name"] == name).unwrap()["pass"].as_bool().unwrap();
    assert!(pass("constraint_residual") && pass("el_residual_operator") && pass("h_norm_bound"));
    assert_eq!(report["files"].as_array().unwrap().len(), 3);

    let spectrum = std::fs::read_to_string(out.join("spectrum.csv")).unwrap();
    assert_eq!(spectrum.lines().next().unwrap(), "p,rho_p,neg_log_rho_p");
    assert_eq!(spectrum.lines().count(), 17);
    let mut fields = csv::Reader::from_path(out.join("fields.csv")).unwrap();
    let header: Vec<String> = fields.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["x", "n", "n_rho", "k", "s_loc", "a_dual", "a_moment", "v_star", "omega"]);
    for row in fields.records() {
        let row = row.unwrap();
        let n: f64 = row[1].parse().unwrap();
        let n_rho: f64 = row[2].parse().unwrap();
        assert!((n - n_rho).abs() < 1e-10);
        assert!((n - 1.0).abs() < 1e-12);
    }
}

#[test]
fn solve_gaussian_all_checks_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = r#"{
      "grid": { "N": 64, "length": 10.0 },
      "profile": { "family": "gaussian", "center": 5.0, "width": 1.0 },
      "seed": 3
    }"#;
    let o = qmaxwell(&["solve"], &write_config(dir.path(), cfg), &out);
    assert_eq!(o.status.code(), Some(0));
    let report = read_json(&out.join("report.json"));
    for c in report["checks"].as_array().unwrap() {
        assert!(c["pass"].as_bool().unwrap() && c.get("skipped").is_none(), "{c}");
    }
}

#[test]
fn primal_solve_lists_skipped_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = r#"{
      "grid": { "N": 16, "length": 10.0 },
      "profile": { "family": "gaussian", "center": 5.0, "width": 1.5 },
      "solver": { "method": "primal" }
    }"#;
    let o = qmaxwell(&["solve"], &write_config(dir.path(), cfg), &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&out.join("report.json"));
    let skipped: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c.get("skipped").is_some())
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(skipped.contains(&"el_residual_operator") && skipped.contains(&"h_norm_bound"));
}

#[test]
fn malformed_config_exits_1_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for text in [
        "{ not json",
        r#"{ "grid": { "N": 16, "length": 1.0 }, "profile": { "family": "uniform" }, "bogus": 1 }"#,
        r#"{ "grid": { "N": 1, "length": 1.0 }, "profile": { "family": "uniform" } }"#,
        r#"{ "grid": { "N": 8, "length": -1.0 }, "profile": { "family": "uniform" } }"#,
    ] {
        let o = qmaxwell(&["solve"], &write_config(dir.path(), text), &out);
        assert_eq!(o.status.code(), Some(1), "{text}");
        assert!(!out.exists());
    }
    let o = qmaxwell(&["solve"], &dir.path().join("missing.json"), &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn solver_failure_exits_2_with_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = r#"{
      "grid": { "N": 32, "length": 10.0 },
      "profile": { "family": "gaussian", "center": 5.0, "width": 1.0 },
      "solver": { "method": "dual", "max_iter": 1 }
    }"#;
    let o = qmaxwell(&["solve"], &write_config(dir.path(), cfg), &out);
    assert_eq!(o.status.code(), Some(2));
    let report = read_json(&out.join("report.json"));
    assert!(!report["converged"].as_bool().unwrap());
    assert!(report["error"].as_str().unwrap().contains("converge"));
    assert!(!out.join("fields.csv").exists());
}

#[test]
fn oracle_compare_two_and_four_points() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("profile.txt");
    std::fs::write(&profile, "1.2\n0.8\n").unwrap();
    let cfg = format!(
        r#"{{ "grid": {{ "N": 2, "length": 1.0 }}, "profile": {{ "family": "file", "path": {:?} }} }}"#,
        profile
    );
    let out = dir.path().join("o2");
    let o = qmaxwell(&["oracle-compare"], &write_config(dir.path(), &cfg), &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out.join("oracle.json"));
    assert!(r["free_energy_diff"].as_f64().unwrap() < 1e-8);
    assert!(r["scan_min_second_difference"].as_f64().unwrap() > 0.0);
    assert!(r["scan_min_free_energy"].as_f64().unwrap() >= r["solver_free_energy"].as_f64().unwrap() - 1e-12);

    let out = dir.path().join("o4");
    let cfg = r#"{ "grid": { "N": 4, "length": 1.0 }, "profile": { "family": "uniform" } }"#;
    let o = qmaxwell(&["oracle-compare"], &write_config(dir.path(), cfg), &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.join("oracle.json").exists());
}

#[test]
fn sweep_eta_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = r#"{
      "grid": { "N": 12, "length": 10.0 },
      "profile": { "family": "gaussian", "center": 5.0, "width": 1.5 },
      "verify": { "eta_sweep": { "j_min": 4, "j_max": 20, "N": 12 } }
    }"#;
    let o = qmaxwell(&["sweep-eta"], &write_config(dir.path(), cfg), &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let table = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(table.starts_with("eta,trace_distance,"));
    assert_eq!(table.lines().count(), 1 + 17 + 1);
    assert!(read_json(&out.join("sweep.json"))["pass"].as_bool().unwrap());
}

#[test]
fn verify_seed_override_changes_only_seeded_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{
      "grid": { "N": 24, "length": 10.0 },
      "profile": { "family": "gaussian", "center": 5.0, "width": 1.0 },
      "verify": { "refinement_levels": [32, 64], "eta_sweep": { "j_min": 4, "j_max": 20, "N": 12 }, "samples": 20 }
    }"#,
    );
    let out = dir.path().join("out");
    let run = |seed: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_qmaxwell"))
            .args(["verify", "--seed", seed, "--config"])
            .arg(&cfg)
            .arg("--output-dir")
            .arg(&out)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
        read_json(&out.join("verify.json"))
    };
    let a = run("1");
    let b = run("2");
    assert_eq!(a["config"]["seed"], 1);
    assert_eq!(b["config"]["seed"], 2);
    assert_eq!(a["equilibrium"], b["equilibrium"]);
    assert_ne!(a["checks"], b["checks"]);
}

#[test]
fn help_exits_0_and_unknown_subcommand_exits_1() {
    let o = Command::new(env!("CARGO_BIN_EXE_qmaxwell")).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let o = Command::new(env!("CARGO_BIN_EXE_qmaxwell")).arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
}
