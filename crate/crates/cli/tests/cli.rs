use std::path::Path;
use std::process::{Command, Output};

fn formlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_formlab")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn report(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_writes_trajectory_sidecar_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o =
        formlab(&["simulate", "--scenario", "rectangle", "--out", out, "--expect-convergence", "--record-every", "10"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("rectangle.csv")).unwrap();
    assert!(csv.starts_with("t,p_1_1,p_1_2,p_2_1,p_2_2,p_3_1,p_3_2,p_4_1,p_4_2,psi,psi_1,psi_2,psi_3,psi_4\n"));
    let sidecar = report(&dir.path().join("rectangle.json"));
    assert_eq!(sidecar["record_every"], 10);
    assert_eq!(sidecar["law"], "dither");
    let r = report(&dir.path().join("rectangle.report.json"));
    assert_eq!(r["converged"], true);
    assert_eq!(r["psi_initial"], 175.0);
}

#[test]
fn failed_convergence_check_exits_one() {
    let o = formlab(&["simulate", "--omega", "1", "--expect-convergence"]);
    assert_eq!(code(&o), 1);
    // without the check the same run is just reported
    assert_eq!(code(&formlab(&["simulate", "--omega", "1"])), 0);
}

#[test]
fn other_laws_and_overrides() {
    let o = formlab(&[
        "simulate",
        "--scenario",
        "double-tetrahedron",
        "--law",
        "lie-bracket",
        "--t-final",
        "100",
        "--omega",
        "3",
        "--expect-convergence",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let text = String::from_utf8_lossy(&o.stdout);
    let json_start = text.find('{').unwrap();
    let r: serde_json::Value = serde_json::from_str(&text[json_start..]).unwrap();
    assert_eq!(r["run"]["law"], "lie-bracket");
    assert_eq!(r["run"]["t_final"], 100.0);
    assert_eq!(r["run"]["omega"], 3.0);
}

#[test]
fn rigidity_and_hypotheses() {
    let o = formlab(&["rigidity", "--scenario", "double-tetrahedron", "--check-hypotheses"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("rank 9 of required 9"));
}

#[test]
fn non_rigid_scenario_fails_the_rank_check() {
    let dir = tempfile::tempdir().unwrap();
    let mut s: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/rectangle.json")).unwrap(),
    )
    .unwrap();
    // drop both diagonals: a four-cycle flexes
    s["edges"] = serde_json::json!([
        {"i": 1, "j": 2, "d": 3.0}, {"i": 3, "j": 4, "d": 3.0}, {"i": 2, "j": 3, "d": 4.0}, {"i": 1, "j": 4, "d": 4.0}
    ]);
    let path = dir.path().join("cycle.json");
    std::fs::write(&path, s.to_string()).unwrap();
    let o = formlab(&["rigidity", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("NOT infinitesimally rigid"));
}

#[test]
fn verify_dither_per_amplitude() {
    for amp in ["tanh", "rational"] {
        assert_eq!(code(&formlab(&["verify-dither", "--amplitude", amp])), 0, "{amp}");
    }
    // h(y)/y blows up near zero for a square-root amplitude
    assert_eq!(code(&formlab(&["verify-dither", "--amplitude", "power", "--exponent", "0.5"])), 1);
}

#[test]
fn verify_averaging_passes_and_writes_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let o = formlab(&["verify-averaging", "--t-end", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&dir.path().join("rectangle.averaging.report.json"));
    assert!(r["averaging"]["relative_residual"].as_f64().unwrap() < 1e-3);
    assert!(dir.path().join("rectangle.averaging.csv").exists());
    // the decomposition is only defined for the dithered loop
    assert_eq!(code(&formlab(&["verify-averaging", "--law", "gradient"])), 2);
}

#[test]
fn sweep_table_and_convergence_expectation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = formlab(&["sweep", "--omegas", "1,7", "--out", out]);
    assert_eq!(code(&o), 0);
    let table = std::fs::read_to_string(dir.path().join("rectangle.sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert_eq!(code(&formlab(&["sweep", "--omegas", "1,7", "--expect-convergence"])), 1);
    assert_eq!(
        code(&formlab(&["sweep", "--omegas", "5,7", "--phase-draws", "2", "--seed", "3", "--expect-convergence"])),
        0
    );
}

#[test]
fn esc_demo_short_horizon_is_reported_as_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = formlab(&["esc-demo", "--t-final", "100", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let r = report(&dir.path().join("esc-demo.report.json"));
    assert!(r["output_final"].as_f64().unwrap() < r["output_initial"].as_f64().unwrap());
    assert!(dir.path().join("esc-demo.csv").exists());
}

#[test]
fn bad_input_exits_two() {
    assert_eq!(code(&formlab(&["simulate", "--scenario", "no-such-preset"])), 2);
    assert_eq!(code(&formlab(&["simulate", "--dt", "1"])), 2);
    assert_eq!(code(&formlab(&["simulate", "--law", "teleport"])), 2);
}
