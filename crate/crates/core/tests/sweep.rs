use formation_core::dynamics::Law;
use formation_core::scenarios::{self, SweepGrid};

#[test]
fn faster_dither_converges_on_the_rectangle() {
    let base = scenarios::preset("rectangle").unwrap();
    let grid = SweepGrid { omegas: vec![1.0, 3.0, 5.0, 7.0], ..Default::default() };
    let rows = scenarios::sweep(&base, &grid).unwrap();
    let flags: Vec<bool> = rows.iter().map(|r| r.converged).collect();
    assert_eq!(flags, [false, true, true, true]);
    // once converged, faster dithers stay converged
    let first = flags.iter().position(|&c| c).unwrap();
    assert!(flags[first..].iter().all(|&c| c));
}

#[test]
fn random_phases_do_not_matter_at_omega_7() {
    let base = scenarios::preset("rectangle").unwrap();
    let grid = SweepGrid { phase_draws: 10, seed: 99, ..Default::default() };
    let rows = scenarios::sweep(&base, &grid).unwrap();
    assert_eq!(rows.len(), 10);
    for r in &rows {
        assert!(r.error.is_none());
        assert!(
            r.converged,
            "phase draw {:?}: psi(T)={} max edge error {}",
            r.cell.phase_draw, r.psi_final, r.max_edge_error
        );
    }
}

#[test]
fn halving_the_step_changes_nothing_material() {
    let base = scenarios::preset("rectangle").unwrap();
    let grid = SweepGrid { dt_factors: vec![1.0, 0.5], ..Default::default() };
    let rows = scenarios::sweep(&base, &grid).unwrap();
    assert!(rows.iter().all(|r| r.converged));
    assert!((rows[0].dt - 2.0 * rows[1].dt).abs() < 1e-15);
    let (a, b) = (rows[0].psi_final, rows[1].psi_final);
    assert!((a - b).abs() <= 1e-6 * a, "{a} vs {b}");
}

#[test]
fn sweep_reports_cell_errors_in_place() {
    let base = scenarios::preset("rectangle").unwrap();
    let grid = SweepGrid { omegas: vec![7.0], dt_factors: vec![4.0], ..Default::default() };
    let rows = scenarios::sweep(&base, &grid).unwrap();
    assert!(!rows[0].converged);
    assert!(rows[0].error.as_deref().unwrap().contains("step"));
}

#[test]
fn gradient_and_bracket_laws_also_converge() {
    let base = scenarios::preset("double-tetrahedron").unwrap();
    for law in [Law::Gradient, Law::LieBracket] {
        let grid = SweepGrid { law, ..Default::default() };
        let rows = scenarios::sweep(&base, &grid).unwrap();
        assert!(rows[0].converged, "{law:?}");
    }
}

#[test]
fn empty_grid_is_an_error() {
    let base = scenarios::preset("rectangle").unwrap();
    assert!(scenarios::sweep(&base, &SweepGrid { omegas: vec![], ..Default::default() }).is_err());
}

#[test]
fn faster_dither_gives_a_steeper_envelope() {
    let base = scenarios::preset("rectangle").unwrap();
    let grid = SweepGrid { omegas: vec![1.0, 7.0], ..Default::default() };
    let rows = scenarios::sweep(&base, &grid).unwrap();
    assert!(rows[1].c_hat > 5.0 * rows[0].c_hat, "{} vs {}", rows[1].c_hat, rows[0].c_hat);
}
