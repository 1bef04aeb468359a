use formation_core::dither::DitherShape;
use formation_core::dynamics::{integrate, IntegrateOptions};
use formation_core::esc::{averaged_field, demo_problem, ControlAffineSystem, DemoOutput, EscDemo, EscProblem};

#[test]
fn unspanned_direction_is_never_corrected() {
    // a single input channel along the first axis cannot move the second coordinate
    let problem = demo_problem::<f64>(DemoOutput::Quadratic, 2, &[0], vec![7.0]).unwrap();
    let dt = 2.0 * std::f64::consts::PI / (64.0 * 7.0);
    let traj =
        integrate(&problem, &[1.0, 1.0], 0.0, 500.0, dt, IntegrateOptions { record_every: 100, ..Default::default() })
            .unwrap();
    let end = traj.final_state();
    assert!(end[0].abs() < 0.2, "driven coordinate {}", end[0]);
    assert_eq!(end[1], 1.0);
}

#[test]
fn averaged_field_descends_the_output() {
    let problem = demo_problem::<f64>(DemoOutput::Quartic, 2, &[0, 1], vec![7.0, 14.0]).unwrap();
    let p = [0.8, -0.5];
    let f = averaged_field(&problem, &p, 1e-4);
    // quartic output has gradient 4 p^3 componentwise; the average must point downhill
    let grad = [4.0 * p[0] * p[0] * p[0], 4.0 * p[1] * p[1] * p[1]];
    assert!(f[0] * grad[0] + f[1] * grad[1] < 0.0);
}

#[test]
fn short_demo_decreases_the_output() {
    let demo = EscDemo { t_final: 200.0, ..Default::default() };
    let traj = demo.run().unwrap();
    let (a, b) = (traj.psi[0], *traj.psi.last().unwrap());
    assert!(b < 0.05 * a, "{a} -> {b}");
}

#[test]
fn output_closure_can_be_any_nonnegative_map() {
    let plant =
        ControlAffineSystem::with_output_fn(1, ControlAffineSystem::coordinate_fields(1, &[0]), |p: &[f64]| {
            (p[0] - 2.0).powi(2)
        })
        .unwrap();
    let problem = EscProblem::new(plant, DitherShape::default(), vec![5.0], vec![0.0]).unwrap();
    let dt = 2.0 * std::f64::consts::PI / (64.0 * 5.0);
    let traj = integrate(&problem, &[0.0], 0.0, 400.0, dt, IntegrateOptions::default()).unwrap();
    assert!((traj.final_state()[0] - 2.0).abs() < 0.2);
}
