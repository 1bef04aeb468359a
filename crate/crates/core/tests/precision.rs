use formation_core::dither::{DitherShape, SinusoidSchedule};
use formation_core::dynamics::{integrate, IntegrateOptions, Law, SystemDef};
use formation_core::potential::{grad_psi, psi_global, BodyFrames, FormationSpec};
use formation_core::rigidity::{is_infinitesimally_rigid, Framework, DEFAULT_RANK_TOL};
use formation_core::scalar::Scalar;
use formation_core::{System32, System64};

fn rectangle<T: Scalar>(omega: T) -> SystemDef<T> {
    let l = T::lit;
    let edges = [(0, 1, l(3.0)), (2, 3, l(3.0)), (1, 2, l(4.0)), (0, 3, l(4.0)), (0, 2, l(5.0)), (1, 3, l(5.0))];
    let spec = FormationSpec::from_edges(4, 2, &edges).unwrap();
    let third = T::PI() / l(3.0);
    let frames = BodyFrames::planar(&[T::zero(), third, l(2.0) * third, l(3.0) * third]);
    let schedule = SinusoidSchedule::linear(4, 2, omega).unwrap();
    SystemDef::new(spec, frames, DitherShape::default(), schedule).unwrap()
}

const START: [f64; 8] = [-2.0, 0.0, 4.0, 0.0, 1.0, 8.0, 0.0, 3.0];

fn final_psi<T: Scalar>(sys: &SystemDef<T>) -> T {
    let p0: Vec<T> = START.iter().map(|&x| T::lit(x)).collect();
    let traj = integrate(
        &sys.field(Law::Dither),
        &p0,
        T::zero(),
        T::lit(25.0),
        sys.default_step(),
        IntegrateOptions::default(),
    )
    .unwrap();
    *traj.psi.last().unwrap()
}

#[test]
fn single_precision_run_converges_like_double() {
    let (s32, s64): (System32, System64) = (rectangle(7.0f32), rectangle(7.0f64));
    let (a, b) = (final_psi(&s32), final_psi(&s64));
    assert!(b < 1e-2);
    assert!((a as f64) < 1e-2, "f32 run ended at psi={a}");
}

#[test]
fn single_precision_potential_and_gradient() {
    let (s32, s64) = (rectangle(7.0f32), rectangle(7.0f64));
    let p32: Vec<f32> = START.iter().map(|&x| x as f32).collect();
    assert_eq!(psi_global(&s32.spec, &p32) as f64, psi_global(&s64.spec, &START));
    let (g32, g64) = (grad_psi(&s32.spec, &p32), grad_psi(&s64.spec, &START));
    for (a, b) in g32.iter().zip(&g64) {
        assert!((*a as f64 - b).abs() <= 1e-5 * (1.0 + b.abs()));
    }
}

#[test]
fn single_precision_rank() {
    let fw = Framework::new(rectangle(7.0f32).spec.graph().clone(), 2, vec![0.0f32, 0.0, 3.0, 0.0, 3.0, 4.0, 0.0, 4.0])
        .unwrap();
    let r = is_infinitesimally_rigid(&fw, DEFAULT_RANK_TOL).unwrap();
    assert_eq!(r.rank_g, 5);
    assert!(r.is_inf_rigid);
}
