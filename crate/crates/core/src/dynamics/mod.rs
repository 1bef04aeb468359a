//! Closed-loop, Lie-bracket and gradient vector fields, plus the machinery to
//! integrate them and audit the averaging decomposition.

mod averaging;
mod integrate;
pub mod io;

pub use averaging::{averaging_residual, LieMethod, ResidualOptions, ResidualReport};
pub use integrate::{
    bound_fit, integrate, BoundFit, IntegrateOptions, Outputs, Trajectory, TrajectoryMeta, VectorField, BOUND_FLOOR,
    STEP_LIMIT_DIVISOR, STEP_RECOMMENDED_DIVISOR,
};

use serde::{Deserialize, Serialize};

use crate::dither::{Channel, DitherShape, Mode, SinusoidSchedule};
use crate::error::{Error, Result};
use crate::potential::{grad_block, psi_global, psi_locals, BodyFrames, FormationSpec};
use crate::scalar::Scalar;

/// Everything needed to evaluate the dithered formation controller.
#[derive(Debug, Clone)]
pub struct SystemDef<T> {
    pub spec: FormationSpec<T>,
    pub frames: BodyFrames<T>,
    pub shape: DitherShape<T>,
    pub schedule: SinusoidSchedule<T>,
}

impl<T: Scalar> SystemDef<T> {
    pub fn new(
        spec: FormationSpec<T>,
        frames: BodyFrames<T>,
        shape: DitherShape<T>,
        schedule: SinusoidSchedule<T>,
    ) -> Result<Self> {
        let (n, agents) = (spec.dim(), spec.num_agents());
        if frames.dim() != n || frames.num_agents() != agents {
            return Err(Error::Dimension(format!(
                "frames are for {} agents in R^{}, formation has {agents} in R^{n}",
                frames.num_agents(),
                frames.dim()
            )));
        }
        if schedule.dim() != n || schedule.num_agents() != agents {
            return Err(Error::Dimension(format!(
                "schedule is for {} agents in R^{}, formation has {agents} in R^{n}",
                schedule.num_agents(),
                schedule.dim()
            )));
        }
        Ok(SystemDef { spec, frames, shape, schedule })
    }

    pub fn state_len(&self) -> usize {
        self.spec.state_len()
    }

    /// Largest step the integrator accepts for the dithered loop.
    pub fn step_limit(&self) -> T {
        T::TAU() / (T::lit(STEP_LIMIT_DIVISOR) * self.schedule.max_frequency())
    }

    /// Default step, a 64th of the fastest dither period.
    pub fn default_step(&self) -> T {
        T::TAU() / (T::lit(STEP_RECOMMENDED_DIVISOR) * self.schedule.max_frequency())
    }

    pub fn field(&self, law: Law) -> FormationField<'_, T> {
        FormationField { sys: self, law }
    }
}

/// Which right-hand side drives the agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Law {
    /// Distance-only sinusoidal extremum seeking.
    Dither,
    /// The averaged system `p_i' = 1/2 [h1,h2](psi_i) grad_i psi`.
    LieBracket,
    /// Negative gradient baseline (needs relative positions).
    Gradient,
}

impl Law {
    pub fn as_str(&self) -> &'static str {
        match self {
            Law::Dither => "dither",
            Law::LieBracket => "lie-bracket",
            Law::Gradient => "gradient",
        }
    }
}

impl std::str::FromStr for Law {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dither" => Ok(Law::Dither),
            "lie-bracket" => Ok(Law::LieBracket),
            "gradient" => Ok(Law::Gradient),
            other => Err(Error::InvalidArgument(format!("unknown law `{other}`"))),
        }
    }
}

/// Closed loop `p_i' = sum_k sum_nu u_(i,k,nu)(t) h_nu(psi_i(p)) b_{i,k}`.
pub fn closed_loop_rhs_into<T: Scalar>(sys: &SystemDef<T>, t: T, p: &[T], out: &mut [T]) {
    let n = sys.spec.dim();
    let locals = psi_locals(&sys.spec, p);
    out.iter_mut().for_each(|x| *x = T::zero());
    for (i, &psi_i) in locals.iter().enumerate() {
        let h1 = sys.shape.h(Channel::Cos, psi_i);
        let h2 = sys.shape.h(Channel::Sin, psi_i);
        if h1 == T::zero() && h2 == T::zero() {
            continue;
        }
        for k in 0..n {
            let w = sys.schedule.frequency(i, k);
            let arg = w * t + sys.schedule.phase(i, k);
            let coef = w.sqrt() * (arg.cos() * h1 + arg.sin() * h2);
            for (o, &b) in out[i * n..(i + 1) * n].iter_mut().zip(sys.frames.vector(i, k)) {
                *o += coef * b;
            }
        }
    }
}

pub fn closed_loop_rhs<T: Scalar>(sys: &SystemDef<T>, t: T, p: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); p.len()];
    closed_loop_rhs_into(sys, t, p, &mut out);
    out
}

/// `Y(p)`: block `i` is `1/2 [h1,h2](psi_i(p)) grad_{p_i} psi(p)`.
pub fn lie_bracket_rhs_into<T: Scalar>(sys: &SystemDef<T>, p: &[T], out: &mut [T]) {
    let n = sys.spec.dim();
    let locals = psi_locals(&sys.spec, p);
    let half = T::lit(0.5);
    for (i, &psi_i) in locals.iter().enumerate() {
        let coef = half * sys.shape.bracket(psi_i);
        let g = grad_block(&sys.spec, i, p);
        for (o, gi) in out[i * n..(i + 1) * n].iter_mut().zip(g) {
            *o = coef * gi;
        }
    }
}

pub fn lie_bracket_rhs<T: Scalar>(sys: &SystemDef<T>, p: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); p.len()];
    lie_bracket_rhs_into(sys, p, &mut out);
    out
}

/// `-grad psi(p)`.
pub fn gradient_rhs_into<T: Scalar>(sys: &SystemDef<T>, p: &[T], out: &mut [T]) {
    sys.spec.gradient_into(crate::potential::Scope::Global, p, out);
    out.iter_mut().for_each(|x| *x = -*x);
}

pub fn gradient_rhs<T: Scalar>(sys: &SystemDef<T>, p: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); p.len()];
    gradient_rhs_into(sys, p, &mut out);
    out
}

/// One of the three formation laws bound to a system definition.
#[derive(Debug, Clone, Copy)]
pub struct FormationField<'a, T> {
    sys: &'a SystemDef<T>,
    law: Law,
}

impl<T: Scalar> VectorField<T> for FormationField<'_, T> {
    fn dim(&self) -> usize {
        self.sys.state_len()
    }

    fn eval(&self, t: T, p: &[T], out: &mut [T]) {
        match self.law {
            Law::Dither => closed_loop_rhs_into(self.sys, t, p, out),
            Law::LieBracket => lie_bracket_rhs_into(self.sys, p, out),
            Law::Gradient => gradient_rhs_into(self.sys, p, out),
        }
    }

    fn max_frequency(&self) -> Option<T> {
        match self.law {
            Law::Dither => Some(self.sys.schedule.max_frequency()),
            _ => None,
        }
    }

    fn outputs(&self, p: &[T]) -> Outputs<T> {
        Outputs { total: psi_global(&self.sys.spec, p), local: psi_locals(&self.sys.spec, p) }
    }
}

/// Control vector field `X_m(p) = h_nu(psi_i(p)) B_{i,k}`, embedded in `R^{nN}`.
pub fn control_field<T: Scalar>(sys: &SystemDef<T>, m: Mode, p: &[T]) -> Vec<T> {
    let n = sys.spec.dim();
    let psi_i = crate::potential::psi_local(&sys.spec, m.agent, p);
    let g = sys.shape.h(m.channel, psi_i);
    let mut out = vec![T::zero(); p.len()];
    for (o, &b) in out[m.agent * n..(m.agent + 1) * n].iter_mut().zip(sys.frames.vector(m.agent, m.axis)) {
        *o = g * b;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::grad_psi;
    use crate::scalar::dot;

    fn rect_sys(frames: BodyFrames<f64>) -> SystemDef<f64> {
        let spec = FormationSpec::from_edges(
            4,
            2,
            &[(0, 1, 3.0), (2, 3, 3.0), (1, 2, 4.0), (0, 3, 4.0), (0, 2, 5.0), (1, 3, 5.0)],
        )
        .unwrap();
        let schedule = SinusoidSchedule::linear(4, 2, 7.0).unwrap();
        SystemDef::new(spec, frames, DitherShape::default(), schedule).unwrap()
    }

    const TARGET: [f64; 8] = [0.0, 0.0, 3.0, 0.0, 3.0, 4.0, 0.0, 4.0];
    const INITIAL: [f64; 8] = [0.0, 0.0, -1.0, 4.0, 5.0, 3.0, 3.0, 0.0];

    #[test]
    fn targets_are_equilibria() {
        let sys = rect_sys(BodyFrames::planar(&[1.0, 2.0, 3.0, 4.0]));
        for t in [0.0, 0.3, 17.0] {
            assert!(closed_loop_rhs(&sys, t, &TARGET).iter().all(|&v| v == 0.0));
        }
        assert!(lie_bracket_rhs(&sys, &TARGET).iter().all(|&v| v == 0.0));
        assert!(gradient_rhs(&sys, &TARGET).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn closed_loop_velocity_bound() {
        let sys = rect_sys(BodyFrames::random(4, 2, 3));
        let locals = psi_locals(&sys.spec, &INITIAL);
        for j in 0..50 {
            let t = 0.137 * j as f64;
            let v = closed_loop_rhs(&sys, t, &INITIAL);
            for i in 0..4 {
                let block = &v[2 * i..2 * i + 2];
                let wmax = sys.schedule.frequency(i, 1);
                let bound = 2f64.sqrt()
                    * wmax.sqrt()
                    * (sys.shape.h(Channel::Cos, locals[i]).abs() + sys.shape.h(Channel::Sin, locals[i]).abs());
                assert!(dot(block, block).sqrt() <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn closed_loop_is_local() {
        // path graph 1-2-3: agent 1 does not see agent 3
        let spec = FormationSpec::from_edges(3, 2, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let sys = SystemDef::new(
            spec,
            BodyFrames::identity(3, 2),
            DitherShape::default(),
            SinusoidSchedule::linear(3, 2, 2.0).unwrap(),
        )
        .unwrap();
        let p = [0.0, 0.0, 0.5, 0.2, 1.0, 1.0];
        let mut q = p;
        q[4] += 0.7;
        q[5] -= 0.3;
        let (a, b) = (closed_loop_rhs(&sys, 0.4, &p), closed_loop_rhs(&sys, 0.4, &q));
        assert_eq!(&a[0..2], &b[0..2]);
        assert_ne!(&a[2..4], &b[2..4]);
    }

    #[test]
    fn lie_bracket_is_frame_independent() {
        let a = rect_sys(BodyFrames::identity(4, 2));
        let b = rect_sys(BodyFrames::random(4, 2, 11));
        let p = [0.1, -0.2, 3.3, 0.1, 2.8, 4.2, -0.1, 3.9];
        let (ya, yb) = (lie_bracket_rhs(&a, &p), lie_bracket_rhs(&b, &p));
        for (x, y) in ya.iter().zip(&yb) {
            assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn lie_bracket_is_half_sum_of_brackets() {
        let sys = rect_sys(BodyFrames::random(4, 2, 5));
        let p = [0.1, -0.2, 3.3, 0.1, 2.8, 4.2, -0.1, 3.9];
        let locals = psi_locals(&sys.spec, &p);
        let mut expected = vec![0.0; 8];
        for i in 0..4 {
            for k in 0..2 {
                let bpsi = crate::potential::lie_derivative_b(&sys.spec, &sys.frames, i, k, &p);
                let coef = 0.5 * sys.shape.bracket(locals[i]) * bpsi;
                for a in 0..2 {
                    expected[2 * i + a] += coef * sys.frames.vector(i, k)[a];
                }
            }
        }
        for (x, y) in lie_bracket_rhs(&sys, &p).iter().zip(&expected) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_field_descends() {
        let sys = rect_sys(BodyFrames::identity(4, 2));
        let g = grad_psi(&sys.spec, &INITIAL);
        let v = gradient_rhs(&sys, &INITIAL);
        assert_eq!(dot(&g, &v), -dot(&g, &g));
    }

    #[test]
    fn control_fields_sum_to_closed_loop() {
        let sys = rect_sys(BodyFrames::random(4, 2, 9));
        let t = 0.81;
        let mut sum = [0.0; 8];
        for m in sys.schedule.modes() {
            let u = crate::dither::u_eval(&sys.schedule, m, t);
            for (s, x) in sum.iter_mut().zip(control_field(&sys, m, &INITIAL)) {
                *s += u * x;
            }
        }
        for (a, b) in sum.iter().zip(closed_loop_rhs(&sys, t, &INITIAL)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let spec = FormationSpec::from_edges(2, 2, &[(0, 1, 1.0)]).unwrap();
        let err = SystemDef::new(
            spec,
            BodyFrames::identity(3, 2),
            DitherShape::default(),
            SinusoidSchedule::linear(2, 2, 1.0).unwrap(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn law_names_round_trip() {
        for law in [Law::Dither, Law::LieBracket, Law::Gradient] {
            assert_eq!(law.as_str().parse::<Law>().unwrap(), law);
        }
        assert!("newton".parse::<Law>().is_err());
    }
}
