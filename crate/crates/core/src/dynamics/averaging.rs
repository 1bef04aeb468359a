//! Pointwise audit of the averaging decomposition
//!
//! `psi(t) = psi(t0) + int Y psi - D1(t0) + D1(t) + int D2`
//!
//! along a recorded dither trajectory, where
//! `D1 = -sum UV~_m X_m psi - sum UV~_{m2,m1} X_m2 X_m1 psi` and
//! `D2 = sum UV~_{m2,m1} <V, grad X_m2 X_m1 psi>` with `V` the closed-loop velocity.

use serde::{Deserialize, Serialize};

use super::integrate::{integrate, IntegrateOptions, Trajectory};
use super::{closed_loop_rhs, control_field, Law, SystemDef};
use crate::dither::{uv_tilde, uv_tilde2, v_coeff, Mode};
use crate::error::{Error, Result};
use crate::potential::{grad_psi, grad_psi_local, psi_global, psi_locals, Scope};
use crate::scalar::{dot, norm_sq, Scalar};

/// How the iterated Lie derivatives `X_m2 X_m1 psi` and their gradients are obtained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LieMethod {
    /// Exact chain rule through the closed-form Hessian and third derivative of `psi`.
    #[default]
    ClosedForm,
    /// Central differences of the exact first Lie derivatives (two nested levels).
    FiniteDifference { eps: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualOptions {
    /// Substeps re-integrated between recorded samples before quadrature.
    pub refinement: usize,
    pub method: LieMethod,
    /// Samples with `psi` below this are ignored by the remainder-shape fits.
    pub psi_floor: f64,
}

impl Default for ResidualOptions {
    fn default() -> Self {
        ResidualOptions { refinement: 1, method: LieMethod::ClosedForm, psi_floor: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub t0: f64,
    pub t1: f64,
    pub psi0: f64,
    pub points: usize,
    pub method: LieMethod,
    /// `max_t |psi(t) - reconstruction(t)|`.
    pub max_residual: f64,
    /// `max_residual / psi(t0)`.
    pub relative_residual: f64,
    pub max_abs_d1: f64,
    pub max_abs_d2: f64,
    pub max_abs_y_psi: f64,
    /// `max |Y psi - sum_{m2,m1} v_{m2,m1} X_m2 X_m1 psi|`; zero up to rounding.
    pub bracket_consistency: f64,
    /// `max |D1| / psi^{3/2}`.
    pub c1_fit: f64,
    /// `max |D2| / psi^{5/2}`.
    pub c2_fit: f64,
    #[serde(skip)]
    pub times: Vec<f64>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
}

impl ResidualReport {
    pub fn shape_fits_finite(&self) -> bool {
        self.c1_fit.is_finite() && self.c2_fit.is_finite()
    }
}

/// Instantaneous terms of the decomposition at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Terms<T> {
    pub y_psi: T,
    pub d1: T,
    pub d2: T,
    pub sum_v_f: T,
}

fn embedded<T: Scalar>(sys: &SystemDef<T>, m: Mode) -> Vec<T> {
    let n = sys.spec.dim();
    let mut e = vec![T::zero(); sys.state_len()];
    e[m.agent * n..(m.agent + 1) * n].copy_from_slice(sys.frames.vector(m.agent, m.axis));
    e
}

fn y_psi<T: Scalar>(sys: &SystemDef<T>, locals: &[T], grad: &[T]) -> T {
    let n = sys.spec.dim();
    let half = T::lit(0.5);
    locals.iter().enumerate().map(|(i, &y)| half * sys.shape.bracket(y) * norm_sq(&grad[i * n..(i + 1) * n])).sum()
}

/// `f[m2][m1] = X_m2 X_m1 psi` and `<V, grad f[m2][m1]>` by the chain rule.
fn iterated_closed_form<T: Scalar>(
    sys: &SystemDef<T>,
    modes: &[Mode],
    basis: &[Vec<T>],
    p: &[T],
    v: &[T],
    locals: &[T],
    grad: &[T],
) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
    let spec = &sys.spec;
    let (agents, len, count) = (spec.num_agents(), p.len(), modes.len());
    let jets: Vec<(T, T, T)> = modes.iter().map(|m| sys.shape.h_derivatives(m.channel, locals[m.agent])).collect();
    let a: Vec<T> = basis.iter().map(|e| dot(grad, e)).collect();
    let local_grads: Vec<Vec<T>> = (0..agents).map(|i| grad_psi_local(spec, i, p)).collect();
    // l[i][m] = grad psi_i . e_m
    let l: Vec<Vec<T>> = local_grads.iter().map(|g| basis.iter().map(|e| dot(g, e)).collect()).collect();
    let gv: Vec<T> = local_grads.iter().map(|g| dot(g, v)).collect();

    let mut tmp = vec![T::zero(); len];
    let mut hf = vec![vec![T::zero(); count]; count];
    let mut tv = vec![vec![T::zero(); count]; count];
    for (m2, e2) in basis.iter().enumerate() {
        spec.hessian_vec_into(Scope::Global, p, e2, &mut tmp);
        for (m1, e1) in basis.iter().enumerate() {
            hf[m1][m2] = dot(e1, &tmp);
        }
        spec.third_derivative_into(Scope::Global, p, e2, v, &mut tmp);
        for (m1, e1) in basis.iter().enumerate() {
            tv[m1][m2] = dot(e1, &tmp);
        }
    }
    spec.hessian_vec_into(Scope::Global, p, v, &mut tmp);
    let e_hv: Vec<T> = basis.iter().map(|e| dot(e, &tmp)).collect();
    // e_hlv[m][i] = e_m . Hess(psi_i) V
    let mut e_hlv = vec![vec![T::zero(); agents]; count];
    #[allow(clippy::needless_range_loop)]
    for i in 0..agents {
        spec.hessian_vec_into(Scope::Local(i), p, v, &mut tmp);
        for (m, e) in basis.iter().enumerate() {
            e_hlv[m][i] = dot(e, &tmp);
        }
    }

    let mut f = vec![vec![T::zero(); count]; count];
    let mut df = vec![vec![T::zero(); count]; count];
    for (m2, mode2) in modes.iter().enumerate() {
        let (g2, dg2, _) = jets[m2];
        let i2 = mode2.agent;
        for (m1, mode1) in modes.iter().enumerate() {
            let (g1, dg1, ddg1) = jets[m1];
            let i1 = mode1.agent;
            let lie = l[i1][m2];
            let q = dg1 * lie * a[m1] + g1 * hf[m1][m2];
            let dq = (ddg1 * lie * gv[i1] + dg1 * e_hlv[m2][i1]) * a[m1]
                + dg1 * lie * e_hv[m1]
                + dg1 * gv[i1] * hf[m1][m2]
                + g1 * tv[m1][m2];
            f[m2][m1] = g2 * q;
            df[m2][m1] = dg2 * gv[i2] * q + g2 * dq;
        }
    }
    (f, df)
}

/// `X_m psi` for every mode, using the exact gradient.
fn first_lie<T: Scalar>(sys: &SystemDef<T>, modes: &[Mode], basis: &[Vec<T>], p: &[T]) -> Vec<T> {
    let locals = psi_locals(&sys.spec, p);
    let grad = grad_psi(&sys.spec, p);
    modes.iter().zip(basis).map(|(m, e)| sys.shape.h(m.channel, locals[m.agent]) * dot(&grad, e)).collect()
}

fn shifted<T: Scalar>(p: &[T], dir: &[T], h: T) -> Vec<T> {
    p.iter().zip(dir).map(|(&x, &d)| x + h * d).collect()
}

fn iterated_fd_at<T: Scalar>(sys: &SystemDef<T>, modes: &[Mode], basis: &[Vec<T>], p: &[T], eps: T) -> Vec<Vec<T>> {
    let two_eps = T::lit(2.0) * eps;
    modes
        .iter()
        .map(|&m2| {
            let x2 = control_field(sys, m2, p);
            let plus = first_lie(sys, modes, basis, &shifted(p, &x2, eps));
            let minus = first_lie(sys, modes, basis, &shifted(p, &x2, -eps));
            plus.iter().zip(&minus).map(|(&a, &b)| (a - b) / two_eps).collect()
        })
        .collect()
}

fn iterated_fd<T: Scalar>(
    sys: &SystemDef<T>,
    modes: &[Mode],
    basis: &[Vec<T>],
    p: &[T],
    v: &[T],
    eps: T,
) -> (Vec<Vec<T>>, Vec<Vec<T>>) {
    let f = iterated_fd_at(sys, modes, basis, p, eps);
    let plus = iterated_fd_at(sys, modes, basis, &shifted(p, v, eps), eps);
    let minus = iterated_fd_at(sys, modes, basis, &shifted(p, v, -eps), eps);
    let two_eps = T::lit(2.0) * eps;
    let df =
        plus.iter().zip(&minus).map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| (x - y) / two_eps).collect()).collect();
    (f, df)
}

pub(crate) fn terms_at<T: Scalar>(sys: &SystemDef<T>, method: LieMethod, t: T, p: &[T]) -> Terms<T> {
    let modes = sys.schedule.modes();
    let basis: Vec<Vec<T>> = modes.iter().map(|&m| embedded(sys, m)).collect();
    let locals = psi_locals(&sys.spec, p);
    let grad = grad_psi(&sys.spec, p);
    let v = closed_loop_rhs(sys, t, p);
    let (f, df) = match method {
        LieMethod::ClosedForm => iterated_closed_form(sys, &modes, &basis, p, &v, &locals, &grad),
        LieMethod::FiniteDifference { eps } => iterated_fd(sys, &modes, &basis, p, &v, T::lit(eps)),
    };

    let mut d1 = T::zero();
    for (m, e) in modes.iter().zip(&basis) {
        let x_psi = sys.shape.h(m.channel, locals[m.agent]) * dot(&grad, e);
        d1 -= uv_tilde(&sys.schedule, *m, t) * x_psi;
    }
    let mut d2 = T::zero();
    let mut sum_v_f = T::zero();
    for (m2, &mode2) in modes.iter().enumerate() {
        for (m1, &mode1) in modes.iter().enumerate() {
            let uv = uv_tilde2(&sys.schedule, mode2, mode1, t);
            d1 -= uv * f[m2][m1];
            d2 += uv * df[m2][m1];
            let vc = v_coeff(mode2, mode1);
            if vc != 0.0 {
                sum_v_f += T::lit(vc) * f[m2][m1];
            }
        }
    }
    Terms { y_psi: y_psi(sys, &locals, &grad), d1, d2, sum_v_f }
}

/// Cumulative integral on a uniform grid, third order per panel.
pub(crate) fn cumulative_simpson(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * h * (f[0] + f[1]);
        return out;
    }
    for j in 1..n {
        out[j] = if j % 2 == 0 {
            out[j - 2] + h / 3.0 * (f[j - 2] + 4.0 * f[j - 1] + f[j])
        } else if j + 1 < n {
            out[j - 1] + h / 12.0 * (5.0 * f[j - 1] + 8.0 * f[j] - f[j + 1])
        } else {
            out[j - 1] + h / 12.0 * (-f[j - 2] + 8.0 * f[j - 1] + 5.0 * f[j])
        };
    }
    out
}

/// Dense states between the recorded samples, re-integrated with `refinement` substeps.
fn refined_states<T: Scalar>(sys: &SystemDef<T>, traj: &Trajectory<T>, refinement: usize) -> Result<Vec<Vec<T>>> {
    if refinement == 1 {
        return Ok(traj.states.clone());
    }
    let field = sys.field(Law::Dither);
    let h = traj.dt / T::from_usize_exact(refinement);
    let mut out = Vec::with_capacity((traj.len() - 1) * refinement + 1);
    out.push(traj.states[0].clone());
    for j in 0..traj.len() - 1 {
        let t = traj.time(j);
        let piece = integrate(&field, &traj.states[j], t, t + traj.dt, h, IntegrateOptions::default())?;
        out.extend(piece.states.into_iter().skip(1));
    }
    Ok(out)
}

/// Checks the averaging decomposition along a recorded closed-loop trajectory.
pub fn averaging_residual<T: Scalar>(
    sys: &SystemDef<T>,
    traj: &Trajectory<T>,
    opts: &ResidualOptions,
) -> Result<ResidualReport> {
    if !traj.meta.law.is_empty() && traj.meta.law != Law::Dither.as_str() {
        return Err(Error::InvalidArgument(format!(
            "averaging residual needs a dither trajectory, got law `{}`",
            traj.meta.law
        )));
    }
    if traj.len() < 2 {
        return Err(Error::InvalidArgument("trajectory needs at least two samples".into()));
    }
    if opts.refinement == 0 {
        return Err(Error::InvalidArgument("refinement must be at least 1".into()));
    }
    if traj.states[0].len() != sys.state_len() {
        return Err(Error::Dimension(format!(
            "trajectory states have {} entries, system expects {}",
            traj.states[0].len(),
            sys.state_len()
        )));
    }
    let h = traj.dt / T::from_usize_exact(opts.refinement);
    let limit = sys.step_limit();
    if h > limit {
        return Err(Error::StepTooLarge { dt: h.as_f64(), limit: limit.as_f64() });
    }
    if let LieMethod::FiniteDifference { eps } = opts.method {
        if !(eps > 0.0) {
            return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {eps}")));
        }
    }

    let states = refined_states(sys, traj, opts.refinement)?;
    let times: Vec<T> = (0..states.len()).map(|j| traj.t0 + h * T::from_usize_exact(j)).collect();
    let terms: Vec<Terms<T>> = times.iter().zip(&states).map(|(&t, p)| terms_at(sys, opts.method, t, p)).collect();
    let psi: Vec<f64> = states.iter().map(|p| psi_global(&sys.spec, p).as_f64()).collect();

    let hf = h.as_f64();
    let y: Vec<f64> = terms.iter().map(|x| x.y_psi.as_f64()).collect();
    let d1: Vec<f64> = terms.iter().map(|x| x.d1.as_f64()).collect();
    let d2: Vec<f64> = terms.iter().map(|x| x.d2.as_f64()).collect();
    let int_y = cumulative_simpson(&y, hf);
    let int_d2 = cumulative_simpson(&d2, hf);
    let residuals: Vec<f64> =
        (0..psi.len()).map(|j| psi[j] - (psi[0] + int_y[j] - d1[0] + d1[j] + int_d2[j])).collect();

    let max_abs = |xs: &[f64]| xs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let fit = |xs: &[f64], power: f64| {
        xs.iter()
            .zip(&psi)
            .filter(|(_, &s)| s > opts.psi_floor)
            .fold(0.0f64, |a, (&x, &s)| a.max(x.abs() / s.powf(power)))
    };
    let max_residual = max_abs(&residuals);
    let psi0 = psi[0];
    Ok(ResidualReport {
        t0: traj.t0.as_f64(),
        t1: times.last().copied().unwrap_or(traj.t0).as_f64(),
        psi0,
        points: states.len(),
        method: opts.method,
        max_residual,
        relative_residual: if psi0 > 0.0 { max_residual / psi0 } else { f64::INFINITY },
        max_abs_d1: max_abs(&d1),
        max_abs_d2: max_abs(&d2),
        max_abs_y_psi: max_abs(&y),
        bracket_consistency: terms.iter().fold(0.0f64, |a, x| a.max((x.y_psi - x.sum_v_f).abs().as_f64())),
        c1_fit: fit(&d1, 1.5),
        c2_fit: fit(&d2, 2.5),
        times: times.iter().map(|t| t.as_f64()).collect(),
        residuals,
    })
}
