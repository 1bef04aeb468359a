use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{axpy, Scalar};

/// Dither period divided by this is the largest accepted step.
pub const STEP_LIMIT_DIVISOR: f64 = 32.0;
/// Dither period divided by this is the default step; coarser steps log a warning.
pub const STEP_RECOMMENDED_DIVISOR: f64 = 64.0;
/// Default floor for a fitted decay constant to count as positive.
pub const BOUND_FLOOR: f64 = 1e-6;

/// Scalar observations recorded alongside each state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outputs<T> {
    pub total: T,
    pub local: Vec<T>,
}

/// A time-dependent vector field `x' = f(t, x)`.
pub trait VectorField<T: Scalar> {
    fn dim(&self) -> usize;

    fn eval(&self, t: T, x: &[T], out: &mut [T]);

    /// Fastest excitation frequency, if the field is periodically forced.
    fn max_frequency(&self) -> Option<T> {
        None
    }

    fn outputs(&self, _x: &[T]) -> Outputs<T> {
        Outputs { total: T::zero(), local: Vec::new() }
    }
}

impl<T: Scalar, F: VectorField<T> + ?Sized> VectorField<T> for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, t: T, x: &[T], out: &mut [T]) {
        (**self).eval(t, x, out)
    }
    fn max_frequency(&self) -> Option<T> {
        (**self).max_frequency()
    }
    fn outputs(&self, x: &[T]) -> Outputs<T> {
        (**self).outputs(x)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub scenario: String,
    pub law: String,
    pub seed: u64,
    /// Integrator step; samples are `record_every` steps apart.
    pub step: f64,
    pub record_every: usize,
    pub omega: Option<f64>,
    pub frequencies: Vec<f64>,
    pub phases: Vec<f64>,
}

/// Uniformly sampled solution with the potentials recorded at every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub t0: T,
    /// Spacing between consecutive samples.
    pub dt: T,
    pub states: Vec<Vec<T>>,
    pub psi: Vec<T>,
    pub psi_local: Vec<Vec<T>>,
    pub meta: TrajectoryMeta,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, j: usize) -> T {
        self.t0 + self.dt * T::from_usize_exact(j)
    }

    pub fn times(&self) -> Vec<T> {
        (0..self.len()).map(|j| self.time(j)).collect()
    }

    pub fn final_state(&self) -> &[T] {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn t_final(&self) -> T {
        self.time(self.len() - 1)
    }

    /// Samples `[from, to]` (inclusive indices) as a new trajectory.
    pub fn window(&self, from: usize, to: usize) -> Trajectory<T> {
        let to = to.min(self.len() - 1);
        Trajectory {
            t0: self.time(from),
            dt: self.dt,
            states: self.states[from..=to].to_vec(),
            psi: self.psi[from..=to].to_vec(),
            psi_local: self.psi_local[from..=to].to_vec(),
            meta: self.meta.clone(),
        }
    }

    /// Trajectory resting at `state` for `samples` samples.
    pub fn constant(field: &impl VectorField<T>, state: Vec<T>, t0: T, dt: T, samples: usize) -> Self {
        let out = field.outputs(&state);
        Trajectory {
            t0,
            dt,
            states: vec![state; samples],
            psi: vec![out.total; samples],
            psi_local: vec![out.local; samples],
            meta: TrajectoryMeta::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    /// Keep every `record_every`-th state.
    pub record_every: usize,
    /// Refuse steps above a 32nd of the fastest forcing period.
    pub enforce_step_limit: bool,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions { record_every: 1, enforce_step_limit: true }
    }
}

fn rk4_step<T: Scalar, F: VectorField<T>>(field: &F, t: T, dt: T, x: &mut [T], k: &mut [Vec<T>; 4], tmp: &mut [T]) {
    let half = T::lit(0.5) * dt;
    field.eval(t, x, &mut k[0]);
    tmp.copy_from_slice(x);
    axpy(half, &k[0], tmp);
    field.eval(t + half, tmp, &mut k[1]);
    tmp.copy_from_slice(x);
    axpy(half, &k[1], tmp);
    field.eval(t + half, tmp, &mut k[2]);
    tmp.copy_from_slice(x);
    axpy(dt, &k[2], tmp);
    field.eval(t + dt, tmp, &mut k[3]);
    let sixth = dt / T::lit(6.0);
    let two = T::lit(2.0);
    for (j, xj) in x.iter_mut().enumerate() {
        *xj += sixth * (k[0][j] + two * k[1][j] + two * k[2][j] + k[3][j]);
    }
}

/// Classical fixed-step fourth-order Runge-Kutta on `[t0, t_final]`.
///
/// The horizon is covered by `round((t_final - t0) / dt)` steps of exactly `dt`. When
/// `record_every` does not divide that count, the count is rounded up to a multiple of it
/// and the step shrinks to match, so the final state is always recorded.
pub fn integrate<T: Scalar, F: VectorField<T>>(
    field: &F,
    x0: &[T],
    t0: T,
    t_final: T,
    dt: T,
    opts: IntegrateOptions,
) -> Result<Trajectory<T>> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("step must be positive, got {dt}")));
    }
    if x0.len() != field.dim() {
        return Err(Error::Dimension(format!("initial state has {} entries, field expects {}", x0.len(), field.dim())));
    }
    if !(t_final >= t0) {
        return Err(Error::InvalidArgument("final time precedes initial time".into()));
    }
    if let Some(w) = field.max_frequency() {
        let period = T::TAU() / w;
        let limit = period / T::lit(STEP_LIMIT_DIVISOR);
        if opts.enforce_step_limit && dt > limit {
            return Err(Error::StepTooLarge { dt: dt.as_f64(), limit: limit.as_f64() });
        }
        if dt > period / T::lit(STEP_RECOMMENDED_DIVISOR) {
            log::warn!("step {dt} is coarser than 1/64 of the fastest dither period {period}");
        }
    }
    let stride = opts.record_every.max(1);
    let mut steps = ((t_final - t0) / dt).round().to_usize().unwrap_or(0);
    let mut dt = dt;
    if !steps.is_multiple_of(stride) {
        // refine slightly so the last step is recorded
        steps = steps.div_ceil(stride) * stride;
        dt = (t_final - t0) / T::from_usize_exact(steps);
        log::debug!("step refined to {dt} so that {stride} divides the step count");
    }

    let mut x = x0.to_vec();
    let mut k =
        [vec![T::zero(); x.len()], vec![T::zero(); x.len()], vec![T::zero(); x.len()], vec![T::zero(); x.len()]];
    let mut tmp = vec![T::zero(); x.len()];

    let capacity = steps / stride + 1;
    let mut states = Vec::with_capacity(capacity);
    let mut psi = Vec::with_capacity(capacity);
    let mut psi_local = Vec::with_capacity(capacity);
    let mut record = |x: &[T]| {
        let out = field.outputs(x);
        states.push(x.to_vec());
        psi.push(out.total);
        psi_local.push(out.local);
    };
    record(&x);
    let mut last_finite = x.clone();
    for step in 0..steps {
        let t = t0 + dt * T::from_usize_exact(step);
        rk4_step(field, t, dt, &mut x, &mut k, &mut tmp);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: step + 1,
                t: (t + dt).as_f64(),
                last_finite: last_finite.iter().map(|v| v.as_f64()).collect(),
            });
        }
        last_finite.copy_from_slice(&x);
        if (step + 1) % stride == 0 {
            record(&x);
        }
    }
    Ok(Trajectory {
        t0,
        dt: dt * T::from_usize_exact(stride),
        states,
        psi,
        psi_local,
        meta: TrajectoryMeta { step: dt.as_f64(), record_every: stride, ..TrajectoryMeta::default() },
    })
}

/// Fitted constant of the envelope `psi(t) <= 2 psi0 / (1 + c psi0 (t - t0))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundFit {
    pub psi0: f64,
    /// Largest constant consistent with every sample; `+inf` when no sample constrains it.
    pub c_hat: f64,
    pub floor: f64,
    pub holds: bool,
}

/// Largest `c >= 0` for which the `1/t` envelope holds at every recorded sample.
pub fn bound_fit<T: Scalar>(traj: &Trajectory<T>, floor: f64) -> BoundFit {
    let psi0 = traj.psi[0].as_f64();
    let t0 = traj.t0.as_f64();
    let mut c_hat = f64::INFINITY;
    for j in 1..traj.len() {
        let psi = traj.psi[j].as_f64();
        if psi <= 0.0 {
            continue;
        }
        let elapsed = traj.time(j).as_f64() - t0;
        // psi <= 2 psi0 / (1 + c psi0 dt)  <=>  c <= (2 psi0 / psi - 1) / (psi0 dt)
        let c = if psi0 > 0.0 { (2.0 * psi0 / psi - 1.0) / (psi0 * elapsed) } else { f64::NEG_INFINITY };
        c_hat = c_hat.min(c);
    }
    let c_hat = c_hat.max(0.0);
    BoundFit { psi0, c_hat, floor, holds: c_hat > floor }
}
