//! Output-only extremum seeking for a single control-affine system
//! `p' = sum_k u_k B_k(p)` with a nonnegative measured output `psi`.
//!
//! The control law sees nothing but the scalar `psi(p)`:
//! `u_k = sqrt(w_k) cos(w_k t + phi_k) h1(psi(p)) + sqrt(w_k) sin(w_k t + phi_k) h2(psi(p))`.
//!
//! Callbacks must be deterministic and free of side effects (other than
//! instrumentation); they may be called from several threads.

use std::sync::Arc;

use crate::dither::{Channel, DitherShape, SinusoidSchedule};
use crate::dynamics::{bound_fit, BoundFit, Outputs, SystemDef, Trajectory, VectorField, BOUND_FLOOR};
use crate::error::{Error, Result};
use crate::potential::{psi_local, FormationSpec};
use crate::scalar::{axpy, dot, Scalar};

pub type FieldFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;

/// A measured scalar output.
pub trait Output<T>: Send + Sync {
    fn value(&self, p: &[T]) -> T;

    /// Not used by the control law; present so tests can prove it is never called.
    fn gradient(&self, _p: &[T]) -> Option<Vec<T>> {
        None
    }
}

struct FnOutput<F>(F);

impl<T, F: Fn(&[T]) -> T + Send + Sync> Output<T> for FnOutput<F> {
    fn value(&self, p: &[T]) -> T {
        (self.0)(p)
    }
}

/// `p' = sum_k u_k B_k(p)` in `R^n` with output `psi`.
#[derive(Clone)]
pub struct ControlAffineSystem<T> {
    state_dim: usize,
    fields: Vec<FieldFn<T>>,
    output: Arc<dyn Output<T>>,
}

impl<T> std::fmt::Debug for ControlAffineSystem<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ControlAffineSystem")
            .field("state_dim", &self.state_dim)
            .field("fields", &self.fields.len())
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> ControlAffineSystem<T> {
    pub fn new(state_dim: usize, fields: Vec<FieldFn<T>>, output: Arc<dyn Output<T>>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::InvalidArgument("at least one control field is required".into()));
        }
        if state_dim == 0 {
            return Err(Error::InvalidArgument("state dimension must be positive".into()));
        }
        Ok(ControlAffineSystem { state_dim, fields, output })
    }

    pub fn with_output_fn(
        state_dim: usize,
        fields: Vec<FieldFn<T>>,
        output: impl Fn(&[T]) -> T + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(state_dim, fields, Arc::new(FnOutput(output)))
    }

    /// Constant fields `B_k = e_k`, one per coordinate listed in `axes`.
    pub fn coordinate_fields(state_dim: usize, axes: &[usize]) -> Vec<FieldFn<T>> {
        axes.iter()
            .map(|&k| {
                let f: FieldFn<T> = Arc::new(move |_p: &[T]| {
                    let mut e = vec![T::zero(); state_dim];
                    e[k] = T::one();
                    e
                });
                f
            })
            .collect()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn field(&self, k: usize, p: &[T]) -> Vec<T> {
        (self.fields[k])(p)
    }

    /// Measured output; panics if it is negative, which breaks the model contract.
    pub fn output(&self, p: &[T]) -> T {
        let y = self.output.value(p);
        assert!(!(y < T::zero()), "output must be nonnegative, got {y}");
        y
    }
}

/// Extremum-seeking problem: plant, dither pair and sinusoid table (one slot per field).
#[derive(Debug, Clone)]
pub struct EscProblem<T> {
    pub system: ControlAffineSystem<T>,
    pub shape: DitherShape<T>,
    pub schedule: SinusoidSchedule<T>,
}

impl<T: Scalar> EscProblem<T> {
    /// Frequencies must be pairwise distinct, one per control field.
    pub fn new(
        system: ControlAffineSystem<T>,
        shape: DitherShape<T>,
        frequencies: Vec<T>,
        phases: Vec<T>,
    ) -> Result<Self> {
        let mu = system.num_fields();
        let schedule = SinusoidSchedule::explicit(1, mu, frequencies, phases)?;
        Ok(EscProblem { system, shape, schedule })
    }
}

/// ESC velocity at `(t, p)`, from the single scalar `psi(p)`.
pub fn esc_rhs_into<T: Scalar>(
    sys: &ControlAffineSystem<T>,
    shape: &DitherShape<T>,
    schedule: &SinusoidSchedule<T>,
    t: T,
    p: &[T],
    out: &mut [T],
) {
    out.iter_mut().for_each(|x| *x = T::zero());
    let y = sys.output(p);
    let (h1, h2) = (shape.h(Channel::Cos, y), shape.h(Channel::Sin, y));
    if h1 == T::zero() && h2 == T::zero() {
        return;
    }
    for k in 0..sys.num_fields() {
        let w = schedule.frequency(0, k);
        let arg = w * t + schedule.phase(0, k);
        let u = w.sqrt() * (arg.cos() * h1 + arg.sin() * h2);
        axpy(u, &sys.field(k, p), out);
    }
}

pub fn esc_rhs<T: Scalar>(
    sys: &ControlAffineSystem<T>,
    shape: &DitherShape<T>,
    schedule: &SinusoidSchedule<T>,
    t: T,
    p: &[T],
) -> Vec<T> {
    let mut out = vec![T::zero(); p.len()];
    esc_rhs_into(sys, shape, schedule, t, p, &mut out);
    out
}

impl<T: Scalar> VectorField<T> for EscProblem<T> {
    fn dim(&self) -> usize {
        self.system.state_dim()
    }

    fn eval(&self, t: T, p: &[T], out: &mut [T]) {
        esc_rhs_into(&self.system, &self.shape, &self.schedule, t, p, out)
    }

    fn max_frequency(&self) -> Option<T> {
        Some(self.schedule.max_frequency())
    }

    fn outputs(&self, p: &[T]) -> Outputs<T> {
        // one loop is one agent
        let y = self.system.output(p);
        Outputs { total: y, local: vec![y] }
    }
}

/// Several ESC loops acting on one shared state; velocities add up.
#[derive(Debug, Clone)]
pub struct EscEnsemble<T> {
    pub members: Vec<EscProblem<T>>,
}

impl<T: Scalar> VectorField<T> for EscEnsemble<T> {
    fn dim(&self) -> usize {
        self.members[0].dim()
    }

    fn eval(&self, t: T, p: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|x| *x = T::zero());
        let mut tmp = vec![T::zero(); p.len()];
        for m in &self.members {
            m.eval(t, p, &mut tmp);
            axpy(T::one(), &tmp, out);
        }
    }

    fn max_frequency(&self) -> Option<T> {
        self.members.iter().filter_map(|m| m.max_frequency()).reduce(T::max)
    }

    fn outputs(&self, p: &[T]) -> Outputs<T> {
        let local: Vec<T> = self.members.iter().map(|m| m.system.output(p)).collect();
        Outputs { total: local.iter().copied().sum(), local }
    }
}

/// The formation closed loop as one ESC loop per agent: agent `i` acts on its
/// own block through `b_{i,k}` and measures only `psi_i`.
pub fn formation_as_ensemble<T: Scalar>(sys: &SystemDef<T>) -> Result<EscEnsemble<T>> {
    let n = sys.spec.dim();
    let len = sys.state_len();
    let spec: Arc<FormationSpec<T>> = Arc::new(sys.spec.clone());
    let mut members = Vec::with_capacity(sys.spec.num_agents());
    for i in 0..sys.spec.num_agents() {
        let fields = (0..n)
            .map(|k| {
                let b = sys.frames.vector(i, k).to_vec();
                let f: FieldFn<T> = Arc::new(move |_p: &[T]| {
                    let mut e = vec![T::zero(); len];
                    e[i * n..(i + 1) * n].copy_from_slice(&b);
                    e
                });
                f
            })
            .collect();
        let spec = Arc::clone(&spec);
        let plant = ControlAffineSystem::with_output_fn(len, fields, move |p: &[T]| psi_local(&spec, i, p))?;
        let freqs = (0..n).map(|k| sys.schedule.frequency(i, k)).collect();
        let phases = (0..n).map(|k| sys.schedule.phase(i, k)).collect();
        members.push(EscProblem::new(plant, sys.shape.clone(), freqs, phases)?);
    }
    Ok(EscEnsemble { members })
}

/// Envelope fit of the recorded output, same rule as for formations.
pub fn esc_bound_check<T: Scalar>(traj: &Trajectory<T>) -> BoundFit {
    bound_fit(traj, BOUND_FLOOR)
}

fn directional<T: Scalar>(f: &dyn Fn(&[T]) -> Vec<T>, p: &[T], dir: &[T], eps: T) -> Vec<T> {
    let plus: Vec<T> = p.iter().zip(dir).map(|(&x, &d)| x + eps * d).collect();
    let minus: Vec<T> = p.iter().zip(dir).map(|(&x, &d)| x - eps * d).collect();
    f(&plus).iter().zip(f(&minus)).map(|(&a, b)| (a - b) / (T::lit(2.0) * eps)).collect()
}

/// `X_(k,nu)(p) = h_nu(psi(p)) B_k(p)`.
pub fn control_vector_field<T: Scalar>(problem: &EscProblem<T>, k: usize, channel: Channel, p: &[T]) -> Vec<T> {
    let g = problem.shape.h(channel, problem.system.output(p));
    problem.system.field(k, p).into_iter().map(|b| g * b).collect()
}

/// `[X_(k,1), X_(k,2)] = DX_(k,2) X_(k,1) - DX_(k,1) X_(k,2)` by central differences.
pub fn bracket_fd<T: Scalar>(problem: &EscProblem<T>, k: usize, p: &[T], eps: T) -> Vec<T> {
    let x1 = |q: &[T]| control_vector_field(problem, k, Channel::Cos, q);
    let x2 = |q: &[T]| control_vector_field(problem, k, Channel::Sin, q);
    let a = directional(&x2, p, &x1(p), eps);
    let b = directional(&x1, p, &x2(p), eps);
    a.iter().zip(&b).map(|(&u, &v)| u - v).collect()
}

/// Averaged field `1/2 sum_k [h1,h2](psi) (B_k psi) B_k`, with `B_k psi` by central differences of the output.
pub fn averaged_field<T: Scalar>(problem: &EscProblem<T>, p: &[T], eps: T) -> Vec<T> {
    let sys = &problem.system;
    let coef = T::lit(0.5) * problem.shape.bracket(sys.output(p));
    let mut out = vec![T::zero(); p.len()];
    let out_fn = |q: &[T]| vec![sys.output(q)];
    for k in 0..sys.num_fields() {
        let b = sys.field(k, p);
        let lie = directional(&out_fn, p, &b, eps)[0];
        axpy(coef * lie, &b, &mut out);
    }
    out
}

/// Half-sum of the bracket pairs, the same averaged field computed from the control fields.
pub fn averaged_field_from_brackets<T: Scalar>(problem: &EscProblem<T>, p: &[T], eps: T) -> Vec<T> {
    let mut out = vec![T::zero(); p.len()];
    for k in 0..problem.system.num_fields() {
        axpy(T::lit(0.5), &bracket_fd(problem, k, p, eps), &mut out);
    }
    out
}

/// Built-in demo outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoOutput {
    /// `1/2 |p|^2`.
    Quadratic,
    /// `1/4 |p|^4`; degenerate minimum, slower than the quadratic.
    Quartic,
}

impl std::str::FromStr for DemoOutput {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic" => Ok(DemoOutput::Quadratic),
            "quartic" => Ok(DemoOutput::Quartic),
            other => Err(Error::InvalidArgument(format!("unknown demo output `{other}`"))),
        }
    }
}

pub fn demo_output<T: Scalar>(kind: DemoOutput, p: &[T]) -> T {
    let r2 = dot(p, p);
    match kind {
        DemoOutput::Quadratic => T::lit(0.5) * r2,
        DemoOutput::Quartic => T::lit(0.25) * r2 * r2,
    }
}

/// Single integrator in `R^dim` actuated along the listed coordinate axes.
pub fn demo_problem<T: Scalar>(
    kind: DemoOutput,
    dim: usize,
    axes: &[usize],
    frequencies: Vec<T>,
) -> Result<EscProblem<T>> {
    if let Some(&k) = axes.iter().find(|&&k| k >= dim) {
        return Err(Error::InvalidArgument(format!("axis {k} outside R^{dim}")));
    }
    let fields = ControlAffineSystem::coordinate_fields(dim, axes);
    let plant = ControlAffineSystem::with_output_fn(dim, fields, move |p: &[T]| demo_output(kind, p))?;
    let phases = vec![T::zero(); frequencies.len()];
    EscProblem::new(plant, DitherShape::default(), frequencies, phases)
}

/// Horizon of the built-in demo. Near the minimum the averaged output obeys
/// `psi' ~ -psi^2`, so `|p|` only decays like `t^{-1/2}`.
pub const DEMO_HORIZON: f64 = 50_000.0;

/// Single integrator with coordinate fields, run from a fixed start.
#[derive(Debug, Clone, PartialEq)]
pub struct EscDemo {
    pub output: DemoOutput,
    pub axes: Vec<usize>,
    pub frequencies: Vec<f64>,
    pub p0: Vec<f64>,
    pub t_final: f64,
    /// A 64th of the fastest period when `None`.
    pub dt: Option<f64>,
    pub record_every: usize,
}

impl Default for EscDemo {
    fn default() -> Self {
        EscDemo {
            output: DemoOutput::Quadratic,
            axes: vec![0, 1],
            frequencies: vec![7.0, 14.0],
            p0: vec![1.0, 1.0],
            t_final: DEMO_HORIZON,
            dt: None,
            record_every: 1000,
        }
    }
}

impl EscDemo {
    pub fn problem(&self) -> Result<EscProblem<f64>> {
        demo_problem(self.output, self.p0.len(), &self.axes, self.frequencies.clone())
    }

    pub fn step(&self) -> f64 {
        let w = self.frequencies.iter().copied().fold(0.0, f64::max);
        self.dt.unwrap_or(std::f64::consts::TAU / (crate::dynamics::STEP_RECOMMENDED_DIVISOR * w))
    }

    /// Integrates `problem`, which may wrap the demo output (e.g. to instrument it).
    pub fn run_with(&self, problem: &EscProblem<f64>) -> Result<Trajectory<f64>> {
        let opts = crate::dynamics::IntegrateOptions { record_every: self.record_every, ..Default::default() };
        let mut traj = crate::dynamics::integrate(problem, &self.p0, 0.0, self.t_final, self.step(), opts)?;
        traj.meta.scenario = "esc-demo".into();
        traj.meta.law = "esc".into();
        traj.meta.frequencies = self.frequencies.clone();
        traj.meta.phases = vec![0.0; self.frequencies.len()];
        Ok(traj)
    }

    pub fn run(&self) -> Result<Trajectory<f64>> {
        self.run_with(&self.problem()?)
    }
}
