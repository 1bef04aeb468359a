//! Dither functions `h1, h2`, sinusoidal excitations and the averaging
//! bookkeeping (`eta` coefficients, `UV~` antiderivatives, `v` table).

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Amplitude `A` of the log-phase dither pair `h1 = A sin(log y)`, `h2 = A cos(log y)`.
#[derive(Clone)]
pub enum Amplitude<T> {
    Tanh,
    /// `y / (1 + y)`.
    Rational,
    /// `y^k`; admissible only for `k = 1` near zero, kept for negative tests.
    Power(T),
    /// User supplied; derivatives by central differences.
    Custom(ScalarFn<T>),
}

impl<T: Scalar> Amplitude<T> {
    /// `(A, A', A'')` at `y >= 0`.
    pub fn eval(&self, y: T) -> (T, T, T) {
        let one = T::one();
        let two = T::lit(2.0);
        match self {
            Amplitude::Tanh => {
                let a = y.tanh();
                let d = one - a * a;
                (a, d, -two * a * d)
            }
            Amplitude::Rational => {
                let q = one + y;
                (y / q, one / (q * q), -two / (q * q * q))
            }
            Amplitude::Power(k) => {
                let k = *k;
                (y.powf(k), k * y.powf(k - one), k * (k - one) * y.powf(k - two))
            }
            Amplitude::Custom(f) => {
                let (d1, d2) = central_derivatives(&**f, y);
                (f(y), d1, d2)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Amplitude::Tanh => "tanh",
            Amplitude::Rational => "rational",
            Amplitude::Power(_) => "power",
            Amplitude::Custom(_) => "custom",
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for Amplitude<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Amplitude::Tanh => f.write_str("Tanh"),
            Amplitude::Rational => f.write_str("Rational"),
            Amplitude::Power(k) => f.debug_tuple("Power").field(k).finish(),
            Amplitude::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for DitherShape<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DitherShape::LogPhase(a) => f.debug_tuple("LogPhase").field(a).finish(),
            DitherShape::Custom { .. } => f.write_str("Custom { .. }"),
        }
    }
}

/// First and second central differences with a step proportional to `y`.
///
/// The log-phase shapes oscillate on the scale of `y` itself, so a relative
/// step resolves them all the way down to the grid floor.
fn central_derivatives<T: Scalar>(f: &dyn Fn(T) -> T, y: T) -> (T, T) {
    let two = T::lit(2.0);
    let h1 = y.abs().max(T::epsilon()) * T::lit(1e-5);
    let h2 = y.abs().max(T::epsilon()) * T::lit(1e-3);
    let d1 = (f(y + h1) - f(y - h1)) / (two * h1);
    let d2 = (f(y + h2) - two * f(y) + f(y - h2)) / (h2 * h2);
    (d1, d2)
}

/// Which of the two dither functions (and sinusoid) a mode uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    /// `h1`, driven by `sqrt(w) cos(w t + phi)`.
    Cos,
    /// `h2`, driven by `sqrt(w) sin(w t + phi)`.
    Sin,
}

impl Channel {
    pub const BOTH: [Channel; 2] = [Channel::Cos, Channel::Sin];
}

/// The pair `(h1, h2)`, zero on `y <= 0`.
#[derive(Clone)]
pub enum DitherShape<T> {
    /// `h1 = A sin(log y)`, `h2 = A cos(log y)` for `y > 0`.
    LogPhase(Amplitude<T>),
    /// Arbitrary pair evaluated only for `y > 0`; derivatives by central differences.
    Custom { h1: ScalarFn<T>, h2: ScalarFn<T> },
}

impl<T: Scalar> Default for DitherShape<T> {
    fn default() -> Self {
        DitherShape::LogPhase(Amplitude::Tanh)
    }
}

impl<T: Scalar> DitherShape<T> {
    pub fn custom(h1: impl Fn(T) -> T + Send + Sync + 'static, h2: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        DitherShape::Custom { h1: Arc::new(h1), h2: Arc::new(h2) }
    }

    /// `h_nu(y)`.
    pub fn h(&self, channel: Channel, y: T) -> T {
        if !(y > T::zero()) {
            return T::zero();
        }
        match self {
            DitherShape::LogPhase(amp) => {
                let (a, _, _) = amp.eval(y);
                let l = y.ln();
                match channel {
                    Channel::Cos => a * l.sin(),
                    Channel::Sin => a * l.cos(),
                }
            }
            DitherShape::Custom { h1, h2 } => match channel {
                Channel::Cos => h1(y),
                Channel::Sin => h2(y),
            },
        }
    }

    /// `(h_nu, h_nu', h_nu'')`; all zero for `y <= 0`.
    pub fn h_derivatives(&self, channel: Channel, y: T) -> (T, T, T) {
        if !(y > T::zero()) {
            return (T::zero(), T::zero(), T::zero());
        }
        match self {
            DitherShape::LogPhase(amp) => {
                let (a, da, dda) = amp.eval(y);
                let l = y.ln();
                let (s, c) = (l.sin(), l.cos());
                let two = T::lit(2.0);
                let y2 = y * y;
                match channel {
                    Channel::Cos => (a * s, da * s + a * c / y, dda * s + two * da * c / y - a * (s + c) / y2),
                    Channel::Sin => (a * c, da * c - a * s / y, dda * c - two * da * s / y + a * (s - c) / y2),
                }
            }
            DitherShape::Custom { .. } => {
                let f = |x: T| self.h(channel, x);
                let (d1, d2) = central_derivatives(&f, y);
                (f(y), d1, d2)
            }
        }
    }

    /// `[h1, h2](y) = h2'(y) h1(y) - h1'(y) h2(y)` for `y > 0`, zero otherwise.
    pub fn bracket(&self, y: T) -> T {
        if !(y > T::zero()) {
            return T::zero();
        }
        match self {
            DitherShape::LogPhase(amp) => {
                let (a, _, _) = amp.eval(y);
                -a * a / y
            }
            DitherShape::Custom { .. } => {
                let (h1, d1, _) = self.h_derivatives(Channel::Cos, y);
                let (h2, d2, _) = self.h_derivatives(Channel::Sin, y);
                d2 * h1 - d1 * h2
            }
        }
    }

    /// `max(|h1|, |h2|)` can never exceed this (used for velocity bounds); `None` if unknown.
    pub fn sup_bound(&self) -> Option<T> {
        match self {
            DitherShape::LogPhase(Amplitude::Tanh | Amplitude::Rational) => Some(T::one()),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            DitherShape::LogPhase(a) => format!("log-phase/{}", a.name()),
            DitherShape::Custom { .. } => "custom".into(),
        }
    }
}

pub fn h_eval<T: Scalar>(shape: &DitherShape<T>, channel: Channel, y: T) -> T {
    shape.h(channel, y)
}

pub fn h_bracket<T: Scalar>(shape: &DitherShape<T>, y: T) -> T {
    shape.bracket(y)
}

/// Sampling grid for the admissibility checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub y_min: f64,
    pub y_max: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { y_min: 1e-9, y_max: 10.0, points: 400 }
    }
}

impl GridSpec {
    pub fn geometric(&self) -> Vec<f64> {
        let (lo, hi) = (self.y_min.ln(), self.y_max.ln());
        let n = self.points.max(2);
        (0..n).map(|j| (lo + (hi - lo) * j as f64 / (n - 1) as f64).exp()).collect()
    }
}

/// Outcome of one admissibility property on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub passed: bool,
    /// Extremal value that decided the check (sup or inf, depending on the property).
    pub witness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub shape: String,
    pub grid: GridSpec,
    /// Vanishing on `y <= 0`.
    pub p1_zero_on_nonpositive: PropertyCheck,
    /// Bounded, finite derivatives.
    pub p2_bounded: PropertyCheck,
    /// `h(y) / y` bounded as `y -> 0+`.
    pub p3_ratio_bounded: PropertyCheck,
    /// `h'(y)` bounded as `y -> 0+`.
    pub p4_derivative_bounded: PropertyCheck,
    /// `h''(y) y` bounded as `y -> 0+`.
    pub p5_curvature_bounded: PropertyCheck,
    /// `[h1,h2](y) <= -c y` on `(0, r]`; witness is `c`.
    pub p6_bracket_negative: PropertyCheck,
    /// Largest grid point with a negative bracket on the whole prefix, if any.
    pub p6_r: Option<f64>,
    /// Set when the estimated `c` is below `1e-6`; reported, not failed.
    pub p6_c_degraded: bool,
    pub all_passed: bool,
}

/// Lower window `[y_min, 1e3 y_min]` against reference `[1e3 y_min, 1e6 y_min]`.
fn windows(grid: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let y0 = grid[0];
    let low = (0..grid.len()).filter(|&j| grid[j] <= 1e3 * y0).collect();
    let reference = (0..grid.len()).filter(|&j| grid[j] > 1e3 * y0 && grid[j] <= 1e6 * y0).collect();
    (low, reference)
}

const GROWTH_FACTOR: f64 = 10.0;

/// Grid test for "`f` stays bounded as `y -> 0+`": the sup over the lowest three
/// decades may not exceed ten times the sup over the next three.
fn bounded_near_zero(values: &[f64], grid: &[f64]) -> PropertyCheck {
    let (low, reference) = windows(grid);
    let sup = |idx: &[usize]| idx.iter().map(|&j| values[j].abs()).fold(0.0, f64::max);
    let finite = values.iter().all(|v| v.is_finite());
    let (s_low, s_ref) = (sup(&low), sup(&reference));
    PropertyCheck {
        passed: finite && !reference.is_empty() && s_low <= GROWTH_FACTOR * s_ref + f64::MIN_POSITIVE,
        witness: values.iter().map(|v| v.abs()).fold(0.0, f64::max),
    }
}

pub const C_DEGRADED: f64 = 1e-6;

/// Samples properties (i)-(vi) of an admissible dither pair.
pub fn verify_properties<T: Scalar>(shape: &DitherShape<T>, grid_spec: &GridSpec) -> PropertyReport {
    let grid = grid_spec.geometric();
    let at = |j: usize| T::lit(grid[j]);

    // (i)
    let mut worst_neg = 0.0f64;
    for &y in grid.iter().chain([0.0].iter()) {
        for ch in Channel::BOTH {
            worst_neg = worst_neg.max(shape.h(ch, T::lit(-y)).as_f64().abs());
        }
    }
    let p1 = PropertyCheck { passed: worst_neg == 0.0, witness: worst_neg };

    let mut p2 = PropertyCheck { passed: true, witness: 0.0 };
    let mut p3 = PropertyCheck { passed: true, witness: 0.0 };
    let mut p4 = PropertyCheck { passed: true, witness: 0.0 };
    let mut p5 = PropertyCheck { passed: true, witness: 0.0 };
    let tail: Vec<f64> = (1..=60).map(|j| grid_spec.y_max * 10f64.powf(j as f64 / 10.0)).collect();
    for ch in Channel::BOTH {
        let derivs: Vec<(f64, f64, f64)> = (0..grid.len())
            .map(|j| {
                let (h, d, dd) = shape.h_derivatives(ch, at(j));
                (h.as_f64(), d.as_f64(), dd.as_f64())
            })
            .collect();
        let sup_main = derivs.iter().map(|d| d.0.abs()).fold(0.0, f64::max);
        let sup_tail = tail.iter().map(|&y| shape.h(ch, T::lit(y)).as_f64().abs()).fold(0.0, f64::max);
        let finite =
            derivs.iter().all(|(a, b, c)| a.is_finite() && b.is_finite() && c.is_finite()) && sup_tail.is_finite();
        let bounded = finite && sup_tail <= GROWTH_FACTOR * sup_main.max(f64::MIN_POSITIVE);
        p2 = merge(p2, PropertyCheck { passed: bounded, witness: sup_main.max(sup_tail) });

        let ratio: Vec<f64> = derivs.iter().zip(&grid).map(|(d, y)| d.0 / y).collect();
        p3 = merge(p3, bounded_near_zero(&ratio, &grid));
        let first: Vec<f64> = derivs.iter().map(|d| d.1).collect();
        p4 = merge(p4, bounded_near_zero(&first, &grid));
        let curv: Vec<f64> = derivs.iter().zip(&grid).map(|(d, y)| d.2 * y).collect();
        p5 = merge(p5, bounded_near_zero(&curv, &grid));
    }

    // (vi): q(y) = -[h1,h2](y) / y must be positive on a prefix and stay away from zero
    let q: Vec<f64> = (0..grid.len()).map(|j| -shape.bracket(at(j)).as_f64() / grid[j]).collect();
    let prefix = q.iter().take_while(|&&v| v > 0.0 && v.is_finite()).count();
    let (p6, r, degraded) = if prefix == 0 {
        (PropertyCheck { passed: false, witness: 0.0 }, None, true)
    } else {
        let c = q[..prefix].iter().copied().fold(f64::INFINITY, f64::min);
        let (low, reference) = windows(&grid);
        let inf = |idx: &[usize]| idx.iter().map(|&j| q[j]).fold(f64::INFINITY, f64::min);
        let away_from_zero =
            low.iter().chain(&reference).all(|&j| j < prefix) && inf(&low) >= inf(&reference) / GROWTH_FACTOR;
        (PropertyCheck { passed: away_from_zero, witness: c }, Some(grid[prefix - 1]), c < C_DEGRADED)
    };

    let all = [p1, p2, p3, p4, p5, p6].iter().all(|p| p.passed);
    PropertyReport {
        shape: shape.describe(),
        grid: *grid_spec,
        p1_zero_on_nonpositive: p1,
        p2_bounded: p2,
        p3_ratio_bounded: p3,
        p4_derivative_bounded: p4,
        p5_curvature_bounded: p5,
        p6_bracket_negative: p6,
        p6_r: r,
        p6_c_degraded: degraded,
        all_passed: all,
    }
}

fn merge(a: PropertyCheck, b: PropertyCheck) -> PropertyCheck {
    PropertyCheck { passed: a.passed && b.passed, witness: a.witness.max(b.witness) }
}

/// Index `m = (i, k, nu)` of one sinusoid / control vector field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mode {
    pub agent: usize,
    pub axis: usize,
    pub channel: Channel,
}

impl Mode {
    pub fn new(agent: usize, axis: usize, channel: Channel) -> Self {
        Mode { agent, axis, channel }
    }

    fn same_slot(&self, other: &Mode) -> bool {
        self.agent == other.agent && self.axis == other.axis
    }
}

/// How the per-slot frequencies were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum FrequencyRule {
    /// `w_{i,k} = omega ((i-1) n + k)`.
    Linear {
        omega: f64,
    },
    Explicit,
}

/// Frequencies and phases of the `2 n N` sinusoids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinusoidSchedule<T> {
    num_agents: usize,
    dim: usize,
    rule: FrequencyRule,
    /// Indexed by `agent * dim + axis`.
    frequencies: Vec<T>,
    phases: Vec<T>,
}

impl<T: Scalar> SinusoidSchedule<T> {
    /// `w_{i,k} = omega ((i-1) n + k)` with zero phases.
    pub fn linear(num_agents: usize, dim: usize, omega: T) -> Result<Self> {
        if !(omega > T::zero()) || !omega.is_finite() {
            return Err(Error::InvalidArgument(format!("global frequency must be positive, got {omega}")));
        }
        let slots = num_agents * dim;
        // integer multipliers 1..=slots are distinct, hence so are the frequencies
        let frequencies = (1..=slots).map(|j| omega * T::from_usize_exact(j)).collect();
        Ok(SinusoidSchedule {
            num_agents,
            dim,
            rule: FrequencyRule::Linear { omega: omega.as_f64() },
            frequencies,
            phases: vec![T::zero(); slots],
        })
    }

    /// Explicit table `frequencies[agent * dim + axis]`; must be positive and pairwise distinct.
    pub fn explicit(num_agents: usize, dim: usize, frequencies: Vec<T>, phases: Vec<T>) -> Result<Self> {
        let slots = num_agents * dim;
        if frequencies.len() != slots || phases.len() != slots {
            return Err(Error::Dimension(format!(
                "schedule needs {slots} frequencies and phases, got {} and {}",
                frequencies.len(),
                phases.len()
            )));
        }
        if let Some(w) = frequencies.iter().find(|w| !(**w > T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("frequency {w} is not positive")));
        }
        for a in 0..slots {
            for b in a + 1..slots {
                if frequencies[a] == frequencies[b] {
                    return Err(Error::FrequencyCollision(format!(
                        "slots {a} and {b} share frequency {}",
                        frequencies[a]
                    )));
                }
            }
        }
        Ok(SinusoidSchedule { num_agents, dim, rule: FrequencyRule::Explicit, frequencies, phases })
    }

    pub fn with_phases(mut self, phases: Vec<T>) -> Result<Self> {
        if phases.len() != self.frequencies.len() {
            return Err(Error::Dimension(format!("{} phases for {} slots", phases.len(), self.frequencies.len())));
        }
        self.phases = phases;
        Ok(self)
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rule(&self) -> &FrequencyRule {
        &self.rule
    }

    pub fn frequencies(&self) -> &[T] {
        &self.frequencies
    }

    pub fn phases(&self) -> &[T] {
        &self.phases
    }

    pub fn frequency(&self, agent: usize, axis: usize) -> T {
        self.frequencies[agent * self.dim + axis]
    }

    pub fn phase(&self, agent: usize, axis: usize) -> T {
        self.phases[agent * self.dim + axis]
    }

    pub fn max_frequency(&self) -> T {
        self.frequencies.iter().copied().fold(T::zero(), T::max)
    }

    pub fn min_frequency(&self) -> T {
        self.frequencies.iter().copied().fold(T::infinity(), T::min)
    }

    /// Every mode in `(agent, axis, channel)` order.
    pub fn modes(&self) -> Vec<Mode> {
        let mut out = Vec::with_capacity(2 * self.frequencies.len());
        for agent in 0..self.num_agents {
            for axis in 0..self.dim {
                for channel in Channel::BOTH {
                    out.push(Mode { agent, axis, channel });
                }
            }
        }
        out
    }

    /// The two Fourier terms `(w, eta_{w,m})`, `w = +w_{i,k}, -w_{i,k}`, with `u_m(t) = sum eta e^{i w t}`.
    pub fn eta(&self, m: Mode) -> [(T, Complex<T>); 2] {
        let w = self.frequency(m.agent, m.axis);
        let phi = self.phase(m.agent, m.axis);
        let half = T::lit(0.5) * w.sqrt();
        let plus = Complex::from_polar(half, phi);
        let minus = Complex::from_polar(half, -phi);
        match m.channel {
            Channel::Cos => [(w, plus), (-w, minus)],
            // +-sqrt(w) e^{+-i phi} / (2i)
            Channel::Sin => {
                [(w, plus * Complex::new(T::zero(), -T::one())), (-w, minus * Complex::new(T::zero(), T::one()))]
            }
        }
    }
}

/// `u_m(t)`: `sqrt(w) cos(w t + phi)` or `sqrt(w) sin(w t + phi)`.
pub fn u_eval<T: Scalar>(schedule: &SinusoidSchedule<T>, m: Mode, t: T) -> T {
    let w = schedule.frequency(m.agent, m.axis);
    let arg = w * t + schedule.phase(m.agent, m.axis);
    match m.channel {
        Channel::Cos => w.sqrt() * arg.cos(),
        Channel::Sin => w.sqrt() * arg.sin(),
    }
}

fn cis<T: Scalar>(x: T) -> Complex<T> {
    Complex::new(x.cos(), x.sin())
}

fn real_part<T: Scalar>(z: Complex<T>, scale: T) -> T {
    debug_assert!(z.im.abs() <= T::lit(1e-12) * (T::one() + scale), "imaginary residue {} in a real-valued sum", z.im);
    z.re
}

/// `UV~_m(t) = -sum_w eta_{w,m} e^{i w t} / (i w)`, the zero-mean antiderivative of `-u_m`.
pub fn uv_tilde<T: Scalar>(schedule: &SinusoidSchedule<T>, m: Mode, t: T) -> T {
    let i = Complex::new(T::zero(), T::one());
    let mut acc = Complex::new(T::zero(), T::zero());
    let mut scale = T::zero();
    for (w, eta) in schedule.eta(m) {
        let term = -(eta * cis(w * t)) / (i * w);
        scale += term.norm();
        acc += term;
    }
    real_part(acc, scale)
}

/// `UV~_{m',m}(t) = sum_{w'+w != 0} eta_{w',m'} eta_{w,m} e^{i(w'+w)t} / (i^2 w (w'+w))`.
pub fn uv_tilde2<T: Scalar>(schedule: &SinusoidSchedule<T>, m_outer: Mode, m_inner: Mode, t: T) -> T {
    let mut acc = Complex::new(T::zero(), T::zero());
    let mut scale = T::zero();
    for (wo, eo) in schedule.eta(m_outer) {
        for (wi, ei) in schedule.eta(m_inner) {
            let sum = wo + wi;
            if sum == T::zero() {
                continue;
            }
            // i^2 = -1
            let term = -(eo * ei * cis(sum * t)) / (wi * sum);
            scale += term.norm();
            acc += term;
        }
    }
    real_part(acc, scale)
}

/// `v_{m',m}` from its defining resonant sum over `w' + w = 0`.
pub fn v_coeff_from_eta<T: Scalar>(schedule: &SinusoidSchedule<T>, m_outer: Mode, m_inner: Mode) -> T {
    let i = Complex::new(T::zero(), T::one());
    let mut acc = Complex::new(T::zero(), T::zero());
    let mut scale = T::zero();
    for (wo, eo) in schedule.eta(m_outer) {
        for (wi, ei) in schedule.eta(m_inner) {
            if wo + wi == T::zero() {
                let term = -(eo * ei) / (i * wi);
                scale += term.norm();
                acc += term;
            }
        }
    }
    real_part(acc, scale)
}

/// Resonance table: `+1/2` for `(cos outer, sin inner)` on the same slot,
/// `-1/2` for `(sin outer, cos inner)`, zero otherwise.
pub fn v_coeff(m_outer: Mode, m_inner: Mode) -> f64 {
    if !m_outer.same_slot(&m_inner) {
        return 0.0;
    }
    match (m_outer.channel, m_inner.channel) {
        (Channel::Cos, Channel::Sin) => 0.5,
        (Channel::Sin, Channel::Cos) => -0.5,
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn h_examples() {
        let shape = DitherShape::<f64>::default();
        assert_eq!(shape.h(Channel::Cos, 1.0), 0.0);
        assert_relative_eq!(shape.h(Channel::Sin, 1.0), 0.761594155955765, epsilon = 1e-12);
        assert_eq!(shape.h(Channel::Cos, -5.0), 0.0);
        assert_eq!(shape.h(Channel::Sin, -5.0), 0.0);
        assert_eq!(shape.h(Channel::Sin, 0.0), 0.0);
    }

    #[test]
    fn bracket_examples() {
        let shape = DitherShape::<f64>::default();
        assert_relative_eq!(shape.bracket(1.0), -0.5800256583859739, epsilon = 1e-12);
        assert_eq!(shape.bracket(0.0), 0.0);
        assert_eq!(shape.bracket(-3.0), 0.0);
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        for amp in [Amplitude::Tanh, Amplitude::Rational] {
            let shape = DitherShape::LogPhase(amp);
            let fd = DitherShape::custom(
                {
                    let s = shape.clone();
                    move |y| s.h(Channel::Cos, y)
                },
                {
                    let s = shape.clone();
                    move |y| s.h(Channel::Sin, y)
                },
            );
            for &y in &[1e-6, 1e-3, 0.1, 0.7, 3.0] {
                for ch in Channel::BOTH {
                    let (h, d, dd) = shape.h_derivatives(ch, y);
                    let (hf, df, ddf) = fd.h_derivatives(ch, y);
                    assert_eq!(h, hf);
                    assert_relative_eq!(d, df, max_relative = 1e-6, epsilon = 1e-9);
                    assert_relative_eq!(dd * y, ddf * y, max_relative = 1e-4, epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn amplitude_pole_free() {
        let (a, d, dd) = Amplitude::<f64>::Rational.eval(0.0);
        assert_eq!((a, d, dd), (0.0, 1.0, -2.0));
        let (a, d, _) = Amplitude::<f64>::Tanh.eval(0.0);
        assert_eq!((a, d), (0.0, 1.0));
    }

    #[test]
    fn tanh_shape_is_admissible() {
        let report = verify_properties(&DitherShape::<f64>::default(), &GridSpec::default());
        assert!(report.all_passed, "{report:#?}");
        let expected_c = (10f64.tanh() / 10.0).powi(2);
        assert_relative_eq!(report.p6_bracket_negative.witness, expected_c, max_relative = 1e-9);
        assert_relative_eq!(report.p6_r.unwrap(), 10.0, max_relative = 1e-12);
        assert!(!report.p6_c_degraded);
    }

    #[test]
    fn rational_shape_is_admissible() {
        let report = verify_properties(&DitherShape::<f64>::LogPhase(Amplitude::Rational), &GridSpec::default());
        assert!(report.all_passed, "{report:#?}");
    }

    #[test]
    fn quadratic_amplitude_fails_bracket_condition() {
        let report = verify_properties(&DitherShape::<f64>::LogPhase(Amplitude::Power(2.0)), &GridSpec::default());
        assert!(!report.p6_bracket_negative.passed);
        assert!(report.p6_c_degraded);
        assert!(!report.all_passed);
    }

    #[test]
    fn equal_pair_has_vanishing_bracket() {
        let shape = DitherShape::custom(|y: f64| y.tanh() * y.ln().sin(), |y: f64| y.tanh() * y.ln().sin());
        assert_eq!(shape.bracket(0.3), 0.0);
        let report = verify_properties(&shape, &GridSpec::default());
        assert!(!report.p6_bracket_negative.passed);
        assert_eq!(report.p6_r, None);
        assert!(report.p1_zero_on_nonpositive.passed);
    }

    #[test]
    fn linear_rule_frequencies() {
        let s = SinusoidSchedule::<f64>::linear(4, 2, 7.0).unwrap();
        assert_eq!(s.frequencies(), &[7.0, 14.0, 21.0, 28.0, 35.0, 42.0, 49.0, 56.0]);
        assert_eq!(s.frequency(2, 1), 42.0);
        assert_eq!(s.max_frequency(), 56.0);
        assert_eq!(s.modes().len(), 16);
        assert!(SinusoidSchedule::<f64>::linear(4, 2, 0.0).is_err());
    }

    #[test]
    fn explicit_schedule_rejects_collisions() {
        let err = SinusoidSchedule::<f64>::explicit(1, 2, vec![3.0, 3.0], vec![0.0; 2]).unwrap_err();
        assert!(matches!(err, Error::FrequencyCollision(_)));
        assert!(SinusoidSchedule::<f64>::explicit(1, 2, vec![3.0, -1.0], vec![0.0; 2]).is_err());
        assert!(SinusoidSchedule::<f64>::explicit(1, 2, vec![3.0, 4.0], vec![0.0; 2]).is_ok());
    }

    #[test]
    fn sinusoid_examples() {
        let s = SinusoidSchedule::<f64>::explicit(1, 1, vec![7.0], vec![0.0]).unwrap();
        assert_relative_eq!(u_eval(&s, Mode::new(0, 0, Channel::Cos), 0.0), 7f64.sqrt());
        assert_eq!(u_eval(&s, Mode::new(0, 0, Channel::Sin), 0.0), 0.0);
        assert_eq!(uv_tilde(&s, Mode::new(0, 0, Channel::Cos), 0.0), 0.0);
    }

    #[test]
    fn eta_sum_reproduces_sinusoid() {
        let s = SinusoidSchedule::<f64>::linear(2, 2, 3.0).unwrap().with_phases(vec![0.1, -2.0, 0.7, 5.0]).unwrap();
        for m in s.modes() {
            for &t in &[0.0, 0.37, 11.0] {
                let sum: Complex<f64> = s.eta(m).iter().map(|&(w, e)| e * cis(w * t)).sum();
                assert_relative_eq!(sum.re, u_eval(&s, m, t), epsilon = 1e-12);
                assert!(sum.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uv_tilde_closed_forms() {
        let s = SinusoidSchedule::<f64>::linear(2, 1, 5.0).unwrap().with_phases(vec![0.4, -1.3]).unwrap();
        for m in s.modes() {
            let w = s.frequency(m.agent, m.axis);
            let phi = s.phase(m.agent, m.axis);
            for &t in &[0.0, 0.2, 3.3] {
                let closed = match m.channel {
                    Channel::Cos => -(w * t + phi).sin() / w.sqrt(),
                    Channel::Sin => (w * t + phi).cos() / w.sqrt(),
                };
                assert_relative_eq!(uv_tilde(&s, m, t), closed, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn v_table_entries() {
        let a = Mode::new(1, 0, Channel::Cos);
        let b = Mode::new(1, 0, Channel::Sin);
        assert_eq!(v_coeff(a, b), 0.5);
        assert_eq!(v_coeff(b, a), -0.5);
        assert_eq!(v_coeff(a, a), 0.0);
        assert_eq!(v_coeff(a, Mode::new(0, 0, Channel::Sin)), 0.0);
        assert_eq!(v_coeff(a, Mode::new(1, 1, Channel::Sin)), 0.0);
    }
}
