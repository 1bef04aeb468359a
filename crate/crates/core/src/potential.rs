//! Distance-error potentials, their derivatives, and body frames.
//!
//! For an edge `{i,j}` write `r = p_i - p_j` and `s = |r|^2 - d_ij^2`; the edge
//! contributes `s^2 / 4`. The global potential sums over all edges, the local
//! potential of agent `i` over the edges incident to `i`. All derivatives are
//! closed-form polynomials in `r` and `s`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rigidity::{squared_lengths, Framework, Graph};
use crate::scalar::{dot, norm_sq, Scalar};

/// A graph with a desired length for every edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormationSpec<T> {
    graph: Graph,
    dim: usize,
    /// Desired squared lengths in canonical edge order.
    desired_sq: Vec<T>,
}

impl<T: Scalar> FormationSpec<T> {
    /// `distances[e]` is the desired length of `graph.edges()[e]`.
    pub fn new(graph: Graph, dim: usize, distances: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("ambient dimension must be positive".into()));
        }
        if distances.len() != graph.num_edges() {
            return Err(Error::Dimension(format!(
                "{} desired distances for {} edges",
                distances.len(),
                graph.num_edges()
            )));
        }
        if let Some(e) = distances.iter().position(|d| !(*d >= T::zero()) || !d.is_finite()) {
            let (i, j) = graph.edges()[e];
            return Err(Error::InvalidArgument(format!(
                "desired distance for edge {{{},{}}} must be finite and nonnegative",
                i + 1,
                j + 1
            )));
        }
        let desired_sq = distances.iter().map(|&d| d * d).collect();
        Ok(FormationSpec { graph, dim, desired_sq })
    }

    /// Builds from zero-based `(i, j, d_ij)` triples in any order.
    pub fn from_edges(num_agents: usize, dim: usize, edges: &[(usize, usize, T)]) -> Result<Self> {
        let graph = Graph::new(num_agents, edges.iter().map(|&(i, j, _)| (i, j)))?;
        let mut distances = vec![T::zero(); graph.num_edges()];
        for &(i, j, d) in edges {
            let e = graph.edge_index(i, j).expect("edge was just inserted");
            distances[e] = d;
        }
        FormationSpec::new(graph, dim, distances)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_agents(&self) -> usize {
        self.graph.num_vertices()
    }

    /// Length of a stacked state vector, `n * N`.
    pub fn state_len(&self) -> usize {
        self.dim * self.num_agents()
    }

    pub fn desired_sq(&self) -> &[T] {
        &self.desired_sq
    }

    pub fn desired_distances(&self) -> Vec<T> {
        self.desired_sq.iter().map(|d| d.sqrt()).collect()
    }

    fn rel(&self, e: usize, p: &[T], out: &mut [T]) -> T {
        let (i, j) = self.graph.edges()[e];
        let n = self.dim;
        let mut sq = T::zero();
        for a in 0..n {
            let d = p[i * n + a] - p[j * n + a];
            out[a] = d;
            sq += d * d;
        }
        sq - self.desired_sq[e]
    }

    fn sum_edges(&self, edges: impl IntoIterator<Item = usize>, p: &[T]) -> T {
        let mut r = vec![T::zero(); self.dim];
        let quarter = T::lit(0.25);
        edges
            .into_iter()
            .map(|e| {
                let s = self.rel(e, p, &mut r);
                quarter * s * s
            })
            .sum()
    }

    fn grad_edges(&self, edges: impl IntoIterator<Item = usize>, p: &[T], out: &mut [T]) {
        let n = self.dim;
        let mut r = vec![T::zero(); n];
        out.iter_mut().for_each(|x| *x = T::zero());
        for e in edges {
            let (i, j) = self.graph.edges()[e];
            let s = self.rel(e, p, &mut r);
            for a in 0..n {
                out[i * n + a] += s * r[a];
                out[j * n + a] -= s * r[a];
            }
        }
    }

    /// `out = D^2 f (u, .)` for the potential restricted to `edges`.
    fn hess_vec_edges(&self, edges: impl IntoIterator<Item = usize>, p: &[T], u: &[T], out: &mut [T]) {
        let n = self.dim;
        let two = T::lit(2.0);
        let mut r = vec![T::zero(); n];
        out.iter_mut().for_each(|x| *x = T::zero());
        for e in edges {
            let (i, j) = self.graph.edges()[e];
            let s = self.rel(e, p, &mut r);
            let ur: Vec<T> = (0..n).map(|a| u[i * n + a] - u[j * n + a]).collect();
            let r_ur = dot(&r, &ur);
            for a in 0..n {
                let v = two * r[a] * r_ur + s * ur[a];
                out[i * n + a] += v;
                out[j * n + a] -= v;
            }
        }
    }

    /// `out = D^3 f (u, v, .)` for the potential restricted to `edges`.
    fn third_edges(&self, edges: impl IntoIterator<Item = usize>, p: &[T], u: &[T], v: &[T], out: &mut [T]) {
        let n = self.dim;
        let two = T::lit(2.0);
        let mut r = vec![T::zero(); n];
        out.iter_mut().for_each(|x| *x = T::zero());
        for e in edges {
            let (i, j) = self.graph.edges()[e];
            self.rel(e, p, &mut r);
            let ur: Vec<T> = (0..n).map(|a| u[i * n + a] - u[j * n + a]).collect();
            let vr: Vec<T> = (0..n).map(|a| v[i * n + a] - v[j * n + a]).collect();
            let (r_ur, r_vr, ur_vr) = (dot(&r, &ur), dot(&r, &vr), dot(&ur, &vr));
            for a in 0..n {
                let w = two * (ur[a] * r_vr + vr[a] * r_ur + r[a] * ur_vr);
                out[i * n + a] += w;
                out[j * n + a] -= w;
            }
        }
    }
}

/// Which edges a potential sums over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Global,
    /// Edges incident to one agent.
    Local(usize),
}

impl<T: Scalar> FormationSpec<T> {
    fn scoped<R>(&self, scope: Scope, f: impl FnOnce(&mut dyn Iterator<Item = usize>) -> R) -> R {
        match scope {
            Scope::Global => f(&mut (0..self.graph.num_edges())),
            Scope::Local(i) => f(&mut self.graph.incident_edges(i).iter().copied()),
        }
    }

    pub fn potential(&self, scope: Scope, p: &[T]) -> T {
        self.scoped(scope, |edges| self.sum_edges(edges, p))
    }

    /// Full gradient in `R^{nN}` of the scoped potential.
    pub fn gradient_into(&self, scope: Scope, p: &[T], out: &mut [T]) {
        self.scoped(scope, |edges| self.grad_edges(edges, p, out))
    }

    pub fn hessian_vec_into(&self, scope: Scope, p: &[T], u: &[T], out: &mut [T]) {
        self.scoped(scope, |edges| self.hess_vec_edges(edges, p, u, out))
    }

    pub fn third_derivative_into(&self, scope: Scope, p: &[T], u: &[T], v: &[T], out: &mut [T]) {
        self.scoped(scope, |edges| self.third_edges(edges, p, u, v, out))
    }
}

/// Local potential of agent `i`: quarter-sum of squared distance errors over its edges.
pub fn psi_local<T: Scalar>(spec: &FormationSpec<T>, i: usize, p: &[T]) -> T {
    spec.potential(Scope::Local(i), p)
}

/// Global potential: quarter-sum of squared distance errors over all edges.
pub fn psi_global<T: Scalar>(spec: &FormationSpec<T>, p: &[T]) -> T {
    spec.potential(Scope::Global, p)
}

/// All local potentials at once, one pass over the edges.
pub fn psi_locals<T: Scalar>(spec: &FormationSpec<T>, p: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); spec.num_agents()];
    let mut r = vec![T::zero(); spec.dim()];
    let quarter = T::lit(0.25);
    for (e, &(i, j)) in spec.graph().edges().iter().enumerate() {
        let s = spec.rel(e, p, &mut r);
        let term = quarter * s * s;
        out[i] += term;
        out[j] += term;
    }
    out
}

pub fn grad_psi<T: Scalar>(spec: &FormationSpec<T>, p: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); p.len()];
    spec.gradient_into(Scope::Global, p, &mut out);
    out
}

/// Gradient of `psi_i` over the whole state space (nonzero only on `i` and its neighbours).
pub fn grad_psi_local<T: Scalar>(spec: &FormationSpec<T>, i: usize, p: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); p.len()];
    spec.gradient_into(Scope::Local(i), p, &mut out);
    out
}

/// Block `i` of the global gradient, `sum_j (|p_i - p_j|^2 - d_ij^2)(p_i - p_j)`.
pub fn grad_block<T: Scalar>(spec: &FormationSpec<T>, i: usize, p: &[T]) -> Vec<T> {
    let n = spec.dim();
    let mut r = vec![T::zero(); n];
    let mut out = vec![T::zero(); n];
    for &e in spec.graph().incident_edges(i) {
        let s = spec.rel(e, p, &mut r);
        let sign = if spec.graph().edges()[e].0 == i { T::one() } else { -T::one() };
        for a in 0..n {
            out[a] += sign * s * r[a];
        }
    }
    out
}

/// Lie derivative of the global potential along the constant field `B_{i,k}`.
///
/// Only edges incident to `i` contribute, so this equals the derivative of `psi_i`.
pub fn lie_derivative_b<T: Scalar>(spec: &FormationSpec<T>, frames: &BodyFrames<T>, i: usize, k: usize, p: &[T]) -> T {
    dot(&grad_block(spec, i, p), frames.vector(i, k))
}

/// Per-agent orthonormal velocity directions `b_{i,1..n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyFrames<T> {
    dim: usize,
    /// `vectors[i][k]` is `b_{i,k}`.
    vectors: Vec<Vec<Vec<T>>>,
}

/// Tolerance for accepting a Gram-Schmidt residual as nonzero.
const FRAME_RANK_TOL: f64 = 1e-10;

impl<T: Scalar> BodyFrames<T> {
    /// Orthonormalizes each agent's list of `dim` vectors by Gram-Schmidt.
    pub fn orthonormalized(dim: usize, raw: Vec<Vec<Vec<T>>>) -> Result<Self> {
        let mut vectors = Vec::with_capacity(raw.len());
        for (agent, frame) in raw.into_iter().enumerate() {
            if frame.len() != dim || frame.iter().any(|v| v.len() != dim) {
                return Err(Error::Dimension(format!(
                    "agent {} frame must hold {dim} vectors of length {dim}",
                    agent + 1
                )));
            }
            let mut basis: Vec<Vec<T>> = Vec::with_capacity(dim);
            for v in frame {
                let scale = norm_sq(&v).sqrt();
                let mut w = v;
                // two passes keep the result orthonormal to working precision
                for _ in 0..2 {
                    for b in &basis {
                        let c = dot(&w, b);
                        w.iter_mut().zip(b).for_each(|(x, &y)| *x -= c * y);
                    }
                }
                let len = norm_sq(&w).sqrt();
                if !(len > T::lit(FRAME_RANK_TOL) * scale) || !len.is_finite() {
                    return Err(Error::DegenerateFrame { agent: agent + 1 });
                }
                w.iter_mut().for_each(|x| *x /= len);
                basis.push(w);
            }
            vectors.push(basis);
        }
        Ok(BodyFrames { dim, vectors })
    }

    pub fn identity(num_agents: usize, dim: usize) -> Self {
        let e =
            (0..dim).map(|k| (0..dim).map(|a| if a == k { T::one() } else { T::zero() }).collect()).collect::<Vec<_>>();
        BodyFrames { dim, vectors: vec![e; num_agents] }
    }

    /// Planar frames `b_1 = (cos a, sin a)`, `b_2 = (-sin a, cos a)`.
    pub fn planar(angles: &[T]) -> Self {
        let vectors = angles.iter().map(|&a| vec![vec![a.cos(), a.sin()], vec![-a.sin(), a.cos()]]).collect();
        BodyFrames { dim: 2, vectors }
    }

    /// Spherical-angle frames in `R^3`, orthonormalized.
    ///
    /// `b_1 = (sin t cos f, sin t sin f, cos t)`, `b_2 = (-sin f, cos f, 0)`;
    /// `b_3` is either the literal `(-cos t cos f, -cos t, sin t)` or the
    /// completed cross product `(-cos t cos f, -cos t sin f, sin t)`.
    pub fn spherical(phi: &[T], theta: &[T], variant: ThirdAxis) -> Result<Self> {
        if phi.len() != theta.len() {
            return Err(Error::Dimension("phi and theta lists differ in length".into()));
        }
        let raw = phi
            .iter()
            .zip(theta)
            .map(|(&f, &t)| {
                let b3 = match variant {
                    ThirdAxis::Literal => vec![-t.cos() * f.cos(), -t.cos(), t.sin()],
                    ThirdAxis::Corrected => vec![-t.cos() * f.cos(), -t.cos() * f.sin(), t.sin()],
                };
                vec![vec![t.sin() * f.cos(), t.sin() * f.sin(), t.cos()], vec![-f.sin(), f.cos(), T::zero()], b3]
            })
            .collect();
        BodyFrames::orthonormalized(3, raw)
    }

    /// Random orthonormal frames (QR of uniform matrices), seeded.
    pub fn random(num_agents: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = (0..num_agents)
            .map(|_| (0..dim).map(|_| (0..dim).map(|_| T::lit(rng.random_range(-1.0..1.0))).collect()).collect())
            .collect();
        // a uniform random matrix is singular with probability zero
        BodyFrames::orthonormalized(dim, raw).expect("random frame is full rank")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_agents(&self) -> usize {
        self.vectors.len()
    }

    pub fn vector(&self, agent: usize, k: usize) -> &[T] {
        &self.vectors[agent][k]
    }

    pub fn agent(&self, agent: usize) -> &[Vec<T>] {
        &self.vectors[agent]
    }

    /// Frames rotated by `rotation` (row-major `dim x dim`): `b -> R b`.
    pub fn rotated(&self, rotation: &[T]) -> Self {
        let n = self.dim;
        let vectors = self
            .vectors
            .iter()
            .map(|frame| {
                frame
                    .iter()
                    .map(|b| (0..n).map(|a| (0..n).map(|c| rotation[a * n + c] * b[c]).sum()).collect())
                    .collect()
            })
            .collect();
        BodyFrames { dim: n, vectors }
    }

    /// Largest deviation of any frame Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> T {
        let mut worst = T::zero();
        for frame in &self.vectors {
            for (a, u) in frame.iter().enumerate() {
                for (b, v) in frame.iter().enumerate() {
                    let target = if a == b { T::one() } else { T::zero() };
                    worst = worst.max((dot(u, v) - target).abs());
                }
            }
        }
        worst
    }
}

/// Choice of third body axis for the spherical-angle frame rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThirdAxis {
    #[default]
    Literal,
    Corrected,
}

/// Empirical constants in `c3 psi <= |grad psi|^2 <= c1 psi` near a target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientBoundReport {
    pub c1_hat: f64,
    pub c3_hat: f64,
    pub samples_used: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientBoundConfig {
    pub samples: usize,
    pub radius: f64,
    pub seed: u64,
    /// `c3_hat` must exceed this for the lower bound to count as verified.
    pub c3_floor: f64,
}

impl Default for GradientBoundConfig {
    fn default() -> Self {
        GradientBoundConfig { samples: 10_000, radius: 0.1, seed: 0, c3_floor: 1e-6 }
    }
}

/// Ratios `|grad psi|^2 / psi` are ignored below this potential.
pub const BOUND_PSI_FLOOR: f64 = 1e-12;

/// Samples around a target realization and estimates the gradient-bound constants.
pub fn verify_gradient_bounds<T: Scalar>(
    spec: &FormationSpec<T>,
    realization: &Framework<T>,
    cfg: &GradientBoundConfig,
) -> Result<GradientBoundReport> {
    let p0 = realization.positions();
    let psi0 = psi_global(spec, p0).as_f64();
    if psi0 > 1e-9 {
        return Err(Error::NotARealization { psi: psi0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut c1, mut c3, mut used) = (0.0f64, f64::INFINITY, 0usize);
    let mut p = p0.to_vec();
    for _ in 0..cfg.samples {
        let dir: Vec<f64> = (0..p0.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let len = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = cfg.radius * rng.random_range(0.0..1.0) / len;
        for ((q, &x0), d) in p.iter_mut().zip(p0).zip(&dir) {
            *q = x0 + T::lit(scale * d);
        }
        let psi = psi_global(spec, &p).as_f64();
        if psi <= BOUND_PSI_FLOOR {
            continue;
        }
        let g = norm_sq(&grad_psi(spec, &p)).as_f64();
        let ratio = g / psi;
        c1 = c1.max(ratio);
        c3 = c3.min(ratio);
        used += 1;
    }
    if used == 0 {
        c3 = 0.0;
    }
    Ok(GradientBoundReport { c1_hat: c1, c3_hat: c3, samples_used: used, passed: used > 0 && c3 > cfg.c3_floor })
}

/// `psi = |f_G(p) - d|^2 / 4` evaluated through the edge map.
pub fn psi_from_edge_map<T: Scalar>(spec: &FormationSpec<T>, p: &[T]) -> T {
    let lengths = squared_lengths(spec.graph(), spec.dim(), p);
    let quarter = T::lit(0.25);
    lengths.iter().zip(spec.desired_sq()).map(|(&l, &d)| quarter * (l - d) * (l - d)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rectangle() -> FormationSpec<f64> {
        FormationSpec::from_edges(4, 2, &[(0, 1, 3.0), (2, 3, 3.0), (1, 2, 4.0), (0, 3, 4.0), (0, 2, 5.0), (1, 3, 5.0)])
            .unwrap()
    }

    const RECT_INITIAL: [f64; 8] = [0.0, 0.0, -1.0, 4.0, 5.0, 3.0, 3.0, 0.0];
    const RECT_TARGET: [f64; 8] = [0.0, 0.0, 3.0, 0.0, 3.0, 4.0, 0.0, 4.0];

    #[test]
    fn rectangle_initial_potentials() {
        let spec = rectangle();
        // per-edge (|p_j - p_i|^2 - d^2)^2 in canonical order: 64, 81, 49, 441, 49, 16
        assert_eq!(psi_global(&spec, &RECT_INITIAL), 175.0);
        assert_eq!(psi_local(&spec, 0, &RECT_INITIAL), 48.5);
        let locals = psi_locals(&spec, &RECT_INITIAL);
        assert_eq!(locals[0], 48.5);
        // each edge is shared by two agents
        assert_eq!(locals.iter().sum::<f64>(), 2.0 * 175.0);
    }

    #[test]
    fn target_is_zero_set() {
        let spec = rectangle();
        assert_eq!(psi_global(&spec, &RECT_TARGET), 0.0);
        assert!(grad_psi(&spec, &RECT_TARGET).iter().all(|&g| g == 0.0));
        let frames = BodyFrames::planar(&[0.3, 1.0, 2.0, -0.5]);
        for i in 0..4 {
            assert_eq!(psi_local(&spec, i, &RECT_TARGET), 0.0);
            for k in 0..2 {
                assert_eq!(lie_derivative_b(&spec, &frames, i, k, &RECT_TARGET), 0.0);
            }
        }
    }

    #[test]
    fn zero_distances_give_quartic() {
        let spec = FormationSpec::from_edges(3, 2, &[(0, 1, 0.0), (0, 2, 0.0)]).unwrap();
        let p = [0.0, 0.0, 1.0, 2.0, -1.0, 0.5];
        let expected = 0.25 * (5.0f64.powi(2) + 1.25f64.powi(2));
        assert_relative_eq!(psi_local(&spec, 0, &p), expected, max_relative = 1e-15);
    }

    #[test]
    fn single_edge_gradient() {
        let spec = FormationSpec::from_edges(2, 2, &[(0, 1, 0.0)]).unwrap();
        assert_eq!(grad_psi(&spec, &[0.0, 0.0, 1.0, 0.0]), vec![-1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn identity_frames_pick_gradient_components() {
        let spec = rectangle();
        let frames = BodyFrames::identity(4, 2);
        let g = grad_psi(&spec, &RECT_INITIAL);
        for i in 0..4 {
            for k in 0..2 {
                assert_eq!(lie_derivative_b(&spec, &frames, i, k, &RECT_INITIAL), g[i * 2 + k]);
            }
        }
    }

    #[test]
    fn lie_derivative_agrees_with_local_gradient() {
        let spec = rectangle();
        let frames = BodyFrames::random(4, 2, 7);
        for i in 0..4 {
            let gl = grad_psi_local(&spec, i, &RECT_INITIAL);
            for k in 0..2 {
                let via_local = dot(&gl[i * 2..i * 2 + 2], frames.vector(i, k));
                let via_global = lie_derivative_b(&spec, &frames, i, k, &RECT_INITIAL);
                assert!((via_local - via_global).abs() <= 1e-12 * via_global.abs().max(1.0));
            }
        }
    }

    #[test]
    fn edge_map_cross_check() {
        let spec = rectangle();
        assert_eq!(psi_from_edge_map(&spec, &RECT_INITIAL), psi_global(&spec, &RECT_INITIAL));
    }

    #[test]
    fn literal_third_axis_is_not_orthonormal_but_sanitizes() {
        // agent 5: phi = 5 pi / 3, theta = 5 pi / 6
        let (f, t) = (5.0 * std::f64::consts::PI / 3.0, 5.0 * std::f64::consts::PI / 6.0);
        let b1 = [t.sin() * f.cos(), t.sin() * f.sin(), t.cos()];
        let b3 = [-t.cos() * f.cos(), -t.cos(), t.sin()];
        assert!(dot(&b1, &b3).abs() > 0.1);

        for variant in [ThirdAxis::Literal, ThirdAxis::Corrected] {
            let frames = BodyFrames::spherical(&[f], &[t], variant).unwrap();
            assert!(frames.orthonormality_defect() < 1e-12);
        }
        // the literal b_3 projects onto -(b_1 x b_2) for this agent
        let lit = BodyFrames::spherical(&[f], &[t], ThirdAxis::Literal).unwrap();
        let cor = BodyFrames::spherical(&[f], &[t], ThirdAxis::Corrected).unwrap();
        assert_relative_eq!(dot(lit.vector(0, 2), cor.vector(0, 2)), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_frame_rejected() {
        let raw = vec![vec![vec![1.0, 0.0], vec![2.0, 0.0]]];
        assert!(matches!(BodyFrames::<f64>::orthonormalized(2, raw), Err(Error::DegenerateFrame { agent: 1 })));
    }

    #[test]
    fn invalid_distances_rejected() {
        let g = Graph::complete(3).unwrap();
        assert!(FormationSpec::new(g.clone(), 2, vec![1.0, -1.0, 1.0]).is_err());
        assert!(FormationSpec::new(g, 2, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn bounds_reject_non_realization() {
        let spec = rectangle();
        let fw = Framework::new(spec.graph().clone(), 2, RECT_INITIAL.to_vec()).unwrap();
        let err = verify_gradient_bounds(&spec, &fw, &GradientBoundConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NotARealization { .. }));
    }
}
