//! Scenario files, the two built-in experiments, single runs and parameter sweeps.
//!
//! A scenario is a versioned JSON document. Agents and edges are 1-based in
//! files and reports, zero-based everywhere in code.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_6, TAU};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dither::{Amplitude, DitherShape, GridSpec, PropertyReport, SinusoidSchedule};
use crate::dynamics::io::{write_json, write_trajectory_csv, Sidecar};
use crate::dynamics::{
    averaging_residual, bound_fit, integrate, BoundFit, IntegrateOptions, Law, LieMethod, ResidualOptions,
    ResidualReport, SystemDef, Trajectory, BOUND_FLOOR, STEP_RECOMMENDED_DIVISOR,
};
use crate::error::{Error, Result};
use crate::potential::{psi_global, BodyFrames, FormationSpec, ThirdAxis};
use crate::rigidity::{is_infinitesimally_rigid, Framework, Graph, RankReport, DEFAULT_RANK_TOL};

pub const SCHEMA_VERSION: u32 = 1;
/// Relative edge-length error below which a run counts as converged.
pub const EDGE_TOLERANCE: f64 = 0.01;
/// Final potential below which a run counts as converged.
pub const PSI_THRESHOLD: f64 = 1e-2;
/// Largest potential accepted at a scenario's realization.
pub const REALIZATION_TOLERANCE: f64 = 1e-9;

pub const PRESETS: [&str; 2] = ["rectangle", "double-tetrahedron"];

/// One edge with its desired length; vertices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub i: usize,
    pub j: usize,
    pub d: f64,
}

/// Body frames, literal or by rule. Rules index agents from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FrameSpec {
    Identity,
    Planar {
        angles: Vec<f64>,
    },
    /// `phi_i = i * step`.
    PlanarRule {
        step: f64,
    },
    Spherical {
        phi: Vec<f64>,
        theta: Vec<f64>,
        #[serde(default)]
        third_axis: ThirdAxis,
    },
    /// `phi_i = i * phi_step`, `theta_i = i * theta_step`.
    SphericalRule {
        phi_step: f64,
        theta_step: f64,
        #[serde(default)]
        third_axis: ThirdAxis,
    },
    /// `vectors[i][k]` is `b_{i,k}`; Gram-Schmidt is applied.
    Explicit {
        vectors: Vec<Vec<Vec<f64>>>,
    },
    Random {
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "amplitude", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    #[default]
    Tanh,
    Rational,
    Power {
        exponent: f64,
    },
}

impl ShapeSpec {
    pub fn build(&self) -> DitherShape<f64> {
        DitherShape::LogPhase(match *self {
            ShapeSpec::Tanh => Amplitude::Tanh,
            ShapeSpec::Rational => Amplitude::Rational,
            ShapeSpec::Power { exponent } => Amplitude::Power(exponent),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum FrequencySpec {
    /// `w_{i,k} = omega ((i-1) n + k)`.
    Linear { omega: f64 },
    /// `table[(i-1) n + (k-1)]`.
    Explicit { table: Vec<f64> },
}

/// On-disk scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub dim: usize,
    pub num_agents: usize,
    pub edges: Vec<EdgeSpec>,
    /// A point of the target set, used for the rigidity check.
    pub realization: Vec<Vec<f64>>,
    pub initial: Vec<Vec<f64>>,
    pub frames: FrameSpec,
    #[serde(default)]
    pub shape: ShapeSpec,
    pub frequencies: FrequencySpec,
    /// Zero when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<f64>>,
    #[serde(default)]
    pub t0: f64,
    pub t_final: f64,
    /// A 64th of the fastest dither period when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

/// Command-line style replacements applied before resolution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub omega: Option<f64>,
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub seed: Option<u64>,
    pub phases: Option<Vec<f64>>,
    pub frames: Option<FrameSpec>,
}

impl Scenario {
    pub fn with_overrides(&self, o: &Overrides) -> Scenario {
        let mut s = self.clone();
        if let Some(omega) = o.omega {
            s.frequencies = FrequencySpec::Linear { omega };
        }
        if let Some(t) = o.t_final {
            s.t_final = t;
        }
        if o.dt.is_some() {
            s.dt = o.dt;
        }
        if let Some(seed) = o.seed {
            s.seed = seed;
        }
        if o.phases.is_some() {
            s.phases = o.phases.clone();
        }
        if let Some(f) = &o.frames {
            s.frames = f.clone();
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization is infallible")
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Scenario> {
        serde_json::from_str(text).map_err(|e| Error::scenario(origin, e.to_string()))
    }
}

fn rows_to_flat(rows: &[Vec<f64>], count: usize, dim: usize, field: &str) -> std::result::Result<Vec<f64>, String> {
    if rows.len() != count {
        return Err(format!("{field}: expected {count} points, got {}", rows.len()));
    }
    let mut out = Vec::with_capacity(count * dim);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != dim {
            return Err(format!("{field}[{i}]: expected {dim} coordinates, got {}", r.len()));
        }
        if r.iter().any(|x| !x.is_finite()) {
            return Err(format!("{field}[{i}]: non-finite coordinate"));
        }
        out.extend_from_slice(r);
    }
    Ok(out)
}

fn build_frames(spec: &FrameSpec, count: usize, dim: usize) -> std::result::Result<BodyFrames<f64>, String> {
    let need_dim = |d: usize| if dim == d { Ok(()) } else { Err(format!("frames: this kind needs dim = {d}")) };
    let check_len = |len: usize, what: &str| {
        if len == count {
            Ok(())
        } else {
            Err(format!("frames.{what}: expected {count} entries, got {len}"))
        }
    };
    let rule = |step: f64| (1..=count).map(|i| i as f64 * step).collect::<Vec<_>>();
    let frames = match spec {
        FrameSpec::Identity => BodyFrames::identity(count, dim),
        FrameSpec::Planar { angles } => {
            need_dim(2)?;
            check_len(angles.len(), "angles")?;
            BodyFrames::planar(angles)
        }
        FrameSpec::PlanarRule { step } => {
            need_dim(2)?;
            BodyFrames::planar(&rule(*step))
        }
        FrameSpec::Spherical { phi, theta, third_axis } => {
            need_dim(3)?;
            check_len(phi.len(), "phi")?;
            check_len(theta.len(), "theta")?;
            BodyFrames::spherical(phi, theta, *third_axis).map_err(|e| format!("frames: {e}"))?
        }
        FrameSpec::SphericalRule { phi_step, theta_step, third_axis } => {
            need_dim(3)?;
            BodyFrames::spherical(&rule(*phi_step), &rule(*theta_step), *third_axis)
                .map_err(|e| format!("frames: {e}"))?
        }
        FrameSpec::Explicit { vectors } => {
            check_len(vectors.len(), "vectors")?;
            for (i, agent) in vectors.iter().enumerate() {
                if agent.len() != dim || agent.iter().any(|v| v.len() != dim) {
                    return Err(format!("frames.vectors[{i}]: expected {dim} vectors of length {dim}"));
                }
            }
            BodyFrames::orthonormalized(dim, vectors.clone()).map_err(|e| format!("frames: {e}"))?
        }
        FrameSpec::Random { seed } => BodyFrames::random(count, dim, *seed),
    };
    Ok(frames)
}

/// Frame vectors as stored in a scenario, before any sanitizing.
pub fn literal_frame_vectors(spec: &FrameSpec, count: usize) -> Option<Vec<Vec<Vec<f64>>>> {
    let rule = |step: f64| (1..=count).map(|i| i as f64 * step).collect::<Vec<_>>();
    let spherical = |phi: &[f64], theta: &[f64], axis: ThirdAxis| {
        phi.iter()
            .zip(theta)
            .map(|(&f, &t)| {
                let b3 = match axis {
                    ThirdAxis::Literal => vec![-t.cos() * f.cos(), -t.cos(), t.sin()],
                    ThirdAxis::Corrected => vec![-t.cos() * f.cos(), -t.cos() * f.sin(), t.sin()],
                };
                vec![vec![t.sin() * f.cos(), t.sin() * f.sin(), t.cos()], vec![-f.sin(), f.cos(), 0.0], b3]
            })
            .collect()
    };
    match spec {
        FrameSpec::Spherical { phi, theta, third_axis } => Some(spherical(phi, theta, *third_axis)),
        FrameSpec::SphericalRule { phi_step, theta_step, third_axis } => {
            Some(spherical(&rule(*phi_step), &rule(*theta_step), *third_axis))
        }
        FrameSpec::Explicit { vectors } => Some(vectors.clone()),
        _ => None,
    }
}

/// A validated scenario with every default applied.
#[derive(Debug, Clone)]
pub struct Experiment {
    /// The scenario as given (defaults are not written back).
    pub scenario: Scenario,
    pub system: SystemDef<f64>,
    pub realization: Framework<f64>,
    pub initial: Vec<f64>,
    pub dt: f64,
    pub rank: RankReport,
}

impl Experiment {
    pub fn from_scenario(scenario: Scenario) -> Result<Experiment> {
        let origin = scenario.name.clone();
        Self::resolve(scenario).map_err(|message| Error::scenario(origin, message))
    }

    fn resolve(scenario: Scenario) -> std::result::Result<Experiment, String> {
        let s = &scenario;
        if s.schema_version != SCHEMA_VERSION {
            return Err(format!("schema_version: unsupported version {}, expected {SCHEMA_VERSION}", s.schema_version));
        }
        if s.dim == 0 {
            return Err("dim: must be positive".into());
        }
        if s.num_agents < 2 {
            return Err("num_agents: at least two agents are required".into());
        }
        let (count, dim) = (s.num_agents, s.dim);
        let mut seen = std::collections::HashSet::new();
        let mut triples = Vec::with_capacity(s.edges.len());
        for (e, edge) in s.edges.iter().enumerate() {
            let (i, j) = (edge.i, edge.j);
            if i == 0 || j == 0 || i > count || j > count {
                return Err(format!("edges[{e}]: vertex of {{{i},{j}}} outside 1..={count}"));
            }
            if i == j {
                return Err(format!("edges[{e}]: self-loop at vertex {i}"));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(format!("edges[{e}]: duplicate edge {{{},{}}}", i.min(j), i.max(j)));
            }
            if !(edge.d > 0.0) || !edge.d.is_finite() {
                return Err(format!("edges[{e}].d: desired distance must be positive and finite"));
            }
            triples.push((i - 1, j - 1, edge.d));
        }
        let spec = FormationSpec::from_edges(count, dim, &triples).map_err(|e| format!("edges: {e}"))?;
        let realization = rows_to_flat(&s.realization, count, dim, "realization")?;
        let initial = rows_to_flat(&s.initial, count, dim, "initial")?;
        let psi_real = psi_global(&spec, &realization);
        if psi_real > REALIZATION_TOLERANCE {
            return Err(format!("realization: not a target formation (psi = {psi_real:e})"));
        }
        let frames = build_frames(&s.frames, count, dim)?;

        if let ShapeSpec::Power { exponent } = s.shape {
            if !(exponent > 0.0) {
                return Err("shape.exponent: must be positive".into());
            }
        }
        let mut schedule = match &s.frequencies {
            FrequencySpec::Linear { omega } => {
                SinusoidSchedule::linear(count, dim, *omega).map_err(|e| format!("frequencies.omega: {e}"))?
            }
            FrequencySpec::Explicit { table } => {
                SinusoidSchedule::explicit(count, dim, table.clone(), vec![0.0; table.len()])
                    .map_err(|e| format!("frequencies.table: {e}"))?
            }
        };
        if let Some(ph) = &s.phases {
            if ph.iter().any(|x| !x.is_finite()) {
                return Err("phases: non-finite entry".into());
            }
            schedule = schedule.with_phases(ph.clone()).map_err(|e| format!("phases: {e}"))?;
        }
        if !(s.t_final > s.t0) || !s.t_final.is_finite() || !s.t0.is_finite() {
            return Err("t_final: must exceed t0".into());
        }
        // largest step at or below the recommended one that divides the horizon evenly
        let span = s.t_final - s.t0;
        let default_dt = span / (span * STEP_RECOMMENDED_DIVISOR * schedule.max_frequency() / TAU).ceil();
        let dt = s.dt.unwrap_or(default_dt);
        if !(dt > 0.0) || !dt.is_finite() {
            return Err("dt: must be positive".into());
        }
        let graph: Graph = spec.graph().clone();
        let framework = Framework::new(graph, dim, realization).map_err(|e| format!("realization: {e}"))?;
        let rank = is_infinitesimally_rigid(&framework, DEFAULT_RANK_TOL).map_err(|e| format!("realization: {e}"))?;
        if !rank.is_inf_rigid {
            log::warn!(
                "scenario `{}`: realization is not infinitesimally rigid (rank {} < {})",
                s.name,
                rank.rank_g,
                rank.required_rank
            );
        }
        let system = SystemDef::new(spec, frames, s.shape.build(), schedule).map_err(|e| e.to_string())?;
        Ok(Experiment { scenario, system, realization: framework, initial, dt, rank })
    }

    pub fn omega(&self) -> Option<f64> {
        match self.scenario.frequencies {
            FrequencySpec::Linear { omega } => Some(omega),
            FrequencySpec::Explicit { .. } => None,
        }
    }
}

/// The four-agent rectangle in the plane (complete graph, sides 3 and 4).
pub fn rectangle() -> Scenario {
    let e = |i, j, d| EdgeSpec { i, j, d };
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: "rectangle".into(),
        description: "Four agents in the plane forming a 3 x 4 rectangle; complete graph.".into(),
        dim: 2,
        num_agents: 4,
        edges: vec![e(1, 2, 3.0), e(3, 4, 3.0), e(2, 3, 4.0), e(1, 4, 4.0), e(1, 3, 5.0), e(2, 4, 5.0)],
        realization: vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![3.0, 4.0], vec![0.0, 4.0]],
        initial: vec![vec![0.0, 0.0], vec![-1.0, 4.0], vec![5.0, 3.0], vec![3.0, 0.0]],
        frames: FrameSpec::PlanarRule { step: FRAC_PI_3 },
        shape: ShapeSpec::Tanh,
        frequencies: FrequencySpec::Linear { omega: 7.0 },
        phases: None,
        t0: 0.0,
        t_final: 25.0,
        dt: None,
        seed: 0,
    }
}

/// Five agents in space forming two tetrahedra sharing a face; edge {4,5} absent.
pub fn double_tetrahedron() -> Scenario {
    let mut edges = Vec::new();
    for i in 1..=5 {
        for j in i + 1..=5 {
            if (i, j) != (4, 5) {
                edges.push(EdgeSpec { i, j, d: 2.0 });
            }
        }
    }
    let s3 = 3f64.sqrt();
    let h = 2.0 * (2.0f64 / 3.0).sqrt();
    Scenario {
        schema_version: SCHEMA_VERSION,
        name: "double-tetrahedron".into(),
        description: "Five agents in space forming a double tetrahedron with unit edge length 2.".into(),
        dim: 3,
        num_agents: 5,
        edges,
        realization: vec![
            vec![0.0, 0.0, 0.0],
            vec![2.0, 0.0, 0.0],
            vec![1.0, s3, 0.0],
            vec![1.0, s3 / 3.0, h],
            vec![1.0, s3 / 3.0, -h],
        ],
        initial: vec![
            vec![0.0, -1.0, 0.5],
            vec![1.8, 1.6, -0.1],
            vec![-0.2, 1.8, 0.05],
            vec![1.2, 1.9, 1.7],
            vec![-1.0, -1.5, -1.2],
        ],
        frames: FrameSpec::SphericalRule { phi_step: FRAC_PI_3, theta_step: FRAC_PI_6, third_axis: ThirdAxis::Literal },
        shape: ShapeSpec::Tanh,
        frequencies: FrequencySpec::Linear { omega: 7.0 },
        phases: None,
        t0: 0.0,
        t_final: 100.0,
        dt: None,
        seed: 0,
    }
}

pub fn preset(name: &str) -> Option<Scenario> {
    match name {
        "rectangle" => Some(rectangle()),
        "double-tetrahedron" => Some(double_tetrahedron()),
        _ => None,
    }
}

/// Reads a scenario file without resolving it; preset names take precedence over paths.
pub fn read_scenario(arg: &str) -> Result<Scenario> {
    if let Some(s) = preset(arg) {
        return Ok(s);
    }
    let path = Path::new(arg);
    let text = std::fs::read_to_string(path).map_err(|e| Error::scenario(arg, e.to_string()))?;
    Scenario::from_json(&text, arg)
}

/// Loads a preset by name or a scenario file by path and validates it.
pub fn load_scenario(arg: &str) -> Result<Experiment> {
    let scenario = read_scenario(arg)?;
    Experiment::from_scenario(scenario).map_err(|e| match e {
        Error::Scenario { message, .. } => Error::scenario(arg, message),
        other => other,
    })
}

/// Achieved versus desired length of one edge at the final state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub i: usize,
    pub j: usize,
    pub desired: f64,
    pub actual: f64,
    pub rel_error: f64,
}

pub fn edge_table(spec: &FormationSpec<f64>, p: &[f64]) -> Vec<EdgeReport> {
    let n = spec.dim();
    let desired = spec.desired_distances();
    spec.graph()
        .edges()
        .iter()
        .zip(desired)
        .map(|(&(i, j), d)| {
            let actual = (0..n).map(|a| (p[i * n + a] - p[j * n + a]).powi(2)).sum::<f64>().sqrt();
            EdgeReport { i: i + 1, j: j + 1, desired: d, actual, rel_error: (actual - d).abs() / d }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub law: Law,
    pub omega: Option<f64>,
    pub t0: f64,
    pub t_final: f64,
    pub dt: f64,
    pub samples: usize,
    pub seed: u64,
    pub psi_initial: f64,
    pub psi_final: f64,
    pub psi_min: f64,
    pub t_psi_min: f64,
    pub edges: Vec<EdgeReport>,
    pub max_edge_error: f64,
    /// Every edge within 1% and final potential below `1e-2`.
    pub converged: bool,
    pub bound_fit: BoundFit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub averaging: Option<ResidualReport>,
}

/// Averaging audit over `[t0, t_end]` of a dither run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragingRequest {
    pub t_end: f64,
    pub refinement: usize,
    pub method: LieMethod,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub law: Law,
    pub record_every: usize,
    pub averaging: Option<AveragingRequest>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { law: Law::Dither, record_every: 1, averaging: None }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Trajectory<f64>,
    pub report: RunReport,
    pub elapsed_seconds: f64,
}

/// Summary of a finished trajectory; depends only on its inputs.
pub fn summarize(exp: &Experiment, law: Law, traj: &Trajectory<f64>) -> RunReport {
    let (j_min, psi_min) =
        traj.psi
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (j, v)| if v < acc.1 { (j, v) } else { acc });
    let edges = edge_table(&exp.system.spec, traj.final_state());
    let max_edge_error = edges.iter().map(|e| e.rel_error).fold(0.0, f64::max);
    let psi_final = *traj.psi.last().expect("trajectory is never empty");
    // t0 + steps * dt drifts in the last bits; report the requested horizon when it was hit
    let t_end = traj.t_final();
    let t_final = if (t_end - exp.scenario.t_final).abs() <= 1e-9 * exp.scenario.t_final.abs().max(1.0) {
        exp.scenario.t_final
    } else {
        t_end
    };
    RunReport {
        scenario: exp.scenario.name.clone(),
        law,
        omega: exp.omega(),
        t0: traj.t0,
        t_final,
        dt: traj.meta.step,
        samples: traj.len(),
        seed: exp.scenario.seed,
        psi_initial: traj.psi[0],
        psi_final,
        psi_min,
        t_psi_min: traj.time(j_min),
        converged: max_edge_error < EDGE_TOLERANCE && psi_final < PSI_THRESHOLD,
        edges,
        max_edge_error,
        bound_fit: bound_fit(traj, BOUND_FLOOR),
        averaging: None,
    }
}

pub fn simulate(exp: &Experiment, law: Law, record_every: usize) -> Result<Trajectory<f64>> {
    let s = &exp.scenario;
    let field = exp.system.field(law);
    let opts = IntegrateOptions { record_every, ..Default::default() };
    let mut traj = integrate(&field, &exp.initial, s.t0, s.t_final, exp.dt, opts)?;
    traj.meta.scenario = s.name.clone();
    traj.meta.law = law.as_str().into();
    traj.meta.seed = s.seed;
    traj.meta.omega = exp.omega();
    traj.meta.frequencies = exp.system.schedule.frequencies().to_vec();
    traj.meta.phases = exp.system.schedule.phases().to_vec();
    Ok(traj)
}

pub fn run(exp: &Experiment, opts: &RunOptions) -> Result<RunOutput> {
    let start = Instant::now();
    let trajectory = simulate(exp, opts.law, opts.record_every)?;
    let mut report = summarize(exp, opts.law, &trajectory);
    if let Some(req) = opts.averaging {
        if opts.law != Law::Dither {
            return Err(Error::InvalidArgument("the averaging audit applies to the dither law only".into()));
        }
        let last = (((req.t_end - trajectory.t0) / trajectory.dt).round().max(1.0) as usize).min(trajectory.len() - 1);
        let window = trajectory.window(0, last);
        let ropts = ResidualOptions { refinement: req.refinement, method: req.method, ..Default::default() };
        report.averaging = Some(averaging_residual(&exp.system, &window, &ropts)?);
    }
    Ok(RunOutput { trajectory, report, elapsed_seconds: start.elapsed().as_secs_f64() })
}

/// Paths written by [`write_run`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunFiles {
    pub trajectory: std::path::PathBuf,
    pub sidecar: std::path::PathBuf,
    pub report: std::path::PathBuf,
}

/// Writes `<stem>.csv`, `<stem>.json` (sidecar) and `<stem>.report.json` into `dir`.
pub fn write_run(dir: &Path, stem: &str, exp: &Experiment, out: &RunOutput) -> Result<RunFiles> {
    std::fs::create_dir_all(dir)?;
    let files = RunFiles {
        trajectory: dir.join(format!("{stem}.csv")),
        sidecar: dir.join(format!("{stem}.json")),
        report: dir.join(format!("{stem}.report.json")),
    };
    let (count, dim) = (exp.scenario.num_agents, exp.scenario.dim);
    write_trajectory_csv(&files.trajectory, &out.trajectory, count, dim)?;
    let mut sidecar = Sidecar::for_trajectory(&out.trajectory, count, dim);
    sidecar.scenario = serde_json::to_value(&exp.scenario)?;
    sidecar.schedule = serde_json::to_value(&exp.system.schedule)?;
    sidecar.bound_fit = Some(out.report.bound_fit);
    write_json(&files.sidecar, &sidecar)?;
    write_json(&files.report, &out.report)?;
    Ok(files)
}

/// Standing assumptions of the convergence result, checked for one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub realization_psi: f64,
    pub rigidity: RankReport,
    pub dither: PropertyReport,
    pub frame_orthonormality_defect: f64,
    pub passed: bool,
}

pub fn check_hypotheses(exp: &Experiment) -> HypothesisReport {
    let realization_psi = psi_global(&exp.system.spec, exp.realization.positions());
    let dither = crate::dither::verify_properties(&exp.system.shape, &GridSpec::default());
    let defect = exp.system.frames.orthonormality_defect();
    HypothesisReport {
        realization_psi,
        passed: exp.rank.is_inf_rigid
            && dither.all_passed
            && realization_psi <= REALIZATION_TOLERANCE
            && defect < 1e-12,
        rigidity: exp.rank,
        dither,
        frame_orthonormality_defect: defect,
    }
}

/// Parameter grid; every combination of the listed values is one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub omegas: Vec<f64>,
    /// Multiples of the scenario's step (or of its default step).
    pub dt_factors: Vec<f64>,
    /// Number of uniformly random phase tables; zero keeps the scenario's phases.
    pub phase_draws: usize,
    /// Number of random frame sets; zero keeps the scenario's frames.
    pub frame_draws: usize,
    pub seed: u64,
    pub law: Law,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            omegas: vec![7.0],
            dt_factors: vec![1.0],
            phase_draws: 0,
            frame_draws: 0,
            seed: 0,
            law: Law::Dither,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub omega: f64,
    pub dt_factor: f64,
    pub phase_draw: Option<usize>,
    pub frame_draw: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: SweepCell,
    pub dt: f64,
    pub converged: bool,
    pub psi_final: f64,
    pub psi_min: f64,
    pub max_edge_error: f64,
    pub c_hat: f64,
    pub runtime_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SweepGrid {
    pub fn cells(&self) -> Vec<SweepCell> {
        let draws = |k: usize| if k == 0 { vec![None] } else { (0..k).map(Some).collect() };
        let mut out = Vec::new();
        for &omega in &self.omegas {
            for &dt_factor in &self.dt_factors {
                for phase_draw in draws(self.phase_draws) {
                    for frame_draw in draws(self.frame_draws) {
                        out.push(SweepCell { omega, dt_factor, phase_draw, frame_draw });
                    }
                }
            }
        }
        out
    }
}

/// Uniform phases in `[0, 2 pi)`, one independent stream per draw.
pub fn random_phases(seed: u64, draw: usize, slots: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(draw as u64);
    (0..slots).map(|_| rng.random_range(0.0..TAU)).collect()
}

fn run_cell(base: &Scenario, grid: &SweepGrid, cell: SweepCell) -> Result<(f64, RunReport, f64)> {
    let slots = base.num_agents * base.dim;
    let mut o = Overrides { omega: Some(cell.omega), ..Default::default() };
    if let Some(d) = cell.phase_draw {
        o.phases = Some(random_phases(grid.seed, d, slots));
    }
    if let Some(d) = cell.frame_draw {
        o.frames = Some(FrameSpec::Random { seed: grid.seed.wrapping_add(1 + d as u64) });
    }
    let mut scenario = base.with_overrides(&o);
    let exp = Experiment::from_scenario(scenario.clone())?;
    scenario.dt = Some(exp.dt * cell.dt_factor);
    let exp = Experiment::from_scenario(scenario)?;
    let out = run(&exp, &RunOptions { law: grid.law, record_every: 1, averaging: None })?;
    Ok((exp.dt, out.report, out.elapsed_seconds))
}

/// Runs every cell of the grid in parallel; results come back in grid order.
pub fn sweep(base: &Scenario, grid: &SweepGrid) -> Result<Vec<CellResult>> {
    let cells = grid.cells();
    if cells.is_empty() {
        return Err(Error::InvalidArgument("sweep grid is empty".into()));
    }
    Ok(cells
        .into_par_iter()
        .map(|cell| match run_cell(base, grid, cell) {
            Ok((dt, r, secs)) => CellResult {
                cell,
                dt,
                converged: r.converged,
                psi_final: r.psi_final,
                psi_min: r.psi_min,
                max_edge_error: r.max_edge_error,
                c_hat: r.bound_fit.c_hat,
                runtime_seconds: secs,
                error: None,
            },
            Err(e) => CellResult {
                cell,
                dt: f64::NAN,
                converged: false,
                psi_final: f64::NAN,
                psi_min: f64::NAN,
                max_edge_error: f64::NAN,
                c_hat: f64::NAN,
                runtime_seconds: 0.0,
                error: Some(e.to_string()),
            },
        })
        .collect())
}
