//! `formlab`: run, check and sweep distance-only formation experiments.
//!
//! Exit status is 0 when every requested check passes, 1 when a check fails
//! and 2 on usage or input errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use formation_core::dither::{verify_properties, GridSpec};
use formation_core::dynamics::io::{write_json, write_trajectory_csv, Sidecar};
use formation_core::dynamics::{bound_fit, Law, LieMethod, BOUND_FLOOR};
use formation_core::esc::{DemoOutput, EscDemo, DEMO_HORIZON};
use formation_core::rigidity::{is_infinitesimally_rigid, Framework, DEFAULT_RANK_TOL};
use formation_core::scenarios::{
    self, AveragingRequest, Experiment, Overrides, RunOptions, ShapeSpec, SweepGrid, PRESETS,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "formlab", version, about = "Distance-only formation control by extremum seeking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one scenario and write its trajectory and report.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Keep every k-th step in the trajectory file.
        #[arg(long, default_value_t = 1)]
        record_every: usize,
        /// Fail unless all edges end within tolerance and psi(T) is small.
        #[arg(long)]
        expect_convergence: bool,
    },
    /// Rank test of the target realization (and of the initial positions).
    Rigidity {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        tolerance: f64,
    },
    /// Check the dither shape functions on a log-spaced grid.
    VerifyDither {
        #[command(flatten)]
        common: Common,
        /// Override the scenario's amplitude.
        #[arg(long, value_enum)]
        amplitude: Option<AmplitudeArg>,
        /// Exponent for `--amplitude power`.
        #[arg(long, default_value_t = 0.5)]
        exponent: f64,
        #[arg(long, default_value_t = GridSpec::default().y_min)]
        y_min: f64,
        #[arg(long, default_value_t = GridSpec::default().y_max)]
        y_max: f64,
        #[arg(long, default_value_t = GridSpec::default().points)]
        points: usize,
    },
    /// Evaluate the averaging decomposition along a dithered trajectory.
    VerifyAveraging {
        #[command(flatten)]
        common: Common,
        /// End of the checked window (the run stops here unless --t-final is given).
        #[arg(long, default_value_t = 5.0)]
        t_end: f64,
        /// Re-integrate each sample interval with this many substeps.
        #[arg(long, default_value_t = 1)]
        refinement: usize,
        #[arg(long, value_enum, default_value_t = MethodArg::ClosedForm)]
        method: MethodArg,
        /// Step of the nested central differences for `--method finite-difference`.
        #[arg(long, default_value_t = 1e-4)]
        fd_eps: f64,
        /// Pass when the residual stays below this fraction of psi(t0).
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
    },
    /// Run a grid of frequencies, step factors and random phase or frame draws.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated base frequencies; defaults to the scenario's.
        #[arg(long, value_delimiter = ',')]
        omegas: Vec<f64>,
        /// Comma-separated multiples of the default step.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        dt_factors: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        phase_draws: usize,
        #[arg(long, default_value_t = 0)]
        frame_draws: usize,
        /// Fail unless every cell converges.
        #[arg(long)]
        expect_convergence: bool,
    },
    /// Output-only extremum seeking on a two-dimensional single integrator.
    EscDemo {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = OutputArg::Quadratic)]
        output: OutputArg,
        #[arg(long, default_value_t = 1000)]
        record_every: usize,
        /// Pass when |p(T)| ends below this.
        #[arg(long, default_value_t = 1e-2)]
        tolerance: f64,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file or preset name (rectangle, double-tetrahedron).
    #[arg(long, default_value = "rectangle")]
    scenario: String,
    #[arg(long, value_enum)]
    law: Option<LawArg>,
    /// Base dither frequency; agent i, axis k gets omega ((i-1) n + k).
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for output files; without it the report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also check rigidity, dither properties and frame orthonormality.
    #[arg(long)]
    check_hypotheses: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum LawArg {
    Dither,
    LieBracket,
    Gradient,
}

impl From<LawArg> for Law {
    fn from(l: LawArg) -> Law {
        match l {
            LawArg::Dither => Law::Dither,
            LawArg::LieBracket => Law::LieBracket,
            LawArg::Gradient => Law::Gradient,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AmplitudeArg {
    Tanh,
    Rational,
    Power,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    ClosedForm,
    FiniteDifference,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputArg {
    Quadratic,
    Quartic,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { omega: self.omega, t_final: self.t_final, dt: self.dt, seed: self.seed, ..Default::default() }
    }

    fn experiment(&self) -> Result<Experiment> {
        let base = scenarios::read_scenario(&self.scenario)
            .with_context(|| format!("loading scenario `{}` (presets: {})", self.scenario, PRESETS.join(", ")))?;
        Ok(Experiment::from_scenario(base.with_overrides(&self.overrides()))?)
    }

    fn law(&self) -> Law {
        self.law.map(Law::from).unwrap_or(Law::Dither)
    }

    /// Adds the hypothesis check to `report` when requested; returns whether it passed.
    fn hypotheses(&self, exp: &Experiment, report: &mut serde_json::Value) -> bool {
        if !self.check_hypotheses {
            return true;
        }
        let h = scenarios::check_hypotheses(exp);
        println!(
            "hypotheses: {} (rank {}/{}, dither properties {}, realization psi {:.1e})",
            verdict(h.passed),
            h.rigidity.rank_g,
            h.rigidity.required_rank,
            verdict(h.dither.all_passed),
            h.realization_psi
        );
        report["hypotheses"] = json!(h);
        h.passed
    }

    fn emit(&self, name: &str, report: &serde_json::Value) -> Result<()> {
        match &self.out {
            Some(dir) => {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let path = dir.join(format!("{name}.report.json"));
                write_json(&path, report)?;
                println!("report: {}", path.display());
            }
            None => println!("{}", serde_json::to_string_pretty(report)?),
        }
        Ok(())
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn simulate(common: &Common, record_every: usize, expect_convergence: bool) -> Result<bool> {
    let exp = common.experiment()?;
    let law = common.law();
    let out = scenarios::run(&exp, &RunOptions { law, record_every, averaging: None })?;
    let r = &out.report;
    println!(
        "{} law={} omega={} T={} dt={:.3e}: psi {:.4e} -> {:.4e}, max edge error {:.3}%, converged={} ({:.2}s)",
        r.scenario,
        law.as_str(),
        r.omega.map_or("-".into(), |w| w.to_string()),
        r.t_final,
        r.dt,
        r.psi_initial,
        r.psi_final,
        100.0 * r.max_edge_error,
        r.converged,
        out.elapsed_seconds
    );
    let mut report = json!({ "command": "simulate", "run": r, "elapsed_seconds": out.elapsed_seconds });
    let mut ok = common.hypotheses(&exp, &mut report);
    if expect_convergence {
        println!("convergence: {}", verdict(r.converged));
        ok &= r.converged;
    }
    report["passed"] = json!(ok);
    if let Some(dir) = &common.out {
        let files = scenarios::write_run(dir, &exp.scenario.name, &exp, &out)?;
        println!("trajectory: {}\nsidecar: {}", files.trajectory.display(), files.sidecar.display());
    }
    common.emit(&format!("{}.simulate", exp.scenario.name), &report)?;
    Ok(ok)
}

fn rigidity(common: &Common, tolerance: f64) -> Result<bool> {
    let exp = common.experiment()?;
    let target = is_infinitesimally_rigid(&exp.realization, tolerance)?;
    let start = Framework::new(exp.system.spec.graph().clone(), exp.scenario.dim, exp.initial.clone())?;
    let initial = is_infinitesimally_rigid(&start, tolerance)?;
    println!(
        "{}: realization rank {} of required {} -> {}; initial positions rank {}",
        exp.scenario.name,
        target.rank_g,
        target.required_rank,
        if target.is_inf_rigid { "infinitesimally rigid" } else { "NOT infinitesimally rigid" },
        initial.rank_g
    );
    let mut report =
        json!({ "command": "rigidity", "scenario": exp.scenario.name, "realization": target, "initial": initial });
    let ok = common.hypotheses(&exp, &mut report) & target.is_inf_rigid;
    report["passed"] = json!(ok);
    common.emit(&format!("{}.rigidity", exp.scenario.name), &report)?;
    Ok(ok)
}

fn verify_dither(common: &Common, amplitude: Option<AmplitudeArg>, exponent: f64, grid: GridSpec) -> Result<bool> {
    let shape = match amplitude {
        Some(AmplitudeArg::Tanh) => ShapeSpec::Tanh,
        Some(AmplitudeArg::Rational) => ShapeSpec::Rational,
        Some(AmplitudeArg::Power) => ShapeSpec::Power { exponent },
        None => scenarios::read_scenario(&common.scenario)?.shape,
    };
    if !(grid.y_min > 0.0 && grid.y_max > grid.y_min && grid.points >= 2) {
        bail!("grid needs 0 < y_min < y_max and at least two points");
    }
    let props = verify_properties(&shape.build(), &grid);
    let checks = [
        ("zero on y <= 0", &props.p1_zero_on_nonpositive),
        ("bounded derivatives", &props.p2_bounded),
        ("h(y)/y bounded near 0", &props.p3_ratio_bounded),
        ("h'(y) bounded near 0", &props.p4_derivative_bounded),
        ("h''(y) y bounded near 0", &props.p5_curvature_bounded),
        ("bracket <= -c y", &props.p6_bracket_negative),
    ];
    println!("{}", props.shape);
    for (name, c) in checks {
        println!("  {} {name} (witness {:.4e})", verdict(c.passed), c.witness);
    }
    let report = json!({ "command": "verify-dither", "properties": props, "passed": props.all_passed });
    common.emit("verify-dither", &report)?;
    Ok(props.all_passed)
}

fn verify_averaging(common: &Common, req: AveragingRequest, tolerance: f64) -> Result<bool> {
    let mut common = common.clone();
    common.t_final = common.t_final.or(Some(req.t_end));
    let exp = common.experiment()?;
    if common.law() != Law::Dither {
        bail!("the averaging check needs the dither law");
    }
    let out = scenarios::run(&exp, &RunOptions { law: Law::Dither, record_every: 1, averaging: Some(req) })?;
    let a = out.report.averaging.as_ref().expect("averaging was requested");
    let ok_residual = a.relative_residual < tolerance && a.shape_fits_finite();
    println!(
        "window [{}, {}] over {} points: max residual {:.3e} ({:.2e} of psi(t0), tolerance {tolerance:.0e}) -> {}",
        a.t0,
        a.t1,
        a.points,
        a.max_residual,
        a.relative_residual,
        verdict(ok_residual)
    );
    println!(
        "  |D1| <= {:.3e} ({:.3e}/sqrt(omega)), |int D2| <= {:.3e} ({:.3e}/sqrt(omega)), bracket consistency {:.1e}",
        a.max_abs_d1, a.c1_fit, a.max_abs_d2, a.c2_fit, a.bracket_consistency
    );
    let mut report =
        json!({ "command": "verify-averaging", "scenario": exp.scenario.name, "averaging": a, "tolerance": tolerance });
    let ok = common.hypotheses(&exp, &mut report) & ok_residual;
    report["passed"] = json!(ok);
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.averaging.csv", exp.scenario.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["t", "residual"])?;
        for (t, r) in a.times.iter().zip(&a.residuals) {
            w.write_record([t.to_string(), r.to_string()])?;
        }
        w.flush()?;
        println!("residuals: {}", path.display());
    }
    common.emit(&format!("{}.averaging", exp.scenario.name), &report)?;
    Ok(ok)
}

fn sweep(common: &Common, grid: SweepGrid, expect_convergence: bool) -> Result<bool> {
    let base = scenarios::read_scenario(&common.scenario)?.with_overrides(&common.overrides());
    let exp = Experiment::from_scenario(base.clone())?;
    let mut grid = grid;
    if grid.omegas.is_empty() {
        grid.omegas = vec![exp.omega().context("scenario has an explicit frequency table; pass --omegas")?];
    }
    let rows = scenarios::sweep(&base, &grid)?;
    println!(
        "{:>8} {:>8} {:>6} {:>6} {:>10} {:>11} {:>11} {:>10}",
        "omega", "dt", "phase", "frame", "converged", "psi(T)", "edge err", "c_hat"
    );
    let draw = |d: Option<usize>| d.map_or("-".into(), |d| d.to_string());
    for r in &rows {
        match &r.error {
            Some(e) => println!(
                "{:>8} {:>8} {:>6} {:>6} error: {e}",
                r.cell.omega,
                r.cell.dt_factor,
                draw(r.cell.phase_draw),
                draw(r.cell.frame_draw)
            ),
            None => println!(
                "{:>8} {:>8.2e} {:>6} {:>6} {:>10} {:>11.3e} {:>10.3}% {:>10.3e}",
                r.cell.omega,
                r.dt,
                draw(r.cell.phase_draw),
                draw(r.cell.frame_draw),
                r.converged,
                r.psi_final,
                100.0 * r.max_edge_error,
                r.c_hat
            ),
        }
    }
    let errors = rows.iter().filter(|r| r.error.is_some()).count();
    let converged = rows.iter().filter(|r| r.converged).count();
    println!("{converged} of {} cells converged, {errors} failed to run", rows.len());
    let mut report = json!({ "command": "sweep", "scenario": base.name, "grid": grid, "cells": rows });
    let mut ok = common.hypotheses(&exp, &mut report) && errors == 0;
    if expect_convergence {
        ok &= converged == rows.len();
    }
    report["passed"] = json!(ok);
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.sweep.csv", base.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record([
            "omega",
            "dt_factor",
            "phase_draw",
            "frame_draw",
            "dt",
            "converged",
            "psi_final",
            "psi_min",
            "max_edge_error",
            "c_hat",
            "runtime_seconds",
            "error",
        ])?;
        for r in &rows {
            w.write_record([
                r.cell.omega.to_string(),
                r.cell.dt_factor.to_string(),
                r.cell.phase_draw.map_or(String::new(), |d| d.to_string()),
                r.cell.frame_draw.map_or(String::new(), |d| d.to_string()),
                r.dt.to_string(),
                r.converged.to_string(),
                r.psi_final.to_string(),
                r.psi_min.to_string(),
                r.max_edge_error.to_string(),
                r.c_hat.to_string(),
                r.runtime_seconds.to_string(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        println!("table: {}", path.display());
    }
    common.emit(&format!("{}.sweep", base.name), &report)?;
    Ok(ok)
}

fn esc_demo(common: &Common, output: OutputArg, record_every: usize, tolerance: f64) -> Result<bool> {
    let mut demo = EscDemo {
        output: match output {
            OutputArg::Quadratic => DemoOutput::Quadratic,
            OutputArg::Quartic => DemoOutput::Quartic,
        },
        t_final: common.t_final.unwrap_or(DEMO_HORIZON),
        dt: common.dt,
        record_every: record_every.max(1),
        ..Default::default()
    };
    if let Some(w) = common.omega {
        demo.frequencies = vec![w, 2.0 * w];
    }
    let traj = demo.run()?;
    let end = traj.final_state();
    let norm = end.iter().map(|x| x * x).sum::<f64>().sqrt();
    let fit = bound_fit(&traj, BOUND_FLOOR);
    let ok = norm < tolerance;
    println!(
        "esc-demo frequencies={:?} T={} dt={:.3e}: |p(T)| = {norm:.4e} (tolerance {tolerance:.0e}) -> {}",
        demo.frequencies,
        demo.t_final,
        demo.step(),
        verdict(ok)
    );
    let report = json!({
        "command": "esc-demo",
        "frequencies": demo.frequencies,
        "p0": demo.p0,
        "t_final": demo.t_final,
        "dt": demo.step(),
        "final_state": end,
        "final_norm": norm,
        "output_initial": traj.psi[0],
        "output_final": traj.psi.last(),
        "bound_fit": fit,
        "tolerance": tolerance,
        "passed": ok,
    });
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join("esc-demo.csv");
        write_trajectory_csv(&csv_path, &traj, 1, demo.p0.len())?;
        let mut sidecar = Sidecar::for_trajectory(&traj, 1, demo.p0.len());
        sidecar.bound_fit = Some(fit);
        write_json(&dir.join("esc-demo.json"), &sidecar)?;
        println!("trajectory: {}", csv_path.display());
    }
    common.emit("esc-demo", &report)?;
    Ok(ok)
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate { common, record_every, expect_convergence } => {
            simulate(&common, record_every, expect_convergence)
        }
        Command::Rigidity { common, tolerance } => rigidity(&common, tolerance),
        Command::VerifyDither { common, amplitude, exponent, y_min, y_max, points } => {
            verify_dither(&common, amplitude, exponent, GridSpec { y_min, y_max, points })
        }
        Command::VerifyAveraging { common, t_end, refinement, method, fd_eps, tolerance } => {
            let method = match method {
                MethodArg::ClosedForm => LieMethod::ClosedForm,
                MethodArg::FiniteDifference => LieMethod::FiniteDifference { eps: fd_eps },
            };
            verify_averaging(&common, AveragingRequest { t_end, refinement, method }, tolerance)
        }
        Command::Sweep { common, omegas, dt_factors, phase_draws, frame_draws, expect_convergence } => {
            let grid = SweepGrid {
                omegas,
                dt_factors,
                phase_draws,
                frame_draws,
                seed: common.seed.unwrap_or(0),
                law: common.law(),
            };
            sweep(&common, grid, expect_convergence)
        }
        Command::EscDemo { common, output, record_every, tolerance } => {
            esc_demo(&common, output, record_every, tolerance)
        }
    }
}

fn main() -> ExitCode {
    // die quietly when piped into `head` instead of panicking on EPIPE
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
