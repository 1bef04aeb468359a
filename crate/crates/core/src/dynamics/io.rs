//! Trajectory CSV files and their JSON metadata sidecars.
//!
//! Columns are `t, p_1_1 .. p_N_n, psi, psi_1 .. psi_N` (agent and axis
//! indices 1-based). Numbers use Rust's shortest round-trip formatting, so a
//! written file reads back bit-identically and never depends on locale.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::integrate::{BoundFit, Trajectory, TrajectoryMeta};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const SIDECAR_VERSION: u32 = 1;

/// Metadata written next to every trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format_version: u32,
    pub code_version: String,
    pub num_agents: usize,
    pub dim: usize,
    pub law: String,
    pub t0: f64,
    pub t_final: f64,
    /// Integrator step.
    pub dt: f64,
    pub record_every: usize,
    pub seed: u64,
    pub scenario: serde_json::Value,
    pub schedule: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_fit: Option<BoundFit>,
}

impl Sidecar {
    pub fn for_trajectory<T: Scalar>(traj: &Trajectory<T>, num_agents: usize, dim: usize) -> Self {
        Sidecar {
            format_version: SIDECAR_VERSION,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            num_agents,
            dim,
            law: traj.meta.law.clone(),
            t0: traj.t0.as_f64(),
            t_final: traj.t_final().as_f64(),
            dt: traj.meta.step,
            record_every: traj.meta.record_every,
            seed: traj.meta.seed,
            scenario: serde_json::Value::Null,
            schedule: serde_json::Value::Null,
            bound_fit: None,
        }
    }
}

pub fn csv_header(num_agents: usize, dim: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for i in 1..=num_agents {
        for k in 1..=dim {
            cols.push(format!("p_{i}_{k}"));
        }
    }
    cols.push("psi".into());
    cols.extend((1..=num_agents).map(|i| format!("psi_{i}")));
    cols
}

pub fn write_trajectory_csv<T: Scalar>(path: &Path, traj: &Trajectory<T>, num_agents: usize, dim: usize) -> Result<()> {
    if traj.states.first().map_or(0, Vec::len) != num_agents * dim {
        return Err(Error::Dimension(format!("states do not have {num_agents} x {dim} entries")));
    }
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(csv_header(num_agents, dim))?;
    let mut row: Vec<String> = Vec::with_capacity(2 + num_agents * (dim + 1));
    for j in 0..traj.len() {
        row.clear();
        row.push(traj.time(j).as_f64().to_string());
        row.extend(traj.states[j].iter().map(|x| x.as_f64().to_string()));
        row.push(traj.psi[j].as_f64().to_string());
        row.extend(traj.psi_local[j].iter().map(|x| x.as_f64().to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// A trajectory read back from CSV, with the shape recovered from its header.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedTrajectory {
    pub num_agents: usize,
    pub dim: usize,
    pub times: Vec<f64>,
    pub trajectory: Trajectory<f64>,
}

fn parse_header(path: &Path, header: &csv::StringRecord) -> Result<(usize, usize)> {
    let bad = |msg: &str| Error::scenario(path.display().to_string(), msg);
    let agents = header.iter().filter(|c| c.starts_with("psi_")).count();
    if agents == 0 || header.get(0) != Some("t") {
        return Err(bad("missing `t` or `psi_i` columns"));
    }
    let positions = header.len().checked_sub(2 + agents).ok_or_else(|| bad("too few columns"))?;
    if positions % agents != 0 || positions == 0 {
        return Err(bad("position columns do not match the agent count"));
    }
    let dim = positions / agents;
    let expected = csv_header(agents, dim);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(bad("unexpected column names"));
    }
    Ok((agents, dim))
}

pub fn read_trajectory_csv(path: &Path) -> Result<LoadedTrajectory> {
    let mut r = csv::Reader::from_path(path)?;
    let (agents, dim) = parse_header(path, r.headers()?)?;
    let (mut times, mut states, mut psi, mut psi_local) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::scenario(path.display().to_string(), format!("row {}: {e}", line + 1)))?;
        times.push(vals[0]);
        states.push(vals[1..1 + agents * dim].to_vec());
        psi.push(vals[1 + agents * dim]);
        psi_local.push(vals[2 + agents * dim..].to_vec());
    }
    if times.is_empty() {
        return Err(Error::scenario(path.display().to_string(), "no rows"));
    }
    let dt = if times.len() > 1 { (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64 } else { 0.0 };
    let trajectory = Trajectory { t0: times[0], dt, states, psi, psi_local, meta: TrajectoryMeta::default() };
    Ok(LoadedTrajectory { num_agents: agents, dim, times, trajectory })
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trajectory<f64> {
        Trajectory {
            t0: 0.5,
            dt: 0.25,
            states: vec![vec![0.1, 1.0 / 3.0, -2.0, 4.5], vec![0.2, 0.3, -1e-17, 7.0]],
            psi: vec![3.25, 0.125],
            psi_local: vec![vec![1.0, 2.0], vec![0.1, 0.2]],
            meta: TrajectoryMeta { law: "dither".into(), step: 0.25, record_every: 1, ..Default::default() },
        }
    }

    #[test]
    fn header_layout() {
        assert_eq!(csv_header(2, 2), ["t", "p_1_1", "p_1_2", "p_2_1", "p_2_2", "psi", "psi_1", "psi_2"]);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        let traj = sample();
        write_trajectory_csv(&path, &traj, 2, 2).unwrap();
        let back = read_trajectory_csv(&path).unwrap();
        assert_eq!((back.num_agents, back.dim), (2, 2));
        assert_eq!(back.times, vec![0.5, 0.75]);
        assert_eq!(back.trajectory.states, traj.states);
        assert_eq!(back.trajectory.psi, traj.psi);
        assert_eq!(back.trajectory.psi_local, traj.psi_local);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(write_trajectory_csv(&dir.path().join("x.csv"), &sample(), 3, 2).is_err());
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "t,p_1_1,psi,psi_1,psi_2\n0,1,2,3,4\n").unwrap();
        assert!(read_trajectory_csv(&path).is_err());
    }

    #[test]
    fn sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("meta.json");
        let mut meta = Sidecar::for_trajectory(&sample(), 2, 2);
        meta.scenario = serde_json::json!({"name": "pair"});
        write_json(&path, &meta).unwrap();
        assert_eq!(read_sidecar(&path).unwrap(), meta);
        assert_eq!(meta.t_final, 0.75);
    }
}
