use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::{RunOutcome, RunRecord, RunRow, StopReason};
use super::Actuator;
use crate::error::{Error, Result};
use crate::fem::extract_objective;
use crate::regularization::GaussField;
use crate::sensitivity::Evaluation;
use crate::shape::GAUSS_POINTS;
use crate::vtk::UnstructuredGrid;

/// File name of the checkpoint written at iteration k.
pub fn checkpoint_name(k: usize) -> String {
    format!("iter_{k:04}.vtk")
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    Ok(())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    }
}

/// CSV with one row per design iteration; an empty record gives the header
/// line only.
pub fn write_history(record: &RunRecord, path: &Path) -> Result<()> {
    create_parent(path)?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    w.write_record(RunRow::HEADER).map_err(|e| csv_error(path, e))?;
    for row in &record.rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub stop: StopReason,
    pub iterations: usize,
    /// Output displacement (mm).
    pub g0: f64,
    pub g0_hat: f64,
    pub g0_bar: f64,
    pub g1: f64,
    pub g2: f64,
    pub v1: f64,
    pub v2: f64,
    pub design_volume: f64,
    pub beta: f64,
    /// Largest |φ| on the far-field boundary relative to φ_p.
    pub far_field_potential_ratio: f64,
    /// Share of design Gauss points with 0.05 < ρ̄1 < 0.95.
    pub intermediate_fraction: f64,
    pub wall_time_s: f64,
}

impl RunSummary {
    pub fn from_outcome(out: &RunOutcome, phi_p: f64) -> Result<Self> {
        let e = &out.last;
        let last = out.record.rows.last().ok_or_else(|| Error::Config("empty run record".into()))?;
        Ok(RunSummary {
            stop: out.stop,
            iterations: out.record.rows.len(),
            g0: e.g0,
            g0_hat: e.g0_hat,
            g0_bar: e.g0_bar,
            g1: e.volumes.g1,
            g2: e.volumes.g2,
            v1: e.volumes.v1,
            v2: e.volumes.v2,
            design_volume: out.actuator.filter.design_volume(),
            beta: out.params.projection.beta,
            far_field_potential_ratio: far_field_ratio(&out.actuator, e, phi_p)?,
            intermediate_fraction: intermediate_fraction(&e.design.rho1.bar),
            wall_time_s: last.wall_time_s,
        })
    }
}

pub fn far_field_ratio(act: &Actuator, eval: &Evaluation, phi_p: f64) -> Result<f64> {
    let set = act.mesh.dof_set(crate::mesh::FAR_FIELD)?;
    let l: Vec<_> = set
        .iter()
        .filter(|(_, d)| *d == crate::mesh::Dof::Potential)
        .map(|&(n, d)| (n, d, 1.0))
        .collect();
    let max = l
        .iter()
        .map(|e| extract_objective(&act.problem, &eval.state, std::slice::from_ref(e)).abs())
        .fold(0.0, f64::max);
    Ok(if phi_p == 0.0 { max } else { max / phi_p.abs() })
}

pub fn intermediate_fraction(bar: &GaussField) -> f64 {
    let total = bar.len() * GAUSS_POINTS;
    let mid = bar.iter().flatten().filter(|&&r| r > 0.05 && r < 0.95).count();
    mid as f64 / total.max(1) as f64
}

pub fn write_summary(summary: &RunSummary, path: &Path) -> Result<()> {
    create_parent(path)?;
    let text = toml::to_string(summary).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// VTK of the design and state: cell arrays `rho1_bar`, `rho2_bar`
/// (Gauss point means, 0 in free space), `region`, `E_magnitude`; point
/// arrays `potential`, `displacement`.
pub fn write_vtk(act: &Actuator, eval: &Evaluation, path: &Path, deformed: bool) -> Result<()> {
    create_parent(path)?;
    let mesh = &act.mesh;
    let (u, phi) = act.problem.nodal_fields(&eval.state.values);
    let mut grid = UnstructuredGrid::from_mesh(mesh, deformed.then_some(u.as_slice()));
    let ne = mesh.elements.len();
    let mut r1 = vec![0.0; ne];
    let mut r2 = vec![0.0; ne];
    let mut region = vec![0.0; ne];
    for (k, &e) in mesh.design_element_ids.iter().enumerate() {
        r1[e] = eval.design.rho1.bar[k].iter().sum::<f64>() / GAUSS_POINTS as f64;
        r2[e] = eval.design.rho2.bar[k].iter().sum::<f64>() / GAUSS_POINTS as f64;
        region[e] = 1.0;
    }
    let emag = act.problem.field_magnitude(&eval.state.values)?;
    grid.cell_scalars("rho1_bar", r1)
        .cell_scalars("rho2_bar", r2)
        .cell_scalars("region", region)
        .cell_scalars("E_magnitude", emag)
        .point_scalars("potential", phi)
        .point_vectors("displacement", u);
    grid.write(path)
}

/// Writes `design.vtk`, `design_deformed.vtk`, `history.csv` and
/// `summary.toml` into `dir`.
pub fn emit_outputs(out: &RunOutcome, phi_p: f64, dir: &Path) -> Result<RunSummary> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_vtk(&out.actuator, &out.last, &dir.join("design.vtk"), false)?;
    write_vtk(&out.actuator, &out.last, &dir.join("design_deformed.vtk"), true)?;
    write_history(&out.record, &dir.join("history.csv"))?;
    let summary = RunSummary::from_outcome(out, phi_p)?;
    write_summary(&summary, &dir.join("summary.toml"))?;
    Ok(summary)
}
