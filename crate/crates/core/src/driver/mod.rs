//! The optimization loop for the clamped two-source actuator: configuration,
//! continuation schedules, convergence, checkpoints and output files.

mod output;
mod run;
mod schedule;

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use output::{checkpoint_name, emit_outputs, write_history, write_summary, write_vtk, RunSummary};
pub use run::{run, RunOptions, RunOutcome, RunRecord, RunRow, StopReason};
pub use schedule::OptimizationSchedule;

use crate::error::{Error, Result};
use crate::fem::{BoundaryConditions, ObjectiveVector, SolverOptions, StateProblem};
use crate::material::PhaseTriplet;
use crate::mesh::{build_mesh, Dof, Mesh, MeshSpec, FAR_FIELD};
use crate::mma::MmaParams;
use crate::regularization::{build_filter, FilterOperator};
use crate::sensitivity::VolumeFractions;

/// Component of the output-port displacement that is optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Vertical,
    Horizontal,
}

impl Direction {
    pub fn dof(self) -> Dof {
        match self {
            Direction::Vertical => Dof::Uy,
            Direction::Horizontal => Dof::Ux,
        }
    }
}

/// Run configuration; every field has a default, so a config file only
/// lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub mesh: MeshSpec,
    pub materials: PhaseTriplet,
    /// Source potential magnitude (V): +φ_p on the upper patch, −φ_p on the lower.
    pub phi_p: f64,
    /// Output spring stiffness (N/mm); 1e-3·thickness·G_EAP when absent.
    pub spring_stiffness: Option<f64>,
    pub direction: Direction,
    pub volume_fractions: VolumeFractions,
    /// Helmholtz filter length (mm).
    pub filter_length: f64,
    /// Height of each initial electrode strip as a fraction of the design height.
    pub electrode_strip_height: f64,
    /// Length of each source patch as a fraction of the left edge.
    pub source_patch_length: f64,
    /// Deformation-independent electric term in the void phase.
    pub stabilized_electric: bool,
    pub schedule: OptimizationSchedule,
    pub solver: SolverOptions,
    pub mma: MmaParams,
    pub max_iters: usize,
    /// 0 disables checkpoints.
    pub checkpoint_every: usize,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            mesh: MeshSpec::default(),
            materials: PhaseTriplet::default(),
            phi_p: 3000.0,
            spring_stiffness: None,
            direction: Direction::Vertical,
            volume_fractions: VolumeFractions::default(),
            filter_length: 0.25,
            electrode_strip_height: 0.1,
            source_patch_length: 0.05,
            stabilized_electric: true,
            schedule: OptimizationSchedule::default(),
            solver: SolverOptions::default(),
            mma: MmaParams::default(),
            max_iters: 1000,
            checkpoint_every: 10,
        }
    }
}

impl ProblemConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: ProblemConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.mesh.validate()?;
        if self.mesh.freespace_extent_factor <= 1.0 {
            return Err(Error::Config(
                "the actuator needs a free-space region (freespace_extent_factor > 1)".into(),
            ));
        }
        self.materials.validate()?;
        self.volume_fractions.validate()?;
        self.schedule.validate()?;
        self.solver.validate()?;
        self.mma.validate()?;
        if !self.phi_p.is_finite() {
            return Err(Error::Config("phi_p must be finite".into()));
        }
        if let Some(k) = self.spring_stiffness {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(Error::Config("spring_stiffness must be >= 0".into()));
            }
        }
        if !(self.filter_length >= 0.0 && self.filter_length.is_finite()) {
            return Err(Error::Config("filter_length must be >= 0".into()));
        }
        for (name, v) in [
            ("electrode_strip_height", self.electrode_strip_height),
            ("source_patch_length", self.source_patch_length),
        ] {
            if !(v > 0.0 && v < 0.5) {
                return Err(Error::Config(format!("{name} must lie in (0, 0.5)")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }

    pub fn spring(&self) -> f64 {
        self.spring_stiffness
            .unwrap_or(1e-3 * self.mesh.thickness * self.materials.eap.shear)
    }
}

/// Mesh, boundary conditions, objective vector and initial design of the
/// actuator.
pub struct Actuator {
    pub mesh: Arc<Mesh>,
    pub problem: StateProblem,
    pub filter: FilterOperator,
    pub objective: ObjectiveVector,
    pub rho1_init: Vec<f64>,
    pub rho2_init: Vec<f64>,
}

/// Source patches on the upper and lower left edge at ±φ_p, clamped; output
/// port at mid-height of the right edge with a grounded spring; far field
/// at zero potential and displacement.
pub fn build_actuator(config: &ProblemConfig) -> Result<Actuator> {
    config.validate()?;
    let mut mesh = build_mesh(&config.mesh)?;
    let ([x0, y0], [x1, y1]) = mesh.design_bounds();
    let h = y1 - y0;
    let tol = 1e-9 * h;
    let patch = config.source_patch_length * h;
    let upper = move |x: &[f64; 3]| (x[0] - x0).abs() < tol && x[1] >= y1 - patch - tol && x[1] <= y1 + tol;
    let lower = move |x: &[f64; 3]| (x[0] - x0).abs() < tol && x[1] <= y0 + patch + tol && x[1] >= y0 - tol;
    mesh.tag_boundary("source_upper", |n, _| upper(&n.x))?;
    mesh.tag_boundary("source_lower", |n, _| lower(&n.x))?;

    let mid = 0.5 * (y0 + y1);
    let right: Vec<usize> = mesh
        .nodes
        .iter()
        .filter(|n| (n.x[0] - x1).abs() < tol && n.x[1] >= y0 - tol && n.x[1] <= y1 + tol)
        .map(|n| n.id)
        .collect();
    let closest = right
        .iter()
        .map(|&i| (mesh.nodes[i].x[1] - mid).abs())
        .fold(f64::INFINITY, f64::min);
    let dof = config.direction.dof();
    mesh.tag_boundary("output_port", |n, d| {
        d == dof && (n.x[0] - x1).abs() < tol && ((n.x[1] - mid).abs() - closest).abs() < tol
    })?;

    let mesh = Arc::new(mesh);
    let mut bc = BoundaryConditions::new();
    bc.prescribe_set(&mesh, FAR_FIELD, 0.0)?;
    for (set, sign) in [("source_upper", 1.0), ("source_lower", -1.0)] {
        for &(n, d) in mesh.dof_set(set)? {
            let v = if d == Dof::Potential { sign * config.phi_p } else { 0.0 };
            bc.prescribe(n, d, v);
        }
    }
    let port = mesh.dof_set("output_port")?;
    let w = 1.0 / port.len() as f64;
    let k = config.spring();
    let mut objective = Vec::with_capacity(port.len());
    for &(n, d) in port {
        bc.add_spring(n, d, k * w);
        objective.push((n, d, w));
    }
    let problem = StateProblem::new(mesh.clone(), bc, config.solver)?;
    let filter = build_filter(&mesh, config.filter_length)?;

    let strip = config.electrode_strip_height * h;
    let rho2_init = mesh
        .design_element_ids
        .iter()
        .map(|&e| {
            let c = mesh.element_coords(e);
            let yc = c.iter().map(|p| p[1]).sum::<f64>() / 8.0;
            if yc > y1 - strip || yc < y0 + strip {
                0.0
            } else {
                1.0
            }
        })
        .collect();
    Ok(Actuator {
        rho1_init: vec![1.0; mesh.n_design()],
        rho2_init,
        mesh,
        problem,
        filter,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ProblemConfig {
        ProblemConfig {
            mesh: MeshSpec {
                design_nx: 10,
                design_ny: 10,
                freespace_extent_factor: 2.0,
                ..MeshSpec::default()
            },
            source_patch_length: 0.1,
            ..ProblemConfig::default()
        }
    }

    #[test]
    fn config_round_trip_and_defaults() {
        let c = ProblemConfig::default();
        let text = c.to_toml_string().unwrap();
        assert_eq!(ProblemConfig::from_toml_str(&text).unwrap(), c);
        let partial = ProblemConfig::from_toml_str("phi_p = 0.0\n[mesh]\ndesign_nx = 8\n").unwrap();
        assert_eq!(partial.mesh.design_nx, 8);
        assert_eq!(partial.mesh.design_ny, 200);
        assert_eq!(partial.phi_p, 0.0);
        assert!((c.spring() - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn config_rejects_unknown_and_invalid() {
        assert!(ProblemConfig::from_toml_str("phi = 1.0").is_err());
        assert!(ProblemConfig::from_toml_str("[volume_fractions]\nalpha1 = 0.0\nalpha2 = 0.1").is_err());
        assert!(ProblemConfig::from_toml_str("phi_p = inf").is_err());
        assert!(ProblemConfig::from_toml_str("direction = \"diagonal\"").is_err());
    }

    #[test]
    fn actuator_setup() {
        let c = small();
        let a = build_actuator(&c).unwrap();
        let m = &a.mesh;
        // 2 nodes per edge position per layer, patch of one element: 2 positions
        assert_eq!(m.dof_set("source_upper").unwrap().len(), 2 * 2 * 4);
        // port: one mid-height position, two layers
        assert_eq!(a.objective.len(), 2);
        assert!(a.objective.iter().all(|&(_, d, w)| d == Dof::Uy && w == 0.5));
        let strips = a.rho2_init.iter().filter(|&&r| r == 0.0).count();
        assert_eq!(strips, 2 * 10);
        assert!(a.rho1_init.iter().all(|&r| r == 1.0));
    }
}
