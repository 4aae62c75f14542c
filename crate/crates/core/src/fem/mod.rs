//! Finite element discretization of the coupled electro-elastic state
//! problem: assembly of residuals and the monolithic tangent, and the
//! incremental Newton solver.

mod assembly;
mod dofs;
mod linear;
mod newton;

use serde::{Deserialize, Serialize};

pub use assembly::{Assembly, MaterialField, StateProblem, ELEMENT_DOFS};
pub use dofs::{BoundaryConditions, DofMap, Spring, DOFS_PER_NODE};
pub use linear::{Factorization, LinearSolver};
pub use newton::{extract_objective, ObjectiveVector, SolutionState};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Equal potential increments of the load ramp.
    pub n_load: usize,
    /// Halvings allowed per increment before giving up.
    pub max_bisections: usize,
    pub max_newton_iters: usize,
    /// Convergence when the weighted residual norm drops below
    /// `rel_tol` times its value at the reference state under full load...
    pub rel_tol: f64,
    /// ...or below this absolute value.
    pub abs_tol: f64,
    /// Share unknowns between the two node layers (plane strain only).
    pub tie_layers: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            n_load: 5,
            max_bisections: 4,
            max_newton_iters: 30,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            tie_layers: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_load == 0 || self.max_newton_iters == 0 || !(self.rel_tol > 0.0) || !(self.abs_tol >= 0.0) {
            return Err(Error::InvalidParameter(format!("invalid solver options {self:?}")));
        }
        Ok(())
    }
}
