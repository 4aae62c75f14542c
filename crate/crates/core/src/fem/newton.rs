use log::{debug, warn};

use super::assembly::{Assembly, MaterialField, StateProblem};
use crate::error::{Error, Result};
use crate::mesh::Dof;

/// Converged (or reference) state of the coupled problem.
#[derive(Debug, Clone)]
pub struct SolutionState {
    /// Value of every global dof: displacements (mm) and potentials (V).
    pub values: Vec<f64>,
    pub converged: bool,
    /// Newton iterations (assemblies) of the final solve path.
    pub newton_iters: usize,
    /// Weighted residual norms of the last load increment.
    pub residual_history: Vec<f64>,
    /// Tangent at the converged state, on the solver pattern.
    pub tangent: Option<Vec<f64>>,
}

/// Weighted objective vector: (node, dof, weight) entries of l.
pub type ObjectiveVector = Vec<(usize, Dof, f64)>;

impl SolutionState {
    pub fn value(&self, problem: &StateProblem, node: usize, dof: Dof) -> f64 {
        self.values[problem.dofs().global(node, dof)]
    }
}

/// g0 = lᵀa.
pub fn extract_objective(problem: &StateProblem, state: &SolutionState, l: &[(usize, Dof, f64)]) -> f64 {
    l.iter().map(|&(n, d, w)| w * state.value(problem, n, d)).sum()
}

enum Attempt {
    Converged { iters: usize, history: Vec<f64>, tangent: Vec<f64> },
    Failed { history: Vec<f64> },
}

impl StateProblem {
    /// Residual norm at zero free dofs with the full prescribed load.
    pub fn reference_residual(&self, mat: &MaterialField) -> Result<f64> {
        let zero = vec![0.0; self.dofs.n_free()];
        let asm = self.assemble(mat, &self.compose(&zero, 1.0), false)?;
        Ok(self.residual_norm(&asm.residual))
    }

    fn tolerance(&self, r_ref: f64) -> f64 {
        (self.options.rel_tol * r_ref).max(self.options.abs_tol)
    }

    /// Newton iterations at a fixed load factor, starting from `free`
    /// (updated in place on success). `first` may carry an assembly of the
    /// starting point.
    fn newton(
        &self,
        mat: &MaterialField,
        free: &mut Vec<f64>,
        load: f64,
        tol: f64,
        first: Option<Assembly>,
    ) -> Result<Attempt> {
        let mut history = Vec::new();
        let mut asm = match first {
            Some(a) => a,
            None => match self.assemble(mat, &self.compose(free, load), true) {
                Ok(a) => a,
                Err(Error::InvertedElement { .. }) => return Ok(Attempt::Failed { history }),
                Err(e) => return Err(e),
            },
        };
        for it in 0..self.options.max_newton_iters {
            let norm = self.residual_norm(&asm.residual);
            history.push(norm);
            if !norm.is_finite() {
                return Ok(Attempt::Failed { history });
            }
            if norm <= tol {
                let tangent = asm.matrix.take().expect("tangent assembled");
                return Ok(Attempt::Converged {
                    iters: it + 1,
                    history,
                    tangent,
                });
            }
            let k = asm.matrix.as_ref().expect("tangent assembled");
            let delta = match self.solver.factor(k).and_then(|f| f.solve(&asm.residual)) {
                Ok(d) => d,
                Err(Error::LinearSolver(msg)) => {
                    debug!("linear solve failed at load {load}: {msg}");
                    return Ok(Attempt::Failed { history });
                }
                Err(e) => return Err(e),
            };
            // backtracking on the weighted residual norm; the Newton step is
            // a descent direction for ‖r‖² whatever the definiteness of K
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..6 {
                let trial: Vec<f64> = free.iter().zip(&delta).map(|(a, d)| a + step * d).collect();
                match self.assemble(mat, &self.compose(&trial, load), true) {
                    Ok(a) => {
                        let n = self.residual_norm(&a.residual);
                        if n.is_finite() && n <= (1.0 - 1e-4 * step) * norm {
                            accepted = Some((trial, a));
                            break;
                        }
                        if accepted.is_none() && step == 1.0 && n.is_finite() && n < 10.0 * norm {
                            // remember the full step in case no shorter step does better
                            accepted = Some((trial, a));
                            step *= 0.5;
                            continue;
                        }
                    }
                    Err(Error::InvertedElement { .. }) => {}
                    Err(e) => return Err(e),
                }
                step *= 0.5;
            }
            match accepted {
                Some((trial, a)) => {
                    *free = trial;
                    asm = a;
                }
                None => return Ok(Attempt::Failed { history }),
            }
        }
        Ok(Attempt::Failed { history })
    }

    /// Solves the equilibrium equations at full load.
    ///
    /// With `warm`, Newton starts from that state at full load; if this
    /// fails, or without a warm start, the prescribed values are ramped in
    /// `n_load` equal increments, each bisected up to `max_bisections` times
    /// on failure.
    pub fn solve_state(&self, mat: &MaterialField, warm: Option<&SolutionState>) -> Result<SolutionState> {
        let r_ref = self.reference_residual(mat)?;
        let tol = self.tolerance(r_ref);

        let start: Vec<f64> = match warm {
            Some(w) if w.values.len() == self.dofs.n_global() => self.free_part(&w.values),
            _ => vec![0.0; self.dofs.n_free()],
        };
        let mut free = start;
        let first = match self.assemble(mat, &self.compose(&free, 1.0), true) {
            Ok(a) => Some(a),
            Err(Error::InvertedElement { .. }) => None,
            Err(e) => return Err(e),
        };
        if let Some(mut a) = first {
            let norm = self.residual_norm(&a.residual);
            if norm <= tol {
                let tangent = a.matrix.take().expect("tangent assembled");
                return Ok(self.finish(free, 1, vec![norm], tangent));
            }
            if warm.is_some() {
                match self.newton(mat, &mut free, 1.0, tol, Some(a))? {
                    Attempt::Converged { iters, history, tangent } => {
                        return Ok(self.finish(free, iters, history, tangent));
                    }
                    Attempt::Failed { history } => {
                        debug!("warm-started Newton failed (history {history:?}); ramping from zero");
                    }
                }
            }
        }

        let n_load = self.options.n_load.max(1);
        let nominal = 1.0 / n_load as f64;
        let mut free = vec![0.0; self.dofs.n_free()];
        let mut load = 0.0;
        let mut step = nominal;
        let mut depth = 0;
        let mut total_iters = 0;
        loop {
            let target = if load + step >= 1.0 - 1e-12 { 1.0 } else { load + step };
            let mut trial = free.clone();
            match self.newton(mat, &mut trial, target, tol, None)? {
                Attempt::Converged { iters, history, tangent } => {
                    total_iters += iters;
                    free = trial;
                    load = target;
                    if load == 1.0 {
                        return Ok(self.finish(free, total_iters, history, tangent));
                    }
                    if depth > 0 {
                        depth -= 1;
                        step *= 2.0;
                    }
                }
                Attempt::Failed { history } => {
                    if depth >= self.options.max_bisections {
                        warn!("load ramp failed at factor {target}");
                        return Err(Error::NonConvergence { history });
                    }
                    depth += 1;
                    step *= 0.5;
                }
            }
        }
    }

    fn finish(&self, free: Vec<f64>, iters: usize, history: Vec<f64>, tangent: Vec<f64>) -> SolutionState {
        SolutionState {
            values: self.compose(&free, 1.0),
            converged: true,
            newton_iters: iters,
            residual_history: history,
            tangent: Some(tangent),
        }
    }

    /// Solves Kᵀμ = l on the free dofs of the converged tangent; μ is zero on
    /// every prescribed dof. Returned on all global dofs.
    pub fn solve_adjoint(&self, mat: &MaterialField, state: &SolutionState, l: &[(usize, Dof, f64)]) -> Result<Vec<f64>> {
        let mut rhs = vec![0.0; self.dofs.n_free()];
        for &(n, d, w) in l {
            let g = self.dofs.global(n, d);
            let f = self.dofs.free(g).ok_or_else(|| {
                Error::InvalidParameter(format!("objective entry on prescribed dof (node {n}, {d:?})"))
            })?;
            rhs[f] += w;
        }
        let mut mu = vec![0.0; self.dofs.n_global()];
        if rhs.iter().all(|&v| v == 0.0) {
            return Ok(mu);
        }
        let tangent = match &state.tangent {
            Some(t) => t.clone(),
            None => self.assemble(mat, &state.values, true)?.matrix.expect("tangent"),
        };
        let x = self.solver.factor(&tangent)?.solve_transpose(&rhs)?;
        for (f, &g) in self.dofs.free_dofs().iter().enumerate() {
            mu[g] = x[f];
        }
        Ok(mu)
    }
}
