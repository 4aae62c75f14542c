//! Objective, volume constraints and their adjoint sensitivities with
//! respect to the raw element densities of both fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{extract_objective, MaterialField, ObjectiveVector, SolutionState, StateProblem};
use crate::material::{EmiParams, PhaseTriplet};
use crate::regularization::{backprop, penalty, penalty_gradient, DesignState, FilterOperator, GaussField, PenaltyParams, ProjectionParams};
use crate::shape::GAUSS_POINTS;

/// a1 in ĝ0 = a1 asinh(a2 g0).
pub const ASINH_A1: f64 = 10.0;
/// a2 in ĝ0 = a1 asinh(a2 g0), 1/mm.
pub const ASINH_A2: f64 = 1e7;
/// Factor applied to both volume constraints.
pub const CONSTRAINT_SCALE: f64 = 10.0;

pub fn rescale_objective(g0: f64) -> f64 {
    ASINH_A1 * (ASINH_A2 * g0).asinh()
}

/// dĝ0/dg0 = a1 a2 / sqrt(1 + (a2 g0)²).
pub fn rescale_derivative(g0: f64) -> f64 {
    ASINH_A1 * ASINH_A2 / (ASINH_A2 * g0).hypot(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeFractions {
    /// Allowed electrode fraction.
    pub alpha1: f64,
    /// Allowed EAP fraction.
    pub alpha2: f64,
}

impl Default for VolumeFractions {
    fn default() -> Self {
        VolumeFractions { alpha1: 0.2, alpha2: 0.1 }
    }
}

impl VolumeFractions {
    pub fn validate(&self) -> Result<()> {
        for a in [self.alpha1, self.alpha2] {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::InvalidParameter(format!("volume fraction {a} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// Phase volumes, scaled constraints and their raw-density gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Volumes {
    /// Electrode volume ∫ρ̄1(1−ρ̄2).
    pub v1: f64,
    /// EAP volume ∫ρ̄1ρ̄2.
    pub v2: f64,
    pub g1: f64,
    pub g2: f64,
    pub d_g1_rho1: Vec<f64>,
    pub d_g1_rho2: Vec<f64>,
    pub d_g2_rho1: Vec<f64>,
    pub d_g2_rho2: Vec<f64>,
}

pub fn volume_and_gradients(
    op: &FilterOperator,
    proj: &ProjectionParams,
    design: &DesignState,
    fractions: &VolumeFractions,
) -> Result<Volumes> {
    let (r1, r2) = (&design.rho1.bar, &design.rho2.bar);
    let vdd = op.design_volume();
    let s1 = CONSTRAINT_SCALE / (fractions.alpha1 * vdd);
    let s2 = CONSTRAINT_SCALE / (fractions.alpha2 * vdd);
    let n = op.n_elements();
    let mut v1 = 0.0;
    let mut v2 = 0.0;
    let mut a11 = Vec::with_capacity(n);
    let mut a12 = Vec::with_capacity(n);
    let mut a21 = Vec::with_capacity(n);
    let mut a22 = Vec::with_capacity(n);
    for (e, w) in op.gauss_weights().iter().enumerate() {
        let mut b11 = [0.0; GAUSS_POINTS];
        let mut b12 = [0.0; GAUSS_POINTS];
        let mut b21 = [0.0; GAUSS_POINTS];
        let mut b22 = [0.0; GAUSS_POINTS];
        for q in 0..GAUSS_POINTS {
            let (x1, x2) = (r1[e][q], r2[e][q]);
            v1 += w[q] * x1 * (1.0 - x2);
            v2 += w[q] * x1 * x2;
            b11[q] = s1 * w[q] * (1.0 - x2);
            b12[q] = -s1 * w[q] * x1;
            b21[q] = s2 * w[q] * x2;
            b22[q] = s2 * w[q] * x1;
        }
        a11.push(b11);
        a12.push(b12);
        a21.push(b21);
        a22.push(b22);
    }
    Ok(Volumes {
        v1,
        v2,
        g1: CONSTRAINT_SCALE * (v1 / (fractions.alpha1 * vdd) - 1.0),
        g2: CONSTRAINT_SCALE * (v2 / (fractions.alpha2 * vdd) - 1.0),
        d_g1_rho1: backprop(op, proj, &design.rho1, &a11)?,
        d_g1_rho2: backprop(op, proj, &design.rho2, &a12)?,
        d_g2_rho1: backprop(op, proj, &design.rho1, &a21)?,
        d_g2_rho2: backprop(op, proj, &design.rho2, &a22)?,
    })
}

/// dḡ0/dρ1 and dḡ0/dρ2 from a converged state and its adjoint μ
/// (Kᵀμ = l).
///
/// With r = f_ext − f_int, dg0/dρ̄ = −μᵀ ∂f_int/∂ρ̄ at each Gauss point.
#[allow(clippy::too_many_arguments)]
pub fn objective_gradient(
    problem: &StateProblem,
    mat: &MaterialField,
    state: &SolutionState,
    mu: &[f64],
    op: &FilterOperator,
    proj: &ProjectionParams,
    design: &DesignState,
    g0: f64,
    pen: &PenaltyParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (c1, c2) = problem.density_contraction(mat, &state.values, mu)?;
    let chain = rescale_derivative(g0);
    let combine = |c: &GaussField, bar: &GaussField| -> GaussField {
        let p = penalty_gradient(op, bar, pen);
        c.iter()
            .zip(&p)
            .map(|(ce, pe)| std::array::from_fn(|q| -chain * ce[q] + pen.a_d * pe[q]))
            .collect()
    };
    let g1 = combine(&c1, &design.rho1.bar);
    let g2 = combine(&c2, &design.rho2.bar);
    Ok((
        backprop(op, proj, &design.rho1, &g1)?,
        backprop(op, proj, &design.rho2, &g2)?,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub d_g0_rho1: Vec<f64>,
    pub d_g0_rho2: Vec<f64>,
    pub d_g1_rho1: Vec<f64>,
    pub d_g1_rho2: Vec<f64>,
    pub d_g2_rho1: Vec<f64>,
    pub d_g2_rho2: Vec<f64>,
}

/// Continuation-dependent parameters of one design iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationParams {
    pub projection: ProjectionParams,
    pub emi: EmiParams,
    pub penalty: PenaltyParams,
}

/// Everything fixed over an optimization run.
pub struct Pipeline<'a> {
    pub problem: &'a StateProblem,
    pub filter: &'a FilterOperator,
    pub triplet: PhaseTriplet,
    pub stabilized_electric: bool,
    pub objective: ObjectiveVector,
    pub fractions: VolumeFractions,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub design: DesignState,
    pub state: SolutionState,
    /// lᵀa in mm.
    pub g0: f64,
    pub g0_hat: f64,
    /// Sum of the two normalized penalty integrals (without a_d).
    pub penalty: f64,
    pub g0_bar: f64,
    pub volumes: Volumes,
    pub gradients: Option<GradientBundle>,
}

impl Pipeline<'_> {
    /// Filter, project, solve the state and, if asked, the adjoint.
    pub fn evaluate(
        &self,
        rho1: &[f64],
        rho2: &[f64],
        params: &IterationParams,
        warm: Option<&SolutionState>,
        with_gradients: bool,
    ) -> Result<Evaluation> {
        let mut eval = self.evaluate_state(rho1, rho2, params, warm)?;
        if with_gradients {
            self.attach_gradients(&mut eval, params)?;
        }
        Ok(eval)
    }

    fn material(&self, design: &DesignState, params: &IterationParams) -> Result<MaterialField> {
        MaterialField::from_densities(
            &self.triplet,
            &params.emi,
            self.stabilized_electric,
            &design.rho1.bar,
            &design.rho2.bar,
        )
    }

    /// Objective and constraint values without sensitivities.
    pub fn evaluate_state(
        &self,
        rho1: &[f64],
        rho2: &[f64],
        params: &IterationParams,
        warm: Option<&SolutionState>,
    ) -> Result<Evaluation> {
        let n = self.filter.n_elements();
        for (what, r) in [("rho1", rho1), ("rho2", rho2)] {
            if r.len() != n {
                return Err(Error::DimensionMismatch { what, expected: n, got: r.len() });
            }
        }
        let proj = &params.projection;
        let design = DesignState::new(self.filter, rho1, rho2, proj)?;
        let mat = self.material(&design, params)?;
        let state = self.problem.solve_state(&mat, warm)?;
        let g0 = extract_objective(self.problem, &state, &self.objective);
        let g0_hat = rescale_objective(g0);
        let pen = penalty(self.filter, &design.rho1.bar, &params.penalty)
            + penalty(self.filter, &design.rho2.bar, &params.penalty);
        let volumes = volume_and_gradients(self.filter, proj, &design, &self.fractions)?;
        Ok(Evaluation {
            design,
            state,
            g0,
            g0_hat,
            penalty: pen,
            g0_bar: g0_hat + params.penalty.a_d * pen,
            volumes,
            gradients: None,
        })
    }

    /// Adjoint solve and gradients for `params`, which may differ from the
    /// evaluation's parameters in a_d only. Also refreshes ḡ0.
    pub fn attach_gradients(&self, eval: &mut Evaluation, params: &IterationParams) -> Result<()> {
        let mat = self.material(&eval.design, params)?;
        let mu = self.problem.solve_adjoint(&mat, &eval.state, &self.objective)?;
        let (d1, d2) = objective_gradient(
            self.problem,
            &mat,
            &eval.state,
            &mu,
            self.filter,
            &params.projection,
            &eval.design,
            eval.g0,
            &params.penalty,
        )?;
        eval.g0_bar = eval.g0_hat + params.penalty.a_d * eval.penalty;
        let v = &eval.volumes;
        eval.gradients = Some(GradientBundle {
            d_g0_rho1: d1,
            d_g0_rho2: d2,
            d_g1_rho1: v.d_g1_rho1.clone(),
            d_g1_rho2: v.d_g1_rho2.clone(),
            d_g2_rho1: v.d_g2_rho1.clone(),
            d_g2_rho2: v.d_g2_rho2.clone(),
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::fem::{BoundaryConditions, SolverOptions};
    use crate::mesh::{build_mesh, Dof, Mesh, MeshSpec, FAR_FIELD};
    use crate::regularization::build_filter;

    fn mesh(n: usize, factor: f64) -> Arc<Mesh> {
        Arc::new(
            build_mesh(&MeshSpec {
                design_nx: n,
                design_ny: n,
                freespace_extent_factor: factor,
                ..MeshSpec::default()
            })
            .unwrap(),
        )
    }

    fn proj() -> ProjectionParams {
        ProjectionParams { beta: 2.0, eta: 0.5 }
    }

    #[test]
    fn asinh_factor_at_zero() {
        assert_eq!(rescale_derivative(0.0), ASINH_A1 * ASINH_A2);
        assert_eq!(rescale_objective(0.0), 0.0);
        let h = 1e-12;
        let fd = (rescale_objective(3e-8 + h) - rescale_objective(3e-8 - h)) / (2.0 * h);
        assert!((fd - rescale_derivative(3e-8)).abs() < 1e-5 * fd.abs());
    }

    #[test]
    fn trivial_volumes() {
        let m = mesh(4, 1.0);
        let op = build_filter(&m, 0.25).unwrap();
        let f = VolumeFractions::default();
        let n = m.n_design();
        let d = DesignState::new(&op, &vec![1.0; n], &vec![0.0; n], &proj()).unwrap();
        let v = volume_and_gradients(&op, &proj(), &d, &f).unwrap();
        let vdd = m.design_volume();
        assert!((v.v1 - vdd).abs() < 1e-12 && v.v2.abs() < 1e-12);
        let d = DesignState::new(&op, &vec![1.0; n], &vec![1.0; n], &proj()).unwrap();
        let v = volume_and_gradients(&op, &proj(), &d, &f).unwrap();
        assert!(v.v1.abs() < 1e-12 && (v.v2 - vdd).abs() < 1e-12);
        assert!((v.g2 - 10.0 * (1.0 / 0.1 - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn volume_identity_and_fd() {
        let m = mesh(6, 1.0);
        let op = build_filter(&m, 0.25).unwrap();
        let f = VolumeFractions::default();
        let p = proj();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = m.n_design();
        let r1: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.9)).collect();
        let r2: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..0.9)).collect();
        let d = DesignState::new(&op, &r1, &r2, &p).unwrap();
        let v = volume_and_gradients(&op, &p, &d, &f).unwrap();
        let total = op.integrate_gauss(&d.rho1.bar);
        assert!((v.v1 + v.v2 - total).abs() < 1e-12);

        let h = 1e-6;
        let eval = |a: &[f64], b: &[f64]| {
            let d = DesignState::new(&op, a, b, &p).unwrap();
            let v = volume_and_gradients(&op, &p, &d, &f).unwrap();
            (v.g1, v.g2)
        };
        for &i in &[0usize, 7, 20, 35] {
            for field in 0..2 {
                let (mut a, mut b) = (r1.clone(), r2.clone());
                let (mut c, mut e) = (r1.clone(), r2.clone());
                if field == 0 {
                    a[i] += h;
                    c[i] -= h;
                } else {
                    b[i] += h;
                    e[i] -= h;
                }
                let (p1, p2) = eval(&a, &b);
                let (m1, m2) = eval(&c, &e);
                let fd1 = (p1 - m1) / (2.0 * h);
                let fd2 = (p2 - m2) / (2.0 * h);
                let (an1, an2) = if field == 0 {
                    (v.d_g1_rho1[i], v.d_g2_rho1[i])
                } else {
                    (v.d_g1_rho2[i], v.d_g2_rho2[i])
                };
                assert!((fd1 - an1).abs() <= 1e-6 * an1.abs().max(1e-3), "g1 field {field} elem {i}: {fd1} vs {an1}");
                assert!((fd2 - an2).abs() <= 1e-6 * an2.abs().max(1e-3), "g2 field {field} elem {i}: {fd2} vs {an2}");
            }
        }
    }

    /// Patches at ±phi on the left edge, clamped, port spring at the right.
    fn actuator(m: &Arc<Mesh>, phi: f64) -> (StateProblem, ObjectiveVector) {
        let ([x0, y0], [x1, y1]) = m.design_bounds();
        let h = y1 - y0;
        let mut bc = BoundaryConditions::new();
        bc.prescribe_set(m, FAR_FIELD, 0.0).unwrap();
        let mut l = Vec::new();
        let mid = 0.5 * (y0 + y1);
        for n in &m.nodes {
            let [x, y, _] = n.x;
            if (x - x0).abs() < 1e-12 && (y > y1 - 0.2 * h - 1e-12 || y < y0 + 0.2 * h + 1e-12) {
                bc.prescribe(n.id, Dof::Potential, if y > mid { phi } else { -phi });
                for d in Dof::DISPLACEMENT {
                    bc.prescribe(n.id, d, 0.0);
                }
            }
            if (x - x1).abs() < 1e-12 && (y - mid).abs() < 1e-12 {
                bc.add_spring(n.id, Dof::Uy, 5e-4);
                l.push((n.id, Dof::Uy, 0.5));
            }
        }
        let p = StateProblem::new(m.clone(), bc, SolverOptions::default()).unwrap();
        (p, l)
    }

    #[test]
    fn adjoint_matches_finite_differences() {
        let m = mesh(4, 2.0);
        let op = build_filter(&m, 0.25).unwrap();
        let (problem, l) = actuator(&m, 3000.0);
        let pipe = Pipeline {
            problem: &problem,
            filter: &op,
            triplet: PhaseTriplet::default(),
            stabilized_electric: true,
            objective: l,
            fractions: VolumeFractions::default(),
        };
        let params = IterationParams {
            projection: proj(),
            emi: EmiParams::initial(),
            penalty: PenaltyParams { a_d: 0.3, alpha: 0.9, delta: 1e-9 },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = m.n_design();
        let r1: Vec<f64> = (0..n).map(|_| rng.random_range(0.4..1.0)).collect();
        let r2: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..0.9)).collect();
        let base = pipe.evaluate(&r1, &r2, &params, None, true).unwrap();
        assert!(base.g0.abs() > 1e-8, "actuation too weak: {}", base.g0);
        let grads = base.gradients.clone().unwrap();
        let h = 1e-5;
        for &i in &[0usize, 5, 10, 15] {
            for field in 0..2 {
                let value = |s: f64| {
                    let (mut a, mut b) = (r1.clone(), r2.clone());
                    if field == 0 {
                        a[i] += s;
                    } else {
                        b[i] += s;
                    }
                    pipe.evaluate(&a, &b, &params, Some(&base.state), false).unwrap().g0_bar
                };
                let fd = (value(h) - value(-h)) / (2.0 * h);
                let an = if field == 0 { grads.d_g0_rho1[i] } else { grads.d_g0_rho2[i] };
                let scale = grads.d_g0_rho1.iter().chain(&grads.d_g0_rho2).fold(0.0f64, |a, b| a.max(b.abs()));
                assert!(
                    (fd - an).abs() < 1e-4 * an.abs().max(1e-3 * scale),
                    "field {field} element {i}: fd {fd} adjoint {an}"
                );
            }
        }
    }
}
