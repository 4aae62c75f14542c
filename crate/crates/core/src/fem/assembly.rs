use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use super::dofs::{BoundaryConditions, DofMap, DOFS_PER_NODE};
use super::linear::LinearSolver;
use super::SolverOptions;
use crate::error::{Error, Result};
use crate::material::{energy_terms, interpolate_phase_with_derivatives, EmiParams, MaterialPhase, PhaseTriplet, PointKinematics};
use crate::mesh::{Dof, Mesh, Region};
use crate::regularization::GaussField;
use crate::shape::{gauss_points, physical_gradients, GAUSS_POINTS, NODES};

/// Element dofs, ordered `4 a + d` for local node a and dof kind d.
pub const ELEMENT_DOFS: usize = NODES * DOFS_PER_NODE;

type ElementVector = [f64; ELEMENT_DOFS];
type ElementMatrix = Box<[[f64; ELEMENT_DOFS]; ELEMENT_DOFS]>;

const CHUNK: usize = 256;

/// Material constants at every design Gauss point plus the free-space phase.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialField {
    pub eps0: f64,
    /// Phase of the free-space elements.
    pub void: MaterialPhase,
    /// Interpolated phase per design element and Gauss point.
    pub design: Vec<[MaterialPhase; GAUSS_POINTS]>,
    /// ∂phase/∂ρ̄1 and ∂phase/∂ρ̄2 at the same points.
    pub d_rho1: Vec<[MaterialPhase; GAUSS_POINTS]>,
    pub d_rho2: Vec<[MaterialPhase; GAUSS_POINTS]>,
}

impl MaterialField {
    pub fn from_densities(
        triplet: &PhaseTriplet,
        emi: &EmiParams,
        stabilized_electric: bool,
        rho1_bar: &[[f64; GAUSS_POINTS]],
        rho2_bar: &[[f64; GAUSS_POINTS]],
    ) -> Result<Self> {
        if rho1_bar.len() != rho2_bar.len() {
            return Err(Error::DimensionMismatch {
                what: "density fields",
                expected: rho1_bar.len(),
                got: rho2_bar.len(),
            });
        }
        let t = crate::material::effective_triplet(triplet, stabilized_electric);
        let n = rho1_bar.len();
        let mut design = Vec::with_capacity(n);
        let mut d_rho1 = Vec::with_capacity(n);
        let mut d_rho2 = Vec::with_capacity(n);
        for (r1, r2) in rho1_bar.iter().zip(rho2_bar) {
            let all: [(MaterialPhase, MaterialPhase, MaterialPhase); GAUSS_POINTS] =
                std::array::from_fn(|q| interpolate_phase_with_derivatives(&t, emi, r1[q], r2[q]));
            design.push(all.map(|p| p.0));
            d_rho1.push(all.map(|p| p.1));
            d_rho2.push(all.map(|p| p.2));
        }
        Ok(MaterialField {
            eps0: t.eps0,
            void: t.void,
            design,
            d_rho1,
            d_rho2,
        })
    }

    /// Same phase at every design point, no density dependence.
    pub fn uniform(n_design: usize, phase: MaterialPhase, void: MaterialPhase, eps0: f64) -> Self {
        let zero = MaterialPhase {
            bulk: 0.0,
            shear: 0.0,
            c_e: 0.0,
            eps_r: 0.0,
        };
        MaterialField {
            eps0,
            void,
            design: vec![[phase; GAUSS_POINTS]; n_design],
            d_rho1: vec![[zero; GAUSS_POINTS]; n_design],
            d_rho2: vec![[zero; GAUSS_POINTS]; n_design],
        }
    }
}

/// Internal forces and, optionally, the tangent on the free-dof pattern.
#[derive(Debug, Clone)]
pub struct Assembly {
    /// r = f_ext − f_int on the free dofs (springs are the only external forces).
    pub residual: Vec<f64>,
    /// f_int on every global dof.
    pub internal: Vec<f64>,
    /// Tangent values laid out on the solver pattern.
    pub matrix: Option<Vec<f64>>,
    /// Stored energy ∫Ω dV.
    pub energy: f64,
}

/// Discrete coupled electro-mechanical problem on a fixed mesh with fixed
/// boundary conditions.
pub struct StateProblem {
    pub(crate) mesh: Arc<Mesh>,
    pub(crate) bcs: BoundaryConditions,
    pub(crate) options: SolverOptions,
    pub(crate) dofs: DofMap,
    /// Full-load prescribed value per global dof (0 on free dofs).
    pub(crate) prescribed: Vec<f64>,
    pub(crate) elem_dofs: Vec<[usize; ELEMENT_DOFS]>,
    /// Design-field slot of each element, `usize::MAX` for free space.
    design_slot: Vec<usize>,
    pub(crate) solver: LinearSolver,
    /// (free index, stiffness), merged per dof.
    springs: Vec<(usize, f64)>,
    /// Weights of the free residual entries in the convergence norm.
    pub(crate) residual_weights: Vec<f64>,
}

impl std::fmt::Debug for StateProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StateProblem")
            .field("elements", &self.mesh.elements.len())
            .field("free_dofs", &self.dofs.n_free())
            .field("solver", &self.solver)
            .finish()
    }
}

impl StateProblem {
    pub fn new(mesh: Arc<Mesh>, bcs: BoundaryConditions, options: SolverOptions) -> Result<Self> {
        options.validate()?;
        let tied = options.tie_layers;
        let (fixed, prescribed) = bcs.resolve(&mesh, tied)?;
        let dofs = DofMap::new(&mesh, tied, &fixed);
        if dofs.n_free() == 0 {
            return Err(Error::InvalidParameter("every degree of freedom is prescribed".into()));
        }
        let elem_dofs: Vec<[usize; ELEMENT_DOFS]> = mesh
            .elements
            .iter()
            .map(|el| std::array::from_fn(|p| dofs.global(el.nodes[p / DOFS_PER_NODE], Dof::ALL[p % DOFS_PER_NODE])))
            .collect();
        let mut design_slot = vec![usize::MAX; mesh.elements.len()];
        for (k, &e) in mesh.design_element_ids.iter().enumerate() {
            design_slot[e] = k;
        }

        // sparsity pattern of the free system
        let n = dofs.n_free();
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for ed in &elem_dofs {
            let mut fr: Vec<usize> = ed.iter().filter_map(|&g| dofs.free(g)).collect();
            fr.sort_unstable();
            fr.dedup();
            for &c in &fr {
                cols[c].extend_from_slice(&fr);
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for (c, mut rows) in cols.into_iter().enumerate() {
            rows.push(c);
            rows.sort_unstable();
            rows.dedup();
            row_idx.extend_from_slice(&rows);
            col_ptr.push(row_idx.len());
        }
        let solver = LinearSolver::new(n, col_ptr, row_idx)?;

        let mut spring_map = std::collections::BTreeMap::new();
        for s in &bcs.springs {
            if let Some(f) = dofs.free(dofs.global(s.node, s.dof)) {
                *spring_map.entry(f).or_insert(0.0) += s.stiffness;
            }
        }

        let phi_ref = prescribed
            .iter()
            .enumerate()
            .filter(|(g, _)| g % DOFS_PER_NODE == Dof::Potential.index())
            .fold(1.0f64, |m, (_, v)| m.max(v.abs()));
        let phi_weight = phi_ref / mesh.spec.design_size;
        let residual_weights = dofs
            .free_dofs()
            .iter()
            .map(|&g| if g % DOFS_PER_NODE == Dof::Potential.index() { phi_weight } else { 1.0 })
            .collect();

        Ok(StateProblem {
            mesh,
            bcs,
            options,
            dofs,
            prescribed,
            elem_dofs,
            design_slot,
            solver,
            springs: spring_map.into_iter().collect(),
            residual_weights,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn boundary_conditions(&self) -> &BoundaryConditions {
        &self.bcs
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn solver(&self) -> &LinearSolver {
        &self.solver
    }

    /// Global value vector with the prescribed dofs at `load` times their
    /// full value and the free dofs copied from `free`.
    pub fn compose(&self, free: &[f64], load: f64) -> Vec<f64> {
        let mut v: Vec<f64> = self.prescribed.iter().map(|p| load * p).collect();
        for (f, &g) in self.dofs.free_dofs().iter().enumerate() {
            v[g] = free[f];
        }
        v
    }

    pub fn free_part(&self, values: &[f64]) -> Vec<f64> {
        self.dofs.free_dofs().iter().map(|&g| values[g]).collect()
    }

    /// Weighted Euclidean norm used for the Newton convergence test.
    pub fn residual_norm(&self, residual: &[f64]) -> f64 {
        residual
            .iter()
            .zip(&self.residual_weights)
            .map(|(r, w)| (r * w) * (r * w))
            .sum::<f64>()
            .sqrt()
    }

    fn check_material(&self, mat: &MaterialField) -> Result<()> {
        if mat.design.len() != self.mesh.n_design() {
            return Err(Error::DimensionMismatch {
                what: "material field",
                expected: self.mesh.n_design(),
                got: mat.design.len(),
            });
        }
        Ok(())
    }

    fn element_values(&self, e: usize, values: &[f64]) -> [[f64; DOFS_PER_NODE]; NODES] {
        let ed = &self.elem_dofs[e];
        std::array::from_fn(|a| std::array::from_fn(|d| values[ed[a * DOFS_PER_NODE + d]]))
    }

    /// Visits every Gauss point of element `e` with its shape gradients,
    /// weight·detJ and kinematics.
    fn for_each_point<F>(&self, e: usize, values: &[f64], mut visit: F) -> Result<()>
    where
        F: FnMut(usize, &[[f64; 3]; NODES], f64, &PointKinematics),
    {
        let coords = self.mesh.element_coords(e);
        let ev = self.element_values(e, values);
        for (q, gp) in gauss_points().iter().enumerate() {
            let (g, det) = physical_gradients(&coords, &gp.dn_dxi).ok_or(Error::DegenerateElement {
                element: e,
                gauss_point: q,
                det_j: 0.0,
            })?;
            let mut f = Matrix3::identity();
            let mut efield = Vector3::zeros();
            for a in 0..NODES {
                for i in 0..3 {
                    for j in 0..3 {
                        f[(i, j)] += ev[a][i] * g[a][j];
                    }
                    efield[i] -= ev[a][3] * g[a][i];
                }
            }
            let kin = PointKinematics::new(f, efield).map_err(|_| Error::InvertedElement {
                element: e,
                gauss_point: q,
                det_f: f.determinant(),
            })?;
            visit(q, &g, gp.weight * det, &kin);
        }
        Ok(())
    }

    fn phase(&self, mat: &MaterialField, e: usize, q: usize) -> MaterialPhase {
        match self.design_slot[e] {
            usize::MAX => mat.void,
            k => mat.design[k][q],
        }
    }

    fn element_kernel(
        &self,
        e: usize,
        mat: &MaterialField,
        values: &[f64],
        tangent: bool,
    ) -> Result<(ElementVector, Option<ElementMatrix>, f64)> {
        let mut fe = [0.0; ELEMENT_DOFS];
        let mut ke: Option<ElementMatrix> = tangent.then(|| Box::new([[0.0; ELEMENT_DOFS]; ELEMENT_DOFS]));
        let mut energy = 0.0;
        self.for_each_point(e, values, |q, g, wd, kin| {
            let phase = self.phase(mat, e, q);
            let terms = energy_terms(kin, mat.eps0, tangent);
            let r = terms.combine(&phase);
            energy += wd * r.omega;
            for a in 0..NODES {
                let ga = &g[a];
                for i in 0..3 {
                    fe[a * 4 + i] += wd * (r.stress[(i, 0)] * ga[0] + r.stress[(i, 1)] * ga[1] + r.stress[(i, 2)] * ga[2]);
                }
                fe[a * 4 + 3] += wd * (r.d[0] * ga[0] + r.d[1] * ga[1] + r.d[2] * ga[2]);
            }
            let Some(k) = ke.as_mut() else { return };
            for a in 0..NODES {
                let ga = &g[a];
                // m[i][c] = Σ_J g_a,J D_mec[(i,J), c];  p[i][A] = Σ_J g_a,J D_mix[A, (i,J)]
                let mut m = [[0.0; 9]; 3];
                let mut p = [[0.0; 3]; 3];
                for i in 0..3 {
                    for jj in 0..3 {
                        let row = 3 * i + jj;
                        for c in 0..9 {
                            m[i][c] += ga[jj] * r.d_mec[(row, c)];
                        }
                        for aa in 0..3 {
                            p[i][aa] += ga[jj] * r.d_mix[(aa, row)];
                        }
                    }
                }
                let dg: [f64; 3] = std::array::from_fn(|aa| {
                    r.d_elt[(aa, 0)] * ga[0] + r.d_elt[(aa, 1)] * ga[1] + r.d_elt[(aa, 2)] * ga[2]
                });
                for b in 0..NODES {
                    let gb = &g[b];
                    for i in 0..3 {
                        for kk in 0..3 {
                            let c = 3 * kk;
                            k[a * 4 + i][b * 4 + kk] += wd * (m[i][c] * gb[0] + m[i][c + 1] * gb[1] + m[i][c + 2] * gb[2]);
                        }
                        let up = -wd * (p[i][0] * gb[0] + p[i][1] * gb[1] + p[i][2] * gb[2]);
                        k[a * 4 + i][b * 4 + 3] += up;
                        k[b * 4 + 3][a * 4 + i] += up;
                    }
                    k[a * 4 + 3][b * 4 + 3] += wd * (dg[0] * gb[0] + dg[1] * gb[1] + dg[2] * gb[2]);
                }
            }
        })?;
        Ok((fe, ke, energy))
    }

    /// Internal forces, residual and (optionally) the tangent at the global
    /// state `values`. Element kernels run in parallel chunks; the scatter is
    /// serial in element order, so repeated calls are bit-identical.
    pub fn assemble(&self, mat: &MaterialField, values: &[f64], tangent: bool) -> Result<Assembly> {
        self.check_material(mat)?;
        if values.len() != self.dofs.n_global() {
            return Err(Error::DimensionMismatch {
                what: "state vector",
                expected: self.dofs.n_global(),
                got: values.len(),
            });
        }
        let mut internal = vec![0.0; self.dofs.n_global()];
        let mut matrix = tangent.then(|| vec![0.0; self.solver.nnz()]);
        let mut energy = 0.0;
        let n_el = self.mesh.elements.len();
        for start in (0..n_el).step_by(CHUNK) {
            let end = (start + CHUNK).min(n_el);
            let outputs: Vec<Result<_>> = (start..end)
                .into_par_iter()
                .map(|e| self.element_kernel(e, mat, values, tangent))
                .collect();
            for (e, out) in (start..end).zip(outputs) {
                let (fe, ke, en) = out?;
                energy += en;
                let ed = &self.elem_dofs[e];
                for p in 0..ELEMENT_DOFS {
                    internal[ed[p]] += fe[p];
                }
                if let (Some(mv), Some(ke)) = (matrix.as_mut(), ke) {
                    let fr: [Option<usize>; ELEMENT_DOFS] = std::array::from_fn(|p| self.dofs.free(ed[p]));
                    for q in 0..ELEMENT_DOFS {
                        let Some(c) = fr[q] else { continue };
                        for p in 0..ELEMENT_DOFS {
                            let Some(r) = fr[p] else { continue };
                            let v = ke[p][q];
                            if v != 0.0 {
                                // pattern built from the same element lists
                                let pos = self.solver.position(r, c).expect("entry in pattern");
                                mv[pos] += v;
                            }
                        }
                    }
                }
            }
        }
        let mut residual: Vec<f64> = self.dofs.free_dofs().iter().map(|&g| -internal[g]).collect();
        for &(f, k) in &self.springs {
            let g = self.dofs.free_dofs()[f];
            residual[f] -= k * values[g];
            energy += 0.5 * k * values[g] * values[g];
            if let Some(mv) = matrix.as_mut() {
                mv[self.solver.position(f, f).expect("diagonal")] += k;
            }
        }
        Ok(Assembly {
            residual,
            internal,
            matrix,
            energy,
        })
    }

    /// Per design Gauss point, μᵀ ∂f_int/∂ρ̄1 and μᵀ ∂f_int/∂ρ̄2 for a
    /// global vector μ (zero on prescribed dofs).
    pub fn density_contraction(&self, mat: &MaterialField, values: &[f64], mu: &[f64]) -> Result<(GaussField, GaussField)> {
        self.check_material(mat)?;
        let ids = &self.mesh.design_element_ids;
        let out: Vec<Result<([f64; GAUSS_POINTS], [f64; GAUSS_POINTS])>> = ids
            .par_iter()
            .enumerate()
            .map(|(k, &e)| {
                let em = self.element_values(e, mu);
                let mut c1 = [0.0; GAUSS_POINTS];
                let mut c2 = [0.0; GAUSS_POINTS];
                self.for_each_point(e, values, |q, g, wd, kin| {
                    // gradients of the adjoint fields
                    let mut gu = Matrix3::zeros();
                    let mut gp = Vector3::zeros();
                    for a in 0..NODES {
                        for i in 0..3 {
                            for j in 0..3 {
                                gu[(i, j)] += em[a][i] * g[a][j];
                            }
                            gp[i] += em[a][3] * g[a][i];
                        }
                    }
                    let terms = energy_terms(kin, mat.eps0, false);
                    let (_, t1, d1) = terms.combine_first_order(&mat.d_rho1[k][q]);
                    let (_, t2, d2) = terms.combine_first_order(&mat.d_rho2[k][q]);
                    c1[q] = wd * (t1.component_mul(&gu).sum() + d1.dot(&gp));
                    c2[q] = wd * (t2.component_mul(&gu).sum() + d2.dot(&gp));
                })?;
                Ok((c1, c2))
            })
            .collect();
        let mut g1 = Vec::with_capacity(ids.len());
        let mut g2 = Vec::with_capacity(ids.len());
        for r in out {
            let (a, b) = r?;
            g1.push(a);
            g2.push(b);
        }
        Ok((g1, g2))
    }

    /// Element-averaged |E| (V/mm) in the reference configuration.
    pub fn field_magnitude(&self, values: &[f64]) -> Result<Vec<f64>> {
        (0..self.mesh.elements.len())
            .map(|e| {
                let mut s = 0.0;
                self.for_each_point(e, values, |_, _, _, kin| s += kin.e.norm())?;
                Ok(s / GAUSS_POINTS as f64)
            })
            .collect()
    }

    /// Nodal displacement vectors and potentials, expanded from the global
    /// values onto every mesh node.
    pub fn nodal_fields(&self, values: &[f64]) -> (Vec<[f64; 3]>, Vec<f64>) {
        let n = self.mesh.nodes.len();
        let u = (0..n)
            .map(|i| std::array::from_fn(|d| values[self.dofs.global(i, Dof::DISPLACEMENT[d])]))
            .collect();
        let phi = (0..n).map(|i| values[self.dofs.global(i, Dof::Potential)]).collect();
        (u, phi)
    }

    pub fn is_design_element(&self, e: usize) -> bool {
        self.mesh.elements[e].region == Region::Design
    }
}
