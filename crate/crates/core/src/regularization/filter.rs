use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::shape::{gauss_points, physical_gradients, GAUSS_POINTS, NODES};

/// Helmholtz filter −l²Δρ̃ + ρ̃ = ρ with zero-flux boundary, discretized on
/// the design elements only. A and G are design independent; A is factored
/// once.
pub struct FilterOperator {
    length: f64,
    /// Global mesh node id of each local design node.
    design_nodes: Vec<usize>,
    /// Local design-node indices of each design element.
    elem_nodes: Vec<[usize; NODES]>,
    /// Quadrature weight times det J per element and Gauss point.
    weights: Vec<[f64; GAUSS_POINTS]>,
    /// Right-hand side map: g[e][a] = ∫_e N_a.
    g: Vec<[f64; NODES]>,
    volume: f64,
    a: SparseColMat<usize, f64>,
    llt: Llt<usize, f64>,
}

impl std::fmt::Debug for FilterOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FilterOperator")
            .field("length", &self.length)
            .field("nodes", &self.design_nodes.len())
            .field("elements", &self.elem_nodes.len())
            .finish()
    }
}

pub fn build_filter(mesh: &Mesh, length: f64) -> Result<FilterOperator> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::InvalidParameter(format!("filter length must be positive, got {length}")));
    }
    if mesh.design_element_ids.is_empty() {
        return Err(Error::InvalidMeshSpec("no design elements".into()));
    }
    let mut local = vec![usize::MAX; mesh.nodes.len()];
    let mut design_nodes = Vec::new();
    let mut elem_nodes = Vec::with_capacity(mesh.design_element_ids.len());
    for &e in &mesh.design_element_ids {
        let nodes = mesh.elements[e].nodes.map(|n| {
            if local[n] == usize::MAX {
                local[n] = design_nodes.len();
                design_nodes.push(n);
            }
            local[n]
        });
        elem_nodes.push(nodes);
    }

    let l2 = length * length;
    let mut weights = Vec::with_capacity(elem_nodes.len());
    let mut g = Vec::with_capacity(elem_nodes.len());
    let mut triplets = Vec::with_capacity(elem_nodes.len() * NODES * NODES);
    let mut volume = 0.0;
    for (k, &e) in mesh.design_element_ids.iter().enumerate() {
        let coords = mesh.element_coords(e);
        let mut w = [0.0; GAUSS_POINTS];
        let mut ge = [0.0; NODES];
        let mut ke = [[0.0; NODES]; NODES];
        for (q, gp) in gauss_points().iter().enumerate() {
            let (grad, det) = physical_gradients(&coords, &gp.dn_dxi).ok_or(Error::DegenerateElement {
                element: e,
                gauss_point: q,
                det_j: 0.0,
            })?;
            w[q] = gp.weight * det;
            volume += w[q];
            for a in 0..NODES {
                ge[a] += w[q] * gp.n[a];
                for b in 0..NODES {
                    let dot = grad[a][0] * grad[b][0] + grad[a][1] * grad[b][1] + grad[a][2] * grad[b][2];
                    ke[a][b] += w[q] * (l2 * dot + gp.n[a] * gp.n[b]);
                }
            }
        }
        for a in 0..NODES {
            for b in 0..NODES {
                triplets.push(Triplet::new(elem_nodes[k][a], elem_nodes[k][b], ke[a][b]));
            }
        }
        weights.push(w);
        g.push(ge);
    }
    let n = design_nodes.len();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::LinearSolver(format!("filter assembly: {e:?}")))?;
    let llt = a
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::LinearSolver(format!("filter factorization: {e:?}")))?;
    Ok(FilterOperator {
        length,
        design_nodes,
        elem_nodes,
        weights,
        g,
        volume,
        a,
        llt,
    })
}

impl FilterOperator {
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_elements(&self) -> usize {
        self.elem_nodes.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.design_nodes.len()
    }

    /// Global mesh node ids of the local design nodes.
    pub fn design_nodes(&self) -> &[usize] {
        &self.design_nodes
    }

    pub fn element_nodes(&self) -> &[[usize; NODES]] {
        &self.elem_nodes
    }

    pub fn gauss_weights(&self) -> &[[f64; GAUSS_POINTS]] {
        &self.weights
    }

    pub fn design_volume(&self) -> f64 {
        self.volume
    }

    /// The assembled system matrix.
    pub fn matrix(&self) -> &SparseColMat<usize, f64> {
        &self.a
    }

    fn solve(&self, rhs: Vec<f64>) -> Vec<f64> {
        let mut m = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.llt.solve_in_place(m.as_mut());
        (0..rhs.len()).map(|i| m[(i, 0)]).collect()
    }

    /// Nodal ρ̃ = A⁻¹ G ρ.
    pub fn apply(&self, rho: &[f64]) -> Result<Vec<f64>> {
        if rho.len() != self.n_elements() {
            return Err(Error::DimensionMismatch {
                what: "element densities",
                expected: self.n_elements(),
                got: rho.len(),
            });
        }
        let mut rhs = vec![0.0; self.n_nodes()];
        for ((nodes, ge), r) in self.elem_nodes.iter().zip(&self.g).zip(rho) {
            for a in 0..NODES {
                rhs[nodes[a]] += ge[a] * r;
            }
        }
        Ok(self.solve(rhs))
    }

    /// Gᵀ A⁻¹ y, the transpose of `apply` (A is symmetric).
    pub fn apply_transpose(&self, nodal: &[f64]) -> Result<Vec<f64>> {
        if nodal.len() != self.n_nodes() {
            return Err(Error::DimensionMismatch {
                what: "nodal field",
                expected: self.n_nodes(),
                got: nodal.len(),
            });
        }
        let y = self.solve(nodal.to_vec());
        Ok(self
            .elem_nodes
            .iter()
            .zip(&self.g)
            .map(|(nodes, ge)| (0..NODES).map(|a| ge[a] * y[nodes[a]]).sum())
            .collect())
    }

    /// Trilinear interpolation of a nodal field to the Gauss points.
    pub fn interpolate(&self, nodal: &[f64]) -> Vec<[f64; GAUSS_POINTS]> {
        let gps = gauss_points();
        self.elem_nodes
            .iter()
            .map(|nodes| std::array::from_fn(|q| (0..NODES).map(|a| gps[q].n[a] * nodal[nodes[a]]).sum()))
            .collect()
    }

    pub fn interpolate_transpose(&self, gp: &[[f64; GAUSS_POINTS]]) -> Vec<f64> {
        let gps = gauss_points();
        let mut out = vec![0.0; self.n_nodes()];
        for (nodes, vals) in self.elem_nodes.iter().zip(gp) {
            for q in 0..GAUSS_POINTS {
                for a in 0..NODES {
                    out[nodes[a]] += gps[q].n[a] * vals[q];
                }
            }
        }
        out
    }

    /// ∫ f dV of a nodal field over the design domain.
    pub fn integrate_nodal(&self, nodal: &[f64]) -> f64 {
        self.interpolate(nodal)
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| (0..GAUSS_POINTS).map(|q| v[q] * w[q]).sum::<f64>())
            .sum()
    }

    /// ∫ f dV of a Gauss point field over the design domain.
    pub fn integrate_gauss(&self, gp: &[[f64; GAUSS_POINTS]]) -> f64 {
        gp.iter()
            .zip(&self.weights)
            .map(|(v, w)| (0..GAUSS_POINTS).map(|q| v[q] * w[q]).sum::<f64>())
            .sum()
    }
}
