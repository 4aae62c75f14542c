use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Dof, Mesh};

/// Global numbering of the nodal unknowns.
///
/// With `tied` set, the two node layers share one set of unknowns. The
/// one-element-thick plane-strain problem is symmetric about its mid-plane,
/// so the top and bottom layers carry identical displacements and
/// potentials; tying them halves the system without changing the solution.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    n_nodes: usize,
    nodes_per_layer: usize,
    tied: bool,
    /// Free-system row of each global dof, `usize::MAX` when prescribed.
    free_index: Vec<usize>,
    free_dofs: Vec<usize>,
}

pub const DOFS_PER_NODE: usize = 4;

impl DofMap {
    pub(crate) fn new(mesh: &Mesh, tied: bool, prescribed: &[bool]) -> Self {
        let nodes_per_layer = mesh.grid.nodes_per_layer();
        let n_rep = if tied { nodes_per_layer } else { mesh.nodes.len() };
        debug_assert_eq!(prescribed.len(), n_rep * DOFS_PER_NODE);
        let mut free_index = vec![usize::MAX; n_rep * DOFS_PER_NODE];
        let mut free_dofs = Vec::new();
        for (g, &p) in prescribed.iter().enumerate() {
            if !p {
                free_index[g] = free_dofs.len();
                free_dofs.push(g);
            }
        }
        DofMap {
            n_nodes: mesh.nodes.len(),
            nodes_per_layer,
            tied,
            free_index,
            free_dofs,
        }
    }

    pub fn is_tied(&self) -> bool {
        self.tied
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Number of global unknowns (free and prescribed).
    pub fn n_global(&self) -> usize {
        self.free_index.len()
    }

    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    #[inline]
    pub fn global(&self, node: usize, dof: Dof) -> usize {
        let rep = if self.tied { node % self.nodes_per_layer } else { node };
        rep * DOFS_PER_NODE + dof.index()
    }

    /// Free-system index of a global dof.
    #[inline]
    pub fn free(&self, global: usize) -> Option<usize> {
        let f = self.free_index[global];
        (f != usize::MAX).then_some(f)
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    pub fn is_prescribed(&self, global: usize) -> bool {
        self.free_index[global] == usize::MAX
    }
}

/// Grounded linear spring on one nodal displacement dof.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spring {
    pub node: usize,
    pub dof: Dof,
    pub stiffness: f64,
}

/// Dirichlet data and springs. Neumann data (surface tractions and charges)
/// are identically zero.
///
/// Prescribed values are full-load values; the state solver scales all of
/// them by the current load factor.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundaryConditions {
    pub prescribed: Vec<(usize, Dof, f64)>,
    pub springs: Vec<Spring>,
    /// Constrain the out-of-plane displacement of every node.
    pub plane_strain: bool,
}

impl BoundaryConditions {
    pub fn new() -> Self {
        BoundaryConditions {
            plane_strain: true,
            ..Default::default()
        }
    }

    pub fn prescribe(&mut self, node: usize, dof: Dof, value: f64) {
        self.prescribed.push((node, dof, value));
    }

    /// Fixes every (node, dof) pair of a named mesh set to `value`.
    pub fn prescribe_set(&mut self, mesh: &Mesh, name: &str, value: f64) -> Result<()> {
        for &(n, d) in mesh.dof_set(name)? {
            self.prescribed.push((n, d, value));
        }
        Ok(())
    }

    pub fn add_spring(&mut self, node: usize, dof: Dof, stiffness: f64) {
        self.springs.push(Spring { node, dof, stiffness });
    }

    /// Resolves the conditions onto global dofs: per-dof prescribed flag
    /// and full-load value.
    pub(crate) fn resolve(&self, mesh: &Mesh, tied: bool) -> Result<(Vec<bool>, Vec<f64>)> {
        if tied && !self.plane_strain {
            return Err(Error::InvalidParameter(
                "tying the node layers requires plane strain".into(),
            ));
        }
        let npl = mesh.grid.nodes_per_layer();
        let n_rep = if tied { npl } else { mesh.nodes.len() };
        let rep = |n: usize| if tied { n % npl } else { n };
        let mut fixed = vec![false; n_rep * DOFS_PER_NODE];
        let mut value = vec![0.0; n_rep * DOFS_PER_NODE];
        let mut owner = vec![usize::MAX; n_rep * DOFS_PER_NODE];
        let mut set = |node: usize, dof: Dof, v: f64| -> Result<()> {
            if node >= mesh.nodes.len() {
                return Err(Error::InvalidParameter(format!("boundary condition on unknown node {node}")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("non-finite prescribed value on node {node}")));
            }
            let g = rep(node) * DOFS_PER_NODE + dof.index();
            if fixed[g] && value[g] != v {
                return Err(Error::ConflictingConstraint {
                    node: if owner[g] == usize::MAX { node } else { owner[g] },
                    dof: dof.index(),
                    first: value[g],
                    second: v,
                });
            }
            fixed[g] = true;
            value[g] = v;
            if owner[g] == usize::MAX {
                owner[g] = node;
            }
            Ok(())
        };
        if self.plane_strain {
            for n in 0..mesh.nodes.len() {
                set(n, Dof::Uz, 0.0)?;
            }
        }
        for &(n, d, v) in &self.prescribed {
            set(n, d, v)?;
        }
        for s in &self.springs {
            if s.dof == Dof::Potential {
                return Err(Error::InvalidParameter("springs act on displacement dofs only".into()));
            }
            if s.node >= mesh.nodes.len() || !(s.stiffness >= 0.0) {
                return Err(Error::InvalidParameter(format!("invalid spring {s:?}")));
            }
        }
        Ok((fixed, value))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, MeshSpec, FAR_FIELD};

    fn mesh() -> Mesh {
        build_mesh(&MeshSpec {
            design_nx: 2,
            design_ny: 2,
            freespace_extent_factor: 3.0,
            ..MeshSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn tied_map_shares_layers() {
        let m = mesh();
        let mut bc = BoundaryConditions::new();
        bc.prescribe_set(&m, FAR_FIELD, 0.0).unwrap();
        let (fixed, _) = bc.resolve(&m, true).unwrap();
        let map = DofMap::new(&m, true, &fixed);
        let npl = m.grid.nodes_per_layer();
        assert_eq!(map.n_global(), npl * 4);
        assert_eq!(map.global(3, Dof::Uy), map.global(3 + npl, Dof::Uy));
        assert!(map.is_prescribed(map.global(5, Dof::Uz)));
        // free dofs are numbered consecutively and invert free_index
        for (f, &g) in map.free_dofs().iter().enumerate() {
            assert_eq!(map.free(g), Some(f));
        }
    }

    #[test]
    fn conflicts_are_reported() {
        let m = mesh();
        let mut bc = BoundaryConditions::new();
        bc.prescribe(4, Dof::Potential, 1.0);
        bc.prescribe(4, Dof::Potential, 1.0);
        assert!(bc.resolve(&m, true).is_ok());
        bc.prescribe(4 + m.grid.nodes_per_layer(), Dof::Potential, 2.0);
        assert!(matches!(bc.resolve(&m, true), Err(Error::ConflictingConstraint { .. })));
        // untied layers are independent
        assert!(bc.resolve(&m, false).is_ok());
    }

    #[test]
    fn tying_requires_plane_strain() {
        let m = mesh();
        let bc = BoundaryConditions {
            plane_strain: false,
            ..Default::default()
        };
        assert!(bc.resolve(&m, true).is_err());
        assert!(bc.resolve(&m, false).is_ok());
    }
}
