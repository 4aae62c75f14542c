//! Structured design block embedded in a graded, truncated free-space grid.
//!
//! The domain is a tensor-product grid of trilinear bricks, one element thick
//! in the out-of-plane direction. Grid lines of the design block continue into
//! the free space, so the two regions conform node-to-node. Away from the
//! design block the free-space layers grow geometrically.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shape;

/// Nodal degree of freedom kinds: three displacement components and the
/// electric potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dof {
    Ux = 0,
    Uy = 1,
    Uz = 2,
    Potential = 3,
}

impl Dof {
    pub const ALL: [Dof; 4] = [Dof::Ux, Dof::Uy, Dof::Uz, Dof::Potential];
    pub const DISPLACEMENT: [Dof; 3] = [Dof::Ux, Dof::Uy, Dof::Uz];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: usize,
    /// Material coordinates in mm.
    pub x: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Design,
    FreeSpace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Element {
    pub id: usize,
    pub nodes: [usize; 8],
    pub region: Region,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSpec {
    pub design_nx: usize,
    pub design_ny: usize,
    /// Side length of the square design block (mm). The 10 mm default puts
    /// the 0.25 mm filter length at a few elements of the 200×200 grid.
    pub design_size: f64,
    /// Out-of-plane depth (mm).
    pub thickness: f64,
    /// Free-space half-width divided by the design half-width. 1 means no free space.
    pub freespace_extent_factor: f64,
    /// Geometric growth factor of consecutive free-space layers.
    pub grading_ratio: f64,
}

impl Default for MeshSpec {
    fn default() -> Self {
        MeshSpec {
            design_nx: 200,
            design_ny: 200,
            design_size: 10.0,
            thickness: 1.0,
            freespace_extent_factor: 5.0,
            grading_ratio: 1.3,
        }
    }
}

impl MeshSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidMeshSpec(msg.to_string()));
        if self.design_nx == 0 || self.design_ny == 0 {
            return bad("element counts must be at least 1");
        }
        if !(self.design_size > 0.0 && self.design_size.is_finite()) {
            return bad("design_size must be positive and finite");
        }
        if !(self.thickness > 0.0 && self.thickness.is_finite()) {
            return bad("thickness must be positive and finite");
        }
        if !(self.grading_ratio >= 1.0 && self.grading_ratio.is_finite()) {
            return bad("grading_ratio must be >= 1");
        }
        if !(self.freespace_extent_factor >= 1.0 && self.freespace_extent_factor.is_finite()) {
            return bad("freespace_extent_factor must be >= 1");
        }
        Ok(())
    }

    pub fn element_size(&self) -> (f64, f64) {
        (
            self.design_size / self.design_nx as f64,
            self.design_size / self.design_ny as f64,
        )
    }

    /// Distance from the design block edge to the far-field boundary.
    pub fn freespace_width(&self) -> f64 {
        0.5 * (self.freespace_extent_factor - 1.0) * self.design_size
    }
}

/// Widths of successive free-space layers, innermost first.
///
/// The first layer matches the design element size; each further layer grows
/// by `ratio`. The final layer is trimmed to land exactly on `width`, and
/// merged into its predecessor when the trimmed remainder would be less than
/// half its nominal size.
pub fn graded_layer_sizes(h0: f64, width: f64, ratio: f64) -> Result<Vec<f64>> {
    const MAX_LAYERS: usize = 100_000;
    let mut sizes = Vec::new();
    if width <= 0.0 {
        return Ok(sizes);
    }
    let mut covered = 0.0;
    let mut h = h0;
    while covered < width {
        if sizes.len() >= MAX_LAYERS {
            return Err(Error::InvalidMeshSpec(format!(
                "free-space grading needs more than {MAX_LAYERS} layers"
            )));
        }
        sizes.push(h);
        covered += h;
        h *= ratio;
    }
    let n = sizes.len();
    let before_last: f64 = sizes[..n - 1].iter().sum();
    let remainder = width - before_last;
    if n >= 2 && remainder < 0.5 * sizes[n - 1] {
        sizes.pop();
        *sizes.last_mut().unwrap() += remainder;
    } else {
        sizes[n - 1] = remainder;
    }
    if sizes.iter().any(|&s| !(s > 1e-12 * h0)) {
        return Err(Error::InvalidMeshSpec("grading produced a degenerate layer".into()));
    }
    Ok(sizes)
}

/// Tensor-product grid layout shared by both node layers.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub zs: [f64; 2],
    /// Grid index of the lower-left corner of the design block.
    pub design_origin: (usize, usize),
    pub design_cells: (usize, usize),
}

impl GridLayout {
    pub fn nodes_per_layer(&self) -> usize {
        self.xs.len() * self.ys.len()
    }

    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        k * self.nodes_per_layer() + j * self.xs.len() + i
    }

    pub fn is_design_cell(&self, i: usize, j: usize) -> bool {
        let (i0, j0) = self.design_origin;
        let (nx, ny) = self.design_cells;
        i >= i0 && i < i0 + nx && j >= j0 && j < j0 + ny
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub spec: MeshSpec,
    pub nodes: Vec<Node>,
    pub elements: Vec<Element>,
    pub dof_sets: BTreeMap<String, Vec<(usize, Dof)>>,
    /// Design elements occupy ids `0..n_design` in row-major design-grid order.
    pub design_element_ids: Vec<usize>,
    pub grid: GridLayout,
}

pub const FAR_FIELD: &str = "far_field";

pub fn build_mesh(spec: &MeshSpec) -> Result<Mesh> {
    spec.validate()?;
    let (hx, hy) = spec.element_size();
    let width = spec.freespace_width();
    let layers_x = graded_layer_sizes(hx, width, spec.grading_ratio)?;
    let layers_y = graded_layer_sizes(hy, width, spec.grading_ratio)?;

    let size = spec.design_size;
    let axis = |h: f64, n: usize, layers: &[f64]| -> Vec<f64> {
        // offsets[m] = distance of the m-th free-space grid line from the block edge
        let mut offsets = Vec::with_capacity(layers.len());
        let mut acc = 0.0;
        for (m, s) in layers.iter().enumerate() {
            acc += s;
            offsets.push(if m + 1 == layers.len() { width } else { acc });
        }
        let mut c = Vec::with_capacity(n + 1 + 2 * layers.len());
        c.extend(offsets.iter().rev().map(|o| -o));
        c.extend((0..=n).map(|i| if i == n { size } else { i as f64 * h }));
        c.extend(offsets.iter().map(|o| size + o));
        c
    };
    let xs = axis(hx, spec.design_nx, &layers_x);
    let ys = axis(hy, spec.design_ny, &layers_y);
    let grid = GridLayout {
        design_origin: (layers_x.len(), layers_y.len()),
        design_cells: (spec.design_nx, spec.design_ny),
        xs,
        ys,
        zs: [0.0, spec.thickness],
    };

    let mut nodes = Vec::with_capacity(2 * grid.nodes_per_layer());
    for (k, &z) in grid.zs.iter().enumerate() {
        for (j, &y) in grid.ys.iter().enumerate() {
            for (i, &x) in grid.xs.iter().enumerate() {
                let id = grid.node_index(i, j, k);
                debug_assert_eq!(id, nodes.len());
                nodes.push(Node { id, x: [x, y, z] });
            }
        }
    }

    let cells_x = grid.xs.len() - 1;
    let cells_y = grid.ys.len() - 1;
    let brick = |i: usize, j: usize| -> [usize; 8] {
        [
            grid.node_index(i, j, 0),
            grid.node_index(i + 1, j, 0),
            grid.node_index(i + 1, j + 1, 0),
            grid.node_index(i, j + 1, 0),
            grid.node_index(i, j, 1),
            grid.node_index(i + 1, j, 1),
            grid.node_index(i + 1, j + 1, 1),
            grid.node_index(i, j + 1, 1),
        ]
    };
    let mut elements = Vec::with_capacity(cells_x * cells_y);
    let (i0, j0) = grid.design_origin;
    for j in 0..spec.design_ny {
        for i in 0..spec.design_nx {
            elements.push(Element {
                id: elements.len(),
                nodes: brick(i0 + i, j0 + j),
                region: Region::Design,
            });
        }
    }
    let design_element_ids: Vec<usize> = (0..elements.len()).collect();
    for j in 0..cells_y {
        for i in 0..cells_x {
            if !grid.is_design_cell(i, j) {
                elements.push(Element {
                    id: elements.len(),
                    nodes: brick(i, j),
                    region: Region::FreeSpace,
                });
            }
        }
    }

    let mut mesh = Mesh {
        spec: *spec,
        nodes,
        elements,
        dof_sets: BTreeMap::new(),
        design_element_ids,
        grid,
    };
    mesh.check_jacobians()?;

    let (nxg, nyg) = (mesh.grid.xs.len() - 1, mesh.grid.ys.len() - 1);
    let mut far = Vec::new();
    for k in 0..2 {
        for j in 0..=nyg {
            for i in 0..=nxg {
                if i == 0 || j == 0 || i == nxg || j == nyg {
                    let n = mesh.grid.node_index(i, j, k);
                    far.extend(Dof::DISPLACEMENT.iter().map(|&d| (n, d)));
                }
            }
        }
    }
    far.sort_unstable();
    mesh.dof_sets.insert(FAR_FIELD.to_string(), far);
    Ok(mesh)
}

impl Mesh {
    pub fn n_design(&self) -> usize {
        self.design_element_ids.len()
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 3]; 8] {
        let el = &self.elements[e];
        std::array::from_fn(|a| self.nodes[el.nodes[a]].x)
    }

    /// Node in the bottom layer sharing the in-plane position of `node`.
    pub fn layer_twin(&self, node: usize) -> usize {
        node % self.grid.nodes_per_layer()
    }

    /// Lower-left and upper-right in-plane corners of the design block.
    pub fn design_bounds(&self) -> ([f64; 2], [f64; 2]) {
        ([0.0, 0.0], [self.spec.design_size, self.spec.design_size])
    }

    /// Design-block volume V_DD.
    pub fn design_volume(&self) -> f64 {
        self.spec.design_size * self.spec.design_size * self.spec.thickness
    }

    pub fn dof_set(&self, name: &str) -> Result<&[(usize, Dof)]> {
        self.dof_sets
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownBoundary(name.to_string()))
    }

    /// Collects every (node, dof) pair accepted by `predicate` under `name`.
    ///
    /// Re-tagging an existing name with the identical selection is a no-op.
    pub fn tag_boundary<P>(&mut self, name: &str, predicate: P) -> Result<usize>
    where
        P: Fn(&Node, Dof) -> bool,
    {
        let selection: Vec<(usize, Dof)> = self
            .nodes
            .iter()
            .flat_map(|n| Dof::ALL.iter().filter(|&&d| predicate(n, d)).map(move |&d| (n.id, d)))
            .collect();
        if selection.is_empty() {
            return Err(Error::EmptySelection(name.to_string()));
        }
        if let Some(existing) = self.dof_sets.get(name) {
            if *existing == selection {
                return Ok(selection.len());
            }
            return Err(Error::DuplicateBoundary(name.to_string()));
        }
        let count = selection.len();
        self.dof_sets.insert(name.to_string(), selection);
        Ok(count)
    }

    fn check_jacobians(&self) -> Result<()> {
        for el in &self.elements {
            let coords = self.element_coords(el.id);
            for (g, gp) in shape::gauss_points().iter().enumerate() {
                let det = shape::physical_gradients(&coords, &gp.dn_dxi).map_or(0.0, |(_, d)| d);
                if !(det > 0.0) {
                    return Err(Error::DegenerateElement {
                        element: el.id,
                        gauss_point: g,
                        det_j: det,
                    });
                }
            }
        }
        Ok(())
    }

    /// Export the undeformed mesh with region ids as cell data.
    pub fn to_vtk(&self) -> crate::vtk::UnstructuredGrid {
        let mut grid = crate::vtk::UnstructuredGrid::from_mesh(self, None);
        grid.cell_scalars(
            "region",
            self.elements
                .iter()
                .map(|e| match e.region {
                    Region::Design => 1.0,
                    Region::FreeSpace => 0.0,
                })
                .collect(),
        );
        grid
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn spec(nx: usize, ny: usize, factor: f64, grading: f64) -> MeshSpec {
        MeshSpec {
            design_nx: nx,
            design_ny: ny,
            design_size: 1.0,
            thickness: 1.0,
            freespace_extent_factor: factor,
            grading_ratio: grading,
        }
    }

    #[test]
    fn design_only_counts() {
        let m = build_mesh(&spec(2, 2, 1.0, 1.0)).unwrap();
        assert_eq!(m.n_design(), 4);
        assert_eq!(m.elements.len(), 4);
        assert_eq!(m.nodes.len(), 18);
    }

    #[test]
    fn paper_resolution_design_count() {
        let m = build_mesh(&spec(200, 200, 1.0, 1.0)).unwrap();
        assert_eq!(m.n_design(), 40_000);
    }

    #[test]
    fn interface_nodes_are_shared() {
        let m = build_mesh(&spec(4, 4, 5.0, 1.3)).unwrap();
        let mut seen = HashSet::new();
        for n in &m.nodes {
            let key = n.x.map(f64::to_bits);
            assert!(seen.insert(key), "duplicate node at {:?}", n.x);
        }
        // every design-element corner is referenced by some free-space element or lies inside
        let design_nodes: HashSet<usize> = m.design_element_ids.iter().flat_map(|&e| m.elements[e].nodes).collect();
        let fs_nodes: HashSet<usize> = m
            .elements
            .iter()
            .filter(|e| e.region == Region::FreeSpace)
            .flat_map(|e| e.nodes)
            .collect();
        let shared = design_nodes.intersection(&fs_nodes).count();
        // boundary ring of a 4x4 block: 16 nodes per layer
        assert_eq!(shared, 32);
    }

    #[test]
    fn far_field_lies_on_outer_box() {
        let m = build_mesh(&spec(4, 4, 5.0, 1.3)).unwrap();
        let far = m.dof_set(FAR_FIELD).unwrap();
        assert!(!far.is_empty());
        for &(n, _) in far {
            let x = m.nodes[n].x;
            let on_edge = [x[0] + 2.0, x[0] - 3.0, x[1] + 2.0, x[1] - 3.0].iter().any(|v| v.abs() < 1e-12);
            assert!(on_edge, "{x:?}");
        }
    }

    #[test]
    fn deterministic() {
        let a = build_mesh(&spec(6, 5, 4.0, 1.25)).unwrap();
        let b = build_mesh(&spec(6, 5, 4.0, 1.25)).unwrap();
        let bits = |m: &Mesh| m.nodes.iter().flat_map(|n| n.x.map(f64::to_bits)).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(build_mesh(&spec(0, 2, 1.0, 1.0)).is_err());
        assert!(build_mesh(&spec(2, 2, 0.5, 1.0)).is_err());
        assert!(build_mesh(&spec(2, 2, 2.0, 0.9)).is_err());
        assert!(build_mesh(&spec(2, 2, 2.0, f64::NAN)).is_err());
    }

    #[test]
    fn tag_edge_and_empty() {
        let mut m = build_mesh(&spec(4, 4, 3.0, 1.3)).unwrap();
        let count = m
            .tag_boundary("upper_left_edge", |n, d| {
                d == Dof::Potential && n.x[0].abs() < 1e-12 && n.x[1] >= 0.5 - 1e-12 && n.x[1] <= 1.0 + 1e-12
            })
            .unwrap();
        // nodes at y = 0.5, 0.75, 1.0 on x = 0, two layers
        assert_eq!(count, 3 * 2);
        // idempotent re-tag
        assert_eq!(
            m.tag_boundary("upper_left_edge", |n, d| {
                d == Dof::Potential && n.x[0].abs() < 1e-12 && n.x[1] >= 0.5 - 1e-12 && n.x[1] <= 1.0 + 1e-12
            })
            .unwrap(),
            6
        );
        assert!(matches!(
            m.tag_boundary("upper_left_edge", |_, d| d == Dof::Ux),
            Err(Error::DuplicateBoundary(_))
        ));
        assert!(matches!(m.tag_boundary("nothing", |_, _| false), Err(Error::EmptySelection(_))));
    }

    #[test]
    fn graded_layers_cover_width() {
        for &(h0, w, r) in &[(0.25, 2.0, 1.3), (0.1, 1.0, 1.0), (0.3, 0.2, 1.5), (0.01, 20.0, 1.2)] {
            let s = graded_layer_sizes(h0, w, r).unwrap();
            let total: f64 = s.iter().sum();
            assert!((total - w).abs() < 1e-12, "{total} vs {w}");
            if s.len() > 1 {
                assert!((s[0] - h0).abs() < 1e-15);
            }
        }
    }
}
