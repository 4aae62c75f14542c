//! Legacy ASCII VTK unstructured-grid output (hexahedra, cell type 12).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

pub const VTK_HEXAHEDRON: u8 = 12;

#[derive(Debug, Clone)]
pub enum Attribute {
    Scalars(String, Vec<f64>),
    Vectors(String, Vec<[f64; 3]>),
}

impl Attribute {
    fn len(&self) -> usize {
        match self {
            Attribute::Scalars(_, v) => v.len(),
            Attribute::Vectors(_, v) => v.len(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct UnstructuredGrid {
    pub title: String,
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<[usize; 8]>,
    pub point_data: Vec<Attribute>,
    pub cell_data: Vec<Attribute>,
}

impl UnstructuredGrid {
    /// Grid over all mesh elements; `displacement` moves the points when given.
    pub fn from_mesh(mesh: &Mesh, displacement: Option<&[[f64; 3]]>) -> Self {
        let points = mesh
            .nodes
            .iter()
            .map(|n| match displacement {
                Some(u) => {
                    let d = u[n.id];
                    [n.x[0] + d[0], n.x[1] + d[1], n.x[2] + d[2]]
                }
                None => n.x,
            })
            .collect();
        UnstructuredGrid {
            title: "eaptop".to_string(),
            points,
            cells: mesh.elements.iter().map(|e| e.nodes).collect(),
            point_data: Vec::new(),
            cell_data: Vec::new(),
        }
    }

    pub fn point_scalars(&mut self, name: &str, values: Vec<f64>) -> &mut Self {
        debug_assert_eq!(values.len(), self.points.len());
        self.point_data.push(Attribute::Scalars(name.to_string(), values));
        self
    }

    pub fn point_vectors(&mut self, name: &str, values: Vec<[f64; 3]>) -> &mut Self {
        debug_assert_eq!(values.len(), self.points.len());
        self.point_data.push(Attribute::Vectors(name.to_string(), values));
        self
    }

    pub fn cell_scalars(&mut self, name: &str, values: Vec<f64>) -> &mut Self {
        debug_assert_eq!(values.len(), self.cells.len());
        self.cell_data.push(Attribute::Scalars(name.to_string(), values));
        self
    }

    pub fn to_legacy_ascii(&self) -> Result<String> {
        for a in &self.point_data {
            if a.len() != self.points.len() {
                return Err(Error::DimensionMismatch {
                    what: "VTK point data",
                    expected: self.points.len(),
                    got: a.len(),
                });
            }
        }
        for a in &self.cell_data {
            if a.len() != self.cells.len() {
                return Err(Error::DimensionMismatch {
                    what: "VTK cell data",
                    expected: self.cells.len(),
                    got: a.len(),
                });
            }
        }
        let mut s = String::with_capacity(64 * (self.points.len() + self.cells.len()));
        // writes to a String cannot fail
        let _ = writeln!(s, "# vtk DataFile Version 3.0");
        let _ = writeln!(s, "{}", self.title.lines().next().unwrap_or("eaptop"));
        let _ = writeln!(s, "ASCII");
        let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
        let _ = writeln!(s, "POINTS {} double", self.points.len());
        for p in &self.points {
            let _ = writeln!(s, "{:e} {:e} {:e}", p[0], p[1], p[2]);
        }
        let _ = writeln!(s, "CELLS {} {}", self.cells.len(), 9 * self.cells.len());
        for c in &self.cells {
            let _ = writeln!(
                s,
                "8 {} {} {} {} {} {} {} {}",
                c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]
            );
        }
        let _ = writeln!(s, "CELL_TYPES {}", self.cells.len());
        for _ in &self.cells {
            let _ = writeln!(s, "{VTK_HEXAHEDRON}");
        }
        write_attributes(&mut s, "POINT_DATA", self.points.len(), &self.point_data);
        write_attributes(&mut s, "CELL_DATA", self.cells.len(), &self.cell_data);
        Ok(s)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = self.to_legacy_ascii()?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn write_attributes(s: &mut String, section: &str, n: usize, attrs: &[Attribute]) {
    if attrs.is_empty() {
        return;
    }
    let _ = writeln!(s, "{section} {n}");
    for a in attrs {
        match a {
            Attribute::Scalars(name, v) => {
                let _ = writeln!(s, "SCALARS {name} double 1");
                let _ = writeln!(s, "LOOKUP_TABLE default");
                for x in v {
                    let _ = writeln!(s, "{x:e}");
                }
            }
            Attribute::Vectors(name, v) => {
                let _ = writeln!(s, "VECTORS {name} double");
                for x in v {
                    let _ = writeln!(s, "{:e} {:e} {:e}", x[0], x[1], x[2]);
                }
            }
        }
    }
}
