//! Trilinear hexahedron shape functions and the 2x2x2 Gauss rule.
//!
//! Local node order follows the VTK hexahedron (cell type 12): nodes 0-3 walk
//! the bottom face counter-clockwise, nodes 4-7 the top face.

use std::sync::OnceLock;

pub const NODES: usize = 8;
pub const GAUSS_POINTS: usize = 8;

/// Reference coordinates of the eight vertices.
pub const REF_NODES: [[f64; 3]; NODES] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Shape function values and reference derivatives at one quadrature point.
#[derive(Debug, Clone, Copy)]
pub struct GaussPoint {
    pub xi: [f64; 3],
    pub weight: f64,
    pub n: [f64; NODES],
    pub dn_dxi: [[f64; 3]; NODES],
}

pub fn shape_values(xi: [f64; 3]) -> [f64; NODES] {
    let mut n = [0.0; NODES];
    for (a, r) in REF_NODES.iter().enumerate() {
        n[a] = 0.125 * (1.0 + xi[0] * r[0]) * (1.0 + xi[1] * r[1]) * (1.0 + xi[2] * r[2]);
    }
    n
}

pub fn shape_derivatives(xi: [f64; 3]) -> [[f64; 3]; NODES] {
    let mut d = [[0.0; 3]; NODES];
    for (a, r) in REF_NODES.iter().enumerate() {
        let f = [1.0 + xi[0] * r[0], 1.0 + xi[1] * r[1], 1.0 + xi[2] * r[2]];
        d[a][0] = 0.125 * r[0] * f[1] * f[2];
        d[a][1] = 0.125 * r[1] * f[0] * f[2];
        d[a][2] = 0.125 * r[2] * f[0] * f[1];
    }
    d
}

/// The 2x2x2 Gauss-Legendre rule; points ordered like the vertices.
pub fn gauss_points() -> &'static [GaussPoint; GAUSS_POINTS] {
    static RULE: OnceLock<[GaussPoint; GAUSS_POINTS]> = OnceLock::new();
    RULE.get_or_init(|| {
        let g = 1.0 / 3f64.sqrt();
        std::array::from_fn(|i| {
            let r = REF_NODES[i];
            let xi = [g * r[0], g * r[1], g * r[2]];
            GaussPoint {
                xi,
                weight: 1.0,
                n: shape_values(xi),
                dn_dxi: shape_derivatives(xi),
            }
        })
    })
}

/// Physical gradients of the shape functions plus det of the Jacobian.
///
/// Returns `None` when the 3x3 Jacobian is singular.
pub fn physical_gradients(
    coords: &[[f64; 3]; NODES],
    dn_dxi: &[[f64; 3]; NODES],
) -> Option<([[f64; 3]; NODES], f64)> {
    // jac[i][j] = dX_i / dxi_j
    let mut jac = [[0.0; 3]; 3];
    for a in 0..NODES {
        for i in 0..3 {
            for j in 0..3 {
                jac[i][j] += coords[a][i] * dn_dxi[a][j];
            }
        }
    }
    let det = det3(&jac);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let inv = inv3(&jac, det);
    // dN/dX_i = sum_j dN/dxi_j * dxi_j/dX_i
    let mut grads = [[0.0; 3]; NODES];
    for a in 0..NODES {
        for i in 0..3 {
            grads[a][i] = (0..3).map(|j| dn_dxi[a][j] * inv[j][i]).sum();
        }
    }
    Some((grads, det))
}

pub(crate) fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn inv3(m: &[[f64; 3]; 3], det: f64) -> [[f64; 3]; 3] {
    let d = 1.0 / det;
    [
        [
            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * d,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * d,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * d,
        ],
        [
            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * d,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * d,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * d,
        ],
        [
            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * d,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * d,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * d,
        ],
    ]
}
