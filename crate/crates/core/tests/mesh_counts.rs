//! Element and node counts of the graded mesh against a brute-force walk of
//! the grading rule.

use eaptop::mesh::{build_mesh, MeshSpec, Region};

/// Free-space layers on one side: walk outward in steps growing by `ratio`
/// until the far boundary is passed; a trailing sliver shorter than half its
/// nominal step is absorbed by the previous layer.
fn layers_by_walking(h0: f64, width: f64, ratio: f64) -> usize {
    if width <= 0.0 {
        return 0;
    }
    let mut edges = vec![0.0f64];
    let mut step = h0;
    while *edges.last().unwrap() < width {
        edges.push(edges.last().unwrap() + step);
        step *= ratio;
    }
    let n = edges.len() - 1;
    let nominal_last = edges[n] - edges[n - 1];
    let trimmed_last = width - edges[n - 1];
    if n >= 2 && trimmed_last < 0.5 * nominal_last {
        n - 1
    } else {
        n
    }
}

fn expected(nx: usize, ny: usize, size: f64, factor: f64, grading: f64) -> (usize, usize) {
    let width = 0.5 * (factor - 1.0) * size;
    let lx = layers_by_walking(size / nx as f64, width, grading);
    let ly = layers_by_walking(size / ny as f64, width, grading);
    let (cx, cy) = (nx + 2 * lx, ny + 2 * ly);
    (cx * cy, 2 * (cx + 1) * (cy + 1))
}

fn spec(nx: usize, ny: usize, size: f64, factor: f64, grading: f64) -> MeshSpec {
    MeshSpec {
        design_nx: nx,
        design_ny: ny,
        design_size: size,
        freespace_extent_factor: factor,
        grading_ratio: grading,
        ..MeshSpec::default()
    }
}

#[test]
fn graded_4x4_matches_enumeration() {
    let m = build_mesh(&spec(4, 4, 1.0, 5.0, 1.3)).unwrap();
    // hand count: steps 0.25, 0.325, 0.4225, 0.549, 0.714 (trimmed to 0.453), 5 per side
    assert_eq!(expected(4, 4, 1.0, 5.0, 1.3), (196, 450));
    assert_eq!(m.elements.len(), 196);
    assert_eq!(m.nodes.len(), 450);
    assert_eq!(m.n_design(), 16);
    let free = m.elements.iter().filter(|e| e.region == Region::FreeSpace).count();
    assert_eq!(free, 180);
}

#[test]
fn other_gradings_match_enumeration() {
    for &(nx, ny, size, factor, grading) in &[
        (10, 10, 1.0, 5.0, 1.3),
        (60, 60, 10.0, 5.0, 1.3),
        (8, 4, 2.0, 3.0, 1.5),
        (7, 7, 1.0, 2.0, 1.0),
        (3, 5, 1.0, 9.0, 2.0),
        (2, 2, 1.0, 1.0, 1.0),
    ] {
        let m = build_mesh(&spec(nx, ny, size, factor, grading)).unwrap();
        let (ne, nn) = expected(nx, ny, size, factor, grading);
        assert_eq!(m.elements.len(), ne, "{nx}x{ny} factor {factor} grading {grading}");
        assert_eq!(m.nodes.len(), nn, "{nx}x{ny} factor {factor} grading {grading}");
        assert_eq!(m.n_design(), nx * ny);
    }
}
