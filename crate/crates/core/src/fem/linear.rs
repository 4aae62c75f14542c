//! Sparse LU solves of the indefinite coupled tangent.
//!
//! The tangent mixes mechanical stiffnesses from 1e-10 MPa (void) to 1 MPa
//! (electrode) with electric entries of order ε0. The matrix is
//! symmetrically Jacobi-scaled, S K S with S = diag(|K_ii|^{-1/2}), before
//! the factorization.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::Mat;

use crate::error::{Error, Result};

/// Column-compressed pattern of the free-dof system with a reusable
/// symbolic LU analysis.
pub struct LinearSolver {
    pattern: SymbolicSparseColMat<usize>,
    diag: Vec<usize>,
    symbolic: SymbolicLu<usize>,
}

impl std::fmt::Debug for LinearSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearSolver")
            .field("n", &self.pattern.ncols())
            .field("nnz", &self.pattern.row_idx().len())
            .finish()
    }
}

impl LinearSolver {
    /// `col_ptr`/`row_idx` must be sorted within each column and contain the
    /// diagonal.
    pub fn new(n: usize, col_ptr: Vec<usize>, row_idx: Vec<usize>) -> Result<Self> {
        let pattern = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        let mut diag = Vec::with_capacity(n);
        for c in 0..n {
            let range = pattern.col_range(c);
            let rows = &pattern.row_idx()[range.clone()];
            let k = rows
                .binary_search(&c)
                .map_err(|_| Error::LinearSolver(format!("missing diagonal in column {c}")))?;
            diag.push(range.start + k);
        }
        let symbolic = SymbolicLu::try_new(pattern.as_ref()).map_err(|e| Error::LinearSolver(format!("{e:?}")))?;
        Ok(LinearSolver {
            pattern,
            diag,
            symbolic,
        })
    }

    pub fn n(&self) -> usize {
        self.pattern.ncols()
    }

    pub fn nnz(&self) -> usize {
        self.pattern.row_idx().len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        self.pattern.col_ptr()
    }

    pub fn row_idx(&self) -> &[usize] {
        self.pattern.row_idx()
    }

    /// Position of entry (row, col) in the value array.
    #[inline]
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let range = self.pattern.col_range(col);
        let rows = &self.pattern.row_idx()[range.clone()];
        rows.binary_search(&row).ok().map(|k| range.start + k)
    }

    /// Product K x for values laid out on this pattern.
    pub fn multiply(&self, values: &[f64], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        let rows = self.pattern.row_idx();
        for c in 0..self.n() {
            for k in self.pattern.col_range(c) {
                y[rows[k]] += values[k] * x[c];
            }
        }
        y
    }

    pub fn factor(&self, values: &[f64]) -> Result<Factorization> {
        if values.len() != self.nnz() {
            return Err(Error::DimensionMismatch {
                what: "matrix values",
                expected: self.nnz(),
                got: values.len(),
            });
        }
        let scale: Vec<f64> = self
            .diag
            .iter()
            .map(|&k| {
                let d = values[k].abs();
                if d > 0.0 && d.is_finite() {
                    1.0 / d.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let rows = self.pattern.row_idx();
        let mut scaled = Vec::with_capacity(values.len());
        for c in 0..self.n() {
            for k in self.pattern.col_range(c) {
                scaled.push(values[k] * scale[rows[k]] * scale[c]);
            }
        }
        if scaled.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolver("non-finite matrix entry".into()));
        }
        let mat = SparseColMat::new(self.pattern.clone(), scaled);
        let lu = Lu::try_new_with_symbolic(self.symbolic.clone(), mat.as_ref())
            .map_err(|e| Error::LinearSolver(format!("LU factorization failed: {e:?}")))?;
        Ok(Factorization { lu, scale })
    }
}

pub struct Factorization {
    lu: Lu<usize, f64>,
    scale: Vec<f64>,
}

impl Factorization {
    fn run(&self, rhs: &[f64], transpose: bool) -> Result<Vec<f64>> {
        let n = self.scale.len();
        if rhs.len() != n {
            return Err(Error::DimensionMismatch {
                what: "right-hand side",
                expected: n,
                got: rhs.len(),
            });
        }
        let mut m = Mat::from_fn(n, 1, |i, _| rhs[i] * self.scale[i]);
        if transpose {
            self.lu.solve_transpose_in_place(m.as_mut());
        } else {
            self.lu.solve_in_place(m.as_mut());
        }
        let x: Vec<f64> = (0..n).map(|i| m[(i, 0)] * self.scale[i]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolver("singular system".into()));
        }
        Ok(x)
    }

    /// Solves K x = b.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.run(rhs, false)
    }

    /// Solves Kᵀ x = b.
    pub fn solve_transpose(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.run(rhs, true)
    }
}
