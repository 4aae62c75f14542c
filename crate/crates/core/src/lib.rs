//! Topology optimization of electro-active polymer actuators with
//! integrated electrodes under large deformations.

// `!(x > 0.0)` is used on purpose so NaN fails validation; index loops
// mirror the tensor notation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod driver;
pub mod error;
pub mod fem;
pub mod material;
pub mod mesh;
pub mod mma;
pub mod regularization;
pub mod sensitivity;
pub mod shape;
pub mod verify;
pub mod vtk;

pub use error::{Error, Result};
