//! Estimation of Minkowski tensors from finite point samples.
//!
//! The pipeline lays a randomly shifted lattice over a neighbourhood of the
//! sample, accumulates Voronoi tensors for a whole schedule of radii in one
//! pass, and recovers the Minkowski tensors either by a least-squares fit in
//! the radius or, for surface tensors, by a single small-radius quotient.

// Index loops mirror the linear algebra; `!(x <= y)` guards are meant to catch NaN.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]
pub mod error;
pub mod symtensor;

pub use error::{Error, Result};
pub mod io;
pub mod lsq;
pub mod oracles;
pub mod shape;
pub mod spatial;
pub mod surface;
pub mod voronoi;
