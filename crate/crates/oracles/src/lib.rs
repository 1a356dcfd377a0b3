//! Reference computations for the kyfan test suites.
//!
//! Everything here is written independently of the library: the projection
//! oracle solves an auxiliary-variable QP with a dense interior-point method,
//! and the generators build points with a prescribed projection structure.

pub mod fd;
pub mod gen;
pub mod qp;

pub use qp::{project_epigraph_qp, project_vector_epigraph_qp, QpSolution};
