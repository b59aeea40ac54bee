//! A finite-element proxy application for the steady heat equation on the
//! unit cube.
//!
//! The pipeline follows a classic mini-app layout: structured hexahedral
//! mesh, recursive coordinate bisection over simulated ranks, trilinear
//! element assembly into compressed row storage, and an unpreconditioned
//! conjugate gradient solve whose SpMV can run on plain CRS or on a
//! segment-blocked BCRS layout. Kernels are instrumented with exact flop
//! and memory-access counters so the two layouts can be compared without
//! hardware counters.

pub mod assembly;
pub mod comm;
pub mod domain;
pub mod error;
pub mod harness;
pub mod solver;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
