//! Local randomized neural network (LRNN) collocation solvers for elliptic and
//! parabolic interface problems.
//!
//! One frozen random-feature network per subdomain supplies a basis; the PDE,
//! interface jump conditions and boundary data are collocated at random
//! points and the output weights come from one linear least-squares solve.

pub mod assembly;
pub mod calculus;
pub mod error;
pub mod geometry;
pub mod linsolve;
pub mod par;
pub mod problems;
pub mod quadrature;
pub mod randnet;
pub mod sampling;

pub use error::{Error, Result};
