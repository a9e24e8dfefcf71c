//! Numerical toolkit for G-plurisubharmonic analysis over Grassmannian subsets.

pub mod dirichlet;
pub mod error;
pub mod geom_domain;
pub mod grassmann;
pub mod manifold;
pub mod repro;
pub mod symcore;

pub use error::{Error, Result};
pub use grassmann::{classify, min_max_trace, ConeVerdict, FiberRule, GrassmannSet};
pub use symcore::{
    eigen_partial_sums, fd_hessian, sample_frames, trace_pairing, Plane, ScalarField, SymForm,
};
