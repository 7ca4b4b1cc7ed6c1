//! Two-level overlapping Schwarz preconditioners for the time-harmonic
//! Maxwell equations with absorption on the unit cube.
//!
//! The crate covers the whole pipeline: structured tetrahedral meshes
//! ([`mesh`]), lowest-order Nédélec assembly ([`assembly`]), overlapping
//! subdomain covers and the nested coarse space ([`decomposition`]), the
//! one- and two-level Schwarz family ([`precond`]) on top of a sparse
//! complex-symmetric direct solver ([`direct`]), GMRES ([`krylov`]) and the
//! experiment driver ([`experiments`]).

// Negated comparisons on floats are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod decomposition;
pub mod direct;
pub mod error;
pub mod experiments;
pub mod krylov;
pub mod mesh;
pub mod ordering;
pub mod precond;
pub mod quadrature;
pub mod sparse;

pub use error::{Error, Result};
pub use num_complex::Complex64;
