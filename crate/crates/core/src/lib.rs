//! Christoffel functions of generalized Jacobi area measures on planar
//! Jordan domains.
//!
//! The crate is organized bottom-up: [`geometry`] describes domains and
//! weights, [`quadrature`] builds area rules, [`orthopoly`] orthogonalizes
//! polynomials against the weighted rule, [`christoffel`] solves the
//! constrained L^p minimization, [`greenmap`] provides the exterior Green
//! function and its level curves, and [`experiments`] ties them together.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod christoffel;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod greenmap;
pub mod numeric;
pub mod orthopoly;
pub mod quadrature;

pub use error::{Error, Result};
pub use geometry::{make_catalog_domain, Domain, DomainKind, Singularity, WeightSpec};
pub use num_complex::Complex64;
