//! Matrix-free low-order (Q1 hexahedral) finite element operator engine.
//!
//! The crate provides three interchangeable ways to apply the same linear
//! operator to a nodal field:
//!
//! - **matrix-free**: per-element quadrature with geometry recomputed from
//!   nodal coordinates on the fly ([`operators`]),
//! - **partial assembly**: per-element quadrature with precomputed
//!   per-quadrature-point geometric/material factors ([`operators::partial_assembly`]),
//! - **assembled SpMV**: a global CSR matrix built once and applied as a
//!   sparse matrix-vector product ([`assembly`], [`linalg`]).
//!
//! Supported operators are the scalar Laplacian, the (component-wise) vector
//! Laplacian, and isotropic linear elasticity, discretized with trilinear
//! (Q1) basis functions on structured hexahedral box meshes.
//!
//! On top of the operators sit a conjugate gradient solver with pluggable
//! dot-product reduction strategies ([`cg`]) and a byte-traffic model that
//! predicts idealized ("speed of light") kernel transfer times and
//! throughput bounds for each operator strategy ([`perfmodel`]).

pub mod assembly;
pub mod cg;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod operators;
pub mod perfmodel;
pub mod reference_element;

pub use error::{Error, Result};
pub use linalg::{CsrMatrix, FieldVector, ReductionStrategy};
pub use mesh::Mesh;
pub use operators::{
    IsotropicElasticity, LinearOperator, OperatorKind, ScatterMode,
};
pub use perfmodel::{HardwareSpec, Strategy};
pub use reference_element::ReferenceElement;
