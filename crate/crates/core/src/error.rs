//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Mesh dimensions or box extents fail validation.
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    /// The node count does not fit in 32-bit indices.
    #[error("node count {num_nodes} exceeds the 32-bit index limit")]
    NodeIndexOverflow { num_nodes: u128 },

    /// Two vectors (or a matrix and a vector) disagree on length or layout.
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    /// CSR structural invariants are violated.
    #[error("invalid CSR matrix: {0}")]
    InvalidCsr(String),

    /// A non-positive Jacobian determinant was encountered.
    #[error("element {element} has non-positive Jacobian determinant {det_j}")]
    DegenerateElement { element: usize, det_j: f64 },

    /// Material parameters fail validation.
    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    /// Partial-assembly data was applied with the wrong kind or mesh.
    #[error("operator data mismatch: {0}")]
    OperatorMismatch(String),

    /// CG produced a non-finite or non-positive curvature coefficient.
    #[error("CG diverged at iteration {iteration}: {detail}")]
    Divergence { iteration: usize, detail: String },

    /// An allocation request could not be satisfied.
    #[error("out of memory allocating {bytes} bytes for {context}")]
    OutOfMemory { bytes: u64, context: &'static str },

    /// Invalid run or model configuration.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
