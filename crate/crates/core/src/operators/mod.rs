//! Operator application: matrix-free kernels, partial assembly, and the
//! boundary-condition wrapper.
//!
//! All element loops follow the same scheme: gather the element's nodal
//! values into local storage, do all quadrature work element-locally, and
//! scatter-add the local result into the global output vector. Each element
//! is one work item with only element-local scratch.
//!
//! Two scatter modes are provided. [`ScatterMode::Deterministic`] processes
//! the mesh one parity color at a time (elements of one color share no
//! nodes), so every output entry receives its contributions in a fixed
//! order and results are bit-identical for any worker count.
//! [`ScatterMode::Atomic`] runs a single parallel loop over all elements
//! with atomic accumulation; faster to schedule, but the addition order is
//! scheduling-dependent.

mod matrix_free;
pub mod partial_assembly;

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::FieldVector;
use crate::mesh::Mesh;
use crate::reference_element::ReferenceElement;

pub use matrix_free::{apply_elasticity, apply_scalar_laplace, apply_vector_laplace};
pub use partial_assembly::{
    apply_partial_assembly, setup_partial_assembly, PartialAssemblyData,
};

/// The three operator kinds of the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    ScalarLaplace,
    VectorLaplace,
    Elasticity,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 3] = [
        OperatorKind::ScalarLaplace,
        OperatorKind::VectorLaplace,
        OperatorKind::Elasticity,
    ];

    /// Degrees of freedom per node.
    pub fn components(&self) -> usize {
        match self {
            OperatorKind::ScalarLaplace => 1,
            OperatorKind::VectorLaplace | OperatorKind::Elasticity => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OperatorKind::ScalarLaplace => "scalar_laplace",
            OperatorKind::VectorLaplace => "vector_laplace",
            OperatorKind::Elasticity => "elasticity",
        }
    }
}

impl std::str::FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalar_laplace" | "scalar-laplace" | "scalar" => Ok(OperatorKind::ScalarLaplace),
            "vector_laplace" | "vector-laplace" | "vector" => Ok(OperatorKind::VectorLaplace),
            "elasticity" => Ok(OperatorKind::Elasticity),
            other => Err(Error::InvalidConfig(format!(
                "unknown operator kind '{other}' \
                 (expected scalar_laplace|vector_laplace|elasticity)"
            ))),
        }
    }
}

/// Isotropic linear-elastic material: `sigma = lambda tr(eps) I + 2 mu eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicElasticity {
    pub lambda: f64,
    pub mu: f64,
}

impl IsotropicElasticity {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !mu.is_finite() || mu <= 0.0 {
            return Err(Error::InvalidMaterial(format!(
                "shear modulus must be positive and finite, got {mu}"
            )));
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidMaterial(format!(
                "first Lame parameter must be nonnegative and finite, got {lambda}"
            )));
        }
        Ok(Self { lambda, mu })
    }
}

/// How element contributions are accumulated into the shared output vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScatterMode {
    /// Colored element sets, sequential over colors, parallel within.
    /// Bit-identical across worker counts.
    #[default]
    Deterministic,
    /// One parallel loop over all elements with atomic adds.
    Atomic,
}

/// Anything that maps a nodal field to a nodal field linearly.
pub trait LinearOperator: Sync {
    fn apply(&self, u: &FieldVector) -> Result<FieldVector>;
    fn num_nodes(&self) -> usize;
    fn components(&self) -> usize;

    fn num_dofs(&self) -> usize {
        self.num_nodes() * self.components()
    }
}

/// Matrix-free operator: recomputes element geometry from nodal coordinates
/// at every quadrature point of every apply.
pub struct MatrixFreeOperator<'a> {
    mesh: &'a Mesh,
    reference: &'a ReferenceElement,
    kind: OperatorKind,
    material: Option<IsotropicElasticity>,
    scatter: ScatterMode,
    colors: [Vec<u32>; 8],
}

impl<'a> MatrixFreeOperator<'a> {
    pub fn new(
        mesh: &'a Mesh,
        reference: &'a ReferenceElement,
        kind: OperatorKind,
        material: Option<IsotropicElasticity>,
        scatter: ScatterMode,
    ) -> Result<Self> {
        if kind == OperatorKind::Elasticity && material.is_none() {
            return Err(Error::InvalidMaterial(
                "elasticity operator requires material parameters".into(),
            ));
        }
        Ok(Self {
            mesh,
            reference,
            kind,
            material,
            scatter,
            colors: mesh.color_sets(),
        })
    }
}

impl LinearOperator for MatrixFreeOperator<'_> {
    fn apply(&self, u: &FieldVector) -> Result<FieldVector> {
        match self.kind {
            OperatorKind::ScalarLaplace => matrix_free::scalar_laplace(
                self.mesh,
                self.reference,
                u,
                &self.colors,
                self.scatter,
            ),
            OperatorKind::VectorLaplace => matrix_free::vector_laplace(
                self.mesh,
                self.reference,
                u,
                &self.colors,
                self.scatter,
            ),
            OperatorKind::Elasticity => matrix_free::elasticity(
                self.mesh,
                self.reference,
                self.material.expect("validated at construction"),
                u,
                &self.colors,
                self.scatter,
            ),
        }
    }

    fn num_nodes(&self) -> usize {
        self.mesh.num_nodes
    }

    fn components(&self) -> usize {
        self.kind.components()
    }
}

/// CSR-backed operator (assembled SpMV strategy).
pub struct CsrOperator<'a> {
    pub matrix: &'a crate::linalg::CsrMatrix,
    pub components: usize,
}

impl LinearOperator for CsrOperator<'_> {
    fn apply(&self, u: &FieldVector) -> Result<FieldVector> {
        crate::linalg::spmv(self.matrix, u)
    }

    fn num_nodes(&self) -> usize {
        self.matrix.num_rows / self.components
    }

    fn components(&self) -> usize {
        self.components
    }
}

/// Symmetric elimination of constrained dofs around any operator:
/// `v = P A P u + (I - P) u`, with `P` zeroing the constrained dofs.
///
/// The wrapped operator stays symmetric positive definite on the
/// unconstrained subspace and acts as the identity on constrained dofs.
pub struct ConstrainedOperator<Op> {
    inner: Op,
    constrained: Vec<bool>,
}

impl<Op: LinearOperator> ConstrainedOperator<Op> {
    /// Constrains every component of every node in `boundary_nodes`.
    pub fn from_boundary_nodes(inner: Op, boundary_nodes: &[u32]) -> Self {
        let c = inner.components();
        let mut constrained = vec![false; inner.num_dofs()];
        for &n in boundary_nodes {
            for l in 0..c {
                constrained[n as usize * c + l] = true;
            }
        }
        Self { inner, constrained }
    }

    pub fn constrained_dofs(&self) -> &[bool] {
        &self.constrained
    }

    pub fn inner(&self) -> &Op {
        &self.inner
    }
}

impl<Op: LinearOperator> LinearOperator for ConstrainedOperator<Op> {
    fn apply(&self, u: &FieldVector) -> Result<FieldVector> {
        if u.len() != self.constrained.len() {
            return Err(Error::ShapeMismatch {
                context: "constrained apply",
                expected: self.constrained.len(),
                actual: u.len(),
            });
        }
        let mut pu = u.clone();
        for (v, &fixed) in pu.values.iter_mut().zip(&self.constrained) {
            if fixed {
                *v = 0.0;
            }
        }
        let mut out = self.inner.apply(&pu)?;
        for i in 0..out.len() {
            if self.constrained[i] {
                out.values[i] = u.values[i];
            }
        }
        Ok(out)
    }

    fn num_nodes(&self) -> usize {
        self.inner.num_nodes()
    }

    fn components(&self) -> usize {
        self.inner.components()
    }
}

// ---------------------------------------------------------------------
// Shared element-loop driver
// ---------------------------------------------------------------------

#[inline]
fn atomic_add(slot: &AtomicU64, value: f64) {
    let mut cur = slot.load(Ordering::Relaxed);
    loop {
        let new = (f64::from_bits(cur) + value).to_bits();
        match slot.compare_exchange_weak(cur, new, Ordering::Relaxed, Ordering::Relaxed) {
            Ok(_) => return,
            Err(actual) => cur = actual,
        }
    }
}

/// Runs `kernel` over every element and scatter-adds the element-local
/// output into a fresh global vector.
///
/// The kernel receives the element index and the gathered local input
/// (`8 * components` values in connectivity order) and writes the local
/// output in the same layout.
pub(crate) fn element_loop<K>(
    mesh: &Mesh,
    components: usize,
    u: &FieldVector,
    colors: &[Vec<u32>; 8],
    scatter: ScatterMode,
    kernel: K,
) -> Result<FieldVector>
where
    K: Fn(usize, &[f64], &mut [f64]) -> Result<()> + Sync,
{
    if u.num_nodes != mesh.num_nodes || u.components != components {
        return Err(Error::ShapeMismatch {
            context: "operator apply",
            expected: mesh.num_nodes * components,
            actual: u.len(),
        });
    }

    let n_local = 8 * components;
    let out: Vec<AtomicU64> = (0..u.len()).map(|_| AtomicU64::new(0)).collect();

    let process = |e: u32| -> Result<()> {
        let e = e as usize;
        let row = &mesh.node_map[e];
        let mut local_u = [0.0f64; 24];
        let mut local_v = [0.0f64; 24];
        for (j, &n) in row.iter().enumerate() {
            let base = n as usize * components;
            local_u[j * components..(j + 1) * components]
                .copy_from_slice(&u.values[base..base + components]);
        }
        kernel(e, &local_u[..n_local], &mut local_v[..n_local])?;
        for (j, &n) in row.iter().enumerate() {
            let base = n as usize * components;
            for l in 0..components {
                atomic_add(&out[base + l], local_v[j * components + l]);
            }
        }
        Ok(())
    };

    match scatter {
        ScatterMode::Deterministic => {
            for set in colors {
                set.par_iter().copied().try_for_each(process)?;
            }
        }
        ScatterMode::Atomic => {
            (0..mesh.num_elements as u32)
                .into_par_iter()
                .try_for_each(process)?;
        }
    }

    let values = out
        .into_iter()
        .map(|a| f64::from_bits(a.into_inner()))
        .collect();
    FieldVector::from_values(mesh.num_nodes, components, values)
}
