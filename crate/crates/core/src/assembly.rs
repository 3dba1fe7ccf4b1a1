//! Matrix-based reference path: dense local element matrices and global CSR
//! assembly.
//!
//! Assembly builds the sparsity pattern directly from the structured-grid
//! 27-point node stencil (each node couples to its lattice neighbors within
//! one step per direction) instead of dynamic insertion, then scatters local
//! matrices into it. The result is the baseline operator for the SpMV
//! strategy and the equivalence oracle for the matrix-free kernels.

use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{ElementGeometry, Vec3};
use crate::linalg::CsrMatrix;
use crate::mesh::Mesh;
use crate::operators::{IsotropicElasticity, OperatorKind};
use crate::reference_element::ReferenceElement;

/// Dense element matrix of size `(8c) x (8c)`, row-major, with dof index
/// `node * c + component`.
#[derive(Debug, Clone)]
pub struct LocalMatrix {
    pub size: usize,
    pub values: Vec<f64>,
}

impl LocalMatrix {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.size + col]
    }

    #[inline]
    fn add(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.size + col] += value;
    }
}

/// Computes the local element matrix for `kind` by quadrature over one
/// element with the given corner coordinates.
pub fn local_matrix(
    kind: OperatorKind,
    corners: &[Vec3; 8],
    reference: &ReferenceElement,
    material: Option<IsotropicElasticity>,
) -> Result<LocalMatrix> {
    let c = kind.components();
    let size = 8 * c;
    let mut local = LocalMatrix {
        size,
        values: vec![0.0; size * size],
    };
    let material = match kind {
        OperatorKind::Elasticity => Some(material.ok_or_else(|| {
            Error::InvalidMaterial("elasticity local matrix requires material".into())
        })?),
        _ => None,
    };

    for q in 0..reference.num_qpts {
        let grads = &reference.basis_grads[q];
        let geo = ElementGeometry::from_corners(corners, grads, 0)?;
        let scale = reference.qpt_weights[q] * geo.det_j;

        // Physical gradients of the eight basis functions at this point.
        let mut g = [[0.0; 3]; 8];
        for j in 0..8 {
            g[j] = geo.push_gradient(&grads[j]);
        }

        match kind {
            OperatorKind::ScalarLaplace => {
                for i in 0..8 {
                    for j in 0..8 {
                        let dot = g[i][0] * g[j][0] + g[i][1] * g[j][1] + g[i][2] * g[j][2];
                        local.add(i, j, scale * dot);
                    }
                }
            }
            OperatorKind::VectorLaplace => {
                for i in 0..8 {
                    for j in 0..8 {
                        let dot = g[i][0] * g[j][0] + g[i][1] * g[j][1] + g[i][2] * g[j][2];
                        for k in 0..3 {
                            local.add(3 * i + k, 3 * j + k, scale * dot);
                        }
                    }
                }
            }
            OperatorKind::Elasticity => {
                let m = material.expect("checked above");
                for i in 0..8 {
                    for j in 0..8 {
                        let dot = g[i][0] * g[j][0] + g[i][1] * g[j][1] + g[i][2] * g[j][2];
                        for k in 0..3 {
                            for l in 0..3 {
                                let mut v = m.lambda * g[i][k] * g[j][l]
                                    + m.mu * g[i][l] * g[j][k];
                                if k == l {
                                    v += m.mu * dot;
                                }
                                local.add(3 * i + k, 3 * j + l, scale * v);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(local)
}

/// Exact stored-entry count of the stencil pattern for a box mesh with
/// `components` dofs per node.
pub fn stencil_nnz(dims: [usize; 3], components: usize) -> u64 {
    // Per direction, the neighbor counts over indices 0..=n sum to
    // 2 + 3(n-1) + 2 = 3n + 1.
    let line = |n: usize| (3 * n + 1) as u64;
    let c = components as u64;
    line(dims[0]) * line(dims[1]) * line(dims[2]) * c * c
}

/// Assembles the global CSR matrix for `kind` on `mesh`.
///
/// With `bc` given, applies symmetric elimination with unit diagonal: each
/// constrained dof's row and column are zeroed (entries stay in the
/// pattern) and its diagonal set to one, matching the matrix-free
/// constrained operator exactly.
pub fn assemble(
    kind: OperatorKind,
    mesh: &Mesh,
    reference: &ReferenceElement,
    material: Option<IsotropicElasticity>,
    bc: Option<&[u32]>,
) -> Result<CsrMatrix> {
    let c = kind.components();
    let [nx, ny, nz] = mesh.dims;
    let (mx, my) = (nx + 1, ny + 1);
    let num_rows = mesh.num_nodes * c;
    let nnz = stencil_nnz(mesh.dims, c);

    let mut row_offsets = Vec::new();
    row_offsets
        .try_reserve_exact(num_rows + 1)
        .map_err(|_| Error::OutOfMemory {
            bytes: ((num_rows + 1) * 8) as u64,
            context: "CSR row offsets",
        })?;
    let mut col_indices: Vec<u32> = Vec::new();
    col_indices
        .try_reserve_exact(nnz as usize)
        .map_err(|_| Error::OutOfMemory {
            bytes: nnz * 4,
            context: "CSR column indices",
        })?;

    // Pattern: for each node in lexicographic order, its lattice neighbors
    // (already sorted by node index), each expanded to `c` dof columns.
    row_offsets.push(0u64);
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                let mut node_cols: Vec<u32> = Vec::with_capacity(27);
                for dk in k.saturating_sub(1)..=(k + 1).min(nz) {
                    for dj in j.saturating_sub(1)..=(j + 1).min(ny) {
                        for di in i.saturating_sub(1)..=(i + 1).min(nx) {
                            node_cols.push((di + dj * mx + dk * mx * my) as u32);
                        }
                    }
                }
                for _comp in 0..c {
                    for &n in &node_cols {
                        for l in 0..c {
                            col_indices.push(n * c as u32 + l as u32);
                        }
                    }
                    row_offsets.push(col_indices.len() as u64);
                }
            }
        }
    }
    debug_assert_eq!(col_indices.len() as u64, nnz);

    let mut values = Vec::new();
    values
        .try_reserve_exact(nnz as usize)
        .map_err(|_| Error::OutOfMemory {
            bytes: nnz * 8,
            context: "CSR values",
        })?;
    values.resize(nnz as usize, 0.0);

    // Scatter local matrices; serial, deterministic.
    for e in 0..mesh.num_elements {
        let corners = mesh.element_corners(e);
        let local = local_matrix(kind, &corners, reference, material).map_err(|err| match err {
            Error::DegenerateElement { det_j, .. } => {
                Error::DegenerateElement { element: e, det_j }
            }
            other => other,
        })?;
        let row = &mesh.node_map[e];
        for (i, &ni) in row.iter().enumerate() {
            for (j, &nj) in row.iter().enumerate() {
                for k in 0..c {
                    let grow = ni as usize * c + k;
                    let start = row_offsets[grow] as usize;
                    let end = row_offsets[grow + 1] as usize;
                    let cols = &col_indices[start..end];
                    for l in 0..c {
                        let gcol = nj * c as u32 + l as u32;
                        let pos = cols.binary_search(&gcol).expect("stencil covers element");
                        values[start + pos] += local.get(i * c + k, j * c + l);
                    }
                }
            }
        }
    }

    if let Some(boundary) = bc {
        let mut constrained = vec![false; num_rows];
        for &n in boundary {
            for l in 0..c {
                constrained[n as usize * c + l] = true;
            }
        }
        for r in 0..num_rows {
            let start = row_offsets[r] as usize;
            let end = row_offsets[r + 1] as usize;
            if constrained[r] {
                for idx in start..end {
                    values[idx] = if col_indices[idx] as usize == r { 1.0 } else { 0.0 };
                }
            } else {
                for idx in start..end {
                    if constrained[col_indices[idx] as usize] {
                        values[idx] = 0.0;
                    }
                }
            }
        }
    }

    CsrMatrix::from_parts(num_rows, num_rows, row_offsets, col_indices, values)
}

/// Writes the matrix in Matrix Market coordinate format (1-based indices).
pub fn write_matrix_market<W: Write>(matrix: &CsrMatrix, mut w: W) -> std::io::Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", matrix.num_rows, matrix.num_cols, matrix.nnz())?;
    for r in 0..matrix.num_rows {
        let start = matrix.row_offsets[r] as usize;
        let end = matrix.row_offsets[r + 1] as usize;
        for idx in start..end {
            writeln!(
                w,
                "{} {} {:.17e}",
                r + 1,
                matrix.col_indices[idx] + 1,
                matrix.values[idx]
            )?;
        }
    }
    Ok(())
}
