//! Matrix-free operator kernels.
//!
//! Each kernel processes one element at a time: gather nodal data, loop over
//! quadrature points recomputing the Jacobian from the gathered coordinates,
//! contract with the reference basis gradients, and scatter-add. Geometry is
//! never cached between applies; that is what distinguishes these kernels
//! from the partial-assembly variant.

use crate::error::Result;
use crate::geometry::{ElementGeometry, Mat3, Vec3};
use crate::linalg::FieldVector;
use crate::mesh::Mesh;
use crate::operators::{element_loop, IsotropicElasticity, ScatterMode};
use crate::reference_element::ReferenceElement;

/// Applies the unconstrained scalar Laplace operator, `v = A u`.
///
/// Per element and quadrature point: form the reference-space gradient of
/// the trial field, map it through `J^-1 J^-T`, scale by `w det J`, and
/// contract against each test function's reference gradient.
pub fn apply_scalar_laplace(
    mesh: &Mesh,
    reference: &ReferenceElement,
    u: &FieldVector,
) -> Result<FieldVector> {
    let colors = mesh.color_sets();
    scalar_laplace(mesh, reference, u, &colors, ScatterMode::Deterministic)
}

/// Applies the component-wise vector Laplace operator (3 components/node).
pub fn apply_vector_laplace(
    mesh: &Mesh,
    reference: &ReferenceElement,
    u: &FieldVector,
) -> Result<FieldVector> {
    let colors = mesh.color_sets();
    vector_laplace(mesh, reference, u, &colors, ScatterMode::Deterministic)
}

/// Applies the isotropic linear elasticity operator (3 components/node).
pub fn apply_elasticity(
    mesh: &Mesh,
    reference: &ReferenceElement,
    material: IsotropicElasticity,
    u: &FieldVector,
) -> Result<FieldVector> {
    let colors = mesh.color_sets();
    elasticity(mesh, reference, material, u, &colors, ScatterMode::Deterministic)
}

pub(crate) fn scalar_laplace(
    mesh: &Mesh,
    reference: &ReferenceElement,
    u: &FieldVector,
    colors: &[Vec<u32>; 8],
    scatter: ScatterMode,
) -> Result<FieldVector> {
    element_loop(mesh, 1, u, colors, scatter, |e, local_u, local_v| {
        let corners = mesh.element_corners(e);
        for q in 0..reference.num_qpts {
            let grads = &reference.basis_grads[q];
            let geo = ElementGeometry::from_corners(&corners, grads, e)?;

            // Reference-space gradient of the trial field.
            let mut g_ref = [0.0; 3];
            for j in 0..8 {
                for b in 0..3 {
                    g_ref[b] += grads[j][b] * local_u[j];
                }
            }

            // t = w detJ * J^-1 J^-T g_ref.
            let g_phys = geo.push_gradient(&g_ref);
            let scale = reference.qpt_weights[q] * geo.det_j;
            let t = [
                scale * mat_vec_row(&geo.jac_inv, 0, &g_phys),
                scale * mat_vec_row(&geo.jac_inv, 1, &g_phys),
                scale * mat_vec_row(&geo.jac_inv, 2, &g_phys),
            ];

            for i in 0..8 {
                local_v[i] += grads[i][0] * t[0] + grads[i][1] * t[1] + grads[i][2] * t[2];
            }
        }
        Ok(())
    })
}

pub(crate) fn vector_laplace(
    mesh: &Mesh,
    reference: &ReferenceElement,
    u: &FieldVector,
    colors: &[Vec<u32>; 8],
    scatter: ScatterMode,
) -> Result<FieldVector> {
    element_loop(mesh, 3, u, colors, scatter, |e, local_u, local_v| {
        let corners = mesh.element_corners(e);
        for q in 0..reference.num_qpts {
            let grads = &reference.basis_grads[q];
            let geo = ElementGeometry::from_corners(&corners, grads, e)?;

            // One geometry evaluation shared by all three components:
            // G[k][b] = sum_j u_j[k] dphi_j[b], then T = w detJ G J^-1 J^-T.
            let g_ref = nodal_outer_product(local_u, grads);
            let t = scaled_double_jinv(&g_ref, &geo, reference.qpt_weights[q]);

            accumulate_rows(local_v, &t, grads);
        }
        Ok(())
    })
}

pub(crate) fn elasticity(
    mesh: &Mesh,
    reference: &ReferenceElement,
    material: IsotropicElasticity,
    u: &FieldVector,
    colors: &[Vec<u32>; 8],
    scatter: ScatterMode,
) -> Result<FieldVector> {
    let (lambda, mu) = (material.lambda, material.mu);
    element_loop(mesh, 3, u, colors, scatter, |e, local_u, local_v| {
        let corners = mesh.element_corners(e);
        for q in 0..reference.num_qpts {
            let grads = &reference.basis_grads[q];
            let geo = ElementGeometry::from_corners(&corners, grads, e)?;

            // Gradient of the input variable: grad_u = (sum_j u_j x dphi_j) J^-1.
            let g_ref = nodal_outer_product(local_u, grads);
            let grad_u = mat_mul_jinv(&g_ref, &geo.jac_inv);

            // Stress from the symmetric gradient, then scale by w detJ.
            let scale = reference.qpt_weights[q] * geo.det_j;
            let tr = grad_u[0][0] + grad_u[1][1] + grad_u[2][2];
            let mut stress = [[0.0; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    stress[a][b] = scale * mu * (grad_u[a][b] + grad_u[b][a]);
                }
                stress[a][a] += scale * lambda * tr;
            }

            // P = sigma J^-T; v_i += P dphi_i.
            let p = mat_mul_jinv_t(&stress, &geo.jac_inv);
            accumulate_rows(local_v, &p, grads);
        }
        Ok(())
    })
}

// ---------------------------------------------------------------------
// Small per-quadrature-point helpers
// ---------------------------------------------------------------------

#[inline]
fn mat_vec_row(m: &Mat3, row: usize, v: &Vec3) -> f64 {
    m[row][0] * v[0] + m[row][1] * v[1] + m[row][2] * v[2]
}

/// `sum_j u_j (dphi_j)^T` for a 3-component local field.
#[inline]
fn nodal_outer_product(local_u: &[f64], grads: &[Vec3; 8]) -> Mat3 {
    let mut g = [[0.0; 3]; 3];
    for j in 0..8 {
        let uj = &local_u[3 * j..3 * j + 3];
        for k in 0..3 {
            for b in 0..3 {
                g[k][b] += uj[k] * grads[j][b];
            }
        }
    }
    g
}

/// `M J^-1`.
#[inline]
fn mat_mul_jinv(m: &Mat3, jac_inv: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for a in 0..3 {
        for c in 0..3 {
            for b in 0..3 {
                out[a][b] += m[a][c] * jac_inv[c][b];
            }
        }
    }
    out
}

/// `M J^-T`.
#[inline]
fn mat_mul_jinv_t(m: &Mat3, jac_inv: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                out[a][b] += m[a][c] * jac_inv[b][c];
            }
        }
    }
    out
}

/// `w detJ * M J^-1 J^-T`.
#[inline]
fn scaled_double_jinv(m: &Mat3, geo: &ElementGeometry, weight: f64) -> Mat3 {
    let mut t = mat_mul_jinv_t(&mat_mul_jinv(m, &geo.jac_inv), &geo.jac_inv);
    let scale = weight * geo.det_j;
    for row in t.iter_mut() {
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    t
}

/// `v_i[k] += sum_b T[k][b] dphi_i[b]` for all eight nodes.
#[inline]
fn accumulate_rows(local_v: &mut [f64], t: &Mat3, grads: &[Vec3; 8]) {
    for i in 0..8 {
        for k in 0..3 {
            local_v[3 * i + k] +=
                t[k][0] * grads[i][0] + t[k][1] * grads[i][1] + t[k][2] * grads[i][2];
        }
    }
}
