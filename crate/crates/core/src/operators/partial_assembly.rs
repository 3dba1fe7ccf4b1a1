//! Partial assembly: precomputed per-quadrature-point factors.
//!
//! Setup walks the mesh once, computes element geometry from the nodal
//! coordinates, and stores per-quadrature-point factors; apply then reads
//! only the stored factors and the connectivity, never the coordinates.
//!
//! - Laplace operators store the six unique entries of the symmetric matrix
//!   `w detJ J^-1 J^-T` per quadrature point (shared by all components of
//!   the vector Laplacian).
//! - Elasticity stores the 21 unique entries of the symmetric 6x6
//!   quadrature-point stiffness in Voigt form, `w detJ C(lambda, mu)`, and
//!   keeps the constant diagonal of `J^-1` (one triple for the whole mesh;
//!   box meshes have an axis-aligned, mesh-uniform Jacobian) in the data
//!   header to map reference gradients to physical ones.
//!
//! Voigt ordering is `[11, 22, 33, 23, 13, 12]` with engineering shear
//! strains (`gamma = 2 eps`).

use crate::error::{Error, Result};
use crate::geometry::{ElementGeometry, Vec3};
use crate::linalg::FieldVector;
use crate::mesh::Mesh;
use crate::operators::{
    element_loop, IsotropicElasticity, LinearOperator, OperatorKind, ScatterMode,
};
use crate::reference_element::ReferenceElement;

/// Precomputed quadrature-point factors for one mesh and operator kind.
#[derive(Debug, Clone)]
pub struct PartialAssemblyData {
    pub kind: OperatorKind,
    pub num_elements: usize,
    pub num_nodes: usize,
    /// `values_per_qpt` factors per quadrature point, element-major.
    factors: Vec<f64>,
    /// Diagonal of `J^-1`, uniform over the mesh (elasticity apply only).
    grad_scale: Vec3,
    colors: [Vec<u32>; 8],
}

impl PartialAssemblyData {
    /// Stored factor count per quadrature point: 6 for the Laplace kinds,
    /// 21 for elasticity.
    pub fn values_per_qpt(kind: OperatorKind) -> usize {
        match kind {
            OperatorKind::ScalarLaplace | OperatorKind::VectorLaplace => 6,
            OperatorKind::Elasticity => 21,
        }
    }

    /// Bytes the factor table will occupy for a mesh of `num_elements`
    /// elements, without allocating it.
    pub fn predicted_storage_bytes(kind: OperatorKind, num_elements: u64) -> u64 {
        num_elements * 8 * Self::values_per_qpt(kind) as u64 * 8
    }

    /// Bytes actually held by the factor table.
    pub fn storage_bytes(&self) -> u64 {
        (self.factors.len() * 8) as u64
    }

    #[inline]
    fn qpt_factors(&self, element: usize, q: usize, stride: usize) -> &[f64] {
        let base = (element * 8 + q) * stride;
        &self.factors[base..base + stride]
    }
}

/// Precomputes partial-assembly factors for `kind` on `mesh`.
///
/// `material` is required for elasticity and ignored otherwise.
pub fn setup_partial_assembly(
    mesh: &Mesh,
    reference: &ReferenceElement,
    kind: OperatorKind,
    material: Option<IsotropicElasticity>,
) -> Result<PartialAssemblyData> {
    let stride = PartialAssemblyData::values_per_qpt(kind);
    let len = mesh.num_elements * 8 * stride;
    let mut factors = Vec::new();
    factors.try_reserve_exact(len).map_err(|_| Error::OutOfMemory {
        bytes: (len * 8) as u64,
        context: "partial-assembly factors",
    })?;

    let material = match kind {
        OperatorKind::Elasticity => Some(material.ok_or_else(|| {
            Error::InvalidMaterial("elasticity partial assembly requires material".into())
        })?),
        _ => None,
    };

    let mut grad_scale = [0.0; 3];
    for e in 0..mesh.num_elements {
        let corners = mesh.element_corners(e);
        for q in 0..reference.num_qpts {
            let grads = &reference.basis_grads[q];
            let geo = ElementGeometry::from_corners(&corners, grads, e)?;
            let scale = reference.qpt_weights[q] * geo.det_j;
            match kind {
                OperatorKind::ScalarLaplace | OperatorKind::VectorLaplace => {
                    // Upper triangle of w detJ J^-1 J^-T.
                    let ji = &geo.jac_inv;
                    for a in 0..3 {
                        for b in a..3 {
                            let k_ab: f64 =
                                (0..3).map(|c| ji[a][c] * ji[b][c]).sum();
                            factors.push(scale * k_ab);
                        }
                    }
                }
                OperatorKind::Elasticity => {
                    let d = diagonal_of(&geo, e)?;
                    if e == 0 && q == 0 {
                        grad_scale = d;
                    } else if (0..3).any(|a| {
                        (d[a] - grad_scale[a]).abs() > 1e-12 * grad_scale[a].abs()
                    }) {
                        return Err(Error::OperatorMismatch(format!(
                            "element {e} has non-uniform Jacobian; elasticity \
                             partial assembly requires a uniform box mesh"
                        )));
                    }
                    let m = material.expect("checked above");
                    push_voigt_stiffness(&mut factors, scale, m);
                }
            }
        }
    }

    Ok(PartialAssemblyData {
        kind,
        num_elements: mesh.num_elements,
        num_nodes: mesh.num_nodes,
        factors,
        grad_scale,
        colors: mesh.color_sets(),
    })
}

fn diagonal_of(geo: &ElementGeometry, element: usize) -> Result<Vec3> {
    let ji = &geo.jac_inv;
    for a in 0..3 {
        for b in 0..3 {
            if a != b && ji[a][b].abs() > 1e-13 * ji[a][a].abs() {
                return Err(Error::OperatorMismatch(format!(
                    "element {element} has a non-axis-aligned Jacobian; \
                     elasticity partial assembly requires a box mesh"
                )));
            }
        }
    }
    Ok([ji[0][0], ji[1][1], ji[2][2]])
}

/// Appends the upper triangle (row-major) of `scale * C` with `C` the
/// isotropic 6x6 stiffness in engineering Voigt form.
fn push_voigt_stiffness(factors: &mut Vec<f64>, scale: f64, m: IsotropicElasticity) {
    let diag = scale * (m.lambda + 2.0 * m.mu);
    let off = scale * m.lambda;
    let shear = scale * m.mu;
    let c: [[f64; 6]; 6] = [
        [diag, off, off, 0.0, 0.0, 0.0],
        [off, diag, off, 0.0, 0.0, 0.0],
        [off, off, diag, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, shear, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, shear, 0.0],
        [0.0, 0.0, 0.0, 0.0, 0.0, shear],
    ];
    for a in 0..6 {
        for b in a..6 {
            factors.push(c[a][b]);
        }
    }
}

/// Applies the operator encoded in `data`; mathematically identical to the
/// matching matrix-free apply.
pub fn apply_partial_assembly(
    data: &PartialAssemblyData,
    mesh: &Mesh,
    reference: &ReferenceElement,
    u: &FieldVector,
) -> Result<FieldVector> {
    apply_partial_assembly_mode(data, mesh, reference, u, ScatterMode::Deterministic)
}

pub fn apply_partial_assembly_mode(
    data: &PartialAssemblyData,
    mesh: &Mesh,
    reference: &ReferenceElement,
    u: &FieldVector,
    scatter: ScatterMode,
) -> Result<FieldVector> {
    if data.num_elements != mesh.num_elements || data.num_nodes != mesh.num_nodes {
        return Err(Error::OperatorMismatch(format!(
            "partial-assembly data built for {} elements / {} nodes, \
             mesh has {} / {}",
            data.num_elements, data.num_nodes, mesh.num_elements, mesh.num_nodes
        )));
    }
    match data.kind {
        OperatorKind::ScalarLaplace => apply_laplace_factors(data, mesh, reference, u, 1, scatter),
        OperatorKind::VectorLaplace => apply_laplace_factors(data, mesh, reference, u, 3, scatter),
        OperatorKind::Elasticity => apply_elasticity_factors(data, mesh, reference, u, scatter),
    }
}

fn apply_laplace_factors(
    data: &PartialAssemblyData,
    mesh: &Mesh,
    reference: &ReferenceElement,
    u: &FieldVector,
    components: usize,
    scatter: ScatterMode,
) -> Result<FieldVector> {
    element_loop(mesh, components, u, &data.colors, scatter, |e, local_u, local_v| {
        for q in 0..reference.num_qpts {
            let grads = &reference.basis_grads[q];
            let f = data.qpt_factors(e, q, 6);
            // Symmetric 3x3 from the stored upper triangle.
            let k = [
                [f[0], f[1], f[2]],
                [f[1], f[3], f[4]],
                [f[2], f[4], f[5]],
            ];
            for comp in 0..components {
                let mut g_ref = [0.0; 3];
                for j in 0..8 {
                    let uj = local_u[j * components + comp];
                    for b in 0..3 {
                        g_ref[b] += grads[j][b] * uj;
                    }
                }
                let t = [
                    k[0][0] * g_ref[0] + k[0][1] * g_ref[1] + k[0][2] * g_ref[2],
                    k[1][0] * g_ref[0] + k[1][1] * g_ref[1] + k[1][2] * g_ref[2],
                    k[2][0] * g_ref[0] + k[2][1] * g_ref[1] + k[2][2] * g_ref[2],
                ];
                for i in 0..8 {
                    local_v[i * components + comp] +=
                        grads[i][0] * t[0] + grads[i][1] * t[1] + grads[i][2] * t[2];
                }
            }
        }
        Ok(())
    })
}

fn apply_elasticity_factors(
    data: &PartialAssemblyData,
    mesh: &Mesh,
    reference: &ReferenceElement,
    u: &FieldVector,
    scatter: ScatterMode,
) -> Result<FieldVector> {
    let d = data.grad_scale;
    element_loop(mesh, 3, u, &data.colors, scatter, |e, local_u, local_v| {
        for q in 0..reference.num_qpts {
            let grads = &reference.basis_grads[q];

            // Physical displacement gradient H = F diag(d), with F the
            // reference gradient sum_j u_j x dphi_j.
            let mut h = [[0.0; 3]; 3];
            for j in 0..8 {
                let uj = &local_u[3 * j..3 * j + 3];
                for k in 0..3 {
                    for b in 0..3 {
                        h[k][b] += uj[k] * grads[j][b] * d[b];
                    }
                }
            }

            // Engineering Voigt strain, stress through the stored 6x6.
            let eps = [
                h[0][0],
                h[1][1],
                h[2][2],
                h[1][2] + h[2][1],
                h[0][2] + h[2][0],
                h[0][1] + h[1][0],
            ];
            let f = data.qpt_factors(e, q, 21);
            let mut sv = [0.0; 6];
            let mut idx = 0;
            for a in 0..6 {
                sv[a] += f[idx] * eps[a];
                idx += 1;
                for b in a + 1..6 {
                    sv[a] += f[idx] * eps[b];
                    sv[b] += f[idx] * eps[a];
                    idx += 1;
                }
            }
            let stress = [
                [sv[0], sv[5], sv[4]],
                [sv[5], sv[1], sv[3]],
                [sv[4], sv[3], sv[2]],
            ];

            // v_i += (sigma J^-T) dphi_i with J^-T = diag(d).
            for i in 0..8 {
                for k in 0..3 {
                    local_v[3 * i + k] += stress[k][0] * d[0] * grads[i][0]
                        + stress[k][1] * d[1] * grads[i][1]
                        + stress[k][2] * d[2] * grads[i][2];
                }
            }
        }
        Ok(())
    })
}

/// [`LinearOperator`] wrapper around precomputed factors.
pub struct PartialAssemblyOperator<'a> {
    pub data: &'a PartialAssemblyData,
    pub mesh: &'a Mesh,
    pub reference: &'a ReferenceElement,
    pub scatter: ScatterMode,
}

impl LinearOperator for PartialAssemblyOperator<'_> {
    fn apply(&self, u: &FieldVector) -> Result<FieldVector> {
        apply_partial_assembly_mode(self.data, self.mesh, self.reference, u, self.scatter)
    }

    fn num_nodes(&self) -> usize {
        self.mesh.num_nodes
    }

    fn components(&self) -> usize {
        self.data.kind.components()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_box_mesh;
    use crate::operators::matrix_free::{apply_elasticity, apply_scalar_laplace};
    use crate::reference_element::build_reference_element;

    #[test]
    fn unit_cube_scalar_factors_are_half_identity() {
        // J = diag(1/2) for the unit cube, so w detJ J^-1 J^-T = 0.5 I.
        let mesh = build_box_mesh([1, 1, 1], [1.0, 1.0, 1.0]).unwrap();
        let re = build_reference_element();
        let data =
            setup_partial_assembly(&mesh, &re, OperatorKind::ScalarLaplace, None).unwrap();
        for q in 0..8 {
            let f = data.qpt_factors(0, q, 6);
            let expect = [0.5, 0.0, 0.0, 0.5, 0.0, 0.5];
            for (got, want) in f.iter().zip(expect) {
                assert!((got - want).abs() <= 1e-14, "qpt {q}: {f:?}");
            }
        }
    }

    #[test]
    fn predicted_storage_matches_table_accounting() {
        assert_eq!(
            PartialAssemblyData::predicted_storage_bytes(OperatorKind::ScalarLaplace, 1_000_000),
            384_000_000
        );
        assert_eq!(
            PartialAssemblyData::predicted_storage_bytes(OperatorKind::Elasticity, 1_000_000),
            1_344_000_000
        );
        let mesh = build_box_mesh([2, 2, 2], [1.0, 1.0, 1.0]).unwrap();
        let re = build_reference_element();
        let data =
            setup_partial_assembly(&mesh, &re, OperatorKind::ScalarLaplace, None).unwrap();
        assert_eq!(
            data.storage_bytes(),
            PartialAssemblyData::predicted_storage_bytes(OperatorKind::ScalarLaplace, 8)
        );
    }

    #[test]
    fn matches_matrix_free_scalar_laplace() {
        let mesh = build_box_mesh([4, 4, 4], [1.0, 1.0, 1.0]).unwrap();
        let re = build_reference_element();
        let u = FieldVector::from_fn(mesh.num_nodes, 1, |i| ((i * 31 % 17) as f64) - 8.0);
        let data =
            setup_partial_assembly(&mesh, &re, OperatorKind::ScalarLaplace, None).unwrap();
        let pa = apply_partial_assembly(&data, &mesh, &re, &u).unwrap();
        let mf = apply_scalar_laplace(&mesh, &re, &u).unwrap();
        let scale = mf.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in pa.values.iter().zip(&mf.values) {
            assert!((a - b).abs() <= 1e-13 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn matches_matrix_free_elasticity_on_anisotropic_mesh() {
        let mesh = build_box_mesh([3, 2, 2], [1.0, 1.7, 0.6]).unwrap();
        let re = build_reference_element();
        let material = IsotropicElasticity::new(1.3, 0.8).unwrap();
        let u = FieldVector::from_fn(mesh.num_nodes, 3, |i| ((i * 23 % 19) as f64) * 0.1 - 0.9);
        let data =
            setup_partial_assembly(&mesh, &re, OperatorKind::Elasticity, Some(material)).unwrap();
        let pa = apply_partial_assembly(&data, &mesh, &re, &u).unwrap();
        let mf = apply_elasticity(&mesh, &re, material, &u).unwrap();
        let scale = mf.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in pa.values.iter().zip(&mf.values) {
            assert!((a - b).abs() <= 1e-13 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_input_maps_to_zero() {
        let mesh = build_box_mesh([3, 3, 3], [1.0, 1.0, 1.0]).unwrap();
        let re = build_reference_element();
        let data =
            setup_partial_assembly(&mesh, &re, OperatorKind::ScalarLaplace, None).unwrap();
        let ones = FieldVector::from_fn(mesh.num_nodes, 1, |_| 1.0);
        let v = apply_partial_assembly(&data, &mesh, &re, &ones).unwrap();
        assert!(v.values.iter().all(|x| x.abs() <= 1e-12));
    }

    #[test]
    fn mesh_mismatch_is_rejected() {
        let mesh = build_box_mesh([2, 2, 2], [1.0, 1.0, 1.0]).unwrap();
        let other = build_box_mesh([3, 2, 2], [1.0, 1.0, 1.0]).unwrap();
        let re = build_reference_element();
        let data =
            setup_partial_assembly(&mesh, &re, OperatorKind::ScalarLaplace, None).unwrap();
        let u = FieldVector::zeros(other.num_nodes, 1);
        assert!(matches!(
            apply_partial_assembly(&data, &other, &re, &u),
            Err(Error::OperatorMismatch(_))
        ));
    }

    #[test]
    fn elasticity_setup_requires_material() {
        let mesh = build_box_mesh([2, 2, 2], [1.0, 1.0, 1.0]).unwrap();
        let re = build_reference_element();
        assert!(matches!(
            setup_partial_assembly(&mesh, &re, OperatorKind::Elasticity, None),
            Err(Error::InvalidMaterial(_))
        ));
    }
}
