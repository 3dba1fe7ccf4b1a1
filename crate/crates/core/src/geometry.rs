//! Small fixed-size 3x3 matrix helpers for element geometry.
//!
//! Element kernels manipulate the Jacobian of the reference-to-physical map
//! and its inverse; these are always 3x3 and live on the stack, so the crate
//! uses plain `[[f64; 3]; 3]` arrays (row-major) instead of a linear algebra
//! dependency.

use crate::error::{Error, Result};

pub type Mat3 = [[f64; 3]; 3];
pub type Vec3 = [f64; 3];

/// Per-quadrature-point element geometry: the Jacobian of the isoparametric
/// map, its inverse, and its determinant.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeometry {
    pub jac: Mat3,
    pub jac_inv: Mat3,
    pub det_j: f64,
}

impl ElementGeometry {
    /// Builds the geometry from element corner coordinates and the reference
    /// basis gradients at one quadrature point: `J = sum_j x_j (grad phi_j)^T`.
    ///
    /// Fails with [`Error::DegenerateElement`] when `det J <= 0`; `element`
    /// is only used for the error message.
    pub fn from_corners(
        corners: &[Vec3; 8],
        basis_grads: &[Vec3; 8],
        element: usize,
    ) -> Result<Self> {
        let mut jac = [[0.0; 3]; 3];
        for j in 0..8 {
            for a in 0..3 {
                for b in 0..3 {
                    jac[a][b] += corners[j][a] * basis_grads[j][b];
                }
            }
        }
        let det_j = det3(&jac);
        if !(det_j > 0.0) {
            return Err(Error::DegenerateElement { element, det_j });
        }
        Ok(Self {
            jac,
            jac_inv: inv3(&jac, det_j),
            det_j,
        })
    }

    /// Applies the inverse transpose of the Jacobian: maps a reference-space
    /// gradient to the physical-space gradient.
    #[inline]
    pub fn push_gradient(&self, g_ref: &Vec3) -> Vec3 {
        // (J^-T g)_a = sum_b Jinv[b][a] g[b]
        [
            self.jac_inv[0][0] * g_ref[0] + self.jac_inv[1][0] * g_ref[1] + self.jac_inv[2][0] * g_ref[2],
            self.jac_inv[0][1] * g_ref[0] + self.jac_inv[1][1] * g_ref[1] + self.jac_inv[2][1] * g_ref[2],
            self.jac_inv[0][2] * g_ref[0] + self.jac_inv[1][2] * g_ref[1] + self.jac_inv[2][2] * g_ref[2],
        ]
    }
}

#[inline]
pub fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse of a 3x3 matrix given its (nonzero) determinant.
#[inline]
pub fn inv3(m: &Mat3, det: f64) -> Mat3 {
    let inv_det = 1.0 / det;
    [
        [
            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_det,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det,
        ],
        [
            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_det,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det,
        ],
        [
            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_det,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det,
        ],
    ]
}

#[inline]
pub fn matmul3(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for k in 0..3 {
            for j in 0..3 {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}
