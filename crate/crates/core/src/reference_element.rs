//! The Q1 (trilinear) reference hexahedron on `[-1,1]^3`.
//!
//! # Node ordering
//!
//! Every module in this crate uses the standard VTK/CEED hexahedron corner
//! ordering: the bottom face (`zeta = -1`) counterclockwise starting from the
//! lowest corner, then the top face (`zeta = +1`) in the same pattern:
//!
//! ```text
//! node: 0           1           2           3
//!       (-1,-1,-1)  (+1,-1,-1)  (+1,+1,-1)  (-1,+1,-1)
//! node: 4           5           6           7
//!       (-1,-1,+1)  (+1,-1,+1)  (+1,+1,+1)  (-1,+1,+1)
//! ```
//!
//! Mesh connectivity rows, local element matrices, and all operator kernels
//! index their eight nodes in exactly this order.
//!
//! # Quadrature
//!
//! The rule is the fixed 2x2x2 Gauss-Legendre tensor product: points at
//! `+-1/sqrt(3)` in each direction with unit weight per direction, giving
//! eight points of weight one. Quadrature points are numbered
//! lexicographically with the first coordinate varying fastest, so point 0
//! sits at `(-1/sqrt(3), -1/sqrt(3), -1/sqrt(3))`.

use crate::geometry::Vec3;

/// Corner signs of the eight nodes, in the documented ordering.
pub const NODE_SIGNS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Trilinear basis data and quadrature rule on the reference cube.
///
/// Immutable after construction; share freely across threads.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub num_nodes: usize,
    pub num_qpts: usize,
    /// Quadrature point coordinates in the reference cube.
    pub qpt_coords: [Vec3; 8],
    /// Quadrature weights (all 1 for the 2x2x2 Gauss-Legendre rule).
    pub qpt_weights: [f64; 8],
    /// `basis_vals[q][j]` is the value of basis function `j` at point `q`.
    pub basis_vals: [[f64; 8]; 8],
    /// `basis_grads[q][j]` is the reference-space gradient of basis
    /// function `j` at point `q`.
    pub basis_grads: [[Vec3; 8]; 8],
}

/// Evaluates all eight trilinear basis functions at a reference point.
///
/// Points outside `[-1,1]^3` are permitted; the trilinear polynomials simply
/// extrapolate.
pub fn eval_basis_values(x_hat: &Vec3) -> [f64; 8] {
    let mut vals = [0.0; 8];
    for (j, s) in NODE_SIGNS.iter().enumerate() {
        vals[j] = 0.125
            * (1.0 + s[0] * x_hat[0])
            * (1.0 + s[1] * x_hat[1])
            * (1.0 + s[2] * x_hat[2]);
    }
    vals
}

/// Evaluates the reference-space gradients of all eight basis functions at a
/// reference point, in the documented node ordering.
///
/// Points outside `[-1,1]^3` are permitted (polynomial extrapolation).
pub fn eval_basis_gradients(x_hat: &Vec3) -> [Vec3; 8] {
    let mut grads = [[0.0; 3]; 8];
    for (j, s) in NODE_SIGNS.iter().enumerate() {
        let fx = 1.0 + s[0] * x_hat[0];
        let fy = 1.0 + s[1] * x_hat[1];
        let fz = 1.0 + s[2] * x_hat[2];
        grads[j] = [
            0.125 * s[0] * fy * fz,
            0.125 * fx * s[1] * fz,
            0.125 * fx * fy * s[2],
        ];
    }
    grads
}

/// Builds the fully populated Q1 reference element with the 2x2x2
/// Gauss-Legendre rule.
pub fn build_reference_element() -> ReferenceElement {
    let g = 1.0 / 3.0_f64.sqrt();
    let mut qpt_coords = [[0.0; 3]; 8];
    let mut q = 0;
    for kz in 0..2 {
        for ky in 0..2 {
            for kx in 0..2 {
                qpt_coords[q] = [
                    if kx == 0 { -g } else { g },
                    if ky == 0 { -g } else { g },
                    if kz == 0 { -g } else { g },
                ];
                q += 1;
            }
        }
    }

    let mut basis_vals = [[0.0; 8]; 8];
    let mut basis_grads = [[[0.0; 3]; 8]; 8];
    for (q, x_hat) in qpt_coords.iter().enumerate() {
        basis_vals[q] = eval_basis_values(x_hat);
        basis_grads[q] = eval_basis_gradients(x_hat);
    }

    ReferenceElement {
        num_nodes: 8,
        num_qpts: 8,
        qpt_coords,
        qpt_weights: [1.0; 8],
        basis_vals,
        basis_grads,
    }
}
