//! Conjugate gradient iteration over any [`LinearOperator`], instrumented
//! per kernel class (operator apply, dot products, vector updates).
//!
//! One iteration performs the four kernel groups
//!
//! ```text
//! ddot  p_k^T A p_k
//! axpy  x_{k+1} = x_k + alpha_k p_k
//! axpy  r_{k+1} = r_k - alpha_k A p_k   (with ddot r^T r as a second pass)
//! axpy  p_{k+1} = r_{k+1} + beta_k p_k
//! ```
//!
//! The residual update and its dot product are deliberately two separate
//! passes; no kernels are fused.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, xpay, FieldVector, ReductionStrategy};
use crate::operators::{LinearOperator, OperatorKind};

/// Wall time spent in each kernel class during a solve, in seconds.
#[derive(Debug, Clone, Copy, Default)]
pub struct KernelTimings {
    pub operator_s: f64,
    pub dot_s: f64,
    pub axpy_s: f64,
}

/// Outcome of a CG run.
#[derive(Debug, Clone)]
pub struct CgReport {
    pub iterations: usize,
    /// l2 residual norms; entry 0 is the initial residual, one entry per
    /// iteration after that.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub timings: KernelTimings,
    /// dofs * iterations / wall-clock second for the whole iteration, in
    /// GDof/s.
    pub cg_gdofs: f64,
    /// Same metric counting only operator-apply time.
    pub op_gdofs: f64,
}

/// Solves `A x = b` to a relative residual (`||r_k|| <= tol ||r_0||`) or
/// until `max_iter` iterations.
///
/// The operator must be symmetric positive definite on the subspace the
/// iteration explores (constrain it first for singular operators). A
/// non-finite or non-positive curvature `p^T A p` aborts with
/// [`Error::Divergence`].
pub fn cg_solve(
    op: &dyn LinearOperator,
    b: &FieldVector,
    x0: &FieldVector,
    tol: f64,
    max_iter: usize,
    reduction: ReductionStrategy,
) -> Result<(FieldVector, CgReport)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "CG tolerance must be positive, got {tol}"
        )));
    }
    run_cg(op, b, x0, Some(tol), max_iter, reduction)
}

/// Runs exactly `iterations` CG iterations with no convergence test, for
/// throughput measurement.
pub fn cg_benchmark(
    op: &dyn LinearOperator,
    b: &FieldVector,
    iterations: usize,
    reduction: ReductionStrategy,
) -> Result<(FieldVector, CgReport)> {
    let x0 = FieldVector::zeros(b.num_nodes, b.components);
    run_cg(op, b, &x0, None, iterations, reduction)
}

fn run_cg(
    op: &dyn LinearOperator,
    b: &FieldVector,
    x0: &FieldVector,
    tol: Option<f64>,
    max_iter: usize,
    reduction: ReductionStrategy,
) -> Result<(FieldVector, CgReport)> {
    if b.len() != op.num_dofs() || !b.same_layout(x0) {
        return Err(Error::ShapeMismatch {
            context: "cg_solve",
            expected: op.num_dofs(),
            actual: b.len(),
        });
    }

    let solve_start = Instant::now();
    let mut timings = KernelTimings::default();
    let mut x = x0.clone();

    // r = b - A x0.
    let t = Instant::now();
    let ax = op.apply(&x)?;
    timings.operator_s += t.elapsed().as_secs_f64();
    let mut r = b.clone();
    let t = Instant::now();
    axpy(&mut r, -1.0, &ax)?;
    timings.axpy_s += t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut rr = dot(&r, &r, reduction)?;
    timings.dot_s += t.elapsed().as_secs_f64();

    let r0_norm = rr.sqrt();
    let mut history = vec![r0_norm];
    let mut p = r.clone();
    let mut converged = tol.is_some() && r0_norm == 0.0;
    let mut iterations = 0;

    while iterations < max_iter && !converged {
        let k = iterations;

        let t = Instant::now();
        let ap = op.apply(&p)?;
        timings.operator_s += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let pap = dot(&p, &ap, reduction)?;
        timings.dot_s += t.elapsed().as_secs_f64();
        if !pap.is_finite() || pap <= 0.0 {
            return Err(Error::Divergence {
                iteration: k,
                detail: format!("curvature p^T A p = {pap}"),
            });
        }
        let alpha = rr / pap;

        let t = Instant::now();
        axpy(&mut x, alpha, &p)?;
        axpy(&mut r, -alpha, &ap)?;
        timings.axpy_s += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let rr_new = dot(&r, &r, reduction)?;
        timings.dot_s += t.elapsed().as_secs_f64();
        if !rr_new.is_finite() {
            return Err(Error::Divergence {
                iteration: k,
                detail: format!("residual norm squared = {rr_new}"),
            });
        }

        iterations += 1;
        history.push(rr_new.sqrt());
        if let Some(tol) = tol {
            if rr_new.sqrt() <= tol * r0_norm {
                converged = true;
                break;
            }
        }

        let beta = rr_new / rr;
        let t = Instant::now();
        xpay(&mut p, beta, &r)?;
        timings.axpy_s += t.elapsed().as_secs_f64();
        rr = rr_new;
    }

    let total_s = solve_start.elapsed().as_secs_f64();
    let work = op.num_dofs() as f64 * iterations as f64;
    let report = CgReport {
        iterations,
        residual_history: history,
        converged,
        timings,
        cg_gdofs: if total_s > 0.0 { work / total_s / 1e9 } else { 0.0 },
        op_gdofs: if timings.operator_s > 0.0 {
            work / timings.operator_s / 1e9
        } else {
            0.0
        },
    };
    Ok((x, report))
}

/// Bytes moved by one CG vector kernel (two dof-length streams of 8-byte
/// reals) for a cubic box of `num_elements` elements.
///
/// `num_elements` must be a perfect cube; node count follows the structured
/// grid, `(cbrt(e) + 1)^3`.
pub fn cg_kernel_traffic(kind: OperatorKind, num_elements: u64) -> Result<u64> {
    let side = exact_cube_root(num_elements).ok_or_else(|| {
        Error::InvalidConfig(format!(
            "element count {num_elements} is not a perfect cube"
        ))
    })?;
    let nodes = (side + 1).pow(3);
    Ok(cg_kernel_traffic_for_nodes(kind, nodes))
}

/// Bytes moved by one CG vector kernel for an explicit node count.
pub fn cg_kernel_traffic_for_nodes(kind: OperatorKind, num_nodes: u64) -> u64 {
    2 * num_nodes * kind.components() as u64 * 8
}

pub(crate) fn exact_cube_root(n: u64) -> Option<u64> {
    let mut r = (n as f64).cbrt().round() as u64;
    // Guard against rounding of the floating-point cube root.
    while r > 0 && r.pow(3) > n {
        r -= 1;
    }
    while (r + 1).pow(3) <= n {
        r += 1;
    }
    (r.pow(3) == n).then_some(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble;
    use crate::mesh::build_box_mesh;
    use crate::operators::{ConstrainedOperator, CsrOperator};
    use crate::reference_element::build_reference_element;

    struct IdentityOperator {
        nodes: usize,
    }

    impl LinearOperator for IdentityOperator {
        fn apply(&self, u: &FieldVector) -> Result<FieldVector> {
            Ok(u.clone())
        }
        fn num_nodes(&self) -> usize {
            self.nodes
        }
        fn components(&self) -> usize {
            1
        }
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let op = IdentityOperator { nodes: 12 };
        let b = FieldVector::from_fn(12, 1, |i| (i as f64).sin() + 2.0);
        let x0 = FieldVector::zeros(12, 1);
        let (x, report) =
            cg_solve(&op, &b, &x0, 1e-12, 50, ReductionStrategy::BlockedDeterministic).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 1);
        assert_eq!(report.residual_history.len(), 2);
        for (xi, bi) in x.values.iter().zip(&b.values) {
            assert!((xi - bi).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_rhs_returns_initial_guess() {
        let op = IdentityOperator { nodes: 5 };
        let b = FieldVector::zeros(5, 1);
        let x0 = FieldVector::zeros(5, 1);
        let (x, report) =
            cg_solve(&op, &b, &x0, 1e-10, 10, ReductionStrategy::Sequential).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 0);
        assert!(x.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_interior_dof_converges_in_one_iteration() {
        // A 2x2x2 mesh has exactly one interior node; the constrained
        // scalar Laplace system has a single active dof.
        let mesh = build_box_mesh([2, 2, 2], [1.0, 1.0, 1.0]).unwrap();
        let re = build_reference_element();
        let matrix = assemble(
            crate::operators::OperatorKind::ScalarLaplace,
            &mesh,
            &re,
            None,
            Some(&mesh.boundary_nodes),
        )
        .unwrap();
        let op = CsrOperator {
            matrix: &matrix,
            components: 1,
        };
        let b = FieldVector::from_fn(mesh.num_nodes, 1, |i| if i == 13 { 1.0 } else { 0.0 });
        let x0 = FieldVector::zeros(mesh.num_nodes, 1);
        let (_, report) =
            cg_solve(&op, &b, &x0, 1e-10, 10, ReductionStrategy::BlockedDeterministic).unwrap();
        assert!(report.converged);
        assert_eq!(report.iterations, 1);
    }

    #[test]
    fn manufactured_solution_recovery() {
        let mesh = build_box_mesh([4, 4, 4], [1.0, 1.0, 1.0]).unwrap();
        let re = build_reference_element();
        let kind = crate::operators::OperatorKind::ScalarLaplace;
        let matrix = assemble(kind, &mesh, &re, None, Some(&mesh.boundary_nodes)).unwrap();
        let op = ConstrainedOperator::from_boundary_nodes(
            CsrOperator {
                matrix: &matrix,
                components: 1,
            },
            &mesh.boundary_nodes,
        );

        // Exact solution supported on interior dofs.
        let boundary: std::collections::HashSet<u32> =
            mesh.boundary_nodes.iter().copied().collect();
        let x_exact = FieldVector::from_fn(mesh.num_nodes, 1, |i| {
            if boundary.contains(&(i as u32)) {
                0.0
            } else {
                ((i * 11 % 23) as f64) / 23.0 - 0.4
            }
        });
        let b = op.apply(&x_exact).unwrap();
        let x0 = FieldVector::zeros(mesh.num_nodes, 1);
        let (x, report) =
            cg_solve(&op, &b, &x0, 1e-10, 200, ReductionStrategy::BlockedDeterministic).unwrap();
        assert!(report.converged, "history: {:?}", report.residual_history);

        let norm: f64 = x_exact.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err: f64 = x
            .values
            .iter()
            .zip(&x_exact.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-8 * norm, "relative error {}", err / norm);
    }

    #[test]
    fn iteration_count_is_invariant_under_rhs_scaling() {
        let mesh = build_box_mesh([3, 3, 3], [1.0, 1.0, 1.0]).unwrap();
        let re = build_reference_element();
        let kind = crate::operators::OperatorKind::ScalarLaplace;
        let matrix = assemble(kind, &mesh, &re, None, Some(&mesh.boundary_nodes)).unwrap();
        let op = CsrOperator {
            matrix: &matrix,
            components: 1,
        };
        let b = FieldVector::from_fn(mesh.num_nodes, 1, |i| ((i * 7 % 13) as f64) - 6.0);
        let b_scaled = FieldVector::from_values(
            mesh.num_nodes,
            1,
            b.values.iter().map(|v| v * 1e3).collect(),
        )
        .unwrap();
        let x0 = FieldVector::zeros(mesh.num_nodes, 1);
        let (_, r1) =
            cg_solve(&op, &b, &x0, 1e-8, 500, ReductionStrategy::BlockedDeterministic).unwrap();
        let (_, r2) = cg_solve(
            &op,
            &b_scaled,
            &x0,
            1e-8,
            500,
            ReductionStrategy::BlockedDeterministic,
        )
        .unwrap();
        assert!(r1.converged && r2.converged);
        assert_eq!(r1.iterations, r2.iterations);
    }

    #[test]
    fn indefinite_operator_reports_divergence() {
        struct NegativeOperator;
        impl LinearOperator for NegativeOperator {
            fn apply(&self, u: &FieldVector) -> Result<FieldVector> {
                let mut v = u.clone();
                for x in v.values.iter_mut() {
                    *x = -*x;
                }
                Ok(v)
            }
            fn num_nodes(&self) -> usize {
                4
            }
            fn components(&self) -> usize {
                1
            }
        }
        let b = FieldVector::from_fn(4, 1, |i| i as f64 + 1.0);
        let x0 = FieldVector::zeros(4, 1);
        let err = cg_solve(
            &NegativeOperator,
            &b,
            &x0,
            1e-8,
            10,
            ReductionStrategy::Sequential,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Divergence { iteration: 0, .. }));
    }

    #[test]
    fn kernel_traffic_model_values() {
        // 10^6 elements: 1,030,301 nodes.
        let laplace = cg_kernel_traffic(OperatorKind::ScalarLaplace, 1_000_000).unwrap();
        assert_eq!(laplace, 2 * 1_030_301 * 8);
        let mechanics = cg_kernel_traffic(OperatorKind::Elasticity, 1_000_000).unwrap();
        assert_eq!(mechanics, 2 * 3 * 1_030_301 * 8);

        // One element: eight nodes, scalar: 2 * 8 * 8 = 128 bytes.
        assert_eq!(cg_kernel_traffic(OperatorKind::ScalarLaplace, 1).unwrap(), 128);

        assert!(cg_kernel_traffic(OperatorKind::ScalarLaplace, 7).is_err());
    }

    #[test]
    fn exact_cube_root_edges() {
        assert_eq!(exact_cube_root(1), Some(1));
        assert_eq!(exact_cube_root(8_000), Some(20));
        assert_eq!(exact_cube_root(1_000_000), Some(100));
        assert_eq!(exact_cube_root(999_999), None);
    }
}
