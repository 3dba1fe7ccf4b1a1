//! Nodal field vectors, CSR sparse matrices, and the vector kernels used by
//! the CG iteration: `dot`, `axpy`, and `spmv`.
//!
//! The dot product ships with four reduction strategies because summation
//! order is the one place where otherwise-identical solvers diverge. The
//! `BlockedDeterministic` strategy partitions the vector into fixed blocks,
//! reduces each block sequentially, and combines the partials in block-index
//! order, so its result is bit-identical for any worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Block length used by [`ReductionStrategy::BlockedDeterministic`] and by
/// the parallel `axpy`/`xpay` kernels.
pub const REDUCTION_BLOCK: usize = 4096;

/// How a dot product orders its floating-point additions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReductionStrategy {
    /// Strict left-to-right fold on a single worker.
    Sequential,
    /// Recursive halving; fixed tree shape independent of workers.
    PairwiseTree,
    /// Fixed-size blocks reduced independently, partials combined in block
    /// order. Bit-identical for any worker count; the crate-wide default.
    #[default]
    BlockedDeterministic,
    /// Kahan-style compensated summation on a single worker.
    Compensated,
}

impl ReductionStrategy {
    pub const ALL: [ReductionStrategy; 4] = [
        ReductionStrategy::Sequential,
        ReductionStrategy::PairwiseTree,
        ReductionStrategy::BlockedDeterministic,
        ReductionStrategy::Compensated,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ReductionStrategy::Sequential => "sequential",
            ReductionStrategy::PairwiseTree => "pairwise",
            ReductionStrategy::BlockedDeterministic => "blocked",
            ReductionStrategy::Compensated => "compensated",
        }
    }
}

impl std::str::FromStr for ReductionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(ReductionStrategy::Sequential),
            "pairwise" => Ok(ReductionStrategy::PairwiseTree),
            "blocked" => Ok(ReductionStrategy::BlockedDeterministic),
            "compensated" => Ok(ReductionStrategy::Compensated),
            other => Err(Error::InvalidConfig(format!(
                "unknown reduction strategy '{other}' \
                 (expected sequential|pairwise|blocked|compensated)"
            ))),
        }
    }
}

/// A nodal dof vector with 1 or 3 components per node, node-major blocked:
/// the dof of node `j`, component `l` sits at index `j*components + l`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldVector {
    pub num_nodes: usize,
    pub components: usize,
    pub values: Vec<f64>,
}

impl FieldVector {
    pub fn zeros(num_nodes: usize, components: usize) -> Self {
        assert!(
            components == 1 || components == 3,
            "components per node must be 1 or 3"
        );
        Self {
            num_nodes,
            components,
            values: vec![0.0; num_nodes * components],
        }
    }

    pub fn from_values(num_nodes: usize, components: usize, values: Vec<f64>) -> Result<Self> {
        if components != 1 && components != 3 {
            return Err(Error::InvalidConfig(format!(
                "components per node must be 1 or 3, got {components}"
            )));
        }
        if values.len() != num_nodes * components {
            return Err(Error::ShapeMismatch {
                context: "FieldVector::from_values",
                expected: num_nodes * components,
                actual: values.len(),
            });
        }
        Ok(Self {
            num_nodes,
            components,
            values,
        })
    }

    /// Fills the vector entry-by-entry from a function of the dof index.
    pub fn from_fn(num_nodes: usize, components: usize, mut f: impl FnMut(usize) -> f64) -> Self {
        let mut v = Self::zeros(num_nodes, components);
        for (i, x) in v.values.iter_mut().enumerate() {
            *x = f(i);
        }
        v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_layout(&self, other: &FieldVector) -> bool {
        self.num_nodes == other.num_nodes && self.components == other.components
    }

    pub fn norm2(&self, strategy: ReductionStrategy) -> f64 {
        dot(self, self, strategy).expect("self-dot cannot mismatch").sqrt()
    }
}

fn check_layout(a: &FieldVector, b: &FieldVector, context: &'static str) -> Result<()> {
    if !a.same_layout(b) {
        return Err(Error::ShapeMismatch {
            context,
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

/// Dot product `sum_i a_i b_i` under the chosen reduction order.
pub fn dot(a: &FieldVector, b: &FieldVector, strategy: ReductionStrategy) -> Result<f64> {
    check_layout(a, b, "dot")?;
    Ok(dot_slices(&a.values, &b.values, strategy))
}

/// Dot product over raw slices; panics on length mismatch.
pub fn dot_slices(a: &[f64], b: &[f64], strategy: ReductionStrategy) -> f64 {
    assert_eq!(a.len(), b.len(), "dot_slices: length mismatch");
    match strategy {
        ReductionStrategy::Sequential => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        ReductionStrategy::PairwiseTree => pairwise_dot(a, b),
        ReductionStrategy::BlockedDeterministic => {
            let partials: Vec<f64> = a
                .par_chunks(REDUCTION_BLOCK)
                .zip(b.par_chunks(REDUCTION_BLOCK))
                .map(|(ca, cb)| ca.iter().zip(cb).map(|(x, y)| x * y).sum::<f64>())
                .collect();
            partials.iter().sum()
        }
        ReductionStrategy::Compensated => {
            // Kahan-Babuska (Neumaier) compensation over the products.
            let mut sum = 0.0;
            let mut comp = 0.0;
            for (x, y) in a.iter().zip(b) {
                let p = x * y;
                let t = sum + p;
                if sum.abs() >= p.abs() {
                    comp += (sum - t) + p;
                } else {
                    comp += (p - t) + sum;
                }
                sum = t;
            }
            sum + comp
        }
    }
}

fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    if a.len() <= 64 {
        return a.iter().zip(b).map(|(x, y)| x * y).sum();
    }
    let mid = a.len() / 2;
    pairwise_dot(&a[..mid], &b[..mid]) + pairwise_dot(&a[mid..], &b[mid..])
}

/// `y <- y + alpha * x`, in place, in parallel over fixed blocks.
pub fn axpy(y: &mut FieldVector, alpha: f64, x: &FieldVector) -> Result<()> {
    check_layout(y, x, "axpy")?;
    y.values
        .par_chunks_mut(REDUCTION_BLOCK)
        .zip(x.values.par_chunks(REDUCTION_BLOCK))
        .for_each(|(cy, cx)| {
            for (yi, xi) in cy.iter_mut().zip(cx) {
                *yi += alpha * xi;
            }
        });
    Ok(())
}

/// `y <- x + beta * y`, in place (the CG direction update).
pub fn xpay(y: &mut FieldVector, beta: f64, x: &FieldVector) -> Result<()> {
    check_layout(y, x, "xpay")?;
    y.values
        .par_chunks_mut(REDUCTION_BLOCK)
        .zip(x.values.par_chunks(REDUCTION_BLOCK))
        .for_each(|(cy, cx)| {
            for (yi, xi) in cy.iter_mut().zip(cx) {
                *yi = xi + beta * *yi;
            }
        });
    Ok(())
}

/// Compressed sparse row matrix with 4-byte column indices, 8-byte values,
/// and 8-byte row offsets (12 bytes per stored non-zero plus offsets).
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub num_rows: usize,
    pub num_cols: usize,
    pub row_offsets: Vec<u64>,
    pub col_indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Validates structural invariants: offsets nondecreasing and spanning
    /// the arrays, column indices strictly increasing within each row and in
    /// range.
    pub fn from_parts(
        num_rows: usize,
        num_cols: usize,
        row_offsets: Vec<u64>,
        col_indices: Vec<u32>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != num_rows + 1 {
            return Err(Error::InvalidCsr(format!(
                "row_offsets length {} != num_rows + 1 = {}",
                row_offsets.len(),
                num_rows + 1
            )));
        }
        if col_indices.len() != values.len() {
            return Err(Error::InvalidCsr(format!(
                "col_indices length {} != values length {}",
                col_indices.len(),
                values.len()
            )));
        }
        if row_offsets[0] != 0 || row_offsets[num_rows] != values.len() as u64 {
            return Err(Error::InvalidCsr("row offsets do not span the arrays".into()));
        }
        for r in 0..num_rows {
            let (start, end) = (row_offsets[r], row_offsets[r + 1]);
            if start > end {
                return Err(Error::InvalidCsr(format!("row {r} offsets decrease")));
            }
            let row = &col_indices[start as usize..end as usize];
            for w in row.windows(2) {
                if w[0] >= w[1] {
                    return Err(Error::InvalidCsr(format!(
                        "row {r} columns not strictly increasing"
                    )));
                }
            }
            if let Some(&last) = row.last() {
                if last as usize >= num_cols {
                    return Err(Error::InvalidCsr(format!(
                        "row {r} column {last} out of range"
                    )));
                }
            }
        }
        Ok(Self {
            num_rows,
            num_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            num_rows: n,
            num_cols: n,
            row_offsets: (0..=n as u64).collect(),
            col_indices: (0..n as u32).collect(),
            values: vec![1.0; n],
        }
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Bytes held by values and column indices: `12 * nnz`.
    pub fn matrix_bytes(&self) -> u64 {
        (self.values.len() * 8 + self.col_indices.len() * 4) as u64
    }

    /// Bytes held by the row offset array: `8 * (num_rows + 1)`.
    pub fn row_offset_bytes(&self) -> u64 {
        (self.row_offsets.len() * 8) as u64
    }

    /// Number of stored entries in one row.
    pub fn row_nnz(&self, row: usize) -> usize {
        (self.row_offsets[row + 1] - self.row_offsets[row]) as usize
    }
}

/// Sparse matrix-vector product `y = A x`, parallel over rows.
pub fn spmv(a: &CsrMatrix, x: &FieldVector) -> Result<FieldVector> {
    if a.num_cols != x.len() {
        return Err(Error::ShapeMismatch {
            context: "spmv",
            expected: a.num_cols,
            actual: x.len(),
        });
    }
    debug_assert_eq!(a.num_rows % x.components, 0);
    let mut y = FieldVector::zeros(a.num_rows / x.components, x.components);
    spmv_into(a, x, &mut y)?;
    Ok(y)
}

/// `y = A x` into a preallocated output.
pub fn spmv_into(a: &CsrMatrix, x: &FieldVector, y: &mut FieldVector) -> Result<()> {
    if a.num_cols != x.len() {
        return Err(Error::ShapeMismatch {
            context: "spmv",
            expected: a.num_cols,
            actual: x.len(),
        });
    }
    if a.num_rows != y.len() {
        return Err(Error::ShapeMismatch {
            context: "spmv output",
            expected: a.num_rows,
            actual: y.len(),
        });
    }
    let xv = &x.values;
    y.values.par_iter_mut().enumerate().for_each(|(r, yr)| {
        let start = a.row_offsets[r] as usize;
        let end = a.row_offsets[r + 1] as usize;
        let mut acc = 0.0;
        for idx in start..end {
            acc += a.values[idx] * xv[a.col_indices[idx] as usize];
        }
        *yr = acc;
    });
    Ok(())
}
