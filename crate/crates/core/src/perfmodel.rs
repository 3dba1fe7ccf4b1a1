//! Theoretical memory-transfer and throughput model ("speed of light").
//!
//! For each operator strategy the model counts the bytes a kernel must move
//! for a structured box problem, divides by a device's peak bandwidth to get
//! an idealized transfer time, and divides the dof count by that time for a
//! throughput bound.
//!
//! Nodal data gets a (best, worst) pair: *best* assumes perfect caching
//! (each nodal value read once in total), *worst* assumes no caching (each
//! nodal value read once per incident element, 8x on a hex grid). Vector
//! traffic counts three dof-length streams (input read, output read, output
//! write); matrix traffic counts 12 bytes per stored non-zero plus the
//! 8-byte-per-row offset array.
//!
//! Accounting notes, visible in the line items of every estimate:
//! - SpMV totals include the row-offset bytes next to the 12-byte-per-nnz
//!   matrix stream; both line items are reported separately so either
//!   reading of "matrix memory" can be checked.
//! - Partial-assembly elasticity totals exclude the per-cell material
//!   constants (the line item is still reported, flagged as out of total);
//!   matrix-free elasticity totals include them.

use crate::error::{Error, Result};
use crate::operators::OperatorKind;

/// A device characterized by its peak memory bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct HardwareSpec {
    pub name: String,
    /// Peak device-memory bandwidth in bytes per second.
    pub bandwidth: f64,
}

impl HardwareSpec {
    pub fn new(name: impl Into<String>, gb_per_s: f64) -> Result<Self> {
        if !(gb_per_s > 0.0) || !gb_per_s.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "bandwidth must be positive, got {gb_per_s} GB/s"
            )));
        }
        Ok(Self {
            name: name.into(),
            bandwidth: gb_per_s * 1e9,
        })
    }

    /// Built-in presets: published peak bandwidths of the V100 (900 GB/s),
    /// A100 (1,935 GB/s), and one MI250X GCD (1,638 GB/s).
    pub fn presets() -> Vec<HardwareSpec> {
        vec![
            HardwareSpec::new("V100", 900.0).unwrap(),
            HardwareSpec::new("A100", 1935.0).unwrap(),
            HardwareSpec::new("MI250X", 1638.0).unwrap(),
        ]
    }

    /// Parses the plain-text hardware config: one `name,bandwidth_gb_per_s`
    /// pair per line, `#` starts a comment, blank lines ignored.
    pub fn parse_config(text: &str) -> Result<Vec<HardwareSpec>> {
        let mut specs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (name, bw) = line.split_once(',').ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "hardware config line {}: expected 'name,GB/s', got '{raw}'",
                    lineno + 1
                ))
            })?;
            let gb: f64 = bw.trim().parse().map_err(|_| {
                Error::InvalidConfig(format!(
                    "hardware config line {}: bad bandwidth '{bw}'",
                    lineno + 1
                ))
            })?;
            specs.push(HardwareSpec::new(name.trim(), gb)?);
        }
        if specs.is_empty() {
            return Err(Error::InvalidConfig("hardware config has no entries".into()));
        }
        Ok(specs)
    }
}

/// Operator application strategy the model (and the harness) distinguishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    MatrixFree,
    PartialAssembly,
    Spmv,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::MatrixFree, Strategy::PartialAssembly, Strategy::Spmv];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::MatrixFree => "matrix_free",
            Strategy::PartialAssembly => "partial_assembly",
            Strategy::Spmv => "spmv",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matrix_free" | "matrix-free" | "mf" => Ok(Strategy::MatrixFree),
            "partial_assembly" | "partial-assembly" | "pa" => Ok(Strategy::PartialAssembly),
            "spmv" => Ok(Strategy::Spmv),
            other => Err(Error::InvalidConfig(format!(
                "unknown strategy '{other}' (expected matrix_free|partial_assembly|spmv)"
            ))),
        }
    }
}

/// Problem geometry the model reasons about: a structured box.
#[derive(Debug, Clone, Copy)]
pub struct ProblemSize {
    pub dims: [u64; 3],
}

impl ProblemSize {
    /// A cubic box; `num_elements` must be a perfect cube.
    pub fn from_cube_elements(num_elements: u64) -> Result<Self> {
        let side = crate::cg::exact_cube_root(num_elements).ok_or_else(|| {
            Error::InvalidConfig(format!(
                "element count {num_elements} is not a perfect cube; pass dims instead"
            ))
        })?;
        Ok(Self {
            dims: [side, side, side],
        })
    }

    pub fn from_dims(dims: [usize; 3]) -> Self {
        Self {
            dims: [dims[0] as u64, dims[1] as u64, dims[2] as u64],
        }
    }

    pub fn num_elements(&self) -> u64 {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn num_nodes(&self) -> u64 {
        (self.dims[0] + 1) * (self.dims[1] + 1) * (self.dims[2] + 1)
    }
}

/// Best-case (perfect cache) and worst-case (no cache) byte counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ByteRange {
    pub best: u64,
    pub worst: u64,
}

impl ByteRange {
    pub fn flat(bytes: u64) -> Self {
        Self {
            best: bytes,
            worst: bytes,
        }
    }

    pub fn mb(&self) -> (f64, f64) {
        (self.best as f64 / 1e6, self.worst as f64 / 1e6)
    }
}

/// Named byte-traffic contributors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    MatrixValues,
    RowOffsets,
    NodeMap,
    CellConstants,
    QuadratureStorage,
    NodalPositions,
    Vectors,
}

impl Component {
    pub fn name(&self) -> &'static str {
        match self {
            Component::MatrixValues => "matrix_values",
            Component::RowOffsets => "row_offsets",
            Component::NodeMap => "node_map",
            Component::CellConstants => "cell_constants",
            Component::QuadratureStorage => "quadrature_storage",
            Component::NodalPositions => "nodal_positions",
            Component::Vectors => "vectors",
        }
    }
}

/// One traffic line item; `in_total` marks whether it contributes to the
/// headline total.
#[derive(Debug, Clone, Copy)]
pub struct LineItem {
    pub component: Component,
    pub bytes: ByteRange,
    pub in_total: bool,
}

/// Byte-traffic prediction for one (kind, strategy) pair.
#[derive(Debug, Clone)]
pub struct TrafficEstimate {
    pub kind: OperatorKind,
    pub strategy: Strategy,
    pub num_elements: u64,
    pub num_nodes: u64,
    pub ndof: u64,
    pub items: Vec<LineItem>,
    pub total: ByteRange,
}

impl TrafficEstimate {
    fn from_items(
        kind: OperatorKind,
        strategy: Strategy,
        size: &ProblemSize,
        items: Vec<LineItem>,
    ) -> Self {
        let total = items.iter().filter(|i| i.in_total).fold(
            ByteRange { best: 0, worst: 0 },
            |acc, item| ByteRange {
                best: acc.best + item.bytes.best,
                worst: acc.worst + item.bytes.worst,
            },
        );
        Self {
            kind,
            strategy,
            num_elements: size.num_elements(),
            num_nodes: size.num_nodes(),
            ndof: size.num_nodes() * kind.components() as u64,
            items,
            total,
        }
    }

    pub fn component(&self, component: Component) -> Option<ByteRange> {
        self.items
            .iter()
            .find(|i| i.component == component)
            .map(|i| i.bytes)
    }

    pub fn speed_of_light(&self, hw: &HardwareSpec) -> SolBound {
        speed_of_light(self.total, hw, self.ndof)
    }
}

/// Data values stored per quadrature point by each strategy.
pub fn quadrature_values_per_qpt(kind: OperatorKind, strategy: Strategy) -> u64 {
    match strategy {
        Strategy::PartialAssembly => {
            crate::operators::PartialAssemblyData::values_per_qpt(kind) as u64
        }
        _ => 0,
    }
}

/// Number of stored non-zeros per matrix row in the stencil model (27 per
/// scalar node pair).
pub fn model_nnz_per_row(kind: OperatorKind) -> u64 {
    27 * kind.components() as u64
}

fn vector_item(kind: OperatorKind, size: &ProblemSize) -> LineItem {
    // Input read + output read + output write: three dof streams.
    let c = kind.components() as u64;
    LineItem {
        component: Component::Vectors,
        bytes: ByteRange {
            best: 3 * c * 8 * size.num_nodes(),
            worst: 3 * c * 8 * 8 * size.num_elements(),
        },
        in_total: true,
    }
}

fn node_map_item(size: &ProblemSize) -> LineItem {
    LineItem {
        component: Component::NodeMap,
        bytes: ByteRange::flat(size.num_elements() * 8 * 4),
        in_total: true,
    }
}

fn cell_constants_item(kind: OperatorKind, size: &ProblemSize, in_total: bool) -> LineItem {
    // Two material constants per element, elasticity only.
    let bytes = match kind {
        OperatorKind::Elasticity => size.num_elements() * 2 * 8,
        _ => 0,
    };
    LineItem {
        component: Component::CellConstants,
        bytes: ByteRange::flat(bytes),
        in_total,
    }
}

/// Traffic for the assembled SpMV kernel.
pub fn spmv_traffic(kind: OperatorKind, size: &ProblemSize) -> TrafficEstimate {
    let c = kind.components() as u64;
    let rows = size.num_nodes() * c;
    let nnz = rows * model_nnz_per_row(kind);
    let items = vec![
        LineItem {
            component: Component::MatrixValues,
            bytes: ByteRange::flat(nnz * 12),
            in_total: true,
        },
        LineItem {
            component: Component::RowOffsets,
            bytes: ByteRange::flat((rows + 1) * 8),
            in_total: true,
        },
        LineItem {
            component: Component::Vectors,
            bytes: ByteRange::flat(2 * rows * 8),
            in_total: true,
        },
    ];
    TrafficEstimate::from_items(kind, Strategy::Spmv, size, items)
}

/// Traffic for the matrix-free kernel (geometry recomputed from coordinates).
pub fn matrix_free_traffic(kind: OperatorKind, size: &ProblemSize) -> TrafficEstimate {
    let items = vec![
        node_map_item(size),
        cell_constants_item(kind, size, true),
        LineItem {
            component: Component::QuadratureStorage,
            bytes: ByteRange::flat(0),
            in_total: true,
        },
        LineItem {
            component: Component::NodalPositions,
            bytes: ByteRange {
                best: size.num_nodes() * 3 * 8,
                worst: size.num_elements() * 8 * 3 * 8,
            },
            in_total: true,
        },
        vector_item(kind, size),
    ];
    TrafficEstimate::from_items(kind, Strategy::MatrixFree, size, items)
}

/// Traffic for the partial-assembly kernel (stored quadrature factors, no
/// coordinate reads).
pub fn partial_assembly_traffic(kind: OperatorKind, size: &ProblemSize) -> TrafficEstimate {
    let vals_per_qpt = quadrature_values_per_qpt(kind, Strategy::PartialAssembly);
    let items = vec![
        node_map_item(size),
        // Reported but outside the headline total for this strategy.
        cell_constants_item(kind, size, false),
        LineItem {
            component: Component::QuadratureStorage,
            bytes: ByteRange::flat(size.num_elements() * 8 * vals_per_qpt * 8),
            in_total: true,
        },
        vector_item(kind, size),
    ];
    TrafficEstimate::from_items(kind, Strategy::PartialAssembly, size, items)
}

/// Dispatch on strategy.
pub fn traffic(kind: OperatorKind, strategy: Strategy, size: &ProblemSize) -> TrafficEstimate {
    match strategy {
        Strategy::MatrixFree => matrix_free_traffic(kind, size),
        Strategy::PartialAssembly => partial_assembly_traffic(kind, size),
        Strategy::Spmv => spmv_traffic(kind, size),
    }
}

/// Idealized transfer time and throughput for a byte range on a device.
#[derive(Debug, Clone, Copy)]
pub struct SolBound {
    /// Transfer time in seconds, (best, worst).
    pub time_s: (f64, f64),
    /// Throughput in dof/s, (best, worst). Best-case bytes give the higher
    /// throughput.
    pub dofs_per_s: (f64, f64),
}

/// `time = bytes / bandwidth`, `throughput = ndof / time`, per scenario.
pub fn speed_of_light(bytes: ByteRange, hw: &HardwareSpec, ndof: u64) -> SolBound {
    let t_best = bytes.best as f64 / hw.bandwidth;
    let t_worst = bytes.worst as f64 / hw.bandwidth;
    SolBound {
        time_s: (t_best, t_worst),
        dofs_per_s: (ndof as f64 / t_best, ndof as f64 / t_worst),
    }
}

/// One row of the machine-readable model report.
#[derive(Debug, Clone)]
pub struct ModelRow {
    pub kind: OperatorKind,
    pub strategy: Strategy,
    /// "best" (perfect cache) or "worst" (no cache).
    pub scenario: &'static str,
    pub hardware: String,
    pub num_elements: u64,
    pub ndof: u64,
    pub total_bytes: u64,
    pub transfer_ms: f64,
    pub gdofs: f64,
}

/// Evaluates the model for every (kind, strategy, scenario, hardware)
/// combination at one problem size.
pub fn model_rows(
    kinds: &[OperatorKind],
    size: &ProblemSize,
    hardware: &[HardwareSpec],
) -> Vec<ModelRow> {
    let mut rows = Vec::new();
    for &kind in kinds {
        for strategy in Strategy::ALL {
            let estimate = traffic(kind, strategy, size);
            for hw in hardware {
                let sol = estimate.speed_of_light(hw);
                for (scenario, bytes, time, tp) in [
                    ("best", estimate.total.best, sol.time_s.0, sol.dofs_per_s.0),
                    ("worst", estimate.total.worst, sol.time_s.1, sol.dofs_per_s.1),
                ] {
                    rows.push(ModelRow {
                        kind,
                        strategy,
                        scenario,
                        hardware: hw.name.clone(),
                        num_elements: estimate.num_elements,
                        ndof: estimate.ndof,
                        total_bytes: bytes,
                        transfer_ms: time * 1e3,
                        gdofs: tp / 1e9,
                    });
                }
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn million() -> ProblemSize {
        ProblemSize::from_cube_elements(1_000_000).unwrap()
    }

    #[test]
    fn problem_size_counts() {
        let size = million();
        assert_eq!(size.num_elements(), 1_000_000);
        assert_eq!(size.num_nodes(), 1_030_301);
        let flat = ProblemSize::from_dims([4, 3, 2]);
        assert_eq!(flat.num_elements(), 24);
        assert_eq!(flat.num_nodes(), 60);
    }

    #[test]
    fn spmv_traffic_reproduces_reference_totals() {
        let size = million();
        let scalar = spmv_traffic(OperatorKind::ScalarLaplace, &size);
        // 27 nnz/row * 1,030,301 rows * 12 B.
        let matrix = scalar.component(Component::MatrixValues).unwrap();
        assert_eq!(matrix.best, 27 * 1_030_301 * 12);
        // Headline total lands on 359 MB (within rounding).
        let (total_mb, _) = scalar.total.mb();
        assert!((total_mb - 359.0).abs() / 359.0 < 0.005, "{total_mb}");

        let mech = spmv_traffic(OperatorKind::Elasticity, &size);
        let matrix = mech.component(Component::MatrixValues).unwrap();
        assert!((matrix.best as f64 / 1e6 - 3004.0).abs() / 3004.0 < 0.001);
        let (total_mb, _) = mech.total.mb();
        assert!((total_mb - 3079.0).abs() / 3079.0 < 0.001, "{total_mb}");
    }

    #[test]
    fn spmv_single_element_bytes() {
        let size = ProblemSize::from_dims([1, 1, 1]);
        let est = spmv_traffic(OperatorKind::ScalarLaplace, &size);
        let matrix = est.component(Component::MatrixValues).unwrap();
        assert_eq!(matrix.best, 8 * 27 * 12);
        let vectors = est.component(Component::Vectors).unwrap();
        assert_eq!(vectors.best, 2 * 8 * 8);
    }

    #[test]
    fn matrix_free_traffic_endpoints() {
        let size = million();
        let laplace = matrix_free_traffic(OperatorKind::ScalarLaplace, &size);
        assert_eq!(laplace.component(Component::NodeMap).unwrap().best, 32_000_000);
        assert_eq!(
            laplace.component(Component::NodalPositions).unwrap().worst,
            192_000_000
        );
        let (best_mb, worst_mb) = laplace.total.mb();
        assert!((best_mb - 81.0).abs() / 81.0 < 0.01, "{best_mb}");
        assert_eq!(worst_mb, 416.0);

        let elastic = matrix_free_traffic(OperatorKind::Elasticity, &size);
        assert_eq!(
            elastic.component(Component::CellConstants).unwrap().best,
            16_000_000
        );
        let (best_mb, worst_mb) = elastic.total.mb();
        assert!((best_mb - 147.0).abs() / 147.0 < 0.01, "{best_mb}");
        assert_eq!(worst_mb, 816.0);
    }

    #[test]
    fn partial_assembly_traffic_endpoints() {
        let size = million();
        let laplace = partial_assembly_traffic(OperatorKind::ScalarLaplace, &size);
        assert_eq!(
            laplace.component(Component::QuadratureStorage).unwrap().best,
            384_000_000
        );
        let (best_mb, worst_mb) = laplace.total.mb();
        assert!((best_mb - 441.0).abs() / 441.0 < 0.001, "{best_mb}");
        assert_eq!(worst_mb, 608.0);

        let elastic = partial_assembly_traffic(OperatorKind::Elasticity, &size);
        assert_eq!(
            elastic.component(Component::QuadratureStorage).unwrap().best,
            1_344_000_000
        );
        // Cell constants reported but excluded from the headline total.
        let cell = elastic
            .items
            .iter()
            .find(|i| i.component == Component::CellConstants)
            .unwrap();
        assert_eq!(cell.bytes.best, 16_000_000);
        assert!(!cell.in_total);
        let (best_mb, worst_mb) = elastic.total.mb();
        assert!((best_mb - 1450.0).abs() / 1450.0 < 0.001, "{best_mb}");
        assert_eq!(worst_mb, 1952.0);
    }

    #[test]
    fn totals_equal_sum_of_included_items() {
        let size = ProblemSize::from_dims([10, 7, 4]);
        for kind in OperatorKind::ALL {
            for strategy in Strategy::ALL {
                let est = traffic(kind, strategy, &size);
                let sum_best: u64 = est
                    .items
                    .iter()
                    .filter(|i| i.in_total)
                    .map(|i| i.bytes.best)
                    .sum();
                assert_eq!(est.total.best, sum_best);
                assert!(est.total.best <= est.total.worst);
            }
        }
    }

    #[test]
    fn traffic_scales_linearly_in_element_count() {
        let small = ProblemSize::from_dims([10, 10, 10]);
        let large = ProblemSize::from_dims([20, 20, 20]);
        let element_ratio = 8.0;
        let node_ratio = large.num_nodes() as f64 / small.num_nodes() as f64;
        for strategy in Strategy::ALL {
            let a = traffic(OperatorKind::ScalarLaplace, strategy, &small);
            let b = traffic(OperatorKind::ScalarLaplace, strategy, &large);
            // Element-extensive components scale by exactly 8.
            for component in [Component::NodeMap, Component::QuadratureStorage] {
                if let (Some(ca), Some(cb)) = (a.component(component), b.component(component)) {
                    assert_eq!(cb.worst, ca.worst * 8);
                }
            }
            // Totals mix node- and element-extensive terms (plus the O(1)
            // row-offset tail), so the ratio sits between the two.
            for (ta, tb) in [(a.total.best, b.total.best), (a.total.worst, b.total.worst)] {
                let ratio = tb as f64 / ta as f64;
                assert!(
                    ratio >= node_ratio * (1.0 - 1e-3) && ratio <= element_ratio + 1e-9,
                    "{strategy:?}: {ratio} outside [{node_ratio}, {element_ratio}]"
                );
            }
        }
    }

    #[test]
    fn speed_of_light_is_linear_in_bandwidth() {
        let size = million();
        let est = spmv_traffic(OperatorKind::ScalarLaplace, &size);
        let hw1 = HardwareSpec::new("one", 900.0).unwrap();
        let hw2 = HardwareSpec::new("two", 1800.0).unwrap();
        let s1 = est.speed_of_light(&hw1);
        let s2 = est.speed_of_light(&hw2);
        assert!((s1.time_s.0 / s2.time_s.0 - 2.0).abs() < 1e-12);
        assert!((s2.dofs_per_s.0 / s1.dofs_per_s.0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn v100_scalar_spmv_bound() {
        let size = million();
        let est = spmv_traffic(OperatorKind::ScalarLaplace, &size);
        let v100 = HardwareSpec::new("V100", 900.0).unwrap();
        let sol = est.speed_of_light(&v100);
        let ms = sol.time_s.0 * 1e3;
        assert!((ms - 0.40).abs() / 0.40 < 0.03, "{ms}");
        let gdofs = sol.dofs_per_s.0 / 1e9;
        assert!((gdofs - 2.6).abs() / 2.6 < 0.03, "{gdofs}");
    }

    #[test]
    fn hardware_config_parsing() {
        let text = "# devices\nV100, 900\ncustom , 123.5 # trailing\n\n";
        let specs = HardwareSpec::parse_config(text).unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[0].name, "V100");
        assert_eq!(specs[1].name, "custom");
        assert!((specs[1].bandwidth - 123.5e9).abs() < 1.0);

        assert!(HardwareSpec::parse_config("garbage line").is_err());
        assert!(HardwareSpec::parse_config("name,-5").is_err());
        assert!(HardwareSpec::parse_config("# only comments\n").is_err());
    }

    #[test]
    fn model_rows_cover_all_combinations() {
        let size = ProblemSize::from_dims([2, 2, 2]);
        let hw = HardwareSpec::presets();
        let rows = model_rows(&OperatorKind::ALL, &size, &hw);
        assert_eq!(rows.len(), 3 * 3 * 3 * 2);
        assert!(rows.iter().all(|r| r.transfer_ms > 0.0 && r.gdofs > 0.0));
    }

    #[test]
    fn model_rows_are_finite_for_a_single_element() {
        let size = ProblemSize::from_cube_elements(1).unwrap();
        let rows = model_rows(&OperatorKind::ALL, &size, &HardwareSpec::presets());
        assert!(rows
            .iter()
            .all(|r| r.transfer_ms.is_finite() && r.transfer_ms > 0.0 && r.gdofs.is_finite()));
    }

    #[test]
    fn cross_strategy_bounds_ordering() {
        // At one million elements the partial-assembly totals exceed the
        // matrix-free best case, so the matrix-free worst-case throughput
        // bound dominates the partial-assembly best case for both kinds.
        let size = million();
        for kind in [OperatorKind::ScalarLaplace, OperatorKind::Elasticity] {
            let mf = matrix_free_traffic(kind, &size);
            let pa = partial_assembly_traffic(kind, &size);
            assert!(pa.total.best > mf.total.best, "{kind:?} totals");
            let hw = &HardwareSpec::presets()[0];
            let mf_sol = mf.speed_of_light(hw);
            let pa_sol = pa.speed_of_light(hw);
            assert!(
                mf_sol.dofs_per_s.1 >= pa_sol.dofs_per_s.0,
                "{kind:?}: matrix-free worst {} vs partial-assembly best {}",
                mf_sol.dofs_per_s.1,
                pa_sol.dofs_per_s.0
            );
        }
    }
}
