//! The `bench` subcommand: timed operator and CG throughput sweeps.
//!
//! For every sweep point the harness builds the mesh and the selected
//! operator strategy, optionally cross-checks the strategy against the
//! assembled SpMV reference, then times (a) a loop of bare operator
//! applications and (b) fixed-iteration CG runs. Each measurement is the
//! median of five timed runs after two discarded warmups, on a monotonic
//! clock. Every row carries the paired speed-of-light bounds.

use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use hexfem::assembly::assemble;
use hexfem::cg::cg_benchmark;
use hexfem::linalg::{FieldVector, ReductionStrategy};
use hexfem::mesh::{build_box_mesh, Mesh};
use hexfem::operators::partial_assembly::PartialAssemblyOperator;
use hexfem::operators::{
    setup_partial_assembly, ConstrainedOperator, CsrOperator, IsotropicElasticity,
    LinearOperator, MatrixFreeOperator, OperatorKind, ScatterMode,
};
use hexfem::perfmodel::{traffic, HardwareSpec, ProblemSize, Strategy};
use hexfem::reference_element::{build_reference_element, ReferenceElement};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const WARMUP_RUNS: usize = 2;
const TIMED_RUNS: usize = 5;

pub const CSV_HEADER: &str = "kind,strategy,reduction,workers,seed,elements,ndof,iterations,\
op_seconds,op_gdofs,cg_seconds,cg_gdofs,hardware,model_best_gdofs,model_worst_gdofs,\
op_frac_best,op_frac_worst,cg_frac_best,cg_frac_worst";

#[derive(Args)]
pub struct BenchArgs {
    /// Operator kind: scalar_laplace | vector_laplace | elasticity.
    #[arg(long, default_value = "scalar_laplace")]
    kind: String,
    /// Strategy: matrix_free | partial_assembly | spmv.
    #[arg(long, default_value = "matrix_free")]
    strategy: String,
    /// Element-count sweep (perfect cubes, comma separated).
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<u64>>,
    /// Single explicit mesh size nx,ny,nz (overrides --sweep).
    #[arg(long, value_delimiter = ',', num_args = 3)]
    dims: Option<Vec<usize>>,
    /// Fixed CG iteration count per timed run.
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    /// Dot reduction: sequential | pairwise | blocked | compensated.
    #[arg(long, default_value = "blocked")]
    reduction: String,
    /// First Lame parameter (elasticity).
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Shear modulus (elasticity).
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Worker threads for the parallel kernels.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Hardware preset name for the model columns.
    #[arg(long, default_value = "V100")]
    hardware: String,
    /// Hardware config file (name,GB/s per line) replacing the presets.
    #[arg(long)]
    hw_config: Option<PathBuf>,
    /// Seed for the benchmark input vectors.
    #[arg(long, default_value_t = 12345)]
    seed: u64,
    /// Scatter mode: deterministic | atomic.
    #[arg(long, default_value = "deterministic")]
    scatter: String,
    /// Check the strategy against assembled SpMV before timing each point.
    #[arg(long)]
    verify: bool,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Validated benchmark configuration.
pub struct BenchConfig {
    pub kind: OperatorKind,
    pub strategy: Strategy,
    pub sweep: Vec<[usize; 3]>,
    pub iterations: usize,
    pub reduction: ReductionStrategy,
    pub material: IsotropicElasticity,
    pub workers: usize,
    pub hardware: HardwareSpec,
    pub seed: u64,
    pub scatter: ScatterMode,
    pub verify: bool,
}

impl BenchConfig {
    fn from_args(args: &BenchArgs) -> Result<Self> {
        let sweep: Vec<[usize; 3]> = match (&args.dims, &args.sweep) {
            (Some(dims), _) => vec![[dims[0], dims[1], dims[2]]],
            (None, Some(elements)) => elements
                .iter()
                .map(|&e| crate::cube_dims(e))
                .collect::<Result<_>>()?,
            (None, None) => [10usize, 20, 40, 80, 100].iter().map(|&s| [s, s, s]).collect(),
        };
        if sweep.is_empty() {
            bail!("sweep must contain at least one point");
        }
        if args.iterations == 0 {
            bail!("iterations must be >= 1");
        }
        let scatter = match args.scatter.as_str() {
            "deterministic" => ScatterMode::Deterministic,
            "atomic" => ScatterMode::Atomic,
            other => bail!("unknown scatter mode '{other}' (expected deterministic|atomic)"),
        };
        let hardware = crate::find_hardware(&crate::load_hardware(&args.hw_config)?, &args.hardware)?;
        Ok(Self {
            kind: OperatorKind::from_str(&args.kind)?,
            strategy: Strategy::from_str(&args.strategy)?,
            sweep,
            iterations: args.iterations,
            reduction: ReductionStrategy::from_str(&args.reduction)?,
            material: IsotropicElasticity::new(args.lambda, args.mu)?,
            workers: args.workers,
            hardware,
            seed: args.seed,
            scatter,
            verify: args.verify,
        })
    }
}

pub fn run(args: BenchArgs) -> Result<()> {
    let cfg = BenchConfig::from_args(&args)?;
    crate::install_worker_pool(cfg.workers)?;
    let mut out = crate::output_writer(&args.out)?;
    run_benchmark(&cfg, &mut out)
}

/// Runs the whole sweep, writing one CSV row per point.
pub fn run_benchmark(cfg: &BenchConfig, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    let re = build_reference_element();
    for &dims in &cfg.sweep {
        let row = run_point(cfg, &re, dims)
            .with_context(|| format!("sweep point dims {dims:?} failed"))?;
        writeln!(out, "{row}")?;
    }
    Ok(())
}

fn run_point(cfg: &BenchConfig, re: &ReferenceElement, dims: [usize; 3]) -> Result<String> {
    let mesh = build_box_mesh(dims, [1.0, 1.0, 1.0])?;
    let material = (cfg.kind == OperatorKind::Elasticity).then_some(cfg.material);

    if cfg.verify {
        verify_point(cfg, re, &mesh)?;
    }

    match cfg.strategy {
        Strategy::MatrixFree => {
            let op = MatrixFreeOperator::new(&mesh, re, cfg.kind, material, cfg.scatter)?;
            measure(cfg, &mesh, dims, op)
        }
        Strategy::PartialAssembly => {
            let data = setup_partial_assembly(&mesh, re, cfg.kind, material)?;
            let op = PartialAssemblyOperator {
                data: &data,
                mesh: &mesh,
                reference: re,
                scatter: cfg.scatter,
            };
            measure(cfg, &mesh, dims, op)
        }
        Strategy::Spmv => {
            let matrix = assemble(cfg.kind, &mesh, re, material, None)?;
            let op = CsrOperator {
                matrix: &matrix,
                components: cfg.kind.components(),
            };
            measure(cfg, &mesh, dims, op)
        }
    }
}

/// Matrix-free vs assembled-SpMV agreement gate run before timing.
fn verify_point(cfg: &BenchConfig, re: &ReferenceElement, mesh: &Mesh) -> Result<()> {
    let material = (cfg.kind == OperatorKind::Elasticity).then_some(cfg.material);
    let matrix = assemble(cfg.kind, mesh, re, material, None)?;
    let mf = MatrixFreeOperator::new(mesh, re, cfg.kind, material, cfg.scatter)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u = random_field(mesh.num_nodes, cfg.kind.components(), &mut rng);
    let via_mf = mf.apply(&u)?;
    let via_spmv = hexfem::linalg::spmv(&matrix, &u)?;
    let diff = rel_diff(&via_mf.values, &via_spmv.values);
    if diff > 1e-12 {
        bail!(
            "verification failed: matrix-free vs SpMV relative difference {diff:.3e} \
             exceeds 1e-12"
        );
    }
    Ok(())
}

fn measure<Op: LinearOperator>(
    cfg: &BenchConfig,
    mesh: &Mesh,
    dims: [usize; 3],
    op: Op,
) -> Result<String> {
    let constrained = ConstrainedOperator::from_boundary_nodes(op, &mesh.boundary_nodes);
    let ndof = constrained.num_dofs();

    // Consistent right-hand side: the operator applied to a random field.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let u = random_field(mesh.num_nodes, cfg.kind.components(), &mut rng);
    let b = constrained.apply(&u)?;

    // Operator-only timing.
    let mut op_times = Vec::with_capacity(TIMED_RUNS);
    for run in 0..WARMUP_RUNS + TIMED_RUNS {
        let seconds = time_operator(&constrained, &u, cfg.iterations)?;
        if run >= WARMUP_RUNS {
            op_times.push(seconds);
        }
    }
    let op_seconds = median(&mut op_times);

    // Full CG iteration timing (fixed iteration count, no convergence test).
    let mut cg_times = Vec::with_capacity(TIMED_RUNS);
    for run in 0..WARMUP_RUNS + TIMED_RUNS {
        let start = Instant::now();
        let (x, _) = cg_benchmark(&constrained, &b, cfg.iterations, cfg.reduction)?;
        let elapsed = start.elapsed().as_secs_f64();
        std::hint::black_box(x.values[0]);
        if run >= WARMUP_RUNS {
            cg_times.push(elapsed);
        }
    }
    let cg_seconds = median(&mut cg_times);

    let op_gdofs = gdofs(ndof, cfg.iterations, op_seconds);
    let cg_gdofs = gdofs(ndof, cfg.iterations, cg_seconds);

    let size = ProblemSize::from_dims(dims);
    let sol = traffic(cfg.kind, cfg.strategy, &size).speed_of_light(&cfg.hardware);
    let (model_best, model_worst) = (sol.dofs_per_s.0 / 1e9, sol.dofs_per_s.1 / 1e9);

    Ok(format!(
        "{},{},{},{},{},{},{},{},{:.6e},{:.4},{:.6e},{:.4},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
        cfg.kind.name(),
        cfg.strategy.name(),
        cfg.reduction.name(),
        cfg.workers,
        cfg.seed,
        size.num_elements(),
        ndof,
        cfg.iterations,
        op_seconds,
        op_gdofs,
        cg_seconds,
        cg_gdofs,
        cfg.hardware.name,
        model_best,
        model_worst,
        op_gdofs / model_best,
        op_gdofs / model_worst,
        cg_gdofs / model_best,
        cg_gdofs / model_worst,
    ))
}

/// Times `iterations` applications of the operator to a fixed input.
pub fn time_operator<Op: LinearOperator>(
    op: &Op,
    u: &FieldVector,
    iterations: usize,
) -> Result<f64> {
    let start = Instant::now();
    let mut checksum = 0.0;
    for _ in 0..iterations {
        let v = op.apply(u)?;
        checksum += v.values[0];
    }
    let elapsed = start.elapsed().as_secs_f64();
    std::hint::black_box(checksum);
    Ok(elapsed)
}

/// Throughput in GDof/s: `ndof * iterations / seconds / 1e9`.
pub fn gdofs(ndof: usize, iterations: usize, seconds: f64) -> f64 {
    ndof as f64 * iterations as f64 / seconds / 1e9
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

pub fn random_field(num_nodes: usize, components: usize, rng: &mut ChaCha8Rng) -> FieldVector {
    let dist = Uniform::new_inclusive(-1.0, 1.0);
    let values = (0..num_nodes * components).map(|_| dist.sample(rng)).collect();
    FieldVector::from_values(num_nodes, components, values).expect("sized by construction")
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = a
        .iter()
        .chain(b)
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max)
        / scale
}
