//! The `verify` subcommand: cross-strategy equivalence checks.
//!
//! For every sweep point and operator kind, the matrix-free and
//! partial-assembly applications are compared against the assembled SpMV
//! reference on seeded random inputs. Any relative difference above the
//! tolerance fails the run (nonzero exit).

use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::Args;
use hexfem::assembly::assemble;
use hexfem::linalg::spmv;
use hexfem::mesh::build_box_mesh;
use hexfem::operators::{
    apply_partial_assembly, setup_partial_assembly, IsotropicElasticity, LinearOperator,
    MatrixFreeOperator, OperatorKind, ScatterMode,
};
use hexfem::reference_element::build_reference_element;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::{random_field, rel_diff};

pub const CSV_HEADER: &str =
    "elements,kind,inputs,max_rel_mf_vs_spmv,max_rel_pa_vs_spmv,max_rel_pa_vs_mf,status";

#[derive(Args)]
pub struct VerifyArgs {
    /// Element-count sweep (perfect cubes, comma separated).
    #[arg(long, value_delimiter = ',', default_values_t = [64u64, 512, 1728])]
    sweep: Vec<u64>,
    /// Operator kinds to check (comma separated).
    #[arg(long, value_delimiter = ',', default_values_t = [
        "scalar_laplace".to_string(), "vector_laplace".to_string(), "elasticity".to_string(),
    ])]
    kinds: Vec<String>,
    /// Random inputs per point.
    #[arg(long, default_value_t = 3)]
    inputs: usize,
    /// Relative agreement tolerance.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 12345)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: VerifyArgs) -> Result<()> {
    crate::install_worker_pool(args.workers)?;
    let kinds: Vec<OperatorKind> = args
        .kinds
        .iter()
        .map(|k| OperatorKind::from_str(k))
        .collect::<hexfem::Result<_>>()?;
    let mut out = crate::output_writer(&args.out)?;
    writeln!(out, "{CSV_HEADER}")?;

    let re = build_reference_element();
    let material = IsotropicElasticity::new(1.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut failed = false;

    for &elements in &args.sweep {
        let dims = crate::cube_dims(elements)?;
        let mesh = build_box_mesh(dims, [1.0, 1.0, 1.0])
            .with_context(|| format!("sweep point {elements} elements"))?;
        for &kind in &kinds {
            let mat = (kind == OperatorKind::Elasticity).then_some(material);
            let matrix = assemble(kind, &mesh, &re, mat, None)
                .with_context(|| format!("assembling {} at {elements} elements", kind.name()))?;
            let pa = setup_partial_assembly(&mesh, &re, kind, mat)?;
            let mf = MatrixFreeOperator::new(&mesh, &re, kind, mat, ScatterMode::Deterministic)?;

            let mut max_mf = 0.0f64;
            let mut max_pa = 0.0f64;
            let mut max_pa_mf = 0.0f64;
            for _ in 0..args.inputs {
                let u = random_field(mesh.num_nodes, kind.components(), &mut rng);
                let via_spmv = spmv(&matrix, &u)?;
                let via_mf = mf.apply(&u)?;
                let via_pa = apply_partial_assembly(&pa, &mesh, &re, &u)?;
                max_mf = max_mf.max(rel_diff(&via_mf.values, &via_spmv.values));
                max_pa = max_pa.max(rel_diff(&via_pa.values, &via_spmv.values));
                max_pa_mf = max_pa_mf.max(rel_diff(&via_pa.values, &via_mf.values));
            }

            let ok = max_mf <= args.tol && max_pa <= args.tol && max_pa_mf <= args.tol;
            failed |= !ok;
            writeln!(
                out,
                "{},{},{},{:.3e},{:.3e},{:.3e},{}",
                elements,
                kind.name(),
                args.inputs,
                max_mf,
                max_pa,
                max_pa_mf,
                if ok { "ok" } else { "mismatch" },
            )?;
        }
    }

    if failed {
        bail!("verification failed: strategies disagree beyond {:.1e}", args.tol);
    }
    Ok(())
}
