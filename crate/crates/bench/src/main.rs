//! Benchmark harness for the hexfem operator engine.
//!
//! Three subcommands:
//! - `bench`  - operator-only and full-CG throughput sweeps with paired
//!   model bounds,
//! - `model`  - the theoretical transfer/throughput tables as CSV,
//! - `verify` - cross-strategy equivalence checks (nonzero exit on
//!   mismatch).

mod bench;
mod model;
mod verify;

use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use hexfem::perfmodel::HardwareSpec;

#[derive(Parser)]
#[command(name = "hexfem-bench", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time operator kernels and CG iterations over a problem-size sweep.
    Bench(bench::BenchArgs),
    /// Emit the theoretical memory/throughput model as CSV.
    Model(model::ModelArgs),
    /// Check that matrix-free, partial-assembly, and SpMV agree.
    Verify(verify::VerifyArgs),
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Bench(args) => bench::run(args),
        Command::Model(args) => model::run(args),
        Command::Verify(args) => verify::run(args),
    }
}

/// Opens `--out` or falls back to stdout.
fn output_writer(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        ),
        None => Box::new(std::io::stdout().lock()),
    })
}

/// Loads hardware specs from a config file, or the built-in presets.
fn load_hardware(config: &Option<PathBuf>) -> Result<Vec<HardwareSpec>> {
    match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            Ok(HardwareSpec::parse_config(&text)?)
        }
        None => Ok(HardwareSpec::presets()),
    }
}

fn find_hardware(specs: &[HardwareSpec], name: &str) -> Result<HardwareSpec> {
    specs
        .iter()
        .find(|s| s.name.eq_ignore_ascii_case(name))
        .cloned()
        .with_context(|| {
            format!(
                "hardware '{name}' not found; available: {}",
                specs.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join(", ")
            )
        })
}

/// Turns an element-count sweep entry into cubic mesh dims.
fn cube_dims(elements: u64) -> Result<[usize; 3]> {
    let size = hexfem::perfmodel::ProblemSize::from_cube_elements(elements)?;
    Ok([size.dims[0] as usize, size.dims[1] as usize, size.dims[2] as usize])
}

fn install_worker_pool(workers: usize) -> Result<()> {
    anyhow::ensure!(workers >= 1, "workers must be >= 1");
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .context("installing worker pool")?;
    Ok(())
}
