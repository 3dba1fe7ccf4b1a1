//! The `model` subcommand: theoretical transfer/throughput tables as CSV.

use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::Result;
use clap::Args;
use hexfem::operators::OperatorKind;
use hexfem::perfmodel::{model_rows, traffic, ProblemSize, Strategy};

pub const ROWS_HEADER: &str =
    "elements,kind,strategy,scenario,hardware,total_bytes,transfer_ms,gdofs";
pub const DETAIL_HEADER: &str =
    "elements,kind,strategy,component,bytes_best,bytes_worst,in_total";

#[derive(Args)]
pub struct ModelArgs {
    /// Cubic element count to evaluate the model at.
    #[arg(long, default_value_t = 1_000_000)]
    elements: u64,
    /// Explicit mesh size nx,ny,nz (overrides --elements).
    #[arg(long, value_delimiter = ',', num_args = 3)]
    dims: Option<Vec<usize>>,
    /// Operator kinds to include (comma separated).
    #[arg(long, value_delimiter = ',', default_values_t = [
        "scalar_laplace".to_string(), "elasticity".to_string(),
    ])]
    kinds: Vec<String>,
    /// Hardware config file (name,GB/s per line) replacing the presets.
    #[arg(long)]
    hw_config: Option<PathBuf>,
    /// Emit per-component byte line items instead of bound rows.
    #[arg(long)]
    detail: bool,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: ModelArgs) -> Result<()> {
    let size = match &args.dims {
        Some(d) => ProblemSize::from_dims([d[0], d[1], d[2]]),
        None => ProblemSize::from_cube_elements(args.elements)?,
    };
    let kinds: Vec<OperatorKind> = args
        .kinds
        .iter()
        .map(|k| OperatorKind::from_str(k))
        .collect::<hexfem::Result<_>>()?;
    let hardware = crate::load_hardware(&args.hw_config)?;
    let mut out = crate::output_writer(&args.out)?;

    if args.detail {
        writeln!(out, "{DETAIL_HEADER}")?;
        for &kind in &kinds {
            for strategy in Strategy::ALL {
                let est = traffic(kind, strategy, &size);
                for item in &est.items {
                    writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        est.num_elements,
                        kind.name(),
                        strategy.name(),
                        item.component.name(),
                        item.bytes.best,
                        item.bytes.worst,
                        item.in_total,
                    )?;
                }
            }
        }
        return Ok(());
    }

    writeln!(out, "{ROWS_HEADER}")?;
    for row in model_rows(&kinds, &size, &hardware) {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.6},{:.4}",
            row.num_elements,
            row.kind.name(),
            row.strategy.name(),
            row.scenario,
            row.hardware,
            row.total_bytes,
            row.transfer_ms,
            row.gdofs,
        )?;
    }
    Ok(())
}
