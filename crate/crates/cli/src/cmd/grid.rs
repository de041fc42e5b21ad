use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use svp_core::so3::write_grid;

use super::{effective_seed, GridArgs};
use crate::error::{CliError, CliResult};
use crate::io::write_atomic;

#[derive(Args, Debug)]
pub struct GridCmdArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    /// Binary grid file to write; omit to only print the summary.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn run(args: &GridCmdArgs) -> CliResult<()> {
    let mut spec = args.grid.spec();
    spec.seed = effective_seed(spec.seed)?;
    let grid = spec.build().map_err(|e| CliError::core("grid", e))?;
    if let Some(path) = &args.output {
        let mut bytes = Vec::new();
        write_grid(&mut bytes, &grid).map_err(|e| CliError::core("grid", e))?;
        write_atomic(path, &bytes)?;
    }
    let info = json!({
        "n": spec.n,
        "generator": spec.generator,
        "seed": spec.seed,
        "covering_radius": grid.covering_radius(),
    });
    println!("{info}");
    Ok(())
}
