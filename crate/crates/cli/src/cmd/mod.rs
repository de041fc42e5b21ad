pub mod eval;
pub mod grid;
pub mod report;
pub mod solve;
pub mod synth;

use clap::Args;
use svp_core::{GridGenerator, GridSpec};

/// Overrides `seed` with `SVP_SEED` when that variable is set.
pub fn effective_seed(seed: u64) -> crate::error::CliResult<u64> {
    match std::env::var("SVP_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| crate::error::CliError::Usage(format!("SVP_SEED is not an integer: {v:?}"))),
        Err(_) => Ok(seed),
    }
}

#[derive(Args, Clone, Debug)]
pub struct GridArgs {
    /// Number of grid rotations.
    #[arg(long, default_value_t = 4608)]
    pub grid_n: u32,
    #[arg(long, default_value = "super-fibonacci")]
    pub generator: GridGenerator,
    /// Only used by the random-uniform generator.
    #[arg(long, default_value_t = 0)]
    pub grid_seed: u64,
}

impl GridArgs {
    pub fn spec(&self) -> GridSpec {
        GridSpec::new(self.grid_n, self.generator, self.grid_seed)
    }
}
