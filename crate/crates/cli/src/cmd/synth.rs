use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use svp_core::energy::EnergyTable;
use svp_core::synth::{generate_scene, scene_to_scorer, PairSymmetry, ScorerSpec, SceneFile};
use svp_core::RigSpec;

use super::{effective_seed, GridArgs};
use crate::error::{CliError, CliResult};
use crate::io::{create_dir, write_atomic, write_json};
use crate::manifest::{SceneEntry, SceneManifest, MANIFEST};

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Cameras per scene.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub scenes: usize,
    /// Scene k uses seed + k.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub radius_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub radius_max: f64,
    /// Max optical-axis deviation from the look-at direction, radians.
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.0, 0.0, 0.0])]
    pub lookat: Vec<f64>,
    /// Scorer concentration (1/rad²).
    #[arg(long, default_value_t = 50.0)]
    pub kappa: f64,
    /// Max angle between a pair's mode and its true relative rotation, radians.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// `i,j,k` or `i,j,k,ax,ay,az`: k-fold symmetry of pair (i, j) about an
    /// axis (default z). Repeatable.
    #[arg(long, value_parser = parse_symmetry)]
    pub symmetry: Vec<PairSymmetry>,
    /// Also tabulate each scene's scorer over a grid.
    #[arg(long)]
    pub tables: bool,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(short, long)]
    pub output: PathBuf,
}

fn parse_symmetry(s: &str) -> Result<PairSymmetry, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 && parts.len() != 6 {
        return Err("expected i,j,k or i,j,k,ax,ay,az".into());
    }
    let index = |p: &str| p.parse::<usize>().map_err(|e| format!("{p:?}: {e}"));
    let axis = if parts.len() == 6 {
        let mut a = [0.0; 3];
        for (v, p) in a.iter_mut().zip(&parts[3..]) {
            *v = p.parse().map_err(|e| format!("{p:?}: {e}"))?;
        }
        a
    } else {
        [0.0, 0.0, 1.0]
    };
    Ok(PairSymmetry {
        pair: (index(parts[0])?, index(parts[1])?),
        k: index(parts[2])?,
        axis,
    })
}

pub fn run(args: &SynthArgs) -> CliResult<()> {
    let seed = effective_seed(args.seed)?;
    let scorer = ScorerSpec {
        kappa: args.kappa,
        noise_angle: args.noise,
        symmetries: args.symmetry.clone(),
    };
    for sym in &scorer.symmetries {
        if sym.pair.0 == sym.pair.1 || sym.pair.0.max(sym.pair.1) >= args.n {
            return Err(CliError::Usage(format!("bad symmetry pair {:?}", sym.pair)));
        }
    }
    create_dir(&args.output)?;
    let grid = if args.tables {
        Some(args.grid.spec().build().map_err(|e| CliError::core("grid", e))?)
    } else {
        None
    };

    let entries = (0..args.scenes)
        .into_par_iter()
        .map(|k| {
            let id = format!("scene_{k:04}");
            let spec = RigSpec {
                n_cameras: args.n,
                radius_min: args.radius_min,
                radius_max: args.radius_max,
                jitter: args.jitter,
                lookat: [args.lookat[0], args.lookat[1], args.lookat[2]],
                seed: seed.wrapping_add(k as u64),
            };
            let scene = generate_scene(&spec).map_err(|e| CliError::core(&id, e))?;
            let file = format!("{id}.json");
            write_json(&args.output.join(&file), &SceneFile::from_scene(&id, &scene))?;
            let table = match &grid {
                Some(grid) => {
                    let s = scene_to_scorer(&scene, &scorer).map_err(|e| CliError::core(&id, e))?;
                    let t = EnergyTable::from_scorer(&s, grid).map_err(|e| CliError::core(&id, e))?;
                    let name = format!("{id}.rpet");
                    let mut bytes = Vec::new();
                    t.save(&mut bytes).map_err(|e| CliError::core(&id, e))?;
                    write_atomic(&args.output.join(&name), &bytes)?;
                    Some(name)
                }
                None => None,
            };
            Ok(SceneEntry { id, file, table })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let manifest = SceneManifest {
        seed,
        scorer,
        table_grid: grid.map(|g| g.spec()),
        scenes: entries,
    };
    write_json(&args.output.join(MANIFEST), &manifest)
}
