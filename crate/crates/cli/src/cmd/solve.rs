use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use svp_core::energy::{EnergyTable, TabulatedScorer};
use svp_core::frame::PoseRecord;
use svp_core::synth::{scene_to_scorer, SceneFile};
use svp_core::{solve, CameraPose, CandidateSet, GridSpec, RotationHypothesis, So3Grid, SolverConfig, Vector3};

use super::effective_seed;
use crate::error::{CliError, CliResult};
use crate::io::{create_dir, read_bytes, read_json, write_json};
use crate::manifest::{
    id_mismatch, load_manifest, Prediction, PredictionEntry, PredictionManifest, SceneEntry,
    SceneManifest, MANIFEST,
};

/// Where predicted translations come from.
#[derive(Clone, Debug, PartialEq)]
pub enum TranslationSource {
    GroundTruth,
    /// Every camera at `[0, 0, 1]`: center-facing at unit distance.
    ConstantZ,
    /// JSON object mapping scene id to one `[x, y, z]` per camera.
    File(PathBuf),
}

impl FromStr for TranslationSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gt" => Ok(Self::GroundTruth),
            "constant-z" => Ok(Self::ConstantZ),
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => Ok(Self::File(PathBuf::from(p))),
                _ => Err(format!("expected gt, constant-z or file:PATH, got {s:?}")),
            },
        }
    }
}

impl std::fmt::Display for TranslationSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::GroundTruth => f.write_str("gt"),
            Self::ConstantZ => f.write_str("constant-z"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Candidates {
    Grid,
    Composed,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Directory written by `svp synth`.
    #[arg(long)]
    pub scenes: PathBuf,
    /// Score with the tabulated energies instead of the synthetic scorer.
    #[arg(long)]
    pub use_tables: bool,
    /// Solver configuration JSON; missing fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub grid_n: Option<u32>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    /// Candidate rotations per camera: grid or composed.
    #[arg(long, value_enum)]
    pub candidates: Option<Candidates>,
    /// Per-camera candidates in joint pair moves; 0 turns them off.
    #[arg(long)]
    pub pair_candidates: Option<usize>,
    /// gt, constant-z or file:PATH.
    #[arg(long, default_value = "gt")]
    pub translation: TranslationSource,
    #[arg(short, long)]
    pub output: PathBuf,
}

fn solver_config(args: &SolveArgs) -> CliResult<SolverConfig> {
    let mut config: SolverConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => SolverConfig::default(),
    };
    if let Some(n) = args.grid_n {
        config.grid_n = n;
    }
    if let Some(m) = args.max_sweeps {
        config.max_sweeps = m;
    }
    if let Some(c) = args.candidates {
        config.candidates = match c {
            Candidates::Grid => CandidateSet::Grid,
            Candidates::Composed => CandidateSet::Composed,
        };
    }
    if let Some(k) = args.pair_candidates {
        config.pair_candidates = k;
    }
    config.seed = effective_seed(config.seed)?;
    Ok(config)
}

fn load_table(dir: &Path, entry: &SceneEntry) -> CliResult<EnergyTable> {
    let name = entry.table.as_ref().ok_or_else(|| {
        CliError::Usage(format!("scene {} has no energy table; run synth with --tables", entry.id))
    })?;
    let path = dir.join(name);
    let bytes = read_bytes(&path)?;
    EnergyTable::load(bytes.as_slice()).map_err(|e| CliError::core(path.display().to_string(), e))
}

fn predicted_translations(
    source: &TranslationSource,
    gt: &[CameraPose],
    external: Option<&[[f64; 3]]>,
) -> Vec<Vector3<f64>> {
    match source {
        TranslationSource::GroundTruth => gt.iter().map(|p| p.translation).collect(),
        TranslationSource::ConstantZ => vec![Vector3::z(); gt.len()],
        TranslationSource::File(_) => external
            .expect("external translations are loaded before solving")
            .iter()
            .map(|t| Vector3::from(*t))
            .collect(),
    }
}

fn to_prediction(
    id: &str,
    hyp: &RotationHypothesis,
    translations: &[Vector3<f64>],
) -> Prediction {
    let poses = hyp
        .rotations
        .iter()
        .zip(translations)
        .map(|(o, t)| PoseRecord::from(&CameraPose::from_orientation(*o, *t)))
        .collect();
    Prediction {
        id: id.to_string(),
        poses,
        energy: hyp.total_energy,
        sweeps_used: hyp.sweeps_used,
    }
}

pub fn run(args: &SolveArgs) -> CliResult<()> {
    let config = solver_config(args)?;
    let manifest: SceneManifest = load_manifest(&args.scenes)?;

    let scenes: Vec<SceneFile> = manifest
        .scenes
        .iter()
        .map(|e| read_json::<SceneFile>(&args.scenes.join(&e.file)))
        .collect::<CliResult<_>>()?;
    for (entry, scene) in manifest.scenes.iter().zip(&scenes) {
        if entry.id != scene.id {
            return Err(CliError::Mismatch {
                missing: vec![entry.id.clone()],
                unexpected: vec![scene.id.clone()],
            });
        }
    }

    let external: Option<BTreeMap<String, Vec<[f64; 3]>>> = match &args.translation {
        TranslationSource::File(path) => {
            let map: BTreeMap<String, Vec<[f64; 3]>> = read_json(path)?;
            if let Some(err) = id_mismatch(
                manifest.scenes.iter().map(|e| e.id.as_str()),
                map.keys().map(String::as_str),
            ) {
                return Err(err);
            }
            for scene in &scenes {
                if map[&scene.id].len() != scene.poses.len() {
                    return Err(CliError::format(
                        path,
                        format!(
                            "scene {} has {} cameras but {} translations",
                            scene.id,
                            scene.poses.len(),
                            map[&scene.id].len()
                        ),
                    ));
                }
            }
            Some(map)
        }
        _ => None,
    };

    let tables: Vec<Option<EnergyTable>> = if args.use_tables {
        manifest
            .scenes
            .iter()
            .map(|e| load_table(&args.scenes, e).map(Some))
            .collect::<CliResult<_>>()?
    } else {
        vec![None; scenes.len()]
    };

    // One grid per distinct spec.
    let mut specs: Vec<GridSpec> = tables
        .iter()
        .map(|t| t.as_ref().map_or(config.grid_spec(), EnergyTable::grid_spec))
        .collect();
    let mut grids: HashMap<GridSpec, So3Grid> = HashMap::new();
    for spec in &specs {
        if !grids.contains_key(spec) {
            let grid = spec.build().map_err(|e| CliError::core("grid", e))?;
            grids.insert(*spec, grid);
        }
    }

    create_dir(&args.output)?;
    let work: Vec<_> = scenes.iter().zip(tables).zip(specs.drain(..)).collect();
    let entries = work
        .into_par_iter()
        .map(|((file, table), spec)| {
            let id = file.id.as_str();
            let ctx = |e| CliError::core(id, e);
            let scene = file.to_scene().map_err(ctx)?;
            let grid = &grids[&spec];
            let n = scene.poses.len();
            let hyp = match table {
                Some(table) => {
                    let scorer = TabulatedScorer::new(table, grid.clone()).map_err(ctx)?;
                    solve(&scorer, n, grid, &config).map_err(ctx)?
                }
                None => {
                    let scorer = scene_to_scorer(&scene, &manifest.scorer).map_err(ctx)?;
                    solve(&scorer, n, grid, &config).map_err(ctx)?
                }
            };
            let ext = external.as_ref().map(|m| m[id].as_slice());
            let translations = predicted_translations(&args.translation, &scene.poses, ext);
            let file_name = format!("{id}.json");
            write_json(&args.output.join(&file_name), &to_prediction(id, &hyp, &translations))?;
            Ok(PredictionEntry {
                id: id.to_string(),
                file: file_name,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let out = PredictionManifest {
        solver: config,
        scorer: if args.use_tables { "table" } else { "synthetic" }.to_string(),
        translation: args.translation.to_string(),
        predictions: entries,
    };
    write_json(&args.output.join(MANIFEST), &out)
}
