use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use svp_core::eval::{
    center_errors, mean_csv_values, relative_rotation_errors, CENTER_AUC_MAX, ROTATION_AUC_MAX_DEG,
};
use svp_core::frame::PoseRecord;
use svp_core::synth::SceneFile;
use svp_core::{CameraPose, EvalReport, Rotation};

use crate::error::{CliError, CliResult};
use crate::io::{create_dir, read_json, write_csv, write_json};
use crate::manifest::{id_mismatch, load_manifest, Prediction, PredictionManifest, SceneManifest};

/// Points per curve in the threshold sweep table.
const SWEEP_STEPS: usize = 60;

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory written by `svp solve`.
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory written by `svp synth`.
    #[arg(long)]
    pub gt: PathBuf,
    /// Also write accuracy-vs-threshold curves to sweep.csv.
    #[arg(long)]
    pub sweep: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Serialize)]
struct SceneReport {
    id: String,
    #[serde(flatten)]
    report: EvalReport,
}

#[derive(Serialize)]
struct Aggregate {
    scenes: usize,
    /// Mean over scenes, keyed by CSV column.
    mean: BTreeMap<String, f64>,
}

struct Evaluated {
    report: EvalReport,
    rot_err_deg: Vec<f64>,
    center_err: Vec<f64>,
}

fn poses(records: &[PoseRecord]) -> svp_core::Result<Vec<CameraPose>> {
    records.iter().map(CameraPose::try_from).collect()
}

fn evaluate(pred: &Prediction, gt: &SceneFile) -> CliResult<Evaluated> {
    let ctx = |e| CliError::core(gt.id.as_str(), e);
    let p = poses(&pred.poses).map_err(ctx)?;
    let g = poses(&gt.poses).map_err(ctx)?;
    if p.len() != g.len() {
        return Err(CliError::Mismatch {
            missing: vec![format!("{}: {} cameras", gt.id, g.len())],
            unexpected: vec![format!("{}: {} cameras", pred.id, p.len())],
        });
    }
    let report = EvalReport::evaluate(&p, &g, gt.sigma).map_err(ctx)?;
    let po: Vec<Rotation> = p.iter().map(CameraPose::orientation).collect();
    let go: Vec<Rotation> = g.iter().map(CameraPose::orientation).collect();
    let rot_err_deg = relative_rotation_errors(&po, &go)
        .map_err(ctx)?
        .into_iter()
        .map(f64::to_degrees)
        .collect();
    let center_err = center_errors(&p, &g)
        .map_err(ctx)?
        .into_iter()
        .map(|e| e / gt.sigma)
        .collect();
    Ok(Evaluated {
        report,
        rot_err_deg,
        center_err,
    })
}

fn fmt(v: f64) -> String {
    v.to_string()
}

fn mean_fraction_below<'a>(errors: impl Iterator<Item = &'a [f64]>, threshold: f64) -> f64 {
    let fractions: Vec<f64> = errors
        .map(|e| e.iter().filter(|&&x| x < threshold).count() as f64 / e.len() as f64)
        .collect();
    fractions.iter().sum::<f64>() / fractions.len() as f64
}

fn sweep_rows(evaluated: &[Evaluated]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for k in 1..=SWEEP_STEPS {
        let t = ROTATION_AUC_MAX_DEG * k as f64 / SWEEP_STEPS as f64;
        let acc = mean_fraction_below(evaluated.iter().map(|e| e.rot_err_deg.as_slice()), t);
        rows.push(vec!["rotation_deg".to_string(), fmt(t), fmt(acc)]);
    }
    for k in 1..=SWEEP_STEPS {
        let t = CENTER_AUC_MAX * k as f64 / SWEEP_STEPS as f64;
        let acc = mean_fraction_below(evaluated.iter().map(|e| e.center_err.as_slice()), t);
        rows.push(vec!["center".to_string(), fmt(t), fmt(acc)]);
    }
    rows
}

pub fn run(args: &EvalArgs) -> CliResult<()> {
    let gt: SceneManifest = load_manifest(&args.gt)?;
    let pred: PredictionManifest = load_manifest(&args.pred)?;
    if let Some(err) = id_mismatch(
        gt.scenes.iter().map(|e| e.id.as_str()),
        pred.predictions.iter().map(|e| e.id.as_str()),
    ) {
        return Err(err);
    }
    let pred_files: BTreeMap<&str, &str> = pred
        .predictions
        .iter()
        .map(|e| (e.id.as_str(), e.file.as_str()))
        .collect();

    let evaluated = gt
        .scenes
        .par_iter()
        .map(|entry| {
            let scene: SceneFile = read_json(&args.gt.join(&entry.file))?;
            let p: Prediction = read_json(&args.pred.join(pred_files[entry.id.as_str()]))?;
            if p.id != entry.id || scene.id != entry.id {
                return Err(CliError::Mismatch {
                    missing: vec![entry.id.clone()],
                    unexpected: vec![p.id, scene.id],
                });
            }
            evaluate(&p, &scene)
        })
        .collect::<CliResult<Vec<_>>>()?;

    create_dir(&args.output)?;
    let columns = EvalReport::csv_columns();
    let reports: Vec<SceneReport> = gt
        .scenes
        .iter()
        .zip(&evaluated)
        .map(|(e, ev)| SceneReport {
            id: e.id.clone(),
            report: ev.report.clone(),
        })
        .collect();
    write_json(&args.output.join("reports.json"), &reports)?;

    let mut header = vec!["id".to_string()];
    header.extend(columns.iter().cloned());
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![r.id.clone()];
            row.extend(r.report.csv_values().into_iter().map(fmt));
            row
        })
        .collect();
    write_csv(&args.output.join("per_scene.csv"), &header, &rows)?;

    let plain: Vec<EvalReport> = evaluated.iter().map(|e| e.report.clone()).collect();
    let mean = mean_csv_values(&plain);
    let aggregate = Aggregate {
        scenes: plain.len(),
        mean: columns.iter().cloned().zip(mean.iter().copied()).collect(),
    };
    write_json(&args.output.join("aggregate.json"), &aggregate)?;
    let mut agg_header = vec!["scenes".to_string()];
    agg_header.extend(columns);
    let mut agg_row = vec![plain.len().to_string()];
    agg_row.extend(mean.into_iter().map(fmt));
    write_csv(&args.output.join("aggregate.csv"), &agg_header, &[agg_row])?;

    if args.sweep && !evaluated.is_empty() {
        let header = ["metric", "threshold", "accuracy"].map(String::from);
        write_csv(&args.output.join("sweep.csv"), &header, &sweep_rows(&evaluated))?;
    }
    Ok(())
}
