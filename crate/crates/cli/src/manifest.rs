//! JSON documents exchanged between subcommands.

use std::path::Path;

use serde::{Deserialize, Serialize};
use svp_core::frame::PoseRecord;
use svp_core::synth::ScorerSpec;
use svp_core::{GridSpec, SolverConfig};

use crate::error::{CliError, CliResult};
use crate::io::read_json;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SceneEntry {
    pub id: String,
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
}

/// Written by `synth`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SceneManifest {
    pub seed: u64,
    pub scorer: ScorerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_grid: Option<GridSpec>,
    pub scenes: Vec<SceneEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    /// World-to-camera poses; the first camera's rotation is the identity.
    pub poses: Vec<PoseRecord>,
    pub energy: f64,
    pub sweeps_used: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PredictionEntry {
    pub id: String,
    pub file: String,
}

/// Written by `solve`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PredictionManifest {
    pub solver: SolverConfig,
    pub scorer: String,
    pub translation: String,
    pub predictions: Vec<PredictionEntry>,
}

pub fn load_manifest<T: serde::de::DeserializeOwned>(dir: &Path) -> CliResult<T> {
    let path = dir.join(MANIFEST);
    if !path.is_file() {
        return Err(CliError::io(
            &path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "manifest not found"),
        ));
    }
    read_json(&path)
}

/// Ids of `expected` absent from `actual`, and ids of `actual` absent from `expected`.
pub fn id_mismatch<'a>(
    expected: impl IntoIterator<Item = &'a str>,
    actual: impl IntoIterator<Item = &'a str>,
) -> Option<CliError> {
    use std::collections::BTreeSet;
    let expected: BTreeSet<&str> = expected.into_iter().collect();
    let actual: BTreeSet<&str> = actual.into_iter().collect();
    let missing: Vec<String> = expected.difference(&actual).map(|s| s.to_string()).collect();
    let unexpected: Vec<String> = actual.difference(&expected).map(|s| s.to_string()).collect();
    if missing.is_empty() && unexpected.is_empty() {
        None
    } else {
        Some(CliError::Mismatch { missing, unexpected })
    }
}
