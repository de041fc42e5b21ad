//! Recovery and evaluation of sparse-view camera poses from pairwise
//! relative-rotation energies.
//!
//! Rotation conventions used throughout the crate:
//!
//! * [`CameraPose::rotation`] maps world to camera, `x_c = R x_w + t`.
//! * The solver works on camera *orientations* `O_i = R_iᵀ` (camera to world).
//!   Pairwise energies score `O_iᵀ O_j`, the gauge is `O_1 = I`, and a global
//!   rotation of the world frame acts on orientations from the left.

pub mod energy;
pub mod error;
pub mod eval;
pub mod frame;
pub mod so3;
pub mod solver;
pub mod synth;

pub use energy::{
    l1_translation_loss, nll_of, score_over_grid, EnergyTable, PairwiseScorer, SymmetricModeScorer,
    TabulatedScorer,
};
pub use error::{Error, Result};
pub use eval::{EvalReport, SimilarityTransform};
pub use frame::{CameraPose, SceneFrame};
pub use so3::{build_grid, geodesic_distance, nearest_in_grid, GridGenerator, GridSpec, Rotation, So3Grid};
pub use solver::{solve, CandidateSet, RotationHypothesis, SolverConfig};
pub use synth::{RigSpec, SyntheticScene};

pub use nalgebra::Vector3;
