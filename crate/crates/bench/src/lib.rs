//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use svp_core::energy::SymmetricModeScorer;
use svp_core::synth::{generate_scene, scene_to_scorer, ScorerSpec};
use svp_core::{RigSpec, SyntheticScene, Vector3};

/// A ring of `n` cameras with a noise-free unimodal scorer.
pub fn scene(n: usize, seed: u64) -> (SyntheticScene, SymmetricModeScorer) {
    let scene = generate_scene(&RigSpec {
        n_cameras: n,
        radius_min: 0.7,
        radius_max: 1.3,
        jitter: 0.1,
        lookat: [0.0; 3],
        seed,
    })
    .expect("valid rig");
    let scorer = scene_to_scorer(&scene, &ScorerSpec::unimodal(50.0)).expect("valid scorer");
    (scene, scorer)
}

pub fn points(n: usize, seed: u64) -> Vec<Vector3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0))).collect()
}
