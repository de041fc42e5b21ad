//! Global orientations maximizing the sum of pairwise scores:
//! maximum-spanning-tree initialization followed by block coordinate ascent
//! over a rotation grid.
//!
//! [`solve`] extends the plain ascent in two ways. Each sweep visits the free
//! cameras in order of their best available gain rather than by index, and
//! once single-camera moves stall it tries joint moves of camera pairs drawn
//! from each camera's top candidates, which escapes most of the compromise
//! optima that a coarse grid produces.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{score_over_grid, PairwiseScorer};
use crate::error::{Error, Result};
use crate::so3::{nearest_in_grid, GridGenerator, GridSpec, Rotation, So3Grid};

/// Rotations a free camera may move to during ascent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateSet {
    /// The grid itself: every free camera stays on the grid.
    #[default]
    Grid,
    /// The grid re-centered on every other camera, `O_j · g`. Larger and
    /// finer-grained in relative terms, but no longer confined to the grid.
    Composed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub grid_n: u32,
    pub generator: GridGenerator,
    pub seed: u64,
    pub max_sweeps: usize,
    /// Consecutive unchanged sweeps before stopping.
    pub patience: usize,
    /// Per-camera candidates tried in joint pair moves; 0 disables them.
    pub pair_candidates: usize,
    pub candidates: CandidateSet,
    /// Overrides [`PairwiseScorer::is_directional`] when set.
    pub directional: Option<bool>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid_n: 4608,
            generator: GridGenerator::SuperFibonacci,
            seed: 0,
            max_sweeps: 50,
            patience: 1,
            pair_candidates: 8,
            candidates: CandidateSet::Grid,
            directional: None,
        }
    }
}

impl SolverConfig {
    pub fn grid_spec(&self) -> GridSpec {
        GridSpec::new(self.grid_n, self.generator, self.seed)
    }
}

/// Camera orientations with `rotations[0] = I`.
#[derive(Clone, Debug, PartialEq)]
pub struct RotationHypothesis {
    pub rotations: Vec<Rotation>,
    /// Sum of `score(i, j, O_iᵀ O_j)` over ordered pairs.
    pub total_energy: f64,
    pub sweeps_used: usize,
}

/// Sum over ordered pairs `(i, j)`, `i` then `j` ascending.
pub fn total_energy<S: PairwiseScorer + ?Sized>(scorer: &S, rotations: &[Rotation]) -> Result<f64> {
    let mut total = 0.0;
    for (i, ri) in rotations.iter().enumerate() {
        for (j, rj) in rotations.iter().enumerate() {
            if i != j {
                total += scorer.score(i, j, &ri.relative_to(rj))?;
            }
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairwiseBest {
    pub index: usize,
    pub rotation: Rotation,
    pub score: f64,
}

/// First index holding the maximum of `values`.
fn argmax(values: &[f64]) -> (usize, f64) {
    values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, v)| if v > best.1 { (k, v) } else { best })
}

/// Highest-scoring grid rotation for the pair `(i, j)`; ties go to the lowest index.
pub fn best_pairwise<S: PairwiseScorer + ?Sized>(
    scorer: &S,
    i: usize,
    j: usize,
    grid: &So3Grid,
) -> Result<PairwiseBest> {
    let scores = score_over_grid(scorer, i, j, grid)?;
    let (index, score) = argmax(&scores);
    Ok(PairwiseBest {
        index,
        rotation: grid[index],
        score,
    })
}

fn check_cameras<S: PairwiseScorer + ?Sized>(scorer: &S, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 cameras, got {n}")));
    }
    if n > scorer.num_cameras() {
        return Err(Error::InvalidArgument(format!(
            "scorer knows {} cameras, asked for {n}",
            scorer.num_cameras()
        )));
    }
    Ok(())
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Greedy initialization: keep the `n - 1` most confident relative rotations
/// (a maximum spanning tree) and chain them outward from camera 0.
pub fn mst_init<S: PairwiseScorer + ?Sized>(
    scorer: &S,
    n: usize,
    grid: &So3Grid,
) -> Result<RotationHypothesis> {
    check_cameras(scorer, n)?;
    // (weight, i, j, relative O_iᵀ O_j) for i < j. The weight takes the more
    // confident direction, the rotation always comes from (i, j).
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let fwd = best_pairwise(scorer, i, j, grid)?;
            let bwd = best_pairwise(scorer, j, i, grid)?;
            edges.push((fwd.score.max(bwd.score), i, j, fwd.rotation));
        }
    }
    edges.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut sets = DisjointSet((0..n).collect());
    let mut adjacency: Vec<Vec<(usize, Rotation)>> = vec![Vec::new(); n];
    for (_, i, j, rel) in &edges {
        if sets.union(*i, *j) {
            adjacency[*i].push((*j, *rel));
            adjacency[*j].push((*i, rel.transpose()));
        }
    }

    let mut rotations: Vec<Option<Rotation>> = vec![None; n];
    rotations[0] = Some(Rotation::identity());
    let mut queue = VecDeque::from([0]);
    while let Some(i) = queue.pop_front() {
        let oi = rotations[i].unwrap();
        for (j, rel) in &adjacency[i] {
            if rotations[*j].is_none() {
                rotations[*j] = Some(oi * *rel);
                queue.push_back(*j);
            }
        }
    }
    let rotations: Vec<Rotation> = rotations.into_iter().map(Option::unwrap).collect();
    let total_energy = total_energy(scorer, &rotations)?;
    Ok(RotationHypothesis {
        rotations,
        total_energy,
        sweeps_used: 0,
    })
}

struct Ascent<'a, S: ?Sized> {
    scorer: &'a S,
    grid: &'a So3Grid,
    candidates: CandidateSet,
    directional: bool,
}

impl<S: PairwiseScorer + ?Sized> Ascent<'_, S> {
    fn block_score(&self, rotations: &[Rotation], i: usize, candidate: &Rotation) -> Result<f64> {
        let mut total = 0.0;
        for (j, rj) in rotations.iter().enumerate() {
            if j == i {
                continue;
            }
            total += self.scorer.score(i, j, &candidate.relative_to(rj))?;
            if self.directional {
                total += self.scorer.score(j, i, &rj.relative_to(candidate))?;
            }
        }
        Ok(total)
    }

    fn candidates(&self, rotations: &[Rotation], i: usize) -> Vec<Rotation> {
        match self.candidates {
            CandidateSet::Grid => self.grid.rotations().to_vec(),
            CandidateSet::Composed => rotations
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .flat_map(|(_, rj)| self.grid.rotations().iter().map(move |g| *rj * *g))
                .collect(),
        }
    }

    /// Candidates for camera `i` with their block scores, in candidate order.
    fn scored(&self, rotations: &[Rotation], i: usize) -> Result<(Vec<Rotation>, Vec<f64>)> {
        let candidates = self.candidates(rotations, i);
        let scores = candidates
            .par_iter()
            .map(|c| self.block_score(rotations, i, c))
            .collect::<Result<Vec<f64>>>()?;
        Ok((candidates, scores))
    }

    /// Best candidate for camera `i` and its gain over the current rotation.
    fn best_move(&self, rotations: &[Rotation], i: usize) -> Result<(Rotation, f64)> {
        let current = self.block_score(rotations, i, &rotations[i])?;
        let (candidates, scores) = self.scored(rotations, i)?;
        let (k, best) = argmax(&scores);
        Ok((candidates[k], best - current))
    }

    /// The `k` highest-scoring candidates, ties by candidate order.
    fn top_moves(&self, rotations: &[Rotation], i: usize, k: usize) -> Result<Vec<Rotation>> {
        let (candidates, scores) = self.scored(rotations, i)?;
        let mut order: Vec<usize> = (0..candidates.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Ok(order.into_iter().take(k).map(|c| candidates[c]).collect())
    }

    /// One sweep: every free camera once, largest gain first. Returns whether
    /// anything moved.
    fn sweep(&self, rotations: &mut [Rotation], energy: &mut f64, greedy: bool) -> Result<bool> {
        let mut changed = false;
        let mut pending: Vec<usize> = (1..rotations.len()).collect();
        while !pending.is_empty() {
            let (slot, target, gain) = if greedy {
                let mut pick: Option<(usize, Rotation, f64)> = None;
                for (slot, &i) in pending.iter().enumerate() {
                    let (r, gain) = self.best_move(rotations, i)?;
                    if pick.is_none_or(|p| gain > p.2) {
                        pick = Some((slot, r, gain));
                    }
                }
                pick.expect("pending is not empty")
            } else {
                let (r, gain) = self.best_move(rotations, pending[0])?;
                (0, r, gain)
            };
            let i = pending.remove(slot);
            if gain > 0.0 {
                let previous = rotations[i];
                rotations[i] = target;
                let updated = total_energy(self.scorer, rotations)?;
                if updated >= *energy {
                    *energy = updated;
                    changed = true;
                } else {
                    rotations[i] = previous;
                }
            }
        }
        Ok(changed)
    }

    /// Tries joint moves of camera pairs over each camera's `k` best
    /// candidates; applies the first pair that strictly raises the energy.
    fn pair_round(&self, rotations: &mut [Rotation], energy: &mut f64, k: usize) -> Result<bool> {
        let n = rotations.len();
        for i in 1..n {
            for j in i + 1..n {
                let ci = self.top_moves(rotations, i, k)?;
                let cj = self.top_moves(rotations, j, k)?;
                let mut best: Option<(f64, Rotation, Rotation)> = None;
                let mut trial = rotations.to_vec();
                for a in &ci {
                    for b in &cj {
                        trial[i] = *a;
                        trial[j] = *b;
                        let e = total_energy(self.scorer, &trial)?;
                        if e > best.map_or(*energy, |b| b.0) {
                            best = Some((e, *a, *b));
                        }
                    }
                }
                if let Some((e, a, b)) = best {
                    rotations[i] = a;
                    rotations[j] = b;
                    *energy = e;
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }
}

/// Block coordinate ascent over cameras `1..n` (camera 0 is the gauge), grid
/// candidates, cameras visited in index order.
pub fn coordinate_ascent<S: PairwiseScorer + ?Sized>(
    scorer: &S,
    init: &RotationHypothesis,
    grid: &So3Grid,
    max_sweeps: usize,
    patience: usize,
) -> Result<RotationHypothesis> {
    let config = SolverConfig {
        max_sweeps,
        patience,
        pair_candidates: 0,
        ..SolverConfig::default()
    };
    run_ascent(scorer, init, grid, &config, false)
}

/// Ascent as configured: greedy camera order, the configured candidate set
/// and, once sweeps stall, joint pair moves.
pub fn refine<S: PairwiseScorer + ?Sized>(
    scorer: &S,
    init: &RotationHypothesis,
    grid: &So3Grid,
    config: &SolverConfig,
) -> Result<RotationHypothesis> {
    run_ascent(scorer, init, grid, config, true)
}

fn run_ascent<S: PairwiseScorer + ?Sized>(
    scorer: &S,
    init: &RotationHypothesis,
    grid: &So3Grid,
    config: &SolverConfig,
    greedy: bool,
) -> Result<RotationHypothesis> {
    if config.max_sweeps == 0 {
        return Ok(init.clone());
    }
    let n = init.rotations.len();
    check_cameras(scorer, n)?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    let ascent = Ascent {
        scorer,
        grid,
        candidates: config.candidates,
        directional: config.directional.unwrap_or_else(|| scorer.is_directional()),
    };
    let mut rotations = init.rotations.clone();
    let mut energy = total_energy(scorer, &rotations)?;
    let mut sweeps = 0;
    let mut stalled = 0;
    while sweeps < config.max_sweeps {
        sweeps += 1;
        if ascent.sweep(&mut rotations, &mut energy, greedy)? {
            stalled = 0;
            continue;
        }
        stalled += 1;
        if stalled < config.patience.max(1) {
            continue;
        }
        if config.pair_candidates > 0
            && sweeps < config.max_sweeps
            && ascent.pair_round(&mut rotations, &mut energy, config.pair_candidates)?
        {
            stalled = 0;
            continue;
        }
        break;
    }
    Ok(RotationHypothesis {
        rotations,
        total_energy: energy,
        sweeps_used: sweeps,
    })
}

/// Moves every camera but the gauge onto its nearest grid rotation.
pub fn snap_to_grid<S: PairwiseScorer + ?Sized>(
    scorer: &S,
    hyp: &RotationHypothesis,
    grid: &So3Grid,
) -> Result<RotationHypothesis> {
    let mut rotations = hyp.rotations.clone();
    for r in rotations.iter_mut().skip(1) {
        *r = grid[nearest_in_grid(grid, r).0];
    }
    let total_energy = total_energy(scorer, &rotations)?;
    Ok(RotationHypothesis {
        rotations,
        total_energy,
        sweeps_used: hyp.sweeps_used,
    })
}

/// Spanning-tree initialization followed by [`refine`]. With grid candidates
/// the initialization is first projected onto the grid, so every returned
/// orientation but the gauge is a grid rotation.
pub fn solve<S: PairwiseScorer + ?Sized>(
    scorer: &S,
    n: usize,
    grid: &So3Grid,
    config: &SolverConfig,
) -> Result<RotationHypothesis> {
    let mut init = mst_init(scorer, n, grid)?;
    if config.candidates == CandidateSet::Grid {
        init = snap_to_grid(scorer, &init, grid)?;
    }
    refine(scorer, &init, grid, config)
}
