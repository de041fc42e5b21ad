//! Pairwise relative-rotation scores, their tabulated form, and the losses
//! defined on them.

use std::collections::HashMap;
use std::io::{Read, Write};

use kiddo::{KdTree, SquaredEuclidean};
use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::so3::{
    geodesic_distance, nearest_in_grid, read_spec, write_spec, ByteCursor, GridSpec, Rotation,
    So3Grid,
};

/// Unnormalized log-likelihood of a relative rotation between two cameras.
///
/// `score(i, j, R)` rates `R` as the relative rotation `O_iᵀ O_j` between the
/// orientations of cameras `i` and `j`. Implementations must be deterministic
/// and callable from several threads at once.
pub trait PairwiseScorer: Sync {
    fn num_cameras(&self) -> usize;

    fn score(&self, i: usize, j: usize, r: &Rotation) -> Result<f64>;

    /// `false` only when `score(i, j, R) == score(j, i, Rᵀ)` is guaranteed.
    fn is_directional(&self) -> bool {
        true
    }
}

impl<S: PairwiseScorer + ?Sized> PairwiseScorer for &S {
    fn num_cameras(&self) -> usize {
        (**self).num_cameras()
    }

    fn score(&self, i: usize, j: usize, r: &Rotation) -> Result<f64> {
        (**self).score(i, j, r)
    }

    fn is_directional(&self) -> bool {
        (**self).is_directional()
    }
}

pub(crate) fn check_pair(n: usize, i: usize, j: usize) -> Result<()> {
    if i == j {
        return Err(Error::InvalidArgument(format!("pair ({i}, {j}) is not distinct")));
    }
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!(
            "pair ({i}, {j}) out of range for {n} cameras"
        )));
    }
    Ok(())
}

/// Same score for every rotation.
#[derive(Clone, Debug)]
pub struct ConstantScorer {
    pub num_cameras: usize,
    pub value: f64,
}

impl PairwiseScorer for ConstantScorer {
    fn num_cameras(&self) -> usize {
        self.num_cameras
    }

    fn score(&self, i: usize, j: usize, _r: &Rotation) -> Result<f64> {
        check_pair(self.num_cameras, i, j)?;
        Ok(self.value)
    }

    fn is_directional(&self) -> bool {
        false
    }
}

/// `score(i, j, R) = -κ · min_m d(R, m)²` over a per-pair list of modes.
///
/// A pair with an empty mode list is uninformative and scores 0 everywhere.
#[derive(Clone, Debug)]
pub struct SymmetricModeScorer {
    num_cameras: usize,
    kappa: f64,
    modes: Vec<Option<Vec<Rotation>>>,
    directional: bool,
}

impl SymmetricModeScorer {
    pub fn new(num_cameras: usize, kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidArgument(format!("kappa must be positive, got {kappa}")));
        }
        Ok(Self {
            num_cameras,
            kappa,
            modes: vec![None; num_cameras * num_cameras],
            directional: false,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Sets the modes of the ordered pair `(i, j)` only. The scorer becomes
    /// directional.
    pub fn set_modes(&mut self, i: usize, j: usize, modes: Vec<Rotation>) -> Result<()> {
        check_pair(self.num_cameras, i, j)?;
        self.modes[i * self.num_cameras + j] = Some(modes);
        self.directional = true;
        Ok(())
    }

    /// Sets `(i, j)` to `modes` and `(j, i)` to their transposes.
    pub fn set_pair_modes(&mut self, i: usize, j: usize, modes: Vec<Rotation>) -> Result<()> {
        check_pair(self.num_cameras, i, j)?;
        let reverse = modes.iter().map(Rotation::transpose).collect();
        self.modes[i * self.num_cameras + j] = Some(modes);
        self.modes[j * self.num_cameras + i] = Some(reverse);
        Ok(())
    }

    pub fn modes(&self, i: usize, j: usize) -> Option<&[Rotation]> {
        self.modes
            .get(i * self.num_cameras + j)
            .and_then(|m| m.as_deref())
    }
}

/// `base · Rot(axis, 2πm/k)` for `m = 0..k`.
pub fn symmetry_modes(base: &Rotation, axis: &Vector3<f64>, k: usize) -> Vec<Rotation> {
    (0..k.max(1))
        .map(|m| {
            let angle = 2.0 * std::f64::consts::PI * m as f64 / k.max(1) as f64;
            base * &Rotation::from_axis_angle(axis, angle)
        })
        .collect()
}

impl PairwiseScorer for SymmetricModeScorer {
    fn num_cameras(&self) -> usize {
        self.num_cameras
    }

    fn score(&self, i: usize, j: usize, r: &Rotation) -> Result<f64> {
        check_pair(self.num_cameras, i, j)?;
        let modes = self.modes[i * self.num_cameras + j]
            .as_ref()
            .ok_or_else(|| Error::Scorer(format!("no modes for pair ({i}, {j})")))?;
        if modes.is_empty() {
            return Ok(0.0);
        }
        let d = modes
            .iter()
            .map(|m| geodesic_distance(r, m))
            .fold(f64::INFINITY, f64::min);
        Ok(-self.kappa * d * d)
    }

    fn is_directional(&self) -> bool {
        self.directional
    }
}

/// `scorer.score(i, j, grid[k])` for every `k`, in grid order.
pub fn score_over_grid<S: PairwiseScorer + ?Sized>(
    scorer: &S,
    i: usize,
    j: usize,
    grid: &So3Grid,
) -> Result<Vec<f64>> {
    check_pair(scorer.num_cameras(), i, j)?;
    grid.rotations()
        .par_iter()
        .map(|r| scorer.score(i, j, r))
        .collect()
}

/// Negative log-likelihood of `gt` under the softmax of `scores` over the grid.
/// `gt` is snapped to its nearest grid rotation.
pub fn nll_of(scores: &[f64], gt: &Rotation, grid: &So3Grid) -> Result<f64> {
    if grid.is_empty() || scores.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    if scores.len() != grid.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores for a grid of {}",
            scores.len(),
            grid.len()
        )));
    }
    let (k, _) = nearest_in_grid(grid, gt);
    let (arg_max, max) = scores
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, s)| if s > best.1 { (i, s) } else { best });
    let rest: f64 = scores
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != arg_max)
        .map(|(_, s)| (s - max).exp())
        .sum();
    Ok((max - scores[k]) + rest.ln_1p())
}

/// `‖pred - target‖₁`.
pub fn l1_translation_loss(pred: &Vector3<f64>, target: &Vector3<f64>) -> f64 {
    (pred - target).abs().sum()
}

pub const TABLE_MAGIC: &[u8; 4] = b"RPET";
pub const TABLE_VERSION: u32 = 1;

/// Scores for ordered camera pairs, one `f32` per grid rotation.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyTable {
    grid: GridSpec,
    pairs: Vec<(u16, u16, Vec<f32>)>,
}

impl EnergyTable {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            pairs: Vec::new(),
        }
    }

    /// Tabulates every ordered pair of `scorer` over `grid`.
    pub fn from_scorer<S: PairwiseScorer + ?Sized>(scorer: &S, grid: &So3Grid) -> Result<Self> {
        let n = scorer.num_cameras();
        let mut table = Self::new(grid.spec());
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let row = score_over_grid(scorer, i, j, grid)?;
                    table.insert(i, j, row.into_iter().map(|v| v as f32).collect())?;
                }
            }
        }
        Ok(table)
    }

    pub fn grid_spec(&self) -> GridSpec {
        self.grid
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, &[f32])> {
        self.pairs
            .iter()
            .map(|(i, j, row)| (*i as usize, *j as usize, row.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Inserts or replaces the row of `(i, j)`.
    pub fn insert(&mut self, i: usize, j: usize, row: Vec<f32>) -> Result<()> {
        if i == j {
            return Err(Error::InvalidArgument(format!("pair ({i}, {j}) is not distinct")));
        }
        let (i16, j16) = match (u16::try_from(i), u16::try_from(j)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return Err(Error::InvalidArgument(format!("camera index ({i}, {j}) exceeds u16"))),
        };
        if row.len() != self.grid.n as usize {
            return Err(Error::CorruptTable(format!(
                "row ({i}, {j}) has {} scores, grid has {}",
                row.len(),
                self.grid.n
            )));
        }
        match self.pairs.iter_mut().find(|(a, b, _)| *a == i16 && *b == j16) {
            Some(slot) => slot.2 = row,
            None => self.pairs.push((i16, j16, row)),
        }
        Ok(())
    }

    pub fn row(&self, i: usize, j: usize) -> Option<&[f32]> {
        self.pairs
            .iter()
            .find(|(a, b, _)| *a as usize == i && *b as usize == j)
            .map(|(_, _, r)| r.as_slice())
    }

    /// One more than the largest camera index present.
    pub fn num_cameras(&self) -> usize {
        self.pairs
            .iter()
            .map(|(i, j, _)| (*i).max(*j) as usize + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn save<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.grid.n as usize;
        let mut buf = Vec::with_capacity(29 + self.pairs.len() * (4 + 4 * n));
        buf.extend_from_slice(TABLE_MAGIC);
        buf.extend_from_slice(&TABLE_VERSION.to_le_bytes());
        write_spec(&mut buf, &self.grid);
        buf.extend_from_slice(&(self.pairs.len() as u32).to_le_bytes());
        for (i, j, row) in &self.pairs {
            buf.extend_from_slice(&i.to_le_bytes());
            buf.extend_from_slice(&j.to_le_bytes());
            for v in row {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut cur = ByteCursor::new(&bytes, Error::CorruptTable);
        let magic = cur.take(4).map_err(|_| Error::Format("file too short for magic".into()))?;
        if magic != TABLE_MAGIC {
            return Err(Error::Format("bad energy table magic".into()));
        }
        let version = cur.u32()?;
        if version != TABLE_VERSION {
            return Err(Error::Format(format!("unsupported table version {version}")));
        }
        let grid = read_spec(&mut cur)?;
        let count = cur.u32()?;
        let mut table = Self::new(grid);
        for _ in 0..count {
            let i = cur.u16()?;
            let j = cur.u16()?;
            let row = (0..grid.n).map(|_| cur.f32()).collect::<Result<Vec<_>>>()?;
            if i == j {
                return Err(Error::CorruptTable(format!("self pair ({i}, {j})")));
            }
            table.pairs.push((i, j, row));
        }
        if !cur.is_empty() {
            return Err(Error::CorruptTable("trailing bytes after last pair".into()));
        }
        Ok(table)
    }
}

/// Scorer backed by an [`EnergyTable`]. A query rotation takes the score of its
/// nearest grid rotation.
pub struct TabulatedScorer {
    table: EnergyTable,
    grid: So3Grid,
    rows: HashMap<(usize, usize), usize>,
    index: KdTree<f64, 4>,
    num_cameras: usize,
}

impl TabulatedScorer {
    pub fn new(table: EnergyTable, grid: So3Grid) -> Result<Self> {
        if table.grid_spec() != grid.spec() {
            return Err(Error::InvalidArgument(format!(
                "table grid {:?} does not match grid {:?}",
                table.grid_spec(),
                grid.spec()
            )));
        }
        let rows = table
            .pairs
            .iter()
            .enumerate()
            .map(|(k, (i, j, _))| ((*i as usize, *j as usize), k))
            .collect();
        // q and -q are the same rotation; index both so Euclidean nearest
        // neighbour matches geodesic nearest neighbour.
        let mut index: KdTree<f64, 4> = KdTree::new();
        for (k, q) in grid.quaternions().iter().enumerate() {
            index.add(q, k as u64);
            index.add(&q.map(|v| -v), k as u64);
        }
        let num_cameras = table.num_cameras();
        Ok(Self {
            table,
            grid,
            rows,
            index,
            num_cameras,
        })
    }

    pub fn table(&self) -> &EnergyTable {
        &self.table
    }

    pub fn grid(&self) -> &So3Grid {
        &self.grid
    }

    fn lookup(&self, r: &Rotation) -> usize {
        let q = r.to_quaternion();
        self.index.nearest_one::<SquaredEuclidean>(&q).item as usize
    }
}

impl PairwiseScorer for TabulatedScorer {
    fn num_cameras(&self) -> usize {
        self.num_cameras
    }

    fn score(&self, i: usize, j: usize, r: &Rotation) -> Result<f64> {
        let row = self
            .rows
            .get(&(i, j))
            .ok_or_else(|| Error::Scorer(format!("table has no row for pair ({i}, {j})")))?;
        Ok(self.table.pairs[*row].2[self.lookup(r)] as f64)
    }
}
