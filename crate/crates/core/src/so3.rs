//! Rotations, the geodesic metric on SO(3), and finite rotation grids.
//!
//! A [`Rotation`] is stored as a 3×3 matrix. Quaternions (`[w, x, y, z]`) are
//! accepted and produced only at the boundaries (grid generation and file IO).

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::ops::Mul;

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit quaternion in `[w, x, y, z]` order.
pub type Quat = [f64; 4];

/// Element of SO(3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps a matrix after checking `RᵀR = I` and `det R = 1` to within `1e-9`.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let ortho = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if !(ortho <= 1e-9 && (det - 1.0).abs() <= 1e-9) {
            return Err(Error::InvalidArgument(format!(
                "matrix is not a rotation (orthogonality error {ortho:e}, det {det})"
            )));
        }
        Ok(Self(m))
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    /// Builds the rotation matrix of a quaternion `[w, x, y, z]`. The input is
    /// normalized first; a zero quaternion is rejected.
    pub fn from_quaternion(q: Quat) -> Result<Self> {
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 1e-12) {
            return Err(Error::InvalidArgument(format!("bad quaternion {q:?}")));
        }
        let [w, x, y, z] = q.map(|v| v / norm);
        Ok(Self(Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )))
    }

    /// Canonical quaternion `[w, x, y, z]` with `w >= 0`.
    pub fn to_quaternion(&self) -> Quat {
        let q = UnitQuaternion::from_matrix(&self.0);
        let mut out = [q.w, q.i, q.j, q.k];
        if out[0] < 0.0 {
            out = out.map(|v| -v);
        }
        out
    }

    /// Right-handed rotation by `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::identity();
        }
        let u = axis / n;
        let (s, c) = angle.sin_cos();
        let k = u.cross_matrix();
        Self(Matrix3::identity() + k * s + k * k * (1.0 - c))
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::from_axis_angle(&Vector3::x(), angle)
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::from_axis_angle(&Vector3::y(), angle)
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::from_axis_angle(&Vector3::z(), angle)
    }

    /// Haar-uniform random rotation (Shoemake's subgroup algorithm).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self::from_quaternion(random_quaternion(rng)).expect("unit quaternion")
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        geodesic_distance(&Rotation::identity(), self)
    }

    /// `selfᵀ · other`, the relative rotation used by pairwise energies.
    pub fn relative_to(&self, other: &Rotation) -> Rotation {
        Self(self.0.tr_mul(&other.0))
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl<'a> Mul<&'a Rotation> for &'a Rotation {
    type Output = Rotation;

    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

/// Angle of `aᵀb`, in `[0, π]`.
///
/// Equal to `arccos((trace(aᵀb) - 1) / 2)`, evaluated as `atan2(|axis|, cos)`
/// so that small angles keep full precision and `d(R, R)` is exactly zero.
#[inline]
pub fn geodesic_distance(a: &Rotation, b: &Rotation) -> f64 {
    let m = a.0.tr_mul(&b.0);
    let sx = m[(2, 1)] - m[(1, 2)];
    let sy = m[(0, 2)] - m[(2, 0)];
    let sz = m[(1, 0)] - m[(0, 1)];
    let sin2 = (sx * sx + sy * sy + sz * sz).sqrt();
    let cos2 = m.trace() - 1.0;
    sin2.atan2(cos2)
}

pub(crate) fn random_quaternion<R: Rng + ?Sized>(rng: &mut R) -> Quat {
    let u1: f64 = rng.gen();
    let u2: f64 = rng.gen();
    let u3: f64 = rng.gen();
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    let (s2, c2) = (2.0 * PI * u2).sin_cos();
    let (s3, c3) = (2.0 * PI * u3).sin_cos();
    [b * c3, a * s2, a * c2, b * s3]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridGenerator {
    SuperFibonacci,
    RandomUniform,
}

impl GridGenerator {
    pub fn id(self) -> u8 {
        match self {
            GridGenerator::SuperFibonacci => 0,
            GridGenerator::RandomUniform => 1,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            0 => Ok(GridGenerator::SuperFibonacci),
            1 => Ok(GridGenerator::RandomUniform),
            other => Err(Error::Format(format!("unknown grid generator id {other}"))),
        }
    }
}

impl std::str::FromStr for GridGenerator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "super-fibonacci" | "super_fibonacci" => Ok(GridGenerator::SuperFibonacci),
            "random-uniform" | "random_uniform" => Ok(GridGenerator::RandomUniform),
            other => Err(Error::InvalidArgument(format!("unknown grid generator {other:?}"))),
        }
    }
}

/// Everything needed to rebuild a grid bit-for-bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: u32,
    pub generator: GridGenerator,
    pub seed: u64,
}

impl GridSpec {
    pub fn new(n: u32, generator: GridGenerator, seed: u64) -> Self {
        Self { n, generator, seed }
    }

    pub fn build(&self) -> Result<So3Grid> {
        build_grid(self.n as usize, self.generator, self.seed)
    }
}

/// Number of random probes used to estimate the covering radius.
pub const COVERING_SAMPLES: usize = 10_000;
const COVERING_SEED: u64 = 0x5EED_C0FE_50F3_0001;

/// Finite sample of SO(3) with an estimated covering radius.
#[derive(Clone, Debug)]
pub struct So3Grid {
    spec: GridSpec,
    quaternions: Vec<Quat>,
    rotations: Vec<Rotation>,
    covering_radius: f64,
}

impl So3Grid {
    fn from_quaternions(spec: GridSpec, quaternions: Vec<Quat>) -> Result<Self> {
        let rotations = quaternions
            .iter()
            .map(|q| Rotation::from_quaternion(*q))
            .collect::<Result<Vec<_>>>()?;
        let covering_radius = estimate_covering_radius(&quaternions);
        Ok(Self {
            spec,
            quaternions,
            rotations,
            covering_radius,
        })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }

    pub fn rotations(&self) -> &[Rotation] {
        &self.rotations
    }

    pub fn quaternions(&self) -> &[Quat] {
        &self.quaternions
    }

    pub fn get(&self, k: usize) -> &Rotation {
        &self.rotations[k]
    }

    /// Estimated max distance from any rotation to its nearest grid point (radians).
    pub fn covering_radius(&self) -> f64 {
        self.covering_radius
    }
}

impl std::ops::Index<usize> for So3Grid {
    type Output = Rotation;

    fn index(&self, k: usize) -> &Rotation {
        &self.rotations[k]
    }
}

/// Builds an `n`-point grid. `super-fibonacci` ignores `seed`.
pub fn build_grid(n: usize, generator: GridGenerator, seed: u64) -> Result<So3Grid> {
    if n == 0 {
        return Err(Error::InvalidArgument("grid size must be at least 1".into()));
    }
    let n32 = u32::try_from(n)
        .map_err(|_| Error::InvalidArgument(format!("grid size {n} exceeds u32")))?;
    let quaternions = match generator {
        GridGenerator::SuperFibonacci => super_fibonacci(n),
        GridGenerator::RandomUniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| random_quaternion(&mut rng)).collect()
        }
    };
    So3Grid::from_quaternions(GridSpec::new(n32, generator, seed), quaternions)
}

/// Super-Fibonacci spiral samples on S³ (Alexa, 2022).
fn super_fibonacci(n: usize) -> Vec<Quat> {
    let phi = 2.0_f64.sqrt();
    // Largest real root of x⁴ = x + 4.
    let psi = 1.533_751_168_755_204_3_f64;
    let nf = n as f64;
    (0..n)
        .map(|i| {
            let s = i as f64 + 0.5;
            let r = (s / nf).sqrt();
            let big_r = (1.0 - s / nf).sqrt();
            let alpha = 2.0 * PI * s / phi;
            let beta = 2.0 * PI * s / psi;
            let (sa, ca) = alpha.sin_cos();
            let (sb, cb) = beta.sin_cos();
            // (r sin α, r cos α, R sin β, R cos β) read as (x, y, z, w).
            [big_r * cb, r * sa, r * ca, big_r * sb]
        })
        .collect()
}

fn estimate_covering_radius(grid: &[Quat]) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(COVERING_SEED);
    let probes: Vec<Quat> = (0..COVERING_SAMPLES)
        .map(|_| random_quaternion(&mut rng))
        .collect();
    let worst_dot = probes
        .par_iter()
        .map(|p| {
            grid.iter()
                .map(|q| (p[0] * q[0] + p[1] * q[1] + p[2] * q[2] + p[3] * q[3]).abs())
                .fold(0.0_f64, f64::max)
        })
        .reduce(|| 1.0, f64::min);
    2.0 * worst_dot.min(1.0).acos()
}

/// Index of the grid rotation closest to `r` and its distance. Ties go to the
/// lowest index.
pub fn nearest_in_grid(grid: &So3Grid, r: &Rotation) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, g) in grid.rotations.iter().enumerate() {
        let d = geodesic_distance(g, r);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

pub const GRID_MAGIC: &[u8; 4] = b"SO3G";
pub const GRID_VERSION: u32 = 1;

/// Writes the little-endian `SO3G` grid file.
pub fn write_grid<W: Write>(mut w: W, grid: &So3Grid) -> Result<()> {
    let mut buf = Vec::with_capacity(21 + grid.len() * 32);
    buf.extend_from_slice(GRID_MAGIC);
    buf.extend_from_slice(&GRID_VERSION.to_le_bytes());
    write_spec(&mut buf, &grid.spec);
    for q in &grid.quaternions {
        for v in q {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_grid<R: Read>(mut r: R) -> Result<So3Grid> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut cur = ByteCursor::new(&bytes, Error::Format);
    if cur.take(4)? != GRID_MAGIC {
        return Err(Error::Format("bad grid magic".into()));
    }
    let version = cur.u32()?;
    if version != GRID_VERSION {
        return Err(Error::Format(format!("unsupported grid version {version}")));
    }
    let spec = read_spec(&mut cur)?;
    if spec.n == 0 {
        return Err(Error::Format("grid file with n = 0".into()));
    }
    let mut quaternions = Vec::with_capacity(spec.n as usize);
    for _ in 0..spec.n {
        quaternions.push([cur.f64()?, cur.f64()?, cur.f64()?, cur.f64()?]);
    }
    if !cur.is_empty() {
        return Err(Error::Format("trailing bytes after grid".into()));
    }
    So3Grid::from_quaternions(spec, quaternions)
}

pub(crate) fn write_spec(buf: &mut Vec<u8>, spec: &GridSpec) {
    buf.extend_from_slice(&spec.n.to_le_bytes());
    buf.push(spec.generator.id());
    buf.extend_from_slice(&spec.seed.to_le_bytes());
}

pub(crate) fn read_spec(cur: &mut ByteCursor<'_>) -> Result<GridSpec> {
    let n = cur.u32()?;
    let generator = GridGenerator::from_id(cur.u8()?)?;
    let seed = cur.u64()?;
    Ok(GridSpec::new(n, generator, seed))
}

/// Little-endian reader that reports truncation through a caller-chosen error.
pub(crate) struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    on_short: fn(String) -> Error,
}

impl<'a> ByteCursor<'a> {
    pub(crate) fn new(bytes: &'a [u8], on_short: fn(String) -> Error) -> Self {
        Self {
            bytes,
            pos: 0,
            on_short,
        }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err((self.on_short)(format!(
                "unexpected end of data at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quat_angle(a: &Rotation, b: &Rotation) -> f64 {
        let qa = a.to_quaternion();
        let qb = b.to_quaternion();
        let dot: f64 = qa.iter().zip(&qb).map(|(x, y)| x * y).sum();
        2.0 * dot.abs().min(1.0).acos()
    }

    #[test]
    fn distance_identity_and_quarter_turn() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = Rotation::random(&mut rng);
        assert_eq!(geodesic_distance(&r, &r), 0.0);
        let d = geodesic_distance(&Rotation::identity(), &Rotation::rot_z(PI / 2.0));
        assert!((d - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn distance_matches_quaternion_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let a = Rotation::random(&mut rng);
            let b = Rotation::random(&mut rng);
            let d = geodesic_distance(&a, &b);
            assert!((d - quat_angle(&a, &b)).abs() < 1e-7, "{d}");
            assert_eq!(d, geodesic_distance(&b, &a));
        }
    }

    #[test]
    fn quaternion_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let r = Rotation::random(&mut rng);
            let back = Rotation::from_quaternion(r.to_quaternion()).unwrap();
            assert!(geodesic_distance(&r, &back) < 1e-7);
            let m = r.matrix();
            assert!((m.transpose() * m - Matrix3::identity()).abs().max() < 1e-9);
            assert!((m.determinant() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn from_matrix_rejects_reflections() {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Rotation::from_matrix(m).is_err());
        assert!(Rotation::from_matrix(*Rotation::rot_x(0.3).matrix()).is_ok());
        assert!(Rotation::from_quaternion([0.0; 4]).is_err());
    }

    #[test]
    fn build_grid_rejects_empty() {
        assert!(matches!(
            build_grid(0, GridGenerator::SuperFibonacci, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn single_point_grid_covers_poorly() {
        let g = build_grid(1, GridGenerator::RandomUniform, 7).unwrap();
        assert_eq!(g.len(), 1);
        assert!(g.covering_radius() >= PI / 2.0);
    }

    #[test]
    fn grids_are_deterministic() {
        for gen in [GridGenerator::SuperFibonacci, GridGenerator::RandomUniform] {
            let a = build_grid(500, gen, 9).unwrap();
            let b = build_grid(500, gen, 9).unwrap();
            assert_eq!(a.rotations(), b.rotations());
            assert_eq!(a.covering_radius().to_bits(), b.covering_radius().to_bits());
        }
        let a = build_grid(300, GridGenerator::SuperFibonacci, 1).unwrap();
        let b = build_grid(300, GridGenerator::SuperFibonacci, 2).unwrap();
        assert_eq!(a.rotations(), b.rotations());
        let c = build_grid(300, GridGenerator::RandomUniform, 1).unwrap();
        let d = build_grid(300, GridGenerator::RandomUniform, 2).unwrap();
        assert_ne!(c.rotations(), d.rotations());
    }

    #[test]
    fn grid_points_are_distinct() {
        let g = build_grid(1000, GridGenerator::SuperFibonacci, 0).unwrap();
        for i in 0..g.len() {
            for j in i + 1..g.len() {
                assert!(geodesic_distance(&g[i], &g[j]) > 1e-6, "{i} {j}");
            }
        }
    }

    #[test]
    fn super_fibonacci_covering_radius_shrinks_with_n() {
        let mut last = f64::INFINITY;
        for n in [72, 144, 288, 576, 1152, 2304, 4608] {
            let g = build_grid(n, GridGenerator::SuperFibonacci, 0).unwrap();
            assert!(g.covering_radius() <= last, "n={n}");
            last = g.covering_radius();
        }
    }

    #[test]
    fn nearest_finds_grid_members() {
        let g = build_grid(200, GridGenerator::SuperFibonacci, 0).unwrap();
        for k in [0, 17, 199] {
            let (idx, d) = nearest_in_grid(&g, &g[k]);
            assert_eq!(idx, k);
            assert!(d < 1e-7);
        }
    }

    #[test]
    fn nearest_matches_linear_scan() {
        let g = build_grid(300, GridGenerator::RandomUniform, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let q = Rotation::random(&mut rng);
            let dists: Vec<f64> = g.rotations().iter().map(|r| quat_angle(r, &q)).collect();
            let oracle = dists
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            let (idx, d) = nearest_in_grid(&g, &q);
            assert_eq!(idx, oracle);
            assert!((d - dists[oracle]).abs() < 1e-7);
        }
    }

    #[test]
    fn nearest_breaks_ties_by_index() {
        let quats = vec![
            Rotation::rot_z(0.2).to_quaternion(),
            Rotation::rot_z(-0.2).to_quaternion(),
            Rotation::rot_x(1.0).to_quaternion(),
        ];
        let g = So3Grid::from_quaternions(GridSpec::new(3, GridGenerator::RandomUniform, 0), quats)
            .unwrap();
        let (a, b) = (geodesic_distance(&g[0], &Rotation::identity()), geodesic_distance(&g[1], &Rotation::identity()));
        assert_eq!(a, b);
        assert_eq!(nearest_in_grid(&g, &Rotation::identity()).0, 0);
    }

    #[test]
    fn grid_file_round_trip() {
        let g = build_grid(64, GridGenerator::RandomUniform, 21).unwrap();
        let mut bytes = Vec::new();
        write_grid(&mut bytes, &g).unwrap();
        assert_eq!(bytes.len(), 4 + 4 + 4 + 1 + 8 + 64 * 32);
        assert_eq!(&bytes[..4], b"SO3G");
        let back = read_grid(&bytes[..]).unwrap();
        assert_eq!(back.spec(), g.spec());
        assert_eq!(back.quaternions(), g.quaternions());
        assert_eq!(back.rotations(), g.rotations());

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_grid(&bad[..]), Err(Error::Format(_))));
        assert!(matches!(read_grid(&bytes[..bytes.len() - 3]), Err(Error::Format(_))));
    }

    fn arb_rotation() -> impl Strategy<Value = Rotation> {
        any::<u64>().prop_map(|s| Rotation::random(&mut ChaCha8Rng::seed_from_u64(s)))
    }

    proptest! {
        #[test]
        fn left_invariance(q in arb_rotation(), a in arb_rotation(), b in arb_rotation()) {
            let d0 = geodesic_distance(&a, &b);
            let d1 = geodesic_distance(&(q * a), &(q * b));
            prop_assert!((d0 - d1).abs() < 1e-7);
        }

        #[test]
        fn triangle_inequality(a in arb_rotation(), b in arb_rotation(), c in arb_rotation()) {
            let ab = geodesic_distance(&a, &b);
            let bc = geodesic_distance(&b, &c);
            let ac = geodesic_distance(&a, &c);
            prop_assert!(ac <= ab + bc + 1e-7);
        }
    }
}
