//! Camera extrinsics and the look-at centered world frame used to define
//! translation targets.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::so3::{Quat, Rotation};

/// Largest accepted condition number of the closest-point normal matrix.
pub const MAX_AXIS_CONDITION: f64 = 1e8;

/// World-to-camera extrinsics: `x_c = rotation · x_w + translation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraPose {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl CameraPose {
    pub fn new(rotation: Rotation, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    /// Pose whose camera sits at `center` (world coordinates).
    pub fn from_center(rotation: Rotation, center: &Vector3<f64>) -> Self {
        Self::new(rotation, -rotation.apply(center))
    }

    /// Pose from a camera-to-world orientation.
    pub fn from_orientation(orientation: Rotation, translation: Vector3<f64>) -> Self {
        Self::new(orientation.transpose(), translation)
    }

    /// Camera placed at `center`, with its +z axis pointing at `target` and the
    /// image x axis rolled by `roll` radians about the viewing direction.
    pub fn look_at(center: &Vector3<f64>, target: &Vector3<f64>, roll: f64) -> Result<Self> {
        let forward = target - center;
        let dist = forward.norm();
        if !(dist > 1e-12) {
            return Err(Error::InvalidArgument("camera center equals look-at target".into()));
        }
        let z = forward / dist;
        let hint = if z.y.abs() < 0.9 { Vector3::y() } else { Vector3::x() };
        let x0 = hint.cross(&z).normalize();
        let y0 = z.cross(&x0);
        let (s, c) = roll.sin_cos();
        let x = x0 * c + y0 * s;
        let y = z.cross(&x);
        let m = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        Ok(Self::from_center(Rotation::from_matrix_unchecked(m), center))
    }

    /// Camera-to-world rotation `Rᵀ`.
    pub fn orientation(&self) -> Rotation {
        self.rotation.transpose()
    }

    /// `-Rᵀ t`.
    pub fn center(&self) -> Vector3<f64> {
        -self.rotation.matrix().tr_mul(&self.translation)
    }

    /// World direction of the camera +z axis.
    pub fn optical_axis(&self) -> Vector3<f64> {
        self.rotation.matrix().row(2).transpose()
    }

    pub fn transform_point(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.apply(world) + self.translation
    }
}

/// Serialized pose: rotation as a `[w, x, y, z]` quaternion plus translation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub rotation: Quat,
    pub translation: [f64; 3],
}

impl From<&CameraPose> for PoseRecord {
    fn from(p: &CameraPose) -> Self {
        Self {
            rotation: p.rotation.to_quaternion(),
            translation: p.translation.into(),
        }
    }
}

impl TryFrom<&PoseRecord> for CameraPose {
    type Error = Error;

    fn try_from(r: &PoseRecord) -> Result<Self> {
        Ok(CameraPose::new(
            Rotation::from_quaternion(r.rotation)?,
            Vector3::from(r.translation),
        ))
    }
}

/// Look-at point, scale and per-camera translation targets.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneFrame {
    pub lookat: Vector3<f64>,
    pub scale: f64,
    pub targets: Vec<Vector3<f64>>,
}

/// Least-squares point closest to every camera's optical axis.
pub fn closest_point_to_axes(poses: &[CameraPose]) -> Result<Vector3<f64>> {
    if poses.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 cameras, got {}",
            poses.len()
        )));
    }
    let mut a = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for p in poses {
        let d = p.optical_axis();
        let proj = Matrix3::identity() - d * d.transpose();
        a += proj;
        b += proj * p.center();
    }
    let eig = a.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0 && hi / lo < MAX_AXIS_CONDITION) {
        return Err(Error::DegenerateGeometry(format!(
            "optical axes are (nearly) parallel: condition number {:e}",
            hi / lo
        )));
    }
    a.cholesky()
        .map(|c| c.solve(&b))
        .ok_or_else(|| Error::DegenerateGeometry("normal matrix not positive definite".into()))
}

/// `scale · (R_i · origin + t_i)` for every camera: the translation of each
/// camera once the world origin moves to `origin` and the scene is scaled.
pub fn targets_with_origin(
    poses: &[CameraPose],
    origin: &Vector3<f64>,
    scale: f64,
) -> Vec<Vector3<f64>> {
    poses
        .iter()
        .map(|p| p.transform_point(origin) * scale)
        .collect()
}

/// Moves the world origin to the look-at point and scales so the first camera
/// is at unit distance from it.
pub fn normalize_scene(poses: &[CameraPose]) -> Result<SceneFrame> {
    let lookat = closest_point_to_axes(poses)?;
    let first = poses[0].transform_point(&lookat);
    let dist = first.norm();
    if !(dist > 1e-9) {
        return Err(Error::DegenerateScale(format!(
            "first camera is {dist:e} from the look-at point"
        )));
    }
    let scale = 1.0 / dist;
    Ok(SceneFrame {
        lookat,
        scale,
        targets: targets_with_origin(poses, &lookat, scale),
    })
}

/// Targets with the world origin at the first camera's center, using the
/// look-at frame's scale.
pub fn first_camera_frame_targets(poses: &[CameraPose]) -> Result<Vec<Vector3<f64>>> {
    let frame = normalize_scene(poses)?;
    Ok(targets_with_origin(poses, &poses[0].center(), frame.scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
        loop {
            let v = Vector3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let n = v.norm();
            if n > 0.1 && n <= 1.0 {
                return v / n;
            }
        }
    }

    fn look_at_rig(target: Vector3<f64>, radii: &[f64], seed: u64) -> Vec<CameraPose> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        radii
            .iter()
            .map(|&r| {
                let c = target + random_unit(&mut rng) * r;
                CameraPose::look_at(&c, &target, rng.gen_range(-3.0..3.0)).unwrap()
            })
            .collect()
    }

    #[test]
    fn pose_center_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = Rotation::random(&mut rng);
        let c = Vector3::new(1.0, -2.0, 0.5);
        let p = CameraPose::from_center(r, &c);
        assert!((p.center() - c).norm() < 1e-12);
        assert!(p.transform_point(&p.center()).norm() < 1e-9);
    }

    #[test]
    fn look_at_sees_target_on_positive_z() {
        let target = Vector3::new(0.3, 1.0, -2.0);
        for pose in look_at_rig(target, &[0.5, 1.0, 2.0, 3.0], 2) {
            let local = pose.transform_point(&target);
            assert!(local.x.abs() < 1e-12 && local.y.abs() < 1e-12 && local.z > 0.0);
            Rotation::from_matrix(*pose.rotation.matrix()).unwrap();
        }
    }

    #[test]
    fn two_intersecting_axes() {
        let p = Vector3::new(1.0, 2.0, 3.0);
        let poses = vec![
            CameraPose::look_at(&Vector3::new(4.0, 2.0, 3.0), &p, 0.1).unwrap(),
            CameraPose::look_at(&Vector3::new(1.0, -1.0, 5.0), &p, -0.7).unwrap(),
        ];
        let found = closest_point_to_axes(&poses).unwrap();
        assert!((found - p).norm() < 1e-9, "{found}");
    }

    #[test]
    fn parallel_axes_are_degenerate() {
        let r = Rotation::rot_x(0.3);
        let poses = vec![
            CameraPose::from_center(r, &Vector3::new(0.0, 0.0, 0.0)),
            CameraPose::from_center(r, &Vector3::new(1.0, 0.5, 0.0)),
        ];
        assert!(matches!(
            closest_point_to_axes(&poses),
            Err(Error::DegenerateGeometry(_))
        ));
        assert!(matches!(
            closest_point_to_axes(&poses[..1]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn closest_point_matches_pseudo_inverse_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let poses: Vec<CameraPose> = (0..5)
                .map(|_| {
                    let c = Vector3::from_fn(|_, _| rng.gen_range(-3.0..3.0));
                    CameraPose::from_center(Rotation::random(&mut rng), &c)
                })
                .collect();
            // Stack the perpendicular-distance residuals (I - d dᵀ)(p - o) into a
            // 15×3 system and solve with an explicit pseudo-inverse.
            let mut m = nalgebra::DMatrix::<f64>::zeros(15, 3);
            let mut rhs = nalgebra::DVector::<f64>::zeros(15);
            for (k, pose) in poses.iter().enumerate() {
                let d = pose.optical_axis();
                let proj = Matrix3::identity() - d * d.transpose();
                let o = pose.center();
                let po = proj * o;
                for r in 0..3 {
                    for c in 0..3 {
                        m[(3 * k + r, c)] = proj[(r, c)];
                    }
                    rhs[3 * k + r] = po[r];
                }
            }
            let pinv = m.clone().pseudo_inverse(1e-12).unwrap();
            let oracle = pinv * rhs;
            let found = closest_point_to_axes(&poses).unwrap();
            for r in 0..3 {
                assert!((found[r] - oracle[r]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn center_facing_targets() {
        let target = Vector3::new(0.5, -0.2, 1.5);
        let radii = [2.0, 1.0, 3.5, 0.7, 2.2];
        let poses = look_at_rig(target, &radii, 4);
        let frame = normalize_scene(&poses).unwrap();
        assert!((frame.lookat - target).norm() < 1e-9);
        assert!((frame.targets[0] - Vector3::new(0.0, 0.0, 1.0)).norm() < 1e-9);
        for (i, t) in frame.targets.iter().enumerate() {
            let expected = Vector3::new(0.0, 0.0, radii[i] / radii[0]);
            assert!((t - expected).norm() < 1e-7);
            let formula = (poses[i].translation + poses[i].rotation.apply(&frame.lookat)) * frame.scale;
            assert!((t - formula).norm() < 1e-9);
        }
    }

    #[test]
    fn targets_are_similarity_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let poses = look_at_rig(Vector3::new(1.0, 1.0, 0.0), &[1.0, 1.3, 0.8, 1.1], 6);
        // Jitter so the frame is not trivially center-facing.
        let poses: Vec<CameraPose> = poses
            .iter()
            .map(|p| {
                let j = Rotation::from_axis_angle(&random_unit(&mut rng), 0.05);
                CameraPose::from_center(p.rotation * j, &p.center())
            })
            .collect();
        let base = normalize_scene(&poses).unwrap();
        let q = Rotation::random(&mut rng);
        let k = 3.7;
        let shift = Vector3::new(-2.0, 0.4, 5.0);
        // World points map as x' = k Q x + shift.
        let moved: Vec<CameraPose> = poses
            .iter()
            .map(|p| {
                let c = q.apply(&p.center()) * k + shift;
                CameraPose::from_center(p.rotation * q.transpose(), &c)
            })
            .collect();
        let other = normalize_scene(&moved).unwrap();
        for (a, b) in base.targets.iter().zip(&other.targets) {
            assert!((a - b).norm() < 1e-7);
        }
    }

    #[test]
    fn first_camera_frame() {
        let poses = look_at_rig(Vector3::zeros(), &[1.0, 2.0, 1.5], 7);
        let targets = first_camera_frame_targets(&poses).unwrap();
        assert!(targets[0].norm() < 1e-12);
        let frame = normalize_scene(&poses).unwrap();
        for (i, t) in targets.iter().enumerate() {
            let expected = poses[i].rotation.apply(&(poses[0].center() - poses[i].center())) * frame.scale;
            assert!((t - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn camera_at_lookat_point_is_degenerate_scale() {
        let target = Vector3::zeros();
        let mut poses = look_at_rig(target, &[1.0, 1.0, 1.0], 8);
        poses[0] = CameraPose::from_center(poses[0].rotation, &target);
        assert!(matches!(normalize_scene(&poses), Err(Error::DegenerateScale(_))));
    }

    fn orbit(pose: &CameraPose, pivot: &Vector3<f64>, q: &Rotation) -> CameraPose {
        let c = pivot + q.apply(&(pose.center() - pivot));
        CameraPose::from_center(pose.rotation * q.transpose(), &c)
    }

    #[test]
    fn lookat_targets_decouple_from_rotation() {
        let target = Vector3::new(0.2, 0.1, -0.4);
        let poses = look_at_rig(target, &[1.0, 1.4, 0.9], 9);
        let base = normalize_scene(&poses).unwrap();
        let first = first_camera_frame_targets(&poses).unwrap();
        let i = 1;

        let mut rolled = poses.clone();
        rolled[i] = CameraPose::from_center(Rotation::rot_z(0.8) * poses[i].rotation, &poses[i].center());
        let r = normalize_scene(&rolled).unwrap();
        assert!((r.targets[i] - base.targets[i]).norm() < 1e-7);
        let rf = first_camera_frame_targets(&rolled).unwrap();
        assert!((rf[i] - first[i]).norm() > 1e-2);

        let mut orbited = poses.clone();
        orbited[i] = orbit(&poses[i], &target, &Rotation::from_axis_angle(&Vector3::new(1.0, 2.0, 0.5), 0.6));
        let o = normalize_scene(&orbited).unwrap();
        assert!((o.targets[i] - base.targets[i]).norm() < 1e-7);
        let of = first_camera_frame_targets(&orbited).unwrap();
        assert!((of[i] - first[i]).norm() > 1e-2);
    }

    #[test]
    fn lookat_origin_minimizes_orbital_sensitivity() {
        let target = Vector3::new(0.3, -0.5, 0.8);
        let poses = look_at_rig(target, &[1.0, 1.2, 0.8, 1.1], 10);
        let scale = normalize_scene(&poses).unwrap().scale;
        let h = 1e-4;
        let sensitivity = |origin: &Vector3<f64>, axis: &Vector3<f64>| -> f64 {
            let q = Rotation::from_axis_angle(axis, h);
            (0..poses.len())
                .map(|i| {
                    let t0 = targets_with_origin(&poses[i..=i], origin, scale)[0];
                    let moved = orbit(&poses[i], &target, &q);
                    let t1 = targets_with_origin(&[moved], origin, scale)[0];
                    (t1 - t0).norm() / h
                })
                .fold(0.0, f64::max)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let axis = random_unit(&mut rng);
            let at_lookat = sensitivity(&target, &axis);
            assert!(at_lookat <= 1e-5, "{at_lookat}");
            let offset = random_unit(&mut rng) * rng.gen_range(0.1..1.0);
            let elsewhere = sensitivity(&(target + offset), &axis);
            assert!(elsewhere > at_lookat);
        }
    }
}
