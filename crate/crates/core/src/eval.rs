//! Similarity-invariant pose metrics.
//!
//! Rotation metrics take camera orientations (camera to world); pose-level
//! helpers convert from [`CameraPose`] internally.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::CameraPose;
use crate::so3::{geodesic_distance, Rotation};

pub const ROTATION_THRESHOLDS_DEG: [f64; 4] = [5.0, 10.0, 15.0, 30.0];
pub const CENTER_THRESHOLDS: [f64; 3] = [0.1, 0.2, 0.3];
pub const TRANSLATION_THRESHOLD: f64 = 0.1;
pub const ROTATION_AUC_MAX_DEG: f64 = 60.0;
pub const CENTER_AUC_MAX: f64 = 0.4;
pub const AUC_STEPS: usize = 1000;
/// Largest accepted condition number of the translation alignment design.
pub const MAX_ALIGN_CONDITION: f64 = 1e8;

/// `x ↦ s·R·x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Rotation::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.apply(p) * self.scale + self.translation
    }

    pub fn apply_inverse(&self, q: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.matrix().tr_mul(&(q - self.translation)) / self.scale
    }

    pub fn inverse(&self) -> Self {
        let rotation = self.rotation.transpose();
        Self {
            scale: 1.0 / self.scale,
            rotation,
            translation: -rotation.apply(&self.translation) / self.scale,
        }
    }
}

fn check_lengths(a: usize, b: usize, min: usize) -> Result<()> {
    if a != b {
        return Err(Error::InvalidArgument(format!(
            "prediction has {a} cameras, ground truth {b}"
        )));
    }
    if a < min {
        return Err(Error::InvalidArgument(format!("need at least {min} cameras, got {a}")));
    }
    Ok(())
}

/// Least-squares similarity taking `pred` onto `gt` (Umeyama, 1991).
pub fn umeyama_align(pred: &[Vector3<f64>], gt: &[Vector3<f64>]) -> Result<SimilarityTransform> {
    check_lengths(pred.len(), gt.len(), 2)?;
    let n = pred.len() as f64;
    let mu_p = pred.iter().sum::<Vector3<f64>>() / n;
    let mu_g = gt.iter().sum::<Vector3<f64>>() / n;
    let var_p = pred.iter().map(|p| (p - mu_p).norm_squared()).sum::<f64>() / n;
    let spread = pred.iter().map(|p| p.norm_squared()).fold(0.0, f64::max);
    if !(var_p > 1e-24 * spread.max(1e-300)) {
        return Err(Error::DegenerateAlignment("predicted points coincide".into()));
    }
    let mut cov = Matrix3::zeros();
    for (p, g) in pred.iter().zip(gt) {
        cov += (g - mu_g) * (p - mu_p).transpose();
    }
    cov /= n;
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Vector3::new(1.0, 1.0, 1.0);
    if u.determinant() * v_t.determinant() < 0.0 {
        d.z = -1.0;
    }
    let rotation = Rotation::from_matrix_unchecked(u * Matrix3::from_diagonal(&d) * v_t);
    let scale = svd.singular_values.dot(&d) / var_p;
    if !(scale > 0.0) {
        return Err(Error::DegenerateAlignment(format!(
            "alignment scale {scale} is not positive"
        )));
    }
    let translation = mu_g - rotation.apply(&mu_p) * scale;
    Ok(SimilarityTransform {
        scale,
        rotation,
        translation,
    })
}

/// Distance of each aligned predicted center from its ground truth center.
/// With two cameras the alignment is exact and all errors are zero.
pub fn center_errors(pred: &[CameraPose], gt: &[CameraPose]) -> Result<Vec<f64>> {
    check_lengths(pred.len(), gt.len(), 2)?;
    if pred.len() == 2 {
        return Ok(vec![0.0; 2]);
    }
    let pc: Vec<_> = pred.iter().map(CameraPose::center).collect();
    let gc: Vec<_> = gt.iter().map(CameraPose::center).collect();
    let sim = umeyama_align(&pc, &gc)?;
    Ok(pc
        .iter()
        .zip(&gc)
        .map(|(p, g)| (g - sim.apply(p)).norm())
        .collect())
}

/// Fraction of aligned centers within `threshold · sigma` of the truth.
pub fn camera_center_accuracy(
    pred: &[CameraPose],
    gt: &[CameraPose],
    sigma: f64,
    threshold: f64,
) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(fraction_below(&center_errors(pred, gt)?, threshold * sigma))
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("scene scale must be positive, got {sigma}")));
    }
    Ok(())
}

fn fraction_below(errors: &[f64], threshold: f64) -> f64 {
    if errors.is_empty() {
        return 0.0;
    }
    errors.iter().filter(|&&e| e < threshold).count() as f64 / errors.len() as f64
}

/// Geodesic error (radians) of every relative orientation `O_iᵀ O_j`, `i < j`.
pub fn relative_rotation_errors(pred: &[Rotation], gt: &[Rotation]) -> Result<Vec<f64>> {
    check_lengths(pred.len(), gt.len(), 2)?;
    let mut out = Vec::with_capacity(pred.len() * (pred.len() - 1) / 2);
    for i in 0..pred.len() {
        for j in i + 1..pred.len() {
            let p = pred[i].relative_to(&pred[j]);
            let g = gt[i].relative_to(&gt[j]);
            out.push(geodesic_distance(&p, &g));
        }
    }
    Ok(out)
}

/// Fraction of camera pairs whose relative rotation error is below `threshold_deg`.
pub fn rotation_accuracy(pred: &[Rotation], gt: &[Rotation], threshold_deg: f64) -> Result<f64> {
    let errors = relative_rotation_errors(pred, gt)?;
    Ok(fraction_below(&errors, threshold_deg.to_radians()))
}

/// Which rotations enter the `R_i t` term of the translation alignment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignRotations {
    /// Rotations of the predicted poses; exact under changes of the predicted
    /// world frame.
    #[default]
    Predicted,
    GroundTruth,
}

/// Scale `s` and world shift `t` minimizing `Σ ‖t̂_i - (s t_i + R_i t)‖²`.
pub fn translation_align(pred: &[CameraPose], gt: &[CameraPose]) -> Result<(f64, Vector3<f64>)> {
    translation_align_with(pred, gt, AlignRotations::Predicted)
}

pub fn translation_align_with(
    pred: &[CameraPose],
    gt: &[CameraPose],
    rotations: AlignRotations,
) -> Result<(f64, Vector3<f64>)> {
    check_lengths(pred.len(), gt.len(), 2)?;
    let n = pred.len();
    let mut design = DMatrix::<f64>::zeros(3 * n, 4);
    let mut rhs = DVector::<f64>::zeros(3 * n);
    for (k, (p, g)) in pred.iter().zip(gt).enumerate() {
        let r = match rotations {
            AlignRotations::Predicted => p.rotation,
            AlignRotations::GroundTruth => g.rotation,
        };
        for row in 0..3 {
            design[(3 * k + row, 0)] = p.translation[row];
            for col in 0..3 {
                design[(3 * k + row, 1 + col)] = r.matrix()[(row, col)];
            }
            rhs[3 * k + row] = g.translation[row];
        }
    }
    let svd = design.svd(true, true);
    let sv = &svd.singular_values;
    let (lo, hi) = (sv.min(), sv.max());
    if !(lo > 0.0 && hi / lo < MAX_ALIGN_CONDITION) {
        return Err(Error::DegenerateAlignment(format!(
            "translation alignment is rank deficient (condition {:e})",
            hi / lo
        )));
    }
    let x = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::DegenerateAlignment(e.to_string()))?;
    let s = x[0];
    if !(s > 0.0) {
        return Err(Error::OrientationFlip(s));
    }
    Ok((s, Vector3::new(x[1], x[2], x[3])))
}

/// Residual `‖t̂_i - (s t_i + R_i t)‖` of every camera after alignment.
pub fn translation_errors(pred: &[CameraPose], gt: &[CameraPose]) -> Result<Vec<f64>> {
    let (s, t) = translation_align(pred, gt)?;
    Ok(pred
        .iter()
        .zip(gt)
        .map(|(p, g)| (g.translation - (p.translation * s + p.rotation.apply(&t))).norm())
        .collect())
}

pub fn translation_accuracy(
    pred: &[CameraPose],
    gt: &[CameraPose],
    sigma: f64,
    threshold: f64,
) -> Result<f64> {
    check_sigma(sigma)?;
    Ok(fraction_below(&translation_errors(pred, gt)?, threshold * sigma))
}

/// Normalized area under the accuracy-vs-threshold curve on `(0, max_threshold]`,
/// sampled at `AUC_STEPS` evenly spaced thresholds.
pub fn accuracy_curve_auc(errors: &[f64], max_threshold: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::InvalidArgument("no errors to integrate".into()));
    }
    if !(max_threshold > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "max threshold must be positive, got {max_threshold}"
        )));
    }
    let total: f64 = (1..=AUC_STEPS)
        .map(|k| fraction_below(errors, max_threshold * k as f64 / AUC_STEPS as f64))
        .sum();
    Ok(total / AUC_STEPS as f64)
}

/// Distance from the centroid of the camera centers to the furthest center.
pub fn scene_scale(poses: &[CameraPose]) -> f64 {
    if poses.is_empty() {
        return 0.0;
    }
    let centers: Vec<_> = poses.iter().map(CameraPose::center).collect();
    let mean = centers.iter().sum::<Vector3<f64>>() / centers.len() as f64;
    centers.iter().map(|c| (c - mean).norm()).fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAccuracy {
    pub threshold: f64,
    pub accuracy: f64,
}

/// Metrics for one scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub num_cameras: usize,
    pub scene_scale: f64,
    /// Thresholds in degrees.
    pub rotation_accuracy: Vec<ThresholdAccuracy>,
    /// Thresholds as fractions of the scene scale.
    pub camera_center_accuracy: Vec<ThresholdAccuracy>,
    pub translation_accuracy: ThresholdAccuracy,
    pub rotation_auc: f64,
    pub center_auc: f64,
}

impl EvalReport {
    /// Evaluates predicted against ground truth poses. A translation alignment
    /// that would need a negative scale counts every translation as wrong.
    pub fn evaluate(pred: &[CameraPose], gt: &[CameraPose], sigma: f64) -> Result<Self> {
        check_lengths(pred.len(), gt.len(), 2)?;
        check_sigma(sigma)?;
        let po: Vec<Rotation> = pred.iter().map(CameraPose::orientation).collect();
        let go: Vec<Rotation> = gt.iter().map(CameraPose::orientation).collect();
        let rot_err_deg: Vec<f64> = relative_rotation_errors(&po, &go)?
            .into_iter()
            .map(f64::to_degrees)
            .collect();
        let center_err: Vec<f64> = center_errors(pred, gt)?
            .into_iter()
            .map(|e| e / sigma)
            .collect();
        let trans_acc = match translation_errors(pred, gt) {
            Ok(errs) => fraction_below(&errs, TRANSLATION_THRESHOLD * sigma),
            Err(Error::OrientationFlip(_)) => 0.0,
            Err(e) => return Err(e),
        };
        Ok(Self {
            num_cameras: pred.len(),
            scene_scale: sigma,
            rotation_accuracy: ROTATION_THRESHOLDS_DEG
                .iter()
                .map(|&t| ThresholdAccuracy {
                    threshold: t,
                    accuracy: fraction_below(&rot_err_deg, t),
                })
                .collect(),
            camera_center_accuracy: CENTER_THRESHOLDS
                .iter()
                .map(|&t| ThresholdAccuracy {
                    threshold: t,
                    accuracy: fraction_below(&center_err, t),
                })
                .collect(),
            translation_accuracy: ThresholdAccuracy {
                threshold: TRANSLATION_THRESHOLD,
                accuracy: trans_acc,
            },
            rotation_auc: accuracy_curve_auc(&rot_err_deg, ROTATION_AUC_MAX_DEG)?,
            center_auc: accuracy_curve_auc(&center_err, CENTER_AUC_MAX)?,
        })
    }

    /// Column names matching [`EvalReport::csv_values`]. New thresholds are
    /// appended, never inserted.
    pub fn csv_columns() -> Vec<String> {
        let mut cols = vec!["num_cameras".to_string(), "scene_scale".to_string()];
        cols.extend(ROTATION_THRESHOLDS_DEG.iter().map(|t| format!("rot_acc@{t}")));
        cols.extend(CENTER_THRESHOLDS.iter().map(|t| format!("center_acc@{t}")));
        cols.push(format!("trans_acc@{TRANSLATION_THRESHOLD}"));
        cols.push(format!("rot_auc@{ROTATION_AUC_MAX_DEG}"));
        cols.push(format!("center_auc@{CENTER_AUC_MAX}"));
        cols
    }

    pub fn csv_values(&self) -> Vec<f64> {
        let mut v = vec![self.num_cameras as f64, self.scene_scale];
        v.extend(self.rotation_accuracy.iter().map(|a| a.accuracy));
        v.extend(self.camera_center_accuracy.iter().map(|a| a.accuracy));
        v.push(self.translation_accuracy.accuracy);
        v.push(self.rotation_auc);
        v.push(self.center_auc);
        v
    }

    /// All metric values except the scene description columns.
    pub fn metrics(&self) -> Vec<f64> {
        self.csv_values()[2..].to_vec()
    }
}

/// Element-wise mean of several reports' CSV values.
pub fn mean_csv_values(reports: &[EvalReport]) -> Vec<f64> {
    let cols = EvalReport::csv_columns().len();
    let mut acc = vec![0.0; cols];
    for r in reports {
        for (a, v) in acc.iter_mut().zip(r.csv_values()) {
            *a += v;
        }
    }
    if !reports.is_empty() {
        for a in &mut acc {
            *a /= reports.len() as f64;
        }
    }
    acc
}
