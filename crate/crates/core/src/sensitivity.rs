//! Minimum detectable pose change from fiducial localization accuracy, and
//! its propagation to a minimum detectable wrench through a calibrated
//! linear model.
//!
//! A corner displacement of `d_r` pixels on a tag `w_img` pixels wide and
//! `w_tag` mm wide is `Δl = d_r · w_tag / w_img` mm. For rotations, a turn
//! by `θ` moves a point at radius `r` pixels along a chord of
//! `2 r sin(θ/2)`, so a `d_r`-pixel chord is `Δθ = d_r · θ / (2 r sin(θ/2))`.
//!
//! Torques are in mN·m, which is the same unit as N·mm.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::CalibrationReport;
use crate::geometry::DeformationVector;
use crate::scalar::Real;
use crate::simulator::Wrench;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SensitivityError {
    #[error("invalid detection parameter: {0}")]
    InvalidParams(&'static str),
    #[error("axis {axis} uses a degree-{degree} model; propagation needs linear models")]
    NonlinearModel { axis: usize, degree: u8 },
    #[error("calibration has no model for axis {0}")]
    MissingAxis(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams<T> {
    /// Subpixel localization accuracy (px).
    pub d_r: T,
    /// Physical tag width (mm).
    pub w_tag_mm: T,
    /// Observed tag width (px).
    pub w_img_px: T,
    /// Half-diagonal of the tag image patch (px).
    pub r_px: T,
    /// Reference rotation angle (rad).
    pub theta_ref_rad: T,
}

impl<T: Real> Default for DetectionParams<T> {
    fn default() -> Self {
        Self {
            d_r: T::lit(0.25),
            w_tag_mm: T::lit(2.0),
            w_img_px: T::lit(37.0),
            r_px: T::lit(18.5),
            theta_ref_rad: T::pi() / T::lit(12.0),
        }
    }
}

impl<T: Real> DetectionParams<T> {
    pub fn validate(&self) -> Result<(), SensitivityError> {
        if !(self.d_r >= T::zero()) {
            return Err(SensitivityError::InvalidParams("d_r must be non-negative"));
        }
        if !(self.w_tag_mm > T::zero() && self.w_img_px > T::zero() && self.r_px > T::zero()) {
            return Err(SensitivityError::InvalidParams("widths and radius must be positive"));
        }
        if !(self.theta_ref_rad > T::zero() && self.theta_ref_rad < T::pi()) {
            return Err(SensitivityError::InvalidParams("theta_ref must lie in (0, pi)"));
        }
        Ok(())
    }
}

/// `Δl_min = (w_tag / w_img) · d_r` (mm).
pub fn min_translation<T: Real>(p: &DetectionParams<T>) -> T {
    p.w_tag_mm / p.w_img_px * p.d_r
}

/// `Δθ_min = θ / (2 r sin(θ/2)) · d_r` (rad).
pub fn min_rotation<T: Real>(p: &DetectionParams<T>) -> T {
    let theta = p.theta_ref_rad;
    theta / (T::lit(2.0) * p.r_px * (theta / T::lit(2.0)).sin()) * p.d_r
}

/// `[Δl, Δl, Δl, Δθ, Δθ, Δθ]`.
pub fn pose_floor<T: Real>(p: &DetectionParams<T>) -> DeformationVector<T> {
    let l = min_translation(p);
    let a = min_rotation(p);
    DeformationVector::from_array_unchecked([l, l, l, a, a, a])
}

/// `F_min,i = |slope_i| · floor[input_i]`. Intercepts are ignored.
pub fn propagate_wrench_floor<T: Real>(
    pose_floor: &DeformationVector<T>,
    calibration: &CalibrationReport<T>,
) -> Result<Wrench<T>, SensitivityError> {
    let mut out = [T::zero(); 6];
    for (axis, slot) in out.iter_mut().enumerate() {
        let m = calibration.model(axis).ok_or(SensitivityError::MissingAxis(axis))?;
        if m.degree != 1 {
            return Err(SensitivityError::NonlinearModel {
                axis,
                degree: m.degree,
            });
        }
        *slot = m.slope().abs() * pose_floor.component(m.input_component);
    }
    Ok(Wrench::from_array(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + DeserializeOwned"))]
pub struct SensitivityResult<T: Real> {
    pub delta_l_min_mm: T,
    pub delta_theta_min_rad: T,
    pub pose_floor: DeformationVector<T>,
    pub euler_convention: crate::geometry::EulerConvention,
    pub wrench_floor: Wrench<T>,
}

pub fn analyze<T: Real>(
    params: &DetectionParams<T>,
    calibration: &CalibrationReport<T>,
) -> Result<SensitivityResult<T>, SensitivityError> {
    params.validate()?;
    let floor = pose_floor(params);
    Ok(SensitivityResult {
        delta_l_min_mm: min_translation(params),
        delta_theta_min_rad: min_rotation(params),
        pose_floor: floor,
        euler_convention: Default::default(),
        wrench_floor: propagate_wrench_floor(&floor, calibration)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::AxisModel;

    fn report(slopes: [f64; 6], degree: u8) -> CalibrationReport<f64> {
        CalibrationReport {
            models: (0..6)
                .map(|axis| AxisModel {
                    axis,
                    input_component: axis,
                    coefficients: if degree == 1 {
                        vec![0.7, slopes[axis]]
                    } else {
                        vec![0.7, slopes[axis], 0.0, 1.0]
                    },
                    degree,
                    r2_train: 1.0,
                    r2_test: 1.0,
                    rmse_train: 0.0,
                    rmse_test: 0.0,
                })
                .collect(),
            split_fraction: 0.8,
            split_seed: 0,
            sample_count: 0,
            train_count: 0,
            test_count: 0,
        }
    }

    #[test]
    fn nominal_minima() {
        let p = DetectionParams::<f64>::default();
        assert!((min_translation(&p) - 0.0135).abs() < 1e-4);
        assert!((min_translation(&p) - 0.5 / 37.0).abs() < 1e-15);
        assert!((min_rotation(&p) - 0.0136).abs() < 1e-4);
    }

    #[test]
    fn zero_accuracy_and_homogeneity() {
        let p = DetectionParams::<f64> {
            d_r: 0.0,
            ..Default::default()
        };
        assert_eq!(min_translation(&p), 0.0);
        assert_eq!(min_rotation(&p), 0.0);
        let base = DetectionParams::<f64>::default();
        let wide = DetectionParams {
            w_img_px: 74.0,
            ..base
        };
        assert!((min_translation(&wide) - min_translation(&base) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn small_angle_limit() {
        let p = DetectionParams::<f64> {
            theta_ref_rad: 1e-8,
            ..Default::default()
        };
        assert!((min_rotation(&p) - 0.25 / 18.5).abs() < 1e-12);
    }

    #[test]
    fn identity_slopes_reproduce_floor() {
        let p = DetectionParams::<f64>::default();
        let floor = pose_floor(&p);
        let w = propagate_wrench_floor(&floor, &report([1.0; 6], 1)).unwrap();
        assert_eq!(w.to_array(), floor.to_array());
        let neg = propagate_wrench_floor(&floor, &report([-2.0; 6], 1)).unwrap();
        assert_eq!(neg.fx, 2.0 * floor.dl_x);
    }

    #[test]
    fn nonlinear_models_rejected() {
        let floor = pose_floor(&DetectionParams::<f64>::default());
        assert_eq!(
            propagate_wrench_floor(&floor, &report([1.0; 6], 3)),
            Err(SensitivityError::NonlinearModel { axis: 0, degree: 3 })
        );
    }

    #[test]
    fn param_validation() {
        let bad = DetectionParams::<f64> {
            theta_ref_rad: 4.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(DetectionParams::<f64>::default().validate().is_ok());
    }
}
