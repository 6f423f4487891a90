//! Pose-based force/torque sensing for a fingertip whose internal camera
//! tracks a ring of fiducial tags.
//!
//! Everything numeric is generic over [`scalar::Real`] (`f64` or `f32`). The
//! aliases below fix the scalar to `f64`; the [`f32`] module mirrors them.

// `!(x > 0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod calibration;
pub mod contact;
pub mod geometry;
pub mod layout;
pub mod pose;
pub mod scalar;
pub mod seed;
pub mod sensitivity;
pub mod simulator;

pub type RigidTransform = geometry::RigidTransform<f64>;
pub type DeformationVector = geometry::DeformationVector<f64>;
pub type PinholeCamera = geometry::PinholeCamera<f64>;
pub type NormalMatrix6 = geometry::NormalMatrix6<f64>;
pub type TagLayout = layout::TagLayout<f64>;
pub type Correspondence = pose::Correspondence<f64>;
pub type CorrespondenceSet = pose::CorrespondenceSet<f64>;
pub type PoseEstimate = pose::PoseEstimate<f64>;
pub type SolverConfig = pose::SolverConfig<f64>;
pub type Wrench = simulator::Wrench<f64>;
pub type ComplianceModel = simulator::ComplianceModel<f64>;
pub type Scene = simulator::Scene<f64>;
pub type AxisModel = calibration::AxisModel<f64>;
pub type CalibrationReport = calibration::CalibrationReport<f64>;
pub type DetectionParams = sensitivity::DetectionParams<f64>;
pub type SensitivityResult = sensitivity::SensitivityResult<f64>;
pub type ContactConfig = contact::ContactConfig<f64>;
pub type EpisodeLog = contact::EpisodeLog<f64>;

/// Single-precision aliases.
pub mod f32 {
    use super::*;

    pub type RigidTransform = geometry::RigidTransform<f32>;
    pub type DeformationVector = geometry::DeformationVector<f32>;
    pub type PinholeCamera = geometry::PinholeCamera<f32>;
    pub type TagLayout = layout::TagLayout<f32>;
    pub type CorrespondenceSet = pose::CorrespondenceSet<f32>;
    pub type PoseEstimate = pose::PoseEstimate<f32>;
    pub type Wrench = simulator::Wrench<f32>;
    pub type ComplianceModel = simulator::ComplianceModel<f32>;
    pub type DetectionParams = sensitivity::DetectionParams<f32>;
}
