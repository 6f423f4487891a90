//! Plate pose from a multi-tag corner correspondence set.
//!
//! All visible tag corners are pooled into one correspondence set and a
//! single pose `T_cam←ref` minimizing the summed squared reprojection error
//! is estimated: closed-form EPnP for the initial guess, Levenberg-Marquardt
//! on SE(3) for the refinement.

mod epnp;
mod refine;

use std::collections::BTreeSet;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, PinholeCamera, RigidTransform};
use crate::layout::{LayoutError, VisibilityMode};
use crate::scalar::Real;

pub use epnp::epnp_initialize;
pub use refine::{jacobian_reprojection, reprojection_cost, refine_lm};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoseError {
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{count} correspondences, at least {required} required")]
    TooFewCorrespondences { count: usize, required: usize },
    #[error("duplicate correspondence for tag {tag_id} corner {corner}")]
    DuplicateCorrespondence { tag_id: u32, corner: u8 },
    #[error("corner index {0} out of range 0..=3")]
    InvalidCornerIndex(u8),
    #[error("image point of tag {tag_id} corner {corner} lies outside the image")]
    PointOutsideImage { tag_id: u32, corner: u8 },
    #[error("reference points are degenerate (collinear or coincident)")]
    DegenerateConfiguration,
    #[error("no sign choice places the points in front of the camera")]
    BehindCamera,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
}

/// One tag corner: its position in the plate frame and its observed image
/// location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence<T: Real> {
    pub tag_id: u32,
    pub corner: u8,
    pub point_ref: Vector3<T>,
    pub point_img: Vector2<T>,
}

/// Pooled corners of all visible tags in a frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrespondenceSet<T: Real> {
    entries: Vec<Correspondence<T>>,
}

impl<T: Real> CorrespondenceSet<T> {
    /// Rejects duplicate `(tag_id, corner)` pairs and corner indices above 3.
    pub fn new(entries: Vec<Correspondence<T>>) -> Result<Self, PoseError> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if e.corner > 3 {
                return Err(PoseError::InvalidCornerIndex(e.corner));
            }
            if !seen.insert((e.tag_id, e.corner)) {
                return Err(PoseError::DuplicateCorrespondence {
                    tag_id: e.tag_id,
                    corner: e.corner,
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[Correspondence<T>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tag_ids(&self) -> BTreeSet<u32> {
        self.entries.iter().map(|e| e.tag_id).collect()
    }

    /// Keeps only entries whose tag is not masked.
    pub fn without_tags(&self, mask: &BTreeSet<u32>) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .filter(|e| !mask.contains(&e.tag_id))
                .copied()
                .collect(),
        }
    }

    /// Checks the minimum tag/corner count for `mode` and that every image
    /// point lies inside the camera's image.
    pub fn validate_for(&self, camera: &PinholeCamera<T>, mode: VisibilityMode) -> Result<(), PoseError> {
        let tags = self.tag_ids().len();
        if tags < mode.min_tags() {
            return Err(LayoutError::TooFewTagsVisible {
                visible: tags,
                required: mode.min_tags(),
            }
            .into());
        }
        let required = 4 * mode.min_tags();
        if self.entries.len() < required {
            return Err(PoseError::TooFewCorrespondences {
                count: self.entries.len(),
                required,
            });
        }
        for e in &self.entries {
            if !camera.contains(&e.point_img) {
                return Err(PoseError::PointOutsideImage {
                    tag_id: e.tag_id,
                    corner: e.corner,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig<T> {
    pub max_iterations: usize,
    /// Relative cost decrease below which an accepted step ends the solve.
    pub cost_tolerance: T,
    /// Parameter-update norm below which the solve ends.
    pub step_tolerance: T,
    pub initial_damping: T,
    pub damping_up: T,
    pub damping_down: T,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            cost_tolerance: T::lit(1e-10),
            step_tolerance: T::lit(1e-12),
            initial_damping: T::lit(1e-3),
            damping_up: T::lit(10.0),
            damping_down: T::lit(1.0 / 3.0),
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<(), PoseError> {
        if self.max_iterations == 0 {
            return Err(PoseError::InvalidConfig("max_iterations must be at least 1"));
        }
        if !(self.cost_tolerance > T::zero()) || !(self.step_tolerance > T::zero()) {
            return Err(PoseError::InvalidConfig("tolerances must be positive"));
        }
        if !(self.initial_damping > T::zero()) {
            return Err(PoseError::InvalidConfig("initial damping must be positive"));
        }
        if !(self.damping_up > T::one()) || !(self.damping_down < T::one()) || !(self.damping_down > T::zero()) {
            return Err(PoseError::InvalidConfig("require damping_up > 1 > damping_down > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseEstimate<T: Real> {
    pub pose: RigidTransform<T>,
    /// Per-coordinate RMS of the reprojection residuals (px).
    pub rms_reprojection_error: T,
    pub iterations_used: usize,
    pub converged: bool,
    /// Cost at the initial pose followed by the cost after every accepted
    /// step.
    pub cost_history: Vec<T>,
}

/// EPnP initialization followed by Levenberg-Marquardt refinement.
pub fn estimate_pose<T: Real>(
    camera: &PinholeCamera<T>,
    corrs: &CorrespondenceSet<T>,
    config: &SolverConfig<T>,
) -> Result<PoseEstimate<T>, PoseError> {
    estimate_pose_in_mode(camera, corrs, config, VisibilityMode::Standard)
}

pub fn estimate_pose_in_mode<T: Real>(
    camera: &PinholeCamera<T>,
    corrs: &CorrespondenceSet<T>,
    config: &SolverConfig<T>,
    mode: VisibilityMode,
) -> Result<PoseEstimate<T>, PoseError> {
    config.validate()?;
    corrs.validate_for(camera, mode)?;
    let init = epnp_initialize(camera, corrs)?;
    refine_lm(camera, corrs, &init, config)
}

/// Skips EPnP and refines from `previous` (temporal warm start).
pub fn estimate_pose_warm<T: Real>(
    camera: &PinholeCamera<T>,
    corrs: &CorrespondenceSet<T>,
    previous: &RigidTransform<T>,
    config: &SolverConfig<T>,
) -> Result<PoseEstimate<T>, PoseError> {
    config.validate()?;
    corrs.validate_for(camera, VisibilityMode::Standard)?;
    refine_lm(camera, corrs, previous, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::apply_delta;
    use crate::geometry::DeformationVector;
    use crate::layout::TagLayout;

    pub(crate) fn project_layout(
        camera: &PinholeCamera<f64>,
        layout: &TagLayout<f64>,
        pose: &RigidTransform<f64>,
    ) -> CorrespondenceSet<f64> {
        let entries = layout
            .all_corners()
            .into_iter()
            .map(|(tag_id, corner, p)| Correspondence {
                tag_id,
                corner,
                point_ref: p,
                point_img: camera.project(&pose.transform_point(&p)).unwrap(),
            })
            .collect();
        CorrespondenceSet::new(entries).unwrap()
    }

    fn nominal() -> RigidTransform<f64> {
        RigidTransform::from_translation(Vector3::new(0.0, 0.0, 10.0))
    }

    #[test]
    fn duplicate_and_corner_checks() {
        let c = Correspondence {
            tag_id: 1,
            corner: 0,
            point_ref: Vector3::zeros(),
            point_img: Vector2::new(1.0, 1.0),
        };
        assert_eq!(
            CorrespondenceSet::new(vec![c, c]),
            Err(PoseError::DuplicateCorrespondence { tag_id: 1, corner: 0 })
        );
        let bad = Correspondence { corner: 4, ..c };
        assert_eq!(CorrespondenceSet::new(vec![bad]), Err(PoseError::InvalidCornerIndex(4)));
    }

    #[test]
    fn single_tag_needs_degraded_mode() {
        let cam = PinholeCamera::default();
        let layout = TagLayout::default_layout();
        let corrs = project_layout(&cam, &layout, &nominal());
        let mask: BTreeSet<u32> = (0..34).collect();
        let one = corrs.without_tags(&mask);
        assert!(matches!(
            estimate_pose(&cam, &one, &SolverConfig::default()),
            Err(PoseError::Layout(LayoutError::TooFewTagsVisible { visible: 1, .. }))
        ));
        let est = estimate_pose_in_mode(&cam, &one, &SolverConfig::default(), VisibilityMode::Degraded).unwrap();
        assert!((est.pose.translation() - nominal().translation()).norm() < 1e-6);
    }

    #[test]
    fn out_of_image_point_rejected() {
        let cam = PinholeCamera::default();
        let layout = TagLayout::default_layout();
        let mut corrs = project_layout(&cam, &layout, &nominal());
        corrs.entries[3].point_img.x = -1.0;
        assert!(matches!(
            estimate_pose(&cam, &corrs, &SolverConfig::default()),
            Err(PoseError::PointOutsideImage { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::<f64>::default();
        assert!(c.validate().is_ok());
        c.damping_down = 1.5;
        assert!(c.validate().is_err());
        let c = SolverConfig::<f64> {
            step_tolerance: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn estimate_is_deterministic_and_exact_without_noise() {
        let cam = PinholeCamera::default();
        let layout = TagLayout::default_layout();
        let truth = apply_delta(
            &nominal(),
            &DeformationVector::from_array([0.3, -0.2, 0.4, 0.05, -0.1, 0.12]).unwrap(),
        );
        let corrs = project_layout(&cam, &layout, &truth);
        let a = estimate_pose(&cam, &corrs, &SolverConfig::default()).unwrap();
        let b = estimate_pose(&cam, &corrs, &SolverConfig::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.converged);
        assert!((a.pose.translation() - truth.translation()).norm() < 1e-7);
        assert!(a.pose.rotation_angle_to(&truth) < 1e-9);
    }
}
