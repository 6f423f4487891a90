//! Compliant-ring simulator used as ground truth.
//!
//! The ring is modeled as a linear 6-D compliance mapping an applied wrench
//! to the plate's pose change, with an optional per-component cubic
//! softening term. Frames are synthesized by moving the plate, projecting
//! the tag corners through the camera, dropping tags at random and jittering
//! the corners with Gaussian noise in image space.

use std::collections::BTreeSet;

use nalgebra::{Matrix6, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{apply_delta, DeformationVector, GeometryError, PinholeCamera, RigidTransform};
use crate::layout::{LayoutError, TagLayout};
use crate::pose::{Correspondence, CorrespondenceSet};
use crate::scalar::Real;
use crate::seed::derive_seed;

/// Nominal plate distance from the tip camera (mm).
pub const WORKING_DISTANCE_MM: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("deformation component {component} = {value} exceeds limit {limit}")]
    DeformationLimitExceeded { component: usize, value: f64, limit: f64 },
    #[error("corner {corner} of tag {tag_id} falls outside the image")]
    CornerOutOfImage { tag_id: u32, corner: u8 },
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid compliance model: {0}")]
    InvalidCompliance(String),
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("wrench axis {0} out of range 0..=5")]
    InvalidAxis(usize),
}

/// Forces (mN) and torques (mN·m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wrench<T> {
    pub fx: T,
    pub fy: T,
    pub fz: T,
    pub tx: T,
    pub ty: T,
    pub tz: T,
}

impl<T: Real> Wrench<T> {
    pub fn zero() -> Self {
        Self::from_array([T::zero(); 6])
    }

    pub fn from_array(v: [T; 6]) -> Self {
        Self {
            fx: v[0],
            fy: v[1],
            fz: v[2],
            tx: v[3],
            ty: v[4],
            tz: v[5],
        }
    }

    pub fn to_array(&self) -> [T; 6] {
        [self.fx, self.fy, self.fz, self.tx, self.ty, self.tz]
    }

    /// Wrench with a single nonzero component.
    pub fn single_axis(axis: usize, magnitude: T) -> Result<Self, SimError> {
        if axis > 5 {
            return Err(SimError::InvalidAxis(axis));
        }
        let mut v = [T::zero(); 6];
        v[axis] = magnitude;
        Ok(Self::from_array(v))
    }

    pub fn component(&self, axis: usize) -> T {
        self.to_array()[axis]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Linear wrench-to-deformation map with a validity envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplianceModel<T: Real> {
    compliance: Matrix6<T>,
    deformation_limit: [T; 6],
    cubic_softening: [T; 6],
}

impl<T: Real> ComplianceModel<T> {
    /// Requires a symmetric positive definite matrix and positive limits.
    pub fn new(compliance: Matrix6<T>, deformation_limit: [T; 6]) -> Result<Self, SimError> {
        let asym = (compliance - compliance.transpose()).amax();
        if asym > T::structural_tolerance() * compliance.amax().max(T::one()) {
            return Err(SimError::InvalidCompliance("matrix is not symmetric".into()));
        }
        if compliance.cholesky().is_none() {
            return Err(SimError::InvalidCompliance("matrix is not positive definite".into()));
        }
        if deformation_limit.iter().any(|l| !(*l > T::zero())) {
            return Err(SimError::InvalidCompliance("deformation limits must be positive".into()));
        }
        Ok(Self {
            compliance,
            deformation_limit,
            cubic_softening: [T::zero(); 6],
        })
    }

    /// Adds `k_i · d_i³` to each linear deformation component `d_i`.
    pub fn with_cubic_softening(mut self, k: [T; 6]) -> Self {
        self.cubic_softening = k;
        self
    }

    pub fn compliance(&self) -> &Matrix6<T> {
        &self.compliance
    }

    pub fn deformation_limit(&self) -> &[T; 6] {
        &self.deformation_limit
    }

    pub fn cubic_softening(&self) -> &[T; 6] {
        &self.cubic_softening
    }

    pub fn is_linear(&self) -> bool {
        self.cubic_softening.iter().all(|k| *k == T::zero())
    }

    /// `C · F` (plus the softening term), checked against the limits.
    pub fn deform(&self, wrench: &Wrench<T>) -> Result<DeformationVector<T>, SimError> {
        let d = self.deform_unchecked(wrench);
        for i in 0..6 {
            let limit = self.deformation_limit[i];
            if !d[i].is_finite() || d[i].abs() > limit {
                return Err(SimError::DeformationLimitExceeded {
                    component: i,
                    value: d[i].as_f64(),
                    limit: limit.as_f64(),
                });
            }
        }
        Ok(DeformationVector::from_array(d)?)
    }

    fn deform_unchecked(&self, wrench: &Wrench<T>) -> [T; 6] {
        let f = Vector6::from_row_slice(&wrench.to_array());
        let lin = self.compliance * f;
        let mut out = [T::zero(); 6];
        for i in 0..6 {
            out[i] = lin[i] + self.cubic_softening[i] * lin[i] * lin[i] * lin[i];
        }
        out
    }

    /// Largest single-axis magnitude whose deformation stays inside the
    /// limits (bisection, since the softening term is nonlinear).
    pub fn max_single_axis_magnitude(&self, axis: usize) -> Result<T, SimError> {
        let within = |m: T| -> Result<bool, SimError> {
            let d = self.deform_unchecked(&Wrench::single_axis(axis, m)?);
            let neg = self.deform_unchecked(&Wrench::single_axis(axis, -m)?);
            Ok((0..6).all(|i| {
                d[i].abs() <= self.deformation_limit[i] && neg[i].abs() <= self.deformation_limit[i]
            }))
        };
        let mut hi = T::one();
        while within(hi)? {
            hi *= T::lit(2.0);
            if hi > T::lit(1e12) {
                return Ok(hi);
            }
        }
        let mut lo = T::zero();
        for _ in 0..200 {
            let mid = (lo + hi) / T::lit(2.0);
            if within(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

impl ComplianceModel<f64> {
    /// Diagonal compliance whose entries map the nominal wrench sensitivity
    /// vector `[4.30, 4.22, 9.93, 0.32, 0.13, 8.55]` (mN, mN·m) onto the pose
    /// sensitivity `[0.0135; 3, 0.0136; 3]` (mm, rad). Limits: 1 mm, 0.15 rad.
    pub fn default_model() -> Self {
        let diag = Vector6::new(
            0.0135 / 4.30,
            0.0135 / 4.22,
            0.0135 / 9.93,
            0.0136 / 0.32,
            0.0136 / 0.13,
            0.0136 / 8.55,
        );
        Self::new(Matrix6::from_diagonal(&diag), [1.0, 1.0, 1.0, 0.15, 0.15, 0.15])
            .expect("default compliance is valid")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: DeserializeOwned"))]
struct ComplianceFile<T> {
    compliance: [[T; 6]; 6],
    deformation_limit: [T; 6],
    #[serde(default)]
    cubic_softening: Option<[T; 6]>,
}

impl<T: Real + Serialize> Serialize for ComplianceModel<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let c = &self.compliance;
        let rows: [[T; 6]; 6] = std::array::from_fn(|i| std::array::from_fn(|j| c[(i, j)]));
        ComplianceFile {
            compliance: rows,
            deformation_limit: self.deformation_limit,
            cubic_softening: Some(self.cubic_softening),
        }
        .serialize(s)
    }
}

impl<'de, T: Real + DeserializeOwned> Deserialize<'de> for ComplianceModel<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let f = ComplianceFile::<T>::deserialize(d)?;
        let m = Matrix6::from_fn(|i, j| f.compliance[i][j]);
        let model = Self::new(m, f.deformation_limit).map_err(serde::de::Error::custom)?;
        Ok(match f.cubic_softening {
            Some(k) => model.with_cubic_softening(k),
            None => model,
        })
    }
}

/// Image-space corner noise and tag dropout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Standard deviation of each corner coordinate (px).
    pub corner_sigma: f64,
    /// Independent per-tag dropout probability.
    pub occlusion_probability: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            corner_sigma: 0.25,
            occlusion_probability: 0.0,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless(seed: u64) -> Self {
        Self {
            corner_sigma: 0.0,
            occlusion_probability: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.corner_sigma >= 0.0) || !self.corner_sigma.is_finite() {
            return Err(SimError::InvalidNoise("corner_sigma must be finite and >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.occlusion_probability) {
            return Err(SimError::InvalidNoise("occlusion_probability must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Everything about the sensor that stays fixed during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene<T: Real> {
    pub camera: PinholeCamera<T>,
    pub layout: TagLayout<T>,
    pub reference_pose: RigidTransform<T>,
    pub compliance: ComplianceModel<T>,
}

impl Scene<f64> {
    /// Default camera, 35-tag layout, plate facing the camera at the working
    /// distance, default compliance.
    pub fn default_scene() -> Self {
        Self {
            camera: PinholeCamera::default(),
            layout: TagLayout::default_layout(),
            reference_pose: nominal_reference_pose(),
            compliance: ComplianceModel::default_model(),
        }
    }
}

/// Plate parallel to the image plane, centered on the optical axis.
pub fn nominal_reference_pose<T: Real>() -> RigidTransform<T> {
    RigidTransform::from_translation(nalgebra::Vector3::new(T::zero(), T::zero(), T::lit(WORKING_DISTANCE_MM)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFrame<T: Real> {
    pub correspondences: CorrespondenceSet<T>,
    pub ground_truth: RigidTransform<T>,
    pub deformation: DeformationVector<T>,
    pub occluded: BTreeSet<u32>,
}

/// Seeded frame generator. Not shareable while generating; parallel use
/// takes one simulator per task with seeds from [`derive_seed`].
#[derive(Debug, Clone)]
pub struct Simulator {
    rng: ChaCha8Rng,
}

impl Simulator {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Observes the plate at an explicit pose.
    pub fn observe<T: Real>(
        &mut self,
        camera: &PinholeCamera<T>,
        layout: &TagLayout<T>,
        pose: &RigidTransform<T>,
        corner_sigma: f64,
        occlusion_probability: f64,
    ) -> Result<(CorrespondenceSet<T>, BTreeSet<u32>), SimError> {
        let mut occluded = BTreeSet::new();
        for t in layout.tags() {
            let u: f64 = self.rng.random();
            if u < occlusion_probability {
                occluded.insert(t.tag_id);
            }
        }
        let visible = layout.visible_subset(&occluded)?;
        let mut entries = Vec::with_capacity(visible.corner_count());
        for (tag_id, corner, p) in visible.all_corners() {
            let cam_pt = pose.transform_point(&p);
            let mut uv = camera
                .project(&cam_pt)
                .map_err(|_| SimError::CornerOutOfImage { tag_id, corner })?;
            if corner_sigma > 0.0 {
                let nu: f64 = self.rng.sample(StandardNormal);
                let nv: f64 = self.rng.sample(StandardNormal);
                uv.x += T::lit(corner_sigma * nu);
                uv.y += T::lit(corner_sigma * nv);
            }
            if !camera.contains(&uv) {
                return Err(SimError::CornerOutOfImage { tag_id, corner });
            }
            entries.push(Correspondence {
                tag_id,
                corner,
                point_ref: p,
                point_img: uv,
            });
        }
        let set = CorrespondenceSet::new(entries).expect("layout corners are unique");
        Ok((set, occluded))
    }

    /// Deforms the plate under `wrench` and observes it.
    pub fn frame<T: Real>(
        &mut self,
        scene: &Scene<T>,
        wrench: &Wrench<T>,
        corner_sigma: f64,
        occlusion_probability: f64,
    ) -> Result<SyntheticFrame<T>, SimError> {
        let deformation = scene.compliance.deform(wrench)?;
        let ground_truth = apply_delta(&scene.reference_pose, &deformation);
        let (correspondences, occluded) = self.observe(
            &scene.camera,
            &scene.layout,
            &ground_truth,
            corner_sigma,
            occlusion_probability,
        )?;
        Ok(SyntheticFrame {
            correspondences,
            ground_truth,
            deformation,
            occluded,
        })
    }
}

/// One frame from a fresh generator seeded with `noise.seed`.
pub fn synthesize_frame<T: Real>(
    camera: &PinholeCamera<T>,
    layout: &TagLayout<T>,
    reference_pose: &RigidTransform<T>,
    wrench: &Wrench<T>,
    compliance: &ComplianceModel<T>,
    noise: &NoiseModel,
) -> Result<SyntheticFrame<T>, SimError> {
    noise.validate()?;
    let scene = Scene {
        camera: *camera,
        layout: layout.clone(),
        reference_pose: *reference_pose,
        compliance: compliance.clone(),
    };
    Simulator::new(noise.seed).frame(&scene, wrench, noise.corner_sigma, noise.occlusion_probability)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSample<T: Real> {
    pub axis: usize,
    pub magnitude: T,
    pub wrench: Wrench<T>,
    pub frame: SyntheticFrame<T>,
}

/// Seed of sample `index` on `axis` within a sweep seeded with `seed`.
pub fn sample_seed(seed: u64, axis: usize, index: usize) -> u64 {
    derive_seed(derive_seed(seed, axis as u64), index as u64)
}

/// One frame per magnitude with the wrench applied along `axis` only, in
/// input order. Each sample has its own derived noise stream.
pub fn sweep_dataset<T: Real>(
    axis: usize,
    magnitudes: &[T],
    scene: &Scene<T>,
    noise: &NoiseModel,
) -> Result<Vec<SweepSample<T>>, SimError> {
    noise.validate()?;
    if axis > 5 {
        return Err(SimError::InvalidAxis(axis));
    }
    magnitudes
        .iter()
        .enumerate()
        .map(|(i, &magnitude)| {
            let wrench = Wrench::single_axis(axis, magnitude)?;
            let mut sim = Simulator::new(sample_seed(noise.seed, axis, i));
            let frame = sim.frame(scene, &wrench, noise.corner_sigma, noise.occlusion_probability)?;
            Ok(SweepSample {
                axis,
                magnitude,
                wrench,
                frame,
            })
        })
        .collect()
}

/// `count` magnitudes evenly spaced over `±fraction` of the largest
/// admissible single-axis magnitude.
pub fn default_magnitudes<T: Real>(
    compliance: &ComplianceModel<T>,
    axis: usize,
    count: usize,
    fraction: T,
) -> Result<Vec<T>, SimError> {
    let max = compliance.max_single_axis_magnitude(axis)? * fraction;
    Ok(match count {
        0 => Vec::new(),
        1 => vec![T::zero()],
        _ => {
            let step = (max + max) / T::from_usize(count - 1).unwrap();
            (0..count)
                .map(|i| -max + step * T::from_usize(i).unwrap())
                .collect()
        }
    })
}

/// Sweeps every axis in turn with `samples_per_axis` magnitudes each.
pub fn full_sweep<T: Real>(
    scene: &Scene<T>,
    noise: &NoiseModel,
    samples_per_axis: usize,
) -> Result<Vec<SweepSample<T>>, SimError> {
    let mut out = Vec::with_capacity(6 * samples_per_axis);
    for axis in 0..6 {
        let mags = default_magnitudes(&scene.compliance, axis, samples_per_axis, T::lit(0.8))?;
        out.extend(sweep_dataset(axis, &mags, scene, noise)?);
    }
    Ok(out)
}
