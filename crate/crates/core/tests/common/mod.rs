#![allow(dead_code)]

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use ringtag_core::geometry::{apply_delta, delta_from_poses, DeformationVector, RigidTransform};
use ringtag_core::pose::{estimate_pose, CorrespondenceSet, SolverConfig};
use ringtag_core::simulator::{nominal_reference_pose, Scene, Simulator};

pub const T_ENVELOPE: f64 = 1.0;
pub const A_ENVELOPE: f64 = 0.15;

pub fn random_delta(rng: &mut ChaCha8Rng) -> DeformationVector<f64> {
    let mut v = [0.0; 6];
    for (i, c) in v.iter_mut().enumerate() {
        let m = if i < 3 { T_ENVELOPE } else { A_ENVELOPE };
        *c = rng.random_range(-m..=m);
    }
    DeformationVector::from_array(v).unwrap()
}

pub fn random_pose(rng: &mut ChaCha8Rng) -> RigidTransform<f64> {
    apply_delta(&nominal_reference_pose(), &random_delta(rng))
}

/// Per-component error of `est` relative to `truth`: (max |Δt| mm, max |Δθ| rad).
pub fn component_errors(truth: &RigidTransform<f64>, est: &RigidTransform<f64>) -> (f64, f64) {
    let d = delta_from_poses(truth, est).unwrap();
    let t = d.translation().amax();
    let a = d.angles().amax();
    (t, a)
}

/// (‖Δt‖ mm, rotation angle rad).
pub fn pose_error(truth: &RigidTransform<f64>, est: &RigidTransform<f64>) -> (f64, f64) {
    let dt: Vector3<f64> = est.translation() - truth.translation();
    (dt.norm(), truth.rotation_angle_to(est))
}

pub fn observe(scene: &Scene<f64>, pose: &RigidTransform<f64>, sigma: f64, seed: u64) -> CorrespondenceSet<f64> {
    Simulator::new(seed)
        .observe(&scene.camera, &scene.layout, pose, sigma, 0.0)
        .unwrap()
        .0
}

pub fn estimate(scene: &Scene<f64>, corrs: &CorrespondenceSet<f64>) -> RigidTransform<f64> {
    estimate_pose(&scene.camera, corrs, &SolverConfig::default()).unwrap().pose
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn std_error(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

/// Simulated sweep → estimated poses → pairs relative to an estimated
/// reference (mean of five zero-wrench frames).
pub fn estimated_pairs(
    scene: &Scene<f64>,
    noise: &ringtag_core::simulator::NoiseModel,
    samples_per_axis: usize,
) -> Vec<ringtag_core::calibration::CalibrationPair<f64>> {
    use ringtag_core::simulator::{full_sweep, Wrench};
    let refs: Vec<_> = (0..5)
        .map(|k| {
            let mut sim = Simulator::new(ringtag_core::seed::derive_seed(noise.seed ^ 0x5EED, k));
            let f = sim.frame(scene, &Wrench::zero(), noise.corner_sigma, 0.0).unwrap();
            estimate(scene, &f.correspondences)
        })
        .collect();
    let reference = ringtag_core::geometry::mean_pose(&refs).unwrap();
    let obs: Vec<_> = full_sweep(scene, noise, samples_per_axis)
        .unwrap()
        .into_iter()
        .map(|s| (s.wrench, estimate(scene, &s.frame.correspondences)))
        .collect();
    ringtag_core::calibration::pairs_from_poses(&reference, &obs).unwrap()
}
