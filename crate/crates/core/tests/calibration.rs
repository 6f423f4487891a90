mod common;

use common::*;
use ringtag_core::calibration::{calibrate, CalibrationConfig, CalibrationError};
use ringtag_core::simulator::{ComplianceModel, NoiseModel, Scene};

#[test]
fn noisy_sweep_fits_every_axis() {
    let scene = Scene::default_scene();
    let pairs = estimated_pairs(&scene, &NoiseModel { seed: 21, ..Default::default() }, 170);
    assert_eq!(pairs.len(), 1020);
    let report = calibrate(&pairs, &CalibrationConfig::default()).unwrap();
    assert_eq!((report.train_count, report.test_count), (816, 204));
    let c = scene.compliance.compliance();
    for m in &report.models {
        assert_eq!(m.input_component, m.axis);
        assert!(m.r2_test > 0.95, "axis {} r2_test {}", m.axis, m.r2_test);
        let stiffness = 1.0 / c[(m.axis, m.axis)];
        let rel = (m.slope() - stiffness).abs() / stiffness;
        assert!(rel < 0.05, "axis {} slope {} vs {}", m.axis, m.slope(), stiffness);
    }
}

#[test]
fn noiseless_sweep_is_near_exact() {
    let scene = Scene::default_scene();
    let pairs = estimated_pairs(&scene, &NoiseModel::noiseless(22), 170);
    let report = calibrate(&pairs, &CalibrationConfig::default()).unwrap();
    let c = scene.compliance.compliance();
    for m in &report.models {
        assert!(m.r2_test > 0.9999, "axis {} r2_test {}", m.axis, m.r2_test);
        let stiffness = 1.0 / c[(m.axis, m.axis)];
        assert!((m.slope() - stiffness).abs() / stiffness < 1e-6);
    }
}

#[test]
fn cubic_softening_prefers_degree_three() {
    let mut scene = Scene::default_scene();
    scene.compliance = ComplianceModel::default_model().with_cubic_softening([0.6, 0.6, 0.6, 20.0, 20.0, 20.0]);
    let pairs = estimated_pairs(&scene, &NoiseModel { seed: 23, ..Default::default() }, 100);
    let lin = calibrate(&pairs, &CalibrationConfig::default()).unwrap();
    let cub = calibrate(&pairs, &CalibrationConfig { degree: 3, ..Default::default() }).unwrap();
    for (a, b) in lin.models.iter().zip(&cub.models) {
        assert!(b.r2_test > a.r2_test, "axis {}: {} vs {}", a.axis, b.r2_test, a.r2_test);
        assert!(b.r2_train >= a.r2_train);
    }
}

#[test]
fn missing_axis_is_reported() {
    let scene = Scene::default_scene();
    let pairs: Vec<_> = estimated_pairs(&scene, &NoiseModel::noiseless(24), 20)
        .into_iter()
        .filter(|p| p.wrench.component(4) == 0.0)
        .collect();
    assert_eq!(
        calibrate(&pairs, &CalibrationConfig::default()),
        Err(CalibrationError::UncoveredAxis(4))
    );
}
