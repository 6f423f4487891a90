mod common;

use common::*;
use ringtag_core::contact::{
    first_trigger, normal_deformation, reference_from_poses, run_episode, ApproachTrajectory, ContactConfig, Outcome,
};
use ringtag_core::simulator::{Scene, Simulator, Wrench};

fn preroll(scene: &Scene<f64>, sigma: f64, seed: u64) -> ringtag_core::geometry::RigidTransform<f64> {
    let pre: Vec<_> = (0..5)
        .map(|k| estimate(scene, &observe(scene, &scene.reference_pose, sigma, seed + k)))
        .collect();
    reference_from_poses(&pre).unwrap()
}

#[test]
fn scripted_contact_triggers_at_first_crossing() {
    let scene = Scene::default_scene();
    let reference = preroll(&scene, 0.0, 0);
    let cfg = ContactConfig::<f64>::for_object("chip").unwrap();
    let traj = ApproachTrajectory::new(vec![0.0; 4], vec![0.3, -0.2, 0.1, 0.5], cfg.total_frames).unwrap();
    for onset in [0usize, 4, 12, 20] {
        let frames: Vec<_> = (0..cfg.total_frames)
            .map(|f| {
                let fz = -17.0 * (f + 1).saturating_sub(onset) as f64;
                Simulator::new(f as u64)
                    .frame(&scene, &Wrench::single_axis(2, fz).unwrap(), 0.0, 0.0)
                    .unwrap()
            })
            .collect();
        let truth: Vec<Option<f64>> = frames.iter().map(|f| Some(f.deformation.dl_z.abs())).collect();
        let stream = frames.iter().map(|f| Some(estimate(&scene, &f.correspondences)));
        let log = run_episode(&traj, &cfg, &reference, stream).unwrap();
        let expected = first_trigger(&truth, cfg.threshold_mm, 1);
        match log.outcome {
            Outcome::Contact { event } => {
                assert_eq!(Some(event.frame_index), expected);
                assert!(event.frame_index >= onset);
            }
            Outcome::NoContact => assert_eq!(expected, None),
        }
    }
}

#[test]
fn no_wrench_no_contact() {
    let scene = Scene::default_scene();
    let reference = preroll(&scene, 0.0, 0);
    let cfg = ContactConfig::<f64>::for_object("paper_cup").unwrap();
    let traj = ApproachTrajectory::new(vec![0.0], vec![1.0], cfg.total_frames).unwrap();
    let stream = (0..cfg.total_frames as u64).map(|f| Some(estimate(&scene, &observe(&scene, &scene.reference_pose, 0.0, f))));
    let log = run_episode(&traj, &cfg, &reference, stream).unwrap();
    assert_eq!(log.outcome, Outcome::NoContact);
}

/// Frame-level false-trigger rates over 10 references × 1000 no-contact
/// frames at σ = 0.25 px with the paper-cup threshold.
#[test]
fn paper_cup_debounce_suppresses_noise_triggers() {
    let scene = Scene::default_scene();
    let threshold = ContactConfig::<f64>::for_object("paper cup").unwrap().threshold_mm;
    let (mut hits1, mut hits3, mut n1, mut n3) = (0usize, 0usize, 0usize, 0usize);
    for block in 0..10u64 {
        let reference = preroll(&scene, 0.25, 10 * block);
        let above: Vec<bool> = (0..1000u64)
            .map(|i| {
                let f = Simulator::new(1_000_000 + 1000 * block + i)
                    .frame(&scene, &Wrench::zero(), 0.25, 0.0)
                    .unwrap();
                normal_deformation(&reference, &estimate(&scene, &f.correspondences)) >= threshold
            })
            .collect();
        hits1 += above.iter().filter(|b| **b).count();
        n1 += above.len();
        hits3 += above.windows(3).filter(|w| w.iter().all(|b| *b)).count();
        n3 += above.len() - 2;
    }
    let p1 = hits1 as f64 / n1 as f64;
    let p3 = hits3 as f64 / n3 as f64;
    println!("paper cup false-trigger rate: debounce 1 {p1:.4}, debounce 3 {p3:.4}");
    assert!(p1 > 0.05, "single-frame rule should be noise-fragile, got {p1}");
    assert!(p3 < 0.05, "debounce 3 rate {p3}");
    assert!(p3 < p1 / 4.0);
}
