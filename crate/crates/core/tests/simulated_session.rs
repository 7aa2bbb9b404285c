use nalgebra::{UnitQuaternion, Vector3};

use rig_annotate::annotate::annotate_camera_trajectory;
use rig_annotate::calib::pivot_calibrate;
use rig_annotate::geom::{pose_error, RigidTransform};
use rig_annotate::io::session::{read_session, write_session};
use rig_annotate::io::to_json_string;
use rig_annotate::pipeline::{compare_with_truth, run_pipeline, verify_session, PipelineOptions};
use rig_annotate::sim::{generate_scene, perturb_pose, simulate_recording, simulate_session, stage_rng, SessionConfig};
use rig_annotate::sync::{synchronize_streams, CurveOptions, CurveSignal};
use rig_annotate::Error;

#[test]
fn injected_offset_is_recovered_within_half_a_sample() {
    // noisy streams are covered statistically by the acceptance suite
    let dt = 1.0 / 60.0;
    let opts = CurveOptions { signal: CurveSignal::Rotation, smooth: 5 };
    for seed in 0..5 {
        let cfg = SessionConfig { seed, injected_time_offset: 0.137, ..Default::default() }.zero_noise();
        let gt = generate_scene(&cfg).unwrap();
        let rec = simulate_recording(&gt, &cfg).unwrap();
        let est = synchronize_streams(&rec.marker_trajectory, rec.camera_trajectory.as_ref().unwrap(), dt, 1.0, &opts)
            .unwrap();
        assert!((est.offset - 0.137).abs() <= dt / 2.0, "seed {seed}: {}", est.offset);
    }
}

#[test]
fn pivoting_about_one_axis_is_degenerate() {
    let gt = generate_scene(&SessionConfig::default()).unwrap();
    let axis = Vector3::y_axis();
    let base = gt.marker_trajectory.samples()[0].pose.clone();
    let poses: Vec<RigidTransform> = (0..30)
        .map(|i| {
            let r = UnitQuaternion::from_axis_angle(&axis, (i as f64 - 15.0).to_radians()) * base.rotation();
            // tip stays on the pivot point
            let t = gt.pivot_point - r * gt.tip_offset;
            RigidTransform::new(r, t, base.from_frame().clone(), base.to_frame().clone())
        })
        .collect();
    assert!(matches!(pivot_calibrate(&poses), Err(Error::DegenerateMotion { .. })));
}

#[test]
fn pipeline_on_disk_matches_in_memory() {
    let cfg = SessionConfig { seed: 5, object_count: 2, ..Default::default() };
    let session = simulate_session(&cfg).unwrap();
    let opts = PipelineOptions::default();
    let direct = compare_with_truth(&session, &run_pipeline(&session, &opts).unwrap()).unwrap();

    let dir = tempfile::tempdir().unwrap();
    write_session(dir.path(), &session).unwrap();
    let reread = read_session(dir.path()).unwrap();
    let from_disk = verify_session(dir.path(), &opts).unwrap();
    assert_eq!(to_json_string(&direct), to_json_string(&from_disk));
    assert_eq!(to_json_string(&reread.config), to_json_string(&session.config));
    assert!(dir.path().join("annotation/annotation.json").is_file());
    assert!(from_disk.object_max_error_mm < 3.0, "{}", to_json_string(&from_disk));
}

#[test]
fn camera_trajectory_under_static_tracker_noise() {
    let cfg = SessionConfig::default();
    let gt = generate_scene(&cfg).unwrap();
    let mut rng = stage_rng(cfg.seed, 99);
    let noisy = gt
        .marker_trajectory
        .map_poses(gt.marker_trajectory.parent_frame().clone(), gt.marker_trajectory.child_frame().clone(), |p| {
            Ok(perturb_pose(p, &cfg.noise.static_, &mut rng))
        })
        .unwrap();
    let cam = annotate_camera_trajectory(&noisy, &gt.hand_eye).unwrap();
    let sq: Vec<f64> = cam
        .samples()
        .iter()
        .zip(gt.camera_trajectory.samples())
        .map(|(a, b)| pose_error(&a.pose, &b.pose).unwrap().0.powi(2))
        .collect();
    let rmse = (sq.iter().sum::<f64>() / sq.len() as f64).sqrt();
    assert!(rmse < 1.5e-3, "{rmse}");
}
