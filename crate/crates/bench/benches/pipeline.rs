use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use rig_annotate::calib::{handeye_trajectory, pivot_calibrate};
use rig_annotate::geom::{FrameId, RigidTransform, Vec3};
use rig_annotate::registration::{icp, IcpParams, IcpTarget, KdTree, PointCloud};
use rig_annotate::render::{build_bvh, render_with};
use rig_annotate::shapes::{box_mesh, sample_surface};
use rig_annotate::sim::{generate_scene, simulate_recording, simulate_session, stage_rng, SessionConfig};
use rig_annotate::sync::{synchronize_streams, CurveOptions, CurveSignal};

fn kdtree(c: &mut Criterion) {
    let mesh = box_mesh(Vec3::new(0.2, 0.1, 0.05), FrameId::named("M")).unwrap();
    let mut rng = stage_rng(1, 0);
    let points: Vec<Vec3> = sample_surface(&mesh, 20_000, &mut rng, |_| true).into_iter().map(|(p, _)| p).collect();
    let queries: Vec<Vec3> =
        sample_surface(&mesh, 1_000, &mut rng, |_| true).into_iter().map(|(p, _)| p * 1.01).collect();
    c.bench_function("kdtree_build_20k", |b| b.iter(|| KdTree::new(black_box(points.clone())).unwrap()));
    let tree = KdTree::new(points).unwrap();
    c.bench_function("kdtree_1k_queries", |b| {
        b.iter(|| queries.iter().map(|q| tree.nearest(q).distance_sq).sum::<f64>())
    });
}

fn render(c: &mut Criterion) {
    let config = SessionConfig { object_count: 6, ..Default::default() };
    let gt = generate_scene(&config).unwrap();
    let cam = config.camera.to_camera().unwrap();
    let pose = gt.camera_trajectory.samples()[0].pose.clone();
    c.bench_function("bvh_build", |b| b.iter(|| build_bvh(black_box(&gt.scene)).unwrap()));
    let accel = build_bvh(&gt.scene).unwrap();
    c.bench_function("render_640x480", |b| b.iter(|| render_with(&accel, &cam, &pose).unwrap()));
}

fn registration(c: &mut Criterion) {
    let frame = FrameId::named("M");
    let mesh = box_mesh(Vec3::new(0.1, 0.07, 0.05), frame.clone()).unwrap();
    let mut rng = stage_rng(2, 0);
    let truth = RigidTransform::from_wxyz(
        [0.998, 0.03, -0.02, 0.04],
        Vec3::new(0.01, -0.005, 0.004),
        frame,
        FrameId::named("B"),
    )
    .unwrap();
    let pts =
        sample_surface(&mesh, 200, &mut rng, |_| true).into_iter().map(|(p, _)| truth.transform_point(&p)).collect();
    let cloud = PointCloud::new(pts, FrameId::named("B")).unwrap();
    let init = RigidTransform::identity(FrameId::named("B"), FrameId::named("M"));
    c.bench_function("icp_mesh_200pts", |b| {
        b.iter(|| icp(&cloud, IcpTarget::Mesh(&mesh), &init, &IcpParams::default()).unwrap())
    });
}

fn calibration_and_sync(c: &mut Criterion) {
    let config = SessionConfig::default();
    let session = simulate_session(&config).unwrap();
    let gt = &session.truth;
    c.bench_function("pivot_50", |b| b.iter(|| pivot_calibrate(&session.observed.pivot_poses).unwrap()));
    c.bench_function("handeye_trajectory", |b| {
        b.iter(|| handeye_trajectory(&gt.camera_trajectory, &gt.marker_trajectory).unwrap())
    });
    let rec = simulate_recording(gt, &config).unwrap();
    let camera = rec.camera_trajectory.unwrap();
    let opts = CurveOptions { signal: CurveSignal::Rotation, smooth: 5 };
    c.bench_function("sync_12s", |b| {
        b.iter(|| synchronize_streams(&rec.marker_trajectory, &camera, 1.0 / 60.0, 1.0, &opts))
    });
}

criterion_group!(benches, kdtree, render, registration, calibration_and_sync);
criterion_main!(benches);
