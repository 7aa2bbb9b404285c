//! Object, background and camera-trajectory annotation, plus error-budget
//! propagation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{compose, invert, RigidTransform, Trajectory, Vec3};
use crate::registration::{icp, kabsch_fit, rmse_between, IcpParams, IcpTarget, PointCloud, TriangleMesh};

/// Below this many touches [`TipMeasurementSession::quality_warning`] fires.
pub const RECOMMENDED_MIN_TIPS: usize = 10;
pub const MIN_TIPS: usize = 4;

/// Tracked (or robot-held) tool poses at each surface touch.
#[derive(Clone, Debug, PartialEq)]
pub struct TipMeasurementSession {
    /// `marker -> base` at each touch.
    pub marker_poses: Vec<RigidTransform>,
    /// Tip position in the marker frame, meters.
    pub tip_offset: Vec3,
}

impl TipMeasurementSession {
    pub fn quality_warning(&self) -> Option<String> {
        let n = self.marker_poses.len();
        (MIN_TIPS..RECOMMENDED_MIN_TIPS)
            .contains(&n)
            .then(|| format!("only {n} tip measurements; at least 20 are recommended"))
    }
}

/// Tip positions in the base frame, `R_i · tip + t_i`.
pub fn tip_points(session: &TipMeasurementSession) -> Result<PointCloud> {
    let n = session.marker_poses.len();
    if n < MIN_TIPS {
        return Err(Error::TooFewPoints { needed: MIN_TIPS, got: n });
    }
    let base = session.marker_poses[0].to_frame();
    let mut points = Vec::with_capacity(n);
    for p in &session.marker_poses {
        if p.to_frame() != base {
            return Err(Error::frames(base, p.to_frame()));
        }
        points.push(p.transform_point(&session.tip_offset));
    }
    PointCloud::new(points, base.clone())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcquisitionMethod {
    Robot,
    #[default]
    Tracker,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectAnnotation {
    pub object_id: String,
    pub mesh_ref: String,
    /// `mesh -> base`.
    pub pose: RigidTransform,
    pub correspondence_rmse: f64,
    pub icp_rmse: f64,
    pub point_count: usize,
    pub method: AcquisitionMethod,
}

impl ObjectAnnotation {
    pub fn labeled(mut self, object_id: &str, mesh_ref: &str, method: AcquisitionMethod) -> Self {
        self.object_id = object_id.to_string();
        self.mesh_ref = mesh_ref.to_string();
        self.method = method;
        self
    }
}

/// Initial fit from explicit correspondences (mesh coordinates, in the same
/// order as `points`), refined by ICP against the mesh surface.
///
/// The object id and mesh reference default to the mesh frame name; use
/// [`ObjectAnnotation::labeled`] to override them.
pub fn annotate_object(
    points: &PointCloud,
    mesh: &TriangleMesh,
    correspondences: &PointCloud,
    params: &IcpParams,
) -> Result<ObjectAnnotation> {
    if correspondences.frame() != mesh.frame() {
        return Err(Error::frames(mesh.frame(), correspondences.frame()));
    }
    let initial = kabsch_fit(correspondences, points)?;
    let correspondence_rmse = rmse_between(&initial, correspondences.points(), points.points());
    let refined = icp(points, IcpTarget::Mesh(mesh), &invert(&initial), params)?;
    let name = mesh.frame().as_str().to_string();
    Ok(ObjectAnnotation {
        object_id: name.clone(),
        mesh_ref: name,
        pose: invert(&refined.transform),
        correspondence_rmse,
        icp_rmse: refined.rmse,
        point_count: points.len(),
        method: AcquisitionMethod::default(),
    })
}

/// Fits a background mesh to a partial scan already expressed in the base
/// frame. `init` is the initial `mesh -> base` guess; the correspondence RMSE
/// field reports the fit at `init`.
pub fn align_background(
    partial_scan: &PointCloud,
    background_mesh: &TriangleMesh,
    init: &RigidTransform,
    params: &IcpParams,
) -> Result<ObjectAnnotation> {
    let res = icp(partial_scan, IcpTarget::Mesh(background_mesh), &invert(init), params)?;
    let name = background_mesh.frame().as_str().to_string();
    Ok(ObjectAnnotation {
        object_id: name.clone(),
        mesh_ref: name,
        pose: invert(&res.transform),
        correspondence_rmse: res.cost_history.first().copied().unwrap_or(res.rmse),
        icp_rmse: res.rmse,
        point_count: partial_scan.len(),
        method: AcquisitionMethod::default(),
    })
}

/// Camera poses `marker_i ∘ X` for a hand-eye `X` labeled `camera -> marker`.
pub fn annotate_camera_trajectory(marker_traj: &Trajectory, hand_eye: &RigidTransform) -> Result<Trajectory> {
    if marker_traj.child_frame() != hand_eye.to_frame() {
        return Err(Error::frames(hand_eye.to_frame(), marker_traj.child_frame()));
    }
    marker_traj.map_poses(marker_traj.parent_frame().clone(), hand_eye.from_frame().clone(), |p| compose(p, hand_eye))
}

/// Translation and rotation error of one stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageError {
    /// Meters.
    pub trans_rmse: f64,
    /// Degrees.
    pub rot_rmse: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorStage {
    pub name: String,
    /// Meters.
    pub trans_rmse: f64,
    /// Degrees.
    pub rot_rmse: f64,
    /// Distance at which the rotation error acts, meters.
    pub lever_arm: f64,
    /// Error of this stage under motion, when it differs from the static one.
    pub dynamic: Option<StageError>,
}

impl ErrorStage {
    pub fn new(name: &str, trans_rmse: f64, rot_rmse: f64, lever_arm: f64) -> Self {
        ErrorStage { name: name.to_string(), trans_rmse, rot_rmse, lever_arm, dynamic: None }
    }

    pub fn with_dynamic(mut self, trans_rmse: f64, rot_rmse: f64) -> Self {
        self.dynamic = Some(StageError { trans_rmse, rot_rmse });
        self
    }

    fn effective(&self, e: StageError) -> f64 {
        e.trans_rmse.hypot(e.rot_rmse.to_radians() * self.lever_arm)
    }

    /// Effective translational error in the static case.
    pub fn static_error(&self) -> f64 {
        self.effective(StageError { trans_rmse: self.trans_rmse, rot_rmse: self.rot_rmse })
    }

    /// Effective translational error in the dynamic case (static if unset).
    pub fn dynamic_error(&self) -> f64 {
        self.effective(self.dynamic.unwrap_or(StageError { trans_rmse: self.trans_rmse, rot_rmse: self.rot_rmse }))
    }

    fn validate(&self) -> Result<()> {
        let mut values = vec![self.trans_rmse, self.rot_rmse, self.lever_arm];
        if let Some(d) = self.dynamic {
            values.extend([d.trans_rmse, d.rot_rmse]);
        }
        if values.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(Error::NegativeError(self.name.clone()))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorBudget {
    pub stages: Vec<ErrorStage>,
    /// Meters; root-sum-square of static stage errors.
    pub lower_bound: f64,
    /// Meters; root-sum-square with dynamic stage errors substituted.
    pub upper_bound: f64,
}

/// First-order propagation: each stage contributes
/// `sqrt(t² + (θ · lever_arm)²)`, stages combine by root-sum-square.
pub fn error_budget(stages: &[ErrorStage]) -> Result<ErrorBudget> {
    if stages.is_empty() {
        return Err(Error::EmptyInput);
    }
    for s in stages {
        s.validate()?;
    }
    let rss = |f: fn(&ErrorStage) -> f64| stages.iter().map(|s| f(s).powi(2)).sum::<f64>().sqrt();
    Ok(ErrorBudget {
        stages: stages.to_vec(),
        lower_bound: rss(ErrorStage::static_error),
        upper_bound: rss(ErrorStage::dynamic_error),
    })
}

/// Stage values reported for the tracker pipeline, with the tracker rotation
/// acting at `lever_arm` meters.
pub fn reference_stages(lever_arm: f64) -> Vec<ErrorStage> {
    vec![
        ErrorStage::new("object", 0.32e-3, 0.43, 0.0),
        ErrorStage::new("hand_eye", 0.27e-3, 0.42, 0.0),
        ErrorStage::new("tracker", 0.67e-3, 0.12, lever_arm).with_dynamic(0.92e-3, 0.16),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{pose_error, FrameId};
    use crate::shapes::{box_mesh, sample_surface};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal, UnitSphere};

    fn f(s: &str) -> FrameId {
        FrameId::named(s)
    }

    fn object() -> TriangleMesh {
        box_mesh(Vec3::new(0.12, 0.08, 0.05), f("obj")).unwrap()
    }

    fn random_pose(rng: &mut ChaCha8Rng, from: &str, to: &str) -> RigidTransform {
        let axis: [f64; 3] = UnitSphere.sample(rng);
        RigidTransform::from_axis_angle(
            Vec3::from(axis),
            rng.gen_range(-180.0..180.0),
            Vec3::new(rng.gen_range(0.3..0.6), rng.gen_range(-0.2..0.2), rng.gen_range(0.0..0.1)),
            f(from),
            f(to),
        )
    }

    /// Touches on the mesh, returned as (mesh coordinates, base coordinates).
    fn touches(rng: &mut ChaCha8Rng, pose: &RigidTransform, n: usize, sigma: f64) -> (PointCloud, PointCloud) {
        let mesh = object();
        let local: Vec<Vec3> = sample_surface(&mesh, n, rng, |_| true).into_iter().map(|(p, _)| p).collect();
        let base: Vec<Vec3> = local
            .iter()
            .map(|p| pose.transform_point(p) + Vec3::from_fn(|_, _| sigma * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        (PointCloud::new(local, f("obj")).unwrap(), PointCloud::new(base, f("RB")).unwrap())
    }

    #[test]
    fn tip_points_forward_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let poses: Vec<_> = (0..6).map(|_| random_pose(&mut rng, "MB", "TB")).collect();
        let zero =
            tip_points(&TipMeasurementSession { marker_poses: poses.clone(), tip_offset: Vec3::zeros() }).unwrap();
        for (p, m) in zero.points().iter().zip(&poses) {
            assert_eq!(p, m.translation());
        }
        let tip = Vec3::new(0.01, 0.0, 0.15);
        let pts = tip_points(&TipMeasurementSession { marker_poses: poses.clone(), tip_offset: tip }).unwrap();
        for (p, m) in pts.points().iter().zip(&poses) {
            assert!((p - (m.rotation_matrix() * tip + m.translation())).norm() < 1e-15);
        }
        let few = TipMeasurementSession { marker_poses: poses[..3].to_vec(), tip_offset: tip };
        assert!(matches!(tip_points(&few), Err(Error::TooFewPoints { .. })));
        let some = TipMeasurementSession { marker_poses: poses, tip_offset: tip };
        assert!(some.quality_warning().is_some());
    }

    #[test]
    fn untransformed_points_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mesh = object();
        let id = RigidTransform::identity(f("obj"), f("RB"));
        let (local, base) = touches(&mut rng, &id, 25, 0.0);
        let ann = annotate_object(&base, &mesh, &local, &IcpParams::default()).unwrap();
        let (dt, dr) = pose_error(&ann.pose, &id).unwrap();
        assert!(dt < 1e-12 && dr < 1e-6);
        assert!(ann.correspondence_rmse < 1e-12 && ann.icp_rmse < 1e-12);
        assert_eq!(ann.point_count, 25);
        assert_eq!(ann.pose.from_frame().as_str(), "obj");
    }

    #[test]
    fn zero_noise_random_pose_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let pose = random_pose(&mut rng, "obj", "RB");
            let (local, base) = touches(&mut rng, &pose, 25, 0.0);
            let ann = annotate_object(&base, &object(), &local, &IcpParams::default()).unwrap();
            let (dt, dr) = pose_error(&ann.pose, &pose).unwrap();
            assert!(dt < 1e-9 && dr < 1e-6, "{dt} {dr}");
        }
    }

    #[test]
    fn robot_level_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut errs = Vec::new();
        for _ in 0..20 {
            let pose = random_pose(&mut rng, "obj", "RB");
            let (local, base) = touches(&mut rng, &pose, 25, 0.1e-3);
            let ann = annotate_object(&base, &object(), &local, &IcpParams::default()).unwrap();
            errs.push(pose_error(&ann.pose, &pose).unwrap());
        }
        errs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(errs[10].0 < 0.6e-3);
        assert!(errs.iter().all(|e| e.1 < 1.2));
    }

    #[test]
    fn annotation_is_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pose = random_pose(&mut rng, "obj", "RB");
        let (local, base) = touches(&mut rng, &pose, 25, 0.3e-3);
        let g = random_pose(&mut rng, "RB", "RB");
        let moved = base.transformed(&g).unwrap();
        let a = annotate_object(&base, &object(), &local, &IcpParams::default()).unwrap();
        let b = annotate_object(&moved, &object(), &local, &IcpParams::default()).unwrap();
        let (dt, dr) = pose_error(&b.pose, &compose(&g, &a.pose).unwrap()).unwrap();
        assert!(dt < 1e-9 && dr.to_radians() < 1e-9, "{dt} {dr}");
        assert!((a.icp_rmse - b.icp_rmse).abs() < 1e-9);
    }

    fn background() -> TriangleMesh {
        // floor plus two walls, so all six degrees of freedom are constrained
        let v = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 0.6),
            Vec3::new(1.0, 0.0, 0.6),
            Vec3::new(0.0, 1.0, 0.6),
        ];
        let t = vec![[0, 1, 2], [0, 2, 3], [0, 4, 1], [1, 4, 5], [0, 3, 4], [3, 6, 4]];
        TriangleMesh::new(v, t, f("bg")).unwrap()
    }

    fn scan(rng: &mut ChaCha8Rng, pose: &RigidTransform, n: usize) -> Vec<Vec3> {
        sample_surface(&background(), n, rng, |_| true).into_iter().map(|(p, _)| pose.transform_point(&p)).collect()
    }

    #[test]
    fn background_at_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let init = RigidTransform::from_axis_angle(Vec3::z(), 10.0, Vec3::new(0.1, 0.2, 0.0), f("bg"), f("RB"));
        let pts = PointCloud::new(scan(&mut rng, &init, 400), f("RB")).unwrap();
        let ann = align_background(&pts, &background(), &init, &IcpParams::default()).unwrap();
        assert_eq!(ann.pose, init);
        assert!(ann.icp_rmse < 1e-12);
    }

    fn displaced(init: &RigidTransform) -> RigidTransform {
        let d = RigidTransform::from_axis_angle(
            Vec3::new(1.0, 1.0, 1.0),
            2.0,
            Vec3::new(0.003, -0.004, 0.0),
            f("RB"),
            f("RB"),
        );
        compose(&d, init).unwrap()
    }

    fn tight() -> IcpParams {
        IcpParams { max_iterations: 2000, rel_change_tol: 1e-14, max_corr_dist: 0.05, trim_fraction: 0.0 }
    }

    #[test]
    fn background_displacement_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let init = RigidTransform::from_axis_angle(Vec3::z(), 10.0, Vec3::new(0.1, 0.2, 0.0), f("bg"), f("RB"));
        let truth = displaced(&init);
        let pts = PointCloud::new(scan(&mut rng, &truth, 600), f("RB")).unwrap();
        let ann = align_background(&pts, &background(), &init, &tight()).unwrap();
        let (dt, _) = pose_error(&ann.pose, &truth).unwrap();
        assert!(dt < 1e-6, "{dt}");
    }

    #[test]
    fn background_with_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let init = RigidTransform::from_axis_angle(Vec3::z(), 10.0, Vec3::new(0.1, 0.2, 0.0), f("bg"), f("RB"));
        let truth = displaced(&init);
        let mut pts = scan(&mut rng, &truth, 800);
        let gate = 0.05;
        for p in pts.iter_mut().take(160) {
            let axis: [f64; 3] = UnitSphere.sample(&mut rng);
            *p += Vec3::from(axis) * rng.gen_range(3.0 * gate..0.3);
        }
        let params = IcpParams { trim_fraction: 0.25, max_corr_dist: gate, ..tight() };
        let ann = align_background(&PointCloud::new(pts, f("RB")).unwrap(), &background(), &init, &params).unwrap();
        let (dt, _) = pose_error(&ann.pose, &truth).unwrap();
        assert!(dt < 0.1e-3, "{dt}");
    }

    #[test]
    fn camera_trajectory_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let times: Vec<f64> = (0..20).map(|i| i as f64 * 0.05).collect();
        let poses: Vec<_> = times.iter().map(|_| random_pose(&mut rng, "MB", "TB")).collect();
        let marker = Trajectory::from_poses(f("TB"), f("MB"), &times, poses).unwrap();
        let id = RigidTransform::identity(f("CB"), f("MB"));
        let cam = annotate_camera_trajectory(&marker, &id).unwrap();
        assert_eq!(cam.child_frame().as_str(), "CB");
        for (c, m) in cam.samples().iter().zip(marker.samples()) {
            assert_eq!(c.pose.translation(), m.pose.translation());
            assert!(crate::geom::rotation_angle_deg(c.pose.rotation(), m.pose.rotation()) < 1e-9);
        }
        let x = random_pose(&mut rng, "CB", "MB");
        let cam = annotate_camera_trajectory(&marker, &x).unwrap();
        for (c, m) in cam.samples().iter().zip(marker.samples()) {
            let (dt, dr) = pose_error(&c.pose, &compose(&m.pose, &x).unwrap()).unwrap();
            assert!(dt < 1e-12 && dr < 1e-9);
        }
        let wrong = random_pose(&mut rng, "CB", "EE");
        assert!(matches!(annotate_camera_trajectory(&marker, &wrong), Err(Error::FrameMismatch { .. })));
    }

    #[test]
    fn budget_examples() {
        let one = error_budget(&[ErrorStage::new("a", 2e-3, 0.0, 0.5)]).unwrap();
        assert_eq!((one.lower_bound, one.upper_bound), (2e-3, 2e-3));
        let two = error_budget(&[ErrorStage::new("a", 3e-3, 0.0, 1.0), ErrorStage::new("b", 4e-3, 0.0, 1.0)]).unwrap();
        assert!((two.lower_bound - 5e-3).abs() < 1e-15);
        assert!(matches!(error_budget(&[]), Err(Error::EmptyInput)));
        assert!(matches!(error_budget(&[ErrorStage::new("bad", -1e-3, 0.0, 0.0)]), Err(Error::NegativeError(_))));
        assert!(error_budget(&[ErrorStage::new("ok", 1e-3, 0.1, 0.5).with_dynamic(1e-3, -0.1)]).is_err());
    }

    #[test]
    fn reference_budget_window() {
        let b = error_budget(&reference_stages(0.5)).unwrap();
        assert!(b.lower_bound < b.upper_bound);
        for v in [b.lower_bound, b.upper_bound] {
            assert!((1.0e-3..=2.5e-3).contains(&v), "{v}");
        }
        // independent evaluation in millimeters
        let tracker_static = (0.67f64.powi(2) + (0.12f64.to_radians() * 500.0).powi(2)).sqrt();
        let tracker_dynamic = (0.92f64.powi(2) + (0.16f64.to_radians() * 500.0).powi(2)).sqrt();
        let lower = (0.32f64.powi(2) + 0.27f64.powi(2) + tracker_static.powi(2)).sqrt();
        let upper = (0.32f64.powi(2) + 0.27f64.powi(2) + tracker_dynamic.powi(2)).sqrt();
        assert!((b.lower_bound * 1e3 - lower).abs() < 1e-12);
        assert!((b.upper_bound * 1e3 - upper).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn budget_is_monotone(idx in 0usize..3, field in 0usize..4, scale in 1.0f64..5.0) {
            let base = reference_stages(0.5);
            let mut bigger = base.clone();
            let s = &mut bigger[idx];
            match field {
                0 => s.trans_rmse *= scale,
                1 => s.rot_rmse *= scale,
                2 => s.lever_arm = s.lever_arm * scale + (scale - 1.0),
                _ => if let Some(d) = s.dynamic.as_mut() { d.trans_rmse *= scale } else { s.trans_rmse *= scale },
            }
            let a = error_budget(&base).unwrap();
            let b = error_budget(&bigger).unwrap();
            prop_assert!(b.lower_bound >= a.lower_bound);
            prop_assert!(b.upper_bound >= a.upper_bound);
            let dominated = bigger.iter().all(|s| s.dynamic.is_none_or(|d| d.trans_rmse >= s.trans_rmse && d.rot_rmse >= s.rot_rmse));
            if dominated {
                prop_assert!(b.upper_bound >= b.lower_bound);
            }
        }
    }
}
