//! Synthetic acquisition sessions: ground truth plus noisy observations for
//! every pipeline stage.
//!
//! All randomness derives from `SessionConfig::seed` through ChaCha8 streams,
//! one stream per stage (see the `STREAM_*` constants), so the draws of one
//! stage do not depend on how many draws another stage made.

use nalgebra::{Rotation3, Unit, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::annotate::{AcquisitionMethod, TipMeasurementSession};
use crate::error::{Error, Result};
use crate::geom::{compose, invert, FrameId, RigidTransform, Trajectory, Vec3};
use crate::io::PoseRecord;
use crate::registration::{PointCloud, TriangleMesh};
use crate::render::{PinholeCamera, Scene, SceneObject};
use crate::shapes::{box_mesh, cylinder, icosphere, sample_surface, triangle_normal};

pub const STREAM_SCENE: u64 = 1;
pub const STREAM_PIVOT: u64 = 2;
pub const STREAM_MARKER_NOISE: u64 = 3;
pub const STREAM_CAMERA_NOISE: u64 = 4;
pub const STREAM_HANDEYE: u64 = 5;
pub const STREAM_BACKGROUND: u64 = 6;
/// Tip sessions use `STREAM_TIPS + object index`.
pub const STREAM_TIPS: u64 = 1 << 16;

pub const CAMERA_FRAME: &str = "CB";
pub const BOARD_FRAME: &str = "BB";
pub const BACKGROUND_ID: &str = "background";

/// Faces whose outward normal has a base-frame z below this rest on the
/// table and cannot be touched.
const MAX_DOWNWARD_NORMAL: f64 = -0.5;

/// Per-stage random generator derived from the session seed.
pub fn stage_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Isotropic pose noise: Gaussian per-axis translation (meters) and a
/// rotation of Gaussian magnitude (degrees) about a uniformly random axis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub sigma_t: f64,
    pub sigma_r: f64,
}

impl NoiseModel {
    pub const ZERO: NoiseModel = NoiseModel { sigma_t: 0.0, sigma_r: 0.0 };

    pub fn new(sigma_t: f64, sigma_r: f64) -> Result<Self> {
        let n = NoiseModel { sigma_t, sigma_r };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_t >= 0.0 && self.sigma_r >= 0.0 && self.sigma_t.is_finite() && self.sigma_r.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("noise must be finite and non-negative: {self:?}")))
        }
    }
}

/// Applies [`NoiseModel`] noise: the translation is offset and the rotation is
/// left-multiplied by the random rotation. The same number of draws is taken
/// whatever the noise level, and a zero model returns `t` unchanged.
pub fn perturb_pose<R: Rng>(t: &RigidTransform, noise: &NoiseModel, rng: &mut R) -> RigidTransform {
    let dt = Vec3::new(
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
        rng.sample::<f64, _>(StandardNormal),
    ) * noise.sigma_t;
    let axis: [f64; 3] = UnitSphere.sample(rng);
    let angle = noise.sigma_r * rng.sample::<f64, _>(StandardNormal);
    let mut out = t.clone();
    if noise.sigma_r != 0.0 {
        let r = UnitQuaternion::from_axis_angle(&Unit::new_normalize(Vec3::from(axis)), angle.to_radians());
        out = RigidTransform::new(r * t.rotation(), *t.translation(), t.from_frame().clone(), t.to_frame().clone());
    }
    if noise.sigma_t != 0.0 {
        out = RigidTransform::new(
            *out.rotation(),
            out.translation() + dt,
            out.from_frame().clone(),
            out.to_frame().clone(),
        );
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionNoise {
    #[serde(rename = "static")]
    pub static_: NoiseModel,
    pub dynamic: NoiseModel,
}

/// Orbit of the camera rig around the scene center. The orbit angle is
/// `ω t + v sin(ω t)`, so the speed varies by a factor `1 ± v`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryShape {
    pub duration_s: f64,
    pub radius_m: f64,
    pub height_m: f64,
    pub angular_speed: f64,
    pub speed_variation: f64,
    pub center: [f64; 3],
}

impl Default for TrajectoryShape {
    fn default() -> Self {
        TrajectoryShape {
            duration_s: 12.0,
            radius_m: 0.6,
            height_m: 0.45,
            angular_speed: 0.5,
            speed_variation: 0.3,
            center: [0.5, 0.0, 0.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRecord {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraRecord {
    pub fn to_camera(&self) -> Result<PinholeCamera> {
        PinholeCamera::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)
    }
}

impl From<&PinholeCamera> for CameraRecord {
    fn from(c: &PinholeCamera) -> Self {
        CameraRecord { fx: c.fx, fy: c.fy, cx: c.cx, cy: c.cy, width: c.width, height: c.height }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionConfig {
    pub seed: u64,
    pub method: AcquisitionMethod,
    pub object_count: usize,
    pub tip_points: usize,
    pub pivot_poses: usize,
    /// Tool tip in the marker (hand) frame, meters.
    pub tip_offset: [f64; 3],
    /// Pivot divot location in the base frame, meters.
    pub pivot_point: [f64; 3],
    /// Ground-truth `camera -> hand` transform.
    pub hand_eye: PoseRecord,
    /// Calibration board pose in the base frame (robot method).
    pub board_in_base: PoseRecord,
    pub trajectory: TrajectoryShape,
    pub tracker_rate_hz: f64,
    pub camera_rate_hz: f64,
    /// Stop-and-go poses of the robot method.
    pub keyframes: usize,
    /// Seconds by which the camera clock lags; camera timestamps are
    /// `t − offset` (tracker method only).
    pub injected_time_offset: f64,
    pub noise: SessionNoise,
    pub background_scan_points: usize,
    /// Displacement of the initial background guess from the truth.
    pub background_init_error: NoiseModel,
    pub camera: CameraRecord,
}

impl Default for SessionConfig {
    fn default() -> Self {
        let x = RigidTransform::from_axis_angle(
            Vec3::new(0.3, -0.2, 1.0),
            110.0,
            Vec3::new(0.04, -0.03, 0.07),
            FrameId::named("CB"),
            FrameId::named("MB"),
        );
        let board = RigidTransform::from_axis_angle(
            Vec3::z(),
            15.0,
            Vec3::new(0.5, 0.3, 0.0),
            FrameId::named("BB"),
            FrameId::named("TB"),
        );
        SessionConfig {
            seed: 0,
            method: AcquisitionMethod::Tracker,
            object_count: 3,
            tip_points: 25,
            pivot_poses: 50,
            tip_offset: [0.004, -0.002, 0.16],
            pivot_point: [0.35, -0.3, 0.0],
            hand_eye: PoseRecord::from(&x),
            board_in_base: PoseRecord::from(&board),
            trajectory: TrajectoryShape::default(),
            tracker_rate_hz: 60.0,
            camera_rate_hz: 30.0,
            keyframes: 24,
            injected_time_offset: 0.1,
            noise: SessionNoise {
                static_: NoiseModel { sigma_t: 0.67e-3, sigma_r: 0.12 },
                dynamic: NoiseModel { sigma_t: 0.92e-3, sigma_r: 0.16 },
            },
            background_scan_points: 1500,
            background_init_error: NoiseModel { sigma_t: 5e-3, sigma_r: 2.0 },
            camera: CameraRecord { fx: 525.0, fy: 525.0, cx: 320.0, cy: 240.0, width: 640, height: 480 },
        }
    }
}

impl SessionConfig {
    pub fn zero_noise(mut self) -> Self {
        self.noise = SessionNoise { static_: NoiseModel::ZERO, dynamic: NoiseModel::ZERO };
        self
    }

    /// Base and hand frame labels of the configured method.
    pub fn frames(&self) -> (FrameId, FrameId) {
        match self.method {
            AcquisitionMethod::Robot => (FrameId::named("RB"), FrameId::named("EE")),
            AcquisitionMethod::Tracker => (FrameId::named("TB"), FrameId::named("MB")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        let t = &self.trajectory;
        if !(self.tracker_rate_hz > 0.0 && self.camera_rate_hz > 0.0) {
            return bad("sample rates must be positive");
        }
        if !(t.duration_s > 0.0 && t.radius_m > 0.0 && t.angular_speed > 0.0) {
            return bad("trajectory duration, radius and angular speed must be positive");
        }
        if !(0.0..1.0).contains(&t.speed_variation) {
            return bad("speed_variation must lie in [0, 1)");
        }
        if self.pivot_poses < 3 {
            return bad("pivot_poses must be at least 3");
        }
        if self.tip_points < 4 {
            return bad("tip_points must be at least 4");
        }
        if self.method == AcquisitionMethod::Robot && self.keyframes < 2 {
            return bad("robot method needs at least 2 keyframes");
        }
        if !self.injected_time_offset.is_finite() {
            return bad("injected_time_offset must be finite");
        }
        if Vec3::from(self.tip_offset).norm() < 1e-3 {
            return bad("tip_offset must be at least 1 mm long");
        }
        if self.object_count > crate::render::MAX_OBJECTS {
            return bad("too many objects");
        }
        self.noise.static_.validate()?;
        self.noise.dynamic.validate()?;
        self.background_init_error.validate()?;
        self.camera.to_camera()?;
        self.hand_eye.to_transform(FrameId::named("CB"), FrameId::named("MB"))?;
        self.board_in_base.to_transform(FrameId::named("BB"), FrameId::named("TB"))?;
        Ok(())
    }
}

/// Noise-free description of a session.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionGroundTruth {
    pub scene: Scene,
    pub background: SceneObject,
    pub tip_offset: Vec3,
    pub pivot_point: Vec3,
    /// `camera -> hand`.
    pub hand_eye: RigidTransform,
    /// `board -> base`.
    pub board_in_base: RigidTransform,
    /// Camera clock lag, seconds.
    pub time_offset: f64,
    /// Hand poses at the tracker rate (or robot keyframes), physical time.
    pub marker_trajectory: Trajectory,
    /// Camera poses at the same timestamps as `marker_trajectory`.
    pub camera_trajectory: Trajectory,
}

/// Camera pose at time `t`, looking at the orbit center with y pointing down.
pub fn camera_pose_at(shape: &TrajectoryShape, base: &FrameId, t: f64) -> RigidTransform {
    let w = shape.angular_speed;
    let theta = w * t + shape.speed_variation * (w * t).sin();
    let r = shape.radius_m * (1.0 + 0.1 * (0.8 * t).sin());
    let c = Vec3::from(shape.center);
    let p = c + Vec3::new(r * theta.cos(), r * theta.sin(), shape.height_m + 0.05 * (1.7 * t).sin());
    let target = c + Vec3::new(0.03 * (0.9 * t).sin(), 0.03 * (1.1 * t).cos(), 0.05);
    let z = (target - p).normalize();
    let x = z.cross(&Vec3::z()).normalize();
    let y = z.cross(&x);
    let rot = Rotation3::from_basis_unchecked(&[x, y, z]);
    RigidTransform::new(UnitQuaternion::from_rotation_matrix(&rot), p, FrameId::named(CAMERA_FRAME), base.clone())
}

fn sample_times(duration: f64, rate: f64) -> Vec<f64> {
    let n = (duration * rate + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 / rate).collect()
}

/// Timestamps of the ground-truth hand/camera trajectories.
fn truth_times(config: &SessionConfig) -> Vec<f64> {
    let d = config.trajectory.duration_s;
    match config.method {
        AcquisitionMethod::Tracker => sample_times(d, config.tracker_rate_hz),
        AcquisitionMethod::Robot => {
            let n = config.keyframes;
            (0..n).map(|k| d * k as f64 / (n - 1) as f64).collect()
        }
    }
}

fn background_mesh() -> Result<TriangleMesh> {
    // floor with a back and a side wall, so the fit is constrained in all
    // six degrees of freedom
    let (e, h) = (1.1, 0.6);
    let v = vec![
        Vec3::new(-e, -e, 0.0),
        Vec3::new(e, -e, 0.0),
        Vec3::new(e, e, 0.0),
        Vec3::new(-e, e, 0.0),
        Vec3::new(e, -e, h),
        Vec3::new(e, e, h),
        Vec3::new(-e, e, h),
    ];
    let t = vec![[0, 1, 2], [0, 2, 3], [1, 5, 2], [1, 4, 5], [2, 5, 6], [2, 6, 3]];
    TriangleMesh::new(v, t, FrameId::named(BACKGROUND_ID))
}

struct Primitive {
    mesh: TriangleMesh,
    footprint: f64,
    rest_height: f64,
}

fn random_primitive(i: usize, rng: &mut ChaCha8Rng) -> Result<Primitive> {
    let frame = FrameId::named(&format!("obj_{i}"));
    match i % 3 {
        0 => {
            let s = Vec3::new(rng.gen_range(0.04..0.12), rng.gen_range(0.04..0.12), rng.gen_range(0.03..0.10));
            Ok(Primitive { footprint: 0.5 * s.xy().norm(), rest_height: s.z / 2.0, mesh: box_mesh(s, frame)? })
        }
        1 => {
            let r = rng.gen_range(0.03..0.06);
            Ok(Primitive { footprint: r, rest_height: r, mesh: icosphere(r, 2, frame)? })
        }
        _ => {
            let (r, h) = (rng.gen_range(0.025..0.05), rng.gen_range(0.05..0.12));
            Ok(Primitive { footprint: r, rest_height: h / 2.0, mesh: cylinder(r, h, 24, frame)? })
        }
    }
}

/// Primitive objects at random non-intersecting poses on the table, the
/// background mesh and all noise-free calibration quantities.
pub fn generate_scene(config: &SessionConfig) -> Result<SessionGroundTruth> {
    config.validate()?;
    let (base, hand) = config.frames();
    let camera = FrameId::named(CAMERA_FRAME);
    let mut rng = stage_rng(config.seed, STREAM_SCENE);
    let center = Vec3::from(config.trajectory.center);
    let mut placed: Vec<(Vec3, f64)> = Vec::new();
    let mut objects = Vec::with_capacity(config.object_count);
    for i in 0..config.object_count {
        let prim = random_primitive(i, &mut rng)?;
        let mut spot = None;
        for _ in 0..1000 {
            let c = center + Vec3::new(rng.gen_range(-0.25..0.25), rng.gen_range(-0.2..0.2), 0.0);
            if placed.iter().all(|(q, r)| (c - q).norm() > r + prim.footprint + 0.01) {
                spot = Some(c);
                break;
            }
        }
        let c = spot.ok_or_else(|| {
            Error::InvalidConfig(format!("could not place {} objects on the table", config.object_count))
        })?;
        placed.push((c, prim.footprint));
        let yaw = rng.gen_range(-180.0..180.0);
        let pose = RigidTransform::from_axis_angle(
            Vec3::z(),
            yaw,
            c + Vec3::new(0.0, 0.0, prim.rest_height),
            prim.mesh.frame().clone(),
            base.clone(),
        );
        objects.push(SceneObject { object_id: prim.mesh.frame().as_str().to_string(), mesh: prim.mesh, pose });
    }
    let scene = Scene::new(base.clone(), objects)?;
    let background = SceneObject {
        object_id: BACKGROUND_ID.into(),
        mesh: background_mesh()?,
        pose: RigidTransform::from_axis_angle(Vec3::z(), 5.0, center, FrameId::named(BACKGROUND_ID), base.clone()),
    };
    let hand_eye = config.hand_eye.to_transform(camera.clone(), hand.clone())?;
    let times = truth_times(config);
    let cams: Vec<_> = times.iter().map(|&t| camera_pose_at(&config.trajectory, &base, t)).collect();
    let markers = cams.iter().map(|c| compose(c, &invert(&hand_eye))).collect::<Result<Vec<_>>>()?;
    Ok(SessionGroundTruth {
        scene,
        background,
        tip_offset: Vec3::from(config.tip_offset),
        pivot_point: Vec3::from(config.pivot_point),
        board_in_base: config.board_in_base.to_transform(FrameId::named(BOARD_FRAME), base.clone())?,
        time_offset: match config.method {
            AcquisitionMethod::Tracker => config.injected_time_offset,
            AcquisitionMethod::Robot => 0.0,
        },
        marker_trajectory: Trajectory::from_poses(base.clone(), hand.clone(), &times, markers)?,
        camera_trajectory: Trajectory::from_poses(base, camera, &times, cams)?,
        hand_eye,
    })
}

/// Rotation taking unit vector `a` onto unit vector `b`.
fn rotation_between(a: &Vec3, b: &Vec3) -> UnitQuaternion<f64> {
    UnitQuaternion::rotation_between(a, b).unwrap_or_else(|| {
        // antiparallel: half turn about any perpendicular axis
        let perp = if a.x.abs() < 0.9 { a.cross(&Vec3::x()) } else { a.cross(&Vec3::y()) };
        UnitQuaternion::from_axis_angle(&Unit::new_normalize(perp), std::f64::consts::PI)
    })
}

/// Marker pose placing the tool tip at `tip_point` with the tool axis along
/// `approach`, tilted by up to `max_tilt_deg` and spun randomly about it.
fn tool_pose(
    gt: &SessionGroundTruth,
    hand: &FrameId,
    base: &FrameId,
    tip_point: &Vec3,
    approach: &Vec3,
    max_tilt_deg: f64,
    rng: &mut ChaCha8Rng,
) -> RigidTransform {
    let tool_axis = gt.tip_offset.normalize();
    let tilt_axis: [f64; 3] = UnitSphere.sample(rng);
    let tilt = UnitQuaternion::from_axis_angle(
        &Unit::new_normalize(Vec3::from(tilt_axis)),
        rng.gen_range(0.0..max_tilt_deg).to_radians(),
    );
    let dir = tilt * approach.normalize();
    let spin = UnitQuaternion::from_axis_angle(&Unit::new_normalize(dir), rng.gen_range(-180.0f64..180.0).to_radians());
    let r = spin * rotation_between(&tool_axis, &dir);
    RigidTransform::new(r, tip_point - r * gt.tip_offset, hand.clone(), base.clone())
}

/// Tool poses pivoting about the ground-truth pivot point, tool pointing
/// down with up to 35° of tilt in random directions.
pub fn simulate_pivot_session<R: Rng>(
    gt: &SessionGroundTruth,
    noise: &NoiseModel,
    n_poses: usize,
    rng: &mut R,
    pose_rng: &mut ChaCha8Rng,
) -> Result<Vec<RigidTransform>> {
    if n_poses < 3 {
        return Err(Error::InvalidConfig(format!("pivot session needs at least 3 poses, got {n_poses}")));
    }
    noise.validate()?;
    let base = gt.marker_trajectory.parent_frame().clone();
    let hand = gt.marker_trajectory.child_frame().clone();
    Ok((0..n_poses)
        .map(|_| {
            let pose = tool_pose(gt, &hand, &base, &gt.pivot_point, &-Vec3::z(), 35.0, pose_rng);
            perturb_pose(&pose, noise, rng)
        })
        .collect())
}

/// Tip touches on uniformly sampled, non-bottom surface points of one object.
/// Returns the (noisy) session and the touched points in mesh coordinates.
pub fn simulate_tip_measurements<R: Rng>(
    gt: &SessionGroundTruth,
    object_id: &str,
    n_points: usize,
    noise: &NoiseModel,
    rng: &mut R,
    pose_rng: &mut ChaCha8Rng,
) -> Result<(TipMeasurementSession, PointCloud)> {
    let obj = gt
        .scene
        .objects()
        .iter()
        .find(|o| o.object_id == object_id)
        .ok_or_else(|| Error::UnknownObject(object_id.to_string()))?;
    if n_points < crate::annotate::MIN_TIPS {
        return Err(Error::TooFewPoints { needed: crate::annotate::MIN_TIPS, got: n_points });
    }
    noise.validate()?;
    let base = gt.marker_trajectory.parent_frame().clone();
    let hand = gt.marker_trajectory.child_frame().clone();
    let pose = &obj.pose;
    let touches = sample_surface(&obj.mesh, n_points, pose_rng, |n| pose.transform_vector(n).z >= MAX_DOWNWARD_NORMAL);
    let mut poses = Vec::with_capacity(n_points);
    let mut local = Vec::with_capacity(n_points);
    for (p, tri) in touches {
        let normal = pose.transform_vector(&triangle_normal(&obj.mesh.triangle(tri)));
        let marker = tool_pose(gt, &hand, &base, &pose.transform_point(&p), &-normal, 20.0, pose_rng);
        poses.push(perturb_pose(&marker, noise, rng));
        local.push(p);
    }
    Ok((
        TipMeasurementSession { marker_poses: poses, tip_offset: gt.tip_offset },
        PointCloud::new(local, obj.mesh.frame().clone())?,
    ))
}

/// Robot hand-eye data: hand pose and observed board pose at each keyframe.
#[derive(Clone, Debug, PartialEq)]
pub struct BoardObservations {
    /// Measured `board -> base`.
    pub board_in_base: RigidTransform,
    /// `(hand -> base, board -> camera)` per keyframe.
    pub frames: Vec<(RigidTransform, RigidTransform)>,
}

/// Noisy streams of one recording.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    /// Tracker rate with dynamic noise, or robot keyframes with static noise.
    pub marker_trajectory: Trajectory,
    /// Board-derived camera poses at the camera rate, on the camera clock
    /// (tracker method).
    pub camera_trajectory: Option<Trajectory>,
    pub board: Option<BoardObservations>,
}

pub fn simulate_recording(gt: &SessionGroundTruth, config: &SessionConfig) -> Result<Recording> {
    config.validate()?;
    let mut marker_rng = stage_rng(config.seed, STREAM_MARKER_NOISE);
    let mut camera_rng = stage_rng(config.seed, STREAM_CAMERA_NOISE);
    let base = gt.marker_trajectory.parent_frame().clone();
    match config.method {
        AcquisitionMethod::Tracker => {
            let marker =
                gt.marker_trajectory.map_poses(base.clone(), gt.marker_trajectory.child_frame().clone(), |p| {
                    Ok(perturb_pose(p, &config.noise.dynamic, &mut marker_rng))
                })?;
            let phys = sample_times(config.trajectory.duration_s, config.camera_rate_hz);
            let labels: Vec<f64> = phys.iter().map(|t| t - gt.time_offset).collect();
            let cams: Vec<_> = phys
                .iter()
                .map(|&t| {
                    perturb_pose(&camera_pose_at(&config.trajectory, &base, t), &config.noise.static_, &mut camera_rng)
                })
                .collect();
            Ok(Recording {
                marker_trajectory: marker,
                camera_trajectory: Some(Trajectory::from_poses(base, FrameId::named(CAMERA_FRAME), &labels, cams)?),
                board: None,
            })
        }
        AcquisitionMethod::Robot => {
            let mut board_rng = stage_rng(config.seed, STREAM_HANDEYE);
            let marker =
                gt.marker_trajectory.map_poses(base.clone(), gt.marker_trajectory.child_frame().clone(), |p| {
                    Ok(perturb_pose(p, &config.noise.static_, &mut marker_rng))
                })?;
            let frames = gt
                .marker_trajectory
                .samples()
                .iter()
                .zip(marker.samples())
                .zip(gt.camera_trajectory.samples())
                .map(|((_, noisy_hand), cam)| {
                    let board_in_camera = compose(&invert(&cam.pose), &gt.board_in_base)?;
                    Ok((
                        noisy_hand.pose.clone(),
                        perturb_pose(&board_in_camera, &config.noise.static_, &mut camera_rng),
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Recording {
                marker_trajectory: marker,
                camera_trajectory: None,
                board: Some(BoardObservations {
                    board_in_base: perturb_pose(&gt.board_in_base, &config.noise.static_, &mut board_rng),
                    frames,
                }),
            })
        }
    }
}

/// Partial scan of the background (base frame, static noise per point) and a
/// displaced initial guess for its pose.
pub fn simulate_background_scan(
    gt: &SessionGroundTruth,
    config: &SessionConfig,
) -> Result<(PointCloud, RigidTransform)> {
    let mut rng = stage_rng(config.seed, STREAM_BACKGROUND);
    let bg = &gt.background;
    let sigma = config.noise.static_.sigma_t;
    let points: Vec<Vec3> = sample_surface(&bg.mesh, config.background_scan_points, &mut rng, |_| true)
        .into_iter()
        .map(|(p, _)| {
            let n = Vec3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            );
            bg.pose.transform_point(&p) + n * sigma
        })
        .collect();
    let e = &config.background_init_error;
    let base = bg.pose.to_frame().clone();
    let offset = RigidTransform::from_axis_angle(
        Vec3::new(0.3, 0.2, 1.0),
        e.sigma_r,
        Vec3::new(1.0, -1.0, 0.5).normalize() * e.sigma_t,
        base.clone(),
        base.clone(),
    );
    Ok((PointCloud::new(points, base)?, compose(&offset, &bg.pose)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TipObservation {
    pub object_id: String,
    pub session: TipMeasurementSession,
    /// Touched points in mesh coordinates, in touch order.
    pub correspondences: PointCloud,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservedSession {
    pub pivot_poses: Vec<RigidTransform>,
    pub tips: Vec<TipObservation>,
    pub recording: Recording,
    pub background_scan: PointCloud,
    /// Initial `background -> base` guess.
    pub background_init: RigidTransform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedSession {
    pub config: SessionConfig,
    pub truth: SessionGroundTruth,
    pub observed: ObservedSession,
}

/// Generates the scene and every observation stream of a session.
pub fn simulate_session(config: &SessionConfig) -> Result<SimulatedSession> {
    let truth = generate_scene(config)?;
    let noise = config.noise.static_;
    let mut pivot_noise = stage_rng(config.seed, STREAM_PIVOT);
    let mut pivot_pose_rng = stage_rng(config.seed, STREAM_PIVOT | (1 << 32));
    let pivot_poses =
        simulate_pivot_session(&truth, &noise, config.pivot_poses, &mut pivot_noise, &mut pivot_pose_rng)?;
    let tips = truth
        .scene
        .objects()
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let mut noise_rng = stage_rng(config.seed, STREAM_TIPS + i as u64);
            let mut pose_rng = stage_rng(config.seed, (STREAM_TIPS + i as u64) | (1 << 32));
            let (session, correspondences) = simulate_tip_measurements(
                &truth,
                &o.object_id,
                config.tip_points,
                &noise,
                &mut noise_rng,
                &mut pose_rng,
            )?;
            Ok(TipObservation { object_id: o.object_id.clone(), session, correspondences })
        })
        .collect::<Result<Vec<_>>>()?;
    let recording = simulate_recording(&truth, config)?;
    let (background_scan, background_init) = simulate_background_scan(&truth, config)?;
    Ok(SimulatedSession {
        config: config.clone(),
        truth,
        observed: ObservedSession { pivot_poses, tips, recording, background_scan, background_init },
    })
}
