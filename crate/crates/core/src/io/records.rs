use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_json, resolve_ref, Document};
use crate::annotate::{AcquisitionMethod, ErrorBudget, ErrorStage, ObjectAnnotation, StageError};
use crate::calib::{HandEyeObservation, HandEyeResult, PivotResult};
use crate::error::{Error, Result};
use crate::geom::{FrameId, RigidTransform, TimedPose, Trajectory, Vec3};
use crate::registration::PointCloud;
use crate::sim::{CameraRecord, SessionConfig};
use crate::sync::SyncResult;

pub const UNITS: &str = "m,s";
pub const QUATERNION_CONVENTION: &str = "wxyz-hamilton";

fn finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

fn frame(name: &str) -> Result<FrameId> {
    FrameId::new(name)
}

/// Rotation `q = [w, x, y, z]` (Hamilton, active) and translation `p` in
/// meters. Quaternions are normalized on conversion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPose")]
pub struct PoseRecord {
    pub q: [f64; 4],
    pub p: [f64; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPose {
    q: [f64; 4],
    p: [f64; 3],
}

fn check_pose(q: &[f64; 4], p: &[f64; 3]) -> std::result::Result<(), String> {
    if !finite(q) || !finite(p) {
        return Err("pose values must be finite".into());
    }
    if q.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-9 {
        return Err("quaternion has zero norm".into());
    }
    Ok(())
}

impl TryFrom<RawPose> for PoseRecord {
    type Error = String;

    fn try_from(r: RawPose) -> std::result::Result<Self, String> {
        check_pose(&r.q, &r.p)?;
        Ok(PoseRecord { q: r.q, p: r.p })
    }
}

impl From<&RigidTransform> for PoseRecord {
    fn from(t: &RigidTransform) -> Self {
        PoseRecord { q: t.wxyz(), p: (*t.translation()).into() }
    }
}

impl PoseRecord {
    pub fn to_transform(&self, from: FrameId, to: FrameId) -> Result<RigidTransform> {
        check_pose(&self.q, &self.p).map_err(Error::InvalidConfig)?;
        RigidTransform::from_wxyz(self.q, Vec3::from(self.p), from, to)
    }
}

impl Document for PoseRecord {}

/// A single labeled transform mapping `from` coordinates into `to`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FramedPose {
    pub from: String,
    pub to: String,
    pub q: [f64; 4],
    pub p: [f64; 3],
}

impl From<&RigidTransform> for FramedPose {
    fn from(t: &RigidTransform) -> Self {
        FramedPose {
            from: t.from_frame().to_string(),
            to: t.to_frame().to_string(),
            q: t.wxyz(),
            p: (*t.translation()).into(),
        }
    }
}

impl FramedPose {
    pub fn to_transform(&self) -> Result<RigidTransform> {
        PoseRecord { q: self.q, p: self.p }.to_transform(frame(&self.from)?, frame(&self.to)?)
    }
}

impl Document for FramedPose {
    fn validate(&self) -> Result<()> {
        self.to_transform().map(drop)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryMeta {
    pub parent_frame: String,
    pub child_frame: String,
    /// Nominal rate from the median sample spacing; informational.
    #[serde(default)]
    pub rate_hz: Option<f64>,
    pub units: String,
    pub quat: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSample {
    pub t: f64,
    pub q: [f64; 4],
    pub p: [f64; 3],
}

/// Timestamped poses of `child_frame` in `parent_frame`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryFile {
    pub meta: TrajectoryMeta,
    pub samples: Vec<PoseSample>,
}

impl From<&Trajectory> for TrajectoryFile {
    fn from(traj: &Trajectory) -> Self {
        let mut gaps: Vec<f64> = traj.samples().windows(2).map(|w| w[1].t - w[0].t).collect();
        gaps.sort_by(f64::total_cmp);
        TrajectoryFile {
            meta: TrajectoryMeta {
                parent_frame: traj.parent_frame().to_string(),
                child_frame: traj.child_frame().to_string(),
                rate_hz: gaps.get(gaps.len() / 2).map(|g| 1.0 / g),
                units: UNITS.into(),
                quat: QUATERNION_CONVENTION.into(),
            },
            samples: traj
                .samples()
                .iter()
                .map(|s| PoseSample { t: s.t, q: s.pose.wxyz(), p: (*s.pose.translation()).into() })
                .collect(),
        }
    }
}

impl TrajectoryFile {
    pub fn to_trajectory(&self) -> Result<Trajectory> {
        if self.meta.units != UNITS {
            return Err(Error::InvalidTrajectory(format!("units must be \"{UNITS}\", got \"{}\"", self.meta.units)));
        }
        if self.meta.quat != QUATERNION_CONVENTION {
            return Err(Error::InvalidTrajectory(format!(
                "quat must be \"{QUATERNION_CONVENTION}\", got \"{}\"",
                self.meta.quat
            )));
        }
        let parent = frame(&self.meta.parent_frame)?;
        let child = frame(&self.meta.child_frame)?;
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let pose = PoseRecord { q: s.q, p: s.p }
                    .to_transform(child.clone(), parent.clone())
                    .map_err(|e| Error::InvalidTrajectory(format!("sample {i}: {e}")))?;
                Ok(TimedPose { t: s.t, pose })
            })
            .collect::<Result<Vec<_>>>()?;
        Trajectory::new(parent, child, samples)
    }
}

impl Document for TrajectoryFile {
    fn validate(&self) -> Result<()> {
        self.to_trajectory().map(drop)
    }
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    read_json::<TrajectoryFile>(path)?.to_trajectory()
}

/// Untimed poses of `child_frame` in `parent_frame`; with `tip_offset` it
/// doubles as a tip-measurement session.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseListFile {
    pub parent_frame: String,
    pub child_frame: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tip_offset: Option<[f64; 3]>,
    pub poses: Vec<PoseRecord>,
}

impl PoseListFile {
    pub fn new(parent: &FrameId, child: &FrameId, poses: &[RigidTransform]) -> Self {
        PoseListFile {
            parent_frame: parent.to_string(),
            child_frame: child.to_string(),
            tip_offset: None,
            poses: poses.iter().map(PoseRecord::from).collect(),
        }
    }

    pub fn to_poses(&self) -> Result<Vec<RigidTransform>> {
        let (parent, child) = (frame(&self.parent_frame)?, frame(&self.child_frame)?);
        self.poses.iter().map(|p| p.to_transform(child.clone(), parent.clone())).collect()
    }
}

impl Document for PoseListFile {
    fn validate(&self) -> Result<()> {
        if let Some(t) = self.tip_offset {
            if !finite(&t) {
                return Err(Error::InvalidConfig("tip_offset must be finite".into()));
            }
        }
        self.to_poses().map(drop)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointCloudFile {
    pub frame: String,
    pub points: Vec<[f64; 3]>,
}

impl From<&PointCloud> for PointCloudFile {
    fn from(c: &PointCloud) -> Self {
        PointCloudFile { frame: c.frame().to_string(), points: c.points().iter().map(|p| (*p).into()).collect() }
    }
}

impl PointCloudFile {
    pub fn to_cloud(&self) -> Result<PointCloud> {
        PointCloud::new(self.points.iter().map(|p| Vec3::from(*p)).collect(), frame(&self.frame)?)
    }
}

impl Document for PointCloudFile {
    fn validate(&self) -> Result<()> {
        self.to_cloud().map(drop)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoardObservationRecord {
    /// `hand -> base`.
    pub hand: PoseRecord,
    /// `board -> camera`.
    pub board_in_camera: PoseRecord,
}

/// Robot hand-eye input: the measured board pose and, per keyframe, the hand
/// pose and the board pose seen by the camera.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandEyeObservationsFile {
    pub base_frame: String,
    pub hand_frame: String,
    pub camera_frame: String,
    pub board_frame: String,
    /// `board -> base`.
    pub board_in_base: PoseRecord,
    pub observations: Vec<BoardObservationRecord>,
}

impl HandEyeObservationsFile {
    pub fn to_observations(&self) -> Result<Vec<HandEyeObservation>> {
        let base = frame(&self.base_frame)?;
        let hand = frame(&self.hand_frame)?;
        let camera = frame(&self.camera_frame)?;
        let board = frame(&self.board_frame)?;
        let board_in_base = self.board_in_base.to_transform(board.clone(), base.clone())?;
        self.observations
            .iter()
            .map(|o| {
                HandEyeObservation::from_board(
                    o.hand.to_transform(hand.clone(), base.clone())?,
                    &board_in_base,
                    &o.board_in_camera.to_transform(board.clone(), camera.clone())?,
                )
            })
            .collect()
    }
}

impl Document for HandEyeObservationsFile {
    fn validate(&self) -> Result<()> {
        self.to_observations().map(drop)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PivotResultFile {
    pub marker_frame: String,
    pub base_frame: String,
    /// Meters, marker frame.
    pub tip_offset: [f64; 3],
    /// Meters, base frame.
    pub pivot_point: [f64; 3],
    pub rmse_mm: f64,
    pub condition_number: f64,
}

impl PivotResultFile {
    pub fn new(r: &PivotResult, marker: &FrameId, base: &FrameId) -> Self {
        PivotResultFile {
            marker_frame: marker.to_string(),
            base_frame: base.to_string(),
            tip_offset: r.tip_offset.into(),
            pivot_point: r.pivot_point.into(),
            rmse_mm: r.rmse * 1e3,
            condition_number: r.condition_number,
        }
    }
}

impl Document for PivotResultFile {
    fn validate(&self) -> Result<()> {
        frame(&self.marker_frame)?;
        frame(&self.base_frame)?;
        if finite(&self.tip_offset) && finite(&self.pivot_point) && self.rmse_mm >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidConfig("pivot result values must be finite with non-negative rmse".into()))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameErrorRecord {
    pub trans_mm: f64,
    pub rot_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandEyeResultFile {
    /// `camera -> hand`.
    pub x: FramedPose,
    pub trans_residual_rmse_mm: f64,
    pub rot_residual_rmse_deg: f64,
    pub per_frame: Vec<FrameErrorRecord>,
}

impl From<&HandEyeResult> for HandEyeResultFile {
    fn from(r: &HandEyeResult) -> Self {
        HandEyeResultFile {
            x: FramedPose::from(&r.x),
            trans_residual_rmse_mm: r.trans_residual_rmse * 1e3,
            rot_residual_rmse_deg: r.rot_residual_rmse,
            per_frame: r
                .per_frame_errors
                .iter()
                .map(|e| FrameErrorRecord { trans_mm: e.trans * 1e3, rot_deg: e.rot_deg })
                .collect(),
        }
    }
}

impl Document for HandEyeResultFile {
    fn validate(&self) -> Result<()> {
        self.x.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffsetRecord {
    pub offset_s: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyncResultFile {
    /// Seconds to add to stream B timestamps.
    pub offset_s: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Exhaustive-search reference, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OffsetRecord>,
}

impl SyncResultFile {
    pub fn new(r: &SyncResult, oracle: Option<&SyncResult>) -> Self {
        SyncResultFile {
            offset_s: r.offset,
            residual: r.residual,
            iterations: r.iterations,
            oracle: oracle.map(|o| OffsetRecord { offset_s: o.offset, residual: o.residual }),
        }
    }
}

impl Document for SyncResultFile {}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageErrorRecord {
    pub trans_rmse_mm: f64,
    pub rot_rmse_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageRecord {
    pub name: String,
    pub trans_rmse_mm: f64,
    pub rot_rmse_deg: f64,
    pub lever_arm_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamic: Option<StageErrorRecord>,
}

impl From<&ErrorStage> for StageRecord {
    fn from(s: &ErrorStage) -> Self {
        StageRecord {
            name: s.name.clone(),
            trans_rmse_mm: s.trans_rmse * 1e3,
            rot_rmse_deg: s.rot_rmse,
            lever_arm_m: s.lever_arm,
            dynamic: s
                .dynamic
                .map(|d| StageErrorRecord { trans_rmse_mm: d.trans_rmse * 1e3, rot_rmse_deg: d.rot_rmse }),
        }
    }
}

impl StageRecord {
    pub fn to_stage(&self) -> ErrorStage {
        ErrorStage {
            name: self.name.clone(),
            trans_rmse: self.trans_rmse_mm * 1e-3,
            rot_rmse: self.rot_rmse_deg,
            lever_arm: self.lever_arm_m,
            dynamic: self.dynamic.map(|d| StageError { trans_rmse: d.trans_rmse_mm * 1e-3, rot_rmse: d.rot_rmse_deg }),
        }
    }
}

/// Input of the `budget` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StagesFile {
    pub stages: Vec<StageRecord>,
}

impl Document for StagesFile {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetRecord {
    pub stages: Vec<StageRecord>,
    pub lower_mm: f64,
    pub upper_mm: f64,
}

impl From<&ErrorBudget> for BudgetRecord {
    fn from(b: &ErrorBudget) -> Self {
        BudgetRecord {
            stages: b.stages.iter().map(StageRecord::from).collect(),
            lower_mm: b.lower_bound * 1e3,
            upper_mm: b.upper_bound * 1e3,
        }
    }
}

impl Document for BudgetRecord {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectRecord {
    pub object_id: String,
    /// Mesh path relative to the annotation file.
    pub mesh_ref: String,
    /// `mesh -> base`.
    pub pose: PoseRecord,
    pub correspondence_rmse_mm: f64,
    pub icp_rmse_mm: f64,
    pub point_count: usize,
    pub method: AcquisitionMethod,
}

impl From<&ObjectAnnotation> for ObjectRecord {
    fn from(a: &ObjectAnnotation) -> Self {
        ObjectRecord {
            object_id: a.object_id.clone(),
            mesh_ref: a.mesh_ref.clone(),
            pose: PoseRecord::from(&a.pose),
            correspondence_rmse_mm: a.correspondence_rmse * 1e3,
            icp_rmse_mm: a.icp_rmse * 1e3,
            point_count: a.point_count,
            method: a.method,
        }
    }
}

impl ObjectRecord {
    pub fn to_annotation(&self, base: &FrameId) -> Result<ObjectAnnotation> {
        Ok(ObjectAnnotation {
            object_id: self.object_id.clone(),
            mesh_ref: self.mesh_ref.clone(),
            pose: self.pose.to_transform(frame(&self.object_id)?, base.clone())?,
            correspondence_rmse: self.correspondence_rmse_mm * 1e-3,
            icp_rmse: self.icp_rmse_mm * 1e-3,
            point_count: self.point_count,
            method: self.method,
        })
    }
}

/// Per-scene annotation output. Poses map each object's mesh frame into
/// `base_frame`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationFile {
    pub base_frame: String,
    pub objects: Vec<ObjectRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<ObjectRecord>,
    #[serde(default)]
    pub camera_trajectory_ref: Option<String>,
    #[serde(default)]
    pub error_budget: Option<BudgetRecord>,
}

impl AnnotationFile {
    fn records(&self) -> impl Iterator<Item = &ObjectRecord> {
        self.objects.iter().chain(&self.background)
    }

    /// Paths of every referenced file, resolved against `path`.
    pub fn references(&self, path: &Path) -> Vec<std::path::PathBuf> {
        self.records()
            .map(|o| resolve_ref(path, &o.mesh_ref))
            .chain(self.camera_trajectory_ref.iter().map(|r| resolve_ref(path, r)))
            .collect()
    }
}

impl Document for AnnotationFile {
    fn validate(&self) -> Result<()> {
        let base = frame(&self.base_frame)?;
        for o in self.records() {
            if !(o.correspondence_rmse_mm >= 0.0 && o.icp_rmse_mm >= 0.0) {
                return Err(Error::InvalidConfig(format!("object {}: rmse must be non-negative", o.object_id)));
            }
            o.to_annotation(&base)?;
        }
        Ok(())
    }
}

/// Reads an annotation and checks that every referenced file exists.
pub fn read_annotation(path: &Path) -> Result<AnnotationFile> {
    let doc: AnnotationFile = read_json(path)?;
    for r in doc.references(path) {
        if !r.is_file() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("referenced file {} does not exist", r.display()),
            });
        }
    }
    Ok(doc)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObjectRecord {
    pub object_id: String,
    /// PLY path relative to the scene file.
    pub mesh: String,
    /// `mesh -> base`.
    pub pose: PoseRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub base_frame: String,
    pub objects: Vec<SceneObjectRecord>,
}

impl Document for SceneFile {
    fn validate(&self) -> Result<()> {
        let base = frame(&self.base_frame)?;
        for o in &self.objects {
            o.pose.to_transform(frame(&o.object_id)?, base.clone())?;
        }
        Ok(())
    }
}

/// Fitted background pose.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundResultFile {
    /// `background mesh -> base`.
    pub pose: FramedPose,
    pub icp_rmse_mm: f64,
    pub point_count: usize,
}

impl Document for BackgroundResultFile {
    fn validate(&self) -> Result<()> {
        self.pose.validate()
    }
}

impl Document for CameraRecord {
    fn validate(&self) -> Result<()> {
        self.to_camera().map(drop)
    }
}

impl Document for SessionConfig {
    fn validate(&self) -> Result<()> {
        SessionConfig::validate(self)
    }
}

/// Surface points given directly, or as a tip-measurement session whose
/// tip positions are the points.
#[derive(Clone, Debug, PartialEq)]
pub enum PointsInput {
    Cloud(PointCloud),
    Tips(PoseListFile),
}

fn top_level_keys(path: &Path) -> Result<(String, Vec<String>)> {
    let text = super::read_text(path)?;
    let keys = match serde_json::from_str::<serde_json::Value>(&text) {
        Ok(serde_json::Value::Object(m)) => m.keys().cloned().collect(),
        _ => Vec::new(),
    };
    Ok((text, keys))
}

/// Reads a [`PointCloudFile`] or, when the document has a `poses` key, a
/// [`PoseListFile`].
pub fn read_points_input(path: &Path) -> Result<PointsInput> {
    let (text, keys) = top_level_keys(path)?;
    if keys.iter().any(|k| k == "poses") {
        Ok(PointsInput::Tips(super::parse_json(&text, path)?))
    } else {
        Ok(PointsInput::Cloud(super::parse_json::<PointCloudFile>(&text, path)?.to_cloud()?))
    }
}

/// Reads a hand-eye transform from a [`HandEyeResultFile`] or a bare
/// [`FramedPose`].
pub fn read_hand_eye(path: &Path) -> Result<RigidTransform> {
    let (text, keys) = top_level_keys(path)?;
    if keys.iter().any(|k| k == "x") {
        super::parse_json::<HandEyeResultFile>(&text, path)?.x.to_transform()
    } else {
        super::parse_json::<FramedPose>(&text, path)?.to_transform()
    }
}
