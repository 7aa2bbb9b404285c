//! Directory layout of a simulated session:
//!
//! ```text
//! config.json                      SessionConfig
//! camera.json                      pinhole intrinsics
//! meshes/<object_id>.ply           object meshes in their own frames
//! meshes/background.ply
//! truth/scene.json                 object poses (SceneFile)
//! truth/truth.json                 calibration truths, background pose
//! truth/marker_trajectory.json
//! truth/camera_trajectory.json
//! observed/pivot_poses.json        PoseListFile
//! observed/tips/<object_id>.json   PoseListFile, one pose per touch
//! observed/correspondences/<object_id>.json   PointCloudFile, mesh frame
//! observed/marker_trajectory.json
//! observed/camera_trajectory.json  tracker method, camera clock
//! observed/handeye_observations.json          robot method
//! observed/background_scan.json    PointCloudFile, base frame
//! observed/background_init.json    FramedPose
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ply::{read_ply, write_ply};
use super::records::*;
use super::{read_json, relative_ref, resolve_ref, write_json, Document};
use crate::annotate::TipMeasurementSession;
use crate::error::{Error, Result};
use crate::geom::{FrameId, TimedPose, Vec3};
use crate::render::{Scene, SceneObject};
use crate::sim::{
    BoardObservations, CameraRecord, ObservedSession, Recording, SessionConfig, SessionGroundTruth, SimulatedSession,
    TipObservation, BACKGROUND_ID, BOARD_FRAME, CAMERA_FRAME,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthFile {
    pub base_frame: String,
    pub hand_frame: String,
    /// Meters, hand frame.
    pub tip_offset: [f64; 3],
    /// Meters, base frame.
    pub pivot_point: [f64; 3],
    /// `camera -> hand`.
    pub hand_eye: FramedPose,
    /// `board -> base`.
    pub board_in_base: FramedPose,
    pub time_offset_s: f64,
    pub background: SceneObjectRecord,
}

impl Document for TruthFile {
    fn validate(&self) -> Result<()> {
        self.hand_eye.validate()?;
        self.board_in_base.validate()
    }
}

/// Loads a scene document and the meshes it references.
pub fn read_scene(path: &Path) -> Result<Scene> {
    let doc: SceneFile = read_json(path)?;
    let base = FrameId::new(&doc.base_frame)?;
    let objects = doc.objects.iter().map(|o| load_object(path, o, &base)).collect::<Result<Vec<_>>>()?;
    Scene::new(base, objects)
}

fn load_object(doc: &Path, o: &SceneObjectRecord, base: &FrameId) -> Result<SceneObject> {
    let mesh = read_ply(&resolve_ref(doc, &o.mesh))?;
    let frame = FrameId::new(&o.object_id)?;
    if mesh.frame() != &frame {
        return Err(Error::frames(&frame, mesh.frame()));
    }
    Ok(SceneObject { object_id: o.object_id.clone(), pose: o.pose.to_transform(frame, base.clone())?, mesh })
}

fn object_record(doc: &Path, dir: &Path, o: &SceneObject) -> SceneObjectRecord {
    SceneObjectRecord {
        object_id: o.object_id.clone(),
        mesh: relative_ref(doc, &dir.join("meshes").join(format!("{}.ply", o.object_id))),
        pose: PoseRecord::from(&o.pose),
    }
}

pub fn write_scene(path: &Path, dir: &Path, scene: &Scene) -> Result<()> {
    let doc = SceneFile {
        base_frame: scene.base_frame().to_string(),
        objects: scene.objects().iter().map(|o| object_record(path, dir, o)).collect(),
    };
    write_json(path, &doc)
}

pub fn write_session(dir: &Path, s: &SimulatedSession) -> Result<()> {
    let (truth, obs) = (&s.truth, &s.observed);
    let base = truth.scene.base_frame();
    let hand = truth.marker_trajectory.child_frame();
    write_json(&dir.join("config.json"), &s.config)?;
    write_json(&dir.join("camera.json"), &s.config.camera)?;
    for o in truth.scene.objects().iter().chain([&truth.background]) {
        write_ply(&dir.join("meshes").join(format!("{}.ply", o.object_id)), &o.mesh)?;
    }
    let t = dir.join("truth");
    write_scene(&t.join("scene.json"), dir, &truth.scene)?;
    let truth_path = t.join("truth.json");
    write_json(
        &truth_path,
        &TruthFile {
            base_frame: base.to_string(),
            hand_frame: hand.to_string(),
            tip_offset: truth.tip_offset.into(),
            pivot_point: truth.pivot_point.into(),
            hand_eye: FramedPose::from(&truth.hand_eye),
            board_in_base: FramedPose::from(&truth.board_in_base),
            time_offset_s: truth.time_offset,
            background: object_record(&truth_path, dir, &truth.background),
        },
    )?;
    write_json(&t.join("marker_trajectory.json"), &TrajectoryFile::from(&truth.marker_trajectory))?;
    write_json(&t.join("camera_trajectory.json"), &TrajectoryFile::from(&truth.camera_trajectory))?;

    let o = dir.join("observed");
    write_json(&o.join("pivot_poses.json"), &PoseListFile::new(base, hand, &obs.pivot_poses))?;
    for tip in &obs.tips {
        let name = format!("{}.json", tip.object_id);
        write_json(&o.join("tips").join(&name), &PoseListFile::new(base, hand, &tip.session.marker_poses))?;
        write_json(&o.join("correspondences").join(&name), &PointCloudFile::from(&tip.correspondences))?;
    }
    let rec = &obs.recording;
    write_json(&o.join("marker_trajectory.json"), &TrajectoryFile::from(&rec.marker_trajectory))?;
    if let Some(cam) = &rec.camera_trajectory {
        write_json(&o.join("camera_trajectory.json"), &TrajectoryFile::from(cam))?;
    }
    if let Some(board) = &rec.board {
        let doc = HandEyeObservationsFile {
            base_frame: base.to_string(),
            hand_frame: hand.to_string(),
            camera_frame: CAMERA_FRAME.into(),
            board_frame: BOARD_FRAME.into(),
            board_in_base: PoseRecord::from(&board.board_in_base),
            observations: board
                .frames
                .iter()
                .map(|(h, b)| BoardObservationRecord {
                    hand: PoseRecord::from(h),
                    board_in_camera: PoseRecord::from(b),
                })
                .collect(),
        };
        write_json(&o.join("handeye_observations.json"), &doc)?;
    }
    write_json(&o.join("background_scan.json"), &PointCloudFile::from(&obs.background_scan))?;
    write_json(&o.join("background_init.json"), &FramedPose::from(&obs.background_init))
}

fn check_frames(path: &Path, pairs: &[(&FrameId, &FrameId)]) -> Result<()> {
    for (expected, found) in pairs {
        if expected != found {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: Error::frames(expected, found).to_string(),
            });
        }
    }
    Ok(())
}

pub fn read_session(dir: &Path) -> Result<SimulatedSession> {
    let config: SessionConfig = read_json(&dir.join("config.json"))?;
    let t = dir.join("truth");
    let scene = read_scene(&t.join("scene.json"))?;
    let truth_path = t.join("truth.json");
    let tf: TruthFile = read_json(&truth_path)?;
    let base = FrameId::new(&tf.base_frame)?;
    let hand = FrameId::new(&tf.hand_frame)?;
    check_frames(&truth_path, &[(scene.base_frame(), &base)])?;
    let background = load_object(&truth_path, &tf.background, &base)?;
    if background.object_id != BACKGROUND_ID {
        return Err(Error::UnknownObject(background.object_id));
    }
    let marker_path = t.join("marker_trajectory.json");
    let marker = read_trajectory(&marker_path)?;
    check_frames(&marker_path, &[(&base, marker.parent_frame()), (&hand, marker.child_frame())])?;
    let truth = SessionGroundTruth {
        tip_offset: Vec3::from(tf.tip_offset),
        pivot_point: Vec3::from(tf.pivot_point),
        hand_eye: tf.hand_eye.to_transform()?,
        board_in_base: tf.board_in_base.to_transform()?,
        time_offset: tf.time_offset_s,
        marker_trajectory: marker,
        camera_trajectory: read_trajectory(&t.join("camera_trajectory.json"))?,
        scene,
        background,
    };

    let o = dir.join("observed");
    let pivot_path = o.join("pivot_poses.json");
    let pivot_doc: PoseListFile = read_json(&pivot_path)?;
    let tips = truth
        .scene
        .objects()
        .iter()
        .map(|obj| {
            let name = format!("{}.json", obj.object_id);
            let doc: PoseListFile = read_json(&o.join("tips").join(&name))?;
            let corr: PointCloudFile = read_json(&o.join("correspondences").join(&name))?;
            Ok(TipObservation {
                object_id: obj.object_id.clone(),
                session: TipMeasurementSession {
                    marker_poses: doc.to_poses()?,
                    tip_offset: doc.tip_offset.map(Vec3::from).unwrap_or_else(Vec3::zeros),
                },
                correspondences: corr.to_cloud()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let cam_path = o.join("camera_trajectory.json");
    let he_path = o.join("handeye_observations.json");
    let board = if he_path.is_file() {
        let doc: HandEyeObservationsFile = read_json(&he_path)?;
        let b = FrameId::new(&doc.board_frame)?;
        let (h, c) = (FrameId::new(&doc.hand_frame)?, FrameId::new(&doc.camera_frame)?);
        let frames = doc
            .observations
            .iter()
            .map(|r| {
                Ok((
                    r.hand.to_transform(h.clone(), base.clone())?,
                    r.board_in_camera.to_transform(b.clone(), c.clone())?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Some(BoardObservations { board_in_base: doc.board_in_base.to_transform(b, base.clone())?, frames })
    } else {
        None
    };
    let background_init: FramedPose = read_json(&o.join("background_init.json"))?;
    let scan: PointCloudFile = read_json(&o.join("background_scan.json"))?;
    let observed = ObservedSession {
        pivot_poses: pivot_doc.to_poses()?,
        tips,
        recording: Recording {
            marker_trajectory: read_trajectory(&o.join("marker_trajectory.json"))?,
            camera_trajectory: if cam_path.is_file() { Some(read_trajectory(&cam_path)?) } else { None },
            board,
        },
        background_scan: scan.to_cloud()?,
        background_init: background_init.to_transform()?,
    };
    Ok(SimulatedSession { config, truth, observed })
}

/// Samples in `a` and `b` pair up one-to-one with equal times.
pub fn same_times(a: &[TimedPose], b: &[TimedPose]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.t == y.t)
}

pub fn read_camera(path: &Path) -> Result<CameraRecord> {
    read_json(path)
}
