//! The full annotation pipeline on a simulated session, and its comparison
//! against the session's ground truth.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annotate::{
    align_background, annotate_camera_trajectory, annotate_object, error_budget, tip_points, AcquisitionMethod,
    ErrorBudget, ErrorStage, ObjectAnnotation, TipMeasurementSession,
};
use crate::calib::{
    handeye_closed_form, handeye_trajectory, pivot_calibrate, resample_onto_camera, HandEyeObservation, HandEyeResult,
    PivotResult,
};
use crate::error::{Error, Result};
use crate::geom::{pose_error, Trajectory};
use crate::io::session::read_session;
use crate::io::{
    relative_ref, to_json_string, write_bytes, write_json, AnnotationFile, BudgetRecord, HandEyeResultFile,
    ObjectRecord, PivotResultFile, SyncResultFile, TrajectoryFile,
};
use crate::registration::IcpParams;
use crate::sim::{ObservedSession, SessionConfig, SimulatedSession};
use crate::sync::{apply_offset, synchronize_streams, CurveOptions, CurveSignal, SyncResult};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineOptions {
    pub icp: IcpParams,
    /// Background fit settings. The scan starts further from the truth and
    /// its planar walls, which carry the in-plane constraints, are the first
    /// points trimming discards, so it needs more iterations.
    pub background_icp: IcpParams,
    /// Moving-average half-width of the synchronization curves.
    pub sync_smooth: usize,
    /// Largest time offset searched, seconds.
    pub max_offset: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            icp: IcpParams::default(),
            background_icp: IcpParams { max_iterations: 200, ..IcpParams::default() },
            sync_smooth: 5,
            max_offset: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutput {
    pub pivot: PivotResult,
    pub objects: Vec<ObjectAnnotation>,
    pub background: ObjectAnnotation,
    pub hand_eye: HandEyeResult,
    /// Tracker method only.
    pub sync: Option<SyncResult>,
    /// Camera poses at the marker timestamps.
    pub camera_trajectory: Trajectory,
    pub budget: ErrorBudget,
}

/// Runs pivot calibration, object and background annotation, hand-eye
/// calibration (with time synchronization for the tracker method) and camera
/// trajectory annotation on the observed streams of a session.
///
/// Only the observed streams and the meshes are used from the session; the
/// truth poses are left for [`compare_with_truth`].
pub fn run_pipeline(session: &SimulatedSession, options: &PipelineOptions) -> Result<PipelineOutput> {
    let config = &session.config;
    let obs: &ObservedSession = &session.observed;
    let pivot = pivot_calibrate(&obs.pivot_poses)?;

    let objects = obs
        .tips
        .iter()
        .map(|tip| {
            let mesh = session
                .truth
                .scene
                .objects()
                .iter()
                .find(|o| o.object_id == tip.object_id)
                .map(|o| &o.mesh)
                .ok_or_else(|| Error::UnknownObject(tip.object_id.clone()))?;
            let points = tip_points(&TipMeasurementSession {
                marker_poses: tip.session.marker_poses.clone(),
                tip_offset: pivot.tip_offset,
            })?;
            Ok(annotate_object(&points, mesh, &tip.correspondences, &options.icp)?.labeled(
                &tip.object_id,
                &tip.object_id,
                config.method,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let background = align_background(
        &obs.background_scan,
        &session.truth.background.mesh,
        &obs.background_init,
        &options.background_icp,
    )?
    .labeled(&session.truth.background.object_id, &session.truth.background.object_id, config.method);

    let rec = &obs.recording;
    let (hand_eye, sync) = match config.method {
        AcquisitionMethod::Robot => {
            let board = rec
                .board
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("robot session has no board observations".into()))?;
            let observations = board
                .frames
                .iter()
                .map(|(hand, b)| HandEyeObservation::from_board(hand.clone(), &board.board_in_base, b))
                .collect::<Result<Vec<_>>>()?;
            (handeye_closed_form(&observations)?, None)
        }
        AcquisitionMethod::Tracker => {
            let camera = rec
                .camera_trajectory
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig("tracker session has no camera trajectory".into()))?;
            let sync = sync_camera(&rec.marker_trajectory, camera, config, options)?;
            let aligned = apply_offset(camera, sync.offset)?;
            let (c, m) = resample_onto_camera(&aligned, &rec.marker_trajectory)?;
            (handeye_trajectory(&c, &m)?, Some(sync))
        }
    };
    let camera_trajectory = annotate_camera_trajectory(&rec.marker_trajectory, &hand_eye.x)?;
    let budget = error_budget(&budget_stages(config, &objects, &hand_eye))?;
    Ok(PipelineOutput { pivot, objects, background, hand_eye, sync, camera_trajectory, budget })
}

/// Offset to add to camera timestamps, from the rotational motion curves on
/// the camera sampling grid. A non-converged estimate is still the best one
/// found and is used as is.
fn sync_camera(
    marker: &Trajectory,
    camera: &Trajectory,
    config: &SessionConfig,
    options: &PipelineOptions,
) -> Result<SyncResult> {
    let curve = CurveOptions { signal: CurveSignal::Rotation, smooth: options.sync_smooth };
    match synchronize_streams(marker, camera, 1.0 / config.camera_rate_hz, options.max_offset, &curve) {
        Err(Error::NoConvergence { offset, iterations }) => Ok(SyncResult { offset, residual: f64::NAN, iterations }),
        other => other,
    }
}

fn budget_stages(config: &SessionConfig, objects: &[ObjectAnnotation], hand_eye: &HandEyeResult) -> Vec<ErrorStage> {
    let n = objects.len().max(1) as f64;
    let object_rmse = (objects.iter().map(|o| o.icp_rmse.powi(2)).sum::<f64>() / n).sqrt();
    let noise = &config.noise;
    let mut sensor = ErrorStage::new(
        match config.method {
            AcquisitionMethod::Robot => "robot",
            AcquisitionMethod::Tracker => "tracker",
        },
        noise.static_.sigma_t,
        noise.static_.sigma_r,
        config.trajectory.radius_m,
    );
    if config.method == AcquisitionMethod::Tracker {
        sensor = sensor.with_dynamic(noise.dynamic.sigma_t, noise.dynamic.sigma_r);
    }
    vec![
        ErrorStage::new("object", object_rmse, 0.0, 0.0),
        ErrorStage::new("hand_eye", hand_eye.trans_residual_rmse, hand_eye.rot_residual_rmse, 0.0),
        sensor,
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectErrorRecord {
    pub object_id: String,
    pub trans_mm: f64,
    pub rot_deg: f64,
}

/// Recovered-versus-truth errors of one pipeline run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyReport {
    pub method: AcquisitionMethod,
    pub tip_offset_error_mm: f64,
    pub hand_eye_error_mm: f64,
    pub hand_eye_error_deg: f64,
    /// Tracker method only.
    pub time_offset_error_s: Option<f64>,
    pub objects: Vec<ObjectErrorRecord>,
    pub object_max_error_mm: f64,
    pub object_max_error_deg: f64,
    pub camera_trajectory_max_error_mm: f64,
    pub camera_trajectory_max_error_deg: f64,
    /// Background fit from a displaced start on a noisy partial scan; it is
    /// reported but does not count towards [`VerifyReport::max_error_mm`].
    pub background_error_mm: f64,
    pub background_error_deg: f64,
    pub lower_mm: f64,
    pub upper_mm: f64,
}

impl VerifyReport {
    /// Largest translational error over tip offset, hand-eye, objects and
    /// camera trajectory.
    pub fn max_error_mm(&self) -> f64 {
        [
            self.tip_offset_error_mm,
            self.hand_eye_error_mm,
            self.object_max_error_mm,
            self.camera_trajectory_max_error_mm,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn max_error_deg(&self) -> f64 {
        [self.hand_eye_error_deg, self.object_max_error_deg, self.camera_trajectory_max_error_deg]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn compare_with_truth(session: &SimulatedSession, out: &PipelineOutput) -> Result<VerifyReport> {
    let truth = &session.truth;
    let (he_t, he_r) = pose_error(&out.hand_eye.x, &truth.hand_eye)?;
    let objects = out
        .objects
        .iter()
        .map(|a| {
            let o = truth
                .scene
                .objects()
                .iter()
                .find(|o| o.object_id == a.object_id)
                .ok_or_else(|| Error::UnknownObject(a.object_id.clone()))?;
            let (t, r) = pose_error(&a.pose, &o.pose)?;
            Ok(ObjectErrorRecord { object_id: a.object_id.clone(), trans_mm: t * 1e3, rot_deg: r })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut cam_t: f64 = 0.0;
    let mut cam_r: f64 = 0.0;
    for s in out.camera_trajectory.samples() {
        let (t, r) = pose_error(&s.pose, &truth.camera_trajectory.interpolate(s.t)?)?;
        cam_t = cam_t.max(t);
        cam_r = cam_r.max(r);
    }
    let (bg_t, bg_r) = pose_error(&out.background.pose, &truth.background.pose)?;
    Ok(VerifyReport {
        method: session.config.method,
        tip_offset_error_mm: (out.pivot.tip_offset - truth.tip_offset).norm() * 1e3,
        hand_eye_error_mm: he_t * 1e3,
        hand_eye_error_deg: he_r,
        time_offset_error_s: out.sync.as_ref().map(|s| (s.offset - truth.time_offset).abs()),
        object_max_error_mm: objects.iter().map(|o| o.trans_mm).fold(0.0, f64::max),
        object_max_error_deg: objects.iter().map(|o| o.rot_deg).fold(0.0, f64::max),
        objects,
        camera_trajectory_max_error_mm: cam_t * 1e3,
        camera_trajectory_max_error_deg: cam_r,
        background_error_mm: bg_t * 1e3,
        background_error_deg: bg_r,
        lower_mm: out.budget.lower_bound * 1e3,
        upper_mm: out.budget.upper_bound * 1e3,
    })
}

/// Writes the pipeline results under `dir/annotation/`: the scene annotation
/// (meshes referenced from `dir/meshes/`), the camera trajectory and the
/// calibration results.
pub fn write_annotation(dir: &Path, out: &PipelineOutput, base_frame: &str) -> Result<()> {
    let a = dir.join("annotation");
    let doc_path = a.join("annotation.json");
    let record = |o: &ObjectAnnotation| {
        let mut r = ObjectRecord::from(o);
        r.mesh_ref = relative_ref(&doc_path, &dir.join("meshes").join(format!("{}.ply", o.object_id)));
        r
    };
    let traj_path = a.join("camera_trajectory.json");
    write_json(&traj_path, &TrajectoryFile::from(&out.camera_trajectory))?;
    let marker = out.camera_trajectory.parent_frame();
    write_json(&a.join("pivot.json"), &PivotResultFile::new(&out.pivot, out.hand_eye.x.to_frame(), marker))?;
    write_json(&a.join("handeye.json"), &HandEyeResultFile::from(&out.hand_eye))?;
    if let Some(s) = &out.sync {
        write_json(&a.join("sync.json"), &SyncResultFile::new(s, None))?;
    }
    let doc = AnnotationFile {
        base_frame: base_frame.to_string(),
        objects: out.objects.iter().map(record).collect(),
        background: Some(record(&out.background)),
        camera_trajectory_ref: Some(relative_ref(&doc_path, &traj_path)),
        error_budget: Some(BudgetRecord::from(&out.budget)),
    };
    write_json(&doc_path, &doc)
}

/// Loads a session directory, runs the pipeline, writes the annotation and
/// a `report.json` next to it, and returns the report.
pub fn verify_session(dir: &Path, options: &PipelineOptions) -> Result<VerifyReport> {
    let session = read_session(dir)?;
    let out = run_pipeline(&session, options)?;
    write_annotation(dir, &out, session.truth.scene.base_frame().as_str())?;
    let report = compare_with_truth(&session, &out)?;
    write_bytes(&dir.join("annotation").join("report.json"), to_json_string(&report).as_bytes())?;
    Ok(report)
}

impl crate::io::Document for VerifyReport {}
