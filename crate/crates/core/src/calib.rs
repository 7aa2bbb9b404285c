//! Tool-tip pivot calibration and the two hand-eye procedures.
//!
//! Hand-eye transforms are labeled `camera -> hand` (e.g. `CB -> MB`), so a
//! camera pose follows from a hand pose as `hand_pose ∘ X`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geom::{average_transforms, compose, invert, pose_error, RigidTransform, Trajectory, Vec3};

/// Largest accepted condition number of the stacked pivot system.
pub const PIVOT_MAX_CONDITION: f64 = 1e8;

/// Timestamps closer than this are considered equal.
pub const TIMESTAMP_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct PivotResult {
    /// Tip position in the marker (hand) frame, meters.
    pub tip_offset: Vec3,
    /// Fixed pivot location in the base frame, meters.
    pub pivot_point: Vec3,
    /// RMS of per-pose residual norms, meters.
    pub rmse: f64,
    pub condition_number: f64,
}

/// Solves `R_i · tip − pivot = −t_i` for all poses in the least-squares sense.
///
/// The 3N×6 system is solved through its SVD; motions whose singular values
/// spread beyond [`PIVOT_MAX_CONDITION`] (e.g. rotation about a single axis)
/// are rejected.
pub fn pivot_calibrate(marker_poses: &[RigidTransform]) -> Result<PivotResult> {
    let n = marker_poses.len();
    if n < 3 {
        return Err(Error::TooFewPoses { needed: 3, got: n });
    }
    let first = &marker_poses[0];
    for p in marker_poses {
        if p.from_frame() != first.from_frame() {
            return Err(Error::frames(first.from_frame(), p.from_frame()));
        }
        if p.to_frame() != first.to_frame() {
            return Err(Error::frames(first.to_frame(), p.to_frame()));
        }
    }
    let mut a = DMatrix::<f64>::zeros(3 * n, 6);
    let mut b = DVector::<f64>::zeros(3 * n);
    for (i, pose) in marker_poses.iter().enumerate() {
        let r = pose.rotation_matrix();
        a.fixed_view_mut::<3, 3>(3 * i, 0).copy_from(&r);
        a.fixed_view_mut::<3, 3>(3 * i, 3).copy_from(&(-nalgebra::Matrix3::identity()));
        b.fixed_rows_mut::<3>(3 * i).copy_from(&(-pose.translation()));
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= PIVOT_MAX_CONDITION) {
        return Err(Error::DegenerateMotion { condition });
    }
    let x = svd.solve(&b, 0.0).map_err(|e| Error::DegenerateConfiguration(e.to_string()))?;
    let tip = Vec3::new(x[0], x[1], x[2]);
    let pivot = Vec3::new(x[3], x[4], x[5]);
    let ss: f64 = marker_poses.iter().map(|p| (p.transform_point(&tip) - pivot).norm_squared()).sum();
    Ok(PivotResult { tip_offset: tip, pivot_point: pivot, rmse: (ss / n as f64).sqrt(), condition_number: condition })
}

/// One synchronized hand/camera observation, both expressed in the same base
/// frame.
#[derive(Clone, Debug, PartialEq)]
pub struct HandEyeObservation {
    /// `hand -> base` (robot forward kinematics or tracked marker).
    pub base_to_hand: RigidTransform,
    /// `camera -> base`, obtained through the calibration-board chain.
    pub hand_eye_chain: RigidTransform,
}

impl HandEyeObservation {
    /// Builds the camera chain from a board pose in the base frame
    /// (`board -> base`, measured with the tool tip) and the board pose seen
    /// by the camera (`board -> camera`).
    pub fn from_board(
        base_to_hand: RigidTransform,
        board_in_base: &RigidTransform,
        board_in_camera: &RigidTransform,
    ) -> Result<Self> {
        let chain = compose(board_in_base, &invert(board_in_camera))?;
        Ok(HandEyeObservation { base_to_hand, hand_eye_chain: chain })
    }

    /// Per-observation hand-eye estimate `hand⁻¹ ∘ camera` (`camera -> hand`).
    pub fn estimate(&self) -> Result<RigidTransform> {
        compose(&invert(&self.base_to_hand), &self.hand_eye_chain)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameError {
    pub trans: f64,
    pub rot_deg: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HandEyeResult {
    /// `camera -> hand`.
    pub x: RigidTransform,
    pub trans_residual_rmse: f64,
    pub rot_residual_rmse: f64,
    pub per_frame_errors: Vec<FrameError>,
}

fn summarize(x: RigidTransform, errors: Vec<FrameError>) -> HandEyeResult {
    let n = errors.len().max(1) as f64;
    let t = (errors.iter().map(|e| e.trans * e.trans).sum::<f64>() / n).sqrt();
    let r = (errors.iter().map(|e| e.rot_deg * e.rot_deg).sum::<f64>() / n).sqrt();
    HandEyeResult { x, trans_residual_rmse: t, rot_residual_rmse: r, per_frame_errors: errors }
}

/// Direct chain composition per frame, fused by pose averaging.
pub fn handeye_closed_form(observations: &[HandEyeObservation]) -> Result<HandEyeResult> {
    if observations.is_empty() {
        return Err(Error::EmptyInput);
    }
    let estimates = observations.iter().map(HandEyeObservation::estimate).collect::<Result<Vec<_>>>()?;
    let x = average_transforms(&estimates)?;
    let errors = estimates
        .iter()
        .map(|xi| pose_error(xi, &x).map(|(trans, rot_deg)| FrameError { trans, rot_deg }))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(x, errors))
}

/// Hand-eye from two synchronized trajectories sharing a base frame: the
/// offset that aligns the marker trajectory onto the camera trajectory.
///
/// Both trajectories must be sampled at the same timestamps; see
/// [`resample_onto_camera`].
pub fn handeye_trajectory(camera_traj: &Trajectory, marker_traj: &Trajectory) -> Result<HandEyeResult> {
    if camera_traj.parent_frame() != marker_traj.parent_frame() {
        return Err(Error::frames(marker_traj.parent_frame(), camera_traj.parent_frame()));
    }
    let n = camera_traj.len().min(marker_traj.len());
    if n < 2 {
        return Err(Error::TooFewPoses { needed: 2, got: n });
    }
    if camera_traj.len() != marker_traj.len() {
        let index = n;
        let (a, b) = (
            camera_traj.samples().get(index).map_or(f64::NAN, |s| s.t),
            marker_traj.samples().get(index).map_or(f64::NAN, |s| s.t),
        );
        return Err(Error::TimestampMismatch { index, a, b });
    }
    for (index, (c, m)) in camera_traj.samples().iter().zip(marker_traj.samples()).enumerate() {
        if (c.t - m.t).abs() > TIMESTAMP_TOL {
            return Err(Error::TimestampMismatch { index, a: c.t, b: m.t });
        }
    }
    let estimates = camera_traj
        .samples()
        .iter()
        .zip(marker_traj.samples())
        .map(|(c, m)| compose(&invert(&m.pose), &c.pose))
        .collect::<Result<Vec<_>>>()?;
    let x = average_transforms(&estimates)?;
    let errors = camera_traj
        .samples()
        .iter()
        .zip(marker_traj.samples())
        .map(|(c, m)| {
            let aligned = compose(&m.pose, &x)?;
            pose_error(&aligned, &c.pose).map(|(trans, rot_deg)| FrameError { trans, rot_deg })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(x, errors))
}

/// Camera timestamps are master: keeps the camera samples that fall inside
/// the marker span and interpolates the marker trajectory onto them.
pub fn resample_onto_camera(camera_traj: &Trajectory, marker_traj: &Trajectory) -> Result<(Trajectory, Trajectory)> {
    let (start, end) = marker_traj.span().ok_or(Error::TooFewPoses { needed: 2, got: 0 })?;
    let kept: Vec<_> = camera_traj.samples().iter().filter(|s| s.t >= start && s.t <= end).cloned().collect();
    let camera = Trajectory::new(camera_traj.parent_frame().clone(), camera_traj.child_frame().clone(), kept)?;
    let marker = marker_traj.resample(&camera.times())?;
    Ok((camera, marker))
}
