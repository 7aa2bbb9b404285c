//! Frame-labeled rigid transforms and trajectories.
//!
//! Conventions used throughout the crate:
//!
//! - Rotations are Hamilton unit quaternions, scalar first (`w, x, y, z`),
//!   acting actively on column vectors.
//! - A [`RigidTransform`] labeled `from -> to` maps point coordinates
//!   expressed in `from` into `to`: `p_to = R * p_from + t`. A marker pose
//!   reported by a tracker is therefore labeled `MB -> TB`.
//! - Quaternions are stored with a non-negative scalar part.
//! - Translations are meters, angles reported to users are degrees.

use std::fmt;

use nalgebra::{Matrix3, Matrix4, Quaternion, SymmetricEigen, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Short coordinate-frame label such as `RB`, `EE`, `CB`, `BB`, `TB` or `MB`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FrameId(String);

impl FrameId {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidConfig("frame label must be non-empty".into()));
        }
        Ok(FrameId(name))
    }

    /// Panics on an empty label; intended for literals.
    pub fn named(name: &str) -> Self {
        Self::new(name).expect("frame label must be non-empty")
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Returns `q` or `-q`, whichever has a non-negative scalar part. When the
/// scalar part is exactly zero the first non-zero vector component is made
/// positive.
pub fn canonical_quaternion(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    let c = q.quaternion().coords; // (x, y, z, w)
    let key = [c[3], c[0], c[1], c[2]];
    let flip = key.iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0);
    if flip {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

/// Normalizes `q` unless it is already unit to rounding precision, so that
/// re-reading a written quaternion reproduces it bit for bit.
fn renormalize(q: Quaternion<f64>) -> UnitQuaternion<f64> {
    if (q.norm_squared() - 1.0).abs() <= 4.0 * f64::EPSILON {
        canonical_quaternion(UnitQuaternion::new_unchecked(q))
    } else {
        canonical_quaternion(UnitQuaternion::new_normalize(q))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RigidTransform {
    rotation: UnitQuaternion<f64>,
    translation: Vec3,
    from: FrameId,
    to: FrameId,
}

impl RigidTransform {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vec3, from: FrameId, to: FrameId) -> Self {
        RigidTransform { rotation: renormalize(rotation.into_inner()), translation, from, to }
    }

    /// Builds a transform from raw `[w, x, y, z]` components, normalizing them.
    pub fn from_wxyz(q: [f64; 4], translation: Vec3, from: FrameId, to: FrameId) -> Result<Self> {
        let raw = Quaternion::new(q[0], q[1], q[2], q[3]);
        let norm = raw.norm();
        if !norm.is_finite() || norm < 1e-12 || !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "invalid pose components q={q:?} p={:?}",
                translation.as_slice()
            )));
        }
        Ok(Self::new(UnitQuaternion::new_unchecked(raw), translation, from, to))
    }

    pub fn from_matrix(rotation: &Matrix3<f64>, translation: Vec3, from: FrameId, to: FrameId) -> Self {
        let rot = nalgebra::Rotation3::from_matrix_unchecked(*rotation);
        Self::new(UnitQuaternion::from_rotation_matrix(&rot), translation, from, to)
    }

    pub fn identity(from: FrameId, to: FrameId) -> Self {
        Self::new(UnitQuaternion::identity(), Vec3::zeros(), from, to)
    }

    /// Rotation of `angle_deg` degrees about `axis` followed by `translation`.
    pub fn from_axis_angle(axis: Vec3, angle_deg: f64, translation: Vec3, from: FrameId, to: FrameId) -> Self {
        let rot = match nalgebra::Unit::try_new(axis, 1e-15) {
            Some(axis) => UnitQuaternion::from_axis_angle(&axis, angle_deg.to_radians()),
            None => UnitQuaternion::identity(),
        };
        Self::new(rot, translation, from, to)
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn from_frame(&self) -> &FrameId {
        &self.from
    }

    pub fn to_frame(&self) -> &FrameId {
        &self.to
    }

    /// `[w, x, y, z]` with `w >= 0`.
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn with_frames(mut self, from: FrameId, to: FrameId) -> Self {
        self.from = from;
        self.to = to;
        self
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> Result<RigidTransform> {
        compose(self, other)
    }

    pub fn inverse(&self) -> RigidTransform {
        invert(self)
    }
}

/// Composition `a ∘ b` where `b` maps `A -> B` and `a` maps `B -> C`.
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> Result<RigidTransform> {
    if a.from != b.to {
        return Err(Error::frames(&a.from, &b.to));
    }
    Ok(RigidTransform {
        rotation: renormalize(a.rotation.into_inner() * b.rotation.into_inner()),
        translation: a.rotation * b.translation + a.translation,
        from: b.from.clone(),
        to: a.to.clone(),
    })
}

pub fn invert(t: &RigidTransform) -> RigidTransform {
    let rinv = t.rotation.inverse();
    RigidTransform {
        rotation: canonical_quaternion(rinv),
        translation: -(rinv * t.translation),
        from: t.to.clone(),
        to: t.from.clone(),
    }
}

/// Geodesic angle in degrees between two rotations, in `[0, 180]`.
pub fn rotation_angle_deg(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let (qa, mut qb) = (a.quaternion().coords, b.quaternion().coords);
    if qa.dot(&qb) < 0.0 {
        qb = -qb;
    }
    // half-angle between the 4-vectors, symmetric in (a, b)
    let half = (qa - qb).norm().atan2((qa + qb).norm());
    (4.0 * half).to_degrees()
}

/// Translation distance (meters) and geodesic rotation angle (degrees).
pub fn pose_error(a: &RigidTransform, b: &RigidTransform) -> Result<(f64, f64)> {
    if a.from != b.from {
        return Err(Error::frames(&a.from, &b.from));
    }
    if a.to != b.to {
        return Err(Error::frames(&a.to, &b.to));
    }
    Ok(((a.translation - b.translation).norm(), rotation_angle_deg(&a.rotation, &b.rotation)))
}

/// Arithmetic mean of translations and the sign-invariant quaternion mean
/// (dominant eigenvector of `Σ q qᵀ`).
pub fn average_transforms(ts: &[RigidTransform]) -> Result<RigidTransform> {
    let first = ts.first().ok_or(Error::EmptyInput)?;
    for t in ts {
        if t.from != first.from {
            return Err(Error::frames(&first.from, &t.from));
        }
        if t.to != first.to {
            return Err(Error::frames(&first.to, &t.to));
        }
    }
    if ts.len() == 1 {
        return Ok(first.clone());
    }
    let n = ts.len() as f64;
    let translation = ts.iter().fold(Vec3::zeros(), |acc, t| acc + t.translation) / n;
    let mut m = Matrix4::<f64>::zeros();
    for t in ts {
        let c = t.rotation.quaternion().coords;
        m += c * c.transpose();
    }
    let eig = SymmetricEigen::new(m);
    let (best, _) =
        eig.eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, v)| if *v > bv { (i, *v) } else { (bi, bv) });
    let c = eig.eigenvectors.column(best).into_owned();
    let q = Quaternion::new(c[3], c[0], c[1], c[2]);
    Ok(RigidTransform { rotation: renormalize(q), translation, from: first.from.clone(), to: first.to.clone() })
}

/// Shortest-arc spherical interpolation.
pub fn slerp(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>, s: f64) -> UnitQuaternion<f64> {
    let qa = a.into_inner();
    let mut qb = b.into_inner();
    let mut dot = qa.coords.dot(&qb.coords);
    if dot < 0.0 {
        qb = -qb;
        dot = -dot;
    }
    if dot > 1.0 - 1e-12 {
        return renormalize(qa * (1.0 - s) + qb * s);
    }
    let theta = dot.min(1.0).acos();
    let sin = theta.sin();
    let wa = ((1.0 - s) * theta).sin() / sin;
    let wb = (s * theta).sin() / sin;
    renormalize(qa * wa + qb * wb)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimedPose {
    pub t: f64,
    pub pose: RigidTransform,
}

/// Time-ordered poses of `child` expressed in `parent` (each sample is labeled
/// `child -> parent`).
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    parent: FrameId,
    child: FrameId,
    samples: Vec<TimedPose>,
}

impl Trajectory {
    pub fn new(parent: FrameId, child: FrameId, samples: Vec<TimedPose>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if !s.t.is_finite() {
                return Err(Error::InvalidTrajectory(format!("sample {i} has non-finite time")));
            }
            if s.pose.from != child {
                return Err(Error::frames(&child, &s.pose.from));
            }
            if s.pose.to != parent {
                return Err(Error::frames(&parent, &s.pose.to));
            }
            if i > 0 && s.t <= samples[i - 1].t {
                return Err(Error::InvalidTrajectory(format!(
                    "timestamps not strictly increasing at sample {i} ({} after {})",
                    s.t,
                    samples[i - 1].t
                )));
            }
        }
        Ok(Trajectory { parent, child, samples })
    }

    pub fn from_poses(parent: FrameId, child: FrameId, times: &[f64], poses: Vec<RigidTransform>) -> Result<Self> {
        if times.len() != poses.len() {
            return Err(Error::InvalidTrajectory(format!("{} timestamps for {} poses", times.len(), poses.len())));
        }
        let samples = times.iter().zip(poses).map(|(&t, pose)| TimedPose { t, pose }).collect();
        Self::new(parent, child, samples)
    }

    pub fn parent_frame(&self) -> &FrameId {
        &self.parent
    }

    pub fn child_frame(&self) -> &FrameId {
        &self.child
    }

    pub fn samples(&self) -> &[TimedPose] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn poses(&self) -> impl Iterator<Item = &RigidTransform> {
        self.samples.iter().map(|s| &s.pose)
    }

    /// `(first, last)` timestamps.
    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.samples.first()?.t, self.samples.last()?.t))
    }

    pub fn interpolate(&self, t: f64) -> Result<RigidTransform> {
        interpolate_pose(self, t)
    }

    /// Interpolates the trajectory at each of `times`.
    pub fn resample(&self, times: &[f64]) -> Result<Trajectory> {
        let poses = times.iter().map(|&t| interpolate_pose(self, t)).collect::<Result<Vec<_>>>()?;
        Trajectory::from_poses(self.parent.clone(), self.child.clone(), times, poses)
    }

    /// Applies `f` to every pose, relabeling the trajectory frames.
    pub fn map_poses<F>(&self, parent: FrameId, child: FrameId, mut f: F) -> Result<Trajectory>
    where
        F: FnMut(&RigidTransform) -> Result<RigidTransform>,
    {
        let samples =
            self.samples.iter().map(|s| Ok(TimedPose { t: s.t, pose: f(&s.pose)? })).collect::<Result<Vec<_>>>()?;
        Trajectory::new(parent, child, samples)
    }
}

/// Pose at time `t`: linear in translation, shortest-arc slerp in rotation.
pub fn interpolate_pose(traj: &Trajectory, t: f64) -> Result<RigidTransform> {
    let samples = &traj.samples;
    if samples.len() < 2 {
        return Err(Error::TooFewPoses { needed: 2, got: samples.len() });
    }
    let (start, end) = (samples[0].t, samples[samples.len() - 1].t);
    if !(t >= start && t <= end) {
        return Err(Error::OutOfRange { t, start, end });
    }
    // first index with sample time >= t
    let hi = samples.partition_point(|s| s.t < t);
    if samples[hi].t == t {
        return Ok(samples[hi].pose.clone());
    }
    let (a, b) = (&samples[hi - 1], &samples[hi]);
    let s = (t - a.t) / (b.t - a.t);
    Ok(RigidTransform {
        rotation: slerp(&a.pose.rotation, &b.pose.rotation, s),
        translation: a.pose.translation * (1.0 - s) + b.pose.translation * s,
        from: traj.child.clone(),
        to: traj.parent.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal, UnitSphere};

    fn f(s: &str) -> FrameId {
        FrameId::named(s)
    }

    fn rz(deg: f64, t: Vec3, from: &str, to: &str) -> RigidTransform {
        RigidTransform::from_axis_angle(Vec3::z(), deg, t, f(from), f(to))
    }

    fn random_pose(rng: &mut ChaCha8Rng, from: &str, to: &str) -> RigidTransform {
        let axis: [f64; 3] = UnitSphere.sample(rng);
        let angle = rng.gen_range(-180.0..180.0);
        let t = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        RigidTransform::from_axis_angle(Vec3::from(axis), angle, t, f(from), f(to))
    }

    fn assert_close(a: &RigidTransform, b: &RigidTransform, tol: f64) {
        let (dt, dr) = pose_error(a, b).unwrap();
        assert!(dt < tol && dr.to_radians() < tol, "dt={dt} dr={dr}");
    }

    #[test]
    fn identity_composition() {
        let i = RigidTransform::identity(f("A"), f("A"));
        assert_eq!(compose(&i, &i).unwrap(), i);
    }

    #[test]
    fn compose_matches_homogeneous_product() {
        let a = rz(90.0, Vec3::new(1.0, 0.0, 0.0), "B", "C");
        let b = rz(90.0, Vec3::zeros(), "A", "B");
        let ab = compose(&a, &b).unwrap();
        let m = a.to_homogeneous() * b.to_homogeneous();
        let p = nalgebra::Vector4::new(1.0, 0.0, 0.0, 1.0);
        let expected = m * p;
        let got = ab.transform_point(&Vec3::new(1.0, 0.0, 0.0));
        // Rz(180) maps (1,0,0) to (-1,0,0), then +(1,0,0).
        assert!((got - Vec3::new(0.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((got - expected.xyz()).norm() < 1e-12);
        assert!((ab.to_homogeneous() - m).abs().max() < 1e-12);
        assert_eq!(ab.from_frame(), &f("A"));
        assert_eq!(ab.to_frame(), &f("C"));
    }

    #[test]
    fn compose_rejects_frame_mismatch() {
        let a = rz(10.0, Vec3::zeros(), "B", "C");
        let b = rz(10.0, Vec3::zeros(), "A", "X");
        assert!(matches!(compose(&a, &b), Err(Error::FrameMismatch { .. })));
    }

    #[test]
    fn inverse_cases() {
        let i = RigidTransform::identity(f("A"), f("A"));
        assert_eq!(invert(&i), i);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let t = random_pose(&mut rng, "A", "B");
            assert_close(&invert(&invert(&t)), &t, 1e-12);
            let id = compose(&t, &invert(&t)).unwrap();
            assert_close(&id, &RigidTransform::identity(f("B"), f("B")), 1e-12);
            let id = compose(&invert(&t), &t).unwrap();
            assert_close(&id, &RigidTransform::identity(f("A"), f("A")), 1e-12);
        }
    }

    #[test]
    fn pose_error_constructed() {
        let a = rz(0.0, Vec3::new(0.1, 0.2, 0.3), "A", "B");
        assert_eq!(pose_error(&a, &a).unwrap(), (0.0, 0.0));
        let b = rz(10.0, Vec3::new(0.1, 0.2, 0.3), "A", "B");
        let (dt, dr) = pose_error(&a, &b).unwrap();
        assert_eq!(dt, 0.0);
        assert!((dr - 10.0).abs() < 1e-12);
        let c = rz(10.0, Vec3::zeros(), "A", "C");
        assert!(pose_error(&a, &c).is_err());
    }

    /// Axis-angle of the relative rotation matrix, via the trace formula.
    fn matrix_angle_oracle(a: &RigidTransform, b: &RigidTransform) -> f64 {
        let rel = a.rotation_matrix() * b.rotation_matrix().transpose();
        let c = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos().to_degrees()
    }

    #[test]
    fn pose_error_matches_axis_angle_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let a = random_pose(&mut rng, "A", "B");
            let b = random_pose(&mut rng, "A", "B");
            let (_, dr) = pose_error(&a, &b).unwrap();
            let oracle = matrix_angle_oracle(&a, &b);
            // acos loses precision near 0 and 180 degrees
            let tol = if !(1.0..=179.0).contains(&oracle) { 1e-6 } else { 1e-9 };
            assert!((dr - oracle).abs() < tol, "{dr} vs {oracle}");
            let (_, dr2) = pose_error(&b, &a).unwrap();
            assert_eq!(dr, dr2);
        }
    }

    #[test]
    fn average_single_and_symmetric() {
        let t = rz(33.0, Vec3::new(1.0, 2.0, 3.0), "A", "B");
        assert_eq!(average_transforms(std::slice::from_ref(&t)).unwrap(), t);
        let a = rz(5.0, Vec3::new(1.0, 0.0, 0.0), "A", "B");
        let b = rz(-5.0, Vec3::new(1.0, 0.0, 0.0), "A", "B");
        let m = average_transforms(&[a, b]).unwrap();
        assert_close(&m, &rz(0.0, Vec3::new(1.0, 0.0, 0.0), "A", "B"), 1e-12);
        assert!(matches!(average_transforms(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn average_is_sign_invariant() {
        let a = rz(179.0, Vec3::zeros(), "A", "B");
        let b = rz(-179.0, Vec3::zeros(), "A", "B");
        let m = average_transforms(&[a, b]).unwrap();
        assert!((rotation_angle_deg(m.rotation(), rz(180.0, Vec3::zeros(), "A", "B").rotation())) < 1e-9);
    }

    #[test]
    fn average_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let truth = random_pose(&mut rng, "A", "B");
        let samples: Vec<_> = (0..100)
            .map(|_| {
                let axis: [f64; 3] = UnitSphere.sample(&mut rng);
                let ang: f64 = 0.2 * rng.sample::<f64, _>(StandardNormal);
                let dt = Vec3::from_fn(|_, _| 0.5e-3 * rng.sample::<f64, _>(StandardNormal));
                let noise = RigidTransform::from_axis_angle(Vec3::from(axis), ang, dt, f("B"), f("B"));
                compose(&noise, &truth).unwrap()
            })
            .collect();
        let m = average_transforms(&samples).unwrap();
        let (dt, dr) = pose_error(&m, &truth).unwrap();
        assert!(dt < 0.2e-3 && dr < 0.1, "dt={dt} dr={dr}");
    }

    #[test]
    fn average_rejects_mixed_frames() {
        let a = rz(1.0, Vec3::zeros(), "A", "B");
        let b = rz(1.0, Vec3::zeros(), "A", "C");
        assert!(matches!(average_transforms(&[a, b]), Err(Error::FrameMismatch { .. })));
    }

    fn traj(poses: Vec<(f64, RigidTransform)>) -> Trajectory {
        let samples = poses.into_iter().map(|(t, pose)| TimedPose { t, pose }).collect();
        Trajectory::new(f("W"), f("B"), samples).unwrap()
    }

    #[test]
    fn interpolation_at_samples_and_midpoint() {
        let a = rz(0.0, Vec3::zeros(), "B", "W");
        let b = rz(90.0, Vec3::new(2.0, 0.0, 0.0), "B", "W");
        let tr = traj(vec![(0.0, a.clone()), (1.0, b.clone())]);
        assert_eq!(interpolate_pose(&tr, 0.0).unwrap(), a);
        assert_eq!(interpolate_pose(&tr, 1.0).unwrap(), b);
        let mid = interpolate_pose(&tr, 0.5).unwrap();
        assert_close(&mid, &rz(45.0, Vec3::new(1.0, 0.0, 0.0), "B", "W"), 1e-12);
        assert!(matches!(interpolate_pose(&tr, 1.5), Err(Error::OutOfRange { .. })));
        assert!(matches!(interpolate_pose(&tr, -0.1), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn interpolation_takes_shortest_arc() {
        let a = rz(170.0, Vec3::zeros(), "B", "W");
        let b = rz(-170.0, Vec3::zeros(), "B", "W");
        let tr = traj(vec![(0.0, a), (1.0, b)]);
        let mid = interpolate_pose(&tr, 0.5).unwrap();
        assert!(rotation_angle_deg(mid.rotation(), rz(180.0, Vec3::zeros(), "B", "W").rotation()) < 1e-9);
    }

    fn circle_pose(t: f64) -> RigidTransform {
        let (r, w) = (0.5, 0.8);
        let th = w * t;
        rz(th.to_degrees(), Vec3::new(r * th.cos(), r * th.sin(), 0.1 * t), "B", "W")
    }

    #[test]
    fn interpolation_matches_analytic_circle() {
        let dt = 1e-3;
        let tr = traj((0..=2000).map(|i| (i as f64 * dt, circle_pose(i as f64 * dt))).collect());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let t = rng.gen_range(0.0..2.0);
            let got = interpolate_pose(&tr, t).unwrap();
            let (et, er) = pose_error(&got, &circle_pose(t)).unwrap();
            assert!(et < 1e-6, "{et}");
            assert!(er < 1e-6, "{er}");
        }
    }

    #[test]
    fn trajectory_validation() {
        let p = rz(0.0, Vec3::zeros(), "B", "W");
        let s = |t: f64| TimedPose { t, pose: p.clone() };
        assert!(Trajectory::new(f("W"), f("B"), vec![s(0.0), s(0.0)]).is_err());
        assert!(Trajectory::new(f("W"), f("B"), vec![s(1.0), s(0.5)]).is_err());
        assert!(Trajectory::new(f("W"), f("B"), vec![s(f64::NAN)]).is_err());
        assert!(Trajectory::new(f("X"), f("B"), vec![s(0.0)]).is_err());
    }

    #[test]
    fn canonical_form() {
        let q = UnitQuaternion::new_normalize(Quaternion::new(-0.5, 0.5, 0.5, 0.5));
        let t = RigidTransform::new(q, Vec3::zeros(), f("A"), f("B"));
        assert!(t.wxyz()[0] >= 0.0);
        let q = UnitQuaternion::new_normalize(Quaternion::new(0.0, -1.0, 0.0, 0.0));
        let t = RigidTransform::new(q, Vec3::zeros(), f("A"), f("B"));
        assert_eq!(t.wxyz(), [0.0, 1.0, 0.0, 0.0]);
    }

    prop_compose! {
        fn arb_pose(from: &'static str, to: &'static str)(
            ax in prop::array::uniform3(-1.0f64..1.0),
            ang in -180.0f64..180.0,
            t in prop::array::uniform3(-2.0f64..2.0),
        ) -> RigidTransform {
            RigidTransform::from_axis_angle(Vec3::from(ax), ang, Vec3::from(t), f(from), f(to))
        }
    }

    fn unit_and_canonical(t: &RigidTransform) -> bool {
        let q = t.wxyz();
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let det = t.rotation_matrix().determinant();
        (n - 1.0).abs() < 1e-9 && (det - 1.0).abs() < 1e-9 && q[0] >= 0.0
    }

    proptest! {
        #[test]
        fn composition_is_associative(
            a in arb_pose("C", "D"), b in arb_pose("B", "C"), c in arb_pose("A", "B"),
        ) {
            let left = compose(&compose(&a, &b).unwrap(), &c).unwrap();
            let right = compose(&a, &compose(&b, &c).unwrap()).unwrap();
            let (dt, dr) = pose_error(&left, &right).unwrap();
            prop_assert!(dt < 1e-12 && dr.to_radians() < 1e-12);
            prop_assert!(unit_and_canonical(&left) && unit_and_canonical(&right));
        }

        #[test]
        fn pose_error_is_symmetric(a in arb_pose("A", "B"), b in arb_pose("A", "B")) {
            prop_assert_eq!(pose_error(&a, &b).unwrap(), pose_error(&b, &a).unwrap());
        }

        #[test]
        fn inverse_is_canonical(a in arb_pose("A", "B")) {
            prop_assert!(unit_and_canonical(&invert(&a)));
        }
    }
}
