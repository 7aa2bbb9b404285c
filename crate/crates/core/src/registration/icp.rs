use rayon::prelude::*;

use super::kabsch::fit_points;
use super::{KdTree, MeshIndex, PointCloud, TriangleMesh};
use crate::error::{Error, Result};
use crate::geom::{compose, FrameId, RigidTransform, Vec3};

/// Point-to-point ICP settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Stop once the relative drop in inlier RMSE falls below this.
    pub rel_change_tol: f64,
    /// Correspondence gate, meters.
    pub max_corr_dist: f64,
    /// Fraction of the worst gated correspondences discarded each iteration.
    pub trim_fraction: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        IcpParams { max_iterations: 50, rel_change_tol: 1e-8, max_corr_dist: 0.05, trim_fraction: 0.1 }
    }
}

impl IcpParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iterations >= 1
            && self.rel_change_tol > 0.0
            && self.max_corr_dist > 0.0
            && (0.0..1.0).contains(&self.trim_fraction);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid ICP parameters {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum IcpTarget<'a> {
    Mesh(&'a TriangleMesh),
    Cloud(&'a PointCloud),
}

impl IcpTarget<'_> {
    fn frame(&self) -> &FrameId {
        match self {
            IcpTarget::Mesh(m) => m.frame(),
            IcpTarget::Cloud(c) => c.frame(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegistrationResult {
    /// Maps the source frame into the target frame.
    pub transform: RigidTransform,
    /// RMS correspondence distance over the final inliers, meters.
    pub rmse: f64,
    pub iterations: usize,
    pub inlier_count: usize,
    /// Inlier RMSE before the first update and after every accepted update.
    pub cost_history: Vec<f64>,
}

enum Matcher {
    Mesh(MeshIndex),
    Cloud(KdTree),
}

impl Matcher {
    fn closest(&self, p: &Vec3) -> (Vec3, f64) {
        match self {
            Matcher::Mesh(index) => {
                let c = index.closest(p);
                (c.point, c.distance)
            }
            Matcher::Cloud(tree) => {
                let n = tree.nearest(p);
                (*tree.point(n.index), n.distance_sq.sqrt())
            }
        }
    }
}

struct Correspondences {
    src: Vec<Vec3>,
    dst: Vec<Vec3>,
    rmse: f64,
}

fn correspond(
    matcher: &Matcher,
    points: &[Vec3],
    pose: &RigidTransform,
    params: &IcpParams,
) -> Result<Correspondences> {
    let matches: Vec<(usize, Vec3, f64)> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let (q, d) = matcher.closest(&pose.transform_point(p));
            (i, q, d)
        })
        .collect();
    let mut gated: Vec<_> = matches.into_iter().filter(|m| m.2 <= params.max_corr_dist).collect();
    if gated.is_empty() {
        return Err(Error::NoCorrespondences);
    }
    gated.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
    let drop = (params.trim_fraction * gated.len() as f64).floor() as usize;
    let keep = (gated.len() - drop).max(gated.len().min(3));
    gated.truncate(keep);
    if gated.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: gated.len() });
    }
    let ss: f64 = gated.iter().map(|m| m.2 * m.2).sum();
    Ok(Correspondences {
        src: gated.iter().map(|m| points[m.0]).collect(),
        dst: gated.iter().map(|m| m.1).collect(),
        rmse: (ss / gated.len() as f64).sqrt(),
    })
}

/// Point-to-point ICP of `src` against `target`, starting at `init`
/// (`src frame -> target frame`).
///
/// Each iteration matches every transformed source point to its closest
/// target point, gates matches beyond `max_corr_dist`, trims the worst
/// `trim_fraction`, and refits with [`super::kabsch_fit`]. An update that
/// would raise the inlier RMSE is rejected and ends the run, so the reported
/// cost history is non-increasing.
pub fn icp(
    src: &PointCloud,
    target: IcpTarget<'_>,
    init: &RigidTransform,
    params: &IcpParams,
) -> Result<RegistrationResult> {
    params.validate()?;
    if src.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: src.len() });
    }
    if init.from_frame() != src.frame() {
        return Err(Error::frames(src.frame(), init.from_frame()));
    }
    if init.to_frame() != target.frame() {
        return Err(Error::frames(target.frame(), init.to_frame()));
    }
    let matcher = match target {
        IcpTarget::Mesh(m) => Matcher::Mesh(MeshIndex::new(m)?),
        IcpTarget::Cloud(c) => Matcher::Cloud(KdTree::new(c.points().to_vec())?),
    };
    let tf = target.frame().clone();
    let points = src.points();

    let mut pose = init.clone();
    let mut corr = correspond(&matcher, points, &pose, params)?;
    let mut history = vec![corr.rmse];
    let mut iterations = 0;
    while iterations < params.max_iterations {
        iterations += 1;
        let moved: Vec<Vec3> = corr.src.iter().map(|p| pose.transform_point(p)).collect();
        let (r, t) = fit_points(&moved, &corr.dst)?;
        let delta = RigidTransform::from_matrix(&r, t, tf.clone(), tf.clone());
        let candidate = compose(&delta, &pose)?;
        let next = correspond(&matcher, points, &candidate, params)?;
        if next.rmse > corr.rmse {
            break;
        }
        let prev = corr.rmse;
        pose = candidate;
        corr = next;
        history.push(corr.rmse);
        let rel = if prev > 0.0 { (prev - corr.rmse) / prev } else { 0.0 };
        if rel < params.rel_change_tol {
            break;
        }
    }
    Ok(RegistrationResult {
        transform: pose,
        rmse: corr.rmse,
        iterations,
        inlier_count: corr.src.len(),
        cost_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{invert, pose_error};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal, UnitSphere};

    fn f(s: &str) -> FrameId {
        FrameId::named(s)
    }

    /// Axis-aligned box mesh with distinct side lengths, centered at the origin.
    fn box_mesh(size: Vec3) -> TriangleMesh {
        let h = size / 2.0;
        let v: Vec<Vec3> = (0..8)
            .map(|i| {
                Vec3::new(
                    if i & 1 == 0 { -h.x } else { h.x },
                    if i & 2 == 0 { -h.y } else { h.y },
                    if i & 4 == 0 { -h.z } else { h.z },
                )
            })
            .collect();
        let quads = [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4], [2, 6, 7, 3], [0, 4, 6, 2], [1, 3, 7, 5]];
        let tris = quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
        TriangleMesh::new(v, tris, f("M")).unwrap()
    }

    fn surface_samples(mesh: &TriangleMesh, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
        let areas: Vec<f64> = mesh.triangle_soup().iter().map(super::super::triangle_area).collect();
        let total: f64 = areas.iter().sum();
        (0..n)
            .map(|_| {
                let mut r = rng.gen_range(0.0..total);
                let mut k = 0;
                while k + 1 < areas.len() && r >= areas[k] {
                    r -= areas[k];
                    k += 1;
                }
                let t = mesh.triangle(k);
                let (mut a, mut b) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
                if a + b > 1.0 {
                    a = 1.0 - a;
                    b = 1.0 - b;
                }
                t[0] + (t[1] - t[0]) * a + (t[2] - t[0]) * b
            })
            .collect()
    }

    fn random_offset(rng: &mut ChaCha8Rng, max_t: f64, max_deg: f64) -> RigidTransform {
        let axis: [f64; 3] = UnitSphere.sample(rng);
        let dir: [f64; 3] = UnitSphere.sample(rng);
        RigidTransform::from_axis_angle(
            Vec3::from(axis),
            rng.gen_range(-max_deg..max_deg),
            Vec3::from(dir) * rng.gen_range(0.0..max_t),
            f("M"),
            f("M"),
        )
    }

    #[test]
    fn exact_samples_at_truth_need_one_iteration() {
        let mesh = box_mesh(Vec3::new(0.08, 0.05, 0.03));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = PointCloud::new(surface_samples(&mesh, 25, &mut rng), f("M")).unwrap();
        let init = RigidTransform::identity(f("M"), f("M"));
        let r = icp(&pts, IcpTarget::Mesh(&mesh), &init, &IcpParams::default()).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.rmse < 1e-15);
        let (dt, dr) = pose_error(&r.transform, &init).unwrap();
        assert!(dt < 1e-15 && dr < 1e-6);
    }

    #[test]
    fn recovers_small_displacement() {
        let mesh = box_mesh(Vec3::new(0.08, 0.05, 0.03));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let samples = surface_samples(&mesh, 25, &mut rng);
            let offset = random_offset(&mut rng, 0.010, 5.0);
            // source points are the mesh samples seen through `offset`
            let src: Vec<Vec3> = samples.iter().map(|p| offset.transform_point(p)).collect();
            let src = PointCloud::new(src, f("S")).unwrap();
            let truth = invert(&offset).with_frames(f("S"), f("M"));
            let init = RigidTransform::identity(f("S"), f("M"));
            let params =
                IcpParams { max_iterations: 2000, rel_change_tol: 1e-14, trim_fraction: 0.0, ..IcpParams::default() };
            let r = icp(&src, IcpTarget::Mesh(&mesh), &init, &params).unwrap();
            let (dt, dr) = pose_error(&r.transform, &truth).unwrap();
            assert!(dt < 1e-6 && dr < 1e-4, "dt={dt} dr={dr} iters={}", r.iterations);
        }
    }

    #[test]
    fn noisy_samples_stay_near_truth() {
        let mesh = box_mesh(Vec3::new(0.08, 0.05, 0.03));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sigma = 0.32e-3;
        let samples = surface_samples(&mesh, 25, &mut rng);
        let offset = random_offset(&mut rng, 0.005, 3.0);
        let src: Vec<Vec3> = samples
            .iter()
            .map(|p| offset.transform_point(p) + Vec3::from_fn(|_, _| sigma * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        let src = PointCloud::new(src, f("S")).unwrap();
        let truth = invert(&offset).with_frames(f("S"), f("M"));
        let params = IcpParams { max_iterations: 500, ..IcpParams::default() };
        let r = icp(&src, IcpTarget::Mesh(&mesh), &RigidTransform::identity(f("S"), f("M")), &params).unwrap();
        let (dt, _) = pose_error(&r.transform, &truth).unwrap();
        assert!(dt < 1.0e-3, "{dt}");
    }

    #[test]
    fn cloud_target_and_monotone_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let target: Vec<Vec3> = (0..400)
            .map(|_| Vec3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.05..0.05)))
            .collect();
        let offset = random_offset(&mut rng, 0.01, 5.0);
        let src: Vec<Vec3> = target.iter().take(100).map(|p| offset.transform_point(p)).collect();
        let tcloud = PointCloud::new(target, f("M")).unwrap();
        let scloud = PointCloud::new(src, f("S")).unwrap();
        let r =
            icp(&scloud, IcpTarget::Cloud(&tcloud), &RigidTransform::identity(f("S"), f("M")), &IcpParams::default())
                .unwrap();
        assert!(r.cost_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(r.iterations <= 50);
    }

    #[test]
    fn all_gated_out() {
        let mesh = box_mesh(Vec3::new(0.08, 0.05, 0.03));
        let pts: Vec<Vec3> = (0..5).map(|i| Vec3::new(1.0 + i as f64, 0.0, 0.0)).collect();
        let cloud = PointCloud::new(pts, f("M")).unwrap();
        let init = RigidTransform::identity(f("M"), f("M"));
        assert!(matches!(
            icp(&cloud, IcpTarget::Mesh(&mesh), &init, &IcpParams::default()),
            Err(Error::NoCorrespondences)
        ));
    }

    #[test]
    fn input_validation() {
        let mesh = box_mesh(Vec3::new(0.08, 0.05, 0.03));
        let two = PointCloud::new(vec![Vec3::zeros(), Vec3::x()], f("M")).unwrap();
        let init = RigidTransform::identity(f("M"), f("M"));
        assert!(matches!(
            icp(&two, IcpTarget::Mesh(&mesh), &init, &IcpParams::default()),
            Err(Error::TooFewPoints { .. })
        ));
        let three = PointCloud::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], f("S")).unwrap();
        assert!(matches!(
            icp(&three, IcpTarget::Mesh(&mesh), &init, &IcpParams::default()),
            Err(Error::FrameMismatch { .. })
        ));
        let bad = IcpParams { trim_fraction: 1.0, ..IcpParams::default() };
        assert!(bad.validate().is_err());
    }
}
