use nalgebra::{Matrix3, SVD};

use super::PointCloud;
use crate::error::{Error, Result};
use crate::geom::{RigidTransform, Vec3};

/// Relative singular-value threshold under which the cross-covariance is
/// treated as rank-deficient.
const RANK_TOL: f64 = 1e-10;

/// Least-squares rigid transform (no scale) taking `src[i]` onto `dst[i]`.
///
/// SVD of the centered cross-covariance with the usual reflection fix, so the
/// returned rotation always has determinant +1. The result maps
/// `src.frame() -> dst.frame()`.
pub fn kabsch_fit(src: &PointCloud, dst: &PointCloud) -> Result<RigidTransform> {
    if src.len() != dst.len() {
        return Err(Error::DegenerateConfiguration(format!(
            "correspondence count mismatch: {} vs {}",
            src.len(),
            dst.len()
        )));
    }
    let (rotation, translation) = fit_points(src.points(), dst.points())?;
    Ok(RigidTransform::from_matrix(&rotation, translation, src.frame().clone(), dst.frame().clone()))
}

pub(crate) fn fit_points(src: &[Vec3], dst: &[Vec3]) -> Result<(Matrix3<f64>, Vec3)> {
    let n = src.len();
    if n < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: n });
    }
    let cs = src.iter().sum::<Vec3>() / n as f64;
    let cd = dst.iter().sum::<Vec3>() / n as f64;
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s - cs) * (d - cd).transpose();
    }
    let svd = SVD::new(h, true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let sv = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    if !(sv[order[0]] > 0.0) || sv[order[1]] <= RANK_TOL * sv[order[0]] {
        return Err(Error::DegenerateConfiguration("points are coincident or collinear".into()));
    }
    let v = v_t.transpose();
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        d[(order[2], order[2])] = -1.0;
    }
    let r = v * d * u.transpose();
    let t = cd - r * cs;
    Ok((r, t))
}

/// RMS distance between `t * src[i]` and `dst[i]`.
pub fn rmse_between(t: &RigidTransform, src: &[Vec3], dst: &[Vec3]) -> f64 {
    if src.is_empty() {
        return 0.0;
    }
    let ss: f64 = src.iter().zip(dst).map(|(s, d)| (t.transform_point(s) - d).norm_squared()).sum();
    (ss / src.len() as f64).sqrt()
}
