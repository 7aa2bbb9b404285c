use super::TriangleMesh;
use crate::bvh::{closest_exhaustive, Bvh};
use crate::error::{Error, Result};
use crate::geom::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosestPoint {
    pub point: Vec3,
    pub distance: f64,
    pub triangle: usize,
}

/// Exact closest point on `mesh` to `p`, scanning every triangle.
pub fn closest_point_on_mesh(mesh: &TriangleMesh, p: &Vec3) -> Result<ClosestPoint> {
    let hit = closest_exhaustive(&mesh.triangle_soup(), p).ok_or(Error::EmptyMesh)?;
    Ok(ClosestPoint { point: hit.point, distance: hit.distance_sq.sqrt(), triangle: hit.triangle })
}

/// BVH-accelerated closest-point queries against one mesh. Results are
/// identical to [`closest_point_on_mesh`].
#[derive(Clone, Debug)]
pub struct MeshIndex {
    bvh: Bvh,
}

impl MeshIndex {
    pub fn new(mesh: &TriangleMesh) -> Result<Self> {
        let bvh = Bvh::build(mesh.triangle_soup()).ok_or(Error::EmptyMesh)?;
        Ok(MeshIndex { bvh })
    }

    pub fn closest(&self, p: &Vec3) -> ClosestPoint {
        let hit = self.bvh.closest_point(p);
        ClosestPoint { point: hit.point, distance: hit.distance_sq.sqrt(), triangle: hit.triangle }
    }
}
