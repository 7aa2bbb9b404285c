//! Rigid registration: closed-form fits on known correspondences, nearest
//! neighbor search, and iterative closest point refinement.

mod icp;
mod kabsch;
mod kdtree;
mod mesh;

pub use icp::{icp, IcpParams, IcpTarget, RegistrationResult};
pub use kabsch::{kabsch_fit, rmse_between};
pub use kdtree::{build_kdtree, KdTree, Neighbor};
pub use mesh::{closest_point_on_mesh, ClosestPoint, MeshIndex};

use crate::error::{Error, Result};
use crate::geom::{FrameId, RigidTransform, Vec3};

/// Minimum triangle area (m²) below which a triangle counts as degenerate.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec3>,
    frame: FrameId,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, frame: FrameId) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidConfig(format!("point {i} has non-finite coordinates")));
        }
        Ok(PointCloud { points, frame })
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn frame(&self) -> &FrameId {
        &self.frame
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Maps every point through `t`; `t` must map out of this cloud's frame.
    pub fn transformed(&self, t: &RigidTransform) -> Result<PointCloud> {
        if t.from_frame() != &self.frame {
            return Err(Error::FrameMismatch { expected: self.frame.to_string(), found: t.from_frame().to_string() });
        }
        Ok(PointCloud {
            points: self.points.iter().map(|p| t.transform_point(p)).collect(),
            frame: t.to_frame().clone(),
        })
    }

    pub fn into_points(self) -> Vec<Vec3> {
        self.points
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    frame: FrameId,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>, frame: FrameId) -> Result<Self> {
        if let Some(i) = vertices.iter().position(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidMesh(format!("vertex {i} has non-finite coordinates")));
        }
        for (i, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!("triangle {i} references vertex {bad} of {}", vertices.len())));
            }
            let area = triangle_area(&[vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]]);
            if area <= MIN_TRIANGLE_AREA {
                return Err(Error::InvalidMesh(format!("triangle {i} is degenerate (area {area:e} m²)")));
            }
        }
        Ok(TriangleMesh { vertices, triangles, frame })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn frame(&self) -> &FrameId {
        &self.frame
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[i];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_soup(&self) -> Vec<[Vec3; 3]> {
        (0..self.triangles.len()).map(|i| self.triangle(i)).collect()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| triangle_area(&self.triangle(i))).sum()
    }

    /// Maps the vertices through `t`; `t` must map out of this mesh's frame.
    pub fn transformed(&self, t: &RigidTransform) -> Result<TriangleMesh> {
        if t.from_frame() != &self.frame {
            return Err(Error::FrameMismatch { expected: self.frame.to_string(), found: t.from_frame().to_string() });
        }
        Ok(TriangleMesh {
            vertices: self.vertices.iter().map(|p| t.transform_point(p)).collect(),
            triangles: self.triangles.clone(),
            frame: t.to_frame().clone(),
        })
    }
}

pub fn triangle_area(t: &[Vec3; 3]) -> f64 {
    0.5 * (t[1] - t[0]).cross(&(t[2] - t[0])).norm()
}
