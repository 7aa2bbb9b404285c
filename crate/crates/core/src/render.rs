//! Depth and instance-mask ray casting of posed meshes.
//!
//! Camera axes are x-right, y-down, z-forward; rays pass through pixel
//! centers. Depth is the z coordinate of the hit in the camera frame.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::bvh::{Bvh, Triangle};
use crate::error::{Error, Result};
use crate::geom::{FrameId, RigidTransform, Vec3};
use crate::registration::TriangleMesh;

/// Mask value for pixels that hit nothing.
pub const BACKGROUND_ID: u8 = 0;

/// Largest number of objects an 8-bit mask can label.
pub const MAX_OBJECTS: usize = 255;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PinholeCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl PinholeCamera {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let cam = PinholeCamera { fx, fy, cx, cy, width, height };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.fx.is_finite()
            && self.fy.is_finite()
            && self.width > 0
            && self.height > 0
            && (0.0..self.width as f64).contains(&self.cx)
            && (0.0..self.height as f64).contains(&self.cy);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid camera intrinsics {self:?}")))
        }
    }

    /// Camera-frame ray direction through the center of pixel `(u, v)`,
    /// scaled so its z component is 1.
    pub fn ray(&self, u: usize, v: usize) -> Vec3 {
        Vec3::new((u as f64 + 0.5 - self.cx) / self.fx, (v as f64 + 0.5 - self.cy) / self.fy, 1.0)
    }

    /// Projects a camera-frame point to continuous pixel coordinates.
    pub fn project(&self, p: &Vec3) -> Option<(f64, f64)> {
        (p.z > 0.0).then(|| (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneObject {
    pub object_id: String,
    pub mesh: TriangleMesh,
    /// `mesh -> base`.
    pub pose: RigidTransform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    base: FrameId,
    objects: Vec<SceneObject>,
}

impl Scene {
    pub fn new(base: FrameId, objects: Vec<SceneObject>) -> Result<Self> {
        if objects.len() > MAX_OBJECTS {
            return Err(Error::InvalidConfig(format!(
                "{} objects exceed the {MAX_OBJECTS} an 8-bit mask can label",
                objects.len()
            )));
        }
        let mut ids = HashSet::new();
        for o in &objects {
            if !ids.insert(o.object_id.as_str()) {
                return Err(Error::InvalidConfig(format!("duplicate object id {}", o.object_id)));
            }
            if o.pose.from_frame() != o.mesh.frame() {
                return Err(Error::frames(o.mesh.frame(), o.pose.from_frame()));
            }
            if o.pose.to_frame() != &base {
                return Err(Error::frames(&base, o.pose.to_frame()));
            }
        }
        Ok(Scene { base, objects })
    }

    pub fn base_frame(&self) -> &FrameId {
        &self.base
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    /// Mask id of the object at `index`.
    pub fn instance_id(index: usize) -> u8 {
        (index + 1) as u8
    }
}

/// All scene triangles in the base frame under one BVH, with the owning
/// object of each triangle.
#[derive(Clone, Debug)]
pub struct AccelStructure {
    bvh: Bvh,
    owner: Vec<usize>,
    base: FrameId,
}

impl AccelStructure {
    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    pub fn owner(&self, triangle: usize) -> usize {
        self.owner[triangle]
    }
}

pub fn build_bvh(scene: &Scene) -> Result<AccelStructure> {
    let mut tris: Vec<Triangle> = Vec::new();
    let mut owner = Vec::new();
    for (i, o) in scene.objects.iter().enumerate() {
        for t in o.mesh.triangle_soup() {
            tris.push(t.map(|v| o.pose.transform_point(&v)));
            owner.push(i);
        }
    }
    let bvh = Bvh::build(tris).ok_or(Error::EmptyScene)?;
    Ok(AccelStructure { bvh, owner, base: scene.base.clone() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    /// Row-major meters; [`DepthMap::INVALID`] marks misses.
    pub values: Vec<f64>,
}

impl DepthMap {
    pub const INVALID: f64 = 0.0;

    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        let d = self.values[v * self.width + u];
        (d != Self::INVALID).then_some(d)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdMap {
    pub width: usize,
    pub height: usize,
    /// Row-major instance ids; [`BACKGROUND_ID`] marks misses.
    pub ids: Vec<u8>,
}

impl IdMap {
    pub fn get(&self, u: usize, v: usize) -> u8 {
        self.ids[v * self.width + u]
    }
}

/// Ray casts depth and instance ids in one pass. Rows render in parallel;
/// each pixel is computed independently, so output does not depend on
/// scheduling.
pub fn render_with(
    accel: &AccelStructure,
    cam: &PinholeCamera,
    cam_pose: &RigidTransform,
) -> Result<(DepthMap, IdMap)> {
    cam.validate()?;
    if cam_pose.to_frame() != &accel.base {
        return Err(Error::frames(&accel.base, cam_pose.to_frame()));
    }
    let origin = *cam_pose.translation();
    let (w, h) = (cam.width, cam.height);
    let mut depth = vec![DepthMap::INVALID; w * h];
    let mut ids = vec![BACKGROUND_ID; w * h];
    depth.par_chunks_mut(w).zip(ids.par_chunks_mut(w)).enumerate().for_each(|(v, (drow, irow))| {
        for u in 0..w {
            let dir = cam_pose.transform_vector(&cam.ray(u, v));
            if let Some(hit) = accel.bvh.intersect(&origin, &dir, 0.0) {
                drow[u] = hit.t;
                irow[u] = Scene::instance_id(accel.owner[hit.triangle]);
            }
        }
    });
    Ok((DepthMap { width: w, height: h, values: depth }, IdMap { width: w, height: h, ids }))
}

pub fn render_depth(scene: &Scene, cam: &PinholeCamera, cam_pose: &RigidTransform) -> Result<DepthMap> {
    Ok(render_with(&build_bvh(scene)?, cam, cam_pose)?.0)
}

pub fn render_instance_mask(scene: &Scene, cam: &PinholeCamera, cam_pose: &RigidTransform) -> Result<IdMap> {
    Ok(render_with(&build_bvh(scene)?, cam, cam_pose)?.1)
}
