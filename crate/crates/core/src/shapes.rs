//! Closed triangle-mesh primitives with outward-facing winding, and surface
//! sampling.

use std::collections::HashMap;

use rand::Rng;

use crate::error::Result;
use crate::geom::{FrameId, Vec3};
use crate::registration::{triangle_area, TriangleMesh};

/// Axis-aligned box centered at the origin with full edge lengths `size`.
pub fn box_mesh(size: Vec3, frame: FrameId) -> Result<TriangleMesh> {
    let h = size / 2.0;
    let vertices = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            )
        })
        .collect();
    let triangles = vec![
        [0, 2, 1],
        [1, 2, 3],
        [4, 5, 6],
        [5, 7, 6],
        [0, 1, 4],
        [1, 5, 4],
        [2, 6, 3],
        [3, 6, 7],
        [0, 4, 2],
        [2, 4, 6],
        [1, 3, 5],
        [3, 7, 5],
    ];
    TriangleMesh::new(vertices, triangles, frame)
}

/// Geodesic sphere from a subdivided icosahedron.
pub fn icosphere(radius: f64, subdivisions: u32, frame: FrameId) -> Result<TriangleMesh> {
    let p = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, p, 0.0),
        (1.0, p, 0.0),
        (-1.0, -p, 0.0),
        (1.0, -p, 0.0),
        (0.0, -1.0, p),
        (0.0, 1.0, p),
        (0.0, -1.0, -p),
        (0.0, 1.0, -p),
        (p, 0.0, -1.0),
        (p, 0.0, 1.0),
        (-p, 0.0, -1.0),
        (-p, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) / 2.0).normalize());
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for [a, b, c] in triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    for v in &mut vertices {
        *v *= radius;
    }
    TriangleMesh::new(vertices, triangles, frame)
}

/// Capped cylinder along z, centered at the origin.
pub fn cylinder(radius: f64, height: f64, segments: usize, frame: FrameId) -> Result<TriangleMesh> {
    let segments = segments.max(3);
    let h = height / 2.0;
    let mut vertices = vec![Vec3::new(0.0, 0.0, -h), Vec3::new(0.0, 0.0, h)];
    for i in 0..segments {
        let a = std::f64::consts::TAU * i as f64 / segments as f64;
        let (s, c) = a.sin_cos();
        vertices.push(Vec3::new(radius * c, radius * s, -h));
        vertices.push(Vec3::new(radius * c, radius * s, h));
    }
    let mut triangles = Vec::with_capacity(segments * 4);
    for i in 0..segments {
        let j = (i + 1) % segments;
        let (b0, t0, b1, t1) = (2 + 2 * i, 3 + 2 * i, 2 + 2 * j, 3 + 2 * j);
        triangles.push([0, b1, b0]);
        triangles.push([1, t0, t1]);
        triangles.push([b0, b1, t0]);
        triangles.push([t0, b1, t1]);
    }
    TriangleMesh::new(vertices, triangles, frame)
}

/// Unit normal of a triangle from its winding.
pub fn triangle_normal(t: &[Vec3; 3]) -> Vec3 {
    (t[1] - t[0]).cross(&(t[2] - t[0])).normalize()
}

/// Area-weighted uniform samples on the triangles accepted by `keep`, which
/// receives each triangle's outward normal. Returns the samples and the
/// index of the triangle each lies on.
pub fn sample_surface<R: Rng>(
    mesh: &TriangleMesh,
    n: usize,
    rng: &mut R,
    keep: impl Fn(&Vec3) -> bool,
) -> Vec<(Vec3, usize)> {
    let soup = mesh.triangle_soup();
    let mut cumulative = Vec::with_capacity(soup.len());
    let mut total = 0.0;
    for t in &soup {
        if keep(&triangle_normal(t)) {
            total += triangle_area(t);
        }
        cumulative.push(total);
    }
    if total <= 0.0 {
        return Vec::new();
    }
    (0..n)
        .map(|_| {
            let x = rng.gen_range(0.0..total);
            let i = cumulative.partition_point(|&c| c <= x).min(soup.len() - 1);
            let t = &soup[i];
            let (mut u, mut v) = (rng.gen::<f64>(), rng.gen::<f64>());
            if u + v > 1.0 {
                (u, v) = (1.0 - u, 1.0 - v);
            }
            (t[0] + (t[1] - t[0]) * u + (t[2] - t[0]) * v, i)
        })
        .collect()
}
