//! Axis-aligned bounding-volume hierarchy over triangles.
//!
//! Used for both ray casting (depth rendering) and exact closest-point
//! queries (ICP against meshes). Every query has a brute-force twin in this
//! module that applies the same per-triangle primitive, so accelerated and
//! exhaustive results are bit-identical. Ties are broken toward the lowest
//! triangle index.

use crate::geom::Vec3;

pub type Triangle = [Vec3; 3];

/// Barycentric slack for ray/triangle tests, so rays passing exactly through
/// shared edges or vertices are not lost to rounding.
const BARY_EPS: f64 = 1e-12;
const LEAF_SIZE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb { min: Vec3::repeat(f64::INFINITY), max: Vec3::repeat(f64::NEG_INFINITY) }
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&mut self, o: &Aabb) {
        self.min = self.min.inf(&o.min);
        self.max = self.max.sup(&o.max);
    }

    pub fn of_triangle(t: &Triangle) -> Self {
        let mut b = Aabb::empty();
        t.iter().for_each(|p| b.grow(p));
        b
    }

    /// Squared distance from `p` to the box (0 inside).
    pub fn distance_sq(&self, p: &Vec3) -> f64 {
        let d = (self.min - p).sup(&Vec3::zeros()).sup(&(p - self.max));
        d.norm_squared()
    }

    /// Entry parameter of the ray into the box, if it is hit within `[0, t_max]`.
    pub fn ray_entry(&self, origin: &Vec3, inv_dir: &Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for k in 0..3 {
            let a = (self.min[k] - origin[k]) * inv_dir[k];
            let b = (self.max[k] - origin[k]) * inv_dir[k];
            // NaN arises for a zero direction component with the origin on a slab face
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            if !lo.is_nan() {
                t0 = t0.max(lo);
            }
            if !hi.is_nan() {
                t1 = t1.min(hi);
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    /// Ray parameter: hit point is `origin + t * dir`.
    pub t: f64,
    pub triangle: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosestHit {
    pub point: Vec3,
    pub distance_sq: f64,
    pub triangle: usize,
}

/// Möller–Trumbore intersection; returns the ray parameter for hits with
/// `t > t_min`.
pub fn intersect_triangle(tri: &Triangle, origin: &Vec3, dir: &Vec3, t_min: f64) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(-BARY_EPS..=1.0 + BARY_EPS).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < -BARY_EPS || u + v > 1.0 + BARY_EPS {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > t_min).then_some(t)
}

/// Closest point on a triangle (region classification on barycentric
/// coordinates, after Ericson).
pub fn closest_point_on_triangle(p: &Vec3, tri: &Triangle) -> Vec3 {
    let [a, b, c] = tri;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

fn better_ray(cand: RayHit, best: &Option<RayHit>) -> bool {
    match best {
        None => true,
        Some(b) => cand.t < b.t || (cand.t == b.t && cand.triangle < b.triangle),
    }
}

fn better_closest(cand: &ClosestHit, best: &Option<ClosestHit>) -> bool {
    match best {
        None => true,
        Some(b) => {
            cand.distance_sq < b.distance_sq || (cand.distance_sq == b.distance_sq && cand.triangle < b.triangle)
        }
    }
}

/// Nearest ray hit by testing every triangle.
pub fn intersect_exhaustive(tris: &[Triangle], origin: &Vec3, dir: &Vec3, t_min: f64) -> Option<RayHit> {
    let mut best = None;
    for (i, tri) in tris.iter().enumerate() {
        if let Some(t) = intersect_triangle(tri, origin, dir, t_min) {
            let cand = RayHit { t, triangle: i };
            if better_ray(cand, &best) {
                best = Some(cand);
            }
        }
    }
    best
}

/// Closest surface point by testing every triangle.
pub fn closest_exhaustive(tris: &[Triangle], p: &Vec3) -> Option<ClosestHit> {
    let mut best = None;
    for (i, tri) in tris.iter().enumerate() {
        let q = closest_point_on_triangle(p, tri);
        let cand = ClosestHit { point: q, distance_sq: (q - p).norm_squared(), triangle: i };
        if better_closest(&cand, &best) {
            best = Some(cand);
        }
    }
    best
}

#[derive(Clone, Debug)]
enum NodeKind {
    Leaf { start: usize, count: usize },
    Inner { left: usize, right: usize },
}

#[derive(Clone, Debug)]
struct Node {
    bounds: Aabb,
    kind: NodeKind,
}

#[derive(Clone, Debug)]
pub struct Bvh {
    tris: Vec<Triangle>,
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl Bvh {
    /// Builds a hierarchy by median split along the widest centroid axis.
    /// Returns `None` for an empty triangle list.
    pub fn build(tris: Vec<Triangle>) -> Option<Self> {
        if tris.is_empty() {
            return None;
        }
        let centroids: Vec<Vec3> = tris.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let boxes: Vec<Aabb> = tris.iter().map(Aabb::of_triangle).collect();
        let mut order: Vec<usize> = (0..tris.len()).collect();
        let mut nodes = Vec::with_capacity(2 * tris.len() / LEAF_SIZE + 1);
        build_node(&mut nodes, &mut order, 0, &centroids, &boxes);
        Some(Bvh { tris, nodes, order })
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.tris
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    /// Nearest hit with `t > t_min`; identical to [`intersect_exhaustive`].
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3, t_min: f64) -> Option<RayHit> {
        let inv_dir = dir.map(|v| 1.0 / v);
        let mut best: Option<RayHit> = None;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            let limit = best.map_or(f64::INFINITY, |b| b.t);
            if node.bounds.ray_entry(origin, &inv_dir, limit).is_none() {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &ti in &self.order[start..start + count] {
                        if let Some(t) = intersect_triangle(&self.tris[ti], origin, dir, t_min) {
                            let cand = RayHit { t, triangle: ti };
                            if better_ray(cand, &best) {
                                best = Some(cand);
                            }
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        best
    }

    /// Exact closest surface point; identical to [`closest_exhaustive`].
    pub fn closest_point(&self, p: &Vec3) -> ClosestHit {
        let mut best: Option<ClosestHit> = None;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if let Some(b) = &best {
                if node.bounds.distance_sq(p) > b.distance_sq {
                    continue;
                }
            }
            match node.kind {
                NodeKind::Leaf { start, count } => {
                    for &ti in &self.order[start..start + count] {
                        let q = closest_point_on_triangle(p, &self.tris[ti]);
                        let cand = ClosestHit { point: q, distance_sq: (q - p).norm_squared(), triangle: ti };
                        if better_closest(&cand, &best) {
                            best = Some(cand);
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    let (l, r) = (&self.nodes[left].bounds, &self.nodes[right].bounds);
                    // visit the nearer child first
                    if l.distance_sq(p) <= r.distance_sq(p) {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best.expect("bvh is never empty")
    }
}

fn build_node(nodes: &mut Vec<Node>, order: &mut [usize], offset: usize, centroids: &[Vec3], boxes: &[Aabb]) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbox = Aabb::empty();
    for &i in order.iter() {
        bounds.merge(&boxes[i]);
        cbox.grow(&centroids[i]);
    }
    // pad so slab tests can never reject a hit the triangle test accepts
    let pad = (bounds.max - bounds.min).norm() * 1e-9 + 1e-12;
    bounds.min -= Vec3::repeat(pad);
    bounds.max += Vec3::repeat(pad);
    let idx = nodes.len();
    nodes.push(Node { bounds, kind: NodeKind::Leaf { start: offset, count: order.len() } });
    if order.len() <= LEAF_SIZE {
        return idx;
    }
    let extent = cbox.max - cbox.min;
    let axis = extent.imax();
    if extent[axis] <= 0.0 {
        return idx;
    }
    order.sort_by(|&a, &b| centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b)));
    let mid = order.len() / 2;
    let (lo, hi) = order.split_at_mut(mid);
    let left = build_node(nodes, lo, offset, centroids, boxes);
    let right = build_node(nodes, hi, offset + mid, centroids, boxes);
    nodes[idx].kind = NodeKind::Inner { left, right };
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_soup(rng: &mut ChaCha8Rng, n: usize) -> Vec<Triangle> {
        (0..n)
            .map(|_| {
                let c = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                let mut v =
                    || c + Vec3::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
                [v(), v(), v()]
            })
            .collect()
    }

    #[test]
    fn single_triangle() {
        let tri = [Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 1.0), Vec3::new(0.0, 1.0, 1.0)];
        let bvh = Bvh::build(vec![tri]).unwrap();
        assert_eq!(bvh.node_count(), 1);
        let hit = bvh.intersect(&Vec3::new(0.2, 0.2, 0.0), &Vec3::z(), 0.0).unwrap();
        assert_eq!(hit.triangle, 0);
        assert!((hit.t - 1.0).abs() < 1e-15);
        assert!(bvh.intersect(&Vec3::new(0.8, 0.8, 0.0), &Vec3::z(), 0.0).is_none());
        assert!(bvh.intersect(&Vec3::new(0.2, 0.2, 0.0), &-Vec3::z(), 0.0).is_none());
    }

    #[test]
    fn closest_point_regions() {
        let tri = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let cases = [
            (Vec3::new(0.2, 0.2, 1.0), Vec3::new(0.2, 0.2, 0.0)),
            (Vec3::new(-1.0, -1.0, 0.0), Vec3::new(0.0, 0.0, 0.0)),
            (Vec3::new(2.0, -1.0, 0.0), Vec3::new(1.0, 0.0, 0.0)),
            (Vec3::new(0.5, -1.0, 0.3), Vec3::new(0.5, 0.0, 0.0)),
            (Vec3::new(1.0, 1.0, 0.0), Vec3::new(0.5, 0.5, 0.0)),
            (Vec3::new(-1.0, 0.5, 0.0), Vec3::new(0.0, 0.5, 0.0)),
            (Vec3::new(-0.5, 3.0, 0.0), Vec3::new(0.0, 1.0, 0.0)),
        ];
        for (p, expected) in cases {
            assert!((closest_point_on_triangle(&p, &tri) - expected).norm() < 1e-15, "{p:?}");
        }
    }

    #[test]
    fn bvh_matches_exhaustive_rays() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tris = random_soup(&mut rng, 2000);
        let bvh = Bvh::build(tris.clone()).unwrap();
        for _ in 0..2000 {
            let o = Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), -3.0);
            let d = Vec3::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), 1.0);
            assert_eq!(bvh.intersect(&o, &d, 0.0), intersect_exhaustive(&tris, &o, &d, 0.0));
        }
    }

    #[test]
    fn bvh_matches_exhaustive_closest() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let tris = random_soup(&mut rng, 1500);
        let bvh = Bvh::build(tris.clone()).unwrap();
        for _ in 0..2000 {
            let p = Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            assert_eq!(Some(bvh.closest_point(&p)), closest_exhaustive(&tris, &p));
        }
    }

    #[test]
    fn coincident_triangles_break_ties_by_index() {
        let tri = [Vec3::new(0.0, 0.0, 1.0), Vec3::new(1.0, 0.0, 1.0), Vec3::new(0.0, 1.0, 1.0)];
        let tris = vec![tri; 9];
        let bvh = Bvh::build(tris.clone()).unwrap();
        let o = Vec3::new(0.1, 0.1, 0.0);
        assert_eq!(bvh.intersect(&o, &Vec3::z(), 0.0).unwrap().triangle, 0);
        assert_eq!(bvh.closest_point(&Vec3::new(0.3, 0.3, 5.0)).triangle, 0);
    }

    #[test]
    fn empty_build() {
        assert!(Bvh::build(vec![]).is_none());
    }
}
