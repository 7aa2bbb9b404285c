use super::PointCloud;
use crate::error::{Error, Result};
use crate::geom::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    /// Index into the indexed cloud.
    pub index: usize,
    pub distance_sq: f64,
}

/// Static 3-d tree stored as an implicit balanced layout: the node for a
/// subrange `order[lo..hi]` is the median `order[(lo + hi) / 2]`.
#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<usize>,
    axes: Vec<u8>,
}

pub fn build_kdtree(cloud: &PointCloud) -> Result<KdTree> {
    KdTree::new(cloud.points().to_vec())
}

impl KdTree {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut axes = vec![0u8; points.len()];
        build(&points, &mut order, &mut axes);
        Ok(KdTree { points, order, axes })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> &Vec3 {
        &self.points[index]
    }

    /// Exact nearest neighbor; equidistant candidates resolve to the lowest
    /// index.
    pub fn nearest(&self, q: &Vec3) -> Neighbor {
        let mut best = Neighbor { index: usize::MAX, distance_sq: f64::INFINITY };
        self.search(q, 0, self.order.len(), &mut best);
        best
    }

    fn search(&self, q: &Vec3, lo: usize, hi: usize, best: &mut Neighbor) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid];
        let p = &self.points[idx];
        let d = (p - q).norm_squared();
        if d < best.distance_sq || (d == best.distance_sq && idx < best.index) {
            *best = Neighbor { index: idx, distance_sq: d };
        }
        let axis = self.axes[mid] as usize;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(q, near.0, near.1, best);
        // `<=` keeps equidistant points on the far side reachable for tie-breaking
        if diff * diff <= best.distance_sq {
            self.search(q, far.0, far.1, best);
        }
    }
}

fn build(points: &[Vec3], order: &mut [usize], axes: &mut [u8]) {
    if order.is_empty() {
        return;
    }
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for &i in order.iter() {
        lo = lo.inf(&points[i]);
        hi = hi.sup(&points[i]);
    }
    let axis = (hi - lo).imax();
    order.sort_by(|&a, &b| points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b)));
    let mid = order.len() / 2;
    axes[mid] = axis as u8;
    let (left, rest) = order.split_at_mut(mid);
    let (left_axes, rest_axes) = axes.split_at_mut(mid);
    build(points, left, left_axes);
    build(points, &mut rest[1..], &mut rest_axes[1..]);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::FrameId;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear_scan(points: &[Vec3], q: &Vec3) -> Neighbor {
        let mut best = Neighbor { index: usize::MAX, distance_sq: f64::INFINITY };
        for (i, p) in points.iter().enumerate() {
            let d = (p - q).norm_squared();
            if d < best.distance_sq {
                best = Neighbor { index: i, distance_sq: d };
            }
        }
        best
    }

    #[test]
    fn single_point() {
        let tree = KdTree::new(vec![Vec3::new(1.0, 2.0, 3.0)]).unwrap();
        for q in [Vec3::zeros(), Vec3::new(-5.0, 9.0, 1.0)] {
            assert_eq!(tree.nearest(&q).index, 0);
        }
    }

    #[test]
    fn empty_cloud_is_rejected() {
        let c = PointCloud::new(vec![], FrameId::named("A")).unwrap();
        assert!(matches!(build_kdtree(&c), Err(Error::EmptyInput)));
    }

    #[test]
    fn matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec3> = (0..1000)
            .map(|_| Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let tree = KdTree::new(pts.clone()).unwrap();
        for _ in 0..100 {
            let q = Vec3::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            assert_eq!(tree.nearest(&q), linear_scan(&pts, &q));
        }
        for (i, p) in pts.iter().enumerate().take(50) {
            let n = tree.nearest(p);
            assert_eq!((n.index, n.distance_sq), (i, 0.0));
        }
    }

    #[test]
    fn duplicate_points_resolve_to_lowest_index() {
        let mut pts = vec![Vec3::new(0.5, 0.5, 0.5); 7];
        pts.extend((0..20).map(|i| Vec3::new(i as f64, 0.0, 0.0)));
        let tree = KdTree::new(pts.clone()).unwrap();
        assert_eq!(tree.nearest(&Vec3::new(0.5, 0.5, 0.6)).index, 0);
        // grid ties: the query is equidistant from points 7+2 and 7+3
        assert_eq!(tree.nearest(&Vec3::new(2.5, 0.0, 0.0)), linear_scan(&pts, &Vec3::new(2.5, 0.0, 0.0)));
    }
}
