//! Point clouds, nearest-neighbour queries, random lattices and windows.

mod grid;
mod hull;
mod kdtree;

pub use grid::{haar_rotation, BoxRegion, GridPlan, ShiftedGrid};
pub use hull::ConvexHull;
pub use kdtree::KdTree;

use crate::error::{Error, Result};
use crate::shape::ShapeSpec;

/// Finite point set with an exact nearest-neighbour index.
#[derive(Clone, Debug)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    tree: KdTree,
}

impl PointCloud {
    /// Builds a cloud from a flat row-major coordinate array.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if coords.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidParameter(format!(
                "{} coordinates do not split into {dim}-vectors",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coordinate".into()));
        }
        let tree = KdTree::build(dim, &coords);
        Ok(PointCloud { dim, coords, tree })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyCloud)?;
        let dim = first.len();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch(dim, p.len()));
            }
            coords.extend_from_slice(p);
        }
        Self::new(dim, coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Nearest point `(index, distance)`; ties go to the smallest index.
    pub fn nearest(&self, q: &[f64]) -> (usize, f64) {
        assert_eq!(q.len(), self.dim, "query dimension");
        let mut best = (f64::INFINITY, usize::MAX);
        self.tree.search(q, usize::MAX, &mut best);
        (best.1, best.0.sqrt())
    }

    /// Nearest point strictly closer than `sqrt(bound2)`, returning
    /// `(index, squared distance)`. `hint` is any index likely to be close.
    pub fn nearest_within(&self, q: &[f64], bound2: f64, hint: Option<usize>) -> Option<(usize, f64)> {
        let mut best = (bound2, usize::MAX);
        if let Some(h) = hint {
            let d2 = dist2(q, self.point(h));
            if d2 < bound2 {
                best = (d2, h);
            }
        }
        self.tree.search(q, usize::MAX, &mut best);
        (best.1 != usize::MAX && best.0 < bound2).then_some((best.1, best.0))
    }

    /// Distance from point `i` to its nearest other point.
    fn nn_distance_of(&self, i: usize) -> f64 {
        let mut best = (f64::INFINITY, usize::MAX);
        self.tree.search(self.point(i), i, &mut best);
        best.0.sqrt()
    }

    /// Per-axis bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for p in self.points() {
            for j in 0..self.dim {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        (lo, hi)
    }
}

#[inline]
pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn require_two(cloud: &PointCloud) -> Result<()> {
    if cloud.len() < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            got: cloud.len(),
        });
    }
    Ok(())
}

/// Mean distance from each point to its nearest other point.
pub fn avg_nn_distance(cloud: &PointCloud) -> Result<f64> {
    require_two(cloud)?;
    let sum: f64 = (0..cloud.len()).map(|i| cloud.nn_distance_of(i)).sum();
    Ok(sum / cloud.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinDistance {
    pub distance: f64,
    /// Set when two points coincide.
    pub duplicate: bool,
}

/// Smallest distance between two distinct points of the cloud.
pub fn min_pairwise_distance(cloud: &PointCloud) -> Result<MinDistance> {
    require_two(cloud)?;
    let distance = (0..cloud.len())
        .map(|i| cloud.nn_distance_of(i))
        .fold(f64::INFINITY, f64::min);
    let duplicate = distance == 0.0;
    if duplicate {
        log::warn!("point cloud contains duplicated points");
    }
    Ok(MinDistance { distance, duplicate })
}

/// Axis-aligned observation window `prod [a_i, b_i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationWindow {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ObservationWindow {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidParameter("window bounds must pair up".into()));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidParameter("window needs a_i < b_i on every axis".into()));
        }
        Ok(ObservationWindow { lo, hi })
    }

    /// Parses `a1,b1,a2,b2,...`.
    pub fn from_flat(v: &[f64]) -> Result<Self> {
        if !v.len().is_multiple_of(2) || v.is_empty() {
            return Err(Error::InvalidParameter(
                "window needs an even number of bounds a1,b1,a2,b2,...".into(),
            ));
        }
        let lo = v.iter().step_by(2).copied().collect();
        let hi = v.iter().skip(1).step_by(2).copied().collect();
        Self::new(lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }
}

/// Largest radius for which every neighbourhood of the data stays inside `w`.
pub fn window_max_radius(cloud: &PointCloud, w: &ObservationWindow) -> Result<f64> {
    if w.dim() != cloud.dim() {
        return Err(Error::DimensionMismatch(w.dim(), cloud.dim()));
    }
    let mut r = f64::INFINITY;
    for (index, p) in cloud.points().enumerate() {
        for j in 0..cloud.dim() {
            let (down, up) = (p[j] - w.lo[j], w.hi[j] - p[j]);
            if down < 0.0 || up < 0.0 {
                return Err(Error::OutsideWindow { index });
            }
            r = r.min(down).min(up);
        }
    }
    Ok(r)
}

/// All points of the lattice `a Z^d` lying in the (closed) shape.
pub fn grid_intersect_shape(shape: &ShapeSpec, a: f64) -> Result<PointCloud> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter("lattice spacing must be positive".into()));
    }
    let member = shape.membership()?;
    let (lo, hi) = shape.bounding_box()?;
    let d = lo.len();
    let tol = 1e-9 * a;
    let first: Vec<i64> = lo.iter().map(|v| ((v - tol) / a).ceil() as i64).collect();
    let last: Vec<i64> = hi.iter().map(|v| ((v + tol) / a).floor() as i64).collect();
    if first.iter().zip(&last).any(|(f, l)| f > l) {
        return Err(Error::ZeroPoints);
    }
    let mut coords = Vec::new();
    let mut z = first.clone();
    let mut x = vec![0.0; d];
    loop {
        for j in 0..d {
            x[j] = z[j] as f64 * a;
        }
        if member.contains(&x, tol) {
            coords.extend_from_slice(&x);
        }
        let mut j = d;
        loop {
            if j == 0 {
                return PointCloud::new(d, coords).map_err(|e| match e {
                    Error::EmptyCloud => Error::ZeroPoints,
                    e => e,
                });
            }
            j -= 1;
            z[j] += 1;
            if z[j] <= last[j] {
                break;
            }
            z[j] = first[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_nearest(pts: &[Vec<f64>], q: &[f64]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in pts.iter().enumerate() {
            let d = dist2(p, q);
            if d < best.1 {
                best = (i, d);
            }
        }
        (best.0, best.1.sqrt())
    }

    #[test]
    fn nearest_examples() {
        let c = PointCloud::from_points(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let (i, d) = c.nearest(&[0.4, 0.0]);
        assert_eq!((i, d), (0, 0.4));
        assert_eq!(c.nearest(&[1.0, 0.0]).0, 0);
    }

    #[test]
    fn nearest_matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [5usize, 100, 700] {
            let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random(), rng.random()]).collect();
            let c = PointCloud::from_points(&pts).unwrap();
            for _ in 0..1000 {
                let q = vec![rng.random::<f64>() * 1.4 - 0.2, rng.random::<f64>() * 1.4 - 0.2];
                assert_eq!(c.nearest(&q), brute_nearest(&pts, &q));
            }
        }
    }

    #[test]
    fn ties_resolve_to_smallest_index_on_lattice() {
        // many exact ties: integer lattice queried at cell centres
        let mut pts = Vec::new();
        for i in 0..12 {
            for j in 0..12 {
                pts.push(vec![(11 - i) as f64, j as f64]);
            }
        }
        let c = PointCloud::from_points(&pts).unwrap();
        for i in 0..11 {
            for j in 0..11 {
                let q = [i as f64 + 0.5, j as f64 + 0.5];
                assert_eq!(c.nearest(&q), brute_nearest(&pts, &q));
            }
        }
    }

    #[test]
    fn bounded_query_with_hint() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Vec<f64>> = (0..300)
            .map(|_| vec![rng.random(), rng.random(), rng.random()])
            .collect();
        let c = PointCloud::from_points(&pts).unwrap();
        for _ in 0..500 {
            let q: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 1.6 - 0.3).collect();
            let (bi, bd) = brute_nearest(&pts, &q);
            let hint = Some(rng.random_range(0..300));
            let got = c.nearest_within(&q, 0.01, hint);
            if bd * bd < 0.01 {
                assert_eq!(got.map(|g| g.0), Some(bi));
            } else {
                assert!(got.is_none());
            }
        }
    }

    #[test]
    fn avg_nn_examples() {
        let c = PointCloud::from_points(&[vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(avg_nn_distance(&c).unwrap(), 1.0);
        let mut pts = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                pts.push(vec![i as f64, j as f64]);
            }
        }
        let c = PointCloud::from_points(&pts).unwrap();
        assert_eq!(avg_nn_distance(&c).unwrap(), 1.0);
        assert_eq!(min_pairwise_distance(&c).unwrap().distance, 1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.random(), rng.random()]).collect();
        let c = PointCloud::from_points(&pts).unwrap();
        let mut sum = 0.0;
        let mut min = f64::INFINITY;
        for (i, p) in pts.iter().enumerate() {
            let m = pts
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| dist2(p, q).sqrt())
                .fold(f64::INFINITY, f64::min);
            sum += m;
            min = min.min(m);
        }
        assert!((avg_nn_distance(&c).unwrap() - sum / 50.0).abs() < 1e-12);
        assert_eq!(min_pairwise_distance(&c).unwrap().distance, min);

        let single = PointCloud::from_points(&[vec![0.0]]).unwrap();
        assert!(avg_nn_distance(&single).is_err());
    }

    #[test]
    fn duplicates_flagged() {
        let c = PointCloud::from_points(&[vec![0.0, 1.0], vec![0.0, 1.0], vec![3.0, 1.0]]).unwrap();
        let m = min_pairwise_distance(&c).unwrap();
        assert_eq!(m.distance, 0.0);
        assert!(m.duplicate);
    }

    #[test]
    fn window_radius_examples() {
        let c = PointCloud::from_points(&[vec![0.0, 0.0]]).unwrap();
        let w = ObservationWindow::from_flat(&[-1.0, 2.0, -3.0, 4.0]).unwrap();
        assert_eq!(window_max_radius(&c, &w).unwrap(), 1.0);
        let c = PointCloud::from_points(&[vec![0.5, 0.5], vec![0.9, 0.5]]).unwrap();
        let w = ObservationWindow::from_flat(&[0.0, 1.0, 0.0, 1.0]).unwrap();
        assert!((window_max_radius(&c, &w).unwrap() - 0.1).abs() < 1e-15);
        let c = PointCloud::from_points(&[vec![1.5, 0.5]]).unwrap();
        assert!(matches!(
            window_max_radius(&c, &w),
            Err(Error::OutsideWindow { index: 0 })
        ));
    }
}
