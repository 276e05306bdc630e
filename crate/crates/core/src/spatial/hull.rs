//! Convex hulls of small point sets by facet enumeration.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Half-space description `n . x <= c` (unit `n`) of the hull of a point set.
#[derive(Clone, Debug)]
pub struct ConvexHull {
    dim: usize,
    normals: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    /// Input points lying on each facet plane.
    facet_points: Vec<Vec<usize>>,
    points: Vec<Vec<f64>>,
}

impl ConvexHull {
    /// Enumerates every `d`-subset spanning a supporting hyperplane.
    ///
    /// Cost grows like `C(n, d) * n`; meant for tens of vertices.
    pub fn new(points: &[Vec<f64>]) -> Result<Self> {
        let d = points.first().map(Vec::len).ok_or(Error::EmptyCloud)?;
        if d == 0 || points.iter().any(|p| p.len() != d) {
            return Err(Error::InvalidParameter(
                "hull points must share a positive dimension".into(),
            ));
        }
        if points.len() < d + 1 {
            return Err(Error::TooFewPoints {
                needed: d + 1,
                got: points.len(),
            });
        }
        let scale = diameter(points).max(f64::MIN_POSITIVE);
        let tol = 1e-10 * scale;
        let mut hull = ConvexHull {
            dim: d,
            normals: Vec::new(),
            offsets: Vec::new(),
            facet_points: Vec::new(),
            points: points.to_vec(),
        };
        let mut subset: Vec<usize> = (0..d).collect();
        loop {
            if let Some(n) = plane_normal(points, &subset, scale) {
                let c: f64 = dot(&n, &points[subset[0]]);
                let side: Vec<f64> = points.iter().map(|p| dot(&n, p) - c).collect();
                let above = side.iter().any(|&s| s > tol);
                let below = side.iter().any(|&s| s < -tol);
                if !(above && below) {
                    let (n, c) = if above {
                        (n.iter().map(|v| -v).collect::<Vec<_>>(), -c)
                    } else {
                        (n, c)
                    };
                    hull.add_facet(n, c, &side, tol);
                }
            }
            if !next_combination(&mut subset, points.len()) {
                break;
            }
        }
        if hull.normals.len() < d + 1 {
            return Err(Error::InvalidParameter(
                "hull points are not affinely independent".into(),
            ));
        }
        Ok(hull)
    }

    fn add_facet(&mut self, n: Vec<f64>, c: f64, side: &[f64], tol: f64) {
        let dup = self
            .normals
            .iter()
            .zip(&self.offsets)
            .any(|(m, &e)| (c - e).abs() <= tol && m.iter().zip(&n).all(|(a, b)| (a - b).abs() <= 1e-9));
        if dup {
            return;
        }
        let on: Vec<usize> = (0..side.len()).filter(|&i| side[i].abs() <= tol).collect();
        self.normals.push(n);
        self.offsets.push(c);
        self.facet_points.push(on);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn facet_count(&self) -> usize {
        self.normals.len()
    }

    /// Outer unit normals and offsets.
    pub fn halfspaces(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.normals.iter().map(Vec::as_slice).zip(self.offsets.iter().copied())
    }

    /// Closed membership with absolute slack `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.halfspaces().all(|(n, c)| dot(n, x) <= c + tol)
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for p in &self.points {
            for j in 0..self.dim {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        (lo, hi)
    }

    /// Indices of input points that are hull vertices.
    pub fn vertex_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.facet_points.iter().flatten().copied().collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Lebesgue volume as a sum of cones over the facets.
    pub fn volume(&self) -> f64 {
        let verts = self.vertex_indices();
        let centroid: Vec<f64> = (0..self.dim)
            .map(|j| verts.iter().map(|&i| self.points[i][j]).sum::<f64>() / verts.len() as f64)
            .collect();
        let mut vol = 0.0;
        for ((n, &c), on) in self.normals.iter().zip(&self.offsets).zip(&self.facet_points) {
            let h = c - dot(n, &centroid);
            let facet: Vec<Vec<f64>> = on.iter().map(|&i| self.points[i].clone()).collect();
            vol += h * facet_volume(&facet, n) / self.dim as f64;
        }
        vol
    }
}

/// `(d-1)`-volume of the convex hull of coplanar points with plane normal `n`.
fn facet_volume(points: &[Vec<f64>], n: &[f64]) -> f64 {
    let d = n.len();
    if d == 1 {
        return 1.0;
    }
    let basis = complement_basis(n);
    let projected: Vec<Vec<f64>> = points
        .iter()
        .map(|p| basis.iter().map(|b| dot(b, p)).collect())
        .collect();
    if d == 2 {
        let lo = projected.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let hi = projected.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        return hi - lo;
    }
    ConvexHull::new(&projected).map(|h| h.volume()).unwrap_or(0.0)
}

/// Orthonormal basis of the hyperplane orthogonal to unit `n`.
fn complement_basis(n: &[f64]) -> Vec<Vec<f64>> {
    let d = n.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    // start from the coordinate axes least aligned with n
    let mut axes: Vec<usize> = (0..d).collect();
    axes.sort_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs()));
    for &k in &axes {
        if basis.len() == d - 1 {
            break;
        }
        let mut v = vec![0.0; d];
        v[k] = 1.0;
        for b in std::iter::once(n).chain(basis.iter().map(Vec::as_slice)) {
            let t = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= t * y);
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            basis.push(v.iter().map(|x| x / norm).collect());
        }
    }
    basis
}

/// Unit normal of the affine hull of `d` points, if they span a hyperplane.
fn plane_normal(points: &[Vec<f64>], subset: &[usize], scale: f64) -> Option<Vec<f64>> {
    let d = points[0].len();
    if d == 1 {
        return Some(vec![1.0]);
    }
    let p0 = &points[subset[0]];
    let m = DMatrix::from_fn(d - 1, d, |i, j| points[subset[i + 1]][j] - p0[j]);
    // generalised cross product via signed cofactors
    let mut n = vec![0.0; d];
    for (k, nk) in n.iter_mut().enumerate() {
        let minor = m.clone().remove_column(k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        *nk = sign * minor.determinant();
    }
    let norm = dot(&n, &n).sqrt();
    if norm <= 1e-12 * scale.powi(d as i32 - 1) {
        return None;
    }
    Some(n.iter().map(|v| v / norm).collect())
}

fn diameter(points: &[Vec<f64>]) -> f64 {
    let d = points[0].len();
    (0..d)
        .map(|j| {
            let lo = points.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        })
        .fold(0.0, f64::max)
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_vertices(sides: &[f64]) -> Vec<Vec<f64>> {
        let d = sides.len();
        (0..1usize << d)
            .map(|m| (0..d).map(|j| if m >> j & 1 == 1 { sides[j] } else { 0.0 }).collect())
            .collect()
    }

    #[test]
    fn box_volumes_and_membership() {
        let h = ConvexHull::new(&cube_vertices(&[1.0, 2.0, 3.0])).unwrap();
        assert_eq!(h.facet_count(), 6);
        assert!((h.volume() - 6.0).abs() < 1e-12);
        assert!(h.contains(&[0.5, 1.0, 3.0], 1e-12));
        assert!(!h.contains(&[0.5, 1.0, 3.01], 1e-12));
        let h4 = ConvexHull::new(&cube_vertices(&[1.0, 2.0, 0.5, 3.0])).unwrap();
        assert_eq!(h4.facet_count(), 8);
        assert!((h4.volume() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_volume_with_interior_points() {
        let pts = vec![
            vec![0.0, 0.0],
            vec![2.0, 0.0],
            vec![0.0, 2.0],
            vec![0.5, 0.5],
            vec![0.2, 0.1],
        ];
        let h = ConvexHull::new(&pts).unwrap();
        assert_eq!(h.facet_count(), 3);
        assert!((h.volume() - 2.0).abs() < 1e-12);
        assert_eq!(h.vertex_indices(), vec![0, 1, 2]);
        let s3 = vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        assert!((ConvexHull::new(&s3).unwrap().volume() - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_input_rejected() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]];
        assert!(ConvexHull::new(&pts).is_err());
    }
}
