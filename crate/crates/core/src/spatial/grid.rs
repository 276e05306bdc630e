//! Randomly shifted (and optionally rotated) lattices.

use std::ops::Range;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Closed axis-aligned box `prod [lo_i, hi_i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidParameter("region bounds must pair up".into()));
        }
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) || lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(Error::InvalidParameter("region must be bounded with lo <= hi".into()));
        }
        Ok(BoxRegion { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Every side pushed out by `r`.
    pub fn inflated(&self, r: f64) -> Self {
        BoxRegion {
            lo: self.lo.iter().map(|v| v - r).collect(),
            hi: self.hi.iter().map(|v| v + r).collect(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }
}

/// The point set `O (a Z^d + U)` with `U` uniform in `[0, a)^d` and `O` an
/// optional rotation (identity when absent).
#[derive(Clone, Debug)]
pub struct ShiftedGrid {
    spacing: f64,
    shift: Vec<f64>,
    /// Row-major `d x d`.
    rotation: Option<Vec<f64>>,
}

impl ShiftedGrid {
    pub fn new(spacing: f64, shift: Vec<f64>, rotation: Option<Vec<f64>>) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter("grid spacing must be positive".into()));
        }
        let d = shift.len();
        if d == 0 {
            return Err(Error::InvalidParameter("grid dimension must be positive".into()));
        }
        if shift.iter().any(|u| !(0.0..spacing).contains(u)) {
            return Err(Error::InvalidParameter("shift must lie in [0, a)^d".into()));
        }
        if let Some(r) = &rotation {
            if r.len() != d * d {
                return Err(Error::DimensionMismatch(d * d, r.len()));
            }
        }
        Ok(ShiftedGrid {
            spacing,
            shift,
            rotation,
        })
    }

    /// Draws the shift (and rotation, if requested) from `seed`.
    pub fn random(dim: usize, spacing: f64, seed: u64, rotate: bool) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dim)
            .map(|_| rng.random::<f64>() * spacing)
            .map(|u| if u >= spacing { 0.0 } else { u })
            .collect();
        let rotation = rotate.then(|| haar_from_rng(dim, &mut rng));
        Self::new(spacing, shift, rotation)
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn rotation(&self) -> Option<&[f64]> {
        self.rotation.as_deref()
    }

    /// Lattice index ranges covering `region`.
    pub fn plan(&self, region: &BoxRegion) -> Result<GridPlan> {
        let d = self.dim();
        if region.dim() != d {
            return Err(Error::DimensionMismatch(d, region.dim()));
        }
        // box in unrotated coordinates that contains the preimage of region
        let (plo, phi): (Vec<f64>, Vec<f64>) = match &self.rotation {
            None => (region.lo.clone(), region.hi.clone()),
            Some(o) => {
                let c: Vec<f64> = (0..d).map(|i| 0.5 * (region.lo[i] + region.hi[i])).collect();
                let h: Vec<f64> = (0..d).map(|i| 0.5 * (region.hi[i] - region.lo[i])).collect();
                let mut lo = vec![0.0; d];
                let mut hi = vec![0.0; d];
                for k in 0..d {
                    let ck: f64 = (0..d).map(|i| o[i * d + k] * c[i]).sum();
                    let hk: f64 = (0..d).map(|i| o[i * d + k].abs() * h[i]).sum();
                    lo[k] = ck - hk;
                    hi[k] = ck + hk;
                }
                (lo, hi)
            }
        };
        let a = self.spacing;
        let first: Vec<i64> = (0..d).map(|k| ((plo[k] - self.shift[k]) / a).floor() as i64).collect();
        let last: Vec<i64> = (0..d).map(|k| ((phi[k] - self.shift[k]) / a).ceil() as i64).collect();
        Ok(GridPlan {
            grid: self.clone(),
            region: region.clone(),
            first,
            last,
        })
    }
}

/// Enumeration of the grid points inside a region, in lexicographic lattice
/// order (last axis fastest), split into rows along the last axis.
#[derive(Clone, Debug)]
pub struct GridPlan {
    grid: ShiftedGrid,
    region: BoxRegion,
    first: Vec<i64>,
    last: Vec<i64>,
}

impl GridPlan {
    pub fn grid(&self) -> &ShiftedGrid {
        &self.grid
    }

    pub fn region(&self) -> &BoxRegion {
        &self.region
    }

    fn extent(&self, k: usize) -> usize {
        (self.last[k] - self.first[k] + 1).max(0) as usize
    }

    /// Number of rows (lattice lines along the last axis).
    pub fn row_count(&self) -> usize {
        let d = self.first.len();
        (0..d - 1).map(|k| self.extent(k)).product()
    }

    /// Upper bound on the number of points visited per row.
    pub fn row_len(&self) -> usize {
        self.extent(self.first.len() - 1)
    }

    /// Calls `f` for every grid point in `rows` that lies in the region.
    pub fn for_each_in_rows(&self, rows: Range<usize>, mut f: impl FnMut(&[f64])) {
        let d = self.first.len();
        let a = self.grid.spacing;
        let u = &self.grid.shift;
        let mut y = vec![0.0; d];
        let mut x = vec![0.0; d];
        for row in rows {
            // decode row -> indices of the leading axes (last of them fastest)
            let mut rem = row;
            for k in (0..d - 1).rev() {
                let e = self.extent(k);
                y[k] = (self.first[k] + (rem % e) as i64) as f64 * a + u[k];
                rem /= e;
            }
            for z in self.first[d - 1]..=self.last[d - 1] {
                y[d - 1] = z as f64 * a + u[d - 1];
                let p: &[f64] = match &self.grid.rotation {
                    None => &y,
                    Some(o) => {
                        for i in 0..d {
                            x[i] = (0..d).map(|k| o[i * d + k] * y[k]).sum();
                        }
                        &x
                    }
                };
                if self.region.contains(p) {
                    f(p);
                }
            }
        }
    }

    /// All points, materialised (for tests and small regions).
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        self.for_each_in_rows(0..self.row_count(), |p| out.push(p.to_vec()));
        out
    }
}

fn haar_from_rng(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            out.push(q[(i, j)]);
        }
    }
    out
}

/// Haar-distributed rotation in `SO(d)`, row-major.
pub fn haar_rotation(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_from_rng(d, &mut rng)
}
