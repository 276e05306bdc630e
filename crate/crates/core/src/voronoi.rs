//! Randomised-grid estimation of Voronoi tensors for a schedule of radii.
//!
//! Every grid point `x` within distance `R` of the sample contributes
//! `a^d p^r (x - p)^s`, with `p` its nearest sample point. One nearest-neighbour
//! query per grid point serves all radii: the contribution goes into the bucket
//! of the smallest radius exceeding `|x - p|`, and a prefix sum over buckets
//! yields the cumulative tensors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::{BoxRegion, GridPlan, PointCloud, ShiftedGrid};
use crate::symtensor::{binomial, multi_indices, multiplicities, SymTensor};

/// How grid chunks are scheduled. Both give bit-identical results.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise sequential.
    #[default]
    Parallel,
}

/// Rows of the grid handled per work item.
pub const DEFAULT_CHUNK_ROWS: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoronoiTensorSeries {
    pub radii: Vec<f64>,
    pub r: usize,
    pub s: usize,
    /// One tensor of rank `r + s` per radius.
    pub tensors: Vec<SymTensor>,
    /// Grid spacing (for the deterministic oracle: the finest cell size).
    pub spacing: f64,
    pub seed: u64,
    pub rotate: bool,
    /// Grid points enumerated in the inflated region.
    pub grid_points: u64,
}

/// Options for one randomised evaluation.
#[derive(Clone, Debug)]
pub struct SeriesOptions {
    pub spacing: f64,
    pub seed: u64,
    pub rotate: bool,
    pub chunk_rows: usize,
    pub execution: Execution,
}

impl SeriesOptions {
    pub fn new(spacing: f64, seed: u64) -> Self {
        SeriesOptions {
            spacing,
            seed,
            rotate: false,
            chunk_rows: DEFAULT_CHUNK_ROWS,
            execution: Execution::default(),
        }
    }

    pub fn rotate(mut self, rotate: bool) -> Self {
        self.rotate = rotate;
        self
    }

    pub fn chunk_rows(mut self, rows: usize) -> Self {
        self.chunk_rows = rows;
        self
    }

    pub fn execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

pub(crate) fn validate_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::InvalidParameter("at least one radius is required".into()));
    }
    if !(radii[0] > 0.0) || radii.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidParameter("radii must be positive and finite".into()));
    }
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("radii must be strictly increasing".into()));
    }
    Ok(())
}

/// `V^{r,s}_{R_i}` for all radii from one shifted grid drawn from `opts.seed`.
pub fn estimate_series(
    cloud: &PointCloud,
    radii: &[f64],
    r: usize,
    s: usize,
    opts: &SeriesOptions,
) -> Result<VoronoiTensorSeries> {
    Ok(estimate_series_multi(cloud, radii, &[(r, s)], opts)?.remove(0))
}

/// Like [`estimate_series`] for several `(r, s)` pairs sharing one grid pass.
pub fn estimate_series_multi(
    cloud: &PointCloud,
    radii: &[f64],
    pairs: &[(usize, usize)],
    opts: &SeriesOptions,
) -> Result<Vec<VoronoiTensorSeries>> {
    let grid = ShiftedGrid::random(cloud.dim(), opts.spacing, opts.seed, opts.rotate)?;
    let mut out = estimate_on_grid(cloud, &grid, radii, pairs, opts.chunk_rows, opts.execution)?;
    for series in &mut out {
        series.seed = opts.seed;
    }
    Ok(out)
}

/// Evaluates the estimator on a given grid realisation.
pub fn estimate_on_grid(
    cloud: &PointCloud,
    grid: &ShiftedGrid,
    radii: &[f64],
    pairs: &[(usize, usize)],
    chunk_rows: usize,
    execution: Execution,
) -> Result<Vec<VoronoiTensorSeries>> {
    validate_radii(radii)?;
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if grid.dim() != cloud.dim() {
        return Err(Error::DimensionMismatch(cloud.dim(), grid.dim()));
    }
    if pairs.is_empty() {
        return Err(Error::InvalidParameter("no (r, s) pair requested".into()));
    }
    let d = cloud.dim();
    let a = grid.spacing();
    let r_max = *radii.last().unwrap();
    let (lo, hi) = cloud.bounding_box();
    let region = BoxRegion::new(lo, hi)?.inflated(r_max + a * (d as f64).sqrt());
    let plan = grid.plan(&region)?;
    let plans: Vec<ProductPlan> = pairs.iter().map(|&(r, s)| ProductPlan::new(d, r, s)).collect();
    let mask = CoarseMask::new(cloud, &region, r_max);
    let job = Job {
        cloud,
        plan: &plan,
        radii2: radii.iter().map(|r| r * r).collect(),
        products: &plans,
        mask: &mask,
    };

    let chunk_rows = chunk_rows.max(1);
    let rows = plan.row_count();
    let chunks: Vec<(usize, usize)> = (0..rows)
        .step_by(chunk_rows)
        .map(|start| (start, (start + chunk_rows).min(rows)))
        .collect();
    let partials: Vec<Partial> = run_chunks(&job, &chunks, execution);

    // merge chunk partials in chunk order
    let n = radii.len();
    let mut total = Partial::new(&plans, n);
    for p in &partials {
        total.grid_points += p.grid_points;
        for (acc, part) in total.sums.iter_mut().zip(&p.sums) {
            for (t, v) in acc.iter_mut().zip(part) {
                t.add(v.value());
            }
        }
    }

    let cell = a.powi(d as i32);
    let mut out = Vec::with_capacity(pairs.len());
    for (q, pp) in plans.iter().enumerate() {
        let e = pp.entries;
        let buckets = &total.sums[q];
        let mut running: Vec<Kahan> = vec![Kahan::default(); e];
        let mut tensors = Vec::with_capacity(n);
        for i in 0..n {
            for k in 0..e {
                running[k].add(buckets[i * e + k].value());
            }
            let values = running.iter().map(|k| k.value() * cell).collect();
            tensors.push(SymTensor::from_values(d, pp.r + pp.s, values)?);
        }
        out.push(VoronoiTensorSeries {
            radii: radii.to_vec(),
            r: pp.r,
            s: pp.s,
            tensors,
            spacing: a,
            seed: 0,
            rotate: grid.rotation().is_some(),
            grid_points: total.grid_points,
        });
    }
    Ok(out)
}

fn run_chunks(job: &Job<'_>, chunks: &[(usize, usize)], execution: Execution) -> Vec<Partial> {
    #[cfg(feature = "parallel")]
    if execution == Execution::Parallel {
        use rayon::prelude::*;
        return chunks.par_iter().map(|&(a, b)| job.run(a..b)).collect();
    }
    let _ = execution;
    chunks.iter().map(|&(a, b)| job.run(a..b)).collect()
}

struct Job<'a> {
    cloud: &'a PointCloud,
    plan: &'a GridPlan,
    radii2: Vec<f64>,
    products: &'a [ProductPlan],
    mask: &'a CoarseMask,
}

impl Job<'_> {
    fn run(&self, rows: std::ops::Range<usize>) -> Partial {
        let d = self.cloud.dim();
        let n = self.radii2.len();
        let bound2 = *self.radii2.last().unwrap();
        let mut part = Partial::new(self.products, n);
        let mut hint: Option<usize> = None;
        let mut diff = vec![0.0; d];
        let mut scratch = Scratch::new(self.products, d);
        self.plan.for_each_in_rows(rows, |x| {
            part.grid_points += 1;
            if !self.mask.may_contribute(x) {
                return;
            }
            let Some((idx, d2)) = self.cloud.nearest_within(x, bound2, hint) else {
                return;
            };
            hint = Some(idx);
            let bucket = self.radii2.partition_point(|&r2| r2 <= d2);
            let p = self.cloud.point(idx);
            for j in 0..d {
                diff[j] = x[j] - p[j];
            }
            for (q, pp) in self.products.iter().enumerate() {
                let vals = scratch.eval(q, pp, p, &diff);
                let e = pp.entries;
                let acc = &mut part.sums[q][bucket * e..(bucket + 1) * e];
                for (k, v) in acc.iter_mut().zip(vals) {
                    k.add(*v);
                }
            }
        });
        part
    }
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

struct Partial {
    /// Per pair: `n * entries` bucket sums.
    sums: Vec<Vec<Kahan>>,
    grid_points: u64,
}

impl Partial {
    fn new(plans: &[ProductPlan], n: usize) -> Self {
        Partial {
            sums: plans.iter().map(|p| vec![Kahan::default(); n * p.entries]).collect(),
            grid_points: 0,
        }
    }
}

/// Precomputed monomial expansion of `a^r (.) b^s` on sorted multi-indices.
#[derive(Clone, Debug)]
pub(crate) struct ProductPlan {
    pub r: usize,
    pub s: usize,
    pub entries: usize,
    /// Term ranges per entry.
    offsets: Vec<usize>,
    coefs: Vec<f64>,
    /// Per term, `d` exponents of `a` then `d` exponents of `b`.
    exps: Vec<u8>,
    dim: usize,
}

impl ProductPlan {
    pub fn new(dim: usize, r: usize, s: usize) -> Self {
        let m = r + s;
        let norm = binomial(m, r);
        let mut offsets = vec![0];
        let mut coefs = Vec::new();
        let mut exps = Vec::new();
        let indices = multi_indices(dim, m);
        for idx in &indices {
            let mult = multiplicities(dim, idx);
            let mut alpha = vec![0usize; dim];
            // enumerate alpha <= mult with |alpha| = r
            loop {
                if alpha.iter().sum::<usize>() == r {
                    let c: f64 = (0..dim).map(|i| binomial(mult[i], alpha[i])).product();
                    coefs.push(c / norm);
                    exps.extend(alpha.iter().map(|&v| v as u8));
                    exps.extend((0..dim).map(|i| (mult[i] - alpha[i]) as u8));
                }
                let mut j = 0;
                while j < dim {
                    alpha[j] += 1;
                    if alpha[j] <= mult[j] {
                        break;
                    }
                    alpha[j] = 0;
                    j += 1;
                }
                if j == dim {
                    break;
                }
            }
            offsets.push(coefs.len());
        }
        ProductPlan {
            r,
            s,
            entries: indices.len(),
            offsets,
            coefs,
            exps,
            dim,
        }
    }

    /// Writes the entries of `a^r (.) b^s` into `out` using power tables.
    pub(crate) fn eval_into(&self, pa: &[f64], pb: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let stride = self.r + self.s + 1;
        for (e, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for t in self.offsets[e]..self.offsets[e + 1] {
                let ex = &self.exps[t * 2 * d..(t + 1) * 2 * d];
                let mut v = self.coefs[t];
                for i in 0..d {
                    v *= pa[i * stride + ex[i] as usize] * pb[i * stride + ex[d + i] as usize];
                }
                acc += v;
            }
            *o = acc;
        }
    }

    /// Entries of `a^r (.) b^s` as a tensor.
    #[cfg(test)]
    pub fn evaluate(&self, a: &[f64], b: &[f64]) -> SymTensor {
        let mut pa = Vec::new();
        let mut pb = Vec::new();
        fill_powers(a, self.r + self.s, &mut pa);
        fill_powers(b, self.r + self.s, &mut pb);
        let mut out = vec![0.0; self.entries];
        self.eval_into(&pa, &pb, &mut out);
        SymTensor::from_values(self.dim, self.r + self.s, out).expect("entry count")
    }
}

pub(crate) fn fill_powers(v: &[f64], max: usize, out: &mut Vec<f64>) {
    out.clear();
    for &x in v {
        let mut p = 1.0;
        for _ in 0..=max {
            out.push(p);
            p *= x;
        }
    }
}

struct Scratch {
    pa: Vec<f64>,
    pb: Vec<f64>,
    vals: Vec<Vec<f64>>,
}

impl Scratch {
    fn new(plans: &[ProductPlan], d: usize) -> Self {
        let max = plans.iter().map(|p| p.r + p.s + 1).max().unwrap_or(1);
        Scratch {
            pa: Vec::with_capacity(d * max),
            pb: Vec::with_capacity(d * max),
            vals: plans.iter().map(|p| vec![0.0; p.entries]).collect(),
        }
    }

    fn eval(&mut self, q: usize, pp: &ProductPlan, a: &[f64], b: &[f64]) -> &[f64] {
        fill_powers(a, pp.r + pp.s, &mut self.pa);
        fill_powers(b, pp.r + pp.s, &mut self.pb);
        pp.eval_into(&self.pa, &self.pb, &mut self.vals[q]);
        &self.vals[q]
    }
}

/// Coarse occupancy grid: cells not adjacent to any occupied cell are farther
/// than the largest radius from every sample point.
struct CoarseMask {
    lo: Vec<f64>,
    cell: f64,
    dims: Vec<usize>,
    near: Vec<bool>,
}

impl CoarseMask {
    const MAX_CELLS: f64 = 16_777_216.0;

    fn new(cloud: &PointCloud, region: &BoxRegion, r_max: f64) -> Self {
        let d = cloud.dim();
        let mut cell = r_max * (1.0 + 1e-9) + f64::MIN_POSITIVE;
        let count = |c: f64| -> f64 {
            (0..d)
                .map(|j| ((region.hi[j] - region.lo[j]) / c).floor() + 1.0)
                .product()
        };
        while count(cell) > Self::MAX_CELLS {
            cell *= 1.5;
        }
        let dims: Vec<usize> = (0..d)
            .map(|j| ((region.hi[j] - region.lo[j]) / cell).floor() as usize + 1)
            .collect();
        let total: usize = dims.iter().product();
        let mut occupied = vec![false; total];
        let mut mask = CoarseMask {
            lo: region.lo.clone(),
            cell,
            dims,
            near: Vec::new(),
        };
        for p in cloud.points() {
            if let Some(k) = mask.flat(p) {
                occupied[k] = true;
            }
        }
        // dilate by one cell in every direction
        let mut near = vec![false; total];
        let mut idx = vec![0usize; d];
        for k in 0..total {
            if occupied[k] {
                mask.unflatten(k, &mut idx);
                mask.mark_neighbours(&idx, &mut near);
            }
        }
        mask.near = near;
        mask
    }

    fn unflatten(&self, mut k: usize, idx: &mut [usize]) {
        for j in (0..self.dims.len()).rev() {
            idx[j] = k % self.dims[j];
            k /= self.dims[j];
        }
    }

    fn mark_neighbours(&self, idx: &[usize], near: &mut [bool]) {
        let d = idx.len();
        let mut off = vec![-1i64; d];
        loop {
            let mut k = 0usize;
            let mut inside = true;
            for j in 0..d {
                let v = idx[j] as i64 + off[j];
                if v < 0 || v >= self.dims[j] as i64 {
                    inside = false;
                    break;
                }
                k = k * self.dims[j] + v as usize;
            }
            if inside {
                near[k] = true;
            }
            let mut j = 0;
            while j < d {
                off[j] += 1;
                if off[j] <= 1 {
                    break;
                }
                off[j] = -1;
                j += 1;
            }
            if j == d {
                break;
            }
        }
    }

    fn flat(&self, x: &[f64]) -> Option<usize> {
        let mut k = 0usize;
        for j in 0..self.dims.len() {
            let v = ((x[j] - self.lo[j]) / self.cell).floor();
            if v < 0.0 || v >= self.dims[j] as f64 {
                return None;
            }
            k = k * self.dims[j] + v as usize;
        }
        Some(k)
    }

    #[inline]
    fn may_contribute(&self, x: &[f64]) -> bool {
        self.flat(x).is_some_and(|k| self.near[k])
    }
}

mod oracle;
pub use oracle::{exact_series_oracle, OracleOptions};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symtensor::{sym_product, tensor_power};

    #[test]
    fn product_plan_matches_sym_product() {
        let a = [0.3, -1.2, 0.7];
        let b = [1.1, 0.4, -0.5];
        for r in 0..3 {
            for s in 0..3 {
                let expect = sym_product(&tensor_power(&a, r), &tensor_power(&b, s)).unwrap();
                let got = ProductPlan::new(3, r, s).evaluate(&a, &b);
                assert!(got.max_abs_diff(&expect).unwrap() < 1e-14, "r={r} s={s}");
            }
        }
    }

    #[test]
    fn kahan_recovers_small_terms() {
        let mut k = Kahan::default();
        k.add(1.0);
        for _ in 0..10_000 {
            k.add(1e-16);
        }
        assert!((k.value() - (1.0 + 1e-12)).abs() < 1e-18);
    }

    #[test]
    fn single_point_disk_second_moment() {
        let cloud = PointCloud::from_points(&[vec![0.0, 0.0]]).unwrap();
        let s = estimate_series(&cloud, &[1.0], 0, 2, &SeriesOptions::new(0.002, 1)).unwrap();
        let t = &s.tensors[0];
        let q = std::f64::consts::PI / 4.0;
        assert!((t.get(&[0, 0]) - q).abs() < 1e-4);
        assert!((t.get(&[1, 1]) - q).abs() < 1e-4);
        assert!(t.get(&[0, 1]).abs() < 1e-5);
    }

    #[test]
    fn symmetric_pair_first_moment_vanishes() {
        let cloud = PointCloud::from_points(&[vec![-1.0], vec![1.0]]).unwrap();
        let s = estimate_series(&cloud, &[0.5], 1, 1, &SeriesOptions::new(0.001, 4)).unwrap();
        assert!(s.tensors[0].get(&[0, 0]).abs() < 2e-3);
    }

    #[test]
    fn cumulative_and_monotone() {
        let cloud = PointCloud::from_points(&[vec![0.0, 0.0], vec![0.3, 0.1], vec![1.0, -0.2]]).unwrap();
        let radii = [0.1, 0.2, 0.4, 0.8];
        let s = estimate_series(&cloud, &radii, 0, 0, &SeriesOptions::new(0.01, 2)).unwrap();
        let v: Vec<f64> = s.tensors.iter().map(|t| t.as_scalar()).collect();
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
        // each radius alone gives the same value
        for (i, &r) in radii.iter().enumerate() {
            let single = estimate_series(&cloud, &[r], 0, 0, &SeriesOptions::new(0.01, 2)).unwrap();
            assert!((single.tensors[0].as_scalar() - v[i]).abs() <= 1e-12 * v[i]);
        }
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.91).cos()])
            .collect();
        let cloud = PointCloud::from_points(&pts).unwrap();
        let radii = [0.05, 0.1, 0.2];
        let base = SeriesOptions::new(0.01, 8).rotate(true);
        let a = estimate_series_multi(
            &cloud,
            &radii,
            &[(0, 0), (1, 1), (0, 2)],
            &base.clone().execution(Execution::Sequential),
        )
        .unwrap();
        let b = estimate_series_multi(
            &cloud,
            &radii,
            &[(0, 0), (1, 1), (0, 2)],
            &base.clone().execution(Execution::Parallel),
        )
        .unwrap();
        assert_eq!(a, b);
        let c = estimate_series_multi(&cloud, &radii, &[(0, 0), (1, 1), (0, 2)], &base.chunk_rows(7)).unwrap();
        for (x, y) in a.iter().zip(&c) {
            for (tx, ty) in x.tensors.iter().zip(&y.tensors) {
                assert!(tx.max_abs_diff(ty).unwrap() <= 1e-9 * tx.max_abs().max(1.0));
            }
        }
    }

    #[test]
    fn rejects_bad_radii() {
        let cloud = PointCloud::from_points(&[vec![0.0]]).unwrap();
        let o = SeriesOptions::new(0.1, 0);
        assert!(estimate_series(&cloud, &[0.5, 0.5], 0, 0, &o).is_err());
        assert!(estimate_series(&cloud, &[0.0, 0.5], 0, 0, &o).is_err());
        assert!(estimate_series(&cloud, &[0.5], 0, 0, &SeriesOptions::new(-1.0, 0)).is_err());
    }
}
