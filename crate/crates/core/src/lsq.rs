//! Least-squares recovery of Minkowski tensors from Voronoi tensor series.
//!
//! For sets of positive reach the Voronoi tensors are polynomial in `R`:
//! `V_R^{r,s} = sum_j r! s! kappa_{j+s} R^{j+s} Phi_{d-j}^{r,s}`. Sampling the
//! series at `n` radii and solving the overdetermined system entrywise gives
//! the tensors `Phi_d, ..., Phi_0`.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::{avg_nn_distance, window_max_radius, ObservationWindow, PointCloud};
use crate::symtensor::{factorial, kappa, SymTensor};
use crate::voronoi::{
    estimate_series_multi, validate_radii, Execution, SeriesOptions, VoronoiTensorSeries, DEFAULT_CHUNK_ROWS,
};

/// Condition estimates above this abort the fit.
pub const MAX_CONDITION: f64 = 1e12;
pub const DEFAULT_RADII: usize = 50;

/// Radii, grid spacing and rendition policy for one estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusSchedule {
    pub radii: Vec<f64>,
    pub spacing: f64,
    pub renditions: usize,
    /// Rendition `i` uses seed `seed + i`.
    pub seed: u64,
    pub rotate: bool,
    pub chunk_rows: usize,
    pub execution: Execution,
}

/// `n` equidistant radii from `r1` to `rn`.
pub fn equidistant_radii(r1: f64, rn: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two radii".into()));
    }
    if !(r1 > 0.0 && rn > r1 && rn.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < R_1 < R_n, got R_1 = {r1}, R_n = {rn}"
        )));
    }
    let step = (rn - r1) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| if i == n - 1 { rn } else { r1 + step * i as f64 })
        .collect())
}

/// How the largest radius is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum OuterRadius {
    /// `(d + 1) * av(K_0)`.
    Default,
    Fixed(f64),
    /// Distance from the data to the window boundary.
    Window(ObservationWindow),
}

impl RadiusSchedule {
    pub fn new(radii: Vec<f64>, spacing: f64) -> Result<Self> {
        validate_radii(&radii)?;
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter("grid spacing must be positive".into()));
        }
        Ok(RadiusSchedule {
            radii,
            spacing,
            renditions: 1,
            seed: 0,
            rotate: false,
            chunk_rows: DEFAULT_CHUNK_ROWS,
            execution: Execution::default(),
        })
    }

    /// Data-driven defaults: `R_1 = a = av(K_0)`, `n` equidistant radii.
    pub fn for_cloud(cloud: &PointCloud, n: usize, outer: &OuterRadius) -> Result<Self> {
        let av = avg_nn_distance(cloud)?;
        let d = cloud.dim();
        let rn = match outer {
            OuterRadius::Fixed(r) => *r,
            OuterRadius::Window(w) => window_max_radius(cloud, w)?,
            OuterRadius::Default => {
                let r = (d + 1) as f64 * av;
                log::warn!(
                    "no R_n given; using (d+1)*av = {r:.6}. The fit assumes R_n stays below the reach of the set"
                );
                r
            }
        };
        let sched = Self::new(equidistant_radii(av, rn, n)?, av)?;
        sched.check_gaps(av);
        Ok(sched)
    }

    pub fn renditions(mut self, n: usize) -> Self {
        self.renditions = n.max(1);
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn rotate(mut self, rotate: bool) -> Self {
        self.rotate = rotate;
        self
    }

    pub fn execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn chunk_rows(mut self, rows: usize) -> Self {
        self.chunk_rows = rows;
        self
    }

    /// Warns when consecutive radii are closer than `av`.
    pub fn check_gaps(&self, av: f64) -> bool {
        let gap = self.radii.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let ok = gap >= av * (1.0 - 1e-12);
        if !ok {
            log::warn!("radius gap {gap:.3e} is smaller than the average nearest-neighbour distance {av:.3e}");
        }
        ok
    }

    fn describe(&self) -> String {
        format!(
            "n = {}, R_1 = {}, R_n = {}",
            self.radii.len(),
            self.radii[0],
            self.radii[self.radii.len() - 1]
        )
    }
}

/// Design matrix with `X[i][j] = r! s! kappa_{j+s} R_i^{j+s}`; column `j`
/// multiplies `Phi_{d-j}`. With `drop_volume` the `j = 0` column is removed.
pub fn build_design_matrix(radii: &[f64], d: usize, r: usize, s: usize, drop_volume: bool) -> Result<DMatrix<f64>> {
    if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidParameter("radii must be positive".into()));
    }
    let mut sorted = radii.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter(
            "duplicate radii make the design matrix rank deficient".into(),
        ));
    }
    if s >= 1 && !drop_volume {
        return Err(Error::InvalidParameter(
            "the volume column must be dropped when s >= 1".into(),
        ));
    }
    let first = usize::from(drop_volume);
    let cols = d + 1 - first;
    if radii.len() < cols {
        return Err(Error::InvalidParameter(format!(
            "need at least {cols} radii for {cols} unknowns, got {}",
            radii.len()
        )));
    }
    let c0 = factorial(r) * factorial(s);
    Ok(DMatrix::from_fn(radii.len(), cols, |i, k| {
        let j = k + first;
        c0 * kappa(j + s) * radii[i].powi((j + s) as i32)
    }))
}

/// Householder QR with column-norm pivoting of an equilibrated matrix.
#[derive(Clone, Debug)]
pub struct LsqFactor {
    qr: DMatrix<f64>,
    /// Householder scalars.
    beta: Vec<f64>,
    /// Diagonal of R; the reflectors occupy the lower part of `qr`.
    diag: Vec<f64>,
    perm: Vec<usize>,
    scale: Vec<f64>,
    condition: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LsqSolution {
    pub coefficients: Vec<f64>,
    pub residual_norm: f64,
    pub condition: f64,
}

impl LsqFactor {
    pub fn new(x: &DMatrix<f64>) -> Result<Self> {
        Self::with_context(x, "")
    }

    fn with_context(x: &DMatrix<f64>, context: &str) -> Result<Self> {
        let (m, n) = x.shape();
        if m < n || n == 0 {
            return Err(Error::InvalidParameter(format!(
                "least squares needs rows >= columns > 0, got {m}x{n}"
            )));
        }
        let mut a = x.clone();
        let scale: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
        if scale.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::RankDeficient {
                cond: f64::INFINITY,
                schedule: context.to_string(),
            });
        }
        for j in 0..n {
            a.column_mut(j).scale_mut(1.0 / scale[j]);
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut beta = vec![0.0; n];
        let mut diag = vec![0.0; n];
        for k in 0..n {
            // pivot: remaining column of largest norm
            let (p, _) = (k..n)
                .map(|j| (j, a.view((k, j), (m - k, 1)).norm_squared()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if p != k {
                a.swap_columns(k, p);
                perm.swap(k, p);
            }
            // reflector zeroing a[k+1.., k]
            let norm = a.view((k, k), (m - k, 1)).norm();
            if norm == 0.0 {
                beta[k] = 0.0;
                continue;
            }
            let alpha = if a[(k, k)] > 0.0 { -norm } else { norm };
            let v0 = a[(k, k)] - alpha;
            a[(k, k)] = v0;
            // v = a[k.., k] with v[0] = v0; H = I - beta v v^T
            let vtv = a.view((k, k), (m - k, 1)).norm_squared();
            let b = 2.0 / vtv;
            for j in k + 1..n {
                let mut dot = 0.0;
                for i in k..m {
                    dot += a[(i, k)] * a[(i, j)];
                }
                let f = b * dot;
                for i in k..m {
                    let vi = a[(i, k)];
                    a[(i, j)] -= f * vi;
                }
            }
            beta[k] = b;
            diag[k] = alpha;
        }
        let dmax = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let dmin = diag.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        let condition = if dmin == 0.0 { f64::INFINITY } else { dmax / dmin };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::RankDeficient {
                cond: condition,
                schedule: context.to_string(),
            });
        }
        Ok(LsqFactor {
            qr: a,
            beta,
            diag,
            perm,
            scale,
            condition,
        })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, y: &[f64]) -> Result<LsqSolution> {
        let (m, n) = (self.qr.nrows(), self.perm.len());
        if y.len() != m {
            return Err(Error::DimensionMismatch(m, y.len()));
        }
        let mut z = y.to_vec();
        // apply Q^T
        for k in 0..n {
            if self.beta[k] == 0.0 {
                continue;
            }
            let mut dot = 0.0;
            for i in k..m {
                dot += self.qr[(i, k)] * z[i];
            }
            let f = self.beta[k] * dot;
            for i in k..m {
                z[i] -= f * self.qr[(i, k)];
            }
        }
        let residual_norm = z[n..].iter().map(|v| v * v).sum::<f64>().sqrt();
        // back substitution with R (diag kept aside, strict upper part in qr)
        let mut w = vec![0.0; n];
        for k in (0..n).rev() {
            let mut acc = z[k];
            for j in k + 1..n {
                acc -= self.qr[(k, j)] * w[j];
            }
            w[k] = acc / self.diag[k];
        }
        let mut coefficients = vec![0.0; n];
        for k in 0..n {
            let j = self.perm[k];
            coefficients[j] = w[k] / self.scale[j];
        }
        Ok(LsqSolution {
            coefficients,
            residual_norm,
            condition: self.condition,
        })
    }
}

/// Minimiser of `|X b - y|_2` by pivoted orthogonal factorisation.
pub fn lsq_solve(x: &DMatrix<f64>, y: &[f64]) -> Result<LsqSolution> {
    LsqFactor::new(x)?.solve(y)
}

/// Tensors recovered from one series.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesFit {
    /// `phi[k]` is `Phi_k`; `Phi_d` is zero when the volume column is dropped.
    pub phi: Vec<SymTensor>,
    /// Per radius, the Euclidean norm over entries of the fit residual.
    pub residuals: Vec<f64>,
    pub condition: f64,
}

/// Fits the Steiner-type polynomial to a series entry by entry.
pub fn fit_series(series: &VoronoiTensorSeries, d: usize) -> Result<SeriesFit> {
    let (r, s) = (series.r, series.s);
    let drop = s >= 1;
    let x = build_design_matrix(&series.radii, d, r, s, drop)?;
    let describe = format!(
        "n = {}, R_1 = {}, R_n = {}",
        series.radii.len(),
        series.radii[0],
        series.radii[series.radii.len() - 1]
    );
    let factor = LsqFactor::with_context(&x, &describe)?;
    let rank = r + s;
    let mut phi = vec![SymTensor::zeros(d, rank); d + 1];
    let mut residuals = vec![0.0; series.radii.len()];
    let entries = series.tensors.first().map_or(0, |t| t.values().len());
    let first = usize::from(drop);
    for e in 0..entries {
        let y: Vec<f64> = series.tensors.iter().map(|t| t.values()[e]).collect();
        let sol = factor.solve(&y)?;
        for (k, c) in sol.coefficients.iter().enumerate() {
            phi[d - (k + first)].values_mut()[e] = *c;
        }
        let fitted = &x * nalgebra::DVector::from_column_slice(&sol.coefficients);
        for (i, res) in residuals.iter_mut().enumerate() {
            *res += (y[i] - fitted[i]).powi(2);
        }
    }
    residuals.iter_mut().for_each(|v| *v = v.sqrt());
    Ok(SeriesFit {
        phi,
        residuals,
        condition: factor.condition(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiEntry {
    pub degree: usize,
    pub tensor: SymTensor,
    /// Standard error over renditions (zero for a single rendition).
    pub stderr: SymTensor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateMeta {
    pub schedule: RadiusSchedule,
    pub seeds: Vec<u64>,
    pub grid_points: Vec<u64>,
    /// Mean over renditions of the per-radius residual norms.
    pub fit_residuals: Vec<f64>,
    pub condition: f64,
    pub runtime_seconds: f64,
}

/// Estimated `Phi_k^{r,s}` for `k = d, ..., 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinkowskiTensorSet {
    pub d: usize,
    pub r: usize,
    pub s: usize,
    /// Ordered from degree `d` down to 0. Degree `d` is exactly zero when `s >= 1`.
    pub phi: Vec<PhiEntry>,
    pub meta: EstimateMeta,
}

impl MinkowskiTensorSet {
    pub fn get(&self, degree: usize) -> Option<&SymTensor> {
        self.phi.iter().find(|e| e.degree == degree).map(|e| &e.tensor)
    }

    pub fn stderr(&self, degree: usize) -> Option<&SymTensor> {
        self.phi.iter().find(|e| e.degree == degree).map(|e| &e.stderr)
    }
}

/// Averages the fits of `schedule.renditions` independent grids.
pub fn estimate_minkowski(
    cloud: &PointCloud,
    r: usize,
    s: usize,
    schedule: &RadiusSchedule,
) -> Result<MinkowskiTensorSet> {
    Ok(estimate_minkowski_multi(cloud, &[(r, s)], schedule)?.remove(0))
}

/// Several `(r, s)` pairs, sharing the grid passes of each rendition.
pub fn estimate_minkowski_multi(
    cloud: &PointCloud,
    pairs: &[(usize, usize)],
    schedule: &RadiusSchedule,
) -> Result<Vec<MinkowskiTensorSet>> {
    let start = Instant::now();
    let d = cloud.dim();
    // fail early on an unusable schedule before any grid work
    for &(r, s) in pairs {
        let x = build_design_matrix(&schedule.radii, d, r, s, s >= 1)?;
        LsqFactor::with_context(&x, &schedule.describe())?;
    }
    let n = schedule.renditions.max(1);
    let mut fits: Vec<Vec<SeriesFit>> = vec![Vec::with_capacity(n); pairs.len()];
    let mut seeds = Vec::with_capacity(n);
    let mut grid_points = Vec::with_capacity(n);
    for i in 0..n {
        let seed = schedule.seed.wrapping_add(i as u64);
        let opts = SeriesOptions::new(schedule.spacing, seed)
            .rotate(schedule.rotate)
            .chunk_rows(schedule.chunk_rows)
            .execution(schedule.execution);
        let series = estimate_series_multi(cloud, &schedule.radii, pairs, &opts)?;
        seeds.push(seed);
        grid_points.push(series[0].grid_points);
        for (p, s) in series.iter().enumerate() {
            fits[p].push(fit_series(s, d)?);
        }
    }
    let runtime = start.elapsed().as_secs_f64();
    Ok(pairs
        .iter()
        .zip(fits)
        .map(|(&(r, s), fits)| {
            let phi = (0..=d)
                .rev()
                .map(|k| {
                    let samples: Vec<&SymTensor> = fits.iter().map(|f| &f.phi[k]).collect();
                    let (tensor, stderr) = mean_and_stderr(&samples);
                    PhiEntry {
                        degree: k,
                        tensor,
                        stderr,
                    }
                })
                .collect();
            let mut fit_residuals = vec![0.0; schedule.radii.len()];
            for f in &fits {
                fit_residuals
                    .iter_mut()
                    .zip(&f.residuals)
                    .for_each(|(a, b)| *a += b / fits.len() as f64);
            }
            MinkowskiTensorSet {
                d,
                r,
                s,
                phi,
                meta: EstimateMeta {
                    schedule: schedule.clone(),
                    seeds: seeds.clone(),
                    grid_points: grid_points.clone(),
                    fit_residuals,
                    condition: fits[0].condition,
                    runtime_seconds: runtime,
                },
            }
        })
        .collect())
}

/// Entrywise mean and standard error `sd / sqrt(n)` (zero for `n = 1`).
pub fn mean_and_stderr(samples: &[&SymTensor]) -> (SymTensor, SymTensor) {
    let n = samples.len();
    let first = samples[0];
    let mut mean = SymTensor::zeros(first.dim(), first.rank());
    let mut se = SymTensor::zeros(first.dim(), first.rank());
    for e in 0..first.values().len() {
        let m = samples.iter().map(|t| t.values()[e]).sum::<f64>() / n as f64;
        mean.values_mut()[e] = m;
        if n > 1 {
            let var = samples.iter().map(|t| (t.values()[e] - m).powi(2)).sum::<f64>() / (n - 1) as f64;
            se.values_mut()[e] = (var / n as f64).sqrt();
        }
    }
    (mean, se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn design_matrix_entries() {
        let x = build_design_matrix(&[1.0, 2.0, 3.0], 2, 0, 0, false).unwrap();
        assert_eq!(x.shape(), (3, 3));
        assert!((x[(1, 0)] - 1.0).abs() < 1e-15);
        assert!((x[(1, 1)] - 4.0).abs() < 1e-15);
        assert!((x[(1, 2)] - 4.0 * PI).abs() < 1e-13);
        let y = build_design_matrix(&[1.0, 2.0], 2, 1, 2, true).unwrap();
        // columns j = 1, 2 with r! s! kappa_{j+2} R^{j+2}
        assert_eq!(y.shape(), (2, 2));
        assert!((y[(1, 0)] - 2.0 * kappa(3) * 8.0).abs() < 1e-12);
        assert!((y[(1, 1)] - 2.0 * kappa(4) * 16.0).abs() < 1e-12);
        assert!(build_design_matrix(&[1.0, 2.0], 2, 0, 1, false).is_err());
        assert!(build_design_matrix(&[1.0, 1.0, 2.0], 2, 0, 0, false).is_err());
    }

    #[test]
    fn exact_disk_series_recovered() {
        // parallel volume of the unit disk: pi (1 + R)^2 = pi + 2 R pi + pi R^2 * 1
        let radii = equidistant_radii(0.1, 2.0, 50).unwrap();
        let x = build_design_matrix(&radii, 2, 0, 0, false).unwrap();
        let y: Vec<f64> = radii.iter().map(|r| PI * (1.0 + r) * (1.0 + r)).collect();
        let sol = lsq_solve(&x, &y).unwrap();
        assert!((sol.coefficients[0] - PI).abs() < 1e-10);
        assert!((sol.coefficients[1] - PI).abs() < 1e-10);
        assert!((sol.coefficients[2] - 1.0).abs() < 1e-10);
        assert!(sol.residual_norm < 1e-10);
    }

    #[test]
    fn overdetermined_matches_normal_equations() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, 2.0, 1.0, 3.0, 1.0, 4.0]);
        let y = [6.0, 5.0, 7.0, 10.0];
        let sol = lsq_solve(&x, &y).unwrap();
        // closed form for this line fit
        assert!((sol.coefficients[0] - 3.5).abs() < 1e-12);
        assert!((sol.coefficients[1] - 1.4).abs() < 1e-12);
        let rss: f64 = (0..4).map(|i| (y[i] - 3.5 - 1.4 * (i + 1) as f64).powi(2)).sum();
        assert!((sol.residual_norm - rss.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ill_conditioned_schedule_rejected() {
        let radii: Vec<f64> = (0..5).map(|i| 1.0 + 1e-7 * i as f64).collect();
        let x = build_design_matrix(&radii, 3, 0, 0, false).unwrap();
        match LsqFactor::new(&x) {
            Err(Error::RankDeficient { cond, .. }) => assert!(cond > MAX_CONDITION),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn equidistant_endpoints() {
        let r = equidistant_radii(0.3, 1.8, 50).unwrap();
        assert_eq!(r.len(), 50);
        assert_eq!(r[0], 0.3);
        assert_eq!(r[49], 1.8);
        assert!(equidistant_radii(1.0, 0.5, 5).is_err());
    }
}
