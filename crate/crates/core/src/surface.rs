//! Direct single-radius estimators of the surface tensors `Phi_{d-1}^{r,s}`.
//!
//! For `s >= 1`, `V_eps^{r,s} / eps^{1+s}` tends to `r! s! kappa_{s+1} Phi_{d-1}^{r,s}`
//! on finite unions of sets with positive reach. For `s = 0` the volume part
//! must be cancelled first, which is done with a difference quotient in
//! `eps` and `eps^2` on one grid realisation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq::mean_and_stderr;
use crate::spatial::PointCloud;
use crate::symtensor::{factorial, kappa, trace2, SymTensor};
use crate::voronoi::{estimate_series, Execution, SeriesOptions, DEFAULT_CHUNK_ROWS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceEstimate {
    pub r: usize,
    pub s: usize,
    pub tensor: SymTensor,
    pub stderr: SymTensor,
    pub epsilon: f64,
    pub spacing: f64,
    pub seeds: Vec<u64>,
    /// `4 pi tr(tensor)` for `r = 0, s = 2`: the surface area.
    pub area_from_trace: Option<f64>,
}

/// Grid parameters shared by the surface estimators.
#[derive(Clone, Debug)]
pub struct SurfaceOptions {
    pub epsilon: f64,
    pub spacing: f64,
    pub seed: u64,
    pub renditions: usize,
    pub rotate: bool,
    pub execution: Execution,
}

impl SurfaceOptions {
    pub fn new(epsilon: f64, spacing: f64, seed: u64) -> Self {
        SurfaceOptions {
            epsilon,
            spacing,
            seed,
            renditions: 1,
            rotate: false,
            execution: Execution::default(),
        }
    }

    pub fn renditions(mut self, n: usize) -> Self {
        self.renditions = n.max(1);
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

    fn series(&self, seed: u64) -> SeriesOptions {
        SeriesOptions::new(self.spacing, seed)
            .rotate(self.rotate)
            .chunk_rows(DEFAULT_CHUNK_ROWS)
            .execution(self.execution)
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// `V^{r,s}_eps / (eps^{1+s} r! s! kappa_{s+1})`, averaged over renditions.
pub fn estimate_surface_tensor(
    cloud: &PointCloud,
    r: usize,
    s: usize,
    opts: &SurfaceOptions,
) -> Result<SurfaceEstimate> {
    if s == 0 {
        return Err(Error::InvalidParameter(
            "s = 0 needs the difference estimator (estimate_surface_scalar_diff)".into(),
        ));
    }
    check_positive("epsilon", opts.epsilon)?;
    check_positive("grid spacing", opts.spacing)?;
    if opts.epsilon <= opts.spacing {
        return Err(Error::InvalidParameter(format!(
            "epsilon = {} must exceed the grid spacing {}",
            opts.epsilon, opts.spacing
        )));
    }
    if opts.spacing > opts.epsilon / 10.0 {
        log::warn!(
            "grid spacing {} is coarse relative to epsilon {}; expect discretisation bias",
            opts.spacing,
            opts.epsilon
        );
    }
    let norm = opts.epsilon.powi(1 + s as i32) * factorial(r) * factorial(s) * kappa(s + 1);
    let mut samples = Vec::with_capacity(opts.renditions);
    let mut seeds = Vec::with_capacity(opts.renditions);
    for i in 0..opts.renditions {
        let seed = opts.seed.wrapping_add(i as u64);
        let series = estimate_series(cloud, &[opts.epsilon], r, s, &opts.series(seed))?;
        samples.push(series.tensors[0].scaled(1.0 / norm));
        seeds.push(seed);
    }
    Ok(finish(r, s, samples, seeds, opts))
}

/// `(V^{r,0}_eps - V^{r,0}_{eps^2}) / (2 r! eps)` with both radii on one grid.
///
/// Needs `a <= eps^2`, which makes it expensive for small `eps`.
pub fn estimate_surface_scalar_diff(cloud: &PointCloud, r: usize, opts: &SurfaceOptions) -> Result<SurfaceEstimate> {
    check_positive("epsilon", opts.epsilon)?;
    check_positive("grid spacing", opts.spacing)?;
    let eps = opts.epsilon;
    if eps >= 1.0 {
        return Err(Error::InvalidParameter(format!("epsilon = {eps} must be below 1")));
    }
    if opts.spacing > eps * eps {
        return Err(Error::InvalidParameter(format!(
            "grid spacing {} exceeds epsilon^2 = {}",
            opts.spacing,
            eps * eps
        )));
    }
    let norm = 2.0 * factorial(r) * eps;
    let mut samples = Vec::with_capacity(opts.renditions);
    let mut seeds = Vec::with_capacity(opts.renditions);
    for i in 0..opts.renditions {
        let seed = opts.seed.wrapping_add(i as u64);
        let series = estimate_series(cloud, &[eps * eps, eps], r, 0, &opts.series(seed))?;
        let diff = series.tensors[1].add_scaled(&series.tensors[0], -1.0)?;
        samples.push(diff.scaled(1.0 / norm));
        seeds.push(seed);
    }
    Ok(finish(r, 0, samples, seeds, opts))
}

fn finish(r: usize, s: usize, samples: Vec<SymTensor>, seeds: Vec<u64>, opts: &SurfaceOptions) -> SurfaceEstimate {
    let refs: Vec<&SymTensor> = samples.iter().collect();
    let (tensor, stderr) = mean_and_stderr(&refs);
    let area_from_trace = if r == 0 && s == 2 {
        surface_area_from_trace(&tensor).ok()
    } else {
        None
    };
    SurfaceEstimate {
        r,
        s,
        tensor,
        stderr,
        epsilon: opts.epsilon,
        spacing: opts.spacing,
        seeds,
        area_from_trace,
    }
}

/// `4 pi tr(T)` for a rank-2 `Phi_{d-1}^{0,2}`, equal to the surface area.
pub fn surface_area_from_trace(t: &SymTensor) -> Result<f64> {
    if t.rank() != 2 {
        return Err(Error::RankMismatch {
            expected: 2,
            got: t.rank(),
        });
    }
    Ok(4.0 * std::f64::consts::PI * trace2(t)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symtensor::metric;

    #[test]
    fn trace_area_of_shell_tensor() {
        let t = metric(2).scaled(0.375);
        assert!((surface_area_from_trace(&t).unwrap() - 3.0 * std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(surface_area_from_trace(&SymTensor::zeros(3, 2)).unwrap(), 0.0);
        assert!(surface_area_from_trace(&SymTensor::zeros(2, 1)).is_err());
    }

    #[test]
    fn segment_difference_quotient() {
        // [0, 1] at spacing 0.001; the estimate is close to 1 - eps
        let coords: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let cloud = PointCloud::new(1, coords).unwrap();
        let est = estimate_surface_scalar_diff(&cloud, 0, &SurfaceOptions::new(0.05, 0.00025, 3)).unwrap();
        let v = est.tensor.as_scalar();
        assert!((v - 0.95).abs() < 0.1 * 0.95, "{v}");
    }

    #[test]
    fn parameter_checks() {
        let cloud = PointCloud::new(1, vec![0.0, 1.0]).unwrap();
        assert!(estimate_surface_tensor(&cloud, 0, 0, &SurfaceOptions::new(0.1, 0.001, 0)).is_err());
        assert!(estimate_surface_tensor(&cloud, 0, 2, &SurfaceOptions::new(0.001, 0.001, 0)).is_err());
        assert!(estimate_surface_scalar_diff(&cloud, 0, &SurfaceOptions::new(1.5, 0.001, 0)).is_err());
        assert!(estimate_surface_scalar_diff(&cloud, 0, &SurfaceOptions::new(0.1, 0.02, 0)).is_err());
    }
}
