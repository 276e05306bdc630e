//! Deterministic reference values of the Voronoi tensors.
//!
//! The `R_n`-neighbourhood of the sample is covered by boxes that are refined
//! adaptively. A box whose corners share one nearest sample point lies in that
//! point's Voronoi cell; if in addition no radius of the schedule separates its
//! nearest and farthest distance to the point, the integrand is a polynomial
//! on the box and Gauss-Legendre quadrature integrates it exactly. Boxes that
//! never become clean are integrated by a product rule at the finest level.

use super::{fill_powers, validate_radii, ProductPlan, VoronoiTensorSeries};
use crate::error::{Error, Result};
use crate::spatial::PointCloud;
use crate::symtensor::SymTensor;

#[derive(Clone, Debug)]
pub struct OracleOptions {
    /// Finest cell size; defaults to `R_1 / 200`.
    pub finest: Option<f64>,
    pub max_points: usize,
    pub max_dim: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            finest: None,
            max_points: 200,
            max_dim: 3,
        }
    }
}

/// `V^{r,s}_{R_i}(K_0)` by adaptive deterministic integration.
pub fn exact_series_oracle(
    cloud: &PointCloud,
    radii: &[f64],
    r: usize,
    s: usize,
    opts: &OracleOptions,
) -> Result<VoronoiTensorSeries> {
    validate_radii(radii)?;
    let d = cloud.dim();
    if cloud.len() > opts.max_points || d > opts.max_dim {
        return Err(Error::Unsupported(format!(
            "deterministic oracle limited to {} points in dimension <= {} (got {} points, d = {d})",
            opts.max_points,
            opts.max_dim,
            cloud.len()
        )));
    }
    let finest = opts.finest.unwrap_or(radii[0] / 200.0);
    if !(finest > 0.0) {
        return Err(Error::InvalidParameter("oracle cell size must be positive".into()));
    }
    let n = radii.len();
    let r_max = radii[n - 1];
    let plan = ProductPlan::new(d, r, s);
    let e = plan.entries;

    // initial boxes of size finest * 2^levels, about R_1 / 2 wide
    let mut h0 = finest;
    while h0 * 2.0 <= radii[0] / 2.0 {
        h0 *= 2.0;
    }
    let (lo, hi) = cloud.bounding_box();
    let lo: Vec<f64> = lo.iter().map(|v| v - r_max).collect();
    let counts: Vec<usize> = (0..d)
        .map(|j| ((hi[j] + r_max - lo[j]) / h0).ceil().max(1.0) as usize)
        .collect();

    let mut w = Walker {
        cloud,
        radii,
        plan: &plan,
        finest: finest * (1.0 + 1e-9),
        buckets: vec![0.0; n * e],
        clean_rule: gauss_legendre(s / 2 + 1),
        fine_rule: gauss_legendre((s / 2 + 1).max(2)),
        pa: Vec::new(),
        pb: Vec::new(),
        vals: vec![0.0; e],
        leaves: 0,
    };
    let total: usize = counts.iter().product();
    let mut idx = vec![0usize; d];
    let mut corner = vec![0.0; d];
    for k in 0..total {
        let mut rem = k;
        for j in (0..d).rev() {
            idx[j] = rem % counts[j];
            rem /= counts[j];
        }
        for j in 0..d {
            corner[j] = lo[j] + idx[j] as f64 * h0;
        }
        w.visit(&corner, h0);
    }

    let mut running = vec![0.0; e];
    let mut tensors = Vec::with_capacity(n);
    for i in 0..n {
        for k in 0..e {
            running[k] += w.buckets[i * e + k];
        }
        tensors.push(SymTensor::from_values(d, r + s, running.clone())?);
    }
    Ok(VoronoiTensorSeries {
        radii: radii.to_vec(),
        r,
        s,
        tensors,
        spacing: finest,
        seed: 0,
        rotate: false,
        grid_points: w.leaves,
    })
}

struct Walker<'a> {
    cloud: &'a PointCloud,
    radii: &'a [f64],
    plan: &'a ProductPlan,
    finest: f64,
    buckets: Vec<f64>,
    clean_rule: (Vec<f64>, Vec<f64>),
    fine_rule: (Vec<f64>, Vec<f64>),
    pa: Vec<f64>,
    pb: Vec<f64>,
    vals: Vec<f64>,
    leaves: u64,
}

impl Walker<'_> {
    fn nearest(&self, x: &[f64]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in self.cloud.points().enumerate() {
            let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        (best.0, best.1.sqrt())
    }

    fn box_distance(lo: &[f64], h: f64, p: &[f64]) -> f64 {
        lo.iter()
            .zip(p)
            .map(|(&l, &v)| {
                let t = if v < l {
                    l - v
                } else if v > l + h {
                    v - l - h
                } else {
                    0.0
                };
                t * t
            })
            .sum::<f64>()
            .sqrt()
    }

    fn bucket(&self, rho: f64) -> usize {
        self.radii.partition_point(|&r| r <= rho)
    }

    fn visit(&mut self, lo: &[f64], h: f64) {
        let d = lo.len();
        let n = self.radii.len();
        let near = self
            .cloud
            .points()
            .map(|p| Self::box_distance(lo, h, p))
            .fold(f64::INFINITY, f64::min);
        if near >= self.radii[n - 1] {
            return;
        }
        // nearest point at every corner
        let mut owner = None;
        let mut uniform = true;
        let mut far = 0.0f64;
        let mut c = vec![0.0; d];
        for m in 0..1usize << d {
            for j in 0..d {
                c[j] = lo[j] + if m >> j & 1 == 1 { h } else { 0.0 };
            }
            let (k, dist) = self.nearest(&c);
            match owner {
                None => owner = Some(k),
                Some(o) if o != k => {
                    uniform = false;
                    break;
                }
                _ => {}
            }
            far = far.max(dist);
        }
        if uniform {
            let k = owner.unwrap();
            let b = self.bucket(Self::box_distance(lo, h, self.cloud.point(k)));
            if b == self.bucket(far) {
                if b < n {
                    self.integrate_clean(lo, h, k, b);
                }
                return;
            }
        }
        if h <= self.finest {
            self.integrate_fine(lo, h);
            return;
        }
        let h2 = h / 2.0;
        let mut child = vec![0.0; d];
        for m in 0..1usize << d {
            for j in 0..d {
                child[j] = lo[j] + if m >> j & 1 == 1 { h2 } else { 0.0 };
            }
            self.visit(&child, h2);
        }
    }

    fn for_each_node(rule: &(Vec<f64>, Vec<f64>), lo: &[f64], h: f64, mut f: impl FnMut(&[f64], f64)) {
        let d = lo.len();
        let m = rule.0.len();
        let total = m.pow(d as u32);
        let mut x = vec![0.0; d];
        for k in 0..total {
            let mut rem = k;
            let mut w = h.powi(d as i32);
            for j in 0..d {
                let q = rem % m;
                rem /= m;
                x[j] = lo[j] + 0.5 * h * (rule.0[q] + 1.0);
                w *= 0.5 * rule.1[q];
            }
            f(&x, w);
        }
    }

    fn add_node(&mut self, p_idx: usize, x: &[f64], w: f64, bucket: usize) {
        let p = self.cloud.point(p_idx);
        let diff: Vec<f64> = x.iter().zip(p).map(|(a, b)| a - b).collect();
        let m = self.plan.r + self.plan.s;
        fill_powers(p, m, &mut self.pa);
        fill_powers(&diff, m, &mut self.pb);
        self.plan.eval_into(&self.pa, &self.pb, &mut self.vals);
        let e = self.plan.entries;
        for (acc, v) in self.buckets[bucket * e..(bucket + 1) * e].iter_mut().zip(&self.vals) {
            *acc += w * v;
        }
    }

    fn integrate_clean(&mut self, lo: &[f64], h: f64, k: usize, bucket: usize) {
        self.leaves += 1;
        let rule = self.clean_rule.clone();
        Self::for_each_node(&rule, lo, h, |x, w| self.add_node(k, x, w, bucket));
    }

    fn integrate_fine(&mut self, lo: &[f64], h: f64) {
        self.leaves += 1;
        let rule = self.fine_rule.clone();
        let n = self.radii.len();
        Self::for_each_node(&rule, lo, h, |x, w| {
            let (k, rho) = self.nearest(x);
            let b = self.bucket(rho);
            if b < n {
                self.add_node(k, x, w, b);
            }
        });
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton on the Legendre recurrence).
fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            if m == 0 {
                break;
            }
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { x } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = m as f64 * (x * pm - pm1) / (x * x - 1.0);
            let dx = pm / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}
