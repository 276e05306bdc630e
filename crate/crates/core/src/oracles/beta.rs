//! Beta-polytopes: sampling and expected intrinsic volumes and tensors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::checked_beta_reg;
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::spatial::ConvexHull;
use crate::symtensor::{binomial, factorial, kappa, metric_power, omega, SymTensor};

/// Convex hull of `l` i.i.d. points with density proportional to `(1 - |x|^2)^beta` on the unit ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaPolytopeSpec {
    pub d: usize,
    pub l: usize,
    pub beta: f64,
    pub seed: u64,
}

impl BetaPolytopeSpec {
    pub fn validate(&self) -> Result<()> {
        check(self.d, self.l, self.beta)
    }
}

fn check(d: usize, l: usize, beta: f64) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    if l < d + 1 {
        return Err(Error::InvalidParameter(format!("need l >= d + 1 = {}, got {l}", d + 1)));
    }
    if !(beta > -1.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!("beta must exceed -1, got {beta}")));
    }
    Ok(())
}

fn draw_point(rng: &mut impl Rng, d: usize, radial: &Beta<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if v.iter().any(|x: &f64| *x != 0.0) {
            break v;
        }
    };
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    // the support is the open ball; heavy mass near 1 can round up
    let rho = loop {
        let t: f64 = radial.sample(rng);
        if t < 1.0 {
            break t.sqrt();
        }
    };
    v.iter_mut().for_each(|x| *x *= rho / norm);
    v
}

/// The `l` random points; squared radii follow `Beta(d/2, beta + 1)`.
pub fn sample_beta_polytope(spec: &BetaPolytopeSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let radial = Beta::new(spec.d as f64 / 2.0, spec.beta + 1.0)
        .map_err(|e| Error::InvalidParameter(format!("radial distribution: {e}")))?;
    Ok((0..spec.l).map(|_| draw_point(&mut rng, spec.d, &radial)).collect())
}

/// Closed forms of `E V_1` for `d = 2` and `beta = -1/2, 1/2`.
pub fn beta_surface_closed_form(d: usize, l: usize, beta: f64) -> Option<f64> {
    if d != 2 || l < 3 {
        return None;
    }
    let pi = std::f64::consts::PI;
    if beta == -0.5 {
        return Some(pi * (l - 1) as f64 / (l + 1) as f64);
    }
    if beta == 0.5 {
        let sum: f64 = (0..=l - 2)
            .map(|j| binomial(l - 2, j) / binomial(2 * l + j + 3, j + 3) * 2f64.powi(j as i32))
            .sum();
        return Some(pi * 9.0 * (l - 1) as f64 * sum);
    }
    None
}

// Zero forces every tanh-sinh level; the early exit of the integrator can
// stop on a coincidental agreement between two coarse levels.
const QUAD_TOL: f64 = 0.0;
const SPLITS: i32 = 12;

/// `E V_{d-1}` by one-dimensional quadrature of the facet-height integral.
pub fn beta_surface_quadrature(d: usize, l: usize, beta: f64) -> Result<f64> {
    check(d, l, beta)?;
    let df = d as f64;
    let gamma1 = beta + (df - 1.0) / 2.0;
    let power = df * beta + (df - 1.0) * (df + 2.0) / 2.0;
    let tail = (l - d) as i32;
    let failure = std::cell::RefCell::new(None);
    let integrand = |h: f64| -> f64 {
        let x = ((1.0 + h) / 2.0).clamp(0.0, 1.0);
        let f = match checked_beta_reg(gamma1 + 1.0, gamma1 + 1.0, x) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e.to_string());
                0.0
            }
        };
        (1.0 - h * h).max(0.0).powf(power) * f.powi(tail)
    };
    // for large l the mass piles up near h = 1; refine the panels geometrically there
    let mut cuts = vec![-1.0, 0.0];
    cuts.extend((1..=SPLITS).map(|k| 1.0 - 0.5f64.powi(k)));
    cuts.push(1.0);
    let mut integral = 0.0;
    for w in cuts.windows(2) {
        let out = quadrature::double_exponential::integrate(integrand, w[0], w[1], QUAD_TOL);
        if !(out.integral.is_finite() && out.error_estimate <= 1e-10 * out.integral.abs().max(1.0)) {
            return Err(Error::Quadrature(format!(
                "no convergence on [{}, {}]: integral {} with error estimate {:.3e}",
                w[0], w[1], out.integral, out.error_estimate
            )));
        }
        integral += out.integral;
    }
    if let Some(msg) = failure.into_inner() {
        return Err(Error::Quadrature(format!("regularised beta function: {msg}")));
    }
    let ln_ratio = ln_gamma(beta + (df + 2.0) / 2.0) - ln_gamma(beta + (df + 3.0) / 2.0);
    let prefactor =
        df * (2.0 * beta + df + 1.0) / (2f64.powi(d as i32) * gamma(df / 2.0)) * binomial(l, d) * (df * ln_ratio).exp();
    Ok(prefactor * integral)
}

/// `E V_{d-1}(P^beta_{l,d})`, closed form where one exists.
pub fn beta_expected_surface(d: usize, l: usize, beta: f64) -> Result<f64> {
    check(d, l, beta)?;
    match beta_surface_closed_form(d, l, beta) {
        Some(v) => Ok(v),
        None => beta_surface_quadrature(d, l, beta),
    }
}

/// `E V_k(P^beta_{l,d})` for `k < d`.
///
/// The dimension reduction is applied twice, `d -> k` and `k + 1 -> k`, so
/// that the right-hand side becomes a surface expectation in dimension `k + 1`
/// with parameter `beta + (d - k - 1)/2`.
pub fn beta_expected_intrinsic_volume(d: usize, k: usize, l: usize, beta: f64) -> Result<f64> {
    check(d, l, beta)?;
    if k >= d {
        return Err(Error::Unsupported(
            "expected volume has no closed form here; use the Monte Carlo estimate".into(),
        ));
    }
    if k == 0 {
        return Ok(1.0);
    }
    let down = binomial(d, k) * kappa(d) / (kappa(k) * kappa(d - k));
    let up = kappa(k) * kappa(1) / ((k + 1) as f64 * kappa(k + 1));
    let b = beta + (d - k - 1) as f64 / 2.0;
    Ok(down * up * beta_expected_surface(k + 1, l, b)?)
}

/// `E Phi_k^{0,s}(P^beta_{l,d})`, a multiple of `Q^{s/2}`.
pub fn beta_expected_tensor(d: usize, k: usize, l: usize, beta: f64, s: usize) -> Result<SymTensor> {
    let ev = beta_expected_intrinsic_volume(d, k, l, beta)?;
    if s % 2 == 1 {
        return Ok(SymTensor::zeros(d, s));
    }
    let coef = 2.0 * omega(d + s) * omega(d - k) / (factorial(s) * omega(d) * omega(s + 1) * omega(d - k + s));
    Ok(metric_power(d, s / 2).scaled(coef * ev))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloValue {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Mean hull volume over `hulls` samples; hull `i` uses seed `seed + i`.
pub fn beta_expected_volume_mc(d: usize, l: usize, beta: f64, hulls: usize, seed: u64) -> Result<MonteCarloValue> {
    check(d, l, beta)?;
    if hulls < 2 {
        return Err(Error::InvalidParameter("need at least two hulls".into()));
    }
    let one = |i: usize| -> Result<f64> {
        let spec = BetaPolytopeSpec {
            d,
            l,
            beta,
            seed: seed.wrapping_add(i as u64),
        };
        Ok(ConvexHull::new(&sample_beta_polytope(&spec)?)?.volume())
    };
    #[cfg(feature = "parallel")]
    let vols: Vec<f64> = {
        use rayon::prelude::*;
        (0..hulls).into_par_iter().map(one).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let vols: Vec<f64> = (0..hulls).map(one).collect::<Result<_>>()?;
    let n = vols.len() as f64;
    let mean = vols.iter().sum::<f64>() / n;
    let var = vols.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MonteCarloValue {
        mean,
        stderr: (var / n).sqrt(),
        samples: vols.len(),
    })
}
