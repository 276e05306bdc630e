//! Exact reference values for test bodies.

mod beta;

pub use beta::{
    beta_expected_intrinsic_volume, beta_expected_surface, beta_expected_tensor, beta_expected_volume_mc,
    beta_surface_closed_form, beta_surface_quadrature, sample_beta_polytope, BetaPolytopeSpec, MonteCarloValue,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symtensor::{binomial, factorial, kappa, multiplicities, omega, sphere_moment, sym_product, SymTensor};

/// `Phi_k^{r,s}` of the axis-parallel box `prod [c_i - a_i/2, c_i + a_i/2]`.
///
/// Sums over the `k`-faces `F` the product of `int_F x^r` and the integral of
/// `u^s` over the normal cone, an orthant of a great subsphere.
pub fn box_minkowski(sides: &[f64], center: &[f64], k: usize, r: usize, s: usize) -> Result<SymTensor> {
    let d = sides.len();
    if d == 0 || center.len() != d {
        return Err(Error::InvalidParameter(
            "box sides and center must have equal, positive length".into(),
        ));
    }
    if sides.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidParameter("box sides must be positive".into()));
    }
    if k > d {
        return Err(Error::InvalidParameter(format!("degree {k} exceeds dimension {d}")));
    }
    let lo: Vec<f64> = center.iter().zip(sides).map(|(c, a)| c - a / 2.0).collect();
    let hi: Vec<f64> = center.iter().zip(sides).map(|(c, a)| c + a / 2.0).collect();
    if k == d {
        if s > 0 {
            return Ok(SymTensor::zeros(d, r + s));
        }
        let all: Vec<Option<f64>> = vec![None; d];
        return Ok(face_moment(&lo, &hi, &all, r).scaled(1.0 / factorial(r)));
    }
    let m = d - k;
    let mut total = SymTensor::zeros(d, r + s);
    for free_mask in 0u32..(1 << d) {
        if free_mask.count_ones() as usize != k {
            continue;
        }
        let fixed: Vec<usize> = (0..d).filter(|&i| free_mask >> i & 1 == 0).collect();
        for sign_mask in 0u32..(1 << m) {
            let mut face = vec![None; d];
            let mut sigma = vec![0.0; d];
            for (t, &i) in fixed.iter().enumerate() {
                let upper = sign_mask >> t & 1 == 1;
                face[i] = Some(if upper { hi[i] } else { lo[i] });
                sigma[i] = if upper { 1.0 } else { -1.0 };
            }
            let xr = face_moment(&lo, &hi, &face, r);
            let us = SymTensor::from_fn(d, s, |idx| orthant_moment(&multiplicities(d, idx), &sigma));
            total = total.add_scaled(&sym_product(&xr, &us)?, 1.0)?;
        }
    }
    Ok(total.scaled(1.0 / (factorial(r) * factorial(s) * omega(m + s))))
}

/// `Phi_0, ..., Phi_d` of a box.
pub fn box_minkowski_all(sides: &[f64], center: &[f64], r: usize, s: usize) -> Result<Vec<SymTensor>> {
    (0..=sides.len())
        .map(|k| box_minkowski(sides, center, k, r, s))
        .collect()
}

/// `int_F x^r` over the face with the given fixed coordinates.
fn face_moment(lo: &[f64], hi: &[f64], face: &[Option<f64>], r: usize) -> SymTensor {
    let d = lo.len();
    SymTensor::from_fn(d, r, |idx| {
        let n = multiplicities(d, idx);
        (0..d)
            .map(|i| match face[i] {
                Some(v) => v.powi(n[i] as i32),
                None => (hi[i].powi(n[i] as i32 + 1) - lo[i].powi(n[i] as i32 + 1)) / (n[i] + 1) as f64,
            })
            .product()
    })
}

/// Integral of `prod u_i^{n_i}` over `{u in S^{d-1} : u_j = 0 (free), sigma_i u_i >= 0}`.
fn orthant_moment(n: &[usize], sigma: &[f64]) -> f64 {
    let fixed: Vec<usize> = (0..n.len()).filter(|&i| sigma[i] != 0.0).collect();
    if (0..n.len()).any(|i| sigma[i] == 0.0 && n[i] > 0) {
        return 0.0;
    }
    let m = fixed.len() as f64;
    let total: usize = fixed.iter().map(|&i| n[i]).sum();
    let mut ln = (2.0f64).ln() - m * (2.0f64).ln() - statrs::function::gamma::ln_gamma((total as f64 + m) / 2.0);
    let mut sign = 1.0;
    for &i in &fixed {
        ln += statrs::function::gamma::ln_gamma((n[i] as f64 + 1.0) / 2.0);
        if n[i] % 2 == 1 {
            sign *= sigma[i];
        }
    }
    sign * ln.exp()
}

/// `Phi_k^{r,s}` of the shell `{rho1 <= |x| <= rho2}` in `R^d`.
pub fn shell_minkowski(d: usize, rho1: f64, rho2: f64, k: usize, r: usize, s: usize) -> Result<SymTensor> {
    if d == 0 || !(rho1 >= 0.0 && rho1 < rho2 && rho2.is_finite()) {
        return Err(Error::InvalidParameter(
            "shell needs 0 <= rho1 < rho2 and d >= 1".into(),
        ));
    }
    if k > d {
        return Err(Error::InvalidParameter(format!("degree {k} exceeds dimension {d}")));
    }
    let p = r + s;
    if p % 2 == 1 {
        return Ok(SymTensor::zeros(d, p));
    }
    if k == d {
        if s > 0 {
            return Ok(SymTensor::zeros(d, p));
        }
        let radial = (rho2.powi((r + d) as i32) - rho1.powi((r + d) as i32)) / (r + d) as f64;
        return Ok(sphere_moment(d, r).scaled(radial / factorial(r)));
    }
    let coef =
        binomial(d - 1, k) * 2.0 * omega(d + p) / (factorial(r) * factorial(s) * omega(d - k + s) * omega(p + 1));
    let e = (r + k) as i32;
    let inner = if rho1 > 0.0 {
        let sign = if (s + d - 1 - k).is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * rho1.powi(e)
    } else {
        0.0
    };
    Ok(crate::symtensor::metric_power(d, p / 2).scaled(coef * (rho2.powi(e) + inner)))
}

/// `Phi_1^{r,s}` of the outer rectangle minus the open inner one, both centred
/// at the origin: `Phi_1(R_outer) + (-1)^s Phi_1(R_inner)`.
pub fn cut_box_surface(inner: [f64; 2], outer: [f64; 2], r: usize, s: usize) -> Result<SymTensor> {
    if !(0..2).all(|i| inner[i] > 0.0 && inner[i] < outer[i] && outer[i].is_finite()) {
        return Err(Error::InvalidParameter("cut box needs 0 < inner_i < outer_i".into()));
    }
    let c = [0.0, 0.0];
    let b = box_minkowski(&outer, &c, 1, r, s)?;
    let a = box_minkowski(&inner, &c, 1, r, s)?;
    b.add_scaled(&a, if s.is_multiple_of(2) { 1.0 } else { -1.0 })
}

/// Exact values for the parallel set of a rectangle at distance `r0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundedBoxValues {
    pub phi0: f64,
    pub phi1: f64,
    pub phi2: f64,
    /// `Phi_1^{0,2}`.
    pub phi1_02: SymTensor,
}

pub fn rounded_box_2d(a1: f64, a2: f64, r0: f64) -> Result<RoundedBoxValues> {
    if !([a1, a2].iter().all(|&v| v > 0.0 && v.is_finite()) && r0 > 0.0 && r0.is_finite()) {
        return Err(Error::InvalidParameter("rounded box needs positive a1, a2, r0".into()));
    }
    let pi = std::f64::consts::PI;
    let mut t = SymTensor::zeros(2, 2);
    t.set(&[0, 0], a2 / (4.0 * pi) + r0 / 8.0);
    t.set(&[1, 1], a1 / (4.0 * pi) + r0 / 8.0);
    Ok(RoundedBoxValues {
        phi0: 1.0,
        phi1: a1 + a2 + pi * r0,
        phi2: a1 * a2 + 2.0 * (a1 + a2) * r0 + pi * r0 * r0,
        phi1_02: t,
    })
}

/// Convex bodies with known intrinsic volumes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SteinerBody {
    Ball { dim: usize, radius: f64 },
    Box { sides: Vec<f64> },
}

impl SteinerBody {
    pub fn dim(&self) -> usize {
        match self {
            SteinerBody::Ball { dim, .. } => *dim,
            SteinerBody::Box { sides } => sides.len(),
        }
    }

    /// `V_0, ..., V_d`.
    pub fn intrinsic_volumes(&self) -> Vec<f64> {
        match self {
            SteinerBody::Ball { dim, radius } => (0..=*dim)
                .map(|k| binomial(*dim, k) * kappa(*dim) / kappa(dim - k) * radius.powi(k as i32))
                .collect(),
            SteinerBody::Box { sides } => {
                // elementary symmetric polynomials of the side lengths
                let mut e = vec![1.0];
                for &a in sides {
                    let mut next = vec![0.0; e.len() + 1];
                    for (j, v) in e.iter().enumerate() {
                        next[j] += v;
                        next[j + 1] += v * a;
                    }
                    e = next;
                }
                e
            }
        }
    }
}

/// Exact parallel volumes `V^{0,0}_R = sum_j kappa_j R^j V_{d-j}`.
pub fn steiner_voronoi_series(body: &SteinerBody, radii: &[f64]) -> Result<Vec<f64>> {
    let d = body.dim();
    match body {
        SteinerBody::Ball { radius, .. } if !(*radius > 0.0) => {
            return Err(Error::InvalidParameter("ball radius must be positive".into()))
        }
        SteinerBody::Box { sides } if sides.iter().any(|&a| !(a > 0.0)) => {
            return Err(Error::InvalidParameter("box sides must be positive".into()))
        }
        _ if d == 0 => return Err(Error::InvalidParameter("dimension must be positive".into())),
        _ => {}
    }
    if radii.iter().any(|&r| !(r >= 0.0 && r.is_finite())) {
        return Err(Error::InvalidParameter("radii must be non-negative".into()));
    }
    let v = body.intrinsic_volumes();
    Ok(radii
        .iter()
        .map(|&r| (0..=d).map(|j| kappa(j) * r.powi(j as i32) * v[d - j]).sum())
        .collect())
}
