//! Parametric test shapes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::ConvexHull;

/// Analytic shapes, all closed. Boxes default to being centred at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeSpec {
    /// `prod [c_i - s_i/2, c_i + s_i/2]`.
    Box { sides: Vec<f64>, center: Vec<f64> },
    /// `{rho1 <= |x| <= rho2}` in `R^dim`.
    Shell { dim: usize, rho1: f64, rho2: f64 },
    /// `R_outer \ interior(R_inner)` for two origin-centred rectangles.
    CutBox { inner: [f64; 2], outer: [f64; 2] },
    /// Points within `r0` of the origin-centred rectangle with sides `a1, a2`.
    RoundedBox2d { a1: f64, a2: f64, r0: f64 },
    /// Convex hull of the vertices.
    Polytope { vertices: Vec<Vec<f64>> },
}

impl ShapeSpec {
    pub fn centered_box(sides: Vec<f64>) -> Self {
        let center = vec![0.0; sides.len()];
        ShapeSpec::Box { sides, center }
    }

    pub fn dim(&self) -> usize {
        match self {
            ShapeSpec::Box { sides, .. } => sides.len(),
            ShapeSpec::Shell { dim, .. } => *dim,
            ShapeSpec::CutBox { .. } | ShapeSpec::RoundedBox2d { .. } => 2,
            ShapeSpec::Polytope { vertices } => vertices.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        let pos = |v: f64| v > 0.0 && v.is_finite();
        match self {
            ShapeSpec::Box { sides, center } => {
                if sides.is_empty() || !sides.iter().all(|&s| pos(s)) {
                    return bad("box sides must be positive");
                }
                if center.len() != sides.len() || center.iter().any(|c| !c.is_finite()) {
                    return bad("box center must match the number of sides");
                }
            }
            ShapeSpec::Shell { dim, rho1, rho2 } => {
                if *dim == 0 || !(*rho1 >= 0.0 && rho1 < rho2 && rho2.is_finite()) {
                    return bad("shell needs 0 <= rho1 < rho2 and dim >= 1");
                }
            }
            ShapeSpec::CutBox { inner, outer } => {
                if !(0..2).all(|i| inner[i] > 0.0 && inner[i] < outer[i] && outer[i].is_finite()) {
                    return bad("cut box needs 0 < inner_i < outer_i");
                }
            }
            ShapeSpec::RoundedBox2d { a1, a2, r0 } => {
                if !(pos(*a1) && pos(*a2) && pos(*r0)) {
                    return bad("rounded box needs positive a1, a2, r0");
                }
            }
            ShapeSpec::Polytope { vertices } => {
                let d = self.dim();
                if d == 0 || vertices.len() < d + 1 {
                    return bad("polytope needs at least d+1 vertices");
                }
            }
        }
        Ok(())
    }

    pub fn bounding_box(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        self.validate()?;
        Ok(match self {
            ShapeSpec::Box { sides, center } => (
                center.iter().zip(sides).map(|(c, s)| c - s / 2.0).collect(),
                center.iter().zip(sides).map(|(c, s)| c + s / 2.0).collect(),
            ),
            ShapeSpec::Shell { dim, rho2, .. } => (vec![-rho2; *dim], vec![*rho2; *dim]),
            ShapeSpec::CutBox { outer, .. } => (
                vec![-outer[0] / 2.0, -outer[1] / 2.0],
                vec![outer[0] / 2.0, outer[1] / 2.0],
            ),
            ShapeSpec::RoundedBox2d { a1, a2, r0 } => {
                (vec![-a1 / 2.0 - r0, -a2 / 2.0 - r0], vec![a1 / 2.0 + r0, a2 / 2.0 + r0])
            }
            ShapeSpec::Polytope { vertices } => {
                let d = self.dim();
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for v in vertices {
                    for j in 0..d {
                        lo[j] = lo[j].min(v[j]);
                        hi[j] = hi[j].max(v[j]);
                    }
                }
                (lo, hi)
            }
        })
    }

    /// Prepared membership test (builds the hull for polytopes once).
    pub fn membership(&self) -> Result<Membership<'_>> {
        self.validate()?;
        Ok(match self {
            ShapeSpec::Polytope { vertices } => Membership::Hull(ConvexHull::new(vertices)?),
            other => Membership::Analytic(other),
        })
    }
}

pub enum Membership<'a> {
    Analytic(&'a ShapeSpec),
    Hull(ConvexHull),
}

impl Membership<'_> {
    /// Closed membership with absolute slack `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            Membership::Hull(h) => h.contains(x, tol),
            Membership::Analytic(shape) => match shape {
                ShapeSpec::Box { sides, center } => x
                    .iter()
                    .zip(center.iter().zip(sides))
                    .all(|(v, (c, s))| (v - c).abs() <= s / 2.0 + tol),
                ShapeSpec::Shell { rho1, rho2, .. } => {
                    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    r >= rho1 - tol && r <= rho2 + tol
                }
                ShapeSpec::CutBox { inner, outer } => {
                    let in_outer = (0..2).all(|i| x[i].abs() <= outer[i] / 2.0 + tol);
                    let in_open_inner = (0..2).all(|i| x[i].abs() < inner[i] / 2.0 - tol);
                    in_outer && !in_open_inner
                }
                ShapeSpec::RoundedBox2d { a1, a2, r0 } => {
                    let dx = (x[0].abs() - a1 / 2.0).max(0.0);
                    let dy = (x[1].abs() - a2 / 2.0).max(0.0);
                    (dx * dx + dy * dy).sqrt() <= r0 + tol
                }
                ShapeSpec::Polytope { .. } => unreachable!("polytopes use the hull variant"),
            },
        }
    }
}
