//! Symmetric tensors in coordinates.
//!
//! A [`SymTensor`] of rank `p` over `R^d` stores the evaluations
//! `T(e_{i1}, ..., e_{ip})` for every nondecreasing multi-index, densely and in
//! lexicographic order. Indices are 0-based in the API and 1-based in JSON.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Volume of the unit ball in `R^n`.
pub fn kappa(n: usize) -> f64 {
    // kappa_n = kappa_{n-2} * 2 pi / n
    let mut k = if n.is_multiple_of(2) { 1.0 } else { 2.0 };
    let mut m = if n.is_multiple_of(2) { 2 } else { 3 };
    while m <= n {
        k *= 2.0 * PI / m as f64;
        m += 2;
    }
    k
}

/// Surface area of the unit sphere in `R^n`, with `omega(0) = 0`.
pub fn omega(n: usize) -> f64 {
    n as f64 * kappa(n)
}

/// `(kappa_n, omega_n)`.
pub fn kappa_omega(n: usize) -> (f64, f64) {
    (kappa(n), omega(n))
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn binomial_usize(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Number of nondecreasing multi-indices of length `rank` over `dim` symbols.
pub fn entry_count(dim: usize, rank: usize) -> usize {
    if rank == 0 {
        return 1;
    }
    binomial_usize(dim + rank - 1, rank)
}

/// All nondecreasing multi-indices in lexicographic order.
pub fn multi_indices(dim: usize, rank: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(entry_count(dim, rank));
    let mut cur = vec![0usize; rank];
    if rank == 0 {
        out.push(cur);
        return out;
    }
    if dim == 0 {
        return out;
    }
    loop {
        out.push(cur.clone());
        // advance to next nondecreasing tuple
        let mut j = rank;
        while j > 0 && cur[j - 1] == dim - 1 {
            j -= 1;
        }
        if j == 0 {
            break;
        }
        let v = cur[j - 1] + 1;
        for c in cur.iter_mut().skip(j - 1) {
            *c = v;
        }
    }
    out
}

/// Position of a sorted multi-index in the lexicographic enumeration.
fn position(dim: usize, idx: &[usize]) -> usize {
    let p = idx.len();
    let mut pos = 0;
    let mut prev = 0;
    for (j, &i) in idx.iter().enumerate() {
        let rest = p - j - 1;
        for t in prev..i {
            pos += entry_count(dim - t, rest);
        }
        prev = i;
    }
    pos
}

/// Multiplicity of each axis in a multi-index.
pub fn multiplicities(dim: usize, idx: &[usize]) -> Vec<usize> {
    let mut m = vec![0; dim];
    for &i in idx {
        m[i] += 1;
    }
    m
}

fn multinomial(dim: usize, idx: &[usize]) -> f64 {
    multiplicities(dim, idx)
        .iter()
        .fold(factorial(idx.len()), |acc, &k| acc / factorial(k))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SymTensor {
    dim: usize,
    rank: usize,
    values: Vec<f64>,
}

impl SymTensor {
    pub fn zeros(dim: usize, rank: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        SymTensor {
            dim,
            rank,
            values: vec![0.0; entry_count(dim, rank)],
        }
    }

    pub fn scalar(dim: usize, v: f64) -> Self {
        let mut t = Self::zeros(dim, 0);
        t.values[0] = v;
        t
    }

    /// Builds a tensor by evaluating `f` on every sorted multi-index.
    pub fn from_fn(dim: usize, rank: usize, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let values = multi_indices(dim, rank).iter().map(|i| f(i)).collect();
        SymTensor { dim, rank, values }
    }

    /// Wraps raw values in lexicographic multi-index order.
    pub fn from_values(dim: usize, rank: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != entry_count(dim, rank) {
            return Err(Error::InvalidParameter(format!(
                "expected {} entries for dim {dim} rank {rank}, got {}",
                entry_count(dim, rank),
                values.len()
            )));
        }
        Ok(SymTensor { dim, rank, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn indices(&self) -> Vec<Vec<usize>> {
        multi_indices(self.dim, self.rank)
    }

    fn check_index(&self, idx: &[usize]) -> Result<()> {
        if idx.len() != self.rank || idx.iter().any(|&i| i >= self.dim) {
            return Err(Error::InvalidIndex(idx.to_vec()));
        }
        Ok(())
    }

    /// Value at an arbitrary (not necessarily sorted) 0-based multi-index.
    pub fn get(&self, idx: &[usize]) -> f64 {
        self.try_get(idx).expect("multi-index out of range")
    }

    pub fn try_get(&self, idx: &[usize]) -> Result<f64> {
        self.check_index(idx)?;
        let mut s = idx.to_vec();
        s.sort_unstable();
        Ok(self.values[position(self.dim, &s)])
    }

    pub fn set(&mut self, idx: &[usize], v: f64) {
        self.check_index(idx).expect("multi-index out of range");
        let mut s = idx.to_vec();
        s.sort_unstable();
        let p = position(self.dim, &s);
        self.values[p] = v;
    }

    /// Scalar value of a rank-0 tensor.
    pub fn as_scalar(&self) -> f64 {
        assert_eq!(self.rank, 0, "not a scalar");
        self.values[0]
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymTensor {
            dim: self.dim,
            rank: self.rank,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    fn check_same_shape(&self, other: &SymTensor) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        if self.rank != other.rank {
            return Err(Error::RankMismatch {
                expected: self.rank,
                got: other.rank,
            });
        }
        Ok(())
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, other: &SymTensor, c: f64) -> Result<Self> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
        Ok(out)
    }

    /// Largest absolute entry (a seminorm used for diagnostics).
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &SymTensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Multilinear evaluation `T(x_1, ..., x_p)`.
    pub fn evaluate(&self, args: &[&[f64]]) -> Result<f64> {
        if args.len() != self.rank {
            return Err(Error::RankMismatch {
                expected: self.rank,
                got: args.len(),
            });
        }
        if let Some(a) = args.iter().find(|a| a.len() != self.dim) {
            return Err(Error::DimensionMismatch(self.dim, a.len()));
        }
        // Sum over the full (unsorted) index set.
        let p = self.rank;
        let mut idx = vec![0usize; p];
        let mut total = 0.0;
        loop {
            let w: f64 = idx.iter().zip(args).map(|(&i, x)| x[i]).product();
            if w != 0.0 {
                total += w * self.get(&idx);
            }
            let mut j = p;
            loop {
                if j == 0 {
                    return Ok(total);
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < self.dim {
                    break;
                }
                idx[j] = 0;
            }
        }
    }

    /// The `d x d` matrix `M[i][j] = T(e_i, e_j)`.
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.rank != 2 {
            return Err(Error::RankMismatch {
                expected: 2,
                got: self.rank,
            });
        }
        Ok(DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(&[i, j])))
    }
}

/// `v^p`, with entries `prod_j v[i_j]`.
pub fn tensor_power(v: &[f64], p: usize) -> SymTensor {
    SymTensor::from_fn(v.len(), p, |idx| idx.iter().map(|&i| v[i]).product())
}

/// Symmetric tensor product.
pub fn sym_product(a: &SymTensor, b: &SymTensor) -> Result<SymTensor> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch(a.dim, b.dim));
    }
    let (p, q) = (a.rank, b.rank);
    let m = p + q;
    let norm = binomial(m, p);
    let mut sa = Vec::with_capacity(p);
    let mut sb = Vec::with_capacity(q);
    Ok(SymTensor::from_fn(a.dim, m, |idx| {
        let mut acc = 0.0;
        for mask in 0u64..(1u64 << m) {
            if mask.count_ones() as usize != p {
                continue;
            }
            sa.clear();
            sb.clear();
            for (j, &i) in idx.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    sa.push(i);
                } else {
                    sb.push(i);
                }
            }
            acc += a.values[position(a.dim, &sa)] * b.values[position(b.dim, &sb)];
        }
        acc / norm
    }))
}

/// The metric tensor `Q = e_1^2 + ... + e_d^2`.
pub fn metric(d: usize) -> SymTensor {
    SymTensor::from_fn(d, 2, |i| if i[0] == i[1] { 1.0 } else { 0.0 })
}

/// `Q^m`.
pub fn metric_power(d: usize, m: usize) -> SymTensor {
    let q = metric(d);
    let mut out = SymTensor::scalar(d, 1.0);
    for _ in 0..m {
        out = sym_product(&out, &q).expect("same dimension");
    }
    out
}

/// `int_{S^{d-1}} u^p dH^{d-1}`.
pub fn sphere_moment(d: usize, p: usize) -> SymTensor {
    if p % 2 == 1 {
        return SymTensor::zeros(d, p);
    }
    metric_power(d, p / 2).scaled(2.0 * omega(d + p) / omega(p + 1))
}

pub fn trace2(t: &SymTensor) -> Result<f64> {
    if t.rank != 2 {
        return Err(Error::RankMismatch {
            expected: 2,
            got: t.rank,
        });
    }
    Ok((0..t.dim).map(|i| t.get(&[i, i])).sum())
}

/// Basis coefficient `t_{i1..ip}`: the stored value times the multinomial count.
pub fn multiindex_coefficient(t: &SymTensor, idx: &[usize]) -> Result<f64> {
    let v = t.try_get(idx)?;
    Ok(multinomial(t.dim, idx) * v)
}

/// Inverse of [`multiindex_coefficient`].
pub fn value_from_coefficient(dim: usize, idx: &[usize], coefficient: f64) -> f64 {
    coefficient / multinomial(dim, idx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rank2Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvectors, one per eigenvalue.
    pub eigenvectors: Vec<Vec<f64>>,
    pub anisotropy_ratio: f64,
}

/// Eigendecomposition of a rank-2 tensor, sorted by `|lambda|` descending.
pub fn rank2_spectrum(t: &SymTensor) -> Result<Rank2Spectrum> {
    let m = t.to_matrix()?;
    let d = t.dim;
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 0)
        .ok_or_else(|| Error::InvalidParameter("eigendecomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        let (la, lb) = (eig.eigenvalues[a], eig.eigenvalues[b]);
        lb.abs()
            .partial_cmp(&la.abs())
            .unwrap()
            .then(lb.partial_cmp(&la).unwrap())
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = order
        .iter()
        .map(|&k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            // sign convention: largest component positive
            let big = v
                .iter()
                .copied()
                .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if big < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    let max = eigenvalues[0].abs();
    let min = eigenvalues[d - 1].abs();
    let anisotropy_ratio = if max == 0.0 { 0.0 } else { min / max };
    Ok(Rank2Spectrum {
        eigenvalues,
        eigenvectors,
        anisotropy_ratio,
    })
}

fn index_key(idx: &[usize]) -> String {
    idx.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",")
}

struct Entries<'a>(&'a SymTensor);

impl Serialize for Entries<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let t = self.0;
        let mut map = s.serialize_map(Some(t.values.len()))?;
        for (idx, v) in multi_indices(t.dim, t.rank).iter().zip(&t.values) {
            map.serialize_entry(&index_key(idx), v)?;
        }
        map.end()
    }
}

impl Serialize for SymTensor {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("SymTensor", 3)?;
        st.serialize_field("dim", &self.dim)?;
        st.serialize_field("rank", &self.rank)?;
        st.serialize_field("entries", &Entries(self))?;
        st.end()
    }
}

struct RawEntries(Vec<(String, f64)>);

impl<'de> Deserialize<'de> for RawEntries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = RawEntries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from comma-joined indices to numbers")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut m: A) -> std::result::Result<RawEntries, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = m.next_entry::<String, f64>()? {
                    out.push((k, v));
                }
                Ok(RawEntries(out))
            }
        }
        d.deserialize_map(V)
    }
}

impl<'de> Deserialize<'de> for SymTensor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            dim: usize,
            rank: usize,
            entries: RawEntries,
        }
        let raw = Raw::deserialize(d)?;
        if raw.dim == 0 {
            return Err(de::Error::custom("dim must be positive"));
        }
        let mut t = SymTensor::zeros(raw.dim, raw.rank);
        for (key, v) in raw.entries.0 {
            if !v.is_finite() {
                return Err(de::Error::custom("non-finite tensor entry"));
            }
            let idx: Vec<usize> = if key.is_empty() {
                Vec::new()
            } else {
                key.split(',')
                    .map(|p| p.trim().parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| de::Error::custom(format!("bad index key {key:?}")))?
            };
            if idx.len() != raw.rank || idx.iter().any(|&i| i == 0 || i > raw.dim) {
                return Err(de::Error::custom(format!("index key {key:?} out of range")));
            }
            if idx.windows(2).any(|w| w[0] > w[1]) {
                return Err(de::Error::custom(format!("index key {key:?} is not sorted")));
            }
            let zero_based: Vec<usize> = idx.iter().map(|i| i - 1).collect();
            t.set(&zero_based, v);
        }
        Ok(t)
    }
}
