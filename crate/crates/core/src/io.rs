//! Text input formats and the JSON result document.
//!
//! Point files hold one point per line, fields separated by commas or
//! whitespace; `#` starts a comment. Voxel masks start with
//! `dims: n1 n2 [n3]` and `spacing: s` headers followed by the 0/1 values with
//! the last axis running fastest, one row of `n_last` values per line.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lsq::MinkowskiTensorSet;
use crate::spatial::PointCloud;
use crate::surface::SurfaceEstimate;
use crate::symtensor::{rank2_spectrum, Rank2Spectrum, SymTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointFormat {
    Csv,
    VoxelMask,
}

/// Lines with content, numbered from 1, comments stripped.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

fn parse_fields(line: usize, l: &str) -> Result<Vec<f64>> {
    l.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|f| !f.is_empty())
        .map(|f| {
            f.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("not a finite number: {f:?}"),
                })
        })
        .collect()
}

/// Rectangular numeric table.
pub fn parse_table(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, l) in data_lines(text) {
        let row = parse_fields(line, l)?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Ragged {
                    line,
                    expected: first.len(),
                    found: row.len(),
                });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn parse_points(text: &str) -> Result<PointCloud> {
    let rows = parse_table(text)?;
    if rows.is_empty() {
        return Err(Error::ZeroPoints);
    }
    PointCloud::from_points(&rows)
}

/// Voxel centres `(i + 1/2) * spacing` of all set voxels.
pub fn parse_voxel_mask(text: &str) -> Result<PointCloud> {
    let mut dims: Option<Vec<usize>> = None;
    let mut spacing: Option<f64> = None;
    let mut values: Vec<bool> = Vec::new();
    for (line, l) in data_lines(text) {
        if let Some(rest) = l.strip_prefix("dims:") {
            let d: std::result::Result<Vec<usize>, _> = rest.split_whitespace().map(str::parse).collect();
            dims = Some(d.map_err(|e| Error::Parse {
                line,
                msg: format!("bad dims: {e}"),
            })?);
            continue;
        }
        if let Some(rest) = l.strip_prefix("spacing:") {
            spacing = Some(rest.trim().parse::<f64>().map_err(|e| Error::Parse {
                line,
                msg: format!("bad spacing: {e}"),
            })?);
            continue;
        }
        let dims = dims.as_ref().ok_or(Error::Parse {
            line,
            msg: "voxel values before the dims header".into(),
        })?;
        let row = parse_fields(line, l)?;
        let last = *dims.last().unwrap();
        if row.len() != last {
            return Err(Error::Ragged {
                line,
                expected: last,
                found: row.len(),
            });
        }
        for v in row {
            if v != 0.0 && v != 1.0 {
                return Err(Error::Parse {
                    line,
                    msg: format!("mask values must be 0 or 1, got {v}"),
                });
            }
            values.push(v == 1.0);
        }
    }
    let dims = dims.ok_or(Error::Parse {
        line: 0,
        msg: "missing dims header".into(),
    })?;
    let spacing = spacing.unwrap_or(1.0);
    if dims.is_empty() || dims.contains(&0) || !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidParameter("mask needs positive dims and spacing".into()));
    }
    let total: usize = dims.iter().product();
    if values.len() != total {
        return Err(Error::Parse {
            line: 0,
            msg: format!("expected {total} mask values, found {}", values.len()),
        });
    }
    let d = dims.len();
    let mut coords = Vec::new();
    let mut idx = vec![0usize; d];
    for set in values {
        if set {
            coords.extend(idx.iter().map(|&i| (i as f64 + 0.5) * spacing));
        }
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] < dims[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    if coords.is_empty() {
        return Err(Error::ZeroPoints);
    }
    PointCloud::new(d, coords)
}

pub fn load_points(path: &Path, format: PointFormat) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path)?;
    match format {
        PointFormat::Csv => parse_points(&text),
        PointFormat::VoxelMask => parse_voxel_mask(&text),
    }
}

/// SHA-256 of the input bytes, hex encoded.
pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> Result<String> {
    Ok(digest_bytes(&std::fs::read(path)?))
}

/// Heights on a square-pixel grid; row `i`, column `j` sits at `(i, j) * pitch`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightField {
    pub nx: usize,
    pub ny: usize,
    pub pitch: f64,
    /// Scaled heights, row major.
    pub heights: Vec<f64>,
    pub rms: f64,
    pub label: String,
}

impl HeightField {
    pub fn new(nx: usize, ny: usize, pitch: f64, heights: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if nx == 0 || ny == 0 || heights.len() != nx * ny {
            return Err(Error::InvalidParameter(format!(
                "height field needs {nx} x {ny} values, got {}",
                heights.len()
            )));
        }
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::InvalidParameter("pitch must be positive".into()));
        }
        if heights.iter().any(|h| !h.is_finite()) {
            return Err(Error::InvalidParameter("heights must be finite".into()));
        }
        let n = heights.len() as f64;
        let mean = heights.iter().sum::<f64>() / n;
        let rms = (heights.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / n).sqrt();
        Ok(HeightField {
            nx,
            ny,
            pitch,
            heights,
            rms,
            label: label.into(),
        })
    }

    /// Samples `h(x, y)` at the pixel positions.
    pub fn from_fn(nx: usize, ny: usize, pitch: f64, h: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let heights = (0..nx)
            .flat_map(|i| (0..ny).map(move |j| (i, j)))
            .map(|(i, j)| h(i as f64 * pitch, j as f64 * pitch))
            .collect();
        Self::new(nx, ny, pitch, heights, "synthetic")
    }

    pub fn to_cloud(&self) -> Result<PointCloud> {
        let mut coords = Vec::with_capacity(3 * self.heights.len());
        for i in 0..self.nx {
            for j in 0..self.ny {
                coords.extend([
                    i as f64 * self.pitch,
                    j as f64 * self.pitch,
                    self.heights[i * self.ny + j],
                ]);
            }
        }
        PointCloud::new(3, coords)
    }
}

/// Parses a rectangular grid of heights, multiplying them by `scale`.
pub fn parse_heightfield(text: &str, pitch: f64, scale: f64, label: &str) -> Result<HeightField> {
    let rows = parse_table(text)?;
    if rows.is_empty() {
        return Err(Error::ZeroPoints);
    }
    let (nx, ny) = (rows.len(), rows[0].len());
    let heights = rows.into_iter().flatten().map(|h| h * scale).collect();
    HeightField::new(nx, ny, pitch, heights, label)
}

pub fn load_heightfield(path: &Path, pitch: f64, scale: f64) -> Result<HeightField> {
    let text = std::fs::read_to_string(path)?;
    parse_heightfield(&text, pitch, scale, &path.display().to_string())
}

/// Expected surface values of the plane `z = c x` over `[0, L]^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlaneReference {
    pub area: f64,
    pub normal: Vec<f64>,
    /// `(A / (4 pi)) nu^2`; both sides of the sheet are counted.
    pub phi_02: SymTensor,
}

pub fn flat_plane_reference(l: f64, c: f64) -> Result<PlaneReference> {
    if !(l > 0.0 && l.is_finite() && c.is_finite()) {
        return Err(Error::InvalidParameter("plane needs L > 0 and finite slope".into()));
    }
    let n = (1.0 + c * c).sqrt();
    let area = l * l * n;
    let normal = vec![-c / n, 0.0, 1.0 / n];
    let phi_02 = crate::symtensor::tensor_power(&normal, 2).scaled(area / (4.0 * std::f64::consts::PI));
    Ok(PlaneReference { area, normal, phi_02 })
}

/// One tensor in a result document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub label: String,
    pub tensor: SymTensor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stderr: Option<SymTensor>,
    /// Present for every rank-2 tensor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<Rank2Spectrum>,
}

impl TensorRecord {
    pub fn new(label: impl Into<String>, tensor: SymTensor, stderr: Option<SymTensor>) -> Result<Self> {
        let spectrum = if tensor.rank() == 2 {
            Some(rank2_spectrum(&tensor)?)
        } else {
            None
        };
        Ok(TensorRecord {
            label: label.into(),
            tensor,
            stderr,
            spectrum,
        })
    }
}

/// Everything a command produced, in one JSON object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub command: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_digest: Option<String>,
    pub parameters: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tensors: Vec<TensorRecord>,
    /// Command specific payload (fit diagnostics, raw estimates).
    #[serde(default)]
    pub details: serde_json::Value,
    pub wall_clock_seconds: f64,
}

impl ResultDocument {
    pub fn new(command: Vec<String>, parameters: serde_json::Value) -> Self {
        ResultDocument {
            command,
            input_digest: None,
            parameters,
            seed: None,
            tensors: Vec::new(),
            details: serde_json::Value::Null,
            wall_clock_seconds: 0.0,
        }
    }

    pub fn push(&mut self, label: impl Into<String>, tensor: SymTensor, stderr: Option<SymTensor>) -> Result<()> {
        self.tensors.push(TensorRecord::new(label, tensor, stderr)?);
        Ok(())
    }

    pub fn push_minkowski(&mut self, set: &MinkowskiTensorSet) -> Result<()> {
        for e in &set.phi {
            self.push(
                format!("Phi_{}^{{{},{}}}", e.degree, set.r, set.s),
                e.tensor.clone(),
                Some(e.stderr.clone()),
            )?;
        }
        Ok(())
    }

    pub fn push_surface(&mut self, est: &SurfaceEstimate, d: usize) -> Result<()> {
        self.push(
            format!("Phi_{}^{{{},{}}}", d - 1, est.r, est.s),
            est.tensor.clone(),
            Some(est.stderr.clone()),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_whitespace_points() {
        let c = parse_points("# header\n1,2,3\n4 5 6 # trailing\n\n7,\t8, 9\n").unwrap();
        assert_eq!(c.dim(), 3);
        assert_eq!(c.len(), 3);
        assert_eq!(c.point(2), &[7.0, 8.0, 9.0]);
    }

    #[test]
    fn point_errors_are_distinct() {
        assert!(matches!(
            parse_points("1,2\n3\n"),
            Err(Error::Ragged {
                line: 2,
                expected: 2,
                found: 1
            })
        ));
        assert!(matches!(parse_points("1,x\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_points("# nothing\n"), Err(Error::ZeroPoints)));
    }

    #[test]
    fn voxel_mask_centres() {
        let c = parse_voxel_mask("dims: 2 2\nspacing: 1\n1 1\n1 1\n").unwrap();
        let pts: Vec<&[f64]> = c.points().collect();
        assert_eq!(pts, vec![&[0.5, 0.5][..], &[0.5, 1.5], &[1.5, 0.5], &[1.5, 1.5]]);
        let c = parse_voxel_mask("dims: 2 1 2\nspacing: 2\n0 1\n1 0\n").unwrap();
        let pts: Vec<&[f64]> = c.points().collect();
        assert_eq!(pts, vec![&[1.0, 1.0, 3.0][..], &[3.0, 1.0, 1.0]]);
        assert!(matches!(
            parse_voxel_mask("dims: 2 2\n0 0\n0 0\n"),
            Err(Error::ZeroPoints)
        ));
        assert!(matches!(
            parse_voxel_mask("dims: 2 2\n0 0 1\n"),
            Err(Error::Ragged { .. })
        ));
    }

    #[test]
    fn heightfield_rms_and_cloud() {
        let (nx, c, pitch) = (64usize, 0.3, 0.5);
        let hf = HeightField::from_fn(nx, 8, pitch, |x, _| c * x).unwrap();
        // population standard deviation of c * pitch * i, i = 0..nx
        let want = c * pitch * (((nx * nx - 1) as f64) / 12.0).sqrt();
        assert!((hf.rms - want).abs() < 1e-12);
        let cloud = hf.to_cloud().unwrap();
        assert_eq!(cloud.len(), nx * 8);
        assert_eq!(cloud.point(9), &[0.5, 0.5, c * 0.5]);
        let flat = parse_heightfield("0 0 0\n0 0 0\n", 1.0, 1e-3, "flat").unwrap();
        assert_eq!(flat.rms, 0.0);
        assert!(matches!(
            parse_heightfield("0 0\n0\n", 1.0, 1.0, "x"),
            Err(Error::Ragged { .. })
        ));
    }

    #[test]
    fn plane_reference() {
        let p = flat_plane_reference(3.0, 0.0).unwrap();
        assert!((p.area - 9.0).abs() < 1e-12);
        let area = crate::surface::surface_area_from_trace(&p.phi_02).unwrap();
        assert!((area - 9.0).abs() < 1e-12);
        let t = flat_plane_reference(1.0, 1.0).unwrap();
        assert!((t.area - 2f64.sqrt()).abs() < 1e-12);
        let s = rank2_spectrum(&t.phi_02).unwrap();
        let v = &s.eigenvectors[0];
        assert!((v[0].abs() - 0.5f64.sqrt()).abs() < 1e-12 && v[1].abs() < 1e-12);
        assert!(s.anisotropy_ratio.abs() < 1e-12);
    }

    #[test]
    fn document_round_trip_is_byte_identical() {
        let mut doc = ResultDocument::new(
            vec!["mtensor".into(), "oracle".into()],
            serde_json::json!({"sides": [3.0, 5.0], "r": 0, "s": 2}),
        );
        doc.seed = Some(7);
        doc.input_digest = Some(digest_bytes(b"abc"));
        doc.push("t", crate::symtensor::metric(2).scaled(0.1 + 0.2), None)
            .unwrap();
        doc.push("v", SymTensor::from_fn(2, 1, |i| i[0] as f64 / 3.0), None)
            .unwrap();
        doc.wall_clock_seconds = 0.125;
        let a = doc.to_json().unwrap();
        let back = ResultDocument::from_json(&a).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.to_json().unwrap(), a);
        assert!(doc.tensors[0].spectrum.is_some() && doc.tensors[1].spectrum.is_none());
        assert_eq!(
            doc.input_digest.as_deref(),
            Some("ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad")
        );
    }
}
