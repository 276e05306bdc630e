use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Value};

use mtensor::io::{
    digest_bytes, digest_file, flat_plane_reference, load_heightfield, load_points, HeightField, PointFormat,
    ResultDocument,
};
use mtensor::lsq::{equidistant_radii, estimate_minkowski_multi, OuterRadius, RadiusSchedule};
use mtensor::oracles::{
    beta_expected_intrinsic_volume, beta_expected_tensor, beta_expected_volume_mc, box_minkowski, cut_box_surface,
    rounded_box_2d, sample_beta_polytope, shell_minkowski, BetaPolytopeSpec,
};
use mtensor::shape::ShapeSpec;
use mtensor::spatial::{avg_nn_distance, grid_intersect_shape, min_pairwise_distance, ObservationWindow, PointCloud};
use mtensor::surface::{
    estimate_surface_scalar_diff, estimate_surface_tensor, surface_area_from_trace, SurfaceOptions,
};
use mtensor::symtensor::{rank2_spectrum, SymTensor};
use mtensor::voronoi::{estimate_series_multi, SeriesOptions};
use mtensor::{Error, Result};

use crate::args::{EstimateArgs, FormatArg, HeightfieldArgs, OracleCommand, SampleCommand, SurfaceArgs};

/// Flags shared by every command.
pub struct Global {
    pub seed: u64,
    pub renditions: usize,
    pub argv: Vec<String>,
}

/// What a command prints: one document, or one per batch job.
pub enum Output {
    One(Box<ResultDocument>),
    Many(Vec<ResultDocument>),
}

fn format(f: FormatArg) -> PointFormat {
    match f {
        FormatArg::Csv => PointFormat::Csv,
        FormatArg::VoxelMask => PointFormat::VoxelMask,
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub fn estimate(args: &EstimateArgs, g: &Global) -> Result<Output> {
    if args.n < 2 {
        return Err(bad("--n must be at least 2"));
    }
    let job = |(j, path): (usize, &std::path::PathBuf)| -> Result<Option<ResultDocument>> {
        // batch jobs get disjoint seed ranges
        let seed = g.seed.wrapping_add((j as u64) << 32);
        estimate_one(path, args, g, seed)
    };
    #[cfg(feature = "parallel")]
    let docs: Vec<Option<ResultDocument>> = {
        use rayon::prelude::*;
        args.input.par_iter().enumerate().map(job).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let docs: Vec<Option<ResultDocument>> = args.input.iter().enumerate().map(job).collect::<Result<_>>()?;

    let mut docs: Vec<ResultDocument> = docs.into_iter().flatten().collect();
    match (args.input.len(), docs.len()) {
        (_, 0) => Err(Error::TooFewPoints {
            needed: args.min_points,
            got: 0,
        }),
        (1, _) => Ok(Output::One(Box::new(docs.remove(0)))),
        _ => Ok(Output::Many(docs)),
    }
}

fn estimate_one(path: &Path, args: &EstimateArgs, g: &Global, seed: u64) -> Result<Option<ResultDocument>> {
    let cloud = load_points(path, format(args.format))?;
    if cloud.len() < args.min_points {
        log::warn!(
            "{}: {} points, below --min-points {}; skipped",
            path.display(),
            cloud.len(),
            args.min_points
        );
        return Ok(None);
    }
    let av = avg_nn_distance(&cloud)?;
    let nearest = min_pairwise_distance(&cloud)?;
    let r1 = args.r1.unwrap_or(av);
    let outer = match (&args.rmax, &args.window, &args.rn_factor) {
        (Some(r), _, _) => OuterRadius::Fixed(*r),
        (_, Some(w), _) => {
            let w = ObservationWindow::from_flat(w)?;
            if w.dim() != cloud.dim() {
                return Err(Error::DimensionMismatch(w.dim(), cloud.dim()));
            }
            OuterRadius::Window(w)
        }
        (_, _, Some(f)) => OuterRadius::Fixed(f * r1),
        _ => OuterRadius::Default,
    };
    let mut sched = RadiusSchedule::for_cloud(&cloud, args.n, &outer)?;
    if args.r1.is_some() || args.a.is_some() {
        let rn = *sched.radii.last().expect("nonempty schedule");
        sched = RadiusSchedule::new(equidistant_radii(r1, rn, args.n)?, args.a.unwrap_or(av))?;
        sched.check_gaps(av);
    }
    let sched = sched.renditions(g.renditions).seed(seed).rotate(args.rotate);

    let sets = estimate_minkowski_multi(&cloud, &[(args.r, args.s)], &sched)?;
    let set = &sets[0];
    let mut doc = ResultDocument::new(
        g.argv.clone(),
        json!({
            "input": path.display().to_string(),
            "format": format(args.format),
            "dim": cloud.dim(),
            "points": cloud.len(),
            "r": args.r,
            "s": args.s,
            "n": args.n,
            "r1": sched.radii[0],
            "rn": sched.radii[args.n - 1],
            "spacing": sched.spacing,
            "renditions": sched.renditions,
            "rotate": sched.rotate,
            "min_points": args.min_points,
        }),
    );
    doc.input_digest = Some(digest_file(path)?);
    doc.seed = Some(seed);
    doc.push_minkowski(set)?;
    let mut details = json!({
        "avg_nn_distance": av,
        "min_pairwise_distance": nearest.distance,
        "duplicate_points": nearest.duplicate,
        "radii": sched.radii,
        "seeds": set.meta.seeds,
        "grid_points": set.meta.grid_points,
        "fit_residuals": set.meta.fit_residuals,
        "condition": set.meta.condition,
    });
    if args.dump_voronoi_series {
        let opts = SeriesOptions::new(sched.spacing, seed).rotate(sched.rotate);
        let series = estimate_series_multi(&cloud, &sched.radii, &[(args.r, args.s)], &opts)?;
        details["voronoi_series"] = serde_json::to_value(&series[0])?;
    }
    doc.details = details;
    Ok(Some(doc))
}

pub fn surface(args: &SurfaceArgs, g: &Global) -> Result<Output> {
    let cloud = load_points(&args.input, format(args.format))?;
    let d = cloud.dim();
    let opts = SurfaceOptions::new(args.eps, args.a, g.seed)
        .renditions(g.renditions)
        .rotate(args.rotate);
    let est = match (args.difference, args.s) {
        (true, 0) => estimate_surface_scalar_diff(&cloud, args.r, &opts)?,
        (true, _) => return Err(bad("--difference only applies to s = 0")),
        (false, 0) => return Err(bad("s = 0 needs --difference (and a <= eps^2)")),
        (false, s) => estimate_surface_tensor(&cloud, args.r, s, &opts)?,
    };
    let mut doc = ResultDocument::new(
        g.argv.clone(),
        json!({
            "input": args.input.display().to_string(),
            "format": format(args.format),
            "dim": d,
            "points": cloud.len(),
            "r": args.r,
            "s": args.s,
            "eps": args.eps,
            "spacing": args.a,
            "renditions": g.renditions,
            "rotate": args.rotate,
            "difference": args.difference,
        }),
    );
    doc.input_digest = Some(digest_file(&args.input)?);
    doc.seed = Some(g.seed);
    doc.push_surface(&est, d)?;
    doc.details = json!({
        "seeds": est.seeds,
        "area_from_trace": est.area_from_trace,
    });
    Ok(Output::One(Box::new(doc)))
}

pub fn oracle(cmd: &OracleCommand, g: &Global) -> Result<Output> {
    let mut doc = ResultDocument::new(g.argv.clone(), Value::Null);
    match cmd {
        OracleCommand::Box { sides, center, k, r, s } => {
            let center = center.clone().unwrap_or_else(|| vec![0.0; sides.len()]);
            doc.parameters = json!({"body": "box", "sides": sides, "center": center, "r": r, "s": s});
            for k in degrees(*k, sides.len()) {
                doc.push(label(k, *r, *s), box_minkowski(sides, &center, k, *r, *s)?, None)?;
            }
        }
        OracleCommand::Shell { d, rho1, rho2, k, r, s } => {
            doc.parameters = json!({"body": "shell", "d": d, "rho1": rho1, "rho2": rho2, "r": r, "s": s});
            for k in degrees(*k, *d) {
                doc.push(label(k, *r, *s), shell_minkowski(*d, *rho1, *rho2, k, *r, *s)?, None)?;
            }
        }
        OracleCommand::CutBox { inner, outer, r, s } => {
            doc.parameters = json!({"body": "cut_box", "inner": inner, "outer": outer, "r": r, "s": s});
            let t = cut_box_surface([inner[0], inner[1]], [outer[0], outer[1]], *r, *s)?;
            doc.push(label(1, *r, *s), t, None)?;
        }
        OracleCommand::RoundedBox { a1, a2, r0 } => {
            doc.parameters = json!({"body": "rounded_box", "a1": a1, "a2": a2, "r0": r0});
            let v = rounded_box_2d(*a1, *a2, *r0)?;
            doc.push(label(0, 0, 0), SymTensor::scalar(2, v.phi0), None)?;
            doc.push(label(1, 0, 0), SymTensor::scalar(2, v.phi1), None)?;
            doc.push(label(2, 0, 0), SymTensor::scalar(2, v.phi2), None)?;
            doc.push(label(1, 0, 2), v.phi1_02, None)?;
        }
        OracleCommand::BetaEv { d, l, beta, k, hulls } => {
            let k = k.unwrap_or(d.saturating_sub(1));
            doc.parameters = json!({"body": "beta_polytope", "d": d, "l": l, "beta": beta, "k": k});
            if k == *d {
                let mc = beta_expected_volume_mc(*d, *l, *beta, *hulls, g.seed)?;
                doc.seed = Some(g.seed);
                doc.push(
                    format!("E V_{k}"),
                    SymTensor::scalar(*d, mc.mean),
                    Some(SymTensor::scalar(*d, mc.stderr)),
                )?;
                doc.details = json!({"method": "monte_carlo", "hulls": mc.samples});
            } else {
                let v = beta_expected_intrinsic_volume(*d, k, *l, *beta)?;
                doc.push(format!("E V_{k}"), SymTensor::scalar(*d, v), None)?;
            }
        }
        OracleCommand::BetaTensor { d, k, l, beta, s } => {
            doc.parameters = json!({"body": "beta_polytope", "d": d, "l": l, "beta": beta, "k": k, "s": s});
            let t = beta_expected_tensor(*d, *k, *l, *beta, *s)?;
            doc.push(format!("E {}", label(*k, 0, *s)), t, None)?;
        }
    }
    Ok(Output::One(Box::new(doc)))
}

fn degrees(k: Option<usize>, d: usize) -> Vec<usize> {
    match k {
        Some(k) => vec![k],
        None => (0..=d).rev().collect(),
    }
}

fn label(k: usize, r: usize, s: usize) -> String {
    format!("Phi_{k}^{{{r},{s}}}")
}

pub fn sample(cmd: &SampleCommand, g: &Global) -> Result<Output> {
    let lattice = |shape: ShapeSpec, a: f64| -> Result<(Value, PointCloud)> {
        let params = json!({"shape": shape, "a": a});
        Ok((params, grid_intersect_shape(&shape, a)?))
    };
    let (params, cloud, out) = match cmd {
        SampleCommand::Box { sides, center, out } => {
            let center = center.clone().unwrap_or_else(|| vec![0.0; sides.len()]);
            let (p, c) = lattice(
                ShapeSpec::Box {
                    sides: sides.clone(),
                    center,
                },
                out.a,
            )?;
            (p, c, &out.out)
        }
        SampleCommand::Shell { d, rho1, rho2, out } => {
            let shape = ShapeSpec::Shell {
                dim: *d,
                rho1: *rho1,
                rho2: *rho2,
            };
            let (p, c) = lattice(shape, out.a)?;
            (p, c, &out.out)
        }
        SampleCommand::CutBox { inner, outer, out } => {
            let shape = ShapeSpec::CutBox {
                inner: [inner[0], inner[1]],
                outer: [outer[0], outer[1]],
            };
            let (p, c) = lattice(shape, out.a)?;
            (p, c, &out.out)
        }
        SampleCommand::RoundedBox { a1, a2, r0, out } => {
            let shape = ShapeSpec::RoundedBox2d {
                a1: *a1,
                a2: *a2,
                r0: *r0,
            };
            let (p, c) = lattice(shape, out.a)?;
            (p, c, &out.out)
        }
        SampleCommand::Beta { d, l, beta, out, a } => {
            let spec = BetaPolytopeSpec {
                d: *d,
                l: *l,
                beta: *beta,
                seed: g.seed,
            };
            let vertices = sample_beta_polytope(&spec)?;
            match a {
                Some(a) => {
                    let (mut p, c) = lattice(ShapeSpec::Polytope { vertices }, *a)?;
                    p["beta_polytope"] = serde_json::to_value(spec)?;
                    (p, c, out)
                }
                None => (json!({"beta_polytope": spec}), PointCloud::from_points(&vertices)?, out),
            }
        }
    };
    let text = write_csv(&cloud);
    std::fs::write(out, &text)?;
    let mut doc = ResultDocument::new(g.argv.clone(), params);
    doc.seed = Some(g.seed);
    doc.input_digest = Some(digest_bytes(text.as_bytes()));
    doc.details = json!({
        "output": out.display().to_string(),
        "dim": cloud.dim(),
        "points": cloud.len(),
    });
    Ok(Output::One(Box::new(doc)))
}

/// Comma separated, shortest round-trip representation of each coordinate.
fn write_csv(cloud: &PointCloud) -> String {
    let mut s = String::new();
    for p in cloud.points() {
        for (j, x) in p.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            let _ = write!(s, "{x:?}");
        }
        s.push('\n');
    }
    s
}

pub fn heightfield(args: &HeightfieldArgs, g: &Global) -> Result<Output> {
    let (hf, digest) = match (&args.input, args.plane_slope) {
        (Some(path), _) => (
            load_heightfield(path, args.pitch, args.scale)?,
            Some(digest_file(path)?),
        ),
        (None, Some(c)) => {
            let hf = HeightField::from_fn(args.pixels, args.pixels, args.pitch, |x, _| c * x * args.scale)?;
            (hf, None)
        }
        (None, None) => return Err(bad("need --input or --plane-slope")),
    };
    if args.n < 2 {
        return Err(bad("--n must be at least 2"));
    }
    let cloud = hf.to_cloud()?;
    let av = avg_nn_distance(&cloud)?;
    let sched = RadiusSchedule::new(equidistant_radii(av, args.rn_factor * av, args.n)?, av)?
        .renditions(g.renditions)
        .seed(g.seed)
        .rotate(args.rotate);
    sched.check_gaps(av);
    let sets = estimate_minkowski_multi(&cloud, &[(0, 0), (0, 2)], &sched)?;
    let t02 = sets[1].get(2).expect("degree d - 1 present");
    let area = surface_area_from_trace(t02)?;
    let spectrum = rank2_spectrum(t02)?;

    let mut doc = ResultDocument::new(
        g.argv.clone(),
        json!({
            "input": args.input.as_ref().map(|p| p.display().to_string()),
            "plane_slope": args.plane_slope,
            "nx": hf.nx,
            "ny": hf.ny,
            "pitch": hf.pitch,
            "scale": args.scale,
            "n": args.n,
            "r1": sched.radii[0],
            "rn": sched.radii[args.n - 1],
            "spacing": sched.spacing,
            "renditions": sched.renditions,
            "rotate": sched.rotate,
        }),
    );
    doc.input_digest = digest;
    doc.seed = Some(g.seed);
    for set in &sets {
        doc.push_minkowski(set)?;
    }
    let mut details = json!({
        "rms_height": hf.rms,
        "avg_nn_distance": av,
        "area_from_trace": area,
        "anisotropy_ratio": spectrum.anisotropy_ratio,
        "dominant_direction": spectrum.eigenvectors[0],
        "seeds": sets[0].meta.seeds,
        "condition": sets[0].meta.condition,
    });
    if let (None, Some(c)) = (&args.input, args.plane_slope) {
        // the sampled sheet spans (pixels - 1) pitches per side
        let reference = flat_plane_reference((args.pixels - 1) as f64 * args.pitch, c * args.scale)?;
        details["reference"] = serde_json::to_value(&reference)?;
    }
    doc.details = details;
    Ok(Output::One(Box::new(doc)))
}
