use std::path::Path;
use std::process::{Command, Output};

use mtensor::io::ResultDocument;
use serde_json::Value;

fn mtensor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtensor"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn doc(out: &Output) -> ResultDocument {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    ResultDocument::from_json(std::str::from_utf8(&out.stdout).unwrap()).expect("result document")
}

fn scalar(d: &ResultDocument, label: &str) -> f64 {
    d.tensors
        .iter()
        .find(|t| t.label == label)
        .unwrap_or_else(|| panic!("no tensor {label}"))
        .tensor
        .as_scalar()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn beta_expected_surface_closed_form() {
    let d = doc(&mtensor(&[
        "oracle", "beta-ev", "--d", "2", "--l", "10", "--beta", "-0.5",
    ]));
    let v = scalar(&d, "E V_1");
    assert!((v - 9.0 * std::f64::consts::PI / 11.0).abs() < 1e-12);
    assert!((v - 2.57).abs() < 5e-3);
}

#[test]
fn box_oracle_reports_spectrum() {
    let d = doc(&mtensor(&["oracle", "box", "--sides", "3,5", "--k", "1", "--s", "2"]));
    let rec = &d.tensors[0];
    assert_eq!(rec.label, "Phi_1^{0,2}");
    assert!((rec.tensor.get(&[0, 0]) - 5.0 / (4.0 * std::f64::consts::PI)).abs() < 1e-12);
    let spec = rec.spectrum.as_ref().expect("rank 2 carries a spectrum");
    assert!((spec.anisotropy_ratio - 0.6).abs() < 1e-12);
}

#[test]
fn all_box_degrees_when_k_is_omitted() {
    let d = doc(&mtensor(&["oracle", "box", "--sides", "3,5"]));
    assert_eq!(d.tensors.len(), 3);
    assert!((scalar(&d, "Phi_2^{0,0}") - 15.0).abs() < 1e-12);
    assert!((scalar(&d, "Phi_1^{0,0}") - 8.0).abs() < 1e-12);
    assert!((scalar(&d, "Phi_0^{0,0}") - 1.0).abs() < 1e-12);
}

#[test]
fn rmax_and_window_conflict() {
    let out = mtensor(&["estimate", "--input", "x.csv", "--rmax", "1", "--window", "0,1,0,1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes_by_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    assert_eq!(mtensor(&["estimate", "--input", path(&missing)]).status.code(), Some(3));

    let ragged = dir.path().join("ragged.csv");
    std::fs::write(&ragged, "0,0\n1,0,2\n").unwrap();
    let out = mtensor(&["estimate", "--input", path(&ragged)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ragged"));

    let pts = dir.path().join("pts.csv");
    std::fs::write(&pts, "0,0\n1,0\n0,1\n1,1\n").unwrap();
    let out = mtensor(&[
        "surface",
        "--input",
        path(&pts),
        "--s",
        "0",
        "--eps",
        "0.1",
        "--a",
        "0.01",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // radii squeezed together: the design matrix is numerically singular
    let out = mtensor(&["estimate", "--input", path(&pts), "--r1", "1", "--rmax", "1.0000001"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));

    let out = mtensor(&["estimate", "--input", path(&pts), "--min-points", "10"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn sample_estimate_round_trip_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("square.csv");
    let sampled = doc(&mtensor(&[
        "sample",
        "box",
        "--sides",
        "1,1",
        "--a",
        "0.05",
        "--out",
        path(&csv),
    ]));
    assert_eq!(sampled.details["points"], Value::from(441));

    let run = |json: &Path| {
        let out = mtensor(&[
            "estimate",
            "--input",
            path(&csv),
            "--s",
            "2",
            "--n",
            "10",
            "--rmax",
            "0.5",
            "--renditions",
            "2",
            "--seed",
            "7",
            "--rotate",
            "--json-out",
            path(json),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read_to_string(json).unwrap()
    };
    let first = run(&dir.path().join("a.json"));
    let second = run(&dir.path().join("b.json"));

    let mut a = ResultDocument::from_json(&first).unwrap();
    assert_eq!(a.to_json().unwrap() + "\n", first);
    let mut b = ResultDocument::from_json(&second).unwrap();
    a.wall_clock_seconds = 0.0;
    b.wall_clock_seconds = 0.0;
    // the command echo differs only in the output path
    a.command.clear();
    b.command.clear();
    assert_eq!(a, b);

    assert_eq!(a.seed, Some(7));
    assert_eq!(a.details["seeds"], serde_json::json!([7, 8]));
    assert!(a.input_digest.as_deref().is_some_and(|h| h.len() == 64));
    for rec in &a.tensors {
        if rec.tensor.rank() == 2 {
            let ratio = rec.spectrum.as_ref().unwrap().anisotropy_ratio;
            assert!((0.0..=1.0).contains(&ratio));
        }
    }
    // unit square: Phi_1^{0,2} = Q / (4 pi)
    let t = &a.tensors.iter().find(|t| t.label == "Phi_1^{0,2}").unwrap().tensor;
    let want = 1.0 / (4.0 * std::f64::consts::PI);
    assert!((t.get(&[0, 0]) - want).abs() < 0.05 * want, "{}", t.get(&[0, 0]));
}

#[test]
fn voxel_mask_batch_with_min_points() {
    let dir = tempfile::tempdir().unwrap();
    let big = dir.path().join("big.mask");
    let mut text = String::from("dims: 20 20\nspacing: 0.1\n");
    for _ in 0..20 {
        text.push_str(&"1 ".repeat(20));
        text.push('\n');
    }
    std::fs::write(&big, text).unwrap();
    let small = dir.path().join("small.mask");
    std::fs::write(&small, "dims: 2 2\nspacing: 0.1\n1 1\n1 1\n").unwrap();

    let out = mtensor(&[
        "estimate",
        "--input",
        path(&big),
        path(&small),
        "--format",
        "voxel-mask",
        "--min-points",
        "100",
        "--n",
        "10",
        "--rmax",
        "0.5",
        "--renditions",
        "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let docs: Vec<ResultDocument> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(docs.len(), 1);
    let area = scalar(&docs[0], "Phi_2^{0,0}");
    // 2 x 2 square of voxel centres spanning 1.9
    assert!((area - 1.9 * 1.9).abs() < 0.05 * 3.61, "{area}");
}

#[test]
fn synthetic_plane_heightfield() {
    let d = doc(&mtensor(&[
        "heightfield",
        "--plane-slope",
        "0.5",
        "--pixels",
        "40",
        "--pitch",
        "0.1",
        "--n",
        "50",
        "--rn-factor",
        "24",
        "--renditions",
        "1",
    ]));
    let area = d.details["area_from_trace"].as_f64().unwrap();
    let want = d.details["reference"]["area"].as_f64().unwrap();
    assert!((want - 3.9 * 3.9 * 1.25f64.sqrt()).abs() < 1e-12);
    assert!((area - want).abs() < 0.03 * want, "{area} vs {want}");
    let dir: Vec<f64> = serde_json::from_value(d.details["dominant_direction"].clone()).unwrap();
    let normal = [-0.5 / 1.25f64.sqrt(), 0.0, 1.0 / 1.25f64.sqrt()];
    let cos: f64 = dir.iter().zip(normal).map(|(a, b)| a * b).sum();
    assert!(cos.abs() > 0.99, "{cos}");
}

#[test]
fn beta_sample_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let args = [
            "sample",
            "beta",
            "--d",
            "3",
            "--l",
            "50",
            "--beta",
            "0.5",
            "--out",
            path(p),
            "--seed",
            "3",
        ];
        assert!(mtensor(&args).status.success());
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 50);
}
