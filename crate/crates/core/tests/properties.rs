//! Invariants of the tensor algebra, the spatial primitives and the oracles.

use std::f64::consts::PI;

use mtensor::oracles::{
    beta_expected_surface, beta_expected_tensor, beta_surface_closed_form, beta_surface_quadrature, box_minkowski,
    cut_box_surface, rounded_box_2d, shell_minkowski, steiner_voronoi_series, SteinerBody,
};
use mtensor::shape::ShapeSpec;
use mtensor::spatial::{grid_intersect_shape, PointCloud};
use mtensor::symtensor::{
    metric_power, multi_indices, multiindex_coefficient, rank2_spectrum, sphere_moment, sym_product, tensor_power,
    trace2, value_from_coefficient, SymTensor,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn tensor(d: usize, p: usize) -> impl Strategy<Value = SymTensor> {
    let n = multi_indices(d, p).len();
    prop::collection::vec(-2.0..2.0f64, n).prop_map(move |v| SymTensor::from_values(d, p, v).unwrap())
}

fn close(a: &SymTensor, b: &SymTensor, tol: f64) -> bool {
    a.max_abs_diff(b).unwrap() <= tol * (1.0 + a.max_abs().max(b.max_abs()))
}

proptest! {
    #[test]
    fn evaluation_is_permutation_invariant(t in tensor(3, 3), perm in Just([2usize, 0, 1]), idx in prop::array::uniform3(0..3usize)) {
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        let shuffled: Vec<usize> = perm.iter().map(|&k| idx[k]).collect();
        prop_assert_eq!(t.get(&shuffled), t.get(&sorted));
        let e = |i: usize| { let mut v = vec![0.0; 3]; v[i] = 1.0; v };
        let args: Vec<Vec<f64>> = shuffled.iter().map(|&i| e(i)).collect();
        let refs: Vec<&[f64]> = args.iter().map(Vec::as_slice).collect();
        prop_assert!((t.evaluate(&refs).unwrap() - t.get(&sorted)).abs() < 1e-12);
    }

    #[test]
    fn sym_product_commutes((d, a, b) in (1..=4usize).prop_flat_map(|d| (Just(d), 0..=2usize, 0..=2usize))
        .prop_flat_map(|(d, p, q)| (Just(d), tensor(d, p), tensor(d, q)))) {
        let ab = sym_product(&a, &b).unwrap();
        let ba = sym_product(&b, &a).unwrap();
        prop_assert!(close(&ab, &ba, 1e-12), "d = {}", d);
    }

    #[test]
    fn sym_product_associates((a, b, c) in (1..=4usize).prop_flat_map(|d| (0..=2usize, 0..=2usize, 0..=2usize)
        .prop_flat_map(move |(p, q, r)| (tensor(d, p), tensor(d, q), tensor(d, r))))) {
        let left = sym_product(&sym_product(&a, &b).unwrap(), &c).unwrap();
        let right = sym_product(&a, &sym_product(&b, &c).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-12));
    }

    #[test]
    fn tensor_power_is_product_of_inner_products(
        (v, xs) in (1..=4usize, 0..=4usize).prop_flat_map(|(d, p)| (
            prop::collection::vec(-2.0..2.0f64, d),
            prop::collection::vec(prop::collection::vec(-2.0..2.0f64, d), p),
        ))
    ) {
        let t = tensor_power(&v, xs.len());
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let want: f64 = xs.iter().map(|x| x.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>()).product();
        prop_assert!((t.evaluate(&refs).unwrap() - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }

    #[test]
    fn spectrum_reconstructs(t in (1..=4usize).prop_flat_map(|d| tensor(d, 2))) {
        let d = t.dim();
        let s = rank2_spectrum(&t).unwrap();
        prop_assert!((0.0..=1.0).contains(&s.anisotropy_ratio));
        for i in 0..d {
            for j in 0..d {
                let m: f64 = (0..d).map(|k| s.eigenvalues[k] * s.eigenvectors[k][i] * s.eigenvectors[k][j]).sum();
                prop_assert!((m - t.get(&[i, j])).abs() < 1e-10 * (1.0 + t.max_abs()));
                let dot: f64 = (0..d).map(|k| s.eigenvectors[i][k] * s.eigenvectors[j][k]).sum();
                prop_assert!((dot - f64::from(u8::from(i == j))).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn coefficient_conversion_round_trips(t in tensor(3, 4)) {
        for idx in t.indices() {
            let c = multiindex_coefficient(&t, &idx).unwrap();
            // m v / m can be off by one rounding for multinomials that are not powers of two
            let v = t.get(&idx);
            prop_assert!((value_from_coefficient(3, &idx, c) - v).abs() <= 2.0 * f64::EPSILON * v.abs());
        }
    }

    #[test]
    fn nearest_matches_linear_scan(
        (d, pts, qs) in (1..=3usize).prop_flat_map(|d| (
            Just(d),
            prop::collection::vec(prop::collection::vec(-5.0..5.0f64, d), 1..500),
            prop::collection::vec(prop::collection::vec(-6.0..6.0f64, d), 1..20),
        ))
    ) {
        let cloud = PointCloud::from_points(&pts).unwrap();
        for q in &qs {
            let (i, dist) = cloud.nearest(q);
            let d2 = |p: &Vec<f64>| p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let best = pts.iter().map(d2).fold(f64::INFINITY, f64::min);
            let first = pts.iter().position(|p| d2(p) == best).unwrap();
            prop_assert_eq!(i, first, "d = {}", d);
            prop_assert!((dist - best.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn box_oracle_is_homogeneous(
        sides in prop::collection::vec(0.2..3.0f64, 2..=3),
        k in 0..=3usize, r in 0..=2usize, s in 0..=2usize,
    ) {
        prop_assume!(k <= sides.len());
        let d = sides.len();
        let center = vec![0.0; d];
        let base = box_minkowski(&sides, &center, k, r, s).unwrap();
        let big: Vec<f64> = sides.iter().map(|a| 2.0 * a).collect();
        let scaled = box_minkowski(&big, &center, k, r, s).unwrap();
        prop_assert!(close(&scaled, &base.scaled(2f64.powi((k + r) as i32)), 1e-12));
    }

    #[test]
    fn box_oracle_translates(sides in prop::collection::vec(0.2..3.0f64, 2..=3), shift in prop::collection::vec(-2.0..2.0f64, 3)) {
        let d = sides.len();
        let t = &shift[..d];
        for k in 0..=d {
            let at0 = box_minkowski(&sides, &vec![0.0; d], k, 1, 0).unwrap();
            let moved = box_minkowski(&sides, t, k, 1, 0).unwrap();
            let scalar = box_minkowski(&sides, &vec![0.0; d], k, 0, 0).unwrap().as_scalar();
            let want = at0.add_scaled(&SymTensor::from_values(d, 1, t.to_vec()).unwrap(), scalar).unwrap();
            prop_assert!(close(&moved, &want, 1e-12));
        }
    }

    #[test]
    fn trace_identity_for_box_and_shell(sides in prop::collection::vec(0.2..3.0f64, 2..=3), rho1 in 0.0..1.0f64, gap in 0.1..2.0f64) {
        let d = sides.len();
        let t = box_minkowski(&sides, &vec![0.0; d], d - 1, 0, 2).unwrap();
        let v = box_minkowski(&sides, &vec![0.0; d], d - 1, 0, 0).unwrap().as_scalar();
        prop_assert!((4.0 * PI * trace2(&t).unwrap() - v).abs() < 1e-12 * v);
        let t = shell_minkowski(d, rho1, rho1 + gap, d - 1, 0, 2).unwrap();
        let v = shell_minkowski(d, rho1, rho1 + gap, d - 1, 0, 0).unwrap().as_scalar();
        prop_assert!((4.0 * PI * trace2(&t).unwrap() - v).abs() < 1e-12 * v);
    }

    #[test]
    fn shell_odd_total_rank_vanishes(d in 2..=4usize, rho1 in 0.0..1.0f64, k in 0..4usize, r in 0..=3usize, s in 1..=3usize) {
        prop_assume!(k < d && (r + s) % 2 == 1);
        let t = shell_minkowski(d, rho1, rho1 + 1.0, k, r, s).unwrap();
        prop_assert_eq!(t.max_abs(), 0.0);
    }

    #[test]
    fn steiner_series_is_the_parallel_volume(sides in prop::collection::vec(0.1..3.0f64, 2..=3), radius in 0.01..2.0f64) {
        // Box parallel volume by inclusion over faces: prod(a_i + 2R) minus the rounded corners
        let v = steiner_voronoi_series(&SteinerBody::Box { sides: sides.clone() }, &[radius]).unwrap()[0];
        let want = match sides.as_slice() {
            [a, b] => a * b + 2.0 * radius * (a + b) + PI * radius * radius,
            [a, b, c] => a * b * c
                + 2.0 * radius * (a * b + b * c + a * c)
                + PI * radius * radius * (a + b + c)
                + 4.0 / 3.0 * PI * radius.powi(3),
            _ => unreachable!(),
        };
        prop_assert!((v - want).abs() < 1e-12 * want);
    }
}

#[test]
fn metric_trace_is_dimension() {
    for d in 1..=6 {
        assert_eq!(trace2(&metric_power(d, 1)).unwrap(), d as f64);
    }
}

#[test]
fn sphere_moment_matches_monte_carlo() {
    const N: usize = 10_000_000;
    for d in [2usize, 3] {
        for p in [2usize, 4] {
            let exact = sphere_moment(d, p);
            let idx = exact.indices();
            let mut rng = ChaCha8Rng::seed_from_u64((10 * d + p) as u64);
            let mut sum = vec![0.0; idx.len()];
            let mut sq = vec![0.0; idx.len()];
            let mut u = vec![0.0; d];
            for _ in 0..N {
                u.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
                let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                for (m, ix) in idx.iter().enumerate() {
                    let v: f64 = ix.iter().map(|&i| u[i] / n).product();
                    sum[m] += v;
                    sq[m] += v * v;
                }
            }
            let area = mtensor::symtensor::omega(d);
            for (m, ix) in idx.iter().enumerate() {
                let mean = sum[m] / N as f64;
                let se = ((sq[m] / N as f64 - mean * mean) / N as f64).sqrt();
                let got = area * mean;
                let want = exact.get(ix);
                assert!(
                    (got - want).abs() <= 3.0 * area * se + 1e-12,
                    "d={d} p={p} {ix:?}: {got} vs {want}"
                );
            }
        }
    }
}

#[test]
fn lattice_hausdorff_approximates_shapes() {
    let shapes = [
        (ShapeSpec::centered_box(vec![3.0, 5.0]), 0.05),
        (ShapeSpec::centered_box(vec![1.0, 2.0, 3.0]), 0.1),
        (
            ShapeSpec::Shell {
                dim: 2,
                rho1: 1.0,
                rho2: 2.0,
            },
            0.05,
        ),
        (
            ShapeSpec::CutBox {
                inner: [1.0, 2.0],
                outer: [3.0, 5.0],
            },
            0.05,
        ),
        (
            ShapeSpec::RoundedBox2d {
                a1: 1.0,
                a2: 2.0,
                r0: 0.3,
            },
            0.05,
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (shape, a) in &shapes {
        let cloud = grid_intersect_shape(shape, *a).unwrap();
        let bound = a * (shape.dim() as f64).sqrt() + 1e-12;
        for _ in 0..500 {
            let x = boundary_sample(shape, &mut rng);
            let (_, dist) = cloud.nearest(&x);
            assert!(dist <= bound, "{shape:?}: {x:?} at {dist}");
        }
    }
}

fn boundary_sample(shape: &ShapeSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match shape {
        ShapeSpec::Box { sides, center } => {
            let d = sides.len();
            let face = rng.random_range(0..d);
            let sign = if rng.random::<bool>() { 0.5 } else { -0.5 };
            (0..d)
                .map(|i| center[i] + sides[i] * if i == face { sign } else { rng.random::<f64>() - 0.5 })
                .collect()
        }
        ShapeSpec::Shell { rho1, rho2, .. } => {
            let t = rng.random::<f64>() * 2.0 * PI;
            let rho = if rng.random::<bool>() { *rho1 } else { *rho2 };
            vec![rho * t.cos(), rho * t.sin()]
        }
        ShapeSpec::CutBox { inner, outer } => {
            let sides = if rng.random::<bool>() { inner } else { outer };
            boundary_sample(&ShapeSpec::centered_box(sides.to_vec()), rng)
        }
        ShapeSpec::RoundedBox2d { a1, a2, r0 } => {
            // nearest point of the rectangle plus r0 in a random outward direction
            let p = [(rng.random::<f64>() - 0.5) * a1, (rng.random::<f64>() - 0.5) * a2];
            let t = rng.random::<f64>() * 2.0 * PI;
            let q = [p[0] + r0 * t.cos(), p[1] + r0 * t.sin()];
            let clamp = [q[0].clamp(-a1 / 2.0, a1 / 2.0), q[1].clamp(-a2 / 2.0, a2 / 2.0)];
            let (dx, dy) = (q[0] - clamp[0], q[1] - clamp[1]);
            let n = (dx * dx + dy * dy).sqrt();
            if n == 0.0 {
                // inside the core rectangle: push to the top edge
                vec![p[0], a2 / 2.0 + r0]
            } else {
                vec![clamp[0] + r0 * dx / n, clamp[1] + r0 * dy / n]
            }
        }
        ShapeSpec::Polytope { .. } => unreachable!(),
    }
}

#[test]
fn cut_box_with_vanishing_hole_is_the_box() {
    for (r, s) in [(0, 0), (0, 2), (2, 0), (1, 1), (0, 4)] {
        let cut = cut_box_surface([1e-300, 1e-300], [3.0, 5.0], r, s).unwrap();
        let plain = box_minkowski(&[3.0, 5.0], &[0.0, 0.0], 1, r, s).unwrap();
        assert!(cut.max_abs_diff(&plain).unwrap() <= 1e-12, "r={r} s={s}");
    }
}

#[test]
fn rounded_box_tends_to_sharp_box() {
    // the area moves by 2 (a1 + a2) r0, which stays below 1e-8 for this box
    let v = rounded_box_2d(1.0, 2.0, 1e-9).unwrap();
    let sharp = |k, s| box_minkowski(&[1.0, 2.0], &[0.0, 0.0], k, 0, s).unwrap();
    assert!((v.phi2 - sharp(2, 0).as_scalar()).abs() <= 1e-8);
    assert!((v.phi1 - sharp(1, 0).as_scalar()).abs() <= 1e-8);
    assert!((v.phi0 - sharp(0, 0).as_scalar()).abs() <= 1e-8);
    assert!(v.phi1_02.max_abs_diff(&sharp(1, 2)).unwrap() <= 1e-8);
}

#[test]
fn beta_tensor_trace_matches_surface() {
    for (d, l, beta) in [(2usize, 10usize, 0.5), (3, 20, -0.5), (4, 10, 1.5)] {
        let t = beta_expected_tensor(d, d - 1, l, beta, 2).unwrap();
        let ev = beta_expected_surface(d, l, beta).unwrap();
        assert!((4.0 * PI * trace2(&t).unwrap() - ev).abs() < 1e-10 * ev, "d={d}");
    }
}

#[test]
fn beta_quadrature_agrees_with_closed_forms_for_all_l() {
    for l in 3..=100 {
        for beta in [-0.5, 0.5] {
            let c = beta_surface_closed_form(2, l, beta).unwrap();
            let q = beta_surface_quadrature(2, l, beta).unwrap();
            assert!((c - q).abs() < 1e-8, "l={l} beta={beta}: {c} vs {q}");
        }
    }
}
