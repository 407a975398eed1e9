use std::f64::consts::PI;

use centroaffine::body::{evaluate_fields, Body, FieldTable, FourierTerm, HarmonicTerm};
use centroaffine::geometry::{mixed_integral, polar_body, polar_volume, volume, MixedCurvatureInput};
use centroaffine::invariants::{
    affine_isoperimetric_ratio, entropy_omega_k, kl_divergence, lambda_k, omega_2n_fields, omega_p,
};
use centroaffine::sphere::{build_grid, Grid, Resolution};
use centroaffine::suite::{check_power_comparison, SuiteContext};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

fn circle(n: usize) -> Grid {
    build_grid(Resolution::Circle(n)).unwrap()
}

fn planar_sl(s: f64, a: f64, b: f64) -> Matrix3<f64> {
    let rot = |t: f64| Matrix3::new(t.cos(), -t.sin(), 0.0, t.sin(), t.cos(), 0.0, 0.0, 0.0, 1.0);
    rot(a) * Matrix3::from_diagonal(&Vector3::new(s, 1.0 / s, 1.0)) * rot(b)
}

/// `amp` is a fraction of the largest amplitude with `(k²−1)·a ≤ 0.6`, capped at 0.04.
fn fourier_body(k: u32, amp: f64, phase: f64, shift: (f64, f64)) -> Body {
    let amp = amp * (0.6 / (k * k - 1) as f64).min(0.04);
    Body::fourier(1.0, &[FourierTerm { k, a: amp * phase.cos(), b: amp * phase.sin() }])
        .unwrap()
        .translate(&Vector3::new(shift.0, shift.1, 0.0))
        .unwrap()
}

fn invariants(f: &FieldTable) -> [f64; 6] {
    let n = f.dim() as f64;
    [
        omega_p(f, n).unwrap(),
        volume(f) * polar_volume(f),
        entropy_omega_k(f),
        lambda_k(f),
        omega_2n_fields(f).unwrap(),
        affine_isoperimetric_ratio(f).unwrap(),
    ]
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn planar_invariants_survive_sl_images(
        k in 3u32..=6, amp in 0.1f64..1.0, phase in 0.0f64..6.28,
        tx in -0.1f64..0.1, ty in -0.1f64..0.1,
        s in 1.0f64..1.6, a in 0.0f64..6.28, b in 0.0f64..6.28,
    ) {
        let body = fourier_body(k, amp, phase, (tx, ty));
        let image = body.linear_image(&planar_sl(s, a, b)).unwrap();
        let g = circle(512);
        let x = invariants(&evaluate_fields(&body, &g).unwrap());
        let y = invariants(&evaluate_fields(&image, &g).unwrap());
        for i in 0..6 {
            // Ω_{2,n} of a near-ellipse is tiny; compare it on the scale of Vol°.
            let err = if i == 4 { (x[i] - y[i]).abs() / x[1].sqrt() } else { rel(x[i], y[i]) };
            prop_assert!(err < 1e-7, "invariant {} {} vs {}", i, x[i], y[i]);
        }
    }

    #[test]
    fn dilation_laws(
        k in 3u32..=6, amp in 0.1f64..1.0, phase in 0.0f64..6.28, lam in 0.5f64..2.0,
    ) {
        let body = fourier_body(k, amp, phase, (0.05, -0.03));
        let scaled = body.linear_image(&Matrix3::identity().scale(lam)).unwrap();
        let g = circle(256);
        let f = evaluate_fields(&body, &g).unwrap();
        let s = evaluate_fields(&scaled, &g).unwrap();
        let n = 2.0;
        for p in [-0.5, 0.5, 1.0, 3.0] {
            let law = lam.powf(n - 2.0 * n * p / (n + p));
            prop_assert!((omega_p(&s, p).unwrap() / omega_p(&f, p).unwrap() / law - 1.0).abs() < 1e-8);
        }
        prop_assert!((entropy_omega_k(&s) / entropy_omega_k(&f) / lam.powf(2.0 * n * n) - 1.0).abs() < 1e-8);
        prop_assert!((lambda_k(&s) / lambda_k(&f) / lam.powf(-2.0 * n) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn mixed_integral_is_multilinear_and_symmetric(
        c in proptest::collection::vec(-0.02f64..0.02, 12), alpha in -2.0f64..2.0, beta in -2.0f64..2.0,
    ) {
        let g = build_grid(Resolution::Sphere(16, 32)).unwrap();
        let fun = |o: usize| -> Vec<f64> {
            g.nodes().iter().map(|u| {
                1.0 + c[o] * u.x + c[o + 1] * u.y * u.z + c[o + 2] * (u.x * u.x - u.y * u.y)
                    + c[o + 3] * u.z * u.z * u.z
            }).collect()
        };
        let (f0, f1, f2) = (fun(0), fun(4), fun(8));
        let v = |a: &[f64], b: &[f64], d: &[f64]| {
            mixed_integral(a, &MixedCurvatureInput::from_values(&g, &[b, d]).unwrap()).unwrap()
        };
        let base = v(&f0, &f1, &f2);
        prop_assert!((base - v(&f1, &f0, &f2)).abs() < 1e-10);
        prop_assert!((base - v(&f2, &f1, &f0)).abs() < 1e-10);
        prop_assert!((base - v(&f0, &f2, &f1)).abs() < 1e-10);
        let combo: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| alpha * a + beta * b).collect();
        let lhs = v(&f0, &combo, &f1);
        let rhs = alpha * v(&f0, &f1, &f1) + beta * v(&f0, &f2, &f1);
        prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn kl_and_power_identities(
        k in 3u32..=6, amp in 0.1f64..1.0, phase in 0.0f64..6.28, tx in -0.2f64..0.2,
    ) {
        let body = fourier_body(k, amp, phase, (tx, 0.0));
        let g = circle(256);
        let f = evaluate_fields(&body, &g).unwrap();
        let alt = (volume(&f) / polar_volume(&f) * entropy_omega_k(&f).powf(-0.5)).ln();
        prop_assert!((kl_divergence(&f) - alt).abs() < 1e-12);
        prop_assert!(kl_divergence(&f) >= 0.0);
        let polar = polar_body(&body, &g).unwrap();
        let ctx = SuiteContext::new(&body, &polar, Resolution::Circle(256), None).unwrap();
        let r = check_power_comparison(&ctx, 1.0).unwrap();
        prop_assert!((r.lhs - r.rhs).abs() <= 1e-12 * r.lhs);
    }
}

#[test]
fn spatial_invariants_survive_sl_images() {
    let body = Body::sphharm(&[
        HarmonicTerm { l: 0, m: 0, c: (4.0 * PI).sqrt() },
        HarmonicTerm { l: 3, m: 1, c: 0.04 },
        HarmonicTerm { l: 2, m: -2, c: 0.05 },
    ])
    .unwrap()
    .translate(&Vector3::new(0.05, 0.0, -0.03))
    .unwrap();
    let t: Matrix3<f64> = Matrix3::new(1.2, 0.1, 0.0, 0.0, 0.9, 0.2, 0.1, 0.0, 1.0);
    let t = t / t.determinant().cbrt();
    let g = build_grid(Resolution::Sphere(64, 128)).unwrap();
    let x = invariants(&evaluate_fields(&body, &g).unwrap());
    let y = invariants(&evaluate_fields(&body.linear_image(&t).unwrap(), &g).unwrap());
    for i in 0..6 {
        let err = if i == 4 { (x[i] - y[i]).abs() / x[1].sqrt() } else { rel(x[i], y[i]) };
        assert!(err < 1e-4, "invariant {i}: {} vs {}", x[i], y[i]);
    }
}

#[test]
fn duality_on_planar_polar() {
    let body = fourier_body(3, 1.0, 0.3, (0.1, -0.05));
    let g = circle(512);
    let polar = polar_body(&body, &g).unwrap();
    let ctx = SuiteContext::new(&body, &polar, Resolution::Circle(512), None).unwrap();
    let n = 2.0;
    for q in [1.0, 2.0, 4.0] {
        let a = omega_p(&ctx.k.fields, q).unwrap();
        let b = omega_p(&ctx.polar.fields, n * n / q).unwrap();
        assert!(rel(a, b) < 1e-5, "q = {q}: {a} vs {b}");
    }
    assert!((ctx.k.curvature.max * ctx.polar.curvature.min - 1.0).abs() < 1e-5);
    assert!((ctx.k.curvature.min * ctx.polar.curvature.max - 1.0).abs() < 1e-5);
}

#[test]
fn ellipse_closed_forms() {
    let f = evaluate_fields(&Body::ellipsoid(&[2.0, 1.0]).unwrap(), &circle(256)).unwrap();
    assert!(rel(volume(&f), 2.0 * PI) < 1e-8);
    assert!(rel(polar_volume(&f), PI / 2.0) < 1e-8);
    for p in [1.0, 2.0, 4.0] {
        assert!(rel(omega_p(&f, p).unwrap(), 4.0 * PI * 4f64.powf(-p / (p + 2.0))) < 1e-8);
    }
    assert!(rel(entropy_omega_k(&f), 16.0) < 1e-8);
    assert!(rel(lambda_k(&f), 0.25) < 1e-8);
    assert!(omega_2n_fields(&f).unwrap().abs() < 1e-8);
    assert!(kl_divergence(&f).abs() < 1e-8);
}
