//! Seeded random test bodies and linear maps.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::body::{evaluate_fields, BodySpec};
use crate::error::{Error, Result};
use crate::geometry::centroid;
use crate::sphere::{build_grid, Resolution};

/// Bound on the first-order curvature perturbation `Σ (k²−1)|c_k|`.
const CURVATURE_BUDGET: f64 = 0.6;

/// `1 + Σ r_k cos(k(θ − φ_k))` with 1–3 distinct degrees in `2..=6`, at
/// least one of them `≥ 3`, and `r_k ∈ [0.01, 0.05]`, shrunk if needed to
/// keep `h″ + h ≥ 0.4`.
///
/// Degree 2 alone would be an ellipse to first order, so `K₀` would be
/// constant up to `O(r²)`.
pub fn random_fourier_spec(rng: &mut impl Rng) -> BodySpec {
    let count = rng.gen_range(1..=3);
    let first = rng.gen_range(3..=6u32);
    let mut rest: Vec<u32> = (2..=6).filter(|&k| k != first).collect();
    rest.shuffle(rng);
    let mut terms: Vec<(u32, f64, f64)> = std::iter::once(first)
        .chain(rest.into_iter().take(count - 1))
        .map(|k| {
            let r = rng.gen_range(0.01..=0.05);
            let phase = rng.gen_range(0.0..2.0 * PI);
            (k, r * phase.cos(), r * phase.sin())
        })
        .collect();
    let load: f64 = terms.iter().map(|&(k, a, b)| (k * k - 1) as f64 * a.hypot(b)).sum();
    if load > CURVATURE_BUDGET {
        let s = CURVATURE_BUDGET / load;
        for t in &mut terms {
            t.1 *= s;
            t.2 *= s;
        }
    }
    BodySpec::Fourier { c0: 1.0, terms }
}

/// `1 + Σ c Y_l^m` with a leading term of degree 3 or 4 and up to two
/// smaller ones with `l ∈ 2..=4`. Coefficients are scaled so that the
/// curvature load `Σ (l(l+1)−1) √((2l+1)/4π) |c|` is uniform in
/// `[0.35, 0.6]`, then halved until the body validates.
pub fn random_sphharm_spec(rng: &mut impl Rng) -> Result<BodySpec> {
    let count = rng.gen_range(1..=3);
    let mut terms: Vec<(usize, i64, f64)> = Vec::with_capacity(count);
    while terms.len() < count {
        let l = if terms.is_empty() { rng.gen_range(3..=4usize) } else { rng.gen_range(2..=4usize) };
        let m = rng.gen_range(-(l as i64)..=l as i64);
        if terms.iter().any(|t| t.0 == l && t.1 == m) {
            continue;
        }
        let size = if terms.is_empty() { rng.gen_range(0.1..=0.2) } else { rng.gen_range(0.02..=0.08) };
        let c = size * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        terms.push((l, m, c));
    }
    let load: f64 = terms
        .iter()
        .map(|&(l, _, c)| (l * (l + 1) - 1) as f64 * ((2 * l + 1) as f64 / (4.0 * PI)).sqrt() * c.abs())
        .sum();
    let s = rng.gen_range(0.35..=CURVATURE_BUDGET) / load;
    for t in &mut terms {
        t.2 *= s;
    }
    for _ in 0..8 {
        let spec = BodySpec::Sphharm {
            constant: 1.0,
            terms: terms.clone(),
        };
        if spec.build().is_ok() {
            return Ok(spec);
        }
        for t in &mut terms {
            t.2 *= 0.5;
        }
    }
    Err(Error::InvalidParameter("no valid harmonic body after 8 halvings".into()))
}

/// Translates a body so that its centroid is the origin.
pub fn centered(spec: BodySpec) -> Result<BodySpec> {
    let body = spec.build()?;
    let resolution = match body.dim() {
        2 => Resolution::Circle(512),
        _ => Resolution::Sphere(64, 128),
    };
    let c = centroid(&evaluate_fields(&body, &build_grid(resolution)?)?);
    let shift: Vec<f64> = (0..body.dim()).map(|i| -c[i]).collect();
    let out = BodySpec::Translate {
        base: Box::new(spec),
        shift,
    };
    out.build()?;
    Ok(out)
}

fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let a = (1.0 - u1).sqrt();
    let b = u1.sqrt();
    let q = Quaternion::new(
        a * (2.0 * PI * u2).sin(),
        a * (2.0 * PI * u2).cos(),
        b * (2.0 * PI * u3).sin(),
        b * (2.0 * PI * u3).cos(),
    );
    UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
}

fn planar_rotation(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// `R₁ diag(s, 1/s) R₂` (n = 2) or `R₁ diag(s₁, s₂, 1/(s₁s₂)) R₂` (n = 3)
/// with stretches in `[1, 1.6]`.
pub fn random_sl(rng: &mut impl Rng, dim: usize) -> Result<Matrix3<f64>> {
    match dim {
        2 => {
            let s = rng.gen_range(1.0..=1.6);
            let r1 = planar_rotation(rng.gen_range(0.0..2.0 * PI));
            let r2 = planar_rotation(rng.gen_range(0.0..2.0 * PI));
            Ok(r1 * Matrix3::from_diagonal(&Vector3::new(s, 1.0 / s, 1.0)) * r2)
        }
        3 => {
            let s1 = rng.gen_range(1.0..=1.6);
            let s2: f64 = rng.gen_range(1.0..=1.6);
            let s2 = if rng.gen_bool(0.5) { s2 } else { 1.0 / s2 };
            let d = Matrix3::from_diagonal(&Vector3::new(s1, s2, 1.0 / (s1 * s2)));
            Ok(random_rotation(rng) * d * random_rotation(rng))
        }
        d => Err(Error::UnsupportedDimension(d)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::block_determinant;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fourier_samples_valid_and_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = build_grid(Resolution::Circle(256)).unwrap();
        for _ in 0..10 {
            let spec = random_fourier_spec(&mut rng);
            if let BodySpec::Fourier { terms, .. } = &spec {
                assert!(!terms.is_empty() && terms.len() <= 3);
                assert!(terms.iter().all(|t| (2..=6).contains(&t.0) && t.1.hypot(t.2) <= 0.05 + 1e-15));
                assert!(terms[0].0 >= 3);
            }
            let c = centered(spec).unwrap();
            let f = evaluate_fields(&c.build().unwrap(), &g).unwrap();
            assert!(centroid(&f).norm() < 1e-12);
        }
    }

    #[test]
    fn sphharm_samples_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let spec = random_sphharm_spec(&mut rng).unwrap();
            assert_eq!(spec.build().unwrap().dim(), 3);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = random_fourier_spec(&mut ChaCha8Rng::seed_from_u64(3));
        let b = random_fourier_spec(&mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }

    #[test]
    fn sl_maps_have_unit_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for dim in [2, 3] {
            for _ in 0..5 {
                let t = random_sl(&mut rng, dim).unwrap();
                assert!((block_determinant(&t, dim) - 1.0).abs() < 1e-12);
            }
        }
    }
}
