//! Second-order forward-mode derivatives in three variables, used to get
//! exact gradients and Hessians of spherical-harmonic support functions.

use std::ops::{Add, Mul, Sub};

use nalgebra::{Matrix3, Vector3};

/// Value, gradient and Hessian of a scalar function of a point in R³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vector3<f64>,
    pub hessian: Matrix3<f64>,
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        Jet {
            value,
            gradient: Vector3::zeros(),
            hessian: Matrix3::zeros(),
        }
    }

    /// The coordinate function `x_axis` at `point`.
    pub fn variable(point: &Vector3<f64>, axis: usize) -> Self {
        let mut gradient = Vector3::zeros();
        gradient[axis] = 1.0;
        Jet {
            value: point[axis],
            gradient,
            hessian: Matrix3::zeros(),
        }
    }

    pub fn scale(self, s: f64) -> Self {
        Jet {
            value: self.value * s,
            gradient: self.gradient * s,
            hessian: self.hessian * s,
        }
    }

    /// Applies a scalar function given its value and first two derivatives at `self.value`.
    pub fn compose(self, f: f64, df: f64, d2f: f64) -> Self {
        Jet {
            value: f,
            gradient: self.gradient * df,
            hessian: self.hessian * df + self.gradient * self.gradient.transpose() * d2f,
        }
    }

    pub fn powf(self, e: f64) -> Self {
        let v = self.value;
        self.compose(v.powf(e), e * v.powf(e - 1.0), e * (e - 1.0) * v.powf(e - 2.0))
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet {
            value: self.value + o.value,
            gradient: self.gradient + o.gradient,
            hessian: self.hessian + o.hessian,
        }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        Jet {
            value: self.value - o.value,
            gradient: self.gradient - o.gradient,
            hessian: self.hessian - o.hessian,
        }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let cross = self.gradient * o.gradient.transpose();
        Jet {
            value: self.value * o.value,
            gradient: self.gradient * o.value + o.gradient * self.value,
            hessian: self.hessian * o.value + o.hessian * self.value + cross + cross.transpose(),
        }
    }
}

/// Real, orthonormal spherical harmonic `Y_l^m` (no Condon–Shortley phase;
/// `m < 0` selects the sine family).
pub fn real_harmonic(l: usize, m: i64, u: &Vector3<f64>) -> f64 {
    solid_harmonic(l, m, &Jet::variable(u, 0), &Jet::variable(u, 1), &Jet::variable(u, 2)).value
        / u.norm().powi(l as i32)
}

/// `r^l · Y_l^m(v/r)` as a jet: a homogeneous polynomial of degree `l`.
pub fn solid_harmonic(l: usize, m: i64, x: &Jet, y: &Jet, z: &Jet) -> Jet {
    let ma = m.unsigned_abs() as usize;
    assert!(ma <= l, "|m| must not exceed l");
    // (x + i y)^|m|
    let mut c = Jet::constant(1.0);
    let mut s = Jet::constant(0.0);
    for _ in 0..ma {
        let nc = *x * c - *y * s;
        let ns = *x * s + *y * c;
        c = nc;
        s = ns;
    }
    let r2 = *x * *x + *y * *y + *z * *z;
    // Π_l^m(z, r²) by the three-term recursion in l.
    let double_factorial: f64 = (1..=ma).map(|k| (2 * k - 1) as f64).product();
    let mut prev = Jet::constant(double_factorial);
    let mut cur = prev;
    if l > ma {
        cur = z.scale((2 * ma + 1) as f64) * prev;
        for ll in ma + 2..=l {
            let next = (z.scale((2 * ll - 1) as f64) * cur - r2.scale((ll + ma - 1) as f64) * prev)
                .scale(1.0 / (ll - ma) as f64);
            prev = cur;
            cur = next;
        }
    }
    let azimuthal = if m >= 0 { c } else { s };
    let mut norm = ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI)).sqrt();
    if ma > 0 {
        // sqrt(2 (l−m)!/(l+m)!)
        let ratio: f64 = ((l - ma + 1)..=(l + ma)).map(|k| 1.0 / k as f64).product();
        norm *= (2.0 * ratio).sqrt();
    }
    (cur * azimuthal).scale(norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{build_grid, Resolution};

    #[test]
    fn product_and_power_rules() {
        let p = Vector3::new(0.3, -0.7, 1.1);
        let x = Jet::variable(&p, 0);
        let y = Jet::variable(&p, 1);
        let f = x * y * y;
        assert!((f.value - 0.3 * 0.49).abs() < 1e-15);
        assert!((f.gradient - Vector3::new(0.49, 2.0 * 0.3 * -0.7, 0.0)).norm() < 1e-15);
        assert!((f.hessian[(1, 1)] - 0.6).abs() < 1e-15);
        assert!((f.hessian[(0, 1)] + 1.4).abs() < 1e-15);
        let g = (x * x + y * y).powf(0.5);
        let r = (0.09f64 + 0.49).sqrt();
        assert!((g.gradient[0] - 0.3 / r).abs() < 1e-15);
        assert!((g.hessian[(0, 0)] - 0.49 / r.powi(3)).abs() < 1e-14);
    }

    #[test]
    fn known_harmonics() {
        let u = Vector3::new(0.48, 0.6, 0.64);
        let c20 = (5.0 / (16.0 * std::f64::consts::PI)).sqrt();
        assert!((real_harmonic(2, 0, &u) - c20 * (3.0 * 0.64 * 0.64 - 1.0)).abs() < 1e-14);
        let c11 = (3.0 / (4.0 * std::f64::consts::PI)).sqrt();
        assert!((real_harmonic(1, 1, &u) - c11 * 0.48).abs() < 1e-14);
        assert!((real_harmonic(1, -1, &u) - c11 * 0.6).abs() < 1e-14);
    }

    #[test]
    fn harmonics_are_orthonormal() {
        let g = build_grid(Resolution::Sphere(24, 48)).unwrap();
        let list: Vec<(usize, i64)> = (0..5).flat_map(|l| (-(l as i64)..=l as i64).map(move |m| (l, m))).collect();
        let samples: Vec<Vec<f64>> = list
            .iter()
            .map(|&(l, m)| g.nodes().iter().map(|u| real_harmonic(l, m, u)).collect())
            .collect();
        for (a, sa) in samples.iter().enumerate() {
            for (b, sb) in samples.iter().enumerate() {
                let prod: Vec<f64> = sa.iter().zip(sb).map(|(x, y)| x * y).collect();
                let ip = g.integrate(&prod).unwrap();
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((ip - expect).abs() < 1e-12, "{:?} {:?}: {ip}", list[a], list[b]);
            }
        }
    }
}
