//! Convex bodies given by support functions.
//!
//! Every body evaluates the 1-homogeneous extension `H(v) = |v| h(v/|v|)` of
//! its support function. Families with closed forms also return the exact
//! gradient and Hessian of `H` (a [`Jet`]); for a 1-homogeneous `H` the
//! tangential block of `∇²H` at a unit vector is exactly `Hess h + h·I`, so
//! curvature fields come straight from the jet.

mod fields;
mod jet;
mod polar;
mod spec;

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::sphere::{build_grid, Grid, Resolution};

pub use fields::{curvature_extrema, evaluate_fields, field_extrema, evaluate_fields_with, DerivativeSource, Extrema, FieldTable};
pub use jet::{real_harmonic, solid_harmonic, Jet};
pub use polar::{polar_support, PolarSeeds};
use polar::polar_jet;
pub use spec::BodySpec;

/// Resolution of the grid every body is validated on when constructed.
pub fn validation_resolution(dim: usize) -> Resolution {
    if dim == 2 {
        Resolution::Circle(512)
    } else {
        Resolution::Sphere(96, 192)
    }
}

/// Shared validation grid for `dim`.
pub fn validation_grid(dim: usize) -> &'static Grid {
    static CIRCLE: OnceLock<Grid> = OnceLock::new();
    static SPHERE: OnceLock<Grid> = OnceLock::new();
    let cell = if dim == 2 { &CIRCLE } else { &SPHERE };
    cell.get_or_init(|| build_grid(validation_resolution(dim)).expect("validation grid"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Ellipsoid,
    Fourier2d,
    SphHarm3d,
    LinearImage,
    Translate,
    PolarNumeric,
    Polygonal2d,
}

/// One `a_k cos kθ + b_k sin kθ` term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierTerm {
    pub k: u32,
    pub a: f64,
    pub b: f64,
}

/// One `c · Y_l^m` term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicTerm {
    pub l: usize,
    pub m: i64,
    pub c: f64,
}

#[derive(Debug)]
enum Shape {
    Ellipsoid { axes: Vec<f64> },
    Fourier { c0: f64, terms: Vec<FourierTerm> },
    SphHarm { terms: Vec<HarmonicTerm> },
    LinearImage { base: Body, matrix: Matrix3<f64> },
    Translate { base: Body, shift: Vector3<f64> },
    Polar { base: Body, seeds: PolarSeeds },
    Polygon { vertices: Vec<Vector2<f64>> },
}

/// A convex body in R² or R³ containing the origin in its interior.
///
/// Cheap to clone; composite bodies share their base.
#[derive(Debug, Clone)]
pub struct Body {
    dim: usize,
    shape: Arc<Shape>,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 3 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

/// Embeds an n×n matrix (n = 2 or 3) given by rows into a 3×3 matrix.
pub fn embed_matrix(rows: &[Vec<f64>]) -> Result<Matrix3<f64>> {
    let n = rows.len();
    check_dim(n)?;
    let mut m = Matrix3::identity();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::InvalidParameter(format!("matrix row {i} has {} entries, expected {n}", row.len())));
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("matrix entry ({i},{j})")));
            }
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

/// Determinant of the leading `dim`×`dim` block.
pub fn block_determinant(m: &Matrix3<f64>, dim: usize) -> f64 {
    if dim == 2 {
        m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]
    } else {
        m.determinant()
    }
}

impl Body {
    fn from_shape(dim: usize, shape: Shape) -> Body {
        Body {
            dim,
            shape: Arc::new(shape),
        }
    }

    /// Checks positivity of `h` and of `Hess h + h·I` on the validation grid.
    fn validated(self) -> Result<Body> {
        evaluate_fields(&self, validation_grid(self.dim))?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> Family {
        match &*self.shape {
            Shape::Ellipsoid { .. } => Family::Ellipsoid,
            Shape::Fourier { .. } => Family::Fourier2d,
            Shape::SphHarm { .. } => Family::SphHarm3d,
            Shape::LinearImage { .. } => Family::LinearImage,
            Shape::Translate { .. } => Family::Translate,
            Shape::Polar { .. } => Family::PolarNumeric,
            Shape::Polygon { .. } => Family::Polygonal2d,
        }
    }

    /// Centered ellipsoid with the given semi-axes.
    pub fn ellipsoid(axes: &[f64]) -> Result<Body> {
        check_dim(axes.len())?;
        if let Some(a) = axes.iter().find(|a| !(**a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidParameter(format!("semi-axis {a} is not positive")));
        }
        Body::from_shape(axes.len(), Shape::Ellipsoid { axes: axes.to_vec() }).validated()
    }

    pub fn unit_ball(dim: usize) -> Result<Body> {
        Body::ellipsoid(&vec![1.0; dim])
    }

    /// Planar body with `h(θ) = c₀ + Σ a_k cos kθ + b_k sin kθ`.
    pub fn fourier(c0: f64, terms: &[FourierTerm]) -> Result<Body> {
        if !c0.is_finite() || terms.iter().any(|t| !t.a.is_finite() || !t.b.is_finite()) {
            return Err(Error::NonFinite("fourier coefficient".into()));
        }
        if terms.iter().any(|t| t.k == 0) {
            return Err(Error::InvalidParameter("fourier terms need k ≥ 1; use c0 for the constant".into()));
        }
        Body::from_shape(2, Shape::Fourier { c0, terms: terms.to_vec() }).validated()
    }

    /// Body in R³ with `h = Σ c_lm Y_l^m`.
    pub fn sphharm(terms: &[HarmonicTerm]) -> Result<Body> {
        for t in terms {
            if t.m.unsigned_abs() as usize > t.l {
                return Err(Error::InvalidParameter(format!("harmonic index m = {} exceeds l = {}", t.m, t.l)));
            }
            if !t.c.is_finite() {
                return Err(Error::NonFinite("harmonic coefficient".into()));
            }
        }
        Body::from_shape(3, Shape::SphHarm { terms: terms.to_vec() }).validated()
    }

    /// The image `A·K`, with `h_{AK}(v) = h_K(Aᵀ v)`.
    pub fn linear_image(&self, matrix: &Matrix3<f64>) -> Result<Body> {
        let mut m = *matrix;
        if self.dim == 2 {
            for i in 0..3 {
                m[(2, i)] = 0.0;
                m[(i, 2)] = 0.0;
            }
            m[(2, 2)] = 1.0;
        }
        let det = block_determinant(&m, self.dim);
        if !det.is_finite() || det.abs() < 1e-12 {
            return Err(Error::SingularMatrix(det));
        }
        Body::from_shape(
            self.dim,
            Shape::LinearImage {
                base: self.clone(),
                matrix: m,
            },
        )
        .validated()
    }

    /// The translate `K + t`, with support `h(u) + t·u`.
    pub fn translate(&self, shift: &Vector3<f64>) -> Result<Body> {
        let mut t = *shift;
        if self.dim == 2 {
            t.z = 0.0;
        }
        Body::from_shape(self.dim, Shape::Translate { base: self.clone(), shift: t }).validated()
    }

    /// Numerical polar body; support values come from maximizing `(u·v)/h(u)`.
    pub(crate) fn polar_of(&self, seed_grid: &Grid) -> Result<Body> {
        let seeds = PolarSeeds::new(self, seed_grid)?;
        Body::from_shape(
            self.dim,
            Shape::Polar {
                base: self.clone(),
                seeds,
            },
        )
        .validated()
    }

    pub(crate) fn polygon(vertices: Vec<Vector2<f64>>) -> Body {
        Body::from_shape(2, Shape::Polygon { vertices })
    }

    /// Vertices of a polygonal body.
    pub fn polygon_vertices(&self) -> Option<&[Vector2<f64>]> {
        match &*self.shape {
            Shape::Polygon { vertices } => Some(vertices),
            _ => None,
        }
    }

    /// The body this polar body was built from.
    pub fn polar_base(&self) -> Option<&Body> {
        match &*self.shape {
            Shape::Polar { base, .. } => Some(base),
            _ => None,
        }
    }

    /// Whether the support function is C² with closed-form derivatives.
    pub fn has_analytic_derivatives(&self) -> bool {
        match &*self.shape {
            Shape::Ellipsoid { .. } | Shape::Fourier { .. } | Shape::SphHarm { .. } => true,
            Shape::LinearImage { base, .. } | Shape::Translate { base, .. } => base.has_analytic_derivatives(),
            Shape::Polar { base, .. } => base.has_analytic_derivatives(),
            Shape::Polygon { .. } => false,
        }
    }

    /// Whether the support function is meant to be smooth.
    pub fn is_smooth(&self) -> bool {
        match &*self.shape {
            Shape::Polygon { .. } => false,
            Shape::LinearImage { base, .. } | Shape::Translate { base, .. } | Shape::Polar { base, .. } => {
                base.is_smooth()
            }
            _ => true,
        }
    }

    /// True for ellipsoids centered at the origin, including their linear
    /// images and polars (the equality case of every inequality here).
    pub fn is_centered_ellipsoid(&self) -> bool {
        match &*self.shape {
            Shape::Ellipsoid { .. } => true,
            Shape::LinearImage { base, .. } | Shape::Polar { base, .. } => base.is_centered_ellipsoid(),
            Shape::Translate { base, shift } => shift.norm() == 0.0 && base.is_centered_ellipsoid(),
            _ => false,
        }
    }

    /// Support function of the homogeneous extension at any nonzero `v`.
    pub fn support(&self, v: &Vector3<f64>) -> f64 {
        match &*self.shape {
            Shape::Ellipsoid { axes } => axes
                .iter()
                .enumerate()
                .map(|(i, a)| (a * v[i]).powi(2))
                .sum::<f64>()
                .sqrt(),
            Shape::Fourier { c0, terms } => {
                let r = v.x.hypot(v.y);
                let theta = v.y.atan2(v.x);
                r * (c0
                    + terms
                        .iter()
                        .map(|t| {
                            let (s, c) = (t.k as f64 * theta).sin_cos();
                            t.a * c + t.b * s
                        })
                        .sum::<f64>())
            }
            Shape::SphHarm { .. } => self.try_jet(v).ok().flatten().map_or(f64::NAN, |j| j.value),
            Shape::LinearImage { base, matrix } => base.support(&(matrix.transpose() * v)),
            Shape::Translate { base, shift } => base.support(v) + shift.dot(v),
            Shape::Polar { .. } => self.try_support(v).unwrap_or(f64::NAN),
            Shape::Polygon { vertices } => vertices
                .iter()
                .map(|p| p.x * v.x + p.y * v.y)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Exact value, gradient and Hessian of the homogeneous extension, when
    /// the family has closed forms.
    pub fn support_jet(&self, v: &Vector3<f64>) -> Option<Jet> {
        self.try_jet(v).ok().flatten()
    }

    /// Support value that reports refinement failures of numerical polars.
    pub fn try_support(&self, v: &Vector3<f64>) -> Result<f64> {
        match &*self.shape {
            Shape::Polar { base, seeds } => {
                let r = v.norm();
                Ok(r * polar_support(base, &(v / r), seeds)?)
            }
            Shape::LinearImage { base, matrix } => base.try_support(&(matrix.transpose() * v)),
            Shape::Translate { base, shift } => Ok(base.try_support(v)? + shift.dot(v)),
            _ => Ok(self.support(v)),
        }
    }

    pub(crate) fn try_jet(&self, v: &Vector3<f64>) -> Result<Option<Jet>> {
        Ok(match &*self.shape {
            Shape::Ellipsoid { axes } => {
                let mut a2 = Vector3::zeros();
                for (i, a) in axes.iter().enumerate() {
                    a2[i] = a * a;
                }
                let w = a2.component_mul(v);
                let value = w.dot(v).sqrt();
                let gradient = w / value;
                let hessian = (Matrix3::from_diagonal(&a2) - gradient * gradient.transpose()) / value;
                Some(Jet {
                    value,
                    gradient,
                    hessian,
                })
            }
            Shape::Fourier { c0, terms } => {
                let r = v.x.hypot(v.y);
                let theta = v.y.atan2(v.x);
                let (mut h, mut h1, mut h2) = (*c0, 0.0, 0.0);
                for t in terms {
                    let k = t.k as f64;
                    let (s, c) = (k * theta).sin_cos();
                    h += t.a * c + t.b * s;
                    h1 += k * (t.b * c - t.a * s);
                    h2 -= k * k * (t.a * c + t.b * s);
                }
                let (st, ct) = theta.sin_cos();
                let u = Vector3::new(ct, st, 0.0);
                let e = Vector3::new(-st, ct, 0.0);
                Some(Jet {
                    value: r * h,
                    gradient: u * h + e * h1,
                    hessian: e * e.transpose() * ((h2 + h) / r),
                })
            }
            Shape::SphHarm { terms } => {
                let x = Jet::variable(v, 0);
                let y = Jet::variable(v, 1);
                let z = Jet::variable(v, 2);
                let r = (x * x + y * y + z * z).powf(0.5);
                let mut total = Jet::constant(0.0);
                for t in terms {
                    let poly = solid_harmonic(t.l, t.m, &x, &y, &z);
                    let term = if t.l == 1 {
                        poly
                    } else {
                        poly * r.powf(1.0 - t.l as f64)
                    };
                    total = total + term.scale(t.c);
                }
                Some(total)
            }
            Shape::LinearImage { base, matrix } => {
                let Some(j) = base.try_jet(&(matrix.transpose() * v))? else {
                    return Ok(None);
                };
                Some(Jet {
                    value: j.value,
                    gradient: matrix * j.gradient,
                    hessian: matrix * j.hessian * matrix.transpose(),
                })
            }
            Shape::Translate { base, shift } => {
                let Some(j) = base.try_jet(v)? else {
                    return Ok(None);
                };
                Some(Jet {
                    value: j.value + shift.dot(v),
                    gradient: j.gradient + shift,
                    hessian: j.hessian,
                })
            }
            Shape::Polar { base, seeds } => Some(polar_jet(base, v, seeds)?),
            Shape::Polygon { .. } => None,
        })
    }

    /// Short human-readable description used in reports.
    pub fn describe(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Body {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        match &*self.shape {
            Shape::Ellipsoid { axes } => write!(f, "ellipsoid({})", list(axes)),
            Shape::Fourier { c0, terms } => {
                write!(f, "fourier({c0}")?;
                for t in terms {
                    write!(f, ";{}:{},{}", t.k, t.a, t.b)?;
                }
                write!(f, ")")
            }
            Shape::SphHarm { terms } => {
                write!(f, "sphharm(")?;
                for (i, t) in terms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{}:{}:{}", t.l, t.m, t.c)?;
                }
                write!(f, ")")
            }
            Shape::LinearImage { base, matrix } => {
                let n = self.dim;
                let rows: Vec<String> = (0..n)
                    .map(|i| list(&(0..n).map(|j| matrix[(i, j)]).collect::<Vec<_>>()))
                    .collect();
                write!(f, "linear_image({base};[{}])", rows.join(";"))
            }
            Shape::Translate { base, shift } => {
                write!(f, "translate({base};{})", list(&shift.as_slice()[..self.dim]))
            }
            Shape::Polar { base, .. } => write!(f, "polar({base})"),
            Shape::Polygon { vertices } => write!(f, "polygon({} vertices)", vertices.len()),
        }
    }
}

/// Volume of the unit ball in R^n.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => PI.powf(dim as f64 / 2.0) / gamma_half_integer(dim + 2),
    }
}

/// Γ(k/2) for integer k ≥ 1.
fn gamma_half_integer(k: usize) -> f64 {
    if k == 1 {
        PI.sqrt()
    } else if k == 2 {
        1.0
    } else {
        (k as f64 / 2.0 - 1.0) * gamma_half_integer(k - 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: usize) -> Vector3<f64> {
        let mut v = Vector3::zeros();
        v[i] = 1.0;
        v
    }

    #[test]
    fn ellipse_support_on_axes() {
        let b = Body::ellipsoid(&[2.0, 1.0]).unwrap();
        assert_eq!(b.support(&e(0)), 2.0);
        assert_eq!(b.support(&e(1)), 1.0);
        let disk = Body::unit_ball(2).unwrap();
        assert_eq!(disk.support(&Vector3::new(0.6, 0.8, 0.0)), 1.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(Body::ellipsoid(&[1.0, 0.0]), Err(Error::InvalidParameter(_))));
        assert!(matches!(Body::ellipsoid(&[1.0; 4]), Err(Error::UnsupportedDimension(4))));
        let disk = Body::unit_ball(2).unwrap();
        let singular = Matrix3::new(1.0, 2.0, 0.0, 2.0, 4.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(disk.linear_image(&singular), Err(Error::SingularMatrix(_))));
        assert!(Body::sphharm(&[HarmonicTerm { l: 1, m: 2, c: 1.0 }]).is_err());
    }

    #[test]
    fn fourier_validation() {
        let ok = Body::fourier(1.0, &[FourierTerm { k: 3, a: 0.05, b: 0.0 }]);
        assert!(ok.is_ok());
        match Body::fourier(1.0, &[FourierTerm { k: 3, a: 0.2, b: 0.0 }]) {
            Err(Error::Validation { reason, node, .. }) => {
                assert!(reason.contains("curvature"), "{reason}");
                // h″ + h = 1 − 1.6 cos 3θ is most negative at θ = 0.
                assert!(node < 512);
            }
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn translation_limits() {
        let disk = Body::unit_ball(2).unwrap();
        let t = disk.translate(&Vector3::new(0.3, 0.0, 0.0)).unwrap();
        assert!((t.support(&e(0)) - 1.3).abs() < 1e-15);
        assert!(matches!(
            disk.translate(&Vector3::new(1.5, 0.0, 0.0)),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn harmonic_bodies() {
        let c = (4.0 * PI).sqrt();
        let ball = Body::sphharm(&[HarmonicTerm { l: 0, m: 0, c }]).unwrap();
        assert!((ball.support(&Vector3::new(0.0, 0.6, 0.8)) - 1.0).abs() < 1e-14);
        let mild = [HarmonicTerm { l: 0, m: 0, c }, HarmonicTerm { l: 2, m: 0, c: 0.05 }];
        assert!(Body::sphharm(&mild).is_ok());
        let strong = [HarmonicTerm { l: 0, m: 0, c }, HarmonicTerm { l: 2, m: 0, c: 0.8 }];
        assert!(matches!(Body::sphharm(&strong), Err(Error::Validation { .. })));
    }

    #[test]
    fn homogeneous_extension() {
        let b = Body::fourier(1.0, &[FourierTerm { k: 2, a: 0.1, b: -0.05 }]).unwrap();
        let v = Vector3::new(0.3, -1.2, 0.0);
        assert!((b.support(&(v * 2.5)) - 2.5 * b.support(&v)).abs() < 1e-14);
        let a = Matrix3::new(2.0, 0.3, 0.0, 0.1, 0.5, 0.0, 0.0, 0.0, 1.0);
        let img = b.linear_image(&a).unwrap();
        assert!((img.support(&v) - b.support(&(a.transpose() * v))).abs() < 1e-14);
    }

    #[test]
    fn jets_match_finite_differences() {
        let sph = Body::sphharm(&[
            HarmonicTerm { l: 0, m: 0, c: (4.0 * PI).sqrt() },
            HarmonicTerm { l: 3, m: -2, c: 0.03 },
            HarmonicTerm { l: 2, m: 1, c: 0.04 },
        ])
        .unwrap();
        let four = Body::fourier(1.0, &[FourierTerm { k: 3, a: 0.05, b: 0.02 }]).unwrap();
        let ell = Body::ellipsoid(&[1.5, 1.0, 0.7]).unwrap();
        let sheared = ell
            .linear_image(&Matrix3::new(1.0, 0.4, 0.0, 0.0, 1.0, 0.2, 0.1, 0.0, 1.0))
            .unwrap()
            .translate(&Vector3::new(0.1, -0.05, 0.02))
            .unwrap();
        let v3 = Vector3::new(0.3, -0.5, 0.7);
        let v2 = Vector3::new(0.3, -0.5, 0.0);
        for (body, v) in [(&sph, v3), (&four, v2), (&ell, v3), (&sheared, v3)] {
            let j = body.support_jet(&v).unwrap();
            assert!((j.value - body.support(&v)).abs() < 1e-14);
            let step = 1e-5;
            for a in 0..body.dim() {
                let fd = (body.support(&(v + e(a) * step)) - body.support(&(v - e(a) * step))) / (2.0 * step);
                assert!((fd - j.gradient[a]).abs() < 1e-8, "{body} grad {a}");
                let gp = body.support_jet(&(v + e(a) * step)).unwrap().gradient;
                let gm = body.support_jet(&(v - e(a) * step)).unwrap().gradient;
                let col = (gp - gm) / (2.0 * step);
                for b in 0..body.dim() {
                    assert!((col[b] - j.hessian[(b, a)]).abs() < 1e-7, "{body} hess {a}{b}");
                }
            }
        }
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-15);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-14);
    }
}
