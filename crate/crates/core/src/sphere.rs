//! Quadrature grids and spectral calculus on S¹ and S².
//!
//! The circle uses `N` equispaced angles. The sphere uses a product grid:
//! Gauss–Legendre nodes in `cos θ` times equispaced azimuths, so no node sits
//! on a pole. Derivatives come from dense barycentric trigonometric
//! differentiation matrices. For the polar direction each meridian is joined
//! with its antipodal meridian into a full great circle, which turns the
//! polar samples into a smooth periodic function on non-uniform nodes.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest accepted number of nodes along any grid axis.
pub const MIN_RESOLUTION: usize = 8;

/// Grid resolution: `N` on the circle, `(N_θ, N_φ)` on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Resolution {
    Circle(usize),
    Sphere(usize, usize),
}

impl Resolution {
    pub fn dim(&self) -> usize {
        match self {
            Resolution::Circle(_) => 2,
            Resolution::Sphere(..) => 3,
        }
    }

    pub fn node_count(&self) -> usize {
        match *self {
            Resolution::Circle(n) => n,
            Resolution::Sphere(p, a) => p * a,
        }
    }

    /// Half the resolution along every axis, rounded to a valid size.
    pub fn coarser(&self) -> Resolution {
        let half = |n: usize| ((n / 2) & !1).max(MIN_RESOLUTION);
        match *self {
            Resolution::Circle(n) => Resolution::Circle(half(n)),
            Resolution::Sphere(p, a) => Resolution::Sphere((p / 2).max(MIN_RESOLUTION), half(a)),
        }
    }
}

impl std::fmt::Display for Resolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Resolution::Circle(n) => write!(f, "{n}"),
            Resolution::Sphere(p, a) => write!(f, "{p}x{a}"),
        }
    }
}

/// Orthonormal tangent frame at a node. On the circle only `e1` is used.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub e1: Vector3<f64>,
    pub e2: Vector3<f64>,
}

/// Dense row-major differentiation matrix.
#[derive(Debug, Clone)]
pub struct DiffMatrix {
    size: usize,
    data: Vec<f64>,
}

impl DiffMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.size + col]
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.size);
        for (row, o) in self.data.chunks_exact(self.size).zip(out.iter_mut()) {
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    pub fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size];
        self.apply(x, &mut out);
        out
    }
}

/// First and second derivative matrices of the trigonometric interpolant
/// through `nodes` (an even number of distinct angles in one period).
///
/// The Lagrange basis is `ℓ_j(x) = Π_{k≠j} sin((x−x_k)/2) · cos((x−x_j)/2) / a_j`
/// with `a_j = Π_{k≠j} sin((x_j−x_k)/2)`; the products are kept in log form
/// because they underflow for a few hundred nodes.
pub fn trig_diff_matrices(nodes: &[f64]) -> (DiffMatrix, DiffMatrix) {
    let m = nodes.len();
    assert!(m >= 2 && m % 2 == 0, "trigonometric differentiation needs an even node count");
    let mut log_a = vec![0.0; m];
    let mut sign_a = vec![1.0; m];
    let mut sigma = vec![0.0; m];
    for i in 0..m {
        for k in 0..m {
            if k == i {
                continue;
            }
            let half = 0.5 * (nodes[i] - nodes[k]);
            let s = half.sin();
            log_a[i] += s.abs().ln();
            if s < 0.0 {
                sign_a[i] = -sign_a[i];
            }
            sigma[i] += 0.5 / half.tan();
        }
    }
    let mut d1 = vec![0.0; m * m];
    let mut d2 = vec![0.0; m * m];
    for i in 0..m {
        let mut row1 = 0.0;
        let mut row2 = 0.0;
        for j in 0..m {
            if j == i {
                continue;
            }
            let d = nodes[i] - nodes[j];
            let ratio = sign_a[i] * sign_a[j] * (log_a[i] - log_a[j]).exp();
            let first = 0.5 * ratio / (0.5 * d).tan();
            let second = 2.0 * first * (sigma[i] - 1.0 / d.sin());
            d1[i * m + j] = first;
            d2[i * m + j] = second;
            row1 += first;
            row2 += second;
        }
        d1[i * m + i] = -row1;
        d2[i * m + i] = -row2;
    }
    (DiffMatrix { size: m, data: d1 }, DiffMatrix { size: m, data: d2 })
}

/// Gauss–Legendre nodes and weights on [−1, 1], nodes in descending order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[derive(Debug)]
enum Operators {
    Circle {
        d1: DiffMatrix,
        d2: DiffMatrix,
    },
    Sphere {
        polar: Vec<f64>,
        meridian_d1: DiffMatrix,
        meridian_d2: DiffMatrix,
        ring_d1: DiffMatrix,
        ring_d2: DiffMatrix,
    },
}

/// Quadrature nodes, weights, tangent frames and differentiation operators.
///
/// Sphere nodes are stored ring by ring: index `j * N_φ + k` is polar node
/// `j` (θ increasing) and azimuth `2πk/N_φ`.
#[derive(Debug, Clone)]
pub struct Grid {
    resolution: Resolution,
    nodes: Vec<Vector3<f64>>,
    weights: Vec<f64>,
    frames: Vec<Frame>,
    ops: Arc<Operators>,
}

/// Builds a quadrature grid on S^{dim−1}.
pub fn build_grid(resolution: Resolution) -> Result<Grid> {
    match resolution {
        Resolution::Circle(n) => {
            if n < MIN_RESOLUTION || n % 2 != 0 {
                return Err(Error::InvalidResolution(format!(
                    "circle resolution must be even and at least {MIN_RESOLUTION}, got {n}"
                )));
            }
            let step = 2.0 * PI / n as f64;
            let angles: Vec<f64> = (0..n).map(|k| step * k as f64).collect();
            let nodes = angles.iter().map(|t| Vector3::new(t.cos(), t.sin(), 0.0)).collect();
            let frames = angles
                .iter()
                .map(|t| Frame {
                    e1: Vector3::new(-t.sin(), t.cos(), 0.0),
                    e2: Vector3::zeros(),
                })
                .collect();
            let (d1, d2) = trig_diff_matrices(&angles);
            Ok(Grid {
                resolution,
                nodes,
                weights: vec![step; n],
                frames,
                ops: Arc::new(Operators::Circle { d1, d2 }),
            })
        }
        Resolution::Sphere(np, na) => {
            if np < MIN_RESOLUTION || na < MIN_RESOLUTION || na % 2 != 0 {
                return Err(Error::InvalidResolution(format!(
                    "sphere resolution needs N_θ ≥ {MIN_RESOLUTION} and even N_φ ≥ {MIN_RESOLUTION}, got {np}x{na}"
                )));
            }
            let (x, w) = gauss_legendre(np);
            let polar: Vec<f64> = x.iter().map(|c| c.acos()).collect();
            let dphi = 2.0 * PI / na as f64;
            let azimuth: Vec<f64> = (0..na).map(|k| dphi * k as f64).collect();
            let mut nodes = Vec::with_capacity(np * na);
            let mut weights = Vec::with_capacity(np * na);
            let mut frames = Vec::with_capacity(np * na);
            for (j, &theta) in polar.iter().enumerate() {
                let (st, ct) = theta.sin_cos();
                for &phi in &azimuth {
                    let (sp, cp) = phi.sin_cos();
                    nodes.push(Vector3::new(st * cp, st * sp, ct));
                    weights.push(w[j] * dphi);
                    frames.push(Frame {
                        e1: Vector3::new(ct * cp, ct * sp, -st),
                        e2: Vector3::new(-sp, cp, 0.0),
                    });
                }
            }
            // Great circle through the poles: θ_j on this meridian, −θ_j on the opposite one.
            let circle: Vec<f64> = polar.iter().copied().chain(polar.iter().map(|t| -t)).collect();
            let (meridian_d1, meridian_d2) = trig_diff_matrices(&circle);
            let (ring_d1, ring_d2) = trig_diff_matrices(&azimuth);
            Ok(Grid {
                resolution,
                nodes,
                weights,
                frames,
                ops: Arc::new(Operators::Sphere {
                    polar,
                    meridian_d1,
                    meridian_d2,
                    ring_d1,
                    ring_d2,
                }),
            })
        }
    }
}

/// Derivatives of a scalar field in the grid's orthonormal tangent frame.
///
/// On the circle `gradient[i].x = f′` and `hessian[i][(0,0)] = f″`, all other
/// entries zero. On the sphere the frame is `(e_θ, e_φ)`.
#[derive(Debug, Clone)]
pub struct SurfaceDerivatives {
    pub gradient: Vec<Vector2<f64>>,
    pub hessian: Vec<Matrix2<f64>>,
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.resolution.dim()
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vector3<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    /// Polar angles of the rings (sphere only).
    pub fn polar_angles(&self) -> Option<&[f64]> {
        match &*self.ops {
            Operators::Sphere { polar, .. } => Some(polar),
            Operators::Circle { .. } => None,
        }
    }

    /// Measure of the whole sphere: 2π or 4π.
    pub fn sphere_measure(&self) -> f64 {
        if self.dim() == 2 {
            2.0 * PI
        } else {
            4.0 * PI
        }
    }

    /// Whether two grids share nodes (same resolution means same nodes).
    pub fn same_nodes(&self, other: &Grid) -> bool {
        self.resolution == other.resolution
    }

    fn check_values(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("value at node {i} is {}", values[i])));
        }
        Ok(())
    }

    /// Quadrature Σ w_i v_i.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        self.check_values(values)?;
        Ok(self.integrate_unchecked(values))
    }

    /// Second-derivative matrix of a circle grid.
    pub(crate) fn circle_d2(&self) -> Option<&DiffMatrix> {
        match &*self.ops {
            Operators::Circle { d2, .. } => Some(d2),
            Operators::Sphere { .. } => None,
        }
    }

    pub(crate) fn integrate_unchecked(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Gradient and covariant Hessian of the interpolant of `values`.
    pub fn differentiate(&self, values: &[f64]) -> Result<SurfaceDerivatives> {
        self.check_values(values)?;
        match &*self.ops {
            Operators::Circle { d1, d2 } => {
                let first = d1.apply_vec(values);
                let second = d2.apply_vec(values);
                Ok(SurfaceDerivatives {
                    gradient: first.iter().map(|&d| Vector2::new(d, 0.0)).collect(),
                    hessian: second.iter().map(|&d| Matrix2::new(d, 0.0, 0.0, 0.0)).collect(),
                })
            }
            Operators::Sphere { polar, .. } => {
                let parts = self.coordinate_derivatives(values);
                let (_, na) = self.sphere_shape();
                let mut gradient = Vec::with_capacity(self.len());
                let mut hessian = Vec::with_capacity(self.len());
                for (j, &theta) in polar.iter().enumerate() {
                    let (st, ct) = theta.sin_cos();
                    let cot = ct / st;
                    for k in 0..na {
                        let i = j * na + k;
                        let h11 = parts.tt[i];
                        let h12 = (parts.tp[i] - cot * parts.p[i]) / st;
                        let h22 = parts.pp[i] / (st * st) + cot * parts.t[i];
                        gradient.push(Vector2::new(parts.t[i], parts.p[i] / st));
                        hessian.push(Matrix2::new(h11, h12, h12, h22));
                    }
                }
                Ok(SurfaceDerivatives { gradient, hessian })
            }
        }
    }

    /// The off-diagonal covariant Hessian entry computed two ways: polar
    /// derivative of `f_φ`, and azimuthal derivative of `f_θ`.
    pub fn mixed_hessian_both_ways(&self, values: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_values(values)?;
        let polar = self.polar_angles().ok_or_else(|| {
            Error::InvalidResolution("mixed derivatives need a sphere grid".into())
        })?;
        let parts = self.coordinate_derivatives(values);
        let (np, na) = self.sphere_shape();
        let Operators::Sphere { ring_d1, .. } = &*self.ops else {
            unreachable!()
        };
        let mut pt = vec![0.0; self.len()];
        for j in 0..np {
            let ring = j * na..(j + 1) * na;
            ring_d1.apply(&parts.t[ring.clone()], &mut pt[ring]);
        }
        let mut a = Vec::with_capacity(self.len());
        let mut b = Vec::with_capacity(self.len());
        for (j, &theta) in polar.iter().enumerate() {
            let (st, ct) = theta.sin_cos();
            for k in 0..na {
                let i = j * na + k;
                a.push((parts.tp[i] - ct / st * parts.p[i]) / st);
                b.push((pt[i] - ct / st * parts.p[i]) / st);
            }
        }
        Ok((a, b))
    }

    fn sphere_shape(&self) -> (usize, usize) {
        match self.resolution {
            Resolution::Sphere(p, a) => (p, a),
            Resolution::Circle(n) => (1, n),
        }
    }

    /// Coordinate derivatives f_θ, f_θθ, f_φ, f_φφ, f_θφ on the sphere grid.
    fn coordinate_derivatives(&self, values: &[f64]) -> CoordinateParts {
        let Operators::Sphere {
            meridian_d1,
            meridian_d2,
            ring_d1,
            ring_d2,
            ..
        } = &*self.ops
        else {
            unreachable!("coordinate derivatives on a circle grid")
        };
        let (np, na) = self.sphere_shape();
        let total = self.len();
        let mut p = vec![0.0; total];
        let mut pp = vec![0.0; total];
        for j in 0..np {
            let ring = j * na..(j + 1) * na;
            ring_d1.apply(&values[ring.clone()], &mut p[ring.clone()]);
            ring_d2.apply(&values[ring.clone()], &mut pp[ring]);
        }
        let t = meridian_apply(values, meridian_d1, np, na, true);
        let tt = meridian_apply(values, meridian_d2, np, na, false);
        // f_φ is the derivative along the rotation field about e₃, a smooth
        // scalar on the sphere, so it extends across the poles without a sign flip.
        let tp = meridian_apply(&p, meridian_d1, np, na, true);
        CoordinateParts { t, tt, p, pp, tp }
    }
}

struct CoordinateParts {
    t: Vec<f64>,
    tt: Vec<f64>,
    p: Vec<f64>,
    pp: Vec<f64>,
    tp: Vec<f64>,
}

/// Applies a great-circle differentiation matrix to every meridian pair.
/// `odd` marks odd-order derivatives, which change sign on the far half
/// because the circle parameter runs opposite to θ there.
fn meridian_apply(values: &[f64], matrix: &DiffMatrix, np: usize, na: usize, odd: bool) -> Vec<f64> {
    let half = na / 2;
    let mut out = vec![0.0; values.len()];
    let mut circle = vec![0.0; 2 * np];
    let mut result = vec![0.0; 2 * np];
    let sign = if odd { -1.0 } else { 1.0 };
    for k in 0..half {
        let opposite = k + half;
        for j in 0..np {
            circle[j] = values[j * na + k];
            circle[np + j] = values[j * na + opposite];
        }
        matrix.apply(&circle, &mut result);
        for j in 0..np {
            out[j * na + k] = result[j];
            out[j * na + opposite] = sign * result[np + j];
        }
    }
    out
}
