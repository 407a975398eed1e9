//! Pointwise geometric fields of a body on a grid.

use nalgebra::{Matrix2, Vector2, Vector3};
use rayon::prelude::*;

use super::{Body, Jet};
use crate::error::{Error, Result};
use crate::sphere::Grid;

/// Where the derivatives of `h` come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeSource {
    /// Closed-form jets when the family has them, spectral otherwise.
    Auto,
    Analytic,
    Spectral,
}

/// Per-node fields. On the circle only the `(0,0)` entries of the 2×2
/// matrices and the first gradient component are meaningful.
#[derive(Debug, Clone)]
pub struct FieldTable {
    pub grid: Grid,
    pub h: Vec<f64>,
    pub gradient: Vec<Vector2<f64>>,
    pub hessian: Vec<Matrix2<f64>>,
    /// `Hess h + h·I`.
    pub curvature_matrix: Vec<Matrix2<f64>>,
    /// Curvature function `f_K = det(Hess h + h·I)`.
    pub curvature_function: Vec<f64>,
    /// Gauss curvature `K = 1/f_K`.
    pub gauss: Vec<f64>,
    /// Centro-affine curvature `K₀ = K/h^{n+1}`.
    pub k0: Vec<f64>,
    /// Density `h·f_K` of the cone measure against the spherical measure.
    pub cone_density: Vec<f64>,
    pub analytic: bool,
}

impl FieldTable {
    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// `∫ g dμ_K` for per-node values `g`.
    pub fn cone_integral(&self, g: &[f64]) -> f64 {
        let w = self.grid.weights();
        (0..self.len()).map(|i| w[i] * self.cone_density[i] * g[i]).sum()
    }

    /// Boundary point `X(u) = h u + ∇h` at node `i`.
    pub fn boundary_point(&self, i: usize) -> Vector3<f64> {
        let u = self.grid.nodes()[i];
        let fr = self.grid.frames()[i];
        u * self.h[i] + fr.e1 * self.gradient[i][0] + fr.e2 * self.gradient[i][1]
    }
}

pub fn evaluate_fields(body: &Body, grid: &Grid) -> Result<FieldTable> {
    evaluate_fields_with(body, grid, DerivativeSource::Auto)
}

fn determinant(a: &Matrix2<f64>, dim: usize) -> f64 {
    if dim == 2 {
        a[(0, 0)]
    } else {
        a.determinant()
    }
}

fn validation_error(grid: &Grid, node: usize, reason: String) -> Error {
    let u = grid.nodes()[node];
    Error::Validation {
        node,
        direction: [u.x, u.y, u.z],
        reason,
    }
}

pub fn evaluate_fields_with(body: &Body, grid: &Grid, source: DerivativeSource) -> Result<FieldTable> {
    let dim = body.dim();
    if grid.dim() != dim {
        return Err(Error::GridMismatch(format!("body has dimension {dim}, grid has {}", grid.dim())));
    }
    if !body.is_smooth() {
        return Err(Error::NotSmooth(body.describe()));
    }
    let analytic = match source {
        DerivativeSource::Auto => body.has_analytic_derivatives(),
        DerivativeSource::Analytic => {
            if !body.has_analytic_derivatives() {
                return Err(Error::NotSmooth(format!("{body} has no closed-form derivatives")));
            }
            true
        }
        DerivativeSource::Spectral => false,
    };
    let nodes = grid.nodes();
    let frames = grid.frames();
    let (h, gradient, hessian) = if analytic {
        let jets: Vec<Jet> = nodes
            .par_iter()
            .map(|u| {
                body.try_jet(u)?
                    .ok_or_else(|| Error::NotSmooth(format!("{body} has no closed-form derivatives")))
            })
            .collect::<Result<_>>()?;
        let mut h = Vec::with_capacity(jets.len());
        let mut gradient = Vec::with_capacity(jets.len());
        let mut hessian = Vec::with_capacity(jets.len());
        for (i, j) in jets.iter().enumerate() {
            let e = [frames[i].e1, frames[i].e2];
            let m = dim - 1;
            let mut g = Vector2::zeros();
            let mut a = Matrix2::zeros();
            for p in 0..m {
                g[p] = e[p].dot(&j.gradient);
                for q in 0..m {
                    a[(p, q)] = e[p].dot(&(j.hessian * e[q]));
                }
            }
            // The tangential block of ∇²H is Hess h + h·I.
            let sym = (a + a.transpose()) * 0.5;
            let mut hess = sym;
            for p in 0..m {
                hess[(p, p)] -= j.value;
            }
            h.push(j.value);
            gradient.push(g);
            hessian.push(hess);
        }
        (h, gradient, hessian)
    } else {
        let h: Vec<f64> = nodes.par_iter().map(|u| body.try_support(u)).collect::<Result<_>>()?;
        if let Some(i) = h.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("support value at node {i}")));
        }
        let d = grid.differentiate(&h)?;
        (h, d.gradient, d.hessian)
    };
    build_table(grid, h, gradient, hessian, analytic)
}

/// Assembles and validates a table from node values and derivatives.
pub(crate) fn build_table(
    grid: &Grid,
    h: Vec<f64>,
    gradient: Vec<Vector2<f64>>,
    hessian: Vec<Matrix2<f64>>,
    analytic: bool,
) -> Result<FieldTable> {
    let dim = grid.dim();
    let n = dim as i32;
    if let Some(i) = h.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("support value at node {i}")));
    }
    // Report the worst offending node.
    let worst_h = (0..h.len()).min_by(|&a, &b| h[a].total_cmp(&h[b])).unwrap_or(0);
    if !(h[worst_h] > 0.0) {
        return Err(validation_error(
            grid,
            worst_h,
            format!("support function h = {} is not positive (origin not interior)", h[worst_h]),
        ));
    }
    let mut curvature_matrix = Vec::with_capacity(h.len());
    let mut min_eig = Vec::with_capacity(h.len());
    for i in 0..h.len() {
        let mut a = hessian[i];
        a[(0, 0)] += h[i];
        if dim == 3 {
            a[(1, 1)] += h[i];
        } else {
            a[(1, 1)] = 0.0;
        }
        let low = if dim == 2 {
            a[(0, 0)]
        } else {
            let mean = 0.5 * (a[(0, 0)] + a[(1, 1)]);
            let dev = (0.25 * (a[(0, 0)] - a[(1, 1)]).powi(2) + a[(0, 1)] * a[(1, 0)]).max(0.0).sqrt();
            mean - dev
        };
        curvature_matrix.push(a);
        min_eig.push(low);
    }
    if let Some(i) = min_eig.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("curvature matrix at node {i}")));
    }
    let worst = (0..h.len()).min_by(|&a, &b| min_eig[a].total_cmp(&min_eig[b])).unwrap_or(0);
    if !(min_eig[worst] > 0.0) {
        let what = if dim == 2 { "curvature function h″ + h" } else { "smallest curvature eigenvalue of Hess h + h·I" };
        return Err(validation_error(grid, worst, format!("{what} = {} is not positive", min_eig[worst])));
    }
    let curvature_function: Vec<f64> = curvature_matrix.iter().map(|a| determinant(a, dim)).collect();
    let gauss: Vec<f64> = curvature_function.iter().map(|f| 1.0 / f).collect();
    let k0: Vec<f64> = gauss.iter().zip(&h).map(|(k, hv)| k / hv.powi(n + 1)).collect();
    let cone_density: Vec<f64> = h.iter().zip(&curvature_function).map(|(a, b)| a * b).collect();
    Ok(FieldTable {
        grid: grid.clone(),
        h,
        gradient,
        hessian,
        curvature_matrix,
        curvature_function,
        gauss,
        k0,
        cone_density,
        analytic,
    })
}

/// Extrema of a field, from the grid and after local refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrema {
    pub min: f64,
    pub max: f64,
    pub grid_min: f64,
    pub grid_max: f64,
    pub argmin: usize,
    pub argmax: usize,
}

/// Extremal value of the parabola through three points, if its vertex lies
/// between the outer two.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> Option<f64> {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let c = (d2 - d1) / (x[2] - x[0]);
    if c == 0.0 || !c.is_finite() {
        return None;
    }
    // y = y[1] + b (t − x1) + c (t − x1)², with b the derivative at x1.
    let b = d1 + c * (x[1] - x[0]);
    let t = -b / (2.0 * c);
    if t + x[1] < x[0] || t + x[1] > x[2] {
        return None;
    }
    Some(y[1] + b * t + c * t * t)
}

/// Correction `vertex − y[1]` with the sign appropriate for a minimum
/// (`want_min`) or maximum; zero when the fit curves the wrong way.
fn correction(x: [f64; 3], y: [f64; 3], want_min: bool) -> f64 {
    match parabola_vertex(x, y) {
        Some(v) if (want_min && v <= y[1]) || (!want_min && v >= y[1]) => v - y[1],
        _ => 0.0,
    }
}

fn refine(values: &[f64], grid: &Grid, i: usize, want_min: bool) -> f64 {
    let y0 = values[i];
    if let Some(polar) = grid.polar_angles() {
        let np = polar.len();
        let na = values.len() / np;
        let (j, k) = (i / na, i % na);
        let dphi = 2.0 * std::f64::consts::PI / na as f64;
        let ring = correction(
            [-dphi, 0.0, dphi],
            [values[j * na + (k + na - 1) % na], y0, values[j * na + (k + 1) % na]],
            want_min,
        );
        // Across a pole the neighbour is the node on the opposite meridian.
        let opposite = (k + na / 2) % na;
        let (tp, yp) = if j == 0 {
            (-polar[0], values[opposite])
        } else {
            (polar[j - 1], values[(j - 1) * na + k])
        };
        let (tn, yn) = if j + 1 == np {
            (2.0 * std::f64::consts::PI - polar[j], values[j * na + opposite])
        } else {
            (polar[j + 1], values[(j + 1) * na + k])
        };
        let meridian = correction([tp, polar[j], tn], [yp, y0, yn], want_min);
        y0 + ring + meridian
    } else {
        let n = values.len();
        let step = 2.0 * std::f64::consts::PI / n as f64;
        trig_newton(values, i, want_min).unwrap_or_else(|| {
            y0 + correction([-step, 0.0, step], [values[(i + n - 1) % n], y0, values[(i + 1) % n]], want_min)
        })
    }
}

/// Newton iteration for a critical point of the trigonometric interpolant
/// of uniformly sampled `values`, started at node `i`. Gives up if the
/// curvature has the wrong sign or the iterate leaves the neighbouring cells.
fn trig_newton(values: &[f64], i: usize, want_min: bool) -> Option<f64> {
    let n = values.len();
    let half = n / 2;
    let step = 2.0 * std::f64::consts::PI / n as f64;
    let cos_table: Vec<f64> = (0..n).map(|m| (step * m as f64).cos()).collect();
    let sin_table: Vec<f64> = (0..n).map(|m| (step * m as f64).sin()).collect();
    let mut a = vec![0.0; half + 1];
    let mut b = vec![0.0; half + 1];
    for k in 0..=half {
        for (j, v) in values.iter().enumerate() {
            let m = (k * j) % n;
            a[k] += v * cos_table[m];
            b[k] += v * sin_table[m];
        }
        let w = if k == 0 || 2 * k == n { 1.0 / n as f64 } else { 2.0 / n as f64 };
        a[k] *= w;
        b[k] *= w;
    }
    // Value, first and second derivative at θ.
    let eval = |theta: f64| {
        let mut out = [0.0; 3];
        for k in 0..=half {
            let kf = k as f64;
            let (s, c) = (kf * theta).sin_cos();
            let (ak, bk) = if 2 * k == n { (a[k], 0.0) } else { (a[k], b[k]) };
            out[0] += ak * c + bk * s;
            out[1] += kf * (bk * c - ak * s);
            out[2] -= kf * kf * (ak * c + bk * s);
        }
        out
    };
    let start = step * i as f64;
    let mut theta = start;
    for _ in 0..30 {
        let [_, d1, d2] = eval(theta);
        if (want_min && d2 <= 0.0) || (!want_min && d2 >= 0.0) {
            return None;
        }
        let delta = d1 / d2;
        theta -= delta;
        if (theta - start).abs() > step {
            return None;
        }
        if delta.abs() < 1e-15 {
            break;
        }
    }
    Some(eval(theta)[0])
}

/// Extrema of `values` on `grid` with local refinement: Newton on the
/// trigonometric interpolant on the circle, one quadratic fit per axis on
/// the sphere.
pub fn field_extrema(values: &[f64], grid: &Grid) -> Extrema {
    let argmin = (0..values.len()).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    let argmax = (0..values.len()).max_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    let grid_min = values[argmin];
    let grid_max = values[argmax];
    let mut min = refine(values, grid, argmin, true).min(grid_min);
    let mut max = refine(values, grid, argmax, false).max(grid_max);
    if grid_max - grid_min <= 1e-14 * grid_max.abs() {
        // Constant field: keep the grid values exactly.
        min = grid_min;
        max = grid_max;
    }
    Extrema {
        min,
        max,
        grid_min,
        grid_max,
        argmin,
        argmax,
    }
}

/// Minimum `m` and maximum `M` of the centro-affine curvature.
pub fn curvature_extrema(fields: &FieldTable) -> Extrema {
    field_extrema(&fields.k0, &fields.grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{FourierTerm, HarmonicTerm};
    use crate::sphere::{build_grid, Resolution};
    use std::f64::consts::PI;

    fn circle(n: usize) -> Grid {
        build_grid(Resolution::Circle(n)).unwrap()
    }

    #[test]
    fn unit_ball_fields() {
        let g = build_grid(Resolution::Sphere(16, 32)).unwrap();
        let f = evaluate_fields(&Body::unit_ball(3).unwrap(), &g).unwrap();
        for i in 0..f.len() {
            assert!((f.h[i] - 1.0).abs() < 1e-14);
            assert!((f.curvature_function[i] - 1.0).abs() < 1e-13);
            assert!((f.k0[i] - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn ellipse_centro_affine_curvature() {
        let f = evaluate_fields(&Body::ellipsoid(&[2.0, 1.0]).unwrap(), &circle(64)).unwrap();
        assert!(f.k0.iter().all(|k| (k - 0.25).abs() < 1e-12));
        for i in 0..f.len() {
            let consistency = f.k0[i] * f.h[i].powi(3) * f.curvature_function[i];
            assert!((consistency - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn analytic_and_spectral_agree() {
        let g = circle(256);
        let b = Body::fourier(1.0, &[FourierTerm { k: 3, a: 0.05, b: 0.0 }]).unwrap();
        let a = evaluate_fields_with(&b, &g, DerivativeSource::Analytic).unwrap();
        let s = evaluate_fields_with(&b, &g, DerivativeSource::Spectral).unwrap();
        let diff = a.k0.iter().zip(&s.k0).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn analytic_and_spectral_agree_on_sphere() {
        let g = build_grid(Resolution::Sphere(32, 64)).unwrap();
        let b = Body::sphharm(&[
            HarmonicTerm { l: 0, m: 0, c: (4.0 * PI).sqrt() },
            HarmonicTerm { l: 2, m: 1, c: 0.04 },
            HarmonicTerm { l: 3, m: -3, c: 0.02 },
        ])
        .unwrap();
        let a = evaluate_fields_with(&b, &g, DerivativeSource::Analytic).unwrap();
        let s = evaluate_fields_with(&b, &g, DerivativeSource::Spectral).unwrap();
        let diff = a.k0.iter().zip(&s.k0).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-6, "{diff}");
    }

    #[test]
    fn translation_keeps_curvature_function() {
        let g = circle(128);
        let disk = Body::unit_ball(2).unwrap();
        let t = disk.translate(&Vector3::new(0.3, 0.0, 0.0)).unwrap();
        let fd = evaluate_fields(&disk, &g).unwrap();
        let ft = evaluate_fields(&t, &g).unwrap();
        for i in 0..g.len() {
            assert!((fd.curvature_function[i] - ft.curvature_function[i]).abs() < 1e-14);
            let theta = 2.0 * PI * i as f64 / 128.0;
            assert!((ft.k0[i] - (1.0 + 0.3 * theta.cos()).powi(-3)).abs() < 1e-12);
        }
        let ex = curvature_extrema(&ft);
        assert!((ex.min - 1.3f64.powi(-3)).abs() < 1e-12);
        assert!((ex.max - 0.7f64.powi(-3)).abs() < 1e-12);
    }

    #[test]
    fn refinement_finds_off_grid_extremum() {
        // cos(θ − δ) peaks between nodes.
        let g = circle(64);
        let delta = 0.37 * 2.0 * PI / 64.0;
        let vals: Vec<f64> = g.nodes().iter().map(|u| 2.0 + (u.y.atan2(u.x) - delta).cos()).collect();
        let ex = field_extrema(&vals, &g);
        assert!(ex.max > ex.grid_max);
        assert!((ex.max - 3.0).abs() < 1e-14);
        assert!((ex.min - 1.0).abs() < 1e-14);
    }

    #[test]
    fn refinement_on_sphere() {
        let g = build_grid(Resolution::Sphere(24, 48)).unwrap();
        let axis = Vector3::new(0.3, 0.2, 0.9).normalize();
        let vals: Vec<f64> = g.nodes().iter().map(|u| 2.0 + u.dot(&axis)).collect();
        let ex = field_extrema(&vals, &g);
        assert!((ex.max - 3.0).abs() < 2e-4, "{}", ex.max);
        assert!(ex.max >= ex.grid_max);
        // Extremum near a pole exercises the across-pole neighbour.
        let vals: Vec<f64> = g.nodes().iter().map(|u| 2.0 + u.z).collect();
        let ex = field_extrema(&vals, &g);
        assert!((ex.max - 3.0).abs() < 1e-4, "{}", ex.max);
    }

    #[test]
    fn rejects_mismatched_grid() {
        let g = build_grid(Resolution::Sphere(8, 16)).unwrap();
        assert!(matches!(
            evaluate_fields(&Body::unit_ball(2).unwrap(), &g),
            Err(Error::GridMismatch(_))
        ));
    }
}
