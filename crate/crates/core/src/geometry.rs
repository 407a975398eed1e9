//! Volumes, surface area, mixed curvature functions, polar and Aleksandrov
//! bodies.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use crate::body::{Body, FieldTable, PolarSeeds};
use crate::error::{Error, Result};
use crate::sphere::Grid;

/// `Vol(K) = (1/n) ∫ h f_K dσ`.
pub fn volume(fields: &FieldTable) -> f64 {
    fields.grid.integrate_unchecked(&fields.cone_density) / fields.dim() as f64
}

/// `Vol(K°) = (1/n) ∫ K₀ dμ_K`.
pub fn polar_volume(fields: &FieldTable) -> f64 {
    fields.cone_integral(&fields.k0) / fields.dim() as f64
}

/// `S(K) = ∫ f_K dσ`.
pub fn surface_area(fields: &FieldTable) -> f64 {
    fields.grid.integrate_unchecked(&fields.curvature_function)
}

/// Centroid `(1/((n+1) Vol)) ∫ X(u) h f_K dσ`.
pub fn centroid(fields: &FieldTable) -> Vector3<f64> {
    let w = fields.grid.weights();
    let mut sum = Vector3::zeros();
    for i in 0..fields.len() {
        sum += fields.boundary_point(i) * (w[i] * fields.cone_density[i]);
    }
    sum / ((fields.dim() as f64 + 1.0) * volume(fields))
}

/// Surface area of `T K`: `|det T| ∫ |T^{-T} u| f_K dσ`.
pub fn surface_area_of_image(fields: &FieldTable, t: &Matrix3<f64>) -> Result<f64> {
    let dim = fields.dim();
    let mut m = *t;
    if dim == 2 {
        for i in 0..3 {
            m[(2, i)] = 0.0;
            m[(i, 2)] = 0.0;
        }
        m[(2, 2)] = 1.0;
    }
    let det = crate::body::block_determinant(&m, dim);
    let inv_t = m
        .try_inverse()
        .filter(|_| det.abs() > 1e-300)
        .ok_or(Error::SingularMatrix(det))?
        .transpose();
    let w = fields.grid.weights();
    let nodes = fields.grid.nodes();
    let total: f64 = (0..fields.len())
        .map(|i| w[i] * (inv_t * nodes[i]).norm() * fields.curvature_function[i])
        .sum();
    Ok(det.abs() * total)
}

/// Node values and covariant Hessians of the `n − 1` functions entering a
/// mixed curvature function.
#[derive(Debug, Clone)]
pub struct MixedCurvatureInput {
    pub grid: Grid,
    pub values: Vec<Vec<f64>>,
    pub hessians: Vec<Vec<Matrix2<f64>>>,
}

impl MixedCurvatureInput {
    /// Differentiates each function spectrally.
    pub fn from_values(grid: &Grid, functions: &[&[f64]]) -> Result<Self> {
        let mut values = Vec::with_capacity(functions.len());
        let mut hessians = Vec::with_capacity(functions.len());
        for f in functions {
            let d = grid.differentiate(f)?;
            values.push(f.to_vec());
            hessians.push(d.hessian);
        }
        Ok(MixedCurvatureInput {
            grid: grid.clone(),
            values,
            hessians,
        })
    }

    /// All `n − 1` slots filled with the support function of `fields`.
    pub fn support(fields: &FieldTable) -> Self {
        let m = fields.dim() - 1;
        MixedCurvatureInput {
            grid: fields.grid.clone(),
            values: vec![fields.h.clone(); m],
            hessians: vec![fields.hessian.clone(); m],
        }
    }

    fn matrix(&self, slot: usize, node: usize) -> Matrix2<f64> {
        let mut a = self.hessians[slot][node];
        let f = self.values[slot][node];
        a[(0, 0)] += f;
        a[(1, 1)] += f;
        a
    }
}

/// `D(A, B) = ½(a₁₁b₂₂ + a₂₂b₁₁ − a₁₂b₂₁ − a₂₁b₁₂)`.
pub fn mixed_determinant(a: &Matrix2<f64>, b: &Matrix2<f64>) -> f64 {
    0.5 * (a[(0, 0)] * b[(1, 1)] + a[(1, 1)] * b[(0, 0)] - a[(0, 1)] * b[(1, 0)] - a[(1, 0)] * b[(0, 1)])
}

/// `s(f)= f″ + f` on the circle, `D(Hess f + fI, Hess g + gI)` on the sphere.
pub fn mixed_curvature(input: &MixedCurvatureInput) -> Result<Vec<f64>> {
    let dim = input.grid.dim();
    if input.values.len() != dim - 1 || input.hessians.len() != dim - 1 {
        return Err(Error::InvalidParameter(format!(
            "mixed curvature in dimension {dim} takes {} functions, got {}",
            dim - 1,
            input.values.len()
        )));
    }
    let n = input.grid.len();
    for (v, h) in input.values.iter().zip(&input.hessians) {
        if v.len() != n || h.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                found: v.len().min(h.len()),
            });
        }
    }
    Ok((0..n)
        .map(|i| {
            if dim == 2 {
                input.hessians[0][i][(0, 0)] + input.values[0][i]
            } else {
                mixed_determinant(&input.matrix(0, i), &input.matrix(1, i))
            }
        })
        .collect())
}

/// `V(f₀, f₁, …, f_{n−1}) = (1/n) ∫ f₀ s(f₁, …, f_{n−1}) dσ`.
pub fn mixed_integral(f0: &[f64], rest: &MixedCurvatureInput) -> Result<f64> {
    let s = mixed_curvature(rest)?;
    if f0.len() != s.len() {
        return Err(Error::GridMismatch(format!("{} values for a grid of {} nodes", f0.len(), s.len())));
    }
    let prod: Vec<f64> = f0.iter().zip(&s).map(|(a, b)| a * b).collect();
    Ok(rest.grid.integrate(&prod)? / rest.grid.dim() as f64)
}

/// Numerical polar body `K°`.
pub fn polar_body(body: &Body, grid: &Grid) -> Result<Body> {
    if grid.dim() != body.dim() {
        return Err(Error::GridMismatch(format!("body has dimension {}, grid has {}", body.dim(), grid.dim())));
    }
    body.polar_of(grid)
}

/// Radial function `ρ_K(v) = 1/h_{K°}(v)` for a unit vector `v`.
pub fn radial_function(body: &Body, v: &Vector3<f64>) -> Result<f64> {
    Ok(radial_functions(body, std::slice::from_ref(v))?[0])
}

/// Radial function in many directions, sharing one set of seeds.
pub fn radial_functions(body: &Body, dirs: &[Vector3<f64>]) -> Result<Vec<f64>> {
    let seeds = PolarSeeds::new(body, crate::body::validation_grid(body.dim()))?;
    dirs.iter()
        .map(|v| Ok(1.0 / crate::body::polar_support(body, &v.normalize(), &seeds)?))
        .collect()
}

fn cross(o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Counter-clockwise convex hull, collinear points dropped.
fn convex_hull(points: &[Vector2<f64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| points[a].x.total_cmp(&points[b].x).then(points[a].y.total_cmp(&points[b].y)));
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for pass in 0..2 {
        let start = hull.len();
        let order: Box<dyn Iterator<Item = &usize>> = if pass == 0 { Box::new(idx.iter()) } else { Box::new(idx.iter().rev()) };
        for &i in order {
            while hull.len() >= start + 2
                && cross(&points[hull[hull.len() - 2]], &points[hull[hull.len() - 1]], &points[i]) <= 0.0
            {
                hull.pop();
            }
            hull.push(i);
        }
        hull.pop();
    }
    hull
}

/// Result of the planar Aleksandrov construction.
#[derive(Debug, Clone)]
pub struct Aleksandrov {
    pub body: Body,
    /// `h_{A_f}` at the grid nodes.
    pub support: Vec<f64>,
    /// Nodes whose dual point `u/f(u)` is a hull vertex.
    pub extreme: Vec<bool>,
}

impl Aleksandrov {
    /// `max (f − h_{A_f})` over the nodes; zero when `f` is a support function.
    pub fn defect(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.support).map(|(a, b)| a - b).fold(0.0, f64::max)
    }
}

/// Largest convex body whose support function lies below `f` at the nodes,
/// built as the polar of the hull of the dual points `u_i/f_i`.
pub fn aleksandrov_body(f: &[f64], grid: &Grid) -> Result<Aleksandrov> {
    if grid.dim() != 2 {
        return Err(Error::UnsupportedDimension(grid.dim()));
    }
    if f.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            found: f.len(),
        });
    }
    if let Some(i) = f.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidParameter(format!("f must be positive and finite; f[{i}] = {}", f[i])));
    }
    let dual: Vec<Vector2<f64>> = grid
        .nodes()
        .iter()
        .zip(f)
        .map(|(u, fi)| Vector2::new(u.x / fi, u.y / fi))
        .collect();
    let hull = convex_hull(&dual);
    if hull.len() < 3 {
        return Err(Error::DegenerateHull(format!("hull has {} vertices", hull.len())));
    }
    let mut vertices = Vec::with_capacity(hull.len());
    for k in 0..hull.len() {
        let a = dual[hull[k]];
        let b = dual[hull[(k + 1) % hull.len()]];
        // x·a = 1 = x·b; the origin must lie strictly left of each edge.
        let det = a.x * b.y - a.y * b.x;
        if !(det > 0.0) {
            return Err(Error::DegenerateHull("origin is not interior to the dual hull".into()));
        }
        vertices.push(Vector2::new((b.y - a.y) / det, (a.x - b.x) / det));
    }
    let mut extreme = vec![false; f.len()];
    for &i in &hull {
        extreme[i] = true;
    }
    let body = Body::polygon(vertices);
    let support = grid.nodes().iter().map(|u| body.support(u)).collect();
    Ok(Aleksandrov { body, support, extreme })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{evaluate_fields, FourierTerm};
    use crate::sphere::{build_grid, Resolution};
    use std::f64::consts::PI;

    fn circle(n: usize) -> Grid {
        build_grid(Resolution::Circle(n)).unwrap()
    }

    /// Perimeter of an ellipse through the arithmetic–geometric mean.
    fn ellipse_perimeter(a: f64, b: f64) -> f64 {
        let (mut x, mut y) = (a, b);
        let mut c = ((a * a - b * b) / (a * a)).sqrt() * a;
        let mut sum = 0.5 * c * c;
        let mut pow = 0.5;
        for _ in 0..20 {
            c = 0.5 * (x - y);
            let nx = 0.5 * (x + y);
            y = (x * y).sqrt();
            x = nx;
            pow *= 2.0;
            sum += pow * c * c;
        }
        2.0 * PI * (a * a - sum) / x
    }

    #[test]
    fn volumes_and_areas() {
        let g = circle(256);
        let disk = evaluate_fields(&Body::unit_ball(2).unwrap(), &g).unwrap();
        assert!((volume(&disk) - PI).abs() < 1e-13);
        assert!((polar_volume(&disk) - PI).abs() < 1e-13);
        assert!((surface_area(&disk) - 2.0 * PI).abs() < 1e-13);
        let ell = evaluate_fields(&Body::ellipsoid(&[2.0, 1.0]).unwrap(), &g).unwrap();
        assert!((volume(&ell) - 2.0 * PI).abs() < 1e-12);
        assert!((polar_volume(&ell) - PI / 2.0).abs() < 1e-12);
        let p = ellipse_perimeter(2.0, 1.0);
        assert!((p - 9.688448220547675).abs() < 1e-9, "{p}");
        assert!((surface_area(&ell) - p).abs() < 1e-10);
        let ball = evaluate_fields(&Body::unit_ball(3).unwrap(), &build_grid(Resolution::Sphere(64, 128)).unwrap())
            .unwrap();
        assert!((volume(&ball) - 4.0 * PI / 3.0).abs() < 1e-10);
        assert!((surface_area(&ball) - 4.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn translated_disk_polar_area() {
        let g = circle(512);
        let t = Body::unit_ball(2).unwrap().translate(&Vector3::new(0.3, 0.0, 0.0)).unwrap();
        let f = evaluate_fields(&t, &g).unwrap();
        let expect = PI / (1.0f64 - 0.09).powf(1.5);
        assert!((polar_volume(&f) - expect).abs() < 1e-11);
        assert!((expect - 3.618993).abs() < 1e-6);
    }

    #[test]
    fn mixed_curvature_examples() {
        let g = circle(64);
        let f: Vec<f64> = g.nodes().iter().map(|u| (3.0 * u.y.atan2(u.x)).cos()).collect();
        let s = mixed_curvature(&MixedCurvatureInput::from_values(&g, &[&f]).unwrap()).unwrap();
        for (a, b) in s.iter().zip(&f) {
            assert!((a + 8.0 * b).abs() < 1e-11);
        }
        let g3 = build_grid(Resolution::Sphere(16, 32)).unwrap();
        let one = vec![1.0; g3.len()];
        let s = mixed_curvature(&MixedCurvatureInput::from_values(&g3, &[&one, &one]).unwrap()).unwrap();
        let err = s.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        assert!(err < 1e-11, "{err}");
        let bad = MixedCurvatureInput::from_values(&g3, &[&one]).unwrap();
        assert!(matches!(mixed_curvature(&bad), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn polarization_identity() {
        let a = Matrix2::new(1.3, 0.2, 0.2, 0.7);
        let b = Matrix2::new(-0.4, 0.9, 0.9, 2.1);
        let lhs = (a + b).determinant() - a.determinant() - b.determinant();
        assert!((lhs - 2.0 * mixed_determinant(&a, &b)).abs() < 1e-14);
    }

    #[test]
    fn mixed_integrals() {
        let g = circle(256);
        let disk = evaluate_fields(&Body::unit_ball(2).unwrap(), &g).unwrap();
        let ell = evaluate_fields(&Body::ellipsoid(&[2.0, 1.0]).unwrap(), &g).unwrap();
        assert!((mixed_integral(&disk.h, &MixedCurvatureInput::support(&disk)).unwrap() - PI).abs() < 1e-13);
        let v = mixed_integral(&ell.h, &MixedCurvatureInput::support(&ell)).unwrap();
        assert!((v - volume(&ell)).abs() < 1e-12);
        let mw = mixed_integral(&ell.h, &MixedCurvatureInput::support(&disk)).unwrap();
        assert!((mw - ellipse_perimeter(2.0, 1.0) / 2.0).abs() < 1e-10);
        assert!((mw - 4.84422).abs() < 1e-5);
    }

    #[test]
    fn polar_of_ellipses() {
        let g = circle(256);
        let e = Body::ellipsoid(&[2.0, 1.0]).unwrap();
        let p = polar_body(&e, &g).unwrap();
        assert!((p.support(&Vector3::x()) - 0.5).abs() < 1e-12);
        assert!((p.support(&Vector3::y()) - 1.0).abs() < 1e-12);
        let ball = Body::unit_ball(3).unwrap();
        let pb = polar_body(&ball, &build_grid(Resolution::Sphere(16, 32)).unwrap()).unwrap();
        assert!((pb.support(&Vector3::new(0.48, 0.6, 0.64)) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn double_polar_recovers_body() {
        let g = circle(256);
        let b = Body::fourier(1.0, &[FourierTerm { k: 3, a: 0.05, b: 0.01 }, FourierTerm { k: 2, a: 0.03, b: 0.0 }])
            .unwrap()
            .translate(&Vector3::new(0.1, 0.05, 0.0))
            .unwrap();
        let pp = polar_body(&polar_body(&b, &g).unwrap(), &g).unwrap();
        let f = evaluate_fields(&b, &g).unwrap();
        let fp = evaluate_fields(&pp, &g).unwrap();
        let dh = f.h.iter().zip(&fp.h).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        let dk = f.k0.iter().zip(&fp.k0).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        assert!(dh < 1e-12, "{dh}");
        assert!(dk < 1e-8, "{dk}");
    }

    #[test]
    fn radial_function_values() {
        let disk = Body::unit_ball(2).unwrap();
        assert!((radial_function(&disk, &Vector3::new(0.6, 0.8, 0.0)).unwrap() - 1.0).abs() < 1e-13);
        let e = Body::ellipsoid(&[2.0, 1.0]).unwrap();
        assert!((radial_function(&e, &Vector3::x()).unwrap() - 2.0).abs() < 1e-12);
        let d = Vector3::new(1.0, 1.0, 0.0).normalize();
        let expect = (2.0f64 / (0.25 + 1.0)).sqrt();
        assert!((radial_function(&e, &d).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn boundary_map_is_a_polar_oracle() {
        // h_{K°}(X/|X|) = 1/|X| at every boundary point X(u).
        let g = circle(64);
        let b = Body::fourier(1.0, &[FourierTerm { k: 4, a: 0.03, b: -0.02 }]).unwrap();
        let f = evaluate_fields(&b, &g).unwrap();
        let p = polar_body(&b, &g).unwrap();
        for i in 0..g.len() {
            let x = f.boundary_point(i);
            assert!((p.support(&x.normalize()) - 1.0 / x.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn aleksandrov_examples() {
        let g = circle(256);
        let ell = evaluate_fields(&Body::ellipsoid(&[2.0, 1.0]).unwrap(), &g).unwrap();
        let a = aleksandrov_body(&ell.h, &g).unwrap();
        assert!(a.support.iter().zip(&ell.h).all(|(x, y)| (x - y).abs() < 1e-10));
        let c = vec![1.7; g.len()];
        let a = aleksandrov_body(&c, &g).unwrap();
        assert!(a.support.iter().all(|x| (x - 1.7).abs() < 1e-12));
        // 1 − ½|cos θ| has a concave kink at θ = ±π/2, so it is not a support function.
        let f: Vec<f64> = g.nodes().iter().map(|u| 1.0 - 0.5 * u.x.abs()).collect();
        let a = aleksandrov_body(&f, &g).unwrap();
        assert!(a.support.iter().zip(&f).all(|(x, y)| *x <= y + 1e-12));
        assert!(a.defect(&f) > 1e-3);
        for i in 0..g.len() {
            if a.extreme[i] {
                assert!((a.support[i] - f[i]).abs() < 1e-12);
            }
        }
        // A disk plus a segment: this one is a support function.
        let f: Vec<f64> = g.nodes().iter().map(|u| 1.0 + 0.5 * u.x.abs()).collect();
        assert!(aleksandrov_body(&f, &g).unwrap().defect(&f) < 1e-12);
    }

    #[test]
    fn image_surface_area() {
        let g = circle(256);
        let disk = evaluate_fields(&Body::unit_ball(2).unwrap(), &g).unwrap();
        let t = Matrix3::new(2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        let direct = evaluate_fields(&Body::ellipsoid(&[2.0, 1.0]).unwrap(), &g).unwrap();
        let s = surface_area_of_image(&disk, &t).unwrap();
        assert!((s - surface_area(&direct)).abs() < 1e-11);
    }

    #[test]
    fn centroids() {
        let g = circle(128);
        let t = Body::unit_ball(2).unwrap().translate(&Vector3::new(0.3, -0.1, 0.0)).unwrap();
        let c = centroid(&evaluate_fields(&t, &g).unwrap());
        assert!((c - Vector3::new(0.3, -0.1, 0.0)).norm() < 1e-13);
        let g3 = build_grid(Resolution::Sphere(24, 48)).unwrap();
        let t = Body::ellipsoid(&[1.2, 1.0, 0.8]).unwrap().translate(&Vector3::new(0.1, 0.0, -0.2)).unwrap();
        let c = centroid(&evaluate_fields(&t, &g3).unwrap());
        assert!((c - Vector3::new(0.1, 0.0, -0.2)).norm() < 1e-10);
    }
}
