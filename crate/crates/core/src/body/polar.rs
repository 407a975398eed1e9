//! Support function of the polar body, `h°(v) = max_u (u·v)/h(u)`.
//!
//! The maximum is seeded from the best dual point `u_i/h(u_i)` of a coarse
//! grid and refined by safeguarded Newton ascent in a gnomonic chart around
//! the current iterate. The objective is 0-homogeneous in `u`, so the chart
//! needs no normalization. Derivatives of `h°` follow from the envelope
//! theorem: the gradient is the maximizing dual point and the Hessian is the
//! implicit derivative of that point.

use nalgebra::{Matrix2, Vector2, Vector3};

use super::{Body, Jet};
use crate::error::{Error, Result};
use crate::sphere::{build_grid, Resolution};

const MAX_ITERATIONS: usize = 60;
const STEP_TOLERANCE: f64 = 1e-11;

/// Dual points of a coarse grid, used to seed each maximization.
#[derive(Debug, Clone)]
pub struct PolarSeeds {
    points: Vec<Vector3<f64>>,
}

impl PolarSeeds {
    pub fn new(base: &Body, _seed_grid: &crate::sphere::Grid) -> Result<PolarSeeds> {
        if !base.has_analytic_derivatives() {
            return Err(Error::NotSmooth(format!("polar of {base} needs a body with closed-form derivatives")));
        }
        let res = if base.dim() == 2 {
            Resolution::Circle(256)
        } else {
            Resolution::Sphere(32, 64)
        };
        let grid = build_grid(res)?;
        let mut points = Vec::with_capacity(grid.len());
        for (i, u) in grid.nodes().iter().enumerate() {
            let h = base.try_support(u)?;
            if !(h > 0.0) {
                return Err(Error::Validation {
                    node: i,
                    direction: [u.x, u.y, u.z],
                    reason: format!("support function h = {h} is not positive"),
                });
            }
            points.push(u / h);
        }
        Ok(PolarSeeds { points })
    }

    fn best(&self, v: &Vector3<f64>) -> Vector3<f64> {
        let mut best = 0;
        let mut value = f64::NEG_INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = p.dot(v);
            if d > value {
                value = d;
                best = i;
            }
        }
        self.points[best].normalize()
    }
}

fn tangent_frame(u: &Vector3<f64>, dim: usize) -> [Vector3<f64>; 2] {
    if dim == 2 {
        [Vector3::new(-u.y, u.x, 0.0), Vector3::zeros()]
    } else {
        let a = if u.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = (a - u * a.dot(u)).normalize();
        [e1, u.cross(&e1)]
    }
}

struct Local {
    objective: f64,
    frame: [Vector3<f64>; 2],
    jet: Jet,
    gradient: Vector2<f64>,
    hessian: Matrix2<f64>,
}

fn local_model(base: &Body, u: &Vector3<f64>, v: &Vector3<f64>) -> Result<Local> {
    let jet = base
        .try_jet(u)?
        .ok_or_else(|| Error::NotSmooth(format!("no derivatives for {base}")))?;
    let h = jet.value;
    let uv = u.dot(v);
    let gh = jet.gradient;
    let grad = v / h - gh * (uv / (h * h));
    let hess = -(v * gh.transpose() + gh * v.transpose()) / (h * h) + gh * gh.transpose() * (2.0 * uv / (h * h * h))
        - jet.hessian * (uv / (h * h));
    let frame = tangent_frame(u, base.dim());
    let mut gradient = Vector2::zeros();
    let mut hessian = Matrix2::zeros();
    let m = base.dim() - 1;
    for a in 0..m {
        gradient[a] = frame[a].dot(&grad);
        for b in 0..m {
            hessian[(a, b)] = frame[a].dot(&(hess * frame[b]));
        }
    }
    Ok(Local {
        objective: uv / h,
        frame,
        jet,
        gradient,
        hessian,
    })
}

/// Ascent direction in chart coordinates: Newton when the model is concave.
fn ascent_step(local: &Local, dim: usize) -> Vector2<f64> {
    let g = local.gradient;
    let hm = local.hessian;
    let concave = if dim == 2 {
        hm[(0, 0)] < 0.0
    } else {
        hm[(0, 0)] < 0.0 && hm.determinant() > 0.0
    };
    let step = if concave {
        if dim == 2 {
            Vector2::new(-g[0] / hm[(0, 0)], 0.0)
        } else {
            -(hm.try_inverse().unwrap_or_else(Matrix2::zeros) * g)
        }
    } else {
        let scale = 0.1 / g.norm().max(1e-300);
        g * scale.min(1.0 / local.objective.abs().max(1e-300))
    };
    let norm = step.norm();
    if norm > 0.5 {
        step * (0.5 / norm)
    } else {
        step
    }
}

fn maximize(base: &Body, v: &Vector3<f64>, seeds: &PolarSeeds) -> Result<(Vector3<f64>, Local)> {
    let dim = base.dim();
    let mut u = seeds.best(v);
    let mut local = local_model(base, &u, v)?;
    for _ in 0..MAX_ITERATIONS {
        let mut step = ascent_step(&local, dim);
        let mut accepted = None;
        for _ in 0..40 {
            let x = u + local.frame[0] * step[0] + local.frame[1] * step[1];
            let cand = x.normalize();
            let trial = local_model(base, &cand, v)?;
            if trial.objective >= local.objective - 4.0 * f64::EPSILON * local.objective.abs() {
                accepted = Some((cand, trial));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, trial)) = accepted else {
            break;
        };
        let moved = step.norm();
        u = cand;
        local = trial;
        if moved < STEP_TOLERANCE {
            return Ok((u, local));
        }
    }
    // Accept a stalled iterate only if it is stationary to working precision.
    if local.gradient.norm() <= 1e-9 * local.objective.abs() {
        return Ok((u, local));
    }
    Err(Error::PolarNonConvergence {
        direction: [v.x, v.y, v.z],
    })
}

/// `h°(v)` for a unit vector `v`.
pub fn polar_support(base: &Body, v: &Vector3<f64>, seeds: &PolarSeeds) -> Result<f64> {
    Ok(maximize(base, v, seeds)?.1.objective)
}

/// Value, gradient and Hessian of the homogeneous extension of `h°` at `v`.
pub(crate) fn polar_jet(base: &Body, v: &Vector3<f64>, seeds: &PolarSeeds) -> Result<Jet> {
    let r = v.norm();
    let unit = v / r;
    let (u, local) = maximize(base, &unit, seeds)?;
    let h = local.jet.value;
    let gh = local.jet.gradient;
    let m = base.dim() - 1;
    // Columns m_a = derivative of the dual point u/h(u) along the chart.
    let cols: Vec<Vector3<f64>> = (0..m)
        .map(|a| local.frame[a] / h - u * (local.frame[a].dot(&gh) / (h * h)))
        .collect();
    let inv = if m == 1 {
        Matrix2::new(1.0 / local.hessian[(0, 0)], 0.0, 0.0, 0.0)
    } else {
        local
            .hessian
            .try_inverse()
            .ok_or(Error::PolarNonConvergence {
                direction: [v.x, v.y, v.z],
            })?
    };
    let mut hessian = nalgebra::Matrix3::zeros();
    for a in 0..m {
        for b in 0..m {
            hessian -= cols[a] * cols[b].transpose() * inv[(a, b)];
        }
    }
    Ok(Jet {
        value: r * local.objective,
        gradient: u / h,
        hessian: hessian / r,
    })
}
