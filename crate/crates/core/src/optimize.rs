//! Derivative-free minimization and the SL(n) surface-area problem.

use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::body::FieldTable;
use crate::error::Result;
use crate::geometry::surface_area_of_image;

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder–Mead simplex search from `x0` with initial edge `step`.
///
/// Stops when the spread of simplex values falls below
/// `ftol · (|f_best| + tiny)` and the simplex diameter below `xtol`.
pub fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    xtol: f64,
    ftol: f64,
    max_evaluations: usize,
) -> Minimum {
    let d = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..d {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x, &mut evaluations)).collect();
    let mut converged = false;
    while evaluations < max_evaluations {
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let spread = values[d] - values[0];
        let diameter = simplex[1..]
            .iter()
            .map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= ftol * (values[0].abs() + 1e-300) && diameter <= xtol {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..d).map(|j| simplex[..d].iter().map(|x| x[j]).sum::<f64>() / d as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..d).map(|j| centroid[j] + t * (simplex[d][j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = eval(&xr, &mut evaluations);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evaluations);
            if fe < fr {
                simplex[d] = xe;
                values[d] = fe;
            } else {
                simplex[d] = xr;
                values[d] = fr;
            }
            continue;
        }
        if fr < values[d - 1] {
            simplex[d] = xr;
            values[d] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[d] {
            let x = along(-0.5);
            let v = eval(&x, &mut evaluations);
            (x, v)
        } else {
            let x = along(0.5);
            let v = eval(&x, &mut evaluations);
            (x, v)
        };
        if fc < values[d].min(fr) {
            simplex[d] = xc;
            values[d] = fc;
            continue;
        }
        for i in 1..=d {
            for j in 0..d {
                simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
            }
            values[i] = eval(&simplex[i], &mut evaluations);
        }
    }
    let best = (0..=d).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        evaluations,
        converged,
    }
}

/// Number of free parameters of a traceless symmetric `dim × dim` matrix.
pub fn traceless_dimension(dim: usize) -> usize {
    dim * (dim + 1) / 2 - 1
}

/// `exp(Z)` for the traceless symmetric `Z` with the given parameters.
pub fn sl_from_params(dim: usize, x: &[f64]) -> Matrix3<f64> {
    let mut z = Matrix3::zeros();
    if dim == 2 {
        z[(0, 0)] = x[0];
        z[(1, 1)] = -x[0];
        z[(0, 1)] = x[1];
        z[(1, 0)] = x[1];
    } else {
        z[(0, 0)] = x[0];
        z[(1, 1)] = x[1];
        z[(2, 2)] = -x[0] - x[1];
        z[(0, 1)] = x[2];
        z[(1, 0)] = x[2];
        z[(0, 2)] = x[3];
        z[(2, 0)] = x[3];
        z[(1, 2)] = x[4];
        z[(2, 1)] = x[4];
    }
    let eig = SymmetricEigen::new(z);
    let mut t = eig.eigenvectors * Matrix3::from_diagonal(&eig.eigenvalues.map(f64::exp)) * eig.eigenvectors.transpose();
    if dim == 2 {
        t[(2, 2)] = 1.0;
        for i in 0..2 {
            t[(2, i)] = 0.0;
            t[(i, 2)] = 0.0;
        }
    }
    t
}

/// Minimizer of `S(TK)` over `T ∈ SL(n)`.
#[derive(Debug, Clone, Serialize)]
pub struct SlMinimum {
    pub matrix: [[f64; 3]; 3],
    pub determinant: f64,
    pub surface_area: f64,
    pub identity_surface_area: f64,
    /// Norm of the central-difference gradient in the chart, relative to `S_min`.
    pub stationarity: f64,
    /// Largest relative difference between the best values of the starts.
    pub start_spread: f64,
    pub converged: bool,
}

impl SlMinimum {
    pub fn t(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.matrix[i][j])
    }
}

/// Multistart simplex search over `T = exp(Z)`, `Z` traceless symmetric:
/// identity plus four seeded random starts. Rotations do not change surface
/// area, so symmetric `T` cover SL(n) up to rotation.
pub fn minimize_surface_sl(fields: &FieldTable, seed: u64) -> Result<SlMinimum> {
    let dim = fields.dim();
    let d = traceless_dimension(dim);
    let objective = |x: &[f64]| surface_area_of_image(fields, &sl_from_params(dim, x)).unwrap_or(f64::INFINITY);
    let identity_surface_area = objective(&vec![0.0; d]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![vec![0.0; d]];
    for _ in 0..4 {
        starts.push((0..d).map(|_| rng.gen_range(-0.3..0.3)).collect());
    }
    let mut results = Vec::with_capacity(starts.len());
    for s in &starts {
        let first = nelder_mead(objective, s, 0.1, 1e-9, 1e-15, 4000);
        // A fresh simplex around the first answer guards against collapse.
        let second = nelder_mead(objective, &first.x, 1e-3, 1e-10, 1e-16, 4000);
        let converged = first.converged && second.converged;
        results.push(Minimum { converged, ..second });
    }
    let best = results
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .cloned()
        .expect("at least one start");
    let worst = results.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
    let step = 1e-5;
    let mut grad2 = 0.0;
    for i in 0..d {
        let mut xp = best.x.clone();
        let mut xm = best.x.clone();
        xp[i] += step;
        xm[i] -= step;
        let g = (objective(&xp) - objective(&xm)) / (2.0 * step);
        grad2 += g * g;
    }
    let t = sl_from_params(dim, &best.x);
    let mut matrix = [[0.0; 3]; 3];
    for (i, row) in matrix.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = t[(i, j)];
        }
    }
    Ok(SlMinimum {
        matrix,
        determinant: crate::body::block_determinant(&t, dim),
        surface_area: best.value,
        identity_surface_area,
        stationarity: grad2.sqrt() / best.value,
        start_spread: (worst - best.value) / best.value,
        converged: results.iter().all(|r| r.converged),
    })
}
