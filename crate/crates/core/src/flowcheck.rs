//! Planar centro-affine normal flow in support-function form,
//! `h_t = −h√K₀ = −(h″ + h)^{−1/2} h^{−1/2}`, used to difference the volume
//! in time.

use serde::Serialize;

use crate::body::{evaluate_fields, Body};
use crate::error::{Error, Result};
use crate::invariants::{omega_2n_fields, omega_p};
use crate::sphere::{DiffMatrix, Grid};

/// Empirical constant of the step-size rule `dt ≤ c · min h · min(h″+h) · N^{−2}`.
pub const STABILITY_CONSTANT: f64 = 0.1;

#[derive(Debug, Clone, Serialize)]
pub struct FlowTrace {
    pub body: String,
    pub resolution: usize,
    pub dt: f64,
    pub steps: usize,
    pub times: Vec<f64>,
    pub volumes: Vec<f64>,
    pub valid: Vec<bool>,
    /// Reason the run stopped early, if it did.
    pub truncated: Option<String>,
}

struct Stepper<'a> {
    grid: &'a Grid,
    d2: &'a DiffMatrix,
    /// Low-pass projection applied after each step.
    filter: Option<Vec<f64>>,
    scratch: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(grid: &'a Grid) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(Error::UnsupportedDimension(grid.dim()));
        }
        let d2 = grid
            .circle_d2()
            .ok_or_else(|| Error::UnsupportedDimension(grid.dim()))?;
        Ok(Stepper {
            grid,
            d2,
            filter: None,
            scratch: vec![0.0; grid.len()],
        })
    }

    /// Installs a projection onto the modes `|k| ≤ cutoff`.
    fn set_filter(&mut self, cutoff: usize) {
        let n = self.grid.len();
        let kernel: Vec<f64> = (0..n)
            .map(|d| {
                let x = 2.0 * std::f64::consts::PI * d as f64 / n as f64;
                (1.0 + 2.0 * (1..=cutoff).map(|k| (k as f64 * x).cos()).sum::<f64>()) / n as f64
            })
            .collect();
        let mut p = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                p[i * n + j] = kernel[(i + n - j) % n];
            }
        }
        self.filter = Some(p);
    }

    /// Largest mode whose backward-flow amplification over `tau` stays
    /// below `1e4`, from the linearized diffusion coefficient
    /// `½ (h″+h)^{−3/2} h^{−1/2}`.
    fn backward_cutoff(&mut self, h: &[f64], tau: f64) -> usize {
        let mut s = vec![0.0; h.len()];
        self.curvature(h, &mut s);
        let a = s
            .iter()
            .zip(h)
            .map(|(si, hi)| 0.5 / (si.powf(1.5) * hi.sqrt()))
            .fold(0.0, f64::max);
        let k = (1e4f64.ln() / (a * tau)).sqrt().floor() as usize;
        k.min(h.len() / 2 - 1)
    }

    /// Curvature function `h″ + h`.
    fn curvature(&mut self, h: &[f64], out: &mut [f64]) {
        self.d2.apply(h, out);
        for (o, v) in out.iter_mut().zip(h) {
            *o += v;
        }
    }

    fn rhs(&mut self, h: &[f64], sign: f64, out: &mut [f64]) {
        let mut s = std::mem::take(&mut self.scratch);
        self.curvature(h, &mut s);
        for i in 0..h.len() {
            out[i] = -sign / (s[i] * h[i]).sqrt();
        }
        self.scratch = s;
    }

    fn rk4(&mut self, h: &mut [f64], dt: f64, sign: f64) {
        let n = h.len();
        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        self.rhs(h, sign, &mut k1);
        for i in 0..n {
            tmp[i] = h[i] + 0.5 * dt * k1[i];
        }
        self.rhs(&tmp, sign, &mut k2);
        for i in 0..n {
            tmp[i] = h[i] + 0.5 * dt * k2[i];
        }
        self.rhs(&tmp, sign, &mut k3);
        for i in 0..n {
            tmp[i] = h[i] + dt * k3[i];
        }
        self.rhs(&tmp, sign, &mut k4);
        for i in 0..n {
            h[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if let Some(p) = &self.filter {
            tmp.copy_from_slice(h);
            for (i, hi) in h.iter_mut().enumerate() {
                *hi = p[i * n..(i + 1) * n].iter().zip(&tmp).map(|(a, b)| a * b).sum();
            }
        }
    }

    /// Volume `(1/2) ∫ h (h″ + h)` and whether `h` is still a valid support function.
    fn volume(&mut self, h: &[f64]) -> (f64, Option<String>) {
        let mut s = std::mem::take(&mut self.scratch);
        self.curvature(h, &mut s);
        let w = self.grid.weights();
        let v = 0.5 * (0..h.len()).map(|i| w[i] * h[i] * s[i]).sum::<f64>();
        let problem = if let Some(i) = h.iter().position(|x| !(*x > 0.0)) {
            Some(format!("h = {} at node {i}", h[i]))
        } else {
            s.iter().position(|x| !(*x > 0.0)).map(|i| format!("h″ + h = {} at node {i}", s[i]))
        };
        self.scratch = s;
        (v, problem)
    }

    /// Shortest time `(h″+h)/|∂ₜ(h″+h)|` over the nodes, at the initial rate.
    fn curvature_time(&mut self, h: &[f64]) -> f64 {
        let n = h.len();
        let mut s = vec![0.0; n];
        let mut v = vec![0.0; n];
        let mut sv = vec![0.0; n];
        self.curvature(h, &mut s);
        self.rhs(h, 1.0, &mut v);
        self.curvature(&v, &mut sv);
        (0..n).map(|i| s[i] / sv[i].abs()).fold(f64::INFINITY, f64::min)
    }

    fn stability_bound(&mut self, h: &[f64]) -> f64 {
        let mut s = vec![0.0; h.len()];
        self.curvature(h, &mut s);
        let min_h = h.iter().copied().fold(f64::INFINITY, f64::min);
        let min_s = s.iter().copied().fold(f64::INFINITY, f64::min);
        let n = h.len() as f64;
        STABILITY_CONSTANT * min_h * min_s / (n * n)
    }
}

fn initial_values(body: &Body, grid: &Grid) -> Result<Vec<f64>> {
    if body.dim() != 2 {
        return Err(Error::UnsupportedDimension(body.dim()));
    }
    Ok(evaluate_fields(body, grid)?.h)
}

/// Largest admissible time step for `body` on `grid`.
pub fn stability_bound(body: &Body, grid: &Grid) -> Result<f64> {
    let h = initial_values(body, grid)?;
    Ok(Stepper::new(grid)?.stability_bound(&h))
}

/// Runs `steps` RK4 steps of size `dt`, recording the volume after each.
pub fn integrate_flow(body: &Body, grid: &Grid, dt: f64, steps: usize) -> Result<FlowTrace> {
    let mut h = initial_values(body, grid)?;
    let mut stepper = Stepper::new(grid)?;
    let bound = stepper.stability_bound(&h);
    if !(dt > 0.0) || dt > bound {
        return Err(Error::StabilityBound { dt, bound });
    }
    let (v0, _) = stepper.volume(&h);
    let mut trace = FlowTrace {
        body: body.describe(),
        resolution: grid.len(),
        dt,
        steps: 0,
        times: vec![0.0],
        volumes: vec![v0],
        valid: vec![true],
        truncated: None,
    };
    for step in 1..=steps {
        stepper.rk4(&mut h, dt, 1.0);
        let (v, problem) = stepper.volume(&h);
        let ok = problem.is_none() && v.is_finite();
        trace.times.push(dt * step as f64);
        trace.volumes.push(v);
        trace.valid.push(ok);
        trace.steps = step;
        if !ok {
            trace.truncated = Some(problem.unwrap_or_else(|| "non-finite volume".into()));
            break;
        }
    }
    Ok(trace)
}

/// Measured and predicted volume derivatives at `t = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct VariationCheck {
    pub body: String,
    pub resolution: usize,
    /// Half-widths of the central differences, largest first.
    pub tau: Vec<f64>,
    pub dv_by_tau: Vec<f64>,
    pub d2v_by_tau: Vec<f64>,
    /// Richardson-extrapolated central differences.
    pub dv_measured: f64,
    pub d2v_measured: f64,
    /// `−Ω_n(K)`.
    pub dv_predicted: f64,
    /// `−Ω_{2,n}(K)`: the flow decelerates the volume loss.
    pub d2v_predicted: f64,
    pub omega_n: f64,
    pub omega_2n: f64,
    /// Ratio of differencing errors between consecutive `tau` (≈ 4 for a second-order difference).
    pub dv_error_ratio: f64,
    pub d2v_error_ratio: f64,
}

/// Default largest half-width of the central differences.
pub const DEFAULT_TAU: f64 = 2e-3;

/// The half-width is also capped at this fraction of the time in which the
/// curvature function would reach zero at its initial rate. Strongly
/// curved bodies steepen quickly under the backward flow and can leave the
/// admissible class well before `DEFAULT_TAU`.
pub const CURVATURE_TIME_FRACTION: f64 = 0.03;

pub fn variation_check(body: &Body, grid: &Grid) -> Result<VariationCheck> {
    variation_check_with(body, grid, DEFAULT_TAU, 2)
}

/// Central differences of the volume at `t = 0` with half-widths
/// `tau, tau/2, …` (`levels` of them), flowing forwards and backwards.
/// `tau` is first capped as described at [`CURVATURE_TIME_FRACTION`].
///
/// The backward flow is anti-diffusive, so every step is followed by a
/// projection onto the Fourier modes that round-off cannot excite to a
/// visible amplitude within `tau`.
pub fn variation_check_with(body: &Body, grid: &Grid, tau: f64, levels: usize) -> Result<VariationCheck> {
    if levels < 2 {
        return Err(Error::InvalidParameter("variation check needs at least two step sizes".into()));
    }
    let fields = evaluate_fields(body, grid)?;
    if fields.dim() != 2 {
        return Err(Error::UnsupportedDimension(fields.dim()));
    }
    let h0 = fields.h.clone();
    let mut stepper = Stepper::new(grid)?;
    let bound = stepper.stability_bound(&h0);
    let (v0, _) = stepper.volume(&h0);
    let tau = tau.min(CURVATURE_TIME_FRACTION * stepper.curvature_time(&h0));
    let mut taus = Vec::with_capacity(levels);
    let mut dv = Vec::with_capacity(levels);
    let mut d2v = Vec::with_capacity(levels);
    for level in 0..levels {
        let t = tau / (1u64 << level) as f64;
        let substeps = (t / bound).ceil().max(1.0) as usize;
        let dt = t / substeps as f64;
        let cutoff = stepper.backward_cutoff(&h0, t);
        stepper.set_filter(cutoff);
        let mut ends = [0.0; 2];
        for (slot, sign) in [(0, 1.0), (1, -1.0)] {
            let mut h = h0.clone();
            for _ in 0..substeps {
                stepper.rk4(&mut h, dt, sign);
            }
            let (v, problem) = stepper.volume(&h);
            if let Some(p) = problem {
                return Err(Error::Numerical(format!("flow left the admissible class at t = {}: {p}", sign * t)));
            }
            ends[slot] = v;
        }
        taus.push(t);
        dv.push((ends[0] - ends[1]) / (2.0 * t));
        d2v.push((ends[0] - 2.0 * v0 + ends[1]) / (t * t));
    }
    let k = levels - 1;
    let dv_measured = (4.0 * dv[k] - dv[k - 1]) / 3.0;
    let d2v_measured = (4.0 * d2v[k] - d2v[k - 1]) / 3.0;
    let omega_n = omega_p(&fields, 2.0)?;
    let omega_2n = omega_2n_fields(&fields)?;
    let dv_predicted = -omega_n;
    let d2v_predicted = -omega_2n;
    Ok(VariationCheck {
        body: body.describe(),
        resolution: grid.len(),
        dv_error_ratio: (dv[k - 1] - dv_predicted) / (dv[k] - dv_predicted),
        d2v_error_ratio: (d2v[k - 1] - d2v_predicted) / (d2v[k] - d2v_predicted),
        tau: taus,
        dv_by_tau: dv,
        d2v_by_tau: d2v,
        dv_measured,
        d2v_measured,
        dv_predicted,
        d2v_predicted,
        omega_n,
        omega_2n,
    })
}
