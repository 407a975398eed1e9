//! Scalar centro-affine invariants.
//!
//! Power means of `K₀` are computed as `ln(∫K₀^δ dν / ∫dν)` through
//! `ln_1p`/`expm1`, so sequence terms with exponents up to `n·2^48` stay
//! finite and accurate.

use serde::Serialize;

use crate::body::{curvature_extrema, evaluate_fields, Body, FieldTable};
use crate::error::{Error, Result};
use crate::geometry::{mixed_curvature, polar_volume, surface_area, volume, MixedCurvatureInput};
use crate::sphere::{build_grid, Grid, Resolution};

pub const MAX_SEQUENCE_INDEX: usize = 48;

/// `Ω_p = ∫ K₀^{p/(n+p)} dμ_K`.
pub fn omega_p(fields: &FieldTable, p: f64) -> Result<f64> {
    let n = fields.dim() as f64;
    if p == -n {
        return Err(Error::ExcludedExponent(p));
    }
    if !p.is_finite() {
        return Err(Error::NonFinite(format!("exponent p = {p}")));
    }
    let e = p / (n + p);
    let g: Vec<f64> = fields.k0.iter().map(|k| k.powf(e)).collect();
    Ok(fields.cone_integral(&g))
}

/// `Ω₁^{n+1} / Vol^{n−1}`.
pub fn affine_isoperimetric_ratio(fields: &FieldTable) -> Result<f64> {
    let n = fields.dim() as i32;
    Ok(omega_p(fields, 1.0)?.powi(n + 1) / volume(fields).powi(n - 1))
}

/// `Ω_{2,n}` from precomputed fields.
///
/// `(n(n−1)/2) Vol(K°) − ((n−1)/2) ∫ f s(f, h, …, h) dσ` with `f = h√K₀`,
/// differentiated spectrally.
pub fn omega_2n_fields(fields: &FieldTable) -> Result<f64> {
    let n = fields.dim();
    let grid = &fields.grid;
    let f: Vec<f64> = fields.h.iter().zip(&fields.k0).map(|(h, k)| h * k.sqrt()).collect();
    let df = grid.differentiate(&f)?;
    let mut input = MixedCurvatureInput::support(fields);
    input.values[0] = f.clone();
    input.hessians[0] = df.hessian;
    let s = mixed_curvature(&input)?;
    let fs: Vec<f64> = f.iter().zip(&s).map(|(a, b)| a * b).collect();
    let integral = grid.integrate(&fs)?;
    let nf = n as f64;
    Ok(nf * (nf - 1.0) / 2.0 * polar_volume(fields) - (nf - 1.0) / 2.0 * integral)
}

/// `Ω_{2,n}(K)` evaluated on `grid`.
pub fn omega_2n(body: &Body, grid: &Grid) -> Result<f64> {
    omega_2n_fields(&evaluate_fields(body, grid)?)
}

/// Measure against which a power mean of `K₀` is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseMeasure {
    /// The cone measure `μ_K`, total mass `n Vol(K)`.
    Cone,
    /// `K₀ dμ_K`, total mass `n Vol(K°)`.
    PolarCone,
}

/// `ln(∫ K₀^δ dν / ∫ dν)`.
pub fn log_power_mean(fields: &FieldTable, delta: f64, base: BaseMeasure) -> f64 {
    let w = fields.grid.weights();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..fields.len() {
        let k = fields.k0[i];
        let b = match base {
            BaseMeasure::Cone => w[i] * fields.cone_density[i],
            BaseMeasure::PolarCone => w[i] * fields.cone_density[i] * k,
        };
        num += b * (delta * k.ln()).exp_m1();
        den += b;
    }
    (num / den).ln_1p()
}

/// `ln Ω_K = −(1/Vol K°) ∫ K₀ ln K₀ dμ_K`.
pub fn ln_entropy_omega_k(fields: &FieldTable) -> f64 {
    let g: Vec<f64> = fields.k0.iter().map(|k| k * k.ln()).collect();
    -fields.cone_integral(&g) / polar_volume(fields)
}

pub fn entropy_omega_k(fields: &FieldTable) -> f64 {
    ln_entropy_omega_k(fields).exp()
}

/// `(1/(n Vol K°)) ∫ K₀ ln(K₀ Vol K / Vol K°) dμ_K`.
pub fn kl_divergence(fields: &FieldTable) -> f64 {
    let n = fields.dim() as f64;
    let ratio = volume(fields) / polar_volume(fields);
    let g: Vec<f64> = fields.k0.iter().map(|k| k * (k * ratio).ln()).collect();
    fields.cone_integral(&g) / (n * polar_volume(fields))
}

/// `ln Λ = (1/(n Vol K)) ∫ ln K₀ dμ_K`.
pub fn ln_lambda_k(fields: &FieldTable) -> f64 {
    let n = fields.dim() as f64;
    let g: Vec<f64> = fields.k0.iter().map(|k| k.ln()).collect();
    fields.cone_integral(&g) / (n * volume(fields))
}

pub fn lambda_k(fields: &FieldTable) -> f64 {
    ln_lambda_k(fields).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    /// `(Ω_{2^k}/(n Vol K°))^{n+2^k}`.
    Dyadic,
    /// Built from `Ω_{n(2^p−1)}(K)/(n Vol K°)`.
    Alternative,
    /// Built from `Ω_{−(n+2^p)}(K)/(n Vol K°)`.
    NegativeAlternative,
    /// Built from `Ω_{−n/2^p}(K)/(n Vol K)`.
    Lambda,
}

impl SequenceKind {
    pub const ALL: [SequenceKind; 4] = [
        SequenceKind::Dyadic,
        SequenceKind::Alternative,
        SequenceKind::NegativeAlternative,
        SequenceKind::Lambda,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SequenceKind::Dyadic => "dyadic",
            SequenceKind::Alternative => "alternative",
            SequenceKind::NegativeAlternative => "negative_alternative",
            SequenceKind::Lambda => "lambda",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SequenceTerm {
    pub index: usize,
    /// Affine surface area exponent the term is built from.
    pub exponent: f64,
    pub ln_stated: f64,
    pub ln_corrected: f64,
    pub stated: f64,
    pub corrected: f64,
}

/// One limit construction with both exponent variants.
///
/// `stated` follows the exponents and orientation as the theorems print
/// them; `corrected` follows the derivation, and is the one expected to
/// converge to `corrected_target`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitSequence {
    pub kind: SequenceKind,
    pub terms: Vec<SequenceTerm>,
    /// One Richardson step `2 L_p − L_{p−1}` on the log terms, exponentiated.
    pub stated_tail: f64,
    pub corrected_tail: f64,
    /// Limit of the stated variant, from the entropy integrals.
    pub stated_limit: f64,
    pub corrected_target: f64,
}

impl LimitSequence {
    pub fn corrected_relative_gap(&self) -> f64 {
        (self.corrected_tail / self.corrected_target - 1.0).abs()
    }
}

/// Terms `p = 1..=p_max` (for the dyadic kind, exponents `2^k`,
/// `k = 0..=p_max`).
pub fn limit_sequence(fields: &FieldTable, kind: SequenceKind, p_max: usize) -> Result<LimitSequence> {
    if p_max > MAX_SEQUENCE_INDEX {
        return Err(Error::InvalidParameter(format!("p_max = {p_max} exceeds {MAX_SEQUENCE_INDEX}")));
    }
    if p_max < 2 {
        return Err(Error::InvalidParameter("p_max must be at least 2".into()));
    }
    let n = fields.dim() as f64;
    let ln_omega_k = ln_entropy_omega_k(fields);
    let ln_lambda = ln_lambda_k(fields);
    let start = if kind == SequenceKind::Dyadic { 0 } else { 1 };
    let mut terms = Vec::with_capacity(p_max + 1);
    for index in start..=p_max {
        let two_p = (index as f64).exp2();
        let (exponent, ln_stated, ln_corrected) = match kind {
            SequenceKind::Dyadic => {
                let q = two_p;
                let l = (n + q) * log_power_mean(fields, -n / (n + q), BaseMeasure::PolarCone);
                (q, l, l)
            }
            SequenceKind::Alternative => {
                let m = log_power_mean(fields, -1.0 / two_p, BaseMeasure::PolarCone);
                (n * (two_p - 1.0), two_p * m, n * two_p * m)
            }
            SequenceKind::NegativeAlternative => {
                // Stated orientation: Ω_{−(n+2^p)}(K°)/(n Vol K), rewritten through
                // Ω_q(K°) = Ω_{n²/q}(K) as a cone-measure mean on K.
                let stated = two_p * log_power_mean(fields, -n / two_p, BaseMeasure::Cone);
                let corrected = two_p * log_power_mean(fields, n / two_p, BaseMeasure::PolarCone);
                (-(n + two_p), stated, corrected)
            }
            SequenceKind::Lambda => {
                let l = two_p * log_power_mean(fields, -1.0 / (two_p - 1.0), BaseMeasure::Cone);
                (-n / two_p, l, -l)
            }
        };
        terms.push(SequenceTerm {
            index,
            exponent,
            ln_stated,
            ln_corrected,
            stated: ln_stated.exp(),
            corrected: ln_corrected.exp(),
        });
    }
    let last = terms[terms.len() - 1];
    let prev = terms[terms.len() - 2];
    let (stated_limit, corrected_target) = match kind {
        SequenceKind::Dyadic => (ln_omega_k, ln_omega_k),
        SequenceKind::Alternative => (ln_omega_k / n, ln_omega_k),
        SequenceKind::NegativeAlternative => (-n * ln_lambda, -ln_omega_k),
        SequenceKind::Lambda => (-ln_lambda, ln_lambda),
    };
    Ok(LimitSequence {
        kind,
        terms,
        stated_tail: (2.0 * last.ln_stated - prev.ln_stated).exp(),
        corrected_tail: (2.0 * last.ln_corrected - prev.ln_corrected).exp(),
        stated_limit: stated_limit.exp(),
        corrected_target: corrected_target.exp(),
    })
}

/// Default exponent list `{−1/2, 0, 1/2, 2, n, 2n}` without duplicates.
pub fn default_p_list(dim: usize) -> Vec<f64> {
    let n = dim as f64;
    let mut out: Vec<f64> = Vec::new();
    for p in [-0.5, 0.0, 0.5, 2.0, n, 2.0 * n] {
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// Every invariant of one body at one resolution.
#[derive(Debug, Clone, Serialize)]
pub struct Invariants {
    pub resolution: Resolution,
    pub volume: f64,
    pub polar_volume: f64,
    pub surface_area: f64,
    pub omega_p: Vec<(f64, f64)>,
    pub omega: f64,
    pub omega_n: f64,
    pub omega_2n: f64,
    pub curvature_min: f64,
    pub curvature_max: f64,
    pub affine_isoperimetric_ratio: f64,
    #[serde(rename = "omega_K_entropy")]
    pub omega_k_entropy: f64,
    pub lambda: f64,
    pub kl_divergence: f64,
    pub sequences: Vec<LimitSequence>,
}

impl Invariants {
    pub fn compute(fields: &FieldTable, p_list: &[f64], p_max: usize) -> Result<Invariants> {
        let n = fields.dim() as f64;
        let ex = curvature_extrema(fields);
        let omega_p_table = p_list
            .iter()
            .map(|&p| Ok((p, omega_p(fields, p)?)))
            .collect::<Result<Vec<_>>>()?;
        let sequences = SequenceKind::ALL
            .iter()
            .map(|&k| limit_sequence(fields, k, p_max))
            .collect::<Result<Vec<_>>>()?;
        Ok(Invariants {
            resolution: fields.grid.resolution(),
            volume: volume(fields),
            polar_volume: polar_volume(fields),
            surface_area: surface_area(fields),
            omega_p: omega_p_table,
            omega: omega_p(fields, 1.0)?,
            omega_n: omega_p(fields, n)?,
            omega_2n: omega_2n_fields(fields)?,
            curvature_min: ex.min,
            curvature_max: ex.max,
            affine_isoperimetric_ratio: affine_isoperimetric_ratio(fields)?,
            omega_k_entropy: entropy_omega_k(fields),
            lambda: lambda_k(fields),
            kl_divergence: kl_divergence(fields),
            sequences,
        })
    }

    /// Named scalar values, in a fixed order.
    pub fn scalars(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("volume", self.volume),
            ("polar_volume", self.polar_volume),
            ("surface_area", self.surface_area),
            ("omega", self.omega),
            ("omega_n", self.omega_n),
            ("omega_2n", self.omega_2n),
            ("curvature_min", self.curvature_min),
            ("curvature_max", self.curvature_max),
            ("affine_isoperimetric_ratio", self.affine_isoperimetric_ratio),
            ("omega_K_entropy", self.omega_k_entropy),
            ("lambda", self.lambda),
            ("kl_divergence", self.kl_divergence),
        ]
    }
}

/// Invariants at two resolutions with their drift.
#[derive(Debug, Clone, Serialize)]
pub struct InvariantReport {
    pub body: String,
    pub dim: usize,
    pub fine: Invariants,
    pub coarse: Invariants,
    /// `|fine − coarse|` per scalar, relative to `max(|fine|, 1)`.
    pub drift: Vec<(String, f64)>,
}

pub fn invariant_report(
    body: &Body,
    fine: Resolution,
    coarse: Resolution,
    p_list: &[f64],
    p_max: usize,
) -> Result<InvariantReport> {
    let f = Invariants::compute(&evaluate_fields(body, &build_grid(fine)?)?, p_list, p_max)?;
    let c = Invariants::compute(&evaluate_fields(body, &build_grid(coarse)?)?, p_list, p_max)?;
    let drift = f
        .scalars()
        .iter()
        .zip(c.scalars())
        .map(|((name, a), (_, b))| (name.to_string(), (a - b).abs() / a.abs().max(1.0)))
        .collect();
    Ok(InvariantReport {
        body: body.describe(),
        dim: body.dim(),
        fine: f,
        coarse: c,
        drift,
    })
}
