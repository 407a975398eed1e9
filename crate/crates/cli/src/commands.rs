//! The five subcommands.

use std::path::PathBuf;

use centroaffine::body::{evaluate_fields, Body, BodySpec};
use centroaffine::families::{centered, random_fourier_spec, random_sphharm_spec};
use centroaffine::flowcheck::{integrate_flow, stability_bound, variation_check_with, FlowTrace, VariationCheck};
use centroaffine::invariants::{invariant_report, limit_sequence, LimitSequence, SequenceKind};
use centroaffine::sphere::{build_grid, Resolution};
use centroaffine::suite::{run_suite, CheckResult, Status, SuiteReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Family, Format, Resolved, RunConfig};
use crate::error::CliError;
use crate::output::{to_csv, to_json, to_json_line, write_atomic};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 3;

/// First-variation identity tolerance, relative to `Ω_n`.
pub const FIRST_VARIATION_TOL: f64 = 1e-5;
/// Second-variation identity tolerance, relative to `max(Ω_n, 1)`.
pub const SECOND_VARIATION_TOL: f64 = 1e-3;
/// Allowed deviation of the dt-halving error ratio from 4.
pub const HALVING_RATIO_TOL: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Report,
    Suite,
    Converge,
    Flow,
    Falsify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Report => "report",
            Command::Suite => "suite",
            Command::Converge => "converge",
            Command::Flow => "flow",
            Command::Falsify => "falsify",
        }
    }
}

/// What a command wrote and how it ended.
#[derive(Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Settings echoed at the top of every JSON file.
#[derive(Serialize)]
struct Meta<'a> {
    schema: u32,
    command: &'static str,
    body: Option<String>,
    settings: &'a Resolved,
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    meta: Meta<'a>,
    result: T,
}

struct Writer<'a> {
    config: &'a RunConfig,
    command: Command,
    files: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(config: &'a RunConfig, command: Command) -> Self {
        Writer {
            config,
            command,
            files: Vec::new(),
        }
    }

    fn json<T: Serialize>(&mut self, name: &str, body: Option<String>, settings: &Resolved, result: T) -> Result<(), CliError> {
        if !self.config.wants(Format::Json) {
            return Ok(());
        }
        let doc = Document {
            meta: Meta {
                schema: crate::config::SCHEMA_VERSION,
                command: self.command.name(),
                body,
                settings,
            },
            result,
        };
        self.raw(name, &to_json(&doc)?)
    }

    fn csv<R: Serialize>(&mut self, name: &str, rows: &[R]) -> Result<(), CliError> {
        if !self.config.wants(Format::Csv) {
            return Ok(());
        }
        self.raw(name, &to_csv(rows)?)
    }

    fn raw(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = write_atomic(&self.config.output.dir, name, bytes)?;
        self.files.push(path);
        Ok(())
    }

    fn finish(self, exit_code: i32, summary: String) -> Outcome {
        Outcome {
            exit_code,
            files: self.files,
            summary,
        }
    }
}

fn build_body(config: &RunConfig) -> Result<(BodySpec, Body), CliError> {
    let spec = config
        .body
        .clone()
        .ok_or_else(|| CliError::Config("this command needs a \"body\" entry".into()))?;
    let body = spec.build().map_err(|e| CliError::Config(format!("invalid body: {e}")))?;
    Ok((spec, body))
}

pub fn execute(command: Command, config: &RunConfig) -> Result<Outcome, CliError> {
    match command {
        Command::Report => cmd_report(config),
        Command::Suite => cmd_suite(config),
        Command::Converge => cmd_converge(config),
        Command::Flow => cmd_flow(config),
        Command::Falsify => cmd_falsify(config),
    }
}

#[derive(Serialize)]
struct ReportRow<'a> {
    name: &'a str,
    fine: f64,
    coarse: f64,
    drift: f64,
    fine_resolution: String,
    coarse_resolution: String,
    seed: u64,
}

pub fn cmd_report(config: &RunConfig) -> Result<Outcome, CliError> {
    let (_, body) = build_body(config)?;
    let r = config.resolve(body.dim())?;
    let report = invariant_report(&body, r.fine, r.coarse, &r.p_list, r.p_max)?;
    let rows: Vec<ReportRow> = report
        .fine
        .scalars()
        .into_iter()
        .zip(report.coarse.scalars())
        .zip(&report.drift)
        .map(|(((name, fine), (_, coarse)), (_, drift))| ReportRow {
            name,
            fine,
            coarse,
            drift: *drift,
            fine_resolution: r.fine.to_string(),
            coarse_resolution: r.coarse.to_string(),
            seed: r.seed,
        })
        .collect();
    let finite = rows.iter().all(|row| row.fine.is_finite() && row.coarse.is_finite());
    let mut w = Writer::new(config, Command::Report);
    w.json("report.json", Some(report.body.clone()), &r, &report)?;
    w.csv("report.csv", &rows)?;
    let worst = report.drift.iter().map(|d| d.1).fold(0.0, f64::max);
    if !finite {
        return Ok(w.finish(EXIT_NUMERICAL, format!("{}: non-finite invariant", report.body)));
    }
    Ok(w.finish(EXIT_PASS, format!("{}: largest resolution drift {worst:.3e}", report.body)))
}

#[derive(Serialize)]
struct SuiteRow<'a> {
    id: &'a str,
    body: &'a str,
    lhs: f64,
    rhs: f64,
    slack: f64,
    tol: f64,
    pass: bool,
    status: Status,
    coarse_slack: Option<f64>,
    drift: Option<f64>,
    hypotheses: String,
    equality_expected: bool,
    equality_detected: bool,
    resolution: String,
    coarse_resolution: String,
    seed: u64,
}

fn hypothesis_flags(c: &CheckResult) -> String {
    c.hypotheses
        .iter()
        .map(|h| format!("{}={}", h.name, h.satisfied))
        .collect::<Vec<_>>()
        .join(";")
}

fn suite_rows<'a>(report: &'a SuiteReport, seed: u64) -> Vec<SuiteRow<'a>> {
    report
        .checks
        .iter()
        .map(|c| SuiteRow {
            id: &c.id,
            body: &c.body,
            lhs: c.lhs,
            rhs: c.rhs,
            slack: c.slack,
            tol: c.tol,
            pass: c.status == Status::Pass,
            status: c.status,
            coarse_slack: c.coarse.as_ref().map(|x| x.slack),
            drift: c.drift,
            hypotheses: hypothesis_flags(c),
            equality_expected: c.equality_expected,
            equality_detected: c.equality_detected,
            resolution: c.resolution.to_string(),
            coarse_resolution: c.coarse.as_ref().map(|x| x.resolution.to_string()).unwrap_or_default(),
            seed,
        })
        .collect()
}

fn checks_finite(report: &SuiteReport) -> bool {
    report.checks.iter().all(|c| c.chain.iter().all(|v| !v.is_nan()) && !c.slack.is_nan())
}

pub fn cmd_suite(config: &RunConfig) -> Result<Outcome, CliError> {
    let (_, body) = build_body(config)?;
    let r = config.resolve(body.dim())?;
    let report = run_suite(&body, &r.suite_config())?;
    let mut w = Writer::new(config, Command::Suite);
    w.csv("suite.csv", &suite_rows(&report, r.seed))?;
    w.json("suite.json", Some(report.body.clone()), &r, &report)?;
    let counts = |s: Status| report.checks.iter().filter(|c| c.status == s).count();
    let summary = format!(
        "{}: {} pass, {} fail, {} not applicable",
        report.body,
        counts(Status::Pass),
        counts(Status::Fail),
        counts(Status::NotApplicable)
    );
    let code = if !checks_finite(&report) {
        EXIT_NUMERICAL
    } else if report.all_pass() {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    };
    Ok(w.finish(code, summary))
}

#[derive(Serialize)]
struct ConvergeRow {
    kind: &'static str,
    p: usize,
    exponent: f64,
    stated: f64,
    corrected: f64,
    corrected_tail: f64,
    target: f64,
    relative_gap: f64,
    tail_gap: f64,
    stated_tail: f64,
    stated_limit: f64,
    resolution: String,
    tol: f64,
    seed: u64,
}

/// Limit sequences of every kind at the fine resolution.
pub fn sequences(body: &Body, resolution: Resolution, p_max: usize) -> Result<Vec<LimitSequence>, CliError> {
    let fields = evaluate_fields(body, &build_grid(resolution)?)?;
    Ok(SequenceKind::ALL
        .iter()
        .map(|&k| limit_sequence(&fields, k, p_max))
        .collect::<Result<Vec<_>, _>>()?)
}

pub fn cmd_converge(config: &RunConfig) -> Result<Outcome, CliError> {
    let (_, body) = build_body(config)?;
    let r = config.resolve(body.dim())?;
    let seqs = sequences(&body, r.fine, r.p_max)?;
    let mut rows = Vec::new();
    for s in &seqs {
        for t in &s.terms {
            rows.push(ConvergeRow {
                kind: s.kind.name(),
                p: t.index,
                exponent: t.exponent,
                stated: t.stated,
                corrected: t.corrected,
                corrected_tail: s.corrected_tail,
                target: s.corrected_target,
                relative_gap: (t.corrected / s.corrected_target - 1.0).abs(),
                tail_gap: s.corrected_relative_gap(),
                stated_tail: s.stated_tail,
                stated_limit: s.stated_limit,
                resolution: r.fine.to_string(),
                tol: r.tolerance,
                seed: r.seed,
            });
        }
    }
    let mut w = Writer::new(config, Command::Converge);
    w.csv("converge.csv", &rows)?;
    w.json("converge.json", Some(body.describe()), &r, &seqs)?;
    let finite = seqs.iter().all(|s| s.corrected_tail.is_finite() && s.corrected_target.is_finite());
    let worst = seqs.iter().map(LimitSequence::corrected_relative_gap).fold(0.0, f64::max);
    let code = if finite { EXIT_PASS } else { EXIT_NUMERICAL };
    Ok(w.finish(code, format!("{}: largest corrected tail gap {worst:.3e}", body.describe())))
}

/// Verdicts on a variation check.
#[derive(Debug, Clone, Serialize)]
pub struct VariationSummary {
    /// `|dV + Ω_n| / Ω_n`.
    pub first_variation_residual: f64,
    /// `|d²V + Ω_{2,n}| / max(Ω_n, 1)`.
    pub second_variation_residual: f64,
    /// `|d²V − Ω_{2,n}| / max(Ω_n, 1)`, the identity with the opposite sign.
    pub literal_second_variation_residual: f64,
    pub first_variation_ok: bool,
    pub second_variation_ok: bool,
    /// Error ratio of the first difference under halving; `None` when the
    /// differencing error is below round-off.
    pub halving_ratio: Option<f64>,
    pub halving_ratio_ok: Option<bool>,
}

pub fn summarize_variation(v: &VariationCheck) -> VariationSummary {
    let scale = v.omega_n.max(1.0);
    let first = (v.dv_measured - v.dv_predicted).abs() / v.omega_n;
    let second = (v.d2v_measured - v.d2v_predicted).abs() / scale;
    let literal = (v.d2v_measured - v.omega_2n).abs() / scale;
    let k = v.dv_by_tau.len() - 1;
    let resolvable = (v.dv_by_tau[k] - v.dv_predicted).abs() > 1e-8 * v.omega_n;
    let ratio = resolvable.then_some(v.dv_error_ratio);
    VariationSummary {
        first_variation_residual: first,
        second_variation_residual: second,
        literal_second_variation_residual: literal,
        first_variation_ok: first <= FIRST_VARIATION_TOL,
        second_variation_ok: second <= SECOND_VARIATION_TOL,
        halving_ratio: ratio,
        halving_ratio_ok: ratio.map(|x| (x - 4.0).abs() <= HALVING_RATIO_TOL),
    }
}

#[derive(Serialize)]
struct FlowResult<'a> {
    resolution: Resolution,
    stability_bound: f64,
    trace: &'a FlowTrace,
    variation: &'a VariationCheck,
    summary: &'a VariationSummary,
}

#[derive(Serialize)]
struct FlowRow {
    step: usize,
    t: f64,
    volume: f64,
    valid: bool,
    dt: f64,
    resolution: String,
    seed: u64,
}

pub fn cmd_flow(config: &RunConfig) -> Result<Outcome, CliError> {
    let (_, body) = build_body(config)?;
    if body.dim() != 2 {
        return Err(CliError::Config(format!("flow runs on planar bodies only, got dimension {}", body.dim())));
    }
    let r = config.resolve(2)?;
    let resolution = config.flow_resolution();
    if resolution.dim() != 2 {
        return Err(CliError::Config(format!("flow resolution {resolution} is not planar")));
    }
    let grid = build_grid(resolution)?;
    let bound = stability_bound(&body, &grid)?;
    let dt = config.flow.dt.unwrap_or(bound);
    if !(dt > 0.0 && dt <= bound) {
        return Err(CliError::Usage(format!(
            "time step {dt:e} is invalid; the stability bound at resolution {resolution} is {bound:e}"
        )));
    }
    let trace = integrate_flow(&body, &grid, dt, config.flow.steps)?;
    let variation = variation_check_with(&body, &grid, config.flow.tau, config.flow.levels)?;
    let summary = summarize_variation(&variation);
    let rows: Vec<FlowRow> = (0..trace.times.len())
        .map(|i| FlowRow {
            step: i,
            t: trace.times[i],
            volume: trace.volumes[i],
            valid: trace.valid[i],
            dt,
            resolution: resolution.to_string(),
            seed: r.seed,
        })
        .collect();
    let mut w = Writer::new(config, Command::Flow);
    w.csv("flow.csv", &rows)?;
    let result = FlowResult {
        resolution,
        stability_bound: bound,
        trace: &trace,
        variation: &variation,
        summary: &summary,
    };
    w.json("flow.json", Some(body.describe()), &r, &result)?;
    let text = format!(
        "{}: dV residual {:.3e}, d2V residual {:.3e}, halving ratio {}",
        body.describe(),
        summary.first_variation_residual,
        summary.second_variation_residual,
        summary.halving_ratio.map_or("n/a".to_string(), |x| format!("{x:.3}"))
    );
    let code = if trace.truncated.is_some() {
        EXIT_NUMERICAL
    } else if summary.first_variation_ok && summary.second_variation_ok && summary.halving_ratio_ok != Some(false) {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    };
    Ok(w.finish(code, text))
}

/// A random centered ellipse `R diag(a, b)` with axes in `[0.5, 2]`.
fn random_ellipse_spec(rng: &mut impl Rng) -> BodySpec {
    let a = rng.gen_range(0.5..=2.0);
    let b = rng.gen_range(0.5..=2.0);
    let (s, c) = rng.gen_range(0.0..std::f64::consts::TAU).sin_cos();
    BodySpec::LinearImage {
        base: Box::new(BodySpec::Ellipsoid { axes: vec![a, b] }),
        matrix: vec![vec![c, -s], vec![s, c]],
    }
}

/// Draws the `samples` bodies of a falsification run.
pub fn sample_specs(family: Family, samples: usize, seed: u64) -> Result<Vec<BodySpec>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            Ok(match family {
                Family::Fourier => centered(random_fourier_spec(&mut rng))?,
                Family::Sphharm => centered(random_sphharm_spec(&mut rng)?)?,
                Family::Ellipsoid => random_ellipse_spec(&mut rng),
            })
        })
        .collect()
}

#[derive(Serialize)]
struct LogEntry<'a> {
    sample: usize,
    seed: u64,
    spec: &'a BodySpec,
    body: &'a str,
    check: &'a str,
    lhs: f64,
    rhs: f64,
    slack: f64,
    tol: f64,
    status: Status,
    equality_detected: bool,
    resolution: String,
}

#[derive(Serialize)]
struct SampleError<'a> {
    sample: usize,
    spec: &'a BodySpec,
    error: String,
}

#[derive(Serialize, Default)]
struct FalsifySummary {
    samples: usize,
    candidates: usize,
    equality_cases: usize,
    failed_checks: usize,
    not_applicable: usize,
    numerical_failures: usize,
    smallest_relative_slack: Option<f64>,
}

pub fn cmd_falsify(config: &RunConfig) -> Result<Outcome, CliError> {
    let family = config.falsify.family;
    let margin = config.falsify.margin;
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(CliError::Config(format!("falsify margin must be positive, got {margin}")));
    }
    let r = config.resolve(family.dim())?;
    let specs = sample_specs(family, config.falsify.samples, r.seed)?;
    let mut candidates = Vec::new();
    let mut equality = Vec::new();
    let mut errors = Vec::new();
    let mut summary = FalsifySummary {
        samples: specs.len(),
        ..Default::default()
    };
    for (i, spec) in specs.iter().enumerate() {
        let body = spec.build()?;
        let mut suite = r.suite_config();
        suite.seed = r.seed.wrapping_add(i as u64);
        let report = match run_suite(&body, &suite) {
            Ok(x) => x,
            Err(e) => {
                summary.numerical_failures += 1;
                errors.extend(to_json_line(&SampleError {
                    sample: i,
                    spec,
                    error: e.to_string(),
                })?);
                continue;
            }
        };
        for c in &report.checks {
            match c.status {
                Status::NotApplicable => {
                    summary.not_applicable += 1;
                    continue;
                }
                Status::Fail => summary.failed_checks += 1,
                Status::Pass => {}
            }
            if !c.equality_expected {
                let rel = c.slack / c.tol;
                summary.smallest_relative_slack = Some(summary.smallest_relative_slack.map_or(rel, |m: f64| m.min(rel)));
            }
            if c.slack >= margin * c.tol {
                continue;
            }
            let line = to_json_line(&LogEntry {
                sample: i,
                seed: suite.seed,
                spec,
                body: &report.body,
                check: &c.id,
                lhs: c.lhs,
                rhs: c.rhs,
                slack: c.slack,
                tol: c.tol,
                status: c.status,
                equality_detected: c.equality_detected,
                resolution: c.resolution.to_string(),
            })?;
            if c.equality_expected {
                summary.equality_cases += 1;
                equality.extend(line);
            } else {
                summary.candidates += 1;
                candidates.extend(line);
            }
        }
    }
    let mut w = Writer::new(config, Command::Falsify);
    w.raw("candidates.ndjson", &candidates)?;
    w.raw("equality_cases.ndjson", &equality)?;
    if !errors.is_empty() {
        w.raw("errors.ndjson", &errors)?;
    }
    w.json("falsify.json", None, &r, &summary)?;
    let text = format!(
        "{} samples: {} candidates, {} equality cases, {} failed checks, {} numerical failures",
        summary.samples, summary.candidates, summary.equality_cases, summary.failed_checks, summary.numerical_failures
    );
    let code = if summary.numerical_failures > 0 {
        EXIT_NUMERICAL
    } else if summary.failed_checks > 0 {
        EXIT_CHECK_FAILED
    } else {
        EXIT_PASS
    };
    Ok(w.finish(code, text))
}
