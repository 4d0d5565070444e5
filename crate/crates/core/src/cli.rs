//! Command-line front end: config parsing, phase points, sweeps, transition
//! scans and the invariant self-check.

use std::fmt::Write as _;
use std::io::Write as _;
use std::num::NonZeroUsize;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::algebra::{
    biorthogonal_decompose, c64, eta_adjoint, eta_trace, frobenius, identity,
    quasi_hermiticity_residual, CMatrix, MetricOperator, C64,
};
use crate::equivalence::{operator_overlap, purified_overlap, purify};
use crate::error::QhError;
use crate::models::ModelSpec;
use crate::thermal::GibbsState;
use crate::uhlmann::{
    connection_at, d_sqrt_rho, find_transitions, generating_function, geometric_factor,
    holonomy_with, parallel_transport_residual, sylvester_residual, sylvester_rhs, HolonomyOptions,
    HolonomyResult, Transport,
};

/// Environment variable that flips the sign of the Sylvester right-hand side
/// inside `check`, to demonstrate that the residual check can fail.
pub const FAULT_ENV: &str = "QHU_FAULT_SYLVESTER_SIGN";

/// `β·Δ` used when a zero temperature is requested.
pub const ZERO_T_BETA_GAP: f64 = 1e3;

pub const CSV_HEADER: &str = "T,b,G_re,G_im,theta_U,g_gen,g_arccos,well_defined";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },
    #[error(transparent)]
    Numerical(#[from] QhError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

fn validation(key: &str, message: impl Into<String>) -> CliError {
    CliError::Validation {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Phase,
    Sweep,
    Transitions,
    Check,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub scale: Scale,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        (0..self.count)
            .map(|i| {
                let f = i as f64 / (self.count - 1) as f64;
                match self.scale {
                    Scale::Linear => self.min + (self.max - self.min) * f,
                    Scale::Log => (self.min.ln() + (self.max.ln() - self.min.ln()) * f).exp(),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    Single(f64),
    Grid(Grid),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub omega: u32,
    pub temperature: Temperature,
    /// Grid over `b` (PT model only).
    pub second_axis: Option<Grid>,
    pub steps: usize,
    pub mode: Option<Mode>,
    pub output: Option<PathBuf>,
    pub seed: u64,
    /// Tolerance of the closed-form agreement check.
    pub oracle_tol: f64,
}

const MODEL_KEYS: &[&str] = &["model", "t", "a", "b", "omega"];
const RUN_KEYS: &[&str] = &[
    "T",
    "T_min",
    "T_max",
    "T_count",
    "T_scale",
    "b_min",
    "b_max",
    "b_count",
    "steps",
    "mode",
    "output",
    "seed",
    "oracle_tol",
];

struct Entry {
    value: String,
    line: usize,
}

struct Document {
    entries: Vec<(String, Entry)>,
}

impl Document {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut section: Option<&str> = None;
        let mut entries: Vec<(String, Entry)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if content.starts_with('[') {
                section = match content {
                    "[model]" => Some("model"),
                    "[run]" => Some("run"),
                    other => {
                        return Err(CliError::Parse {
                            line,
                            message: format!("unknown section {other}"),
                        })
                    }
                };
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(CliError::Parse {
                    line,
                    message: format!("expected `key = value`, found `{content}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(CliError::Parse {
                    line,
                    message: "empty key or value".into(),
                });
            }
            let Some(sec) = section else {
                return Err(CliError::Parse {
                    line,
                    message: format!("key `{key}` appears before any section"),
                });
            };
            let allowed = if sec == "model" { MODEL_KEYS } else { RUN_KEYS };
            if !allowed.contains(&key) {
                return Err(validation(key, format!("unknown key in [{sec}]")));
            }
            if entries.iter().any(|(k, _)| k == key) {
                return Err(CliError::Parse {
                    line,
                    message: format!("duplicate key `{key}`"),
                });
            }
            entries.push((
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line,
                },
            ));
        }
        Ok(Self { entries })
    }

    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, e)| e)
    }

    fn has(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    fn number<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|_| CliError::Parse {
                line: e.line,
                message: format!("`{key}` is not a valid number: `{}`", e.value),
            }),
        }
    }

    fn real(&self, key: &str) -> Result<Option<f64>, CliError> {
        let v = self.number::<f64>(key)?;
        if let Some(x) = v {
            if !x.is_finite() {
                return Err(validation(key, "must be finite"));
            }
        }
        Ok(v)
    }

    fn required_real(&self, key: &str) -> Result<f64, CliError> {
        self.real(key)?
            .ok_or_else(|| validation(key, "missing required key"))
    }
}

fn parse_grid(doc: &Document, prefix: &str, positive: bool) -> Result<Option<Grid>, CliError> {
    let k = |s: &str| format!("{prefix}_{s}");
    let keys = [k("min"), k("max"), k("count")];
    if !keys.iter().any(|key| doc.has(key)) && !doc.has(&k("scale")) {
        return Ok(None);
    }
    let min = doc.required_real(&keys[0])?;
    let max = doc.required_real(&keys[1])?;
    let count = doc
        .number::<usize>(&keys[2])?
        .ok_or_else(|| validation(&keys[2], "missing required key"))?;
    let scale = match doc.get(&k("scale")).map(|e| e.value.as_str()) {
        None | Some("linear") => Scale::Linear,
        Some("log") => Scale::Log,
        Some(other) => {
            return Err(validation(
                &k("scale"),
                format!("expected `linear` or `log`, got `{other}`"),
            ))
        }
    };
    if count < 2 {
        return Err(validation(
            &keys[2],
            format!("grids need at least 2 points, got {count}"),
        ));
    }
    if positive && min <= 0.0 {
        return Err(validation(&keys[0], "temperatures must be positive"));
    }
    if max <= min {
        return Err(validation(&keys[1], format!("must exceed {}", keys[0])));
    }
    if scale == Scale::Log && min <= 0.0 {
        return Err(validation(&keys[0], "log grids need a positive minimum"));
    }
    Ok(Some(Grid {
        min,
        max,
        count,
        scale,
    }))
}

/// Parses and validates a run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let doc = Document::parse(text)?;

    let model_name = doc
        .get("model")
        .map(|e| e.value.clone())
        .ok_or_else(|| validation("model", "missing required key"))?;
    let omega = doc.number::<u32>("omega")?.unwrap_or(1);
    if omega < 1 {
        return Err(validation("omega", "winding number must be at least 1"));
    }

    let b_axis = parse_grid(&doc, "b", false)?;
    let model = match model_name.as_str() {
        "two_level_t" => {
            for key in ["a", "b"] {
                if doc.has(key) {
                    return Err(validation(key, "not a parameter of two_level_t"));
                }
            }
            if b_axis.is_some() {
                return Err(validation("b_min", "only pt_equator supports a b axis"));
            }
            let t = doc.required_real("t")?;
            if t <= 0.0 {
                return Err(validation("t", "must be positive"));
            }
            ModelSpec::TwoLevelT { t }
        }
        "pt_equator" => {
            if doc.has("t") {
                return Err(validation("t", "not a parameter of pt_equator"));
            }
            let a = doc.required_real("a")?;
            let b = match (doc.real("b")?, b_axis) {
                (Some(b), None) => b,
                (Some(_), Some(_)) => {
                    return Err(validation("b", "give either b or a b grid, not both"))
                }
                (None, Some(grid)) => grid.min,
                (None, None) => return Err(validation("b", "missing required key")),
            };
            let broken = |b: f64| a * a <= b * b;
            if broken(b) {
                return Err(validation("b", "quasi-Hermitian regime requires a^2 > b^2"));
            }
            if let Some(grid) = b_axis {
                if broken(grid.max) {
                    return Err(validation(
                        "b_max",
                        "quasi-Hermitian regime requires a^2 > b^2",
                    ));
                }
            }
            ModelSpec::PtEquator { a, b }
        }
        other => {
            return Err(validation(
                "model",
                format!("expected `two_level_t` or `pt_equator`, got `{other}`"),
            ))
        }
    };

    let temperature = match (doc.real("T")?, parse_grid(&doc, "T", true)?) {
        (Some(_), Some(_)) => return Err(validation("T", "give either T or a T grid, not both")),
        (Some(t), None) => {
            if t < 0.0 {
                return Err(validation("T", "temperature must be non-negative"));
            }
            Temperature::Single(t)
        }
        (None, Some(grid)) => Temperature::Grid(grid),
        (None, None) => {
            return Err(validation(
                "T",
                "missing temperature (T or T_min/T_max/T_count)",
            ))
        }
    };

    let steps = doc.number::<usize>("steps")?.unwrap_or(1024);
    if steps < 8 {
        return Err(validation("steps", "need at least 8 steps"));
    }
    let mode = match doc.get("mode").map(|e| e.value.as_str()) {
        None => None,
        Some("phase") => Some(Mode::Phase),
        Some("sweep") => Some(Mode::Sweep),
        Some("transitions") => Some(Mode::Transitions),
        Some("check") => Some(Mode::Check),
        Some(other) => return Err(validation("mode", format!("unknown mode `{other}`"))),
    };
    let oracle_tol = doc.real("oracle_tol")?.unwrap_or(1e-6);
    if oracle_tol <= 0.0 {
        return Err(validation("oracle_tol", "must be positive"));
    }

    Ok(RunConfig {
        model,
        omega,
        temperature,
        second_axis: b_axis,
        steps,
        mode,
        output: doc.get("output").map(|e| PathBuf::from(&e.value)),
        seed: doc.number::<u64>("seed")?.unwrap_or(0),
        oracle_tol,
    })
}

impl RunConfig {
    fn temperatures(&self) -> Vec<f64> {
        match self.temperature {
            Temperature::Single(t) => vec![t],
            Temperature::Grid(g) => g.points(),
        }
    }

    fn models(&self) -> Vec<ModelSpec> {
        match (self.model, self.second_axis) {
            (ModelSpec::PtEquator { a, .. }, Some(grid)) => grid
                .points()
                .into_iter()
                .map(|b| ModelSpec::PtEquator { a, b })
                .collect(),
            (model, _) => vec![model],
        }
    }

    fn options(&self) -> HolonomyOptions {
        HolonomyOptions::default()
    }
}

/// `β` for a temperature, with `T = 0` mapped to `β·Δ = 10³`.
pub fn beta_for(model: &ModelSpec, temperature: f64) -> f64 {
    if temperature == 0.0 {
        eprintln!(
            "warning: T = 0 is evaluated at beta*gap = {ZERO_T_BETA_GAP:e} as a pure-state proxy"
        );
        ZERO_T_BETA_GAP / model.gap()
    } else {
        1.0 / temperature
    }
}

/// One evaluated `(T, b)` point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointReport {
    pub temperature: f64,
    pub b: Option<f64>,
    pub amplitude: C64,
    pub phase: Option<f64>,
    pub g_gen: f64,
    pub g_arccos: Option<f64>,
    pub well_defined: bool,
    pub steps_used: usize,
    pub closed_form: Option<f64>,
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl PointReport {
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
        [
            fmt_float(self.temperature),
            opt(self.b),
            fmt_float(self.amplitude.re),
            fmt_float(self.amplitude.im),
            opt(self.phase),
            fmt_float(self.g_gen),
            opt(self.g_arccos),
            self.well_defined.to_string(),
        ]
        .join(",")
    }
}

pub fn csv_document(rows: &[PointReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_row());
        out.push('\n');
    }
    out
}

fn evaluate(
    model: &ModelSpec,
    omega: u32,
    steps: usize,
    temperature: f64,
    opts: &HolonomyOptions,
) -> Result<PointReport, CliError> {
    let beta = beta_for(model, temperature);
    let loop_ = model.parameter_loop(omega, steps)?;
    let res: HolonomyResult = holonomy_with(&loop_, beta, opts)?;
    Ok(PointReport {
        temperature,
        b: match model {
            ModelSpec::PtEquator { b, .. } => Some(*b),
            ModelSpec::TwoLevelT { .. } => None,
        },
        amplitude: res.amplitude,
        phase: res.phase,
        g_gen: generating_function(res.amplitude, NonZeroUsize::MIN),
        g_arccos: geometric_factor(res.amplitude).ok(),
        well_defined: res.well_defined,
        steps_used: res.steps_used,
        closed_form: model.closed_form(omega, beta).ok().map(|c| c.amplitude),
    })
}

/// Single point at the configured temperature (the first grid point for a grid).
pub fn run_phase(cfg: &RunConfig) -> Result<PointReport, CliError> {
    let temperature = cfg.temperatures()[0];
    evaluate(
        &cfg.model,
        cfg.omega,
        cfg.steps,
        temperature,
        &cfg.options(),
    )
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| CliError::Io(e.to_string()))
}

/// All grid points, row-major over `(b, T)`.
pub fn run_sweep(cfg: &RunConfig, jobs: Option<usize>) -> Result<Vec<PointReport>, CliError> {
    let points: Vec<(ModelSpec, f64)> = cfg
        .models()
        .into_iter()
        .flat_map(|m| cfg.temperatures().into_iter().map(move |t| (m, t)))
        .collect();
    let opts = cfg.options();
    pool(jobs)?.install(|| {
        points
            .par_iter()
            .map(|(m, t)| evaluate(m, cfg.omega, cfg.steps, *t, &opts))
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRow {
    pub b: Option<f64>,
    pub critical_temperature: f64,
}

/// Sign changes of `Re 𝒢(T)` over the temperature grid, per `b` value.
pub fn run_transitions(
    cfg: &RunConfig,
    jobs: Option<usize>,
) -> Result<Vec<TransitionRow>, CliError> {
    let Temperature::Grid(grid) = cfg.temperature else {
        return Err(validation(
            "T_min",
            "transition scans need a temperature grid",
        ));
    };
    if grid.count < 16 {
        return Err(validation(
            "T_count",
            "transition scans need at least 16 grid points",
        ));
    }
    let opts = cfg.options();
    let per_model = pool(jobs)?.install(|| {
        cfg.models()
            .par_iter()
            .map(|model| -> Result<Vec<TransitionRow>, CliError> {
                let loop_ = model.parameter_loop(cfg.omega, cfg.steps)?;
                let roots = find_transitions(
                    |t| Ok(holonomy_with(&loop_, 1.0 / t, &opts)?.amplitude.re),
                    grid.min,
                    grid.max,
                    grid.count,
                )?;
                let b = match model {
                    ModelSpec::PtEquator { b, .. } => Some(*b),
                    ModelSpec::TwoLevelT { .. } => None,
                };
                Ok(roots
                    .into_iter()
                    .map(|critical_temperature| TransitionRow {
                        b,
                        critical_temperature,
                    })
                    .collect())
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(per_model.into_iter().flatten().collect())
}

pub fn transitions_document(rows: &[TransitionRow]) -> String {
    let mut out = String::from("b,T_c\n");
    for row in rows {
        let b = row.b.map(fmt_float).unwrap_or_default();
        let _ = writeln!(out, "{b},{}", fmt_float(row.critical_temperature));
    }
    out
}

/// Outcome of one self-check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn at_most(name: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name,
            value,
            threshold,
            passed: value <= threshold,
        }
    }

    fn at_least(name: &'static str, value: f64, threshold: f64) -> Self {
        Self {
            name,
            value,
            threshold,
            passed: value >= threshold,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {} value={:.3e} threshold={:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.threshold
        )
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| {
        c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// Random well-conditioned metric `B†B + 𝕀/2`.
pub fn random_metric(rng: &mut ChaCha8Rng, n: usize) -> MetricOperator {
    let b = random_matrix(rng, n);
    MetricOperator::new(b.adjoint() * &b + identity(n) * c64(0.5, 0.0))
        .expect("B†B + I/2 is positive definite")
}

/// Random η-unitary `S⁻¹VS` with `V = exp(iK)` for Hermitian `K`.
pub fn random_eta_unitary(rng: &mut ChaCha8Rng, m: &MetricOperator) -> CMatrix {
    let n = m.dim();
    let k = random_matrix(rng, n);
    let herm = (&k + k.adjoint()) * c64(0.0, 0.5);
    let v = crate::algebra::expm(&herm);
    m.inv_sqrt() * v * m.sqrt()
}

/// Invariant suite at the configured model, first temperature and seed.
pub fn run_check(cfg: &RunConfig) -> Result<Vec<CheckOutcome>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::new();
    let trials = 200;

    let (mut involution, mut anti_hom, mut cyclic): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..trials {
        let n = rng.random_range(2..=4);
        let m = random_metric(&mut rng, n);
        let a = random_matrix(&mut rng, n);
        let b = random_matrix(&mut rng, n);
        let twice = eta_adjoint(&eta_adjoint(&a, &m)?, &m)?;
        involution = involution.max(frobenius(&(twice - &a)) / frobenius(&a));
        let lhs = eta_adjoint(&(&a * &b), &m)?;
        let rhs = eta_adjoint(&b, &m)? * eta_adjoint(&a, &m)?;
        anti_hom = anti_hom.max(frobenius(&(lhs - rhs)) / (frobenius(&a) * frobenius(&b)));
        let t1 = eta_trace(&(eta_adjoint(&a, &m)? * &b), &m)?;
        let t2 = eta_trace(&(eta_adjoint(&b, &m)? * &a), &m)?;
        cyclic = cyclic.max((t1 - t2.conj()).norm() / (frobenius(&a) * frobenius(&b)));
    }
    out.push(CheckOutcome::at_most(
        "eta_adjoint_involution",
        involution,
        1e-12,
    ));
    out.push(CheckOutcome::at_most(
        "eta_adjoint_anti_homomorphism",
        anti_hom,
        1e-12,
    ));
    out.push(CheckOutcome::at_most("eta_trace_cyclicity", cyclic, 1e-12));

    let temperature = cfg.temperatures()[0];
    let beta = beta_for(&cfg.model, temperature);
    let loop_ = cfg.model.parameter_loop(cfg.omega, cfg.steps)?;
    let fault = std::env::var_os(FAULT_ENV).is_some_and(|v| !v.is_empty() && v != "0");

    let (mut qh, mut bio, mut gibbs, mut sylvester, mut anti, mut gauge_cov): (
        f64,
        f64,
        f64,
        f64,
        f64,
        f64,
    ) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let samples = 16;
    for k in 0..samples {
        let lambda =
            loop_.start() + (loop_.end() - loop_.start()) * (k as f64 + 0.37) / samples as f64;
        let (h, m) = loop_.sample(lambda)?;
        qh = qh.max(quasi_hermiticity_residual(&h, &m)?);
        let sys = biorthogonal_decompose(&h, &m)?;
        bio = bio.max(
            sys.biorthogonality_residual()
                .max(sys.completeness_residual()),
        );
        let state = GibbsState::from_system(sys.clone(), m.clone(), beta)?;
        let r = state.residuals();
        gibbs = gibbs.max(
            r.population_sum
                .max(r.trace)
                .max(r.self_adjoint)
                .max(r.root),
        );
        let dsr = d_sqrt_rho(&loop_, beta, lambda, loop_.fd_step())?;
        let sample = connection_at(&state, &dsr, lambda)?;
        let mut rhs = sylvester_rhs(&state, &dsr);
        if fault {
            rhs = -rhs;
        }
        sylvester = sylvester.max(sylvester_residual(state.rho(), &sample.a_matrix, &rhs));
        anti = anti.max(sample.anti_self_adjoint_residual(&m)?);
        let phases: Vec<f64> = (0..state.dim())
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        let rephased = GibbsState::from_system(sys.rephased(&phases), m.clone(), beta)?;
        let other = connection_at(&rephased, &dsr, lambda)?;
        gauge_cov = gauge_cov.max(frobenius(&(other.a_matrix - &sample.a_matrix)));
    }
    out.push(CheckOutcome::at_most("quasi_hermiticity", qh, 1e-10));
    out.push(CheckOutcome::at_most(
        "biorthogonality_completeness",
        bio,
        1e-10,
    ));
    out.push(CheckOutcome::at_most("gibbs_state", gibbs, 1e-10));
    out.push(CheckOutcome::at_most("sylvester_residual", sylvester, 1e-9));
    out.push(CheckOutcome::at_most(
        "connection_anti_self_adjoint",
        anti,
        1e-9,
    ));
    out.push(CheckOutcome::at_most(
        "eigenvector_phase_invariance",
        gauge_cov,
        1e-6,
    ));

    let res = holonomy_with(&loop_, beta, &cfg.options())?;
    out.push(CheckOutcome::at_most(
        "holonomy_eta_unitarity",
        res.eta_unitarity_drift(),
        1e-8,
    ));
    out.push(CheckOutcome::at_most(
        "amplitude_bound",
        res.amplitude.norm() - 1.0,
        1e-8,
    ));
    if let Ok(closed) = cfg.model.closed_form(cfg.omega, beta) {
        let diff = (res.amplitude - c64(closed.amplitude, 0.0)).norm();
        out.push(CheckOutcome::at_most(
            "closed_form_agreement",
            diff,
            cfg.oracle_tol,
        ));
    }

    let coarse = parallel_transport_residual(&loop_, beta, 256, Transport::Horizontal)?;
    let fine = parallel_transport_residual(&loop_, beta, 512, Transport::Horizontal)?;
    let ratio = if fine > 0.0 {
        coarse / fine
    } else {
        f64::INFINITY
    };
    // β = 0 leaves nothing to transport; both residuals sit at round-off.
    let order = if coarse <= 1e-12 {
        f64::INFINITY
    } else {
        ratio
    };
    out.push(CheckOutcome::at_least(
        "parallel_transport_order",
        order,
        1.8,
    ));

    let state = loop_.state_at(loop_.start(), beta)?;
    let mut overlap: f64 = 0.0;
    for _ in 0..trials {
        let u1 = random_eta_unitary(&mut rng, state.metric());
        let u2 = random_eta_unitary(&mut rng, state.metric());
        let w1 = purify(&state, &u1)?;
        let w2 = purify(&state, &u2)?;
        overlap = overlap.max((purified_overlap(&w1, &w2)? - operator_overlap(&w1, &w2)?).norm());
    }
    out.push(CheckOutcome::at_most(
        "purified_overlap_identity",
        overlap,
        1e-12,
    ));
    Ok(out)
}

#[derive(Debug, Parser)]
#[command(
    name = "qhu",
    version,
    about = "Uhlmann phases of quasi-Hermitian systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// Configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output file (default: the config's `output`, else standard output).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Uhlmann amplitude and phase at one temperature.
    Phase(CommonArgs),
    /// Phase diagram over the temperature (and b) grid.
    Sweep(CommonArgs),
    /// Critical temperatures over the temperature grid.
    Transitions(CommonArgs),
    /// Invariant self-check.
    Check(CommonArgs),
}

fn emit(text: &str, path: Option<&PathBuf>) -> Result<(), CliError> {
    match path {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let (mode, args) = match cli.command {
        Command::Phase(a) => (Mode::Phase, a),
        Command::Sweep(a) => (Mode::Sweep, a),
        Command::Transitions(a) => (Mode::Transitions, a),
        Command::Check(a) => (Mode::Check, a),
    };
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.config.display())))?;
    let cfg = parse_config(&text)?;
    let output = args.output.as_ref().or(cfg.output.as_ref());
    match mode {
        Mode::Phase => {
            let report = run_phase(&cfg)?;
            eprintln!("steps_used = {}", report.steps_used);
            if let Some(closed) = report.closed_form {
                eprintln!(
                    "closed_form = {}  |difference| = {:.3e}",
                    fmt_float(closed),
                    (report.amplitude - c64(closed, 0.0)).norm()
                );
            }
            emit(&csv_document(std::slice::from_ref(&report)), output)?;
            Ok(0)
        }
        Mode::Sweep => {
            let rows = run_sweep(&cfg, args.jobs)?;
            emit(&csv_document(&rows), output)?;
            Ok(0)
        }
        Mode::Transitions => {
            let rows = run_transitions(&cfg, args.jobs)?;
            eprintln!("{} transition(s)", rows.len());
            emit(&transitions_document(&rows), output)?;
            Ok(0)
        }
        Mode::Check => {
            let outcomes = run_check(&cfg)?;
            let mut report = String::new();
            for o in &outcomes {
                let _ = writeln!(report, "{}", o.line());
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            let _ = writeln!(report, "{} checks, {failed} failed", outcomes.len());
            emit(&report, output)?;
            Ok(if failed == 0 { 0 } else { 2 })
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
