//! Uhlmann connection, holonomy and phase for quasi-Hermitian thermal states.
//!
//! Along a loop `λ ↦ (H(λ), η₊(λ))` the Gibbs state `ρ(λ)` is lifted to
//! purifications `W = √ρ·U`. The parallel-transport condition
//! `W‡Ẇ = Ẇ‡W` fixes the connection through the Sylvester equation
//!
//! ```text
//! ρ𝒜 + 𝒜ρ = −[d√ρ, √ρ]
//! ```
//!
//! solved element-wise in the biorthogonal eigenbasis of `ρ`. The holonomy is
//! the ordered product of step propagators `exp(−𝒜(λₖ)Δλ)` at the step
//! midpoints, refined by step doubling with Romberg extrapolation, and the
//! amplitude is `𝒢 = Tr_η(ρ(0)U(τ))`.

use std::fmt;
use std::num::NonZeroUsize;
use std::sync::Arc;

use crate::algebra::{
    c64, commutator, eta_adjoint, eta_trace, expm, frobenius, identity, CMatrix, MetricOperator,
    C64,
};
use crate::error::{QhError, Result};
use crate::thermal::{gibbs_state, GibbsState};

/// `|𝒢|` at or below which the phase is declared ill-defined.
pub const WELL_DEFINED_TOL: f64 = 1e-6;
/// Default convergence threshold on successive amplitude estimates.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
/// Default ceiling on the number of steps of a single ordered product.
pub const DEFAULT_MAX_STEPS: usize = 1 << 20;
/// Smallest population pair sum accepted by the Sylvester solve.
pub const NEAR_SINGULAR_TOL: f64 = 1e-14;
/// Finite-difference step for `d√ρ`, relative to the base loop length.
pub const FD_RELATIVE_STEP: f64 = 1e-5;

/// A smooth family `λ ↦ (H(λ), η₊(λ))`.
pub trait HamiltonianFamily: Send + Sync {
    fn sample(&self, lambda: f64) -> Result<(CMatrix, MetricOperator)>;
}

impl<F> HamiltonianFamily for F
where
    F: Fn(f64) -> Result<(CMatrix, MetricOperator)> + Send + Sync,
{
    fn sample(&self, lambda: f64) -> Result<(CMatrix, MetricOperator)> {
        self(lambda)
    }
}

/// Closed loop over `[start, start + winding·(end − start)]`.
#[derive(Clone)]
pub struct ParameterLoop {
    family: Arc<dyn HamiltonianFamily>,
    start: f64,
    end: f64,
    steps: usize,
    winding: u32,
}

impl fmt::Debug for ParameterLoop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParameterLoop")
            .field("start", &self.start)
            .field("end", &self.end)
            .field("steps", &self.steps)
            .field("winding", &self.winding)
            .finish_non_exhaustive()
    }
}

impl ParameterLoop {
    /// Validates the loop: `H` and `η₊` must agree at both ends, `steps ≥ 8`
    /// and `winding ≥ 1`. A zero-length loop (`start == end`) is allowed.
    pub fn new(
        family: impl HamiltonianFamily + 'static,
        start: f64,
        end: f64,
        steps: usize,
        winding: u32,
    ) -> Result<Self> {
        Self::from_arc(Arc::new(family), start, end, steps, winding)
    }

    pub fn from_arc(
        family: Arc<dyn HamiltonianFamily>,
        start: f64,
        end: f64,
        steps: usize,
        winding: u32,
    ) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) {
            return Err(QhError::InvalidLoop("endpoints must be finite".into()));
        }
        if steps < 8 {
            return Err(QhError::InvalidLoop(format!(
                "need at least 8 steps, got {steps}"
            )));
        }
        if winding < 1 {
            return Err(QhError::InvalidLoop("winding must be at least 1".into()));
        }
        let (h0, m0) = family.sample(start)?;
        let (h1, m1) = family.sample(end)?;
        let scale = frobenius(&h0).max(1.0);
        let h_gap = frobenius(&(&h1 - &h0)) / scale;
        let eta_gap = m0.distance(&m1);
        if h_gap > 1e-10 || eta_gap > 1e-10 {
            return Err(QhError::InvalidLoop(format!(
                "loop does not close: |dH| = {h_gap:.3e}, |d eta| = {eta_gap:.3e}"
            )));
        }
        Ok(Self {
            family,
            start,
            end,
            steps,
            winding,
        })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    /// End of the base interval (one winding).
    pub fn end(&self) -> f64 {
        self.end
    }

    /// Final parameter value `start + winding·(end − start)`.
    pub fn finish(&self) -> f64 {
        self.start + self.span()
    }

    pub fn span(&self) -> f64 {
        self.winding as f64 * (self.end - self.start)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn winding(&self) -> u32 {
        self.winding
    }

    pub fn with_steps(&self, steps: usize) -> Result<Self> {
        Self::from_arc(
            self.family.clone(),
            self.start,
            self.end,
            steps,
            self.winding,
        )
    }

    pub fn sample(&self, lambda: f64) -> Result<(CMatrix, MetricOperator)> {
        self.family.sample(lambda)
    }

    pub fn state_at(&self, lambda: f64, beta: f64) -> Result<GibbsState> {
        let (h, m) = self.family.sample(lambda)?;
        gibbs_state(&h, &m, beta)
    }

    /// Default finite-difference step for `d√ρ`.
    pub fn fd_step(&self) -> f64 {
        let base = (self.end - self.start).abs();
        FD_RELATIVE_STEP * if base > 0.0 { base } else { 1.0 }
    }
}

/// `d√ρ/dλ` by central differences with one Richardson level (fourth order).
///
/// Returns [`QhError::GaugeJump`] when the `h` and `2h` central estimates are
/// inconsistent by more than a smooth path allows, which happens when `√ρ`
/// jumps inside the stencil.
pub fn d_sqrt_rho(loop_: &ParameterLoop, beta: f64, lambda: f64, h_step: f64) -> Result<CMatrix> {
    if !(h_step > 0.0 && h_step.is_finite()) {
        return Err(QhError::Param(format!(
            "finite-difference step must be positive, got {h_step}"
        )));
    }
    let at = |x: f64| -> Result<CMatrix> { Ok(loop_.state_at(x, beta)?.sqrt_rho().clone()) };
    let plus1 = at(lambda + h_step)?;
    let minus1 = at(lambda - h_step)?;
    let plus2 = at(lambda + 2.0 * h_step)?;
    let minus2 = at(lambda - 2.0 * h_step)?;
    let narrow = (&plus1 - &minus1) / c64(2.0 * h_step, 0.0);
    let wide = (&plus2 - &minus2) / c64(4.0 * h_step, 0.0);

    let mismatch = frobenius(&(&narrow - &wide));
    let reference = frobenius(&plus1).max(f64::MIN_POSITIVE);
    if mismatch * h_step > 1e-6 * reference {
        let ratio = mismatch
            / frobenius(&narrow)
                .max(frobenius(&wide))
                .max(f64::MIN_POSITIVE);
        return Err(QhError::GaugeJump { lambda, ratio });
    }
    Ok((&narrow * c64(4.0, 0.0) - wide) / c64(3.0, 0.0))
}

/// Uhlmann connection coefficient `𝒜` of `dλ` at one point of a loop.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionSample {
    pub a_matrix: CMatrix,
    pub lambda: f64,
}

impl ConnectionSample {
    /// `‖𝒜‡ + 𝒜‖_F`.
    pub fn anti_self_adjoint_residual(&self, m: &MetricOperator) -> Result<f64> {
        Ok(frobenius(
            &(eta_adjoint(&self.a_matrix, m)? + &self.a_matrix),
        ))
    }
}

/// Solves `ρ𝒜 + 𝒜ρ = −[d√ρ, √ρ]` in a (bi)orthogonal eigenbasis of `ρ`.
///
/// `right` holds `|Ψₙ⟩` as columns and `left` holds `⟨Φₙ|` as rows. In this
/// basis `√ρ` is diagonal with entries `sₙ = √pₙ`, so the right-hand side has
/// elements `(sᵢ − sⱼ)⟨Φᵢ|d√ρ|Ψⱼ⟩` and its diagonal vanishes identically.
pub(crate) fn solve_connection(
    right: &CMatrix,
    left: &CMatrix,
    populations: &[f64],
    dsr: &CMatrix,
) -> Result<CMatrix> {
    let n = populations.len();
    let projected = left * dsr * right;
    let roots: Vec<f64> = populations.iter().map(|p| p.sqrt()).collect();
    let mut coeffs = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let sum = populations[i] + populations[j];
            if sum < NEAR_SINGULAR_TOL {
                return Err(QhError::NearSingular { sum });
            }
            coeffs[(i, j)] = projected[(i, j)] * ((roots[i] - roots[j]) / sum);
        }
    }
    Ok(right * coeffs * left)
}

/// Connection at a Gibbs state given `d√ρ` there.
pub fn connection_at(state: &GibbsState, dsr: &CMatrix, lambda: f64) -> Result<ConnectionSample> {
    crate::algebra::check_dim(dsr, state.dim())?;
    let sys = state.system();
    let a_matrix = solve_connection(sys.right(), sys.left(), state.populations(), dsr)?;
    Ok(ConnectionSample { a_matrix, lambda })
}

/// Right-hand side `−[d√ρ, √ρ]` of the Sylvester equation.
pub fn sylvester_rhs(state: &GibbsState, dsr: &CMatrix) -> CMatrix {
    -commutator(dsr, state.sqrt_rho())
}

/// Relative residual `‖ρ𝒜 + 𝒜ρ − rhs‖ / ‖rhs‖` (absolute when `rhs = 0`).
pub fn sylvester_residual(rho: &CMatrix, a: &CMatrix, rhs: &CMatrix) -> f64 {
    let lhs = rho * a + a * rho;
    let diff = frobenius(&(lhs - rhs));
    let scale = frobenius(rhs);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Connection from eigenvector derivatives,
/// `𝒜 = −Σ_{i≠j} (√pᵢ − √pⱼ)²/(pᵢ + pⱼ) |Ψᵢ⟩⟨Φᵢ|dΨⱼ⟩⟨Φⱼ|`.
///
/// `d_right` holds `d|Ψⱼ⟩/dλ` as columns, taken in a gauge that is smooth
/// around the sample point.
pub fn connection_from_eigenvector_derivatives(state: &GibbsState, d_right: &CMatrix) -> CMatrix {
    let sys = state.system();
    let p = state.populations();
    let n = p.len();
    let overlap = sys.left() * d_right;
    let mut coeffs = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let w = (p[i].sqrt() - p[j].sqrt()).powi(2) / (p[i] + p[j]);
                coeffs[(i, j)] = -overlap[(i, j)] * w;
            }
        }
    }
    sys.right() * coeffs * sys.left()
}

/// Fourth-order central difference of the right eigenvectors.
pub fn d_right_vectors(
    loop_: &ParameterLoop,
    beta: f64,
    lambda: f64,
    h_step: f64,
) -> Result<CMatrix> {
    let at = |x: f64| -> Result<CMatrix> { Ok(loop_.state_at(x, beta)?.system().right().clone()) };
    let narrow = (at(lambda + h_step)? - at(lambda - h_step)?) / c64(2.0 * h_step, 0.0);
    let wide = (at(lambda + 2.0 * h_step)? - at(lambda - 2.0 * h_step)?) / c64(4.0 * h_step, 0.0);
    Ok((narrow * c64(4.0, 0.0) - wide) / c64(3.0, 0.0))
}

/// Full connection sample at `lambda`.
pub fn connection_sample(
    loop_: &ParameterLoop,
    beta: f64,
    lambda: f64,
) -> Result<(GibbsState, ConnectionSample)> {
    let state = loop_.state_at(lambda, beta)?;
    let dsr = d_sqrt_rho(loop_, beta, lambda, loop_.fd_step())?;
    let sample = connection_at(&state, &dsr, lambda)?;
    Ok((state, sample))
}

/// Orientation of the transport equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Transport {
    /// `dU = −𝒜U`, from `𝒜 := −dU U‡`; this lift satisfies `W‡Ẇ = Ẇ‡W`.
    #[default]
    Horizontal,
    /// `dU = +𝒜U`. Agrees with `Horizontal` on loops with a constant metric
    /// and reproduces the published equatorial closed form of the PT model.
    Reversed,
}

impl Transport {
    fn sign(self) -> f64 {
        match self {
            Transport::Horizontal => -1.0,
            Transport::Reversed => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolonomyOptions {
    /// Convergence threshold on `|Δ𝒢| / max(1, |𝒢|)`.
    pub tolerance: f64,
    pub max_steps: usize,
    pub transport: Transport,
}

impl Default for HolonomyOptions {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_steps: DEFAULT_MAX_STEPS,
            transport: Transport::Horizontal,
        }
    }
}

/// Step propagator over `[λ, λ + Δλ]` sampled at the midpoint.
fn step_propagator(
    loop_: &ParameterLoop,
    beta: f64,
    midpoint: f64,
    dl: f64,
    transport: Transport,
) -> Result<CMatrix> {
    let (_, sample) = connection_sample(loop_, beta, midpoint)?;
    Ok(expm(&(sample.a_matrix * c64(transport.sign() * dl, 0.0))))
}

/// Midpoint-rule ordered product over the whole loop with `steps` steps.
pub fn ordered_product(
    loop_: &ParameterLoop,
    beta: f64,
    steps: usize,
    transport: Transport,
) -> Result<CMatrix> {
    let (h0, _) = loop_.sample(loop_.start())?;
    let mut u = identity(h0.nrows());
    let dl = loop_.span() / steps as f64;
    if dl == 0.0 {
        return Ok(u);
    }
    for k in 0..steps {
        let mid = loop_.start() + (k as f64 + 0.5) * dl;
        u = step_propagator(loop_, beta, mid, dl, transport)? * u;
    }
    Ok(u)
}

/// `U(λₖ)` at the grid points `λₖ = start + kΔλ`, `k = 0..=steps`.
pub fn transport_path(
    loop_: &ParameterLoop,
    beta: f64,
    steps: usize,
    transport: Transport,
) -> Result<Vec<CMatrix>> {
    let (h0, _) = loop_.sample(loop_.start())?;
    let mut u = identity(h0.nrows());
    let dl = loop_.span() / steps as f64;
    let mut path = Vec::with_capacity(steps + 1);
    path.push(u.clone());
    for k in 0..steps {
        if dl != 0.0 {
            let mid = loop_.start() + (k as f64 + 0.5) * dl;
            u = step_propagator(loop_, beta, mid, dl, transport)? * u;
        }
        path.push(u.clone());
    }
    Ok(path)
}

/// Outcome of a holonomy computation.
#[derive(Debug, Clone)]
pub struct HolonomyResult {
    pub u_final: CMatrix,
    /// `𝒢 = Tr_η(ρ(0)U(τ))`.
    pub amplitude: C64,
    /// `arg 𝒢 ∈ (−π, π]`, absent when `|𝒢| ≤ 1e-6`.
    pub phase: Option<f64>,
    /// Generating function at system size 1.
    pub gen_fn: f64,
    pub well_defined: bool,
    /// Steps of the finest ordered product used.
    pub steps_used: usize,
    pub rho_start: CMatrix,
    /// Metric at the end of the loop (equal to the one at the start).
    pub metric_end: MetricOperator,
}

impl HolonomyResult {
    fn new(
        u_final: CMatrix,
        amplitude: C64,
        steps_used: usize,
        rho_start: CMatrix,
        metric_end: MetricOperator,
    ) -> Self {
        let well_defined = amplitude.norm() > WELL_DEFINED_TOL;
        Self {
            phase: well_defined.then(|| phase_of(amplitude)),
            gen_fn: generating_function(amplitude, NonZeroUsize::MIN),
            well_defined,
            u_final,
            amplitude,
            steps_used,
            rho_start,
            metric_end,
        }
    }

    /// `‖U‡U − 𝕀‖_F` with the metric at `λ = τ`.
    pub fn eta_unitarity_drift(&self) -> f64 {
        eta_unitarity_drift(&self.u_final, &self.metric_end)
    }
}

pub fn eta_unitarity_drift(u: &CMatrix, m: &MetricOperator) -> f64 {
    match eta_adjoint(u, m) {
        Ok(adj) => frobenius(&(adj * u - identity(u.nrows()))),
        Err(_) => f64::INFINITY,
    }
}

/// Holonomy with default options.
pub fn holonomy(loop_: &ParameterLoop, beta: f64) -> Result<HolonomyResult> {
    holonomy_with(loop_, beta, &HolonomyOptions::default())
}

/// Holonomy by step doubling from `loop_.steps()` with a Romberg table over
/// the midpoint products (their error expansion holds only even powers of
/// `Δλ`). Stops once successive extrapolated amplitudes agree within
/// `tolerance·max(1, |𝒢|)`.
pub fn holonomy_with(
    loop_: &ParameterLoop,
    beta: f64,
    opts: &HolonomyOptions,
) -> Result<HolonomyResult> {
    let start_state = loop_.state_at(loop_.start(), beta)?;
    let (_, metric_end) = loop_.sample(loop_.finish())?;
    let rho0 = start_state.rho().clone();
    let amplitude_of = |u: &CMatrix| eta_trace(&(&rho0 * u), start_state.metric());

    if loop_.span() == 0.0 {
        let u = identity(start_state.dim());
        let g = amplitude_of(&u)?;
        return Ok(HolonomyResult::new(u, g, 0, rho0.clone(), metric_end));
    }

    let mut steps = loop_.steps();
    let mut previous_row: Vec<CMatrix> = Vec::new();
    let mut previous_g: Option<C64> = None;
    let mut last_delta = f64::INFINITY;
    loop {
        if steps > opts.max_steps {
            return Err(QhError::Convergence {
                steps: steps / 2,
                delta: last_delta,
            });
        }
        let product = ordered_product(loop_, beta, steps, opts.transport)?;
        let mut row = vec![product];
        for (m, prev) in previous_row.iter().enumerate() {
            let factor = 4f64.powi(m as i32 + 1) - 1.0;
            let current = &row[m];
            let next = current + (current - prev) / c64(factor, 0.0);
            row.push(next);
        }
        let best = row.last().expect("row is never empty");
        let g = amplitude_of(best)?;
        if let Some(pg) = previous_g {
            last_delta = (g - pg).norm();
            if last_delta < opts.tolerance * g.norm().max(1.0) {
                return Ok(HolonomyResult::new(
                    best.clone(),
                    g,
                    steps,
                    rho0.clone(),
                    metric_end,
                ));
            }
        }
        previous_g = Some(g);
        previous_row = row;
        steps *= 2;
    }
}

/// `arg 𝒢 ∈ (−π, π]`; amplitudes real to 1e-8 map to exactly 0 or π.
pub fn phase_of(amplitude: C64) -> f64 {
    if amplitude.im.abs() <= 1e-8 * amplitude.norm().max(1.0) {
        return if amplitude.re >= 0.0 {
            0.0
        } else {
            std::f64::consts::PI
        };
    }
    let arg = amplitude.arg();
    if arg <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        arg
    }
}

/// `θ_U = arg 𝒢`, or [`QhError::IllDefinedPhase`] at a critical point.
pub fn uhlmann_phase(result: &HolonomyResult) -> Result<f64> {
    result.phase.ok_or(QhError::IllDefinedPhase {
        modulus: result.amplitude.norm(),
    })
}

/// `g = −ln|𝒢|² / L`; `+∞` when `𝒢 = 0`.
pub fn generating_function(amplitude: C64, system_size: NonZeroUsize) -> f64 {
    let modulus_sq = amplitude.norm_sqr();
    if modulus_sq == 0.0 {
        return f64::INFINITY;
    }
    -modulus_sq.ln() / system_size.get() as f64
}

/// `arccos(Re 𝒢)` with `Re 𝒢` clamped to `[−1, 1]`.
pub fn geometric_factor(amplitude: C64) -> Result<f64> {
    if amplitude.im.abs() > 1e-6 {
        return Err(QhError::NotRealAmplitude { imag: amplitude.im });
    }
    Ok(amplitude.re.clamp(-1.0, 1.0).acos())
}

/// Temperatures in `[t_min, t_max]` where `Re 𝒢(T)` changes sign.
///
/// Scans `grid` equally spaced temperatures and bisects each bracket down to
/// a width below 1e-6. Returns the roots in ascending order.
pub fn find_transitions(
    amplitude_re: impl Fn(f64) -> Result<f64>,
    t_min: f64,
    t_max: f64,
    grid: usize,
) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
        return Err(QhError::Param(format!(
            "temperature range must satisfy 0 < T_min < T_max, got [{t_min}, {t_max}]"
        )));
    }
    if grid < 16 {
        return Err(QhError::Param(format!(
            "transition scans need at least 16 grid points, got {grid}"
        )));
    }
    let temps: Vec<f64> = (0..grid)
        .map(|i| t_min + (t_max - t_min) * i as f64 / (grid - 1) as f64)
        .collect();
    let values = temps
        .iter()
        .map(|&t| amplitude_re(t))
        .collect::<Result<Vec<_>>>()?;

    let mut roots = Vec::new();
    for i in 0..grid - 1 {
        let (mut lo, mut hi) = (temps[i], temps[i + 1]);
        let (mut f_lo, f_hi) = (values[i], values[i + 1]);
        if f_lo == 0.0 {
            roots.push(lo);
            continue;
        }
        if f_lo * f_hi >= 0.0 {
            continue;
        }
        while hi - lo >= 1e-6 {
            let mid = 0.5 * (lo + hi);
            let f_mid = amplitude_re(mid)?;
            if f_mid == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if f_mid * f_lo < 0.0 {
                hi = mid;
            } else {
                lo = mid;
                f_lo = f_mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    if values[grid - 1] == 0.0 {
        roots.push(temps[grid - 1]);
    }
    Ok(roots)
}

/// `max_k ‖W‡Ẇ − Ẇ‡W‖_F` along the lift `W(λₖ) = √ρ(λₖ)U(λₖ)`, with `Ẇ` by
/// central differences on the integration grid and `‡` taken at `λₖ`.
pub fn parallel_transport_residual(
    loop_: &ParameterLoop,
    beta: f64,
    steps: usize,
    transport: Transport,
) -> Result<f64> {
    let path = transport_path(loop_, beta, steps, transport)?;
    let dl = loop_.span() / steps as f64;
    if dl == 0.0 {
        return Ok(0.0);
    }
    let lifts = path
        .iter()
        .enumerate()
        .map(|(k, u)| {
            let state = loop_.state_at(loop_.start() + k as f64 * dl, beta)?;
            Ok((state.sqrt_rho() * u, state.metric().clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst: f64 = 0.0;
    for k in 1..steps {
        let (w, metric) = &lifts[k];
        let w_dot = (&lifts[k + 1].0 - &lifts[k - 1].0) / c64(2.0 * dl, 0.0);
        let lhs = eta_adjoint(w, metric)? * &w_dot;
        let rhs = eta_adjoint(&w_dot, metric)? * w;
        worst = worst.max(frobenius(&(lhs - rhs)));
    }
    Ok(worst)
}
