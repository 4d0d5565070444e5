//! Closed-form two-level models used as oracles for the generic pipeline.
//!
//! * The t-model `H(θ) = [[cosθ, t·sinθ], [sinθ/t, −cosθ]]` with the constant
//!   metric `η₊ = diag(1, t²)` and spectrum `±1`.
//! * The PT-symmetric Bloch model `H = ε𝕀 + (a ê_r + ib cosδ ê_θ + ib sinδ ê_φ)·σ`
//!   with spectrum `ε ± √(a² − b²)`, restricted to the equator for loops.

use std::f64::consts::PI;

use crate::algebra::{
    c64, expm, from_real_rows, from_rows, identity, CMatrix, CVector, MetricOperator, C64,
};
use crate::error::{QhError, Result};
use crate::thermal::gibbs_state;
use crate::uhlmann::{phase_of, ParameterLoop, WELL_DEFINED_TOL};

/// Amplitudes below this modulus are flagged critical by the closed forms.
pub const CLOSED_FORM_CRITICAL_TOL: f64 = 1e-12;

fn pauli_x() -> CMatrix {
    from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
}

fn pauli_y() -> CMatrix {
    from_rows(&[
        &[c64(0.0, 0.0), c64(0.0, -1.0)],
        &[c64(0.0, 1.0), c64(0.0, 0.0)],
    ])
}

fn pauli_z() -> CMatrix {
    from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
}

fn bloch(v: [C64; 3]) -> CMatrix {
    pauli_x() * v[0] + pauli_y() * v[1] + pauli_z() * v[2]
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta >= 0.0 {
        Ok(())
    } else {
        Err(QhError::Param(format!(
            "inverse temperature must be finite and non-negative, got {beta}"
        )))
    }
}

fn check_omega(omega: u32) -> Result<()> {
    if omega >= 1 {
        Ok(())
    } else {
        Err(QhError::Param("winding number must be at least 1".into()))
    }
}

fn parity(omega: u32) -> f64 {
    if omega.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Closed-form amplitude with its phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormPhase {
    pub amplitude: f64,
    /// `0` or `π`; `None` when `|𝒢| < 1e-12`.
    pub phase: Option<f64>,
}

impl ClosedFormPhase {
    fn new(amplitude: f64) -> Self {
        let phase =
            (amplitude.abs() >= CLOSED_FORM_CRITICAL_TOL).then(|| phase_of(c64(amplitude, 0.0)));
        Self { amplitude, phase }
    }

    pub fn is_critical(&self) -> bool {
        self.phase.is_none()
    }
}

// ---------------------------------------------------------------------------
// t-model

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelTParams {
    pub t: f64,
    pub theta: f64,
    pub omega: u32,
    pub beta: f64,
}

impl TwoLevelTParams {
    pub fn new(t: f64, theta: f64, omega: u32, beta: f64) -> Result<Self> {
        let p = Self {
            t,
            theta,
            omega,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(QhError::Param(format!(
                "t must be positive and finite, got {}",
                self.t
            )));
        }
        if !self.theta.is_finite() {
            return Err(QhError::Param("theta must be finite".into()));
        }
        check_omega(self.omega)?;
        check_beta(self.beta)
    }
}

pub fn t_model_hamiltonian(p: &TwoLevelTParams) -> Result<CMatrix> {
    p.validate()?;
    let (s, c) = p.theta.sin_cos();
    Ok(from_real_rows(&[&[c, p.t * s], &[s / p.t, -c]]))
}

pub fn t_model_metric(p: &TwoLevelTParams) -> Result<MetricOperator> {
    p.validate()?;
    MetricOperator::new(from_real_rows(&[&[1.0, 0.0], &[0.0, p.t * p.t]]))
}

/// Right eigenvectors `(|ψ₋⟩, |ψ₊⟩)` for `E = ∓1`, η-normalized.
pub fn t_model_eigenvectors(p: &TwoLevelTParams) -> Result<(CVector, CVector)> {
    p.validate()?;
    let (s, c) = (0.5 * p.theta).sin_cos();
    let minus = CVector::from_vec(vec![c64(-s, 0.0), c64(c / p.t, 0.0)]);
    let plus = CVector::from_vec(vec![c64(c, 0.0), c64(s / p.t, 0.0)]);
    Ok((minus, plus))
}

/// `x = −(1 − sech β)`.
fn t_model_x(beta: f64) -> f64 {
    -(1.0 - 1.0 / beta.cosh())
}

/// `𝒜 = x·[[0, −t/2], [1/(2t), 0]]`, independent of `θ`.
pub fn t_model_connection(p: &TwoLevelTParams) -> Result<CMatrix> {
    p.validate()?;
    let x = t_model_x(p.beta);
    Ok(from_real_rows(&[
        &[0.0, -0.5 * p.t * x],
        &[0.5 * x / p.t, 0.0],
    ]))
}

/// `U(2πΩ) = exp(−2πΩ𝒜) = [[cos φ, −t sin φ], [sin φ/t, cos φ]]` with
/// `φ = πΩ(1 − sech β)`.
pub fn t_model_holonomy(p: &TwoLevelTParams) -> Result<CMatrix> {
    p.validate()?;
    let (s, c) = (PI * p.omega as f64 * (1.0 - 1.0 / p.beta.cosh())).sin_cos();
    Ok(from_real_rows(&[&[c, -p.t * s], &[s / p.t, c]]))
}

/// `𝒢 = cos(πΩ(1 − sech β))`.
pub fn t_model_phase(p: &TwoLevelTParams) -> Result<ClosedFormPhase> {
    p.validate()?;
    Ok(ClosedFormPhase::new(
        (PI * p.omega as f64 * (1.0 - 1.0 / p.beta.cosh())).cos(),
    ))
}

/// Critical temperatures from `sech β = 1 − (n + ½)/Ω`, `n = 0..Ω−1`,
/// sorted descending.
pub fn t_model_critical_temperatures(omega: u32) -> Result<Vec<f64>> {
    check_omega(omega)?;
    let om = omega as f64;
    let mut temps: Vec<f64> = (0..omega)
        .map(|n| {
            let sech = 1.0 - (n as f64 + 0.5) / om;
            1.0 / (1.0 / sech).acosh()
        })
        .collect();
    temps.sort_by(|a, b| b.total_cmp(a));
    Ok(temps)
}

/// Loop `θ ∈ [0, 2π]` wound `Ω` times at fixed `t`.
pub fn t_model_loop(t: f64, omega: u32, steps: usize) -> Result<ParameterLoop> {
    TwoLevelTParams::new(t, 0.0, omega, 0.0)?;
    let family = move |theta: f64| -> Result<(CMatrix, MetricOperator)> {
        let p = TwoLevelTParams {
            t,
            theta,
            omega: 1,
            beta: 0.0,
        };
        Ok((t_model_hamiltonian(&p)?, t_model_metric(&p)?))
    };
    ParameterLoop::new(family, 0.0, 2.0 * PI, steps, omega)
}

// ---------------------------------------------------------------------------
// PT-symmetric model

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PTParams {
    pub eps: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    pub phi: f64,
    pub delta: f64,
    pub omega: u32,
    pub beta: f64,
}

impl PTParams {
    /// Equatorial point `θ = π/2, δ = ε = 0`.
    pub fn equator(a: f64, b: f64, phi: f64, omega: u32, beta: f64) -> Result<Self> {
        let p = Self {
            eps: 0.0,
            a,
            b,
            theta: PI / 2.0,
            phi,
            delta: 0.0,
            omega,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.eps, self.a, self.b, self.theta, self.phi, self.delta];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(QhError::Param("model parameters must be finite".into()));
        }
        let (a2, b2) = (self.a * self.a, self.b * self.b);
        if a2 <= b2 {
            return Err(QhError::PtBroken { a2, b2 });
        }
        check_omega(self.omega)?;
        check_beta(self.beta)
    }

    /// `Δ = 2√(a² − b²)`.
    pub fn gap(&self) -> f64 {
        2.0 * (self.a * self.a - self.b * self.b).sqrt()
    }

    /// `κ = 1 − sech(βΔ/2)`.
    pub fn kappa(&self) -> f64 {
        1.0 - 1.0 / (0.5 * self.beta * self.gap()).cosh()
    }

    fn is_equatorial(&self) -> bool {
        (self.theta - PI / 2.0).abs() <= 1e-12
            && self.delta.abs() <= 1e-12
            && self.eps.abs() <= 1e-12
    }

    fn frame(&self) -> [[f64; 3]; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [
            [st * cp, st * sp, ct],
            [ct * cp, ct * sp, -st],
            [-sp, cp, 0.0],
        ]
    }
}

pub fn pt_gap(p: &PTParams) -> Result<f64> {
    p.validate()?;
    Ok(p.gap())
}

pub fn pt_hamiltonian(p: &PTParams) -> Result<CMatrix> {
    p.validate()?;
    let [er, et, ep] = p.frame();
    let (sd, cd) = p.delta.sin_cos();
    let v = [0, 1, 2].map(|k| c64(p.a * er[k], p.b * (cd * et[k] + sd * ep[k])));
    Ok(identity(2) * c64(p.eps, 0.0) + bloch(v))
}

/// `η₊ = |a|/√(a² − b²)·(𝕀 + β⃗·σ)` with `β⃗ = (b/a)(sinδ ê_θ − cosδ ê_φ)`.
pub fn pt_metric(p: &PTParams) -> Result<MetricOperator> {
    p.validate()?;
    let [_, et, ep] = p.frame();
    let (sd, cd) = p.delta.sin_cos();
    let ratio = p.b / p.a;
    let v = [0, 1, 2].map(|k| c64(ratio * (sd * et[k] - cd * ep[k]), 0.0));
    let norm = p.a.abs() / (p.a * p.a - p.b * p.b).sqrt();
    MetricOperator::new((identity(2) + bloch(v)) * c64(norm, 0.0))
}

/// Right eigenvectors `(|ψ₋⟩, |ψ₊⟩)` for `E = ε ∓ √(a² − b²)`, η-normalized.
pub fn pt_eigenstates(p: &PTParams) -> Result<(CVector, CVector)> {
    p.validate()?;
    let (st, ct) = p.theta.sin_cos();
    let (sd, cd) = p.delta.sin_cos();
    let s = (p.a * p.a - p.b * p.b).sqrt();
    let state = |sign: f64| {
        let upper = C64::from_polar(1.0, -p.phi) * c64(p.a * st + p.b * sd, p.b * cd * ct);
        let lower = c64(-p.a * ct + sign * s, p.b * cd * st);
        let n2 = 2.0 * p.a.abs() * s * (1.0 + p.b / p.a * sd * st - sign * s / p.a * ct);
        let n = n2.sqrt();
        CVector::from_vec(vec![upper / n, lower / n])
    };
    Ok((state(-1.0), state(1.0)))
}

/// Which published coefficient pair multiplies `κ` in the equatorial connection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoefficientSet {
    /// `2a²/Δ²` and `2ab/Δ²`.
    #[default]
    Full,
    /// `a²/(2Δ²)` and `ab/(2Δ²)`.
    Quartered,
}

impl CoefficientSet {
    fn coefficients(self, a: f64, b: f64, gap: f64) -> (f64, f64) {
        let d2 = gap * gap;
        match self {
            CoefficientSet::Full => (2.0 * a * a / d2, 2.0 * a * b / d2),
            CoefficientSet::Quartered => (a * a / (2.0 * d2), a * b / (2.0 * d2)),
        }
    }
}

fn require_equator(p: &PTParams) -> Result<()> {
    p.validate()?;
    if p.is_equatorial() {
        Ok(())
    } else {
        Err(QhError::Param(
            "closed forms are only available on the equator (theta = pi/2, delta = 0, eps = 0)"
                .into(),
        ))
    }
}

/// `𝒜 = κ[c₁ iσ_z − c₂ e^{−iφσ_z/2} σₓ e^{iφσ_z/2}]` at `φ = p.phi`.
pub fn pt_equator_connection(p: &PTParams, set: CoefficientSet) -> Result<CMatrix> {
    require_equator(p)?;
    let kappa = p.kappa();
    let (c1, c2) = set.coefficients(p.a, p.b, p.gap());
    // e^{−iφσ_z/2} σₓ e^{iφσ_z/2} = cos φ σₓ + sin φ σ_y
    let (s, c) = p.phi.sin_cos();
    let rotated = pauli_x() * c64(c, 0.0) + pauli_y() * c64(s, 0.0);
    Ok((pauli_z() * c64(0.0, c1) - rotated * c64(c2, 0.0)) * c64(kappa, 0.0))
}

/// Generator data of the equatorial holonomy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquatorGenerator {
    /// `α = c₁κ + ½`, coefficient of `iσ_z`.
    pub alpha: f64,
    /// `c₂κ`, coefficient of `−σₓ`.
    pub beta_x: f64,
    /// `γ² = α² − (c₂κ)²`.
    pub gamma_sq: f64,
}

impl EquatorGenerator {
    fn new(p: &PTParams) -> Self {
        let kappa = p.kappa();
        let (c1, c2) = CoefficientSet::Full.coefficients(p.a, p.b, p.gap());
        let alpha = c1 * kappa + 0.5;
        let beta_x = c2 * kappa;
        Self {
            alpha,
            beta_x,
            gamma_sq: alpha * alpha - beta_x * beta_x,
        }
    }

    /// `true` when `γ` is real; otherwise the closed forms use the hyperbolic
    /// continuation.
    pub fn is_oscillatory(&self) -> bool {
        self.gamma_sq > 0.0
    }

    /// `(cos Θ, sin Θ/γ)` with `Θ = 2πΩγ`, continued to `(cosh, sinh/|γ|)` for
    /// `γ² < 0`.
    fn trig(&self, omega: u32) -> (f64, f64) {
        let two_pi_omega = 2.0 * PI * omega as f64;
        if self.gamma_sq > 0.0 {
            let gamma = self.gamma_sq.sqrt();
            let theta = two_pi_omega * gamma;
            (theta.cos(), theta.sin() / gamma)
        } else if self.gamma_sq < 0.0 {
            let gamma = (-self.gamma_sq).sqrt();
            let theta = two_pi_omega * gamma;
            (theta.cosh(), theta.sinh() / gamma)
        } else {
            (1.0, two_pi_omega)
        }
    }
}

pub fn pt_equator_generator(p: &PTParams) -> Result<EquatorGenerator> {
    require_equator(p)?;
    Ok(EquatorGenerator::new(p))
}

/// `U(2πΩ) = (−1)^Ω exp(2πΩ[iασ_z − c₂κ σₓ])` in closed form, with the flag
/// [`EquatorGenerator::is_oscillatory`].
pub fn pt_equator_holonomy(p: &PTParams) -> Result<(CMatrix, bool)> {
    require_equator(p)?;
    let g = EquatorGenerator::new(p);
    let x = pauli_z() * c64(0.0, g.alpha) - pauli_x() * c64(g.beta_x, 0.0);
    // X² = −γ²𝕀
    let (c, s_over_gamma) = g.trig(p.omega);
    let u = (identity(2) * c64(c, 0.0) + x * c64(s_over_gamma, 0.0)) * c64(parity(p.omega), 0.0);
    Ok((u, g.is_oscillatory()))
}

/// Same holonomy through the generic matrix exponential, for cross-checks.
pub fn pt_equator_holonomy_expm(p: &PTParams) -> Result<CMatrix> {
    require_equator(p)?;
    let g = EquatorGenerator::new(p);
    let x = pauli_z() * c64(0.0, g.alpha) - pauli_x() * c64(g.beta_x, 0.0);
    Ok(expm(&(x * c64(2.0 * PI * p.omega as f64, 0.0))) * c64(parity(p.omega), 0.0))
}

/// `𝒢 = (−1)^Ω(cos Θ − (b/Δ)·tanh(βΔ/2)·sin Θ/γ)`.
pub fn pt_equator_phase(p: &PTParams) -> Result<ClosedFormPhase> {
    require_equator(p)?;
    let g = EquatorGenerator::new(p);
    let (c, s_over_gamma) = g.trig(p.omega);
    let gap = p.gap();
    let amplitude = parity(p.omega) * (c - p.b / gap * (0.5 * p.beta * gap).tanh() * s_over_gamma);
    Ok(ClosedFormPhase::new(amplitude))
}

/// Zero-temperature parameters `(γ₀, A, δ̂)` with `A = b/(Δγ₀)` and
/// `δ̂ = arctan A`.
pub fn pt_zero_t_parameters(p: &PTParams) -> Result<(f64, f64, f64)> {
    p.validate()?;
    let gap = p.gap();
    let (c1, c2) = CoefficientSet::Full.coefficients(p.a, p.b, gap);
    let gamma_sq = (c1 + 0.5).powi(2) - c2 * c2;
    if gamma_sq <= 0.0 {
        return Err(QhError::Param(format!(
            "zero-temperature generator is not oscillatory (gamma^2 = {gamma_sq:.3e})"
        )));
    }
    let gamma0 = gamma_sq.sqrt();
    let amp = p.b / (gap * gamma0);
    Ok((gamma0, amp, amp.atan()))
}

/// `𝒢(∞) = (−1)^Ω √(1 + A²) cos(2πΩγ₀ + δ̂)`.
pub fn pt_zero_t_amplitude(p: &PTParams) -> Result<f64> {
    let (gamma0, amp, shift) = pt_zero_t_parameters(p)?;
    let theta0 = 2.0 * PI * p.omega as f64 * gamma0;
    Ok(parity(p.omega) * (1.0 + amp * amp).sqrt() * (theta0 + shift).cos())
}

/// Equatorial loop `φ ∈ [0, 2π]` wound `Ω` times.
pub fn pt_equator_loop(a: f64, b: f64, omega: u32, steps: usize) -> Result<ParameterLoop> {
    PTParams::equator(a, b, 0.0, omega, 0.0)?;
    let family = move |phi: f64| -> Result<(CMatrix, MetricOperator)> {
        let p = PTParams::equator(a, b, phi, 1, 0.0)?;
        Ok((pt_hamiltonian(&p)?, pt_metric(&p)?))
    };
    ParameterLoop::new(family, 0.0, 2.0 * PI, steps, omega)
}

/// Closed-form `Tr_η(ρ(0)U)` for an arbitrary `U` on the PT equator.
pub fn pt_equator_trace(p: &PTParams, u: &CMatrix) -> Result<C64> {
    require_equator(p)?;
    let at_origin = PTParams { phi: 0.0, ..*p };
    let state = gibbs_state(
        &pt_hamiltonian(&at_origin)?,
        &pt_metric(&at_origin)?,
        p.beta,
    )?;
    Ok((state.rho() * u).trace())
}

/// Families usable by the CLI and tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelSpec {
    TwoLevelT { t: f64 },
    PtEquator { a: f64, b: f64 },
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelSpec::TwoLevelT { t } => TwoLevelTParams::new(t, 0.0, 1, 0.0).map(|_| ()),
            ModelSpec::PtEquator { a, b } => PTParams::equator(a, b, 0.0, 1, 0.0).map(|_| ()),
        }
    }

    /// Gap `Δ` between the two levels.
    pub fn gap(&self) -> f64 {
        match *self {
            ModelSpec::TwoLevelT { .. } => 2.0,
            ModelSpec::PtEquator { a, b } => 2.0 * (a * a - b * b).sqrt(),
        }
    }

    pub fn parameter_loop(&self, omega: u32, steps: usize) -> Result<ParameterLoop> {
        match *self {
            ModelSpec::TwoLevelT { t } => t_model_loop(t, omega, steps),
            ModelSpec::PtEquator { a, b } => pt_equator_loop(a, b, omega, steps),
        }
    }

    /// Closed-form amplitude of the model.
    pub fn closed_form(&self, omega: u32, beta: f64) -> Result<ClosedFormPhase> {
        match *self {
            ModelSpec::TwoLevelT { t } => {
                t_model_phase(&TwoLevelTParams::new(t, 0.0, omega, beta)?)
            }
            ModelSpec::PtEquator { a, b } => {
                pt_equator_phase(&PTParams::equator(a, b, 0.0, omega, beta)?)
            }
        }
    }
}

/// Whether a closed-form modulus counts as a well-defined phase under the
/// pipeline threshold.
pub fn closed_form_well_defined(phase: &ClosedFormPhase) -> bool {
    phase.amplitude.abs() > WELL_DEFINED_TOL
}
