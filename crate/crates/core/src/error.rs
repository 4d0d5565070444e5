use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum QhError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("operator is not quasi-Hermitian for this metric (relative residual {residual:.3e})")]
    NotQuasiHermitian { residual: f64 },

    #[error("spectrum is degenerate within tolerance (relative gap {gap:.3e})")]
    DegenerateSpectrum { gap: f64 },

    #[error("metric is not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("metric is not Hermitian (relative residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("function undefined at eigenvalue {eigenvalue}")]
    Domain { eigenvalue: f64 },

    #[error(
        "finite-difference derivative jumps at lambda = {lambda} (consistency ratio {ratio:.3e})"
    )]
    GaugeJump { lambda: f64, ratio: f64 },

    #[error("Sylvester equation is near-singular: p_i + p_j = {sum:.3e}")]
    NearSingular { sum: f64 },

    #[error("holonomy did not converge: |dG| = {delta:.3e} after {steps} steps")]
    Convergence { steps: usize, delta: f64 },

    #[error("Uhlmann phase is ill-defined: |G| = {modulus:.3e}")]
    IllDefinedPhase { modulus: f64 },

    #[error("amplitude is not real: Im G = {imag:.3e}")]
    NotRealAmplitude { imag: f64 },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error(
        "PT symmetry is broken: a^2 = {a2}, b^2 = {b2} (quasi-Hermitian regime requires a^2 > b^2)"
    )]
    PtBroken { a2: f64, b2: f64 },

    #[error("invalid loop: {0}")]
    InvalidLoop(String),

    #[error("gauge is not eta-unitary (residual {residual:.3e})")]
    Gauge { residual: f64 },

    #[error("purified states carry different metrics (difference {difference:.3e})")]
    MetricMismatch { difference: f64 },
}

pub type Result<T> = std::result::Result<T, QhError>;
