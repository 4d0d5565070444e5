//! Quasi-Hermitian Gibbs states `ρ = e^{−βH}/Z` in biorthogonal form.

use crate::algebra::{
    biorthogonal_decompose, eta_adjoint, eta_trace, frobenius, BiorthogonalSystem, CMatrix,
    MetricOperator,
};
use crate::error::{QhError, Result};

/// Thermal state of a quasi-Hermitian Hamiltonian.
///
/// Populations follow the ascending energy order of the underlying
/// [`BiorthogonalSystem`], so the ground state carries the largest weight.
/// At extreme `β·gap` the excited populations may underflow to zero.
#[derive(Debug, Clone)]
pub struct GibbsState {
    beta: f64,
    populations: Vec<f64>,
    rho: CMatrix,
    sqrt_rho: CMatrix,
    system: BiorthogonalSystem,
    metric: MetricOperator,
    ln_partition: f64,
}

/// Builds `e^{−βH}/Z` for a quasi-Hermitian `h`.
pub fn gibbs_state(h: &CMatrix, m: &MetricOperator, beta: f64) -> Result<GibbsState> {
    let system = biorthogonal_decompose(h, m)?;
    GibbsState::from_system(system, m.clone(), beta)
}

impl GibbsState {
    /// Thermal state on an already decomposed spectrum.
    pub fn from_system(
        system: BiorthogonalSystem,
        metric: MetricOperator,
        beta: f64,
    ) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(QhError::Param(format!(
                "inverse temperature must be finite and non-negative, got {beta}"
            )));
        }
        if metric.dim() != system.dim() {
            return Err(QhError::Dimension {
                expected: system.dim(),
                found: metric.dim(),
            });
        }
        let e_min = system
            .energies()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = system
            .energies()
            .iter()
            .map(|&e| (-beta * (e - e_min)).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        let populations: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let roots: Vec<f64> = populations.iter().map(|p| p.sqrt()).collect();
        Ok(Self {
            beta,
            rho: system.with_weights(&populations),
            sqrt_rho: system.with_weights(&roots),
            ln_partition: -beta * e_min + total.ln(),
            populations,
            system,
            metric,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.populations.len()
    }

    pub fn populations(&self) -> &[f64] {
        &self.populations
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn sqrt_rho(&self) -> &CMatrix {
        &self.sqrt_rho
    }

    pub fn system(&self) -> &BiorthogonalSystem {
        &self.system
    }

    pub fn metric(&self) -> &MetricOperator {
        &self.metric
    }

    /// `Z = Σₙ e^{−βEₙ}`; overflows to infinity for large `β·|E_min|`.
    pub fn partition(&self) -> f64 {
        self.ln_partition.exp()
    }

    pub fn ln_partition(&self) -> f64 {
        self.ln_partition
    }

    /// Residuals of the defining properties of a Gibbs state.
    pub fn residuals(&self) -> GibbsResiduals {
        let population_sum = (self.populations.iter().sum::<f64>() - 1.0).abs();
        let self_adjoint = eta_adjoint(&self.rho, &self.metric)
            .map(|adj| frobenius(&(adj - &self.rho)))
            .unwrap_or(f64::INFINITY);
        let trace = eta_trace(&self.rho, &self.metric)
            .map(|z| (z - 1.0).norm())
            .unwrap_or(f64::INFINITY);
        let root = frobenius(&(&self.sqrt_rho * &self.sqrt_rho - &self.rho));
        GibbsResiduals {
            population_sum,
            self_adjoint,
            trace,
            root,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsResiduals {
    /// `|Σₙpₙ − 1|`
    pub population_sum: f64,
    /// `‖ρ‡ − ρ‖_F`
    pub self_adjoint: f64,
    /// `|Tr_η ρ − 1|`
    pub trace: f64,
    /// `‖√ρ√ρ − ρ‖_F`
    pub root: f64,
}

impl GibbsResiduals {
    pub fn within_tolerance(&self) -> bool {
        self.population_sum <= 1e-12
            && self.self_adjoint <= 1e-10
            && self.trace <= 1e-12
            && self.root <= 1e-10
    }
}

/// `κ = (√p₁ − √p₂)²` for a two-level state; equals `1 − sech(βΔ/2)`.
pub fn purity_weight(state: &GibbsState) -> Result<f64> {
    match state.populations() {
        [p1, p2] => Ok((p1.sqrt() - p2.sqrt()).powi(2)),
        other => Err(QhError::Dimension {
            expected: 2,
            found: other.len(),
        }),
    }
}
