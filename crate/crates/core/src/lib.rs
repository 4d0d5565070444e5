//! Uhlmann connections, holonomies and mixed-state geometric phases for
//! quasi-Hermitian two- and few-level systems.

pub mod algebra;
pub mod cli;
pub mod equivalence;
pub mod error;
pub mod models;
pub mod thermal;
pub mod uhlmann;

pub use algebra::{
    biorthogonal_decompose, eta_adjoint, eta_trace, matrix_function, metric_sqrt,
    quasi_hermiticity_residual, BiorthogonalSystem, CMatrix, MetricOperator, C64,
};
pub use error::{QhError, Result};
pub use thermal::{gibbs_state, purity_weight, GibbsState};
pub use uhlmann::{
    connection_at, d_sqrt_rho, find_transitions, generating_function, geometric_factor, holonomy,
    holonomy_with, parallel_transport_residual, uhlmann_phase, ConnectionSample, HolonomyOptions,
    HolonomyResult, ParameterLoop, Transport,
};
