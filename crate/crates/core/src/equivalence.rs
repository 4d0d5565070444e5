//! Hermitian representation of a quasi-Hermitian loop, purified states and
//! the interferometric readout of the Uhlmann amplitude.
//!
//! With `S = η₊^{1/2}` the map `A ↦ SAS⁻¹` sends quasi-Hermitian operators to
//! Hermitian ones. Along a loop with a varying metric the two Uhlmann
//! connections differ by the term `A_S` built from `K = dS·S⁻¹`:
//!
//! ```text
//! A^h = S𝒜S⁻¹ − A_S,   A_S = Σₘₙ (√pₘ − √pₙ)²/(pₘ + pₙ) |m⟩⟨m|K|n⟩⟨n|
//! ```

use crate::algebra::{
    c64, check_dim, eta_adjoint, eta_trace, frobenius, hermitian_eigh, CMatrix, CVector,
    MetricOperator, C64,
};
use crate::error::{QhError, Result};
use crate::thermal::GibbsState;
use crate::uhlmann::{connection_sample, eta_unitarity_drift, solve_connection, ParameterLoop};

/// Gauges with `‖U‡U − 𝕀‖_F` above this are rejected by [`purify`].
pub const GAUGE_TOL: f64 = 1e-8;

/// `S = η₊^{1/2}`.
pub fn similarity_map(m: &MetricOperator) -> CMatrix {
    m.sqrt().clone()
}

/// `h = SHS⁻¹`.
pub fn to_hermitian(h: &CMatrix, m: &MetricOperator) -> Result<CMatrix> {
    check_dim(h, m.dim())?;
    Ok(m.sqrt() * h * m.inv_sqrt())
}

/// Loop of Hermitian images `λ ↦ (S(λ)H(λ)S⁻¹(λ), 𝕀)`.
pub fn hermitian_loop(loop_: &ParameterLoop) -> Result<ParameterLoop> {
    let inner = loop_.clone();
    let family = move |lambda: f64| -> Result<(CMatrix, MetricOperator)> {
        let (h, m) = inner.sample(lambda)?;
        let image = to_hermitian(&h, &m)?;
        let herm = (&image + image.adjoint()) * c64(0.5, 0.0);
        Ok((herm, MetricOperator::identity(m.dim())))
    };
    ParameterLoop::new(
        family,
        loop_.start(),
        loop_.end(),
        loop_.steps(),
        loop_.winding(),
    )
}

/// Ascending populations and orthonormal eigenvectors of a Hermitian `ρ_h`.
fn hermitian_spectrum(rho_h: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = rho_h.nrows();
    check_dim(rho_h, n)?;
    let residual = frobenius(&(rho_h - rho_h.adjoint()));
    if residual > 1e-10 * frobenius(rho_h).max(1.0) {
        return Err(QhError::NotHermitian { residual });
    }
    let (values, vectors) = hermitian_eigh(rho_h);
    if let Some(&min) = values.first() {
        if min < 0.0 {
            return Err(QhError::NotPositiveDefinite {
                min_eigenvalue: min,
            });
        }
    }
    Ok((values, vectors))
}

/// Standard Uhlmann connection of a Hermitian state, the `η = 𝕀` case of
/// [`crate::uhlmann::connection_at`].
pub fn hermitian_connection(rho_h: &CMatrix, dsr_h: &CMatrix) -> Result<CMatrix> {
    let (p, v) = hermitian_spectrum(rho_h)?;
    check_dim(dsr_h, p.len())?;
    solve_connection(&v, &v.adjoint(), &p, dsr_h)
}

/// `A_S` for a Hermitian state `ρ_h` and `K = dS·S⁻¹`.
pub fn correction_term(rho_h: &CMatrix, k: &CMatrix) -> Result<CMatrix> {
    let (p, v) = hermitian_spectrum(rho_h)?;
    check_dim(k, p.len())?;
    let projected = v.adjoint() * k * &v;
    let n = p.len();
    let mut coeffs = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let w = (p[i].sqrt() - p[j].sqrt()).powi(2) / (p[i] + p[j]);
                coeffs[(i, j)] = projected[(i, j)] * w;
            }
        }
    }
    Ok(&v * coeffs * v.adjoint())
}

/// `K = dS/dλ · S⁻¹` by fourth-order central differences.
pub fn metric_log_derivative(loop_: &ParameterLoop, lambda: f64, h_step: f64) -> Result<CMatrix> {
    let s = |x: f64| -> Result<CMatrix> { Ok(loop_.sample(x)?.1.sqrt().clone()) };
    let narrow = (s(lambda + h_step)? - s(lambda - h_step)?) / c64(2.0 * h_step, 0.0);
    let wide = (s(lambda + 2.0 * h_step)? - s(lambda - 2.0 * h_step)?) / c64(4.0 * h_step, 0.0);
    let ds = (narrow * c64(4.0, 0.0) - wide) / c64(3.0, 0.0);
    let (_, m) = loop_.sample(lambda)?;
    Ok(ds * m.inv_sqrt())
}

/// The three connections entering the similarity identity at one point.
#[derive(Debug, Clone)]
pub struct ConnectionIdentity {
    /// Connection of the Hermitian image loop.
    pub hermitian: CMatrix,
    /// `S𝒜S⁻¹` with `𝒜` the quasi-Hermitian connection.
    pub mapped: CMatrix,
    /// `A_S`.
    pub correction: CMatrix,
    /// `‖𝒜‖_F`.
    pub scale: f64,
}

impl ConnectionIdentity {
    /// `‖A^h − (S𝒜S⁻¹ − A_S)‖_F`.
    pub fn residual(&self) -> f64 {
        frobenius(&(&self.hermitian - (&self.mapped - &self.correction)))
    }
}

/// Evaluates both sides of `A^h = S𝒜S⁻¹ − A_S` at `lambda`.
pub fn connection_identity(
    loop_: &ParameterLoop,
    beta: f64,
    lambda: f64,
) -> Result<ConnectionIdentity> {
    let (state, sample) = connection_sample(loop_, beta, lambda)?;
    let m = state.metric();
    let herm_loop = hermitian_loop(loop_)?;
    let (herm_state, herm_sample) = connection_sample(&herm_loop, beta, lambda)?;
    let k = metric_log_derivative(loop_, lambda, loop_.fd_step())?;
    let correction = correction_term(herm_state.rho(), &k)?;
    Ok(ConnectionIdentity {
        hermitian: herm_sample.a_matrix,
        mapped: m.sqrt() * &sample.a_matrix * m.inv_sqrt(),
        correction,
        scale: frobenius(&sample.a_matrix),
    })
}

/// Purification `W = √ρ·𝒰` of a Gibbs state together with its row-major
/// vectorization `|W⟩ = Σₙ√pₙ|Ψₙ⟩ ⊗ (⟨Φₙ|𝒰)ᵀ`.
///
/// The ancilla factor is a bra turned into a column, so the overlap carries
/// the metric `η₊ ⊗ (η₊⁻¹)ᵀ`.
#[derive(Debug, Clone)]
pub struct PurifiedState {
    vector: CVector,
    state: GibbsState,
    gauge: CMatrix,
}

impl PurifiedState {
    pub fn vector(&self) -> &CVector {
        &self.vector
    }

    pub fn state(&self) -> &GibbsState {
        &self.state
    }

    pub fn gauge(&self) -> &CMatrix {
        &self.gauge
    }

    /// `W = √ρ·𝒰`.
    pub fn amplitude(&self) -> CMatrix {
        self.state.sqrt_rho() * &self.gauge
    }

    /// `⟨W|W⟩` under the product metric; equals `Tr_η ρ = 1`.
    pub fn norm_sqr(&self) -> C64 {
        weighted_overlap(self.state.metric(), &self.vector, &self.vector)
    }
}

/// Builds `|W⟩` for an η-unitary gauge.
pub fn purify(state: &GibbsState, gauge: &CMatrix) -> Result<PurifiedState> {
    check_dim(gauge, state.dim())?;
    let residual = eta_unitarity_drift(gauge, state.metric());
    if residual.is_nan() || residual > GAUGE_TOL {
        return Err(QhError::Gauge { residual });
    }
    let w = state.sqrt_rho() * gauge;
    let n = state.dim();
    let vector = CVector::from_fn(n * n, |k, _| w[(k / n, k % n)]);
    Ok(PurifiedState {
        vector,
        state: state.clone(),
        gauge: gauge.clone(),
    })
}

fn product_metric(m: &MetricOperator) -> CMatrix {
    m.eta().kronecker(&m.inv().transpose())
}

fn weighted_overlap(m: &MetricOperator, v1: &CVector, v2: &CVector) -> C64 {
    (v1.adjoint() * product_metric(m) * v2)[(0, 0)]
}

fn check_same_metric(w1: &PurifiedState, w2: &PurifiedState) -> Result<()> {
    if w1.state.dim() != w2.state.dim() {
        return Err(QhError::Dimension {
            expected: w1.state.dim(),
            found: w2.state.dim(),
        });
    }
    let difference = w1.state.metric().distance(w2.state.metric());
    if difference > 1e-12 {
        return Err(QhError::MetricMismatch { difference });
    }
    Ok(())
}

/// `⟨W₁|W₂⟩_{η₊⊗η₊⁻¹}` on the vectorized states.
pub fn purified_overlap(w1: &PurifiedState, w2: &PurifiedState) -> Result<C64> {
    check_same_metric(w1, w2)?;
    Ok(weighted_overlap(w1.state.metric(), &w1.vector, &w2.vector))
}

/// `Tr_η(W₁‡W₂)` on the operators.
pub fn operator_overlap(w1: &PurifiedState, w2: &PurifiedState) -> Result<C64> {
    check_same_metric(w1, w2)?;
    let m = w1.state.metric();
    eta_trace(&(eta_adjoint(&w1.amplitude(), m)? * w2.amplitude()), m)
}

/// `Tr_η(ρ𝒰₂𝒰₁‡)` for two purifications of the same state.
pub fn gauge_overlap(w1: &PurifiedState, w2: &PurifiedState) -> Result<C64> {
    check_same_metric(w1, w2)?;
    let m = w1.state.metric();
    eta_trace(
        &(w1.state.rho() * &w2.gauge * eta_adjoint(&w1.gauge, m)?),
        m,
    )
}

/// Ideal control-qubit expectations `(⟨σₓ⟩, ⟨σ_y⟩)` for the superposition
/// `(|0⟩|W₀⟩ + |1⟩|W_τ⟩)/√2`, with the purification register contracted in
/// the product metric.
///
/// The reduced control state is `ρ_c = ½[[⟨W₀|W₀⟩, ⟨W_τ|W₀⟩], [⟨W₀|W_τ⟩, ⟨W_τ|W_τ⟩]]`,
/// so `⟨σₓ⟩ = Re 𝒢` and `⟨σ_y⟩ = Im 𝒢` with `𝒢 = ⟨W₀|W_τ⟩`.
pub fn interferometer_readout(w0: &PurifiedState, wt: &PurifiedState) -> Result<(f64, f64)> {
    let g01 = purified_overlap(w0, wt)?;
    let g00 = w0.norm_sqr();
    let g11 = wt.norm_sqr();
    let half = c64(0.5, 0.0);
    let rho_c = CMatrix::from_row_slice(
        2,
        2,
        &[g00 * half, g01.conj() * half, g01 * half, g11 * half],
    );
    let sigma_x = CMatrix::from_row_slice(
        2,
        2,
        &[c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)],
    );
    let sigma_y = CMatrix::from_row_slice(
        2,
        2,
        &[c64(0.0, 0.0), c64(0.0, -1.0), c64(0.0, 1.0), c64(0.0, 0.0)],
    );
    let x = (&rho_c * sigma_x).trace().re;
    let y = (&rho_c * sigma_y).trace().re;
    Ok((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{from_real_rows, identity};
    use crate::models::{pt_equator_loop, t_model_loop};
    use crate::thermal::gibbs_state;
    use crate::uhlmann::{d_sqrt_rho, holonomy};
    use std::f64::consts::PI;

    #[test]
    fn t_model_similarity_map() {
        let l = t_model_loop(2.0, 1, 16).unwrap();
        let (h, m) = l.sample(0.9).unwrap();
        let s = similarity_map(&m);
        assert!(frobenius(&(&s - from_real_rows(&[&[1.0, 0.0], &[0.0, 2.0]]))) < 1e-14);
        let herm = to_hermitian(&h, &m).unwrap();
        let expected = from_real_rows(&[
            &[0.9f64.cos(), 0.9f64.sin()],
            &[0.9f64.sin(), -0.9f64.cos()],
        ]);
        assert!(frobenius(&(herm - expected)) < 1e-14);
    }

    #[test]
    fn pt_hermitian_image() {
        let l = pt_equator_loop(5.0, 4.0, 1, 16).unwrap();
        for phi in [0.0, 1.0, 2.2, 4.0] {
            let (h, m) = l.sample(phi).unwrap();
            let herm = to_hermitian(&h, &m).unwrap();
            assert!(frobenius(&(&herm - herm.adjoint())) < 1e-10);
        }
    }

    #[test]
    fn correction_vanishes_for_constant_metric_and_flat_populations() {
        let l = t_model_loop(2.0, 1, 16).unwrap();
        let k = metric_log_derivative(&l, 0.4, l.fd_step()).unwrap();
        assert!(frobenius(&k) < 1e-12);
        let rho = from_real_rows(&[&[0.5, 0.0], &[0.0, 0.5]]);
        let k = from_real_rows(&[&[0.3, 1.0], &[-2.0, 0.1]]);
        assert!(frobenius(&correction_term(&rho, &k).unwrap()) < 1e-15);
    }

    #[test]
    fn hermitian_connection_at_unit_metric() {
        let l = t_model_loop(1.0, 1, 16).unwrap();
        let state = l.state_at(0.6, 1.4).unwrap();
        let dsr = d_sqrt_rho(&l, 1.4, 0.6, l.fd_step()).unwrap();
        let (_, sample) = connection_sample(&l, 1.4, 0.6).unwrap();
        let a = hermitian_connection(state.rho(), &dsr).unwrap();
        assert!(frobenius(&(&a - &sample.a_matrix)) < 1e-12);
        assert!(frobenius(&(&a + a.adjoint())) < 1e-12);
    }

    #[test]
    fn identity_holds_on_pt_equator() {
        let l = pt_equator_loop(5.0, 4.0, 1, 16).unwrap();
        for phi in [0.0, 0.9, 3.0] {
            let id = connection_identity(&l, 0.5, phi).unwrap();
            assert!(id.residual() <= 1e-6 * id.scale, "{}", id.residual());
            assert!(frobenius(&id.correction) > 1e-3);
        }
    }

    #[test]
    fn purification_norm_and_gauge_check() {
        let l = t_model_loop(2.0, 1, 16).unwrap();
        let state = l.state_at(0.3, 1.0).unwrap();
        let w = purify(&state, &identity(2)).unwrap();
        assert!((w.norm_sqr() - 1.0).norm() < 1e-12);
        assert!((purified_overlap(&w, &w).unwrap() - 1.0).norm() < 1e-12);
        assert!(interferometer_readout(&w, &w).unwrap().1.abs() < 1e-15);
        let bad = from_real_rows(&[&[2.0, 0.0], &[0.0, 1.0]]);
        assert!(matches!(purify(&state, &bad), Err(QhError::Gauge { .. })));
    }

    #[test]
    fn maximally_mixed_purification() {
        let h = from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]);
        let state = gibbs_state(&h, &MetricOperator::identity(2), 0.0).unwrap();
        let w = purify(&state, &identity(2)).unwrap();
        let r = 0.5f64.sqrt();
        let expected = [r, 0.0, 0.0, r];
        for (z, e) in w.vector().iter().zip(expected) {
            assert!((z - c64(e, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn metric_mismatch_is_rejected() {
        let l = t_model_loop(2.0, 1, 16).unwrap();
        let other = t_model_loop(3.0, 1, 16).unwrap();
        let w1 = purify(&l.state_at(0.0, 1.0).unwrap(), &identity(2)).unwrap();
        let w2 = purify(&other.state_at(0.0, 1.0).unwrap(), &identity(2)).unwrap();
        assert!(matches!(
            purified_overlap(&w1, &w2),
            Err(QhError::MetricMismatch { .. })
        ));
    }

    #[test]
    fn holonomy_endpoints_overlap() {
        let l = t_model_loop(2.0, 1, 64).unwrap();
        let beta = 1.0;
        let res = holonomy(&l, beta).unwrap();
        let state = l.state_at(0.0, beta).unwrap();
        let w0 = purify(&state, &identity(2)).unwrap();
        let wt = purify(&state, &res.u_final).unwrap();
        let g = (PI * (1.0 - 1.0 / beta.cosh())).cos();
        assert!((purified_overlap(&w0, &wt).unwrap() - g).norm() < 1e-6);
        assert!((operator_overlap(&w0, &wt).unwrap() - g).norm() < 1e-6);
        assert!((gauge_overlap(&w0, &wt).unwrap() - g).norm() < 1e-6);
        let (x, y) = interferometer_readout(&w0, &wt).unwrap();
        assert!((x - g).abs() < 1e-6 && y.abs() < 1e-6);
    }
}
