//! Metric-equipped operator algebra.
//!
//! A quasi-Hermitian operator `H` is Hermitian with respect to the inner
//! product `(x, y) = x† η y` for a positive-definite metric `η`. Everything in
//! this module is expressed in the Dirac matrix representation and carries the
//! metric explicitly: the η-adjoint `A‡ = η⁻¹ A† η`, the physical trace, the
//! biorthogonal eigendecomposition and functions of operators built from it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{QhError, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative tolerance on `‖η − η†‖` accepted when building a metric.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Relative quasi-Hermiticity residual accepted by [`biorthogonal_decompose`].
pub const QUASI_HERMITIAN_TOL: f64 = 1e-8;
/// Relative spectral gap below which the spectrum counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;
/// Smallest admissible ratio `λ_min / λ_max` of a metric.
pub const POSITIVITY_TOL: f64 = 1e-12;

pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Builds a matrix from rows of complex entries.
pub fn from_rows(rows: &[&[C64]]) -> CMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(n, m, |i, j| rows[i][j])
}

/// Builds a matrix from rows of real entries.
pub fn from_real_rows(rows: &[&[f64]]) -> CMatrix {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    CMatrix::from_fn(n, m, |i, j| c64(rows[i][j], 0.0))
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn frobenius(a: &CMatrix) -> f64 {
    a.norm()
}

pub(crate) fn check_square(a: &CMatrix) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(QhError::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(QhError::NonFinite);
    }
    Ok(a.nrows())
}

pub(crate) fn check_dim(a: &CMatrix, n: usize) -> Result<()> {
    let found = check_square(a)?;
    if found != n {
        return Err(QhError::Dimension { expected: n, found });
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Only the Hermitian part of `m` is used. The 2×2 case is solved in closed
/// form, which dominates the cost of the two-level loops.
pub fn hermitian_eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 2 {
        return hermitian_eigh_2x2(m);
    }
    let herm = (m + m.adjoint()) * c64(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn hermitian_eigh_2x2(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let c = (m[(0, 1)] + m[(1, 0)].conj()) * 0.5;
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let r = half.hypot(c.norm());
    let (lo, hi) = (mean - r, mean + r);

    // Pick the better conditioned of the two row-derived null vectors.
    let (v_lo, v_hi) = if half >= 0.0 {
        ([c, c64(-half - r, 0.0)], [c64(half + r, 0.0), c.conj()])
    } else {
        ([c64(half - r, 0.0), c.conj()], [c, c64(r - half, 0.0)])
    };
    let normalize = |v: [C64; 2], fallback: usize| -> [C64; 2] {
        let norm = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        if norm <= f64::MIN_POSITIVE * 1e10 {
            let mut e = [C64::new(0.0, 0.0); 2];
            e[fallback] = C64::new(1.0, 0.0);
            e
        } else {
            [v[0] / norm, v[1] / norm]
        }
    };
    let (lo_fallback, hi_fallback) = if a <= d { (0, 1) } else { (1, 0) };
    let u = normalize(v_lo, lo_fallback);
    let w = normalize(v_hi, hi_fallback);
    let vectors = from_rows(&[&[u[0], w[0]], &[u[1], w[1]]]);
    (vec![lo, hi], vectors)
}

/// Matrix exponential. 2×2 matrices use the closed form of the Pauli algebra,
/// larger ones nalgebra's Padé scaling-and-squaring.
pub fn expm(m: &CMatrix) -> CMatrix {
    if m.nrows() != 2 {
        return m.clone().exp();
    }
    let mu = (m[(0, 0)] + m[(1, 1)]) * 0.5;
    let traceless = m - identity(2) * mu;
    // traceless² = δ·𝕀 with δ = -det(traceless)
    let delta = traceless[(0, 0)] * traceless[(0, 0)] + traceless[(0, 1)] * traceless[(1, 0)];
    let z = delta.sqrt();
    let (ch, sh_over_z) = if z.norm() < 1e-4 {
        let z2 = delta;
        (
            C64::new(1.0, 0.0) + z2 / 2.0 + z2 * z2 / 24.0,
            C64::new(1.0, 0.0) + z2 / 6.0 + z2 * z2 / 120.0,
        )
    } else {
        (z.cosh(), z.sinh() / z)
    };
    (identity(2) * ch + traceless * sh_over_z) * mu.exp()
}

/// Positive-definite Hermitian metric `η₊` with its principal square root and
/// inverses cached at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricOperator {
    eta: CMatrix,
    sqrt: CMatrix,
    inv: CMatrix,
    inv_sqrt: CMatrix,
}

impl MetricOperator {
    pub fn new(eta: CMatrix) -> Result<Self> {
        let n = check_square(&eta)?;
        let scale = frobenius(&eta).max(f64::MIN_POSITIVE);
        let residual = frobenius(&(&eta - eta.adjoint())) / scale;
        if residual > HERMITICITY_TOL {
            return Err(QhError::NotHermitian { residual });
        }
        let eta = (&eta + eta.adjoint()) * c64(0.5, 0.0);
        let (values, vectors) = hermitian_eigh(&eta);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        if n == 0 || min.is_nan() || min <= POSITIVITY_TOL * max || max <= 0.0 {
            return Err(QhError::NotPositiveDefinite {
                min_eigenvalue: min,
            });
        }
        let spectral = |f: &dyn Fn(f64) -> f64| {
            let d = CMatrix::from_diagonal(&DVector::from_iterator(
                n,
                values.iter().map(|&v| c64(f(v), 0.0)),
            ));
            &vectors * d * vectors.adjoint()
        };
        Ok(Self {
            sqrt: spectral(&f64::sqrt),
            inv: spectral(&|v| 1.0 / v),
            inv_sqrt: spectral(&|v| 1.0 / v.sqrt()),
            eta,
        })
    }

    /// The Dirac metric `η₊ = 𝕀`.
    pub fn identity(n: usize) -> Self {
        let id = identity(n);
        Self {
            eta: id.clone(),
            sqrt: id.clone(),
            inv: id.clone(),
            inv_sqrt: id,
        }
    }

    pub fn dim(&self) -> usize {
        self.eta.nrows()
    }

    pub fn eta(&self) -> &CMatrix {
        &self.eta
    }

    /// Principal Hermitian root `S`, with `S·S = S†S = η₊`.
    pub fn sqrt(&self) -> &CMatrix {
        &self.sqrt
    }

    pub fn inv(&self) -> &CMatrix {
        &self.inv
    }

    pub fn inv_sqrt(&self) -> &CMatrix {
        &self.inv_sqrt
    }

    /// Relative Frobenius distance between two metrics.
    pub fn distance(&self, other: &MetricOperator) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        frobenius(&(&self.eta - &other.eta)) / frobenius(&self.eta)
    }
}

/// Principal Hermitian square root of a positive-definite metric.
pub fn metric_sqrt(eta: &CMatrix) -> Result<CMatrix> {
    Ok(MetricOperator::new(eta.clone())?.sqrt)
}

/// `A‡ = η₊⁻¹ A† η₊`.
pub fn eta_adjoint(a: &CMatrix, m: &MetricOperator) -> Result<CMatrix> {
    check_dim(a, m.dim())?;
    Ok(m.inv() * a.adjoint() * m.eta())
}

/// Physical trace of `a` on the η₊-Hilbert space.
///
/// Summing `(eₙ, A eₙ)_η = ⟨eₙ|η₊A|eₙ⟩` over an η₊-orthonormal frame gives the
/// biorthogonal trace `Σₙ ⟨Φₙ|A|Ψₙ⟩`, which is the plain matrix trace. The
/// metric only fixes the dimension here.
pub fn eta_trace(a: &CMatrix, m: &MetricOperator) -> Result<C64> {
    check_dim(a, m.dim())?;
    Ok(a.trace())
}

/// Relative residual `‖η₊h − h†η₊‖_F / ‖η₊h‖_F`; zero for `h = 0`.
pub fn quasi_hermiticity_residual(h: &CMatrix, m: &MetricOperator) -> Result<f64> {
    check_dim(h, m.dim())?;
    let eta_h = m.eta() * h;
    let scale = frobenius(&eta_h);
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(frobenius(&(&eta_h - h.adjoint() * m.eta())) / scale)
}

/// Real spectrum with right eigenvectors `|Ψₙ⟩` (columns) and left
/// eigenvectors `⟨Φₙ|` (rows) normalized so that `⟨Φₘ|Ψₙ⟩ = δₘₙ`.
///
/// Energies are ascending. Left vectors are fixed by `⟨Φₙ| = (η₊|Ψₙ⟩)†` and
/// the first component of each `|Ψₙ⟩` above 1e-10 of its norm is real positive.
#[derive(Debug, Clone, PartialEq)]
pub struct BiorthogonalSystem {
    energies: Vec<f64>,
    right: CMatrix,
    left: CMatrix,
}

impl BiorthogonalSystem {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Right eigenvectors as columns.
    pub fn right(&self) -> &CMatrix {
        &self.right
    }

    /// Left eigenvectors as rows.
    pub fn left(&self) -> &CMatrix {
        &self.left
    }

    pub fn right_vector(&self, n: usize) -> CVector {
        self.right.column(n).into_owned()
    }

    /// `Σₙ f(Eₙ)|Ψₙ⟩⟨Φₙ|`.
    pub fn function(&self, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
        let values = self
            .energies
            .iter()
            .map(|&e| {
                let v = f(e);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(QhError::Domain { eigenvalue: e })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.with_weights(&values))
    }

    /// `Σₙ wₙ|Ψₙ⟩⟨Φₙ|` for precomputed weights.
    pub(crate) fn with_weights(&self, weights: &[f64]) -> CMatrix {
        let mut scaled = self.right.clone();
        for (mut col, &w) in scaled.column_iter_mut().zip(weights) {
            col *= c64(w, 0.0);
        }
        scaled * &self.left
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.with_weights(&self.energies)
    }

    /// `‖⟨Φₘ|Ψₙ⟩ − δₘₙ‖_F`.
    pub fn biorthogonality_residual(&self) -> f64 {
        frobenius(&(&self.left * &self.right - identity(self.dim())))
    }

    /// `‖Σₙ|Ψₙ⟩⟨Φₙ| − 𝕀‖_F`.
    pub fn completeness_residual(&self) -> f64 {
        frobenius(&(&self.right * &self.left - identity(self.dim())))
    }

    /// `‖⟨Ψₘ|η₊|Ψₙ⟩ − δₘₙ‖_F`.
    pub fn metric_orthonormality_residual(&self, m: &MetricOperator) -> f64 {
        frobenius(&(self.right.adjoint() * m.eta() * &self.right - identity(self.dim())))
    }

    /// Copy with each `|Ψₙ⟩` multiplied by `e^{iαₙ}` and `⟨Φₙ|` by `e^{-iαₙ}`.
    pub fn rephased(&self, phases: &[f64]) -> Self {
        let mut out = self.clone();
        for (n, &alpha) in phases.iter().enumerate().take(self.dim()) {
            let u = C64::from_polar(1.0, alpha);
            for r in 0..self.dim() {
                out.right[(r, n)] *= u;
                out.left[(n, r)] *= u.conj();
            }
        }
        out
    }
}

/// Biorthogonal eigendecomposition `h = Σₙ Eₙ|Ψₙ⟩⟨Φₙ|` of a quasi-Hermitian
/// operator.
///
/// The spectrum is obtained from the Hermitian image `S h S⁻¹` (with `S` the
/// principal root of `η₊`), so the energies are real by construction once the
/// quasi-Hermiticity residual is within [`QUASI_HERMITIAN_TOL`].
pub fn biorthogonal_decompose(h: &CMatrix, m: &MetricOperator) -> Result<BiorthogonalSystem> {
    let residual = quasi_hermiticity_residual(h, m)?;
    if residual > QUASI_HERMITIAN_TOL {
        return Err(QhError::NotQuasiHermitian { residual });
    }
    let n = m.dim();
    let hermitian_image = m.sqrt() * h * m.inv_sqrt();
    let (energies, frame) = hermitian_eigh(&hermitian_image);

    let scale = frobenius(h);
    if n > 1 {
        let gap = energies
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        if scale == 0.0 || gap <= DEGENERACY_TOL * scale {
            let rel = if scale == 0.0 { 0.0 } else { gap / scale };
            return Err(QhError::DegenerateSpectrum { gap: rel });
        }
    }

    let mut right = m.inv_sqrt() * &frame;
    for mut col in right.column_iter_mut() {
        let norm = col.norm();
        if let Some(lead) = col.iter().find(|z| z.norm() > 1e-10 * norm).copied() {
            let phase = lead.conj() / lead.norm();
            col *= phase;
        }
    }
    // ⟨Φₙ| = (η₊|Ψₙ⟩)†
    let left = (m.eta() * &right).adjoint();
    Ok(BiorthogonalSystem {
        energies,
        right,
        left,
    })
}

/// `Σₙ f(Eₙ)|Ψₙ⟩⟨Φₙ|`.
pub fn matrix_function(sys: &BiorthogonalSystem, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    sys.function(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t_model(theta: f64, t: f64) -> (CMatrix, MetricOperator) {
        let h = from_real_rows(&[
            &[theta.cos(), t * theta.sin()],
            &[theta.sin() / t, -theta.cos()],
        ]);
        let eta = MetricOperator::new(from_real_rows(&[&[1.0, 0.0], &[0.0, t * t]])).unwrap();
        (h, eta)
    }

    fn sigma_x() -> CMatrix {
        from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    #[test]
    fn adjoint_with_identity_metric_is_dagger() {
        let a = from_rows(&[
            &[c64(1.0, 2.0), c64(0.5, -1.0)],
            &[c64(3.0, 0.0), c64(0.0, 1.0)],
        ]);
        let adj = eta_adjoint(&a, &MetricOperator::identity(2)).unwrap();
        assert!(frobenius(&(adj - a.adjoint())) < 1e-15);
    }

    #[test]
    fn adjoint_of_sigma_x_with_diagonal_metric() {
        let m = MetricOperator::new(from_real_rows(&[&[1.0, 0.0], &[0.0, 4.0]])).unwrap();
        let adj = eta_adjoint(&sigma_x(), &m).unwrap();
        let expected = from_real_rows(&[&[0.0, 4.0], &[0.25, 0.0]]);
        assert!(frobenius(&(adj - expected)) < 1e-14);
    }

    #[test]
    fn t_model_hamiltonian_is_self_adjoint() {
        let (h, m) = t_model(0.9, 2.0);
        let adj = eta_adjoint(&h, &m).unwrap();
        assert!(frobenius(&(adj - &h)) < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let err = eta_adjoint(&identity(3), &MetricOperator::identity(2)).unwrap_err();
        assert_eq!(
            err,
            QhError::Dimension {
                expected: 2,
                found: 3
            }
        );
        assert!(eta_trace(&identity(3), &MetricOperator::identity(2)).is_err());
    }

    #[test]
    fn trace_of_gibbs_operator_is_partition_function() {
        let beta = 0.7;
        for t in [0.5, 1.0, 3.0] {
            let (h, m) = t_model(1.1, t);
            let sys = biorthogonal_decompose(&h, &m).unwrap();
            let boltzmann = matrix_function(&sys, |e| (-beta * e).exp()).unwrap();
            let z = eta_trace(&boltzmann, &m).unwrap();
            assert!((z.re - 2.0 * f64::cosh(beta)).abs() < 1e-12);
            assert!(z.im.abs() < 1e-12);
        }
    }

    #[test]
    fn trace_matches_sum_over_eta_orthonormal_frame() {
        let (h, m) = t_model(0.4, 2.5);
        let a = &h * &h
            + from_rows(&[
                &[c64(0.0, 1.0), c64(2.0, 0.0)],
                &[c64(0.3, 0.3), c64(1.0, 0.0)],
            ]);
        let frame = m.inv_sqrt();
        let mut sum = c64(0.0, 0.0);
        for n in 0..2 {
            let e = frame.column(n);
            sum += (e.adjoint() * m.eta() * &a * e)[(0, 0)];
        }
        assert!((eta_trace(&a, &m).unwrap() - sum).norm() < 1e-12);
    }

    #[test]
    fn residual_flags_non_quasi_hermitian_operator() {
        let nilpotent = from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let r = quasi_hermiticity_residual(&nilpotent, &MetricOperator::identity(2)).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
        let (h, m) = t_model(2.2, 1.7);
        assert!(quasi_hermiticity_residual(&h, &m).unwrap() < 1e-12);
        assert_eq!(
            quasi_hermiticity_residual(&sigma_x(), &MetricOperator::identity(2)).unwrap(),
            0.0
        );
    }

    #[test]
    fn decomposition_of_t_model_has_unit_energies() {
        for (theta, t) in [(0.0, 1.0), (1.3, 2.7), (4.0, 0.3)] {
            let (h, m) = t_model(theta, t);
            let sys = biorthogonal_decompose(&h, &m).unwrap();
            assert!((sys.energies()[0] + 1.0).abs() < 1e-12);
            assert!((sys.energies()[1] - 1.0).abs() < 1e-12);
            assert!(sys.biorthogonality_residual() < 1e-10);
            assert!(sys.completeness_residual() < 1e-10);
            assert!(sys.metric_orthonormality_residual(&m) < 1e-10);
            assert!(frobenius(&(sys.reconstruct() - &h)) < 1e-10);
        }
    }

    #[test]
    fn diagonal_hamiltonian_gives_standard_basis() {
        let h = from_real_rows(&[&[2.0, 0.0, 0.0], &[0.0, -1.0, 0.0], &[0.0, 0.0, 0.5]]);
        let sys = biorthogonal_decompose(&h, &MetricOperator::identity(3)).unwrap();
        assert_eq!(sys.energies(), &[-1.0, 0.5, 2.0]);
        let expected_cols = [1, 2, 0];
        for (n, &k) in expected_cols.iter().enumerate() {
            for r in 0..3 {
                let want = if r == k { 1.0 } else { 0.0 };
                assert!((sys.right()[(r, n)] - c64(want, 0.0)).norm() < 1e-14);
                assert!((sys.left()[(n, r)] - c64(want, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn leading_component_is_real_positive() {
        let (h, m) = t_model(2.0, 1.5);
        let sys = biorthogonal_decompose(&h, &m).unwrap();
        for n in 0..2 {
            let lead = sys.right()[(0, n)];
            assert!(lead.re > 0.0 && lead.im.abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_and_broken_spectra_are_rejected() {
        let err = biorthogonal_decompose(&identity(2), &MetricOperator::identity(2)).unwrap_err();
        assert!(matches!(err, QhError::DegenerateSpectrum { .. }));
        let nilpotent = from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let err = biorthogonal_decompose(&nilpotent, &MetricOperator::identity(2)).unwrap_err();
        assert!(matches!(err, QhError::NotQuasiHermitian { .. }));
    }

    #[test]
    fn matrix_function_identity_and_sqrt() {
        let (h, m) = t_model(0.8, 2.0);
        let sys = biorthogonal_decompose(&h, &m).unwrap();
        assert!(frobenius(&(matrix_function(&sys, |x| x).unwrap() - &h)) < 1e-12);
        let shifted = matrix_function(&sys, |x| x + 2.0).unwrap();
        let root = matrix_function(&sys, |x| (x + 2.0).sqrt()).unwrap();
        assert!(frobenius(&(&root * &root - shifted)) < 1e-10);
        let err = matrix_function(&sys, f64::sqrt).unwrap_err();
        assert_eq!(err, QhError::Domain { eigenvalue: -1.0 });
    }

    #[test]
    fn metric_roots() {
        let s = metric_sqrt(&from_real_rows(&[&[1.0, 0.0], &[0.0, 4.0]])).unwrap();
        assert!(frobenius(&(s - from_real_rows(&[&[1.0, 0.0], &[0.0, 2.0]]))) < 1e-14);
        let s = metric_sqrt(&identity(3)).unwrap();
        assert!(frobenius(&(s - identity(3))) < 1e-14);
        let err = metric_sqrt(&from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])).unwrap_err();
        assert!(matches!(err, QhError::NotPositiveDefinite { .. }));
        let err = metric_sqrt(&from_real_rows(&[&[1.0, 0.5], &[0.0, 1.0]])).unwrap_err();
        assert!(matches!(err, QhError::NotHermitian { .. }));
    }

    #[test]
    fn closed_form_2x2_eigensolver_matches_general_solver() {
        let cases = [
            from_rows(&[
                &[c64(1.0, 0.0), c64(0.3, -0.2)],
                &[c64(0.3, 0.2), c64(-2.0, 0.0)],
            ]),
            from_rows(&[
                &[c64(-1.0, 0.0), c64(0.0, 1e-9)],
                &[c64(0.0, -1e-9), c64(3.0, 0.0)],
            ]),
            from_rows(&[
                &[c64(2.0, 0.0), c64(0.0, 0.0)],
                &[c64(0.0, 0.0), c64(-5.0, 0.0)],
            ]),
            from_rows(&[
                &[c64(0.5, 0.0), c64(1.0, 1.0)],
                &[c64(1.0, -1.0), c64(0.5, 0.0)],
            ]),
        ];
        for m in cases {
            let (vals, vecs) = hermitian_eigh(&m);
            let eig = SymmetricEigen::new(m.clone());
            let mut reference: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
            reference.sort_by(f64::total_cmp);
            for (a, b) in vals.iter().zip(&reference) {
                assert!((a - b).abs() < 1e-13);
            }
            let d = CMatrix::from_diagonal(&DVector::from_iterator(
                2,
                vals.iter().map(|&v| c64(v, 0.0)),
            ));
            assert!(frobenius(&(&vecs * d * vecs.adjoint() - &m)) < 1e-13);
            assert!(frobenius(&(vecs.adjoint() * &vecs - identity(2))) < 1e-14);
        }
    }

    #[test]
    fn closed_form_expm_matches_pade() {
        let m = from_rows(&[
            &[c64(0.1, 0.4), c64(-1.2, 0.3)],
            &[c64(0.7, 0.0), c64(-0.5, 0.2)],
        ]);
        for scale in [1e-7, 1e-3, 1.0, 3.0] {
            let a = &m * c64(scale, 0.0);
            let diff = frobenius(&(expm(&a) - a.clone().exp()));
            assert!(
                diff < 1e-13 * (1.0 + frobenius(&a.exp())),
                "scale {scale}: {diff}"
            );
        }
    }
}
