//! Quartic-order stability analysis of the driven steady state.
//!
//! Expanding χ to order λ⁴ gives the detuning h(n) = Δω + χ_nl·n with
//!
//! Δω   = δ_c + Σ Δ_i (λ_i² − 2λ_i⁴⟨Π_i⟩) ⟨σ_{z,i}⟩,
//! χ_nl = −Σ 2Δ_i λ_i⁴ ⟨σ_{z,i}⟩,
//!
//! and the steady state |ε|² = n(κ²/4 + h(n)²). Fluctuations around it are
//! governed by a 2×2 matrix A with Tr A = κ, so the bistable window is bounded
//! by the two zeros of Det A = κ²/4 + Δω² + 4Δω χ_nl n + 3χ_nl² n².

use num_complex::Complex64;
use serde::Serialize;

use crate::model::LogicalState;
use crate::spectrum::SpectralParams;
use crate::steadystate::SolveError;

/// One σ_z ≠ 0 transition, with Δ in MHz.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Term {
    delta: f64,
    lambda_sq: f64,
    sigma: f64,
    occupation: f64,
}

/// The quartic expansion for one logical state.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarticModel {
    terms: Vec<Term>,
}

impl QuarticModel {
    pub fn new(state: &LogicalState, params: &SpectralParams) -> Result<Self, SolveError> {
        if state.n_qubits() != params.qubits.len() {
            return Err(SolveError::StateMismatch {
                state: state.n_qubits(),
                device: params.qubits.len(),
            });
        }
        let mut terms = Vec::new();
        for (q, e) in params.qubits.iter().zip(state.expectations(params.levels)) {
            for i in 0..q.n_transitions() {
                if e.sigma_z[i] == 0.0 {
                    continue;
                }
                terms.push(Term {
                    delta: q.delta_ghz[i] * 1e3,
                    lambda_sq: q.lambda[i] * q.lambda[i],
                    sigma: e.sigma_z[i],
                    occupation: e.occupation[i + 1],
                });
            }
        }
        Ok(Self { terms })
    }

    /// h(n) in MHz.
    pub fn h(&self, n: f64, delta_c_mhz: f64) -> f64 {
        delta_c_mhz
            + self
                .terms
                .iter()
                .map(|t| t.delta * (t.lambda_sq - 2.0 * t.lambda_sq * t.lambda_sq * (n + t.occupation)) * t.sigma)
                .sum::<f64>()
    }

    /// (Δω, χ_nl) in MHz.
    pub fn params(&self, delta_c_mhz: f64) -> (f64, f64) {
        let chi_nl = -self
            .terms
            .iter()
            .map(|t| 2.0 * t.delta * t.lambda_sq * t.lambda_sq * t.sigma)
            .sum::<f64>();
        (self.h(0.0, delta_c_mhz), chi_nl)
    }

    /// Drive strength whose steady state has `n` photons.
    pub fn epsilon_at(&self, n: f64, kappa_mhz: f64, delta_c_mhz: f64) -> f64 {
        let h = self.h(n, delta_c_mhz);
        (n * (0.25 * kappa_mhz * kappa_mhz + h * h)).sqrt()
    }

    /// Fluctuation matrix A at the steady state with amplitude α₀.
    pub fn fluctuation_matrix(
        &self,
        alpha0: Complex64,
        kappa_mhz: f64,
        delta_c_mhz: f64,
    ) -> [[Complex64; 2]; 2] {
        let n = alpha0.norm_sqr();
        let h = self.h(n, delta_c_mhz);
        let dh = self.params(delta_c_mhz).1;
        let i = Complex64::i();
        let k = Complex64::from(0.5 * kappa_mhz);
        [
            [i * (n * dh + h) + k, i * alpha0 * alpha0 * dh],
            [-i * alpha0.conj() * alpha0.conj() * dh, -i * (n * dh + h) + k],
        ]
    }

    pub fn bifurcation(&self, kappa_mhz: f64, delta_c_mhz: f64) -> BifurcationReport {
        let (dw, chi) = self.params(delta_c_mhz);
        let disc = dw * dw - 0.75 * kappa_mhz * kappa_mhz;
        let exists = disc > 0.0 && chi * dw < 0.0;
        let critical = exists.then(|| {
            let root = disc.sqrt();
            let na = (-2.0 * dw - root) / (3.0 * chi);
            let nb = (-2.0 * dw + root) / (3.0 * chi);
            let ea = self.epsilon_at(na, kappa_mhz, delta_c_mhz);
            let eb = self.epsilon_at(nb, kappa_mhz, delta_c_mhz);
            let ((n1, e1), (n2, e2)) = if ea <= eb {
                ((na, ea), (nb, eb))
            } else {
                ((nb, eb), (na, ea))
            };
            CriticalPoints {
                n1,
                n2,
                epsilon1_mhz: e1,
                epsilon2_mhz: e2,
            }
        });
        BifurcationReport {
            exists,
            delta_omega_mhz: dw,
            chi_nl_mhz: chi,
            critical,
        }
    }
}

pub fn determinant(a: &[[Complex64; 2]; 2]) -> Complex64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn trace(a: &[[Complex64; 2]; 2]) -> Complex64 {
    a[0][0] + a[1][1]
}

/// Photon numbers and drive strengths at the two folds. ε₁ ≤ ε₂; the upper
/// branch ends at (n₁, ε₁), the lower one at (n₂, ε₂), so n₂ < n₁.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoints {
    pub n1: f64,
    pub n2: f64,
    pub epsilon1_mhz: f64,
    pub epsilon2_mhz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BifurcationReport {
    pub exists: bool,
    pub delta_omega_mhz: f64,
    pub chi_nl_mhz: f64,
    pub critical: Option<CriticalPoints>,
}

impl BifurcationReport {
    pub fn epsilon2_mhz(&self) -> Option<f64> {
        self.critical.map(|c| c.epsilon2_mhz)
    }

    pub fn epsilon1_mhz(&self) -> Option<f64> {
        self.critical.map(|c| c.epsilon1_mhz)
    }
}

/// h(n) in MHz.
///
/// # Panics
/// If the state's qubit count differs from the device's.
pub fn h_function(n: f64, state: &LogicalState, params: &SpectralParams, delta_c_mhz: f64) -> f64 {
    QuarticModel::new(state, params)
        .expect("state does not match device")
        .h(n, delta_c_mhz)
}

/// (Δω, χ_nl) in MHz.
///
/// # Panics
/// If the state's qubit count differs from the device's.
pub fn stability_params(
    state: &LogicalState,
    params: &SpectralParams,
    delta_c_mhz: f64,
) -> (f64, f64) {
    QuarticModel::new(state, params)
        .expect("state does not match device")
        .params(delta_c_mhz)
}

/// # Panics
/// If the state's qubit count differs from the device's.
pub fn bifurcation(
    state: &LogicalState,
    params: &SpectralParams,
    kappa_mhz: f64,
    delta_c_mhz: f64,
) -> BifurcationReport {
    QuarticModel::new(state, params)
        .expect("state does not match device")
        .bifurcation(kappa_mhz, delta_c_mhz)
}
