//! Transformed level frequencies, detunings and dispersive parameters.
//!
//! The level Hamiltonian Σ_i ω̃_i σ_{z,i}/2 reproduces the bare spectrum when
//! ω̃ = 2A⁻¹ω with A the (M−1)×(M−1) tridiagonal matrix (2 on the diagonal,
//! −1 next to it). Detunings are transition detunings Δ_i = ω_{i,i−1} − ω_c.

use thiserror::Error;

use crate::model::{coupling_ladder, transition_frequencies, DeviceSpec};

const CONVENTION_RTOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum SpectrumError {
    #[error("qubit {qubit}, transition {transition}: zero detuning from the cavity")]
    ZeroDetuning { qubit: usize, transition: usize },
    #[error("qubit {qubit}, transition {transition}: |lambda| = {lambda:.4} >= 1, not dispersive")]
    NotDispersive {
        qubit: usize,
        transition: usize,
        lambda: f64,
    },
    #[error(
        "qubit {qubit}, transition {transition}: detuning from transformed frequencies \
         {from_tilde} GHz differs from {direct} GHz"
    )]
    ConventionMismatch {
        qubit: usize,
        transition: usize,
        from_tilde: f64,
        direct: f64,
    },
}

/// Closed-form inverse of the (M−1)×(M−1) matrix tridiag(−1, 2, −1), row-major.
pub fn toeplitz_inverse(levels: usize) -> Vec<Vec<f64>> {
    assert!(levels >= 2, "need at least two levels");
    let n = levels - 1;
    let nf = n as f64;
    (1..=n)
        .map(|i| {
            (1..=n)
                .map(|j| {
                    let (i, j) = (i as f64, j as f64);
                    if i <= j {
                        -i * (j - nf - 1.0) / (nf + 1.0)
                    } else {
                        -j * (i - nf - 1.0) / (nf + 1.0)
                    }
                })
                .collect()
        })
        .collect()
}

/// The tridiagonal matrix whose inverse [`toeplitz_inverse`] returns.
pub fn toeplitz_matrix(levels: usize) -> Vec<Vec<f64>> {
    let n = levels - 1;
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match i.abs_diff(j) {
                    0 => 2.0,
                    1 => -1.0,
                    _ => 0.0,
                })
                .collect()
        })
        .collect()
}

/// ω̃_i = Σ_k 2 A⁻¹_{ik} ω_{k,k−1}.
pub fn transformed_frequencies(transitions: &[f64]) -> Vec<f64> {
    assert!(!transitions.is_empty(), "need at least one transition");
    toeplitz_inverse(transitions.len() + 1)
        .iter()
        .map(|row| 2.0 * row.iter().zip(transitions).map(|(a, w)| a * w).sum::<f64>())
        .collect()
}

/// Transition detunings rebuilt from ω̃: Δ̃_i = ω̃_i − ω_c − (ω̃_{i−1} + ω̃_{i+1})/2,
/// with missing neighbours dropped.
pub fn case_detunings(tilde: &[f64], omega_c: f64) -> Vec<f64> {
    let m = tilde.len();
    (0..m)
        .map(|i| {
            let below = if i > 0 { tilde[i - 1] } else { 0.0 };
            let above = if i + 1 < m { tilde[i + 1] } else { 0.0 };
            tilde[i] - omega_c - 0.5 * (below + above)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QubitSpectrum {
    pub transitions_ghz: Vec<f64>,
    pub couplings_ghz: Vec<f64>,
    pub tilde_omega_ghz: Vec<f64>,
    pub delta_ghz: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl QubitSpectrum {
    fn build(
        qubit: usize,
        omega_c: f64,
        transitions: Vec<f64>,
        couplings: Vec<f64>,
    ) -> Result<Self, SpectrumError> {
        let tilde = transformed_frequencies(&transitions);
        let from_tilde = case_detunings(&tilde, omega_c);
        let mut delta = Vec::with_capacity(transitions.len());
        let mut lambda = Vec::with_capacity(transitions.len());
        for (i, (&w, &g)) in transitions.iter().zip(&couplings).enumerate() {
            let d = w - omega_c;
            if d == 0.0 {
                return Err(SpectrumError::ZeroDetuning {
                    qubit,
                    transition: i + 1,
                });
            }
            if (from_tilde[i] - d).abs() > CONVENTION_RTOL * d.abs().max(w) {
                return Err(SpectrumError::ConventionMismatch {
                    qubit,
                    transition: i + 1,
                    from_tilde: from_tilde[i],
                    direct: d,
                });
            }
            let l = g / d;
            if l.abs() >= 1.0 {
                return Err(SpectrumError::NotDispersive {
                    qubit,
                    transition: i + 1,
                    lambda: l,
                });
            }
            delta.push(d);
            lambda.push(l);
        }
        Ok(Self {
            transitions_ghz: transitions,
            couplings_ghz: couplings,
            tilde_omega_ghz: tilde,
            delta_ghz: delta,
            lambda,
        })
    }

    pub fn n_transitions(&self) -> usize {
        self.lambda.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralParams {
    pub omega_c_ghz: f64,
    pub levels: usize,
    pub qubits: Vec<QubitSpectrum>,
}

impl SpectralParams {
    /// Builds parameters from explicit transition ladders `(ω_{i,i−1}, g₁)`; all
    /// ladders must have the same length. Allows the two-level truncation.
    pub fn from_ladders(omega_c_ghz: f64, ladders: &[(Vec<f64>, f64)]) -> Result<Self, SpectrumError> {
        let levels = ladders.first().map_or(2, |(w, _)| w.len() + 1);
        let qubits = ladders
            .iter()
            .enumerate()
            .map(|(j, (w, g1))| {
                assert_eq!(w.len() + 1, levels, "ladders must share a level count");
                QubitSpectrum::build(j, omega_c_ghz, w.clone(), coupling_ladder(*g1, levels))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            omega_c_ghz,
            levels,
            qubits,
        })
    }
}

pub fn detunings_and_lambdas(device: &DeviceSpec) -> Result<SpectralParams, SpectrumError> {
    let m = device.levels();
    let ladders: Vec<_> = device
        .qubits()
        .iter()
        .map(|q| (transition_frequencies(q, m), q.g1_ghz))
        .collect();
    SpectralParams::from_ladders(device.cavity().omega_c_ghz, &ladders)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::two_qubit_reference;

    fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
            .collect()
    }

    #[test]
    fn inverse_small_cases() {
        let inv = toeplitz_inverse(3);
        let expect = [[2.0 / 3.0, 1.0 / 3.0], [1.0 / 3.0, 2.0 / 3.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((inv[i][j] - expect[i][j]).abs() < 1e-15);
            }
        }
        assert_eq!(toeplitz_inverse(2), vec![vec![0.5]]);
    }

    #[test]
    fn inverse_is_inverse() {
        for m in 2..=12 {
            let p = matmul(&toeplitz_matrix(m), &toeplitz_inverse(m));
            for (i, row) in p.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    let id = if i == j { 1.0 } else { 0.0 };
                    assert!((v - id).abs() < 1e-12, "M={m} ({i},{j}) = {v}");
                }
            }
        }
    }

    #[test]
    fn three_level_closed_form() {
        let t = transformed_frequencies(&[4.297, 4.071]);
        assert!((t[0] - 8.443333333333333).abs() < 1e-12);
        assert!((t[1] - 8.292666666666667).abs() < 1e-12);
        assert!((t[0] - t[1] / 2.0 - 4.297).abs() < 1e-12);
        assert_eq!(transformed_frequencies(&[4.2]), vec![4.2]);
    }

    #[test]
    fn reference_detunings() {
        let p = detunings_and_lambdas(&two_qubit_reference()).unwrap();
        let q1 = &p.qubits[0];
        assert!((q1.delta_ghz[0] + 0.708).abs() < 1e-12);
        assert!((q1.delta_ghz[1] + 0.934).abs() < 1e-12);
        assert!((q1.lambda[0] + 0.169492).abs() < 1e-6);
        assert!((q1.lambda[1] + 0.181697).abs() < 1e-6);
        let q2 = &p.qubits[1];
        assert!((q2.delta_ghz[0] + 0.911).abs() < 1e-12);
        assert!((q2.delta_ghz[1] + 1.137).abs() < 1e-12);
    }

    #[test]
    fn zero_detuning_is_rejected() {
        let err = SpectralParams::from_ladders(5.0, &[(vec![5.0, 4.8], 0.1)]).unwrap_err();
        assert_eq!(
            err,
            SpectrumError::ZeroDetuning {
                qubit: 0,
                transition: 1
            }
        );
    }

    #[test]
    fn strong_coupling_is_rejected() {
        let err = SpectralParams::from_ladders(5.0, &[(vec![4.9, 4.7], 0.12)]).unwrap_err();
        assert!(matches!(err, SpectrumError::NotDispersive { transition: 1, .. }));
    }
}
