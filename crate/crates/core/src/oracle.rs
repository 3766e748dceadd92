//! Brute-force check of the semiclassical model: the Lindblad steady state of
//! the Jaynes-Cummings ladder on a truncated Fock space.
//!
//! The Hamiltonian is written in the frame rotating at the drive frequency
//! ω_d = ω_c − δ_c, in MHz. Basis order is cavity ⊗ qubit 0 ⊗ qubit 1.
//! Density matrices are vectorized column by column.

use faer::linalg::solvers::Solve;
use faer::{c64, Mat, Scale, Side};
use serde::Serialize;
use thiserror::Error;

use crate::model::{coupling_ladder, transition_frequencies, DeviceSpec, DriveSpec};

pub const MAX_QUBITS: usize = 2;
pub const MAX_LEVELS: usize = 3;
pub const MIN_CUTOFF: usize = 4;
/// Largest Hilbert dimension accepted by [`steady_state`]; the dense
/// Liouvillian has this value squared as its side.
pub const MAX_STEADY_DIM: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("oracle supports at most {MAX_QUBITS} qubits with {MAX_LEVELS} levels, got {qubits} with {levels}")]
    TooLarge { qubits: usize, levels: usize },
    #[error("Fock cutoff must be at least {MIN_CUTOFF}, got {0}")]
    CutoffTooSmall(usize),
    #[error("Hilbert dimension {dim} exceeds the steady-state limit {max}")]
    DimensionLimit { dim: usize, max: usize },
    #[error("no collapse operator with a positive rate")]
    NoDissipation,
    #[error("constrained Liouvillian is singular (residual {0:.3e})")]
    Singular(f64),
    #[error("steady state is not unique (singular value ratio {0:.3e})")]
    NotUnique(f64),
    #[error("steady state is not a density matrix: {0}")]
    NotPhysical(String),
    #[error("commutator for qubit {qubit}, transition {transition} is not proportional to I+ (residual {residual:.3e})")]
    NotProportional {
        qubit: usize,
        transition: usize,
        residual: f64,
    },
    #[error("eigen/singular value decomposition failed")]
    Decomposition,
}

/// Optional intrinsic qubit channels, in addition to cavity decay.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QubitChannels {
    pub relaxation: bool,
    pub dephasing: bool,
}

#[derive(Debug, Clone)]
pub struct CollapseOperator {
    pub rate_mhz: f64,
    pub op: Mat<c64>,
}

#[derive(Debug, Clone)]
pub struct TruncatedSystem {
    pub fock_cutoff: usize,
    pub levels: Vec<usize>,
    pub hamiltonian: Mat<c64>,
    pub collapse: Vec<CollapseOperator>,
}

impl TruncatedSystem {
    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// max |H − H†|.
    pub fn hermiticity_error(&self) -> f64 {
        let h = &self.hamiltonian;
        let mut err = 0.0f64;
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                err = err.max((h[(i, j)] - h[(j, i)].conj()).norm());
            }
        }
        err
    }

    /// a†a on the full space.
    pub fn number_operator(&self) -> Mat<c64> {
        embed(&number(self.fock_cutoff), 0, &self.factor_dims())
    }

    fn factor_dims(&self) -> Vec<usize> {
        std::iter::once(self.fock_cutoff).chain(self.levels.iter().copied()).collect()
    }
}

fn zero(n: usize) -> Mat<c64> {
    Mat::zeros(n, n)
}

fn identity(n: usize) -> Mat<c64> {
    Mat::identity(n, n)
}

fn annihilation(cutoff: usize) -> Mat<c64> {
    let mut a = zero(cutoff);
    for k in 1..cutoff {
        a[(k - 1, k)] = c64::from((k as f64).sqrt());
    }
    a
}

fn number(cutoff: usize) -> Mat<c64> {
    Mat::from_fn(cutoff, cutoff, |i, j| if i == j { c64::from(i as f64) } else { c64::from(0.0) })
}

/// |row⟩⟨col| on a `levels`-dimensional space.
fn ket_bra(levels: usize, row: usize, col: usize) -> Mat<c64> {
    let mut m = zero(levels);
    m[(row, col)] = c64::from(1.0);
    m
}

fn kron(a: &Mat<c64>, b: &Mat<c64>) -> Mat<c64> {
    let (ra, ca, rb, cb) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
}

/// Places `op` on factor `slot` of a tensor product with factor sizes `dims`.
fn embed(op: &Mat<c64>, slot: usize, dims: &[usize]) -> Mat<c64> {
    dims.iter().enumerate().fold(identity(1), |acc, (k, &d)| {
        if k == slot {
            kron(&acc, op)
        } else {
            kron(&acc, &identity(d))
        }
    })
}

fn check_size(device: &DeviceSpec, cutoff: usize) -> Result<(), OracleError> {
    if device.n_qubits() > MAX_QUBITS || device.levels() > MAX_LEVELS {
        return Err(OracleError::TooLarge {
            qubits: device.n_qubits(),
            levels: device.levels(),
        });
    }
    if cutoff < MIN_CUTOFF {
        return Err(OracleError::CutoffTooSmall(cutoff));
    }
    Ok(())
}

/// Level energies E_k relative to the ground state, GHz.
fn level_energies(device: &DeviceSpec, qubit: usize) -> Vec<f64> {
    let w = transition_frequencies(&device.qubits()[qubit], device.levels());
    std::iter::once(0.0)
        .chain(w.iter().scan(0.0, |e, x| {
            *e += x;
            Some(*e)
        }))
        .collect()
}

/// H = δ_c a†a + Σ_k (E_k − kω_d)|k⟩⟨k| + Σ g_k(a†|k−1⟩⟨k| + h.c.) + ε(a + a†).
pub fn build_system(
    device: &DeviceSpec,
    drive: &DriveSpec,
    fock_cutoff: usize,
    channels: QubitChannels,
) -> Result<TruncatedSystem, OracleError> {
    check_size(device, fock_cutoff)?;
    let m = device.levels();
    let levels = vec![m; device.n_qubits()];
    let dims: Vec<usize> = std::iter::once(fock_cutoff).chain(levels.iter().copied()).collect();
    let a = embed(&annihilation(fock_cutoff), 0, &dims);
    let adag = a.adjoint().to_owned();
    let omega_d = device.cavity().omega_c_ghz * 1e3 - drive.delta_c_mhz;

    let mut h = &adag * &a * Scale(c64::from(drive.delta_c_mhz)) + (&a + &adag) * Scale(c64::from(drive.epsilon_mhz));
    let mut collapse = vec![CollapseOperator {
        rate_mhz: device.kappa_mhz(),
        op: a.clone(),
    }];
    for (j, q) in device.qubits().iter().enumerate() {
        let slot = j + 1;
        let energies = level_energies(device, j);
        for (k, e) in energies.iter().enumerate() {
            let diag = embed(&ket_bra(m, k, k), slot, &dims);
            h += diag * Scale(c64::from(e * 1e3 - k as f64 * omega_d));
        }
        for (k, g) in coupling_ladder(q.g1_ghz, m).iter().enumerate() {
            let lower = embed(&ket_bra(m, k, k + 1), slot, &dims);
            let term = &adag * &lower;
            h += (&term + term.adjoint()) * Scale(c64::from(g * 1e3));
        }
        if channels.relaxation && q.gamma1_mhz > 0.0 {
            let b = embed(&annihilation(m), slot, &dims);
            collapse.push(CollapseOperator {
                rate_mhz: q.gamma1_mhz,
                op: b,
            });
        }
        if channels.dephasing && q.gamma_phi_mhz > 0.0 {
            collapse.push(CollapseOperator {
                rate_mhz: 2.0 * q.gamma_phi_mhz,
                op: embed(&number(m), slot, &dims),
            });
        }
    }
    Ok(TruncatedSystem {
        fock_cutoff,
        levels,
        hamiltonian: h,
        collapse,
    })
}

/// Vectorized generator: vec(AρB) = (Bᵀ ⊗ A) vec(ρ).
pub fn liouvillian(sys: &TruncatedSystem) -> Mat<c64> {
    let d = sys.dim();
    let id = identity(d);
    let i = c64::new(0.0, 1.0);
    let h = &sys.hamiltonian;
    let mut l = (kron(&id, h) - kron(&h.transpose().to_owned(), &id)) * Scale(-i);
    for c in &sys.collapse {
        let op = &c.op;
        let ldl = op.adjoint() * op;
        let jump = kron(&op.conjugate().to_owned(), op);
        let anti = kron(&id, &ldl) + kron(&ldl.transpose().to_owned(), &id);
        l += (jump - anti * Scale(c64::from(0.5))) * Scale(c64::from(c.rate_mhz));
    }
    l
}

/// max over columns of |Σ_i L[(i,i), col]|, i.e. how far d/dt Tr ρ is from 0.
pub fn trace_defect(l: &Mat<c64>, dim: usize) -> f64 {
    (0..l.ncols())
        .map(|c| (0..dim).map(|i| l[(i + i * dim, c)]).sum::<c64>().norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: Mat<c64>,
    pub photon_number: f64,
    /// max |L vec(ρ)|.
    pub residual: f64,
    pub trace: f64,
    pub min_eigenvalue: f64,
    pub hermiticity_error: f64,
}

const PHYSICAL_TOL: f64 = 1e-8;

pub fn steady_state(sys: &TruncatedSystem) -> Result<SteadyState, OracleError> {
    let d = sys.dim();
    if d > MAX_STEADY_DIM {
        return Err(OracleError::DimensionLimit {
            dim: d,
            max: MAX_STEADY_DIM,
        });
    }
    if !sys.collapse.iter().any(|c| c.rate_mhz > 0.0) {
        return Err(OracleError::NoDissipation);
    }
    let l = liouvillian(sys);
    let mut a = l.clone();
    for c in 0..d * d {
        a[(0, c)] = c64::from(0.0);
    }
    for i in 0..d {
        a[(0, i + i * d)] = c64::from(1.0);
    }
    let mut rhs = Mat::<c64>::zeros(d * d, 1);
    rhs[(0, 0)] = c64::from(1.0);
    let x = a.partial_piv_lu().solve(&rhs);
    if (0..d * d).any(|k| !x[(k, 0)].re.is_finite() || !x[(k, 0)].im.is_finite()) {
        return Err(OracleError::Singular(f64::INFINITY));
    }
    let rho = Mat::from_fn(d, d, |i, j| x[(i + j * d, 0)]);

    let lx = &l * &x;
    let scale = (0..l.nrows()).map(|k| l[(k, k)].norm()).fold(1.0, f64::max);
    let residual = (0..d * d).map(|k| lx[(k, 0)].norm()).fold(0.0, f64::max);
    if residual > 1e-8 * scale {
        return Err(OracleError::Singular(residual));
    }
    let trace = (0..d).map(|i| rho[(i, i)].re).sum::<f64>();
    let mut herm = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            herm = herm.max((rho[(i, j)] - rho[(j, i)].conj()).norm());
        }
    }
    let sym = Mat::from_fn(d, d, |i, j| (rho[(i, j)] + rho[(j, i)].conj()) * 0.5);
    let min_eigenvalue = sym
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| OracleError::Decomposition)?
        .first()
        .copied()
        .unwrap_or(0.0);
    if (trace - 1.0).abs() > PHYSICAL_TOL || herm > PHYSICAL_TOL || min_eigenvalue < -PHYSICAL_TOL {
        return Err(OracleError::NotPhysical(format!(
            "trace {trace}, hermiticity {herm:.3e}, min eigenvalue {min_eigenvalue:.3e}"
        )));
    }
    let nop = sys.number_operator();
    let photon_number = (0..d)
        .map(|i| (0..d).map(|k| nop[(i, k)] * rho[(k, i)]).sum::<c64>().re)
        .sum();
    Ok(SteadyState {
        rho,
        photon_number,
        residual,
        trace,
        min_eigenvalue,
        hermiticity_error: herm,
    })
}

/// Ratio of the smallest to the second-smallest singular value of the
/// unconstrained Liouvillian. A unique steady state has a one-dimensional
/// kernel, so the ratio is tiny.
pub fn uniqueness_ratio(sys: &TruncatedSystem) -> Result<f64, OracleError> {
    let l = liouvillian(sys);
    let s = l.singular_values().map_err(|_| OracleError::Decomposition)?;
    let n = s.len();
    Ok(s[n - 1] / s[n - 2])
}

/// One row of the commutator table, GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CommutatorRow {
    pub qubit: usize,
    pub transition: usize,
    pub coefficient_ghz: f64,
    pub expected_ghz: f64,
    pub residual: f64,
}

impl CommutatorRow {
    pub fn relative_error(&self) -> f64 {
        ((self.coefficient_ghz - self.expected_ghz) / self.expected_ghz).abs()
    }
}

pub const COMMUTATOR_CUTOFF: usize = 4;
const COMMUTATOR_RESIDUAL: f64 = 1e-8;

/// Projects [I₋, H₀] onto I₊ for every transition, where
/// I₋ = a†σ − aσ†, I₊ = a†σ + aσ†, σ = |i−1⟩⟨i| and H₀ = ω_c a†a + Σ E_k|k⟩⟨k|
/// in the lab frame.
pub fn commutator_check(device: &DeviceSpec) -> Result<Vec<CommutatorRow>, OracleError> {
    check_size(device, COMMUTATOR_CUTOFF)?;
    let m = device.levels();
    let dims: Vec<usize> = std::iter::once(COMMUTATOR_CUTOFF)
        .chain(std::iter::repeat(m).take(device.n_qubits()))
        .collect();
    let a = embed(&annihilation(COMMUTATOR_CUTOFF), 0, &dims);
    let adag = a.adjoint().to_owned();
    let mut h0 = &adag * &a * Scale(c64::from(device.cavity().omega_c_ghz));
    for j in 0..device.n_qubits() {
        for (k, e) in level_energies(device, j).iter().enumerate() {
            h0 += embed(&ket_bra(m, k, k), j + 1, &dims) * Scale(c64::from(*e));
        }
    }
    let mut rows = Vec::new();
    for j in 0..device.n_qubits() {
        let w = transition_frequencies(&device.qubits()[j], m);
        for i in 1..m {
            let sigma = embed(&ket_bra(m, i - 1, i), j + 1, &dims);
            let down = &adag * &sigma;
            let up = &a * sigma.adjoint();
            let i_minus = &down - &up;
            let i_plus = &down + &up;
            let c = &i_minus * &h0 - &h0 * &i_minus;
            let dot = |x: &Mat<c64>, y: &Mat<c64>| {
                let mut s = c64::from(0.0);
                for r in 0..x.nrows() {
                    for q in 0..x.ncols() {
                        s += x[(r, q)].conj() * y[(r, q)];
                    }
                }
                s
            };
            let coef = dot(&i_plus, &c) / dot(&i_plus, &i_plus);
            let diff = &c - &i_plus * Scale(coef);
            let residual = (dot(&diff, &diff).re / dot(&c, &c).re).sqrt() + coef.im.abs();
            if residual > COMMUTATOR_RESIDUAL {
                return Err(OracleError::NotProportional {
                    qubit: j,
                    transition: i,
                    residual,
                });
            }
            rows.push(CommutatorRow {
                qubit: j,
                transition: i,
                coefficient_ghz: coef.re,
                expected_ghz: w[i - 1] - device.cavity().omega_c_ghz,
                residual,
            });
        }
    }
    Ok(rows)
}

/// Oracle and semiclassical photon numbers for the undriven-qubit ground
/// state at one drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub epsilon_mhz: f64,
    pub n_semiclassical: f64,
    pub n_oracle: f64,
    pub n_oracle_doubled: f64,
}

impl ComparisonRow {
    pub fn relative_deviation(&self) -> f64 {
        ((self.n_oracle - self.n_semiclassical) / self.n_oracle).abs()
    }

    pub fn truncation_change(&self) -> f64 {
        ((self.n_oracle_doubled - self.n_oracle) / self.n_oracle).abs()
    }
}

#[derive(Debug, Error)]
pub enum ComparisonError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Spectrum(#[from] crate::spectrum::SpectrumError),
    #[error(transparent)]
    Solve(#[from] crate::steadystate::SolveError),
}

/// Compares ⟨a†a⟩ of the Lindblad steady state, at `cutoff` and `2·cutoff`,
/// with the low-branch semiclassical n of the all-ground logical state. Cavity
/// decay pulls any qubit excitation back to the ground state, so that is the
/// only logical state with a stationary oracle counterpart.
pub fn compare_low_branch(
    device: &DeviceSpec,
    epsilons_mhz: &[f64],
    delta_c_mhz: f64,
    cutoff: usize,
) -> Result<Vec<ComparisonRow>, ComparisonError> {
    let params = crate::spectrum::detunings_and_lambdas(device)?;
    let ground = crate::model::LogicalState::new(vec![0; device.n_qubits()])
        .expect("all-zero bits are a valid state");
    crate::exec::try_map(epsilons_mhz, |&eps| {
        let drive = DriveSpec {
            epsilon_mhz: eps,
            delta_c_mhz,
        };
        let semi = crate::steadystate::solve_branch(
            &drive,
            &ground,
            &params,
            device.kappa_mhz(),
            crate::steadystate::Seed::Low,
            &crate::steadystate::SolverOptions::default(),
        )?;
        let at = |c: usize| -> Result<f64, OracleError> {
            Ok(steady_state(&build_system(device, &drive, c, QubitChannels::default())?)?.photon_number)
        };
        Ok(ComparisonRow {
            epsilon_mhz: eps,
            n_semiclassical: semi.n,
            n_oracle: at(cutoff)?,
            n_oracle_doubled: at(2 * cutoff)?,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{two_qubit_reference, CavitySpec, QubitSpec};

    fn single(g1: f64) -> DeviceSpec {
        let q = two_qubit_reference().qubits()[0];
        DeviceSpec::new(
            CavitySpec::new(5.005, 1.0).unwrap(),
            vec![QubitSpec { g1_ghz: g1, ..q }],
            3,
        )
        .unwrap()
    }

    #[test]
    fn undriven_uncoupled_is_diagonal() {
        let sys = build_system(&single(1e-300), &DriveSpec::new(0.0, 0.0).unwrap(), 5, QubitChannels::default()).unwrap();
        let h = &sys.hamiltonian;
        for i in 0..sys.dim() {
            for j in 0..sys.dim() {
                if i != j {
                    assert!(h[(i, j)].norm() < 1e-200);
                }
            }
        }
    }

    #[test]
    fn dimensions_and_hermiticity() {
        let drive = DriveSpec::new(5.0, -3.0).unwrap();
        let sys = build_system(&single(0.12), &drive, 40, QubitChannels::default()).unwrap();
        assert_eq!(sys.dim(), 120);
        assert!(sys.hermiticity_error() < 1e-12);
        let two = build_system(&two_qubit_reference(), &drive, 4, QubitChannels::default()).unwrap();
        assert_eq!(two.dim(), 36);
        assert!(matches!(steady_state(&sys), Err(OracleError::DimensionLimit { .. })));
    }

    #[test]
    fn size_limits() {
        let drive = DriveSpec::new(1.0, 0.0).unwrap();
        assert_eq!(
            build_system(&single(0.12), &drive, 3, QubitChannels::default()).unwrap_err(),
            OracleError::CutoffTooSmall(3)
        );
        let big = two_qubit_reference().with_levels(4).unwrap();
        assert!(matches!(
            build_system(&big, &drive, 4, QubitChannels::default()),
            Err(OracleError::TooLarge { .. })
        ));
    }

    #[test]
    fn trace_is_conserved() {
        let drive = DriveSpec::new(3.0, 0.0).unwrap();
        let ch = QubitChannels {
            relaxation: true,
            dephasing: true,
        };
        let sys = build_system(&single(0.12), &drive, 6, ch).unwrap();
        assert_eq!(sys.collapse.len(), 3);
        assert!(trace_defect(&liouvillian(&sys), sys.dim()) < 1e-10);
    }

    #[test]
    fn undriven_steady_state_is_vacuum() {
        let sys = build_system(&single(0.12), &DriveSpec::new(0.0, 0.0).unwrap(), 6, QubitChannels::default()).unwrap();
        let ss = steady_state(&sys).unwrap();
        assert!(ss.photon_number.abs() < 1e-10);
        assert!((ss.rho[(0, 0)].re - 1.0).abs() < 1e-8);
    }

    #[test]
    fn unique_kernel() {
        let sys = build_system(&single(0.12), &DriveSpec::new(5.0, 0.0).unwrap(), 5, QubitChannels::default()).unwrap();
        assert!(uniqueness_ratio(&sys).unwrap() < 1e-6);
    }

    #[test]
    fn weak_drive_matches_semiclassical() {
        let rows = compare_low_branch(&single(0.12), &[2.0, 6.0], 0.0, 6).unwrap();
        for r in &rows {
            eprintln!("{r:?} {} {}", r.relative_deviation(), r.truncation_change());
            assert!(r.relative_deviation() < 0.1);
        }
    }

    #[test]
    fn commutator_gives_transition_detunings() {
        let rows = commutator_check(&two_qubit_reference()).unwrap();
        assert_eq!(rows.len(), 4);
        let want = [-0.708, -0.934, -0.911, -1.137];
        for (r, w) in rows.iter().zip(want) {
            assert!((r.coefficient_ghz - w).abs() < 1e-9, "{r:?}");
            assert!(r.relative_error() < 1e-8);
        }
        let other = commutator_check(&single(0.05)).unwrap();
        assert!((other[1].coefficient_ghz - rows[1].coefficient_ghz).abs() < 1e-12);
    }
}
