//! Photon-number dependent dispersive shift and the semiclassical steady state.
//!
//! For a logical state the cavity sees the shift
//!
//! χ(n) = Σ_j Σ_i g_i λ_i ⟨σ_{z,i}⟩ / √(1 + 4λ_i² n),
//!
//! which tends to the bare shift Σ g_i λ_i ⟨σ_{z,i}⟩ as n → 0. The resonance
//! sits at ω_c + χ(n), and with δ_c = ω_c − ω_d the steady state solves
//! n = F(n) = ε² / ((δ_c + χ(n))² + κ²/4). Which solution is reached depends
//! on the seed of the damped iteration, mirroring hysteresis.

use serde::Serialize;
use thiserror::Error;

use crate::model::{DriveSpec, LogicalState};
use crate::spectrum::SpectralParams;

/// Ratio between neighbouring grid points that counts as a jump.
pub const JUMP_RATIO: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("state has {state} qubits, device has {device}")]
    StateMismatch { state: usize, device: usize },
    #[error("invalid seed {0}")]
    InvalidSeed(f64),
    #[error("no convergence after {iterations} iterations (n = {n}, residual = {residual:e})")]
    NotConverged {
        iterations: usize,
        n: f64,
        residual: f64,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum SweepError {
    #[error("empty drive grid")]
    EmptyGrid,
    #[error("drive grid must be finite, non-negative and strictly increasing (index {0})")]
    BadGrid(usize),
    #[error("grid point {index} (epsilon = {epsilon_mhz} MHz): {source}")]
    Solve {
        index: usize,
        epsilon_mhz: f64,
        source: SolveError,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum ContrastError {
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// One σ_z ≠ 0 contribution to χ(n), in MHz.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Term {
    g_lambda_sigma: f64,
    four_lambda_sq: f64,
}

/// A logical state bound to a device: evaluates χ(n) without allocating.
#[derive(Debug, Clone, PartialEq)]
pub struct StateModel {
    terms: Vec<Term>,
}

impl StateModel {
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
                let sz = e.sigma_z[i];
                if sz == 0.0 {
                    continue;
                }
                let l = q.lambda[i];
                terms.push(Term {
                    g_lambda_sigma: q.couplings_ghz[i] * 1e3 * l * sz,
                    four_lambda_sq: 4.0 * l * l,
                });
            }
        }
        Ok(Self { terms })
    }

    /// χ(n) in MHz.
    pub fn chi(&self, n: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.g_lambda_sigma / (1.0 + t.four_lambda_sq * n).sqrt())
            .sum()
    }

    /// F(n) = ε² / ((δ_c + χ(n))² + κ²/4).
    pub fn photon_map(&self, n: f64, drive: &DriveSpec, kappa_mhz: f64) -> f64 {
        let det = drive.delta_c_mhz + self.chi(n);
        drive.epsilon_mhz.powi(2) / (det * det + 0.25 * kappa_mhz * kappa_mhz)
    }
}

/// χ(n) in MHz for `state`.
///
/// # Panics
/// If the state's qubit count differs from the device's.
pub fn chi_shift(n: f64, state: &LogicalState, params: &SpectralParams) -> f64 {
    StateModel::new(state, params)
        .expect("state does not match device")
        .chi(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Low,
    High,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Low => "low",
            Branch::High => "high",
        }
    }
}

/// Starting point of the fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Seed {
    /// n = 0.
    Low,
    /// The decoupled-cavity value ε² / (δ_c² + κ²/4), where χ → 0.
    High,
    /// An explicit photon number with the branch label to report.
    From { n: f64, branch: Branch },
}

impl Seed {
    fn resolve(self, drive: &DriveSpec, kappa_mhz: f64) -> (f64, Branch) {
        match self {
            Seed::Low => (0.0, Branch::Low),
            Seed::High => (high_seed(drive, kappa_mhz), Branch::High),
            Seed::From { n, branch } => (n, branch),
        }
    }
}

pub fn high_seed(drive: &DriveSpec, kappa_mhz: f64) -> f64 {
    drive.epsilon_mhz.powi(2) / (drive.delta_c_mhz.powi(2) + 0.25 * kappa_mhz * kappa_mhz)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Bound on |n − F(n)| / (1 + n).
    pub tolerance: f64,
    /// Damping used until a slope estimate is available, and throughout when
    /// `adaptive` is off.
    pub damping: f64,
    pub max_iterations: usize,
    /// Rescale the damping from the secant slope s of F as 1/(1 − s), capped to
    /// [`MIN_DAMPING`, 1]. A cap of 1 never steps past F(n), so the iteration
    /// stays in the seed's basin.
    pub adaptive: bool,
}

pub const MIN_DAMPING: f64 = 1e-4;

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            damping: 0.5,
            max_iterations: 10_000,
            adaptive: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyStateResult {
    pub n: f64,
    pub branch: Branch,
    pub chi_mhz: f64,
    pub effective_cavity_ghz: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SteadyStateResult {
    /// Effective cavity frequency minus ω_c, in MHz (equals χ(n)).
    pub fn pull_mhz(&self) -> f64 {
        self.chi_mhz
    }
}

pub fn solve_branch(
    drive: &DriveSpec,
    state: &LogicalState,
    params: &SpectralParams,
    kappa_mhz: f64,
    seed: Seed,
    opts: &SolverOptions,
) -> Result<SteadyStateResult, SolveError> {
    let model = StateModel::new(state, params)?;
    solve_model(&model, drive, params.omega_c_ghz, kappa_mhz, seed, opts)
}

pub fn solve_model(
    model: &StateModel,
    drive: &DriveSpec,
    omega_c_ghz: f64,
    kappa_mhz: f64,
    seed: Seed,
    opts: &SolverOptions,
) -> Result<SteadyStateResult, SolveError> {
    let (mut n, branch) = seed.resolve(drive, kappa_mhz);
    if !(n.is_finite() && n >= 0.0) {
        return Err(SolveError::InvalidSeed(n));
    }
    let mut d = opts.damping;
    let mut prev: Option<(f64, f64)> = None;
    let mut residual = f64::INFINITY;
    for it in 0..opts.max_iterations {
        let f = model.photon_map(n, drive, kappa_mhz);
        residual = (n - f).abs() / (1.0 + n);
        if residual <= opts.tolerance {
            let chi = model.chi(n);
            return Ok(SteadyStateResult {
                n,
                branch,
                chi_mhz: chi,
                effective_cavity_ghz: omega_c_ghz + chi * 1e-3,
                residual,
                iterations: it,
                converged: true,
            });
        }
        if opts.adaptive {
            if let Some((n0, f0)) = prev {
                if n != n0 {
                    let s = (f - f0) / (n - n0);
                    d = if s < 1.0 {
                        (1.0 / (1.0 - s)).clamp(MIN_DAMPING, 1.0)
                    } else {
                        1.0
                    };
                }
            }
            prev = Some((n, f));
        }
        n = ((1.0 - d) * n + d * f).max(0.0);
    }
    Err(SolveError::NotConverged {
        iterations: opts.max_iterations,
        n,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub epsilon_mhz: f64,
    pub result: SteadyStateResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    /// In traversal order.
    pub points: Vec<SweepPoint>,
    pub direction: Direction,
    pub jump_epsilon_mhz: Option<f64>,
}

impl SweepResult {
    pub fn last(&self) -> &SteadyStateResult {
        &self.points.last().expect("sweeps are never empty").result
    }
}

/// Adiabatic drive sweep over an increasing `grid`, traversed upward or
/// downward. Each point is seeded with the previous solution; the first one
/// with n = 0 (up) or the decoupled-cavity value (down).
pub fn sweep_drive(
    grid: &[f64],
    direction: Direction,
    state: &LogicalState,
    params: &SpectralParams,
    kappa_mhz: f64,
    delta_c_mhz: f64,
    opts: &SolverOptions,
) -> Result<SweepResult, SweepError> {
    if grid.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    for (i, &e) in grid.iter().enumerate() {
        if !(e.is_finite() && e >= 0.0) || (i > 0 && e <= grid[i - 1]) {
            return Err(SweepError::BadGrid(i));
        }
    }
    let model = StateModel::new(state, params).map_err(|source| SweepError::Solve {
        index: 0,
        epsilon_mhz: grid[0],
        source,
    })?;
    let order: Vec<usize> = match direction {
        Direction::Up => (0..grid.len()).collect(),
        Direction::Down => (0..grid.len()).rev().collect(),
    };
    let mut branch = match direction {
        Direction::Up => Branch::Low,
        Direction::Down => Branch::High,
    };
    let mut points: Vec<SweepPoint> = Vec::with_capacity(grid.len());
    let mut jump = None;
    for &index in &order {
        let epsilon = grid[index];
        let drive = DriveSpec {
            epsilon_mhz: epsilon,
            delta_c_mhz,
        };
        let seed = match points.last() {
            Some(p) => Seed::From {
                n: p.result.n,
                branch,
            },
            None if direction == Direction::Up => Seed::Low,
            None => Seed::High,
        };
        let mut result = solve_model(&model, &drive, params.omega_c_ghz, kappa_mhz, seed, opts)
            .map_err(|source| SweepError::Solve {
                index,
                epsilon_mhz: epsilon,
                source,
            })?;
        if let (Some(prev), None) = (points.last(), jump) {
            let (a, b) = (prev.result.n, result.n);
            let jumped = match direction {
                Direction::Up => a > 0.0 && b > JUMP_RATIO * a,
                Direction::Down => b > 0.0 && a > JUMP_RATIO * b,
            };
            if jumped {
                jump = Some(epsilon);
                branch = match direction {
                    Direction::Up => Branch::High,
                    Direction::Down => Branch::Low,
                };
                result.branch = branch;
            }
        }
        points.push(SweepPoint {
            epsilon_mhz: epsilon,
            result,
        });
    }
    Ok(SweepResult {
        points,
        direction,
        jump_epsilon_mhz: jump,
    })
}

/// n_bright / n_dark with the bright state on its high branch and the dark
/// state on its low branch.
pub fn contrast(
    bright: &LogicalState,
    dark: &LogicalState,
    drive: &DriveSpec,
    params: &SpectralParams,
    kappa_mhz: f64,
    opts: &SolverOptions,
) -> Result<f64, ContrastError> {
    if drive.epsilon_mhz == 0.0 {
        return Err(ContrastError::Degenerate("zero drive gives 0/0"));
    }
    let nb = solve_branch(drive, bright, params, kappa_mhz, Seed::High, opts)?.n;
    let nd = solve_branch(drive, dark, params, kappa_mhz, Seed::Low, opts)?.n;
    if nd == 0.0 {
        return Err(ContrastError::Degenerate("dark photon number is zero"));
    }
    Ok(nb / nd)
}

/// Log-spaced grid of `points` drive strengths between two dB values
/// (20·log₁₀(ε/MHz)).
pub fn db_grid(start_db: f64, stop_db: f64, points: usize) -> Vec<f64> {
    linear_grid(start_db, stop_db, points)
        .into_iter()
        .map(db_to_mhz)
        .collect()
}

pub fn linear_grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..points)
            .map(|k| start + (stop - start) * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

pub fn db_to_mhz(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

pub fn mhz_to_db(mhz: f64) -> f64 {
    20.0 * mhz.log10()
}
