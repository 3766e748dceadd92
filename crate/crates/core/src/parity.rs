//! Parity-readout planning.
//!
//! A state can bifurcate only for δ_c above its instability border, which sits
//! close to −χ_state. Placing the drive between the borders of an odd and the
//! next even excitation class makes the odd class bistable while the even one
//! stays linear; the drive strength window then separates the odd states'
//! ε₂ from those of the lower even classes, which are bistable too.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::exec;
use crate::model::{DriveSpec, LogicalState};
use crate::spectrum::SpectralParams;
use crate::stability::QuarticModel;
use crate::steadystate::{self, db_grid, mhz_to_db, SolveError, SolverOptions, SweepError};

/// Half-width of the δ_c range searched for instability borders, MHz.
pub const BORDER_SCAN_MHZ: f64 = 2000.0;
const BISECTION_TOL_MHZ: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ParityError {
    #[error("state {state}: no instability border in [-{BORDER_SCAN_MHZ}, {BORDER_SCAN_MHZ}] MHz")]
    NoBorder { state: String },
    #[error("parity planning needs at least two qubits, got {0}")]
    TooFewQubits(usize),
    #[error("the two-qubit parity point needs exactly two qubits, got {0}")]
    NotTwoQubits(usize),
    #[error("borders of odd class {odd} and even class {even} overlap")]
    OverlappingBorders { odd: usize, even: usize },
    #[error("empty drive window: low {low_mhz} MHz >= high {high_mhz} MHz")]
    EmptyWindow { low_mhz: f64, high_mhz: f64 },
    #[error("odd state {state} does not bifurcate at any planned drive")]
    OddNeverBistable { state: String },
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("state {state}: {source}")]
    Sweep { state: String, source: SweepError },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Bright,
    Dark,
}

/// Odd iff any drive leaves the cavity bright.
pub fn classify(bright_flags: &[bool]) -> Parity {
    if bright_flags.iter().any(|&b| b) {
        Parity::Odd
    } else {
        Parity::Even
    }
}

/// Bare shift χ(0) of every logical state, MHz.
pub fn bare_chi_table(params: &SpectralParams) -> BTreeMap<LogicalState, f64> {
    LogicalState::all(params.qubits.len())
        .into_iter()
        .map(|s| {
            let chi = steadystate::chi_shift(0.0, &s, params);
            (s, chi)
        })
        .collect()
}

/// δ_c at which a state's bifurcation appears or disappears.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Border {
    /// Root of the existence condition, MHz.
    pub numeric_mhz: f64,
    /// −χ(0), MHz.
    pub proxy_mhz: f64,
}

pub fn stability_border(
    state: &LogicalState,
    params: &SpectralParams,
    kappa_mhz: f64,
) -> Result<Border, ParityError> {
    let model = QuarticModel::new(state, params)?;
    let exists = |dc: f64| model.bifurcation(kappa_mhz, dc).exists;
    let (mut a, mut b) = (-BORDER_SCAN_MHZ, BORDER_SCAN_MHZ);
    let ea = exists(a);
    if ea == exists(b) {
        return Err(ParityError::NoBorder {
            state: state.to_string(),
        });
    }
    // Δω is affine in δ_c, so existence flips exactly once.
    while b - a > BISECTION_TOL_MHZ {
        let m = 0.5 * (a + b);
        if exists(m) == ea {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(Border {
        numeric_mhz: 0.5 * (a + b),
        proxy_mhz: -steadystate::chi_shift(0.0, state, params),
    })
}

/// Per-state critical drive at one detuning.
fn epsilon2(model: &QuarticModel, kappa_mhz: f64, delta_c_mhz: f64) -> Option<f64> {
    model.bifurcation(kappa_mhz, delta_c_mhz).epsilon2_mhz()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParityPoint {
    pub delta_c_mhz: f64,
    pub drive_ghz: f64,
    pub epsilon_low_mhz: f64,
    pub epsilon_high_mhz: f64,
    /// Odd state whose border bounds the δ_c window from below.
    pub lower_state: String,
    pub lower_border: Border,
    /// Even state whose border bounds the δ_c window from above.
    pub upper_state: String,
    pub upper_border: Border,
}

impl ParityPoint {
    /// Width of the δ_c interval between the bracketing borders, MHz.
    pub fn border_width_mhz(&self) -> f64 {
        self.upper_border.numeric_mhz - self.lower_border.numeric_mhz
    }
}

pub fn two_qubit_parity_point(
    params: &SpectralParams,
    kappa_mhz: f64,
) -> Result<ParityPoint, ParityError> {
    if params.qubits.len() != 2 {
        return Err(ParityError::NotTwoQubits(params.qubits.len()));
    }
    let plan = parity_plan(params, kappa_mhz)?;
    let drive = &plan.drives[0];
    Ok(ParityPoint {
        delta_c_mhz: drive.delta_c_mhz,
        drive_ghz: drive.drive_ghz,
        epsilon_low_mhz: plan.epsilon_low_mhz,
        epsilon_high_mhz: plan.epsilon_high_mhz,
        lower_state: drive.lower_state.clone(),
        lower_border: drive.lower_border,
        upper_state: drive.upper_state.clone(),
        upper_border: drive.upper_border,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannedDrive {
    /// Excitation count of the odd class this drive makes bistable.
    pub odd_class: usize,
    pub delta_c_mhz: f64,
    pub drive_ghz: f64,
    pub lower_state: String,
    pub lower_border: Border,
    /// The even class above, or the top odd class itself when N is odd.
    pub upper_state: String,
    pub upper_border: Border,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatePrediction {
    pub state: String,
    pub parity: Parity,
    /// ε₂ at each drive, absent where the state does not bifurcate.
    pub epsilon2_mhz: Vec<Option<f64>>,
    pub outcomes: Vec<Outcome>,
    pub classified: Parity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParityPlan {
    pub kappa_mhz: f64,
    pub drives: Vec<PlannedDrive>,
    /// Common drive-strength window shared by all drives, MHz.
    pub epsilon_low_mhz: f64,
    pub epsilon_high_mhz: f64,
    /// Geometric centre of the window, used for the predictions.
    pub epsilon_operating_mhz: f64,
    pub predictions: Vec<StatePrediction>,
}

impl ParityPlan {
    pub fn window_db(&self) -> (f64, f64) {
        (mhz_to_db(self.epsilon_low_mhz), mhz_to_db(self.epsilon_high_mhz))
    }
}

struct Class {
    members: Vec<(LogicalState, f64)>,
}

impl Class {
    fn min(&self) -> &(LogicalState, f64) {
        self.members
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("classes are non-empty")
    }

    fn max(&self) -> &(LogicalState, f64) {
        self.members
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("classes are non-empty")
    }
}

/// One drive per odd excitation class, placed at the midpoint between the
/// class's highest border and the lowest border of the even class above. For
/// odd N the top class has no even neighbour above and gets its drive half a
/// class spacing above its own border, giving (N+1)/2 drives.
pub fn parity_plan(params: &SpectralParams, kappa_mhz: f64) -> Result<ParityPlan, ParityError> {
    let n = params.qubits.len();
    if n < 2 {
        return Err(ParityError::TooFewQubits(n));
    }
    let chi = bare_chi_table(params);
    let mut classes: Vec<Class> = (0..=n).map(|_| Class { members: Vec::new() }).collect();
    for (s, c) in &chi {
        classes[s.excitations()].members.push((s.clone(), *c));
    }
    let omega_c = params.omega_c_ghz;

    let mut drives = Vec::new();
    for k in (1..=n).step_by(2) {
        let (lower_state, lower_chi) = classes[k].min().clone();
        let (delta_c, upper_state) = if k < n {
            let (upper, upper_chi) = classes[k + 1].max().clone();
            if upper_chi >= lower_chi {
                return Err(ParityError::OverlappingBorders { odd: k, even: k + 1 });
            }
            (-(lower_chi + upper_chi) / 2.0, upper)
        } else {
            let spacing = classes[k - 1].min().1 - classes[k].max().1;
            if spacing <= 0.0 {
                return Err(ParityError::OverlappingBorders { odd: k, even: k - 1 });
            }
            (-lower_chi + spacing / 2.0, classes[k].max().0.clone())
        };
        drives.push(PlannedDrive {
            odd_class: k,
            delta_c_mhz: delta_c,
            drive_ghz: omega_c + delta_c_to_shift(delta_c) * 1e-3,
            lower_border: stability_border(&lower_state, params, kappa_mhz)?,
            lower_state: lower_state.to_string(),
            upper_border: stability_border(&upper_state, params, kappa_mhz)?,
            upper_state: upper_state.to_string(),
        });
    }

    let states: Vec<LogicalState> = chi.keys().cloned().collect();
    let models = states
        .iter()
        .map(|s| QuarticModel::new(s, params))
        .collect::<Result<Vec<_>, _>>()?;
    let eps2: Vec<Vec<Option<f64>>> = models
        .iter()
        .map(|m| drives.iter().map(|d| epsilon2(m, kappa_mhz, d.delta_c_mhz)).collect())
        .collect();

    let mut low = 0.0f64;
    let mut high = f64::INFINITY;
    for (s, e) in states.iter().zip(&eps2) {
        let bistable = e.iter().flatten().copied();
        if s.is_odd() {
            let easiest = bistable.fold(f64::INFINITY, f64::min);
            if !easiest.is_finite() {
                return Err(ParityError::OddNeverBistable {
                    state: s.to_string(),
                });
            }
            low = low.max(easiest);
        } else {
            high = bistable.fold(high, f64::min);
        }
    }
    if low.partial_cmp(&high) != Some(std::cmp::Ordering::Less) {
        return Err(ParityError::EmptyWindow {
            low_mhz: low,
            high_mhz: high,
        });
    }
    let operating = if high.is_finite() {
        (low * high).sqrt()
    } else {
        2.0 * low
    };

    let predictions = states
        .iter()
        .zip(eps2)
        .map(|(s, e)| {
            let outcomes: Vec<Outcome> = e
                .iter()
                .map(|x| match x {
                    Some(e2) if operating > *e2 => Outcome::Bright,
                    _ => Outcome::Dark,
                })
                .collect();
            let flags: Vec<bool> = outcomes.iter().map(|o| *o == Outcome::Bright).collect();
            StatePrediction {
                state: s.to_string(),
                parity: if s.is_odd() { Parity::Odd } else { Parity::Even },
                epsilon2_mhz: e,
                classified: classify(&flags),
                outcomes,
            }
        })
        .collect();

    Ok(ParityPlan {
        kappa_mhz,
        drives,
        epsilon_low_mhz: low,
        epsilon_high_mhz: high,
        epsilon_operating_mhz: operating,
        predictions,
    })
}

/// ω_d − ω_c in MHz for a given δ_c = ω_c − ω_d.
fn delta_c_to_shift(delta_c_mhz: f64) -> f64 {
    -delta_c_mhz
}

/// Full-model check of one planned state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedState {
    pub state: String,
    pub parity: Parity,
    /// Photon number at the operating point after an up-sweep, per drive.
    pub n_final: Vec<f64>,
    /// Whether the up-sweep jumped to the upper attractor, per drive.
    pub jumped: Vec<bool>,
    pub classified: Parity,
}

impl SimulatedState {
    pub fn max_n(&self) -> f64 {
        self.n_final.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Soundness {
    pub states: Vec<SimulatedState>,
    /// Smallest bright photon number over largest dark one; `None` if one of
    /// the two groups is empty.
    pub contrast: Option<f64>,
    pub all_classified: bool,
}

/// Sweeps every state up to the plan's operating drive at each planned
/// detuning with the full shift χ(n), and classifies it by whether any sweep
/// jumped to the upper attractor.
pub fn simulate_plan(
    plan: &ParityPlan,
    params: &SpectralParams,
    grid_points: usize,
    opts: &SolverOptions,
) -> Result<Soundness, ParityError> {
    let states = LogicalState::all(params.qubits.len());
    let top = mhz_to_db(plan.epsilon_operating_mhz);
    let grid = db_grid(top - 40.0, top, grid_points.max(2));
    let sims = exec::try_map(&states, |s| {
        let mut n_final = Vec::new();
        let mut jumped = Vec::new();
        for d in &plan.drives {
            let sweep = steadystate::sweep_drive(
                &grid,
                steadystate::Direction::Up,
                s,
                params,
                plan.kappa_mhz,
                d.delta_c_mhz,
                opts,
            )
            .map_err(|source| ParityError::Sweep {
                state: s.to_string(),
                source,
            })?;
            n_final.push(sweep.last().n);
            jumped.push(sweep.jump_epsilon_mhz.is_some());
        }
        Ok::<_, ParityError>(SimulatedState {
            state: s.to_string(),
            parity: if s.is_odd() { Parity::Odd } else { Parity::Even },
            classified: classify(&jumped),
            n_final,
            jumped,
        })
    })?;
    let all_classified = sims.iter().all(|s| s.classified == s.parity);
    let bright_min = sims
        .iter()
        .filter(|s| s.classified == Parity::Odd)
        .map(SimulatedState::max_n)
        .fold(f64::INFINITY, f64::min);
    let dark_max = sims
        .iter()
        .filter(|s| s.classified == Parity::Even)
        .map(SimulatedState::max_n)
        .fold(0.0, f64::max);
    let contrast = (bright_min.is_finite() && dark_max > 0.0).then(|| bright_min / dark_max);
    Ok(Soundness {
        states: sims,
        contrast,
        all_classified,
    })
}

/// Drive spec at a planned detuning and the operating strength.
pub fn operating_drive(plan: &ParityPlan, drive: usize) -> DriveSpec {
    DriveSpec {
        epsilon_mhz: plan.epsilon_operating_mhz,
        delta_c_mhz: plan.drives[drive].delta_c_mhz,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{four_qubit_reference, two_qubit_reference, CavitySpec, DeviceSpec, QubitSpec};
    use crate::spectrum::detunings_and_lambdas;

    fn p2() -> SpectralParams {
        detunings_and_lambdas(&two_qubit_reference()).unwrap()
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&[false, false]), Parity::Even);
        assert_eq!(classify(&[true, false]), Parity::Odd);
        assert_eq!(classify(&[false, true]), Parity::Odd);
    }

    #[test]
    fn borders_near_bare_shifts() {
        let p = p2();
        let b11 = stability_border(&LogicalState::parse("11").unwrap(), &p, 1.0).unwrap();
        let b10 = stability_border(&LogicalState::parse("10").unwrap(), &p, 1.0).unwrap();
        assert!((b11.proxy_mhz + 20.019).abs() < 1e-3);
        assert!((b10.proxy_mhz + 26.303).abs() < 1e-3);
        assert!((b11.numeric_mhz - b11.proxy_mhz).abs() < 2.0);
        assert!((b10.numeric_mhz - b10.proxy_mhz).abs() < 2.0);
    }

    #[test]
    fn four_qubit_proxy_offset_grows_per_excitation() {
        let p = detunings_and_lambdas(&four_qubit_reference()).unwrap();
        let offsets: Vec<f64> = ["0001", "0011", "0111", "1111"]
            .iter()
            .map(|s| {
                let b = stability_border(&LogicalState::parse(s).unwrap(), &p, 1.0).unwrap();
                b.numeric_mhz - b.proxy_mhz
            })
            .collect();
        assert!(offsets[0].abs() < 2.0);
        assert!(offsets[3].abs() > 2.0);
        let steps: Vec<f64> = offsets.windows(2).map(|w| w[1] - w[0]).collect();
        for s in &steps {
            assert!((s - steps[0]).abs() < 1e-6, "{steps:?}");
        }
    }

    #[test]
    fn weak_coupling_border_is_kerr_limit() {
        let p = SpectralParams::from_ladders(5.0, &[(vec![4.3, 4.1], 1e-7)]).unwrap();
        let s = LogicalState::parse("0").unwrap();
        let b = stability_border(&s, &p, 1.0).unwrap();
        assert!((b.numeric_mhz.abs() - 0.75f64.sqrt()).abs() < 1e-6, "{b:?}");
        let err = stability_border(&s, &p, 5000.0).unwrap_err();
        assert!(matches!(err, ParityError::NoBorder { .. }));
    }

    #[test]
    fn two_qubit_point() {
        let pt = two_qubit_parity_point(&p2(), 1.0).unwrap();
        assert!((pt.delta_c_mhz + (26.302_940 + 20.019_144) / 2.0).abs() < 1e-5);
        assert_eq!(pt.lower_state, "10");
        assert_eq!(pt.upper_state, "11");
        assert!(pt.epsilon_low_mhz < pt.epsilon_high_mhz);
        let chi = bare_chi_table(&p2());
        let wc = 5005.0;
        let wd = pt.drive_ghz * 1e3;
        let c = |s: &str| chi[&LogicalState::parse(s).unwrap()];
        assert!(wc + c("11") < wd && wd < wc + c("10"));
    }

    #[test]
    fn identical_pair_keeps_window() {
        let q = QubitSpec::new(4.297, 4.071, 0.12, 0.0, 0.0).unwrap();
        let d = DeviceSpec::new(CavitySpec::new(5.005, 1.0).unwrap(), vec![q; 2], 3).unwrap();
        let p = detunings_and_lambdas(&d).unwrap();
        let chi = bare_chi_table(&p);
        assert_eq!(
            chi[&LogicalState::parse("01").unwrap()],
            chi[&LogicalState::parse("10").unwrap()]
        );
        assert!(two_qubit_parity_point(&p, 1.0).is_ok());
    }

    #[test]
    fn dissimilar_pair_has_no_plan() {
        let a = QubitSpec::new(4.297, 4.071, 0.12, 0.0, 0.0).unwrap();
        let b = QubitSpec::new(4.60, 4.374, 0.12, 0.0, 0.0).unwrap();
        let d = DeviceSpec::new(CavitySpec::new(5.005, 1.0).unwrap(), vec![a, b], 3).unwrap();
        let p = detunings_and_lambdas(&d).unwrap();
        assert!(two_qubit_parity_point(&p, 1.0).is_err());
    }

    #[test]
    fn four_qubit_plan_shape() {
        let p = detunings_and_lambdas(&four_qubit_reference()).unwrap();
        let plan = parity_plan(&p, 1.0).unwrap();
        assert_eq!(plan.drives.len(), 2);
        assert_eq!(plan.drives[0].odd_class, 1);
        assert_eq!(plan.drives[0].upper_state.matches('1').count(), 2);
        assert_eq!(plan.drives[1].odd_class, 3);
        assert_eq!(plan.drives[1].upper_state, "1111");
        for pr in &plan.predictions {
            assert_eq!(pr.classified, pr.parity, "{}", pr.state);
        }
    }

    #[test]
    fn odd_qubit_count_gets_extra_drive() {
        let q = QubitSpec::new(4.297, 4.071, 0.12, 0.0, 0.0).unwrap();
        let d = DeviceSpec::new(CavitySpec::new(5.005, 1.0).unwrap(), vec![q; 3], 3).unwrap();
        let p = detunings_and_lambdas(&d).unwrap();
        let plan = parity_plan(&p, 1.0).unwrap();
        assert_eq!(plan.drives.len(), 2);
        for pr in &plan.predictions {
            assert_eq!(pr.classified, pr.parity, "{}", pr.state);
        }
    }

    #[test]
    fn single_qubit_is_rejected() {
        let p = SpectralParams::from_ladders(5.005, &[(vec![4.297, 4.071], 0.12)]).unwrap();
        assert_eq!(parity_plan(&p, 1.0), Err(ParityError::TooFewQubits(1)));
    }
}
