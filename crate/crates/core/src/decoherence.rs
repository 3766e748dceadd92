//! Decoherence channels seen in the dispersive frame, and the dephasing of an
//! even-parity superposition caused by photon leakage.
//!
//! Rates are linear frequencies in MHz, so times are in μs. Γ_Φ is reported in
//! kHz.

use num_complex::Complex64;
use ode_solvers::{Dopri5, System, Vector6};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DecoherenceError {
    #[error("kappa must be positive, got {0}")]
    NonPositiveKappa(f64),
    #[error("time grid must start at 0 and increase strictly")]
    BadGrid,
    #[error("integration failed between t = {t0} us and t = {t1} us: {reason}")]
    StepSize { t0: f64, t1: f64, reason: String },
}

/// Signed coefficients of the transformed relaxation operator, as they appear
/// in front of σ₁, σ_{x,1}, σ_{x,2}, σ_{z,1}, σ_{z,2}, σ₁σ₂ and σ₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelaxationCoefficients {
    pub gamma1: f64,
    pub sx1: f64,
    pub sx2: f64,
    pub sz1: f64,
    pub sz2: f64,
    pub s1s2: f64,
    pub s2: f64,
}

impl RelaxationCoefficients {
    pub fn additional(&self) -> [(&'static str, f64); 6] {
        [
            ("sx1", self.sx1),
            ("sx2", self.sx2),
            ("sz1", self.sz1),
            ("sz2", self.sz2),
            ("s1s2", self.s1s2),
            ("s2", self.s2),
        ]
    }
}

/// Signed coefficients of the transformed dephasing operator, in front of
/// σ_{z,1} (original), σ_{z,1}, σ_{z,2}, σ_{x,1} and σ_{x,2}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DephasingCoefficients {
    pub gamma_phi: f64,
    pub z1: f64,
    pub z2: f64,
    pub x1: f64,
    pub x2: f64,
}

impl DephasingCoefficients {
    pub fn additional(&self) -> [(&'static str, f64); 4] {
        [("z1", self.z1), ("z2", self.z2), ("x1", self.x1), ("x2", self.x2)]
    }
}

pub fn relaxation_coefficients(n: f64, lambda1: f64, lambda2: f64, gamma1: f64) -> RelaxationCoefficients {
    let sn = n.sqrt();
    let r1 = (1.0 + 4.0 * lambda1 * lambda1 * n).sqrt();
    let r2 = (1.0 + 4.0 * lambda2 * lambda2 * n).sqrt();
    let a1 = (2.0 * lambda1 * sn).atan();
    let a2 = (2.0 * lambda2 * sn).atan();
    // The σ_{z,2}, σ₁σ₂ and σ₂ terms carry arctan(2λ₂n) without a square root.
    let b2 = (2.0 * lambda2 * n).atan();
    RelaxationCoefficients {
        gamma1,
        sx1: 0.5 * gamma1 * a1 * a1 / r1,
        sx2: gamma1 / 8.0 * a2.powi(4) / r2,
        sz1: gamma1 * lambda1 * sn / r1,
        sz2: 0.25 * gamma1 * sn * lambda2 * b2 * b2 / r1,
        s1s2: 0.5 * gamma1 * b2,
        s2: -gamma1 / 8.0 * b2 * b2,
    }
}

pub fn dephasing_coefficients(n: f64, lambda1: f64, lambda2: f64, gamma_phi: f64) -> DephasingCoefficients {
    let sn = n.sqrt();
    let q1 = 1.0 + 4.0 * lambda1 * lambda1 * n;
    let r2 = (1.0 + 4.0 * lambda2 * lambda2 * n).sqrt();
    let a1 = (2.0 * lambda1 * sn).atan();
    let a2 = (2.0 * lambda2 * sn).atan();
    DephasingCoefficients {
        gamma_phi,
        z1: -gamma_phi * a1 * a1 / q1.sqrt(),
        z2: -0.5 * gamma_phi * a2 * a2 / r2,
        x1: -gamma_phi * 2.0 * lambda1 * sn / q1,
        x2: -gamma_phi * lambda2 * sn / r2,
    }
}

/// Cavity and qubit parameters of the leakage model, MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeakageParams {
    pub epsilon_mhz: f64,
    pub delta_c_mhz: f64,
    pub kappa_mhz: f64,
    pub chi1_mhz: f64,
    pub chi2_mhz: f64,
}

impl LeakageParams {
    fn rate1(&self) -> Complex64 {
        Complex64::new(0.5 * self.kappa_mhz, 2.0 * (self.chi1_mhz - self.chi2_mhz) + self.delta_c_mhz)
    }

    fn rate0(&self) -> Complex64 {
        Complex64::new(0.5 * self.kappa_mhz, -2.0 * self.chi1_mhz + self.delta_c_mhz)
    }

    /// Steady field with both qubits excited.
    pub fn alpha1_steady(&self) -> Complex64 {
        -Complex64::i() * self.epsilon_mhz / self.rate1()
    }

    /// Steady field with both qubits in the ground state.
    pub fn alpha0_steady(&self) -> Complex64 {
        -Complex64::i() * self.epsilon_mhz / self.rate0()
    }

    /// 4(χ₁ − χ₂/2), the coupling of a₁₀ to α₁α₀*.
    fn phase_coupling(&self) -> f64 {
        4.0 * (self.chi1_mhz - 0.5 * self.chi2_mhz)
    }
}

/// The three evaluations of the leakage dephasing rate, kHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaPhi {
    /// 4κε²χ₂ / [(κ²/4 + δ_c² + 2δ_cχ₂ + 4χ₁² − 4χ₁χ₂)² + κ²χ₂²].
    pub printed_khz: f64,
    /// −4(χ₁ − χ₂/2) Im(α₁ˢ α₀ˢ*).
    pub definitional_khz: f64,
    /// Closed form of the definitional value,
    /// 2κε²(2χ₁ − χ₂)² / [(κ²/4 + x₁x₀)² + κ²(x₁ − x₀)²/4] with
    /// x₁ = δ_c + 2(χ₁ − χ₂), x₀ = δ_c − 2χ₁.
    pub derived_khz: f64,
}

impl GammaPhi {
    /// The reported physical rate, |definitional|.
    pub fn rate_khz(&self) -> f64 {
        self.definitional_khz.abs()
    }
}

pub fn leakage_dephasing_rate(p: &LeakageParams) -> Result<GammaPhi, DecoherenceError> {
    let LeakageParams {
        epsilon_mhz: e,
        delta_c_mhz: dc,
        kappa_mhz: k,
        chi1_mhz: c1,
        chi2_mhz: c2,
    } = *p;
    if k.is_nan() || k <= 0.0 {
        return Err(DecoherenceError::NonPositiveKappa(k));
    }
    let printed_den = (k * k / 4.0 + dc * dc + 2.0 * dc * c2 + 4.0 * c1 * c1 - 4.0 * c1 * c2).powi(2) + k * k * c2 * c2;
    let printed = 4.0 * k * e * e * c2 / printed_den;
    let definitional = -p.phase_coupling() * (p.alpha1_steady() * p.alpha0_steady().conj()).im;
    let x1 = dc + 2.0 * (c1 - c2);
    let x0 = dc - 2.0 * c1;
    let q = k * k / 4.0;
    let derived = 2.0 * k * e * e * (2.0 * c1 - c2).powi(2) / ((q + x1 * x0).powi(2) + q * (x1 - x0).powi(2));
    Ok(GammaPhi {
        printed_khz: printed * 1e3,
        definitional_khz: definitional * 1e3,
        derived_khz: derived * 1e3,
    })
}

/// Field amplitudes and coherence at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Snapshot {
    pub alpha1: Complex64,
    pub alpha0: Complex64,
    /// ln a₁₀; a₁₀ itself underflows within a few tens of 1/κ.
    pub ln_a10: Complex64,
}

impl Snapshot {
    /// ln ⟨α₁|α₀⟩ = −|α₁|²/2 − |α₀|²/2 + α₁*α₀.
    pub fn ln_overlap(&self) -> Complex64 {
        -0.5 * (self.alpha1.norm_sqr() + self.alpha0.norm_sqr()) + self.alpha1.conj() * self.alpha0
    }

    /// ln |c₁₀| with c₁₀ = a₁₀ / ⟨α₁|α₀⟩.
    pub fn ln_c10_abs(&self) -> f64 {
        (self.ln_a10 - self.ln_overlap()).re
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub t_us: f64,
    pub closed: Snapshot,
    pub integrated: Snapshot,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DephasingReport {
    pub alpha0_steady: Complex64,
    pub alpha1_steady: Complex64,
    pub gamma_phi: GammaPhi,
    pub trace: Vec<TracePoint>,
}

impl DephasingReport {
    /// d ln|c₁₀|/dt between the grid points closest to `t0` and `t1`, from the
    /// integrated trajectory, in MHz.
    pub fn log_slope(&self, t0: f64, t1: f64) -> f64 {
        let pick = |t: f64| {
            self.trace
                .iter()
                .min_by(|a, b| (a.t_us - t).abs().total_cmp(&(b.t_us - t).abs()))
                .expect("trace is non-empty")
        };
        let (a, b) = (pick(t0), pick(t1));
        (b.integrated.ln_c10_abs() - a.integrated.ln_c10_abs()) / (b.t_us - a.t_us)
    }
}

/// Initial condition of the leakage problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakageInitial {
    pub alpha1: Complex64,
    pub alpha0: Complex64,
    pub a10: Complex64,
}

impl Default for LeakageInitial {
    fn default() -> Self {
        Self {
            alpha1: Complex64::new(0.0, 0.0),
            alpha0: Complex64::new(0.0, 0.0),
            a10: Complex64::new(0.5, 0.0),
        }
    }
}

struct LeakageOde {
    p: LeakageParams,
    tilde_omega_mhz: f64,
    gamma2_mhz: f64,
}

fn unpack(y: &Vector6<f64>) -> (Complex64, Complex64, Complex64) {
    (
        Complex64::new(y[0], y[1]),
        Complex64::new(y[2], y[3]),
        Complex64::new(y[4], y[5]),
    )
}

fn pack(a1: Complex64, a0: Complex64, l: Complex64) -> Vector6<f64> {
    Vector6::new(a1.re, a1.im, a0.re, a0.im, l.re, l.im)
}

impl System<f64, Vector6<f64>> for LeakageOde {
    fn system(&self, _t: f64, y: &Vector6<f64>, dy: &mut Vector6<f64>) {
        let (a1, a0, _) = unpack(y);
        let i = Complex64::i();
        let e = Complex64::from(self.p.epsilon_mhz);
        let d1 = -i * e - self.p.rate1() * a1;
        let d0 = -i * e - self.p.rate0() * a0;
        // d(ln a₁₀)/dt = −(2γ₂ + iω̃) − i4(χ₁ − χ₂/2) α₁α₀*
        let dl = -Complex64::new(2.0 * self.gamma2_mhz, self.tilde_omega_mhz)
            - i * self.p.phase_coupling() * a1 * a0.conj();
        *dy = pack(d1, d0, dl);
    }
}

pub const ODE_RTOL: f64 = 1e-9;
const ODE_ATOL: f64 = 1e-12;
const QUAD_TOL: f64 = 1e-12;

/// Integrates the leakage equations on `t_grid` (μs, starting at 0) and
/// evaluates the closed-form solution on the same grid. The closed-form phase
/// integral ∫α₁α₀* dt is computed by quadrature on each grid interval.
pub fn leakage_trajectories(
    t_grid: &[f64],
    p: &LeakageParams,
    tilde_omega_mhz: f64,
    gamma2_mhz: f64,
    init: &LeakageInitial,
) -> Result<DephasingReport, DecoherenceError> {
    let gamma_phi = leakage_dephasing_rate(p)?;
    if t_grid.first() != Some(&0.0) || t_grid.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
        return Err(DecoherenceError::BadGrid);
    }
    let a1s = p.alpha1_steady();
    let a0s = p.alpha0_steady();
    let alpha1 = |t: f64| a1s + (-p.rate1() * t).exp() * (init.alpha1 - a1s);
    let alpha0 = |t: f64| a0s + (-p.rate0() * t).exp() * (init.alpha0 - a0s);
    let integrand = |t: f64| alpha1(t) * alpha0(t).conj();
    let ln_a10_0 = init.a10.ln();

    let ode = LeakageOde {
        p: *p,
        tilde_omega_mhz,
        gamma2_mhz,
    };
    let mut y = pack(init.alpha1, init.alpha0, ln_a10_0);
    let mut phase = Complex64::new(0.0, 0.0);
    let mut trace = Vec::with_capacity(t_grid.len());
    for (k, &t) in t_grid.iter().enumerate() {
        if k > 0 {
            let t0 = t_grid[k - 1];
            let re = quadrature::integrate(|s| integrand(s).re, t0, t, QUAD_TOL);
            let im = quadrature::integrate(|s| integrand(s).im, t0, t, QUAD_TOL);
            phase += Complex64::new(re.integral, im.integral);

            let sys = LeakageOde { ..ode };
            let mut stepper = Dopri5::new(sys, t0, t, t - t0, y, ODE_RTOL, ODE_ATOL);
            stepper.integrate().map_err(|e| DecoherenceError::StepSize {
                t0,
                t1: t,
                reason: e.to_string(),
            })?;
            y = *stepper.y_out().last().expect("integrator reports the end point");
        }
        let ln_a10 = ln_a10_0
            - Complex64::new(2.0 * gamma2_mhz, tilde_omega_mhz) * t
            - Complex64::i() * p.phase_coupling() * phase;
        let (i1, i0, il) = unpack(&y);
        trace.push(TracePoint {
            t_us: t,
            closed: Snapshot {
                alpha1: alpha1(t),
                alpha0: alpha0(t),
                ln_a10,
            },
            integrated: Snapshot {
                alpha1: i1,
                alpha0: i0,
                ln_a10: il,
            },
        });
    }
    Ok(DephasingReport {
        alpha0_steady: a0s,
        alpha1_steady: a1s,
        gamma_phi,
        trace,
    })
}

/// Smallest n above which |z1| stays below `fraction`·γ_φ, found by bisection
/// on the monotone tail of |z1|(n).
pub fn z1_onset(lambda1: f64, fraction: f64) -> f64 {
    let z = |n: f64| dephasing_coefficients(n, lambda1, 0.0, 1.0).z1.abs();
    let peak = 1.0 / (lambda1 * lambda1);
    let (mut lo, mut hi) = (peak, peak);
    while z(hi) > fraction {
        hi *= 2.0;
    }
    while hi - lo > 1e-9 * hi {
        let m = 0.5 * (lo + hi);
        if z(m) > fraction {
            lo = m;
        } else {
            hi = m;
        }
    }
    hi
}
