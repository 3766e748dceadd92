use cqed_parity::decoherence::{dephasing_coefficients, leakage_dephasing_rate, relaxation_coefficients, LeakageParams};
use cqed_parity::exec;
use cqed_parity::model::{coupling_ladder, transition_frequencies, two_qubit_reference, CavitySpec, DeviceSpec, LogicalState, QubitSpec};
use cqed_parity::spectrum::{case_detunings, toeplitz_inverse, toeplitz_matrix, transformed_frequencies};
use cqed_parity::stability::{determinant, trace, QuarticModel};
use cqed_parity::steadystate::{chi_shift, solve_branch, Seed, SolverOptions};
use cqed_parity::{detunings_and_lambdas, DriveSpec, SpectralParams};
use num_complex::Complex64;
use proptest::prelude::*;

fn reference() -> SpectralParams {
    detunings_and_lambdas(&two_qubit_reference()).unwrap()
}

fn qubit() -> impl Strategy<Value = QubitSpec> {
    (3.5f64..4.6, 0.08f64..0.4, 0.02f64..0.15, 0.0f64..0.1, 0.0f64..0.1).prop_map(|(w10, alpha, g, g1, gp)| QubitSpec {
        omega10_ghz: w10,
        omega21_ghz: w10 - alpha,
        g1_ghz: g,
        gamma1_mhz: g1,
        gamma_phi_mhz: gp,
    })
}

fn device() -> impl Strategy<Value = DeviceSpec> {
    (
        4.8f64..5.5,
        0.1f64..5.0,
        prop::collection::vec(qubit(), 1..4),
        3usize..=12,
    )
        .prop_map(|(wc, k, qs, m)| DeviceSpec::new(CavitySpec::new(wc, k).unwrap(), qs, m).unwrap())
}

fn state2() -> impl Strategy<Value = LogicalState> {
    (0usize..4).prop_map(|k| LogicalState::from_index(k, 2))
}

proptest! {
    #[test]
    fn sigma_z_is_occupation_difference(bits in prop::collection::vec(0u8..2, 1..5), m in 3usize..=12) {
        let s = LogicalState::new(bits).unwrap();
        for e in s.expectations(m) {
            prop_assert_eq!(e.occupation.len(), m);
            prop_assert_eq!(e.occupation.iter().sum::<f64>(), 1.0);
            for i in 1..m {
                prop_assert_eq!(e.sigma_z[i - 1], e.occupation[i] - e.occupation[i - 1]);
            }
        }
    }

    #[test]
    fn coupling_ladder_increases(g in 1e-4f64..1.0, m in 3usize..=12) {
        let l = coupling_ladder(g, m);
        prop_assert!(l.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn device_round_trips(d in device()) {
        let text = d.to_toml_string();
        let back = DeviceSpec::from_toml_str(&text).unwrap();
        prop_assert_eq!(back, d);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn toeplitz_inverse_is_inverse(m in 2usize..=12) {
        let a = toeplitz_matrix(m);
        let b = toeplitz_inverse(m);
        let n = m - 1;
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n).map(|k| a[i][k] * b[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((v - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn case_detunings_are_transition_detunings(d in device()) {
        let wc = d.cavity().omega_c_ghz;
        for q in d.qubits() {
            let w = transition_frequencies(q, d.levels());
            let case = case_detunings(&transformed_frequencies(&w), wc);
            for (c, wi) in case.iter().zip(&w) {
                let direct = wi - wc;
                prop_assert!((c - direct).abs() <= 1e-10 * direct.abs());
            }
        }
    }

    #[test]
    fn transformed_frequencies_are_linear(
        x in prop::collection::vec(-5.0f64..5.0, 1..11),
        y0 in prop::collection::vec(-5.0f64..5.0, 11),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let y = &y0[..x.len()];
        let mix: Vec<f64> = x.iter().zip(y).map(|(u, v)| a * u + b * v).collect();
        let lhs = transformed_frequencies(&mix);
        let (tx, ty) = (transformed_frequencies(&x), transformed_frequencies(y));
        for i in 0..x.len() {
            prop_assert!((lhs[i] - (a * tx[i] + b * ty[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn converged_results_meet_the_residual_bound(
        s in state2(), eps in 0.01f64..300.0, dc in -60.0f64..20.0, high in any::<bool>()
    ) {
        let p = reference();
        let o = SolverOptions::default();
        let seed = if high { Seed::High } else { Seed::Low };
        let d = DriveSpec::new(eps, dc).unwrap();
        let r = solve_branch(&d, &s, &p, 1.0, seed, &o).unwrap();
        prop_assert!(r.converged);
        prop_assert!(r.residual <= o.tolerance);
        prop_assert_eq!(r.chi_mhz, chi_shift(r.n, &s, &p));
    }

    #[test]
    fn reseeding_reproduces_the_result(s in state2(), eps in 0.01f64..300.0, dc in -60.0f64..20.0, high in any::<bool>()) {
        let p = reference();
        let o = SolverOptions::default();
        let d = DriveSpec::new(eps, dc).unwrap();
        let seed = if high { Seed::High } else { Seed::Low };
        let r = solve_branch(&d, &s, &p, 1.0, seed, &o).unwrap();
        let again = solve_branch(&d, &s, &p, 1.0, Seed::From { n: r.n, branch: r.branch }, &o).unwrap();
        prop_assert!((again.n - r.n).abs() <= 1e-8 * (1.0 + r.n));
        prop_assert_eq!(again.branch, r.branch);
    }

    #[test]
    fn extra_levels_leave_chi_unchanged(s in state2(), n in 0.0f64..1e8, m in 4usize..=12) {
        let base = two_qubit_reference();
        let p3 = detunings_and_lambdas(&base).unwrap();
        let pm = detunings_and_lambdas(&base.with_levels(m).unwrap()).unwrap();
        prop_assert_eq!(chi_shift(n, &s, &p3).to_bits(), chi_shift(n, &s, &pm).to_bits());
    }

    #[test]
    fn weak_drive_is_bare_lorentzian(s in state2(), dc in -60.0f64..20.0) {
        let p = reference();
        let eps = 1e-3;
        let chi0 = chi_shift(0.0, &s, &p);
        let lorentz = eps * eps / ((dc + chi0).powi(2) + 0.25);
        let r = solve_branch(&DriveSpec::new(eps, dc).unwrap(), &s, &p, 1.0, Seed::Low, &SolverOptions::default()).unwrap();
        prop_assert!((r.n - lorentz).abs() <= 1e-4 * lorentz);
    }

    #[test]
    fn folds_are_determinant_zeros(s in state2(), kappa in 0.2f64..5.0, dc in -60.0f64..40.0, phase in 0.0f64..std::f64::consts::TAU) {
        let m = QuarticModel::new(&s, &reference()).unwrap();
        let r = m.bifurcation(kappa, dc);
        if let Some(c) = r.critical {
            prop_assert!(c.n1 > 0.0 && c.n2 > 0.0);
            prop_assert!(c.epsilon1_mhz <= c.epsilon2_mhz);
            for n in [c.n1, c.n2] {
                let a = m.fluctuation_matrix(Complex64::from_polar(n.sqrt(), phase), kappa, dc);
                let h = m.h(n, dc);
                prop_assert!(determinant(&a).norm() <= 1e-8 * (0.25 * kappa * kappa + h * h));
            }
        }
        let a = m.fluctuation_matrix(Complex64::new(3.0, -1.0), kappa, dc);
        prop_assert!((trace(&a) - Complex64::from(kappa)).norm() < 1e-9);
    }

    #[test]
    fn derived_gamma_matches_definitional(
        eps in 0.1f64..30.0, dc in -60.0f64..60.0, kappa in 0.1f64..10.0,
        c1 in -40.0f64..40.0, c2 in -40.0f64..40.0,
    ) {
        let g = leakage_dephasing_rate(&LeakageParams {
            epsilon_mhz: eps, delta_c_mhz: dc, kappa_mhz: kappa, chi1_mhz: c1, chi2_mhz: c2,
        }).unwrap();
        prop_assert!((g.derived_khz - g.definitional_khz).abs() <= 1e-6 * g.definitional_khz.abs() + 1e-12);
        prop_assert!(g.definitional_khz >= -1e-9);
    }

    #[test]
    fn channel_coefficients_are_finite_and_bounded(log_n in -3.0f64..8.0) {
        let p = reference();
        let (l1, l2) = (p.qubits[0].lambda[0], p.qubits[0].lambda[1]);
        let n = 10f64.powf(log_n);
        let r = relaxation_coefficients(n, l1, l2, 0.01);
        for (name, v) in r.additional() {
            prop_assert!(v.is_finite() && v.abs() <= 0.01, "{} = {}", name, v);
        }
        let d = dephasing_coefficients(n, l1, l2, 0.01);
        for (name, v) in d.additional() {
            prop_assert!(v.is_finite() && v.abs() <= 0.01, "{} = {}", name, v);
        }
    }

    #[test]
    fn parallel_map_preserves_order(xs in prop::collection::vec(-1e6f64..1e6, 0..200)) {
        let f = |x: &f64| x * x - 3.0 * x;
        prop_assert_eq!(exec::map(&xs, f), exec::map_sequential(&xs, f));
    }
}

#[test]
fn chi_magnitude_never_grows() {
    let p = reference();
    for s in LogicalState::all(2) {
        let mut prev = f64::INFINITY;
        for k in 0..=160 {
            let n = if k == 0 { 0.0 } else { 10f64.powf(-8.0 + k as f64 * 0.1) };
            let c = chi_shift(n, &s, &p).abs();
            assert!(c <= prev * (1.0 + 1e-15), "{s} at n = {n}");
            prev = c;
        }
    }
}

#[test]
fn epsilon2_is_continuous_in_detuning() {
    let p = reference();
    for s in LogicalState::all(2) {
        let m = QuarticModel::new(&s, &p).unwrap();
        let mut prev: Option<f64> = None;
        for k in 0..=4000 {
            let dc = -60.0 + k as f64 * 0.02;
            let cur = m.bifurcation(1.0, dc).epsilon2_mhz();
            if let (Some(e), Some(q)) = (cur, prev) {
                assert!((e - q).abs() <= 0.05 * q.max(1.0), "{s} at {dc}");
            }
            prev = cur;
        }
    }
}

#[test]
fn printed_gamma_differs_from_definitional() {
    let g = leakage_dephasing_rate(&LeakageParams {
        epsilon_mhz: 10.0,
        delta_c_mhz: -20.0,
        kappa_mhz: 1.0,
        chi1_mhz: -20.338_983_050_847_46,
        chi2_mhz: -30.835_117_773_019_27,
    })
    .unwrap();
    assert!(g.printed_khz < 0.0);
    assert!(g.rate_khz() > 100.0 * g.printed_khz.abs());
}
