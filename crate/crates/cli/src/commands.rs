use std::collections::BTreeMap;
use std::fs;

use log::info;
use serde_json::{json, Value};

use cqed_parity::decoherence::{self, DecoherenceError, LeakageInitial, LeakageParams};
use cqed_parity::exec;
use cqed_parity::model::{self, DeviceSpec, LogicalState, DEFAULT_HIERARCHY_FACTOR};
use cqed_parity::oracle::{self, ComparisonError, OracleError, QubitChannels};
use cqed_parity::parity::{self, ParityError};
use cqed_parity::spectrum::SpectrumError;
use cqed_parity::stability::{self, QuarticModel};
use cqed_parity::steadystate::{self, db_grid, mhz_to_db, Direction, SolveError, SolverOptions, SweepError, SweepResult};
use cqed_parity::{detunings_and_lambdas, CavitySpec, DriveSpec, SpectralParams};

use crate::output::{emit, num, opt, Format, RunManifest, Sink, Table};
use crate::{CliError, DecoherenceCommand, DeviceArgs, Figure, SweepDirection};

/// κ at which the zero-detuning ε₂ table is reported unless overridden; the
/// minimizer of the worst-case deviation from the reference table over
/// [0.5, 5] MHz.
const TABLE_KAPPA_MHZ: f64 = 5.0;
const TABLE_REFERENCE_DB: [(&str, f64); 4] = [("00", 41.4), ("01", 38.7), ("10", 37.6), ("11", 33.4)];

pub struct Run {
    subcommand: &'static str,
    device: String,
    parameters: BTreeMap<String, Value>,
    tables: Vec<Table>,
    sink: Sink,
    failure: Option<String>,
}

impl Run {
    fn new(subcommand: &'static str, device: &Loaded) -> Self {
        Self {
            subcommand,
            device: device.label.clone(),
            parameters: BTreeMap::new(),
            tables: Vec::new(),
            sink: Sink::Stdout,
            failure: None,
        }
    }

    fn param(mut self, key: &str, value: Value) -> Self {
        self.parameters.insert(key.to_string(), value);
        self
    }

    fn table(mut self, t: Table) -> Self {
        self.tables.push(t);
        self
    }

    pub fn with_sink(mut self, sink: Sink) -> Self {
        self.sink = sink;
        self
    }

    pub fn finish(self, format: Format) -> Result<(), CliError> {
        let manifest = RunManifest::new(self.subcommand, &self.device, self.parameters);
        let written = emit(&self.tables, &self.sink, format, manifest).map_err(|source| CliError::Io {
            context: "writing output".to_string(),
            source,
        })?;
        for p in written {
            info!("wrote {}", p.display());
        }
        match self.failure {
            Some(f) => Err(CliError::Numeric(f)),
            None => Ok(()),
        }
    }
}

struct Loaded {
    device: DeviceSpec,
    label: String,
}

impl Loaded {
    fn params(&self) -> Result<SpectralParams, CliError> {
        detunings_and_lambdas(&self.device).map_err(spectrum_err)
    }

    fn kappa(&self) -> f64 {
        self.device.kappa_mhz()
    }
}

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn numeric(e: impl std::fmt::Display) -> CliError {
    CliError::Numeric(e.to_string())
}

fn spectrum_err(e: SpectrumError) -> CliError {
    validation(e)
}

fn solve_err(e: SolveError) -> CliError {
    match e {
        SolveError::StateMismatch { .. } | SolveError::InvalidSeed(_) => validation(e),
        SolveError::NotConverged { .. } => numeric(e),
    }
}

fn sweep_err(e: SweepError) -> CliError {
    match e {
        SweepError::EmptyGrid | SweepError::BadGrid(_) => validation(e),
        SweepError::Solve { .. } => numeric(e),
    }
}

fn parity_err(e: ParityError) -> CliError {
    match e {
        ParityError::TooFewQubits(_) | ParityError::NotTwoQubits(_) => validation(e),
        _ => numeric(e),
    }
}

fn oracle_err(e: OracleError) -> CliError {
    match e {
        OracleError::TooLarge { .. } | OracleError::CutoffTooSmall(_) | OracleError::DimensionLimit { .. } => validation(e),
        _ => numeric(e),
    }
}

fn decoherence_err(e: DecoherenceError) -> CliError {
    match e {
        DecoherenceError::StepSize { .. } => numeric(e),
        _ => validation(e),
    }
}

fn load(args: &DeviceArgs, default: fn() -> DeviceSpec, default_label: &str) -> Result<Loaded, CliError> {
    let (mut device, label) = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Io {
                context: format!("reading {}", path.display()),
                source,
            })?;
            (model::load_device(&text).map_err(validation)?, path.display().to_string())
        }
        None => (default(), format!("builtin:{default_label}")),
    };
    if let Some(k) = args.kappa_mhz {
        device = device.with_kappa(k).map_err(validation)?;
    }
    if let Some(m) = args.levels {
        device = device.with_levels(m).map_err(validation)?;
    }
    Ok(Loaded { device, label })
}

fn two_qubit(args: &DeviceArgs) -> Result<Loaded, CliError> {
    load(args, model::two_qubit_reference, "two-qubit")
}

fn four_qubit_ten_levels() -> DeviceSpec {
    model::four_qubit_reference().with_levels(10).expect("10 levels are allowed")
}

fn parse_state(s: &str, n_qubits: usize) -> Result<LogicalState, CliError> {
    let st = LogicalState::parse(s).map_err(validation)?;
    if st.n_qubits() != n_qubits {
        return Err(validation(format!("state '{s}' has {} qubits, device has {n_qubits}", st.n_qubits())));
    }
    Ok(st)
}

fn check_points(points: usize, what: &str) -> Result<(), CliError> {
    if points < 2 {
        return Err(validation(format!("{what} needs at least 2 points, got {points}")));
    }
    Ok(())
}

fn check_qubit(d: &Loaded, qubit: usize) -> Result<(), CliError> {
    if qubit >= d.device.n_qubits() {
        return Err(validation(format!("qubit {qubit} out of range, device has {}", d.device.n_qubits())));
    }
    Ok(())
}

pub fn spectrum(args: &DeviceArgs) -> Result<Run, CliError> {
    let d = two_qubit(args)?;
    let p = d.params()?;
    let mut t = Table::new(
        "spectrum",
        &["qubit", "transition", "omega_ghz", "g_ghz", "tilde_omega_ghz", "delta_ghz", "lambda", "chi_mhz"],
    );
    for (j, q) in p.qubits.iter().enumerate() {
        for i in 0..q.n_transitions() {
            let g = q.couplings_ghz[i];
            t.push(vec![
                j.to_string(),
                (i + 1).to_string(),
                num(q.transitions_ghz[i]),
                num(g),
                num(q.tilde_omega_ghz[i]),
                num(q.delta_ghz[i]),
                num(q.lambda[i]),
                num(g * g / q.delta_ghz[i] * 1e3),
            ]);
        }
    }
    for w in d.device.hierarchy_warnings(DEFAULT_HIERARCHY_FACTOR) {
        t.note(format!("warning: {w}"));
    }
    Ok(Run::new("spectrum", &d).table(t))
}

fn sweep_rows(t: &mut Table, state: &str, r: &SweepResult) {
    let dir = match r.direction {
        Direction::Up => "up",
        Direction::Down => "down",
    };
    for pt in &r.points {
        t.push(vec![
            state.to_string(),
            dir.to_string(),
            num(pt.epsilon_mhz),
            num(mhz_to_db(pt.epsilon_mhz)),
            num(pt.result.n),
            pt.result.branch.as_str().to_string(),
            num(pt.result.chi_mhz),
            num(pt.result.effective_cavity_ghz),
        ]);
    }
}

const SWEEP_HEADER: [&str; 8] = [
    "state",
    "direction",
    "epsilon_mhz",
    "epsilon_db",
    "n_photons",
    "branch",
    "chi_mhz",
    "effective_cavity_ghz",
];

pub fn sweep(
    args: &DeviceArgs,
    state: &str,
    delta_c: f64,
    (from_db, to_db, points): (f64, f64, usize),
    direction: SweepDirection,
) -> Result<Run, CliError> {
    let d = two_qubit(args)?;
    let p = d.params()?;
    let s = parse_state(state, d.device.n_qubits())?;
    check_points(points, "sweep")?;
    if from_db.partial_cmp(&to_db) != Some(std::cmp::Ordering::Less) {
        return Err(validation(format!("--from-db {from_db} must be below --to-db {to_db}")));
    }
    let grid = db_grid(from_db, to_db, points);
    let dirs: &[Direction] = match direction {
        SweepDirection::Up => &[Direction::Up],
        SweepDirection::Down => &[Direction::Down],
        SweepDirection::Both => &[Direction::Up, Direction::Down],
    };
    let opts = SolverOptions::default();
    let mut t = Table::new("sweep", &SWEEP_HEADER);
    let b = stability::bifurcation(&s, &p, d.kappa(), delta_c);
    t.note(format!(
        "quartic critical drives: epsilon1 = {} MHz, epsilon2 = {} MHz",
        opt(b.epsilon1_mhz()),
        opt(b.epsilon2_mhz())
    ));
    for &dir in dirs {
        let r = steadystate::sweep_drive(&grid, dir, &s, &p, d.kappa(), delta_c, &opts).map_err(sweep_err)?;
        let name = match dir {
            Direction::Up => "up",
            Direction::Down => "down",
        };
        t.note(format!("{name} jump: {} MHz", opt(r.jump_epsilon_mhz)));
        sweep_rows(&mut t, state, &r);
    }
    Ok(Run::new("sweep", &d)
        .param("state", json!(state))
        .param("delta_c_mhz", json!(delta_c))
        .param("grid_db", json!([from_db, to_db, points]))
        .param("direction", json!(format!("{direction:?}").to_lowercase()))
        .param("kappa_mhz", json!(d.kappa()))
        .table(t))
}

fn bifurcation_table(name: &str, p: &SpectralParams, kappa: f64, delta_c: f64) -> Table {
    let states = LogicalState::all(p.qubits.len());
    let reports = exec::map(&states, |s| stability::bifurcation(s, p, kappa, delta_c));
    let mut t = Table::new(
        name,
        &[
            "state",
            "exists",
            "delta_omega_mhz",
            "chi_nl_mhz",
            "n1",
            "n2",
            "epsilon1_mhz",
            "epsilon2_mhz",
            "epsilon1_db",
            "epsilon2_db",
        ],
    );
    for (s, r) in states.iter().zip(reports) {
        let c = r.critical;
        t.push(vec![
            s.to_string(),
            r.exists.to_string(),
            num(r.delta_omega_mhz),
            num(r.chi_nl_mhz),
            opt(c.map(|c| c.n1)),
            opt(c.map(|c| c.n2)),
            opt(r.epsilon1_mhz()),
            opt(r.epsilon2_mhz()),
            opt(r.epsilon1_mhz().map(mhz_to_db)),
            opt(r.epsilon2_mhz().map(mhz_to_db)),
        ]);
    }
    t
}

pub fn bifurcation(args: &DeviceArgs, delta_c: f64) -> Result<Run, CliError> {
    let d = two_qubit(args)?;
    let p = d.params()?;
    let t = bifurcation_table("bifurcation", &p, d.kappa(), delta_c);
    Ok(Run::new("bifurcation", &d)
        .param("delta_c_mhz", json!(delta_c))
        .param("kappa_mhz", json!(d.kappa()))
        .table(t))
}

fn borders_table(name: &str, p: &SpectralParams, kappa: f64) -> Table {
    let states = LogicalState::all(p.qubits.len());
    let borders = exec::map(&states, |s| parity::stability_border(s, p, kappa));
    let mut t = Table::new(name, &["state", "excitations", "border_mhz", "proxy_mhz", "offset_mhz"]);
    for (s, b) in states.iter().zip(borders) {
        let b = b.ok();
        t.push(vec![
            s.to_string(),
            s.excitations().to_string(),
            opt(b.map(|b| b.numeric_mhz)),
            num(-steadystate::chi_shift(0.0, s, p)),
            opt(b.map(|b| b.numeric_mhz - b.proxy_mhz)),
        ]);
    }
    t
}

pub fn borders(args: &DeviceArgs) -> Result<Run, CliError> {
    let d = two_qubit(args)?;
    let p = d.params()?;
    let t = borders_table("borders", &p, d.kappa());
    Ok(Run::new("borders", &d).param("kappa_mhz", json!(d.kappa())).table(t))
}

fn plan_tables(prefix: &str, p: &SpectralParams, kappa: f64, simulate: Option<usize>) -> Result<Vec<Table>, CliError> {
    let plan = parity::parity_plan(p, kappa).map_err(parity_err)?;
    let sim = match simulate {
        Some(points) => Some(parity::simulate_plan(&plan, p, points, &SolverOptions::default()).map_err(parity_err)?),
        None => None,
    };

    let mut drives = Table::new(
        &format!("{prefix}drives"),
        &[
            "drive",
            "odd_class",
            "delta_c_mhz",
            "drive_ghz",
            "lower_state",
            "lower_border_mhz",
            "upper_state",
            "upper_border_mhz",
        ],
    );
    for (k, dr) in plan.drives.iter().enumerate() {
        drives.push(vec![
            (k + 1).to_string(),
            dr.odd_class.to_string(),
            num(dr.delta_c_mhz),
            num(dr.drive_ghz),
            dr.lower_state.clone(),
            num(dr.lower_border.numeric_mhz),
            dr.upper_state.clone(),
            num(dr.upper_border.numeric_mhz),
        ]);
    }

    let mut header: Vec<String> = vec!["state".into(), "parity".into()];
    for k in 1..=plan.drives.len() {
        header.push(format!("epsilon2_drive{k}_mhz"));
    }
    header.push("predicted".into());
    if sim.is_some() {
        header.extend(["simulated".into(), "n_photons_max".into()]);
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut states = Table::new(&format!("{prefix}states"), &header_refs);
    let (lo, hi) = plan.window_db();
    states.note(format!(
        "kappa = {} MHz; drive window {} .. {} MHz ({lo:.3} .. {hi:.3} dB); operating epsilon = {} MHz",
        plan.kappa_mhz, plan.epsilon_low_mhz, plan.epsilon_high_mhz, plan.epsilon_operating_mhz
    ));
    if let Some(s) = &sim {
        states.note(format!(
            "simulation: all classified = {}, contrast = {}",
            s.all_classified,
            s.contrast.map_or("n/a".to_string(), num)
        ));
    }
    for (k, pr) in plan.predictions.iter().enumerate() {
        let mut row = vec![pr.state.clone(), parity_str(pr.parity).into()];
        row.extend(pr.epsilon2_mhz.iter().map(|e| opt(*e)));
        row.push(parity_str(pr.classified).into());
        if let Some(s) = &sim {
            let st = &s.states[k];
            row.push(parity_str(st.classified).into());
            row.push(num(st.max_n()));
        }
        states.push(row);
    }
    Ok(vec![states, drives])
}

fn parity_str(p: parity::Parity) -> &'static str {
    match p {
        parity::Parity::Even => "even",
        parity::Parity::Odd => "odd",
    }
}

pub fn parity_plan(args: &DeviceArgs, simulate: bool, grid_points: usize) -> Result<Run, CliError> {
    let d = two_qubit(args)?;
    let p = d.params()?;
    check_points(grid_points, "simulation grid")?;
    let tables = plan_tables("", &p, d.kappa(), simulate.then_some(grid_points))?;
    let mut run = Run::new("parity-plan", &d)
        .param("kappa_mhz", json!(d.kappa()))
        .param("simulate", json!(simulate));
    if simulate {
        run = run.param("grid_points", json!(grid_points));
    }
    Ok(tables.into_iter().fold(run, Run::table))
}

/// (χ₁, χ₂) = g_i²/Δ_i of one qubit, MHz.
fn qubit_chis(p: &SpectralParams, qubit: usize) -> (f64, f64) {
    let q = &p.qubits[qubit];
    let chi = |i: usize| q.couplings_ghz[i] * q.couplings_ghz[i] / q.delta_ghz[i] * 1e3;
    (chi(0), chi(1))
}

fn gamma_table(name: &str, p: &SpectralParams, qubit: usize, epsilon: f64, delta_c: f64, kappas: &[f64]) -> Result<Table, CliError> {
    let (c1, c2) = qubit_chis(p, qubit);
    let mut t = Table::new(name, &["kappa_mhz", "printed_khz", "definitional_khz", "derived_khz", "rate_khz"]);
    t.note(format!(
        "epsilon = {epsilon} MHz, delta_c = {delta_c} MHz, chi1 = {c1} MHz, chi2 = {c2} MHz"
    ));
    for &k in kappas {
        let g = decoherence::leakage_dephasing_rate(&LeakageParams {
            epsilon_mhz: epsilon,
            delta_c_mhz: delta_c,
            kappa_mhz: k,
            chi1_mhz: c1,
            chi2_mhz: c2,
        })
        .map_err(decoherence_err)?;
        t.push(vec![num(k), num(g.printed_khz), num(g.definitional_khz), num(g.derived_khz), num(g.rate_khz())]);
    }
    Ok(t)
}

fn linspace(a: f64, b: f64, points: usize) -> Vec<f64> {
    steadystate::linear_grid(a, b, points)
}

pub fn decoherence(cmd: &DecoherenceCommand) -> Result<Run, CliError> {
    match cmd {
        DecoherenceCommand::Channels {
            device,
            qubit,
            n_min,
            n_max,
            points,
            out,
        } => {
            let d = two_qubit(device)?;
            check_qubit(&d, *qubit)?;
            check_points(*points, "photon-number grid")?;
            if !(*n_min > 0.0 && n_min < n_max) {
                return Err(validation("need 0 < --n-min < --n-max"));
            }
            let p = d.params()?;
            let (l1, l2) = (p.qubits[*qubit].lambda[0], p.qubits[*qubit].lambda[1]);
            let q = &d.device.qubits()[*qubit];
            let mut t = Table::new(
                "channels",
                &[
                    "n_photons",
                    "sx1_mhz",
                    "sx2_mhz",
                    "sz1_mhz",
                    "sz2_mhz",
                    "s1s2_mhz",
                    "s2_mhz",
                    "z1_mhz",
                    "z2_mhz",
                    "x1_mhz",
                    "x2_mhz",
                ],
            );
            t.note(format!("gamma1 = {} MHz, gamma_phi = {} MHz", q.gamma1_mhz, q.gamma_phi_mhz));
            let ns = std::iter::once(0.0).chain(steadystate::db_grid(mhz_to_db(*n_min), mhz_to_db(*n_max), *points));
            for n in ns {
                let r = decoherence::relaxation_coefficients(n, l1, l2, q.gamma1_mhz);
                let f = decoherence::dephasing_coefficients(n, l1, l2, q.gamma_phi_mhz);
                let mut row = vec![num(n)];
                row.extend(r.additional().iter().map(|(_, v)| num(*v)));
                row.extend(f.additional().iter().map(|(_, v)| num(*v)));
                t.push(row);
            }
            Ok(Run::new("decoherence channels", &d)
                .param("qubit", json!(qubit))
                .param("n_grid", json!([n_min, n_max, points]))
                .table(t)
                .with_sink(crate::sink(out)))
        }
        DecoherenceCommand::Rate {
            device,
            qubit,
            epsilon,
            delta_c,
            kappa_min,
            kappa_max,
            points,
            out,
        } => {
            let d = two_qubit(device)?;
            check_qubit(&d, *qubit)?;
            check_points(*points, "kappa grid")?;
            let p = d.params()?;
            let kappas = linspace(*kappa_min, *kappa_max, *points);
            let t = gamma_table("rate", &p, *qubit, *epsilon, *delta_c, &kappas)?;
            Ok(Run::new("decoherence rate", &d)
                .param("qubit", json!(qubit))
                .param("epsilon_mhz", json!(epsilon))
                .param("delta_c_mhz", json!(delta_c))
                .param("kappa_grid_mhz", json!([kappa_min, kappa_max, points]))
                .table(t)
                .with_sink(crate::sink(out)))
        }
        DecoherenceCommand::Trajectory {
            device,
            qubit,
            epsilon,
            delta_c,
            kappa_t_max,
            points,
            out,
        } => {
            let d = two_qubit(device)?;
            check_qubit(&d, *qubit)?;
            check_points(*points, "time grid")?;
            let p = d.params()?;
            let (c1, c2) = qubit_chis(&p, *qubit);
            let kappa = d.kappa();
            let lp = LeakageParams {
                epsilon_mhz: *epsilon,
                delta_c_mhz: *delta_c,
                kappa_mhz: kappa,
                chi1_mhz: c1,
                chi2_mhz: c2,
            };
            let q = &d.device.qubits()[*qubit];
            let gamma2 = q.gamma1_mhz + 0.5 * q.gamma_phi_mhz;
            let tilde = &p.qubits[*qubit].tilde_omega_ghz;
            let tilde_omega = (tilde[0] + 0.5 * tilde[1]) * 1e3;
            let grid = linspace(0.0, kappa_t_max / kappa, *points);
            let r = decoherence::leakage_trajectories(&grid, &lp, tilde_omega, gamma2, &LeakageInitial::default())
                .map_err(decoherence_err)?;
            let mut t = Table::new(
                "trajectory",
                &[
                    "t_us",
                    "kappa_t",
                    "abs_alpha1_closed",
                    "abs_alpha1_ode",
                    "abs_alpha0_closed",
                    "abs_alpha0_ode",
                    "ln_abs_c10_closed",
                    "ln_abs_c10_ode",
                ],
            );
            t.note(format!(
                "gamma2 = {gamma2} MHz, Gamma_Phi = {} kHz (printed form {} kHz)",
                r.gamma_phi.rate_khz(),
                r.gamma_phi.printed_khz
            ));
            if *kappa_t_max >= 30.0 {
                let slope = r.log_slope(10.0 / kappa, 30.0 / kappa);
                t.note(format!(
                    "slope of ln|c10| over kappa t in [10, 30]: {slope} MHz; expected {} MHz",
                    -(2.0 * gamma2 + r.gamma_phi.definitional_khz * 1e-3)
                ));
            }
            for tp in &r.trace {
                t.push(vec![
                    num(tp.t_us),
                    num(tp.t_us * kappa),
                    num(tp.closed.alpha1.norm()),
                    num(tp.integrated.alpha1.norm()),
                    num(tp.closed.alpha0.norm()),
                    num(tp.integrated.alpha0.norm()),
                    num(tp.closed.ln_c10_abs()),
                    num(tp.integrated.ln_c10_abs()),
                ]);
            }
            Ok(Run::new("decoherence trajectory", &d)
                .param("qubit", json!(qubit))
                .param("epsilon_mhz", json!(epsilon))
                .param("delta_c_mhz", json!(delta_c))
                .param("kappa_mhz", json!(kappa))
                .param("time_grid_kappa_t", json!([0.0, kappa_t_max, points]))
                .table(t)
                .with_sink(crate::sink(out)))
        }
    }
}

const HERMITICITY_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const UNIQUENESS_TOL: f64 = 1e-6;
const UNIQUENESS_CUTOFF: usize = 5;
const COMMUTATOR_TOL: f64 = 1e-8;
const ORACLE_DEVIATION_TOL: f64 = 0.10;
const ORACLE_TRUNCATION_TOL: f64 = 1e-3;
const ORACLE_MAX_PHOTONS: f64 = 0.5;

pub fn oracle_check(args: &DeviceArgs, cutoff: usize, epsilons: &[f64]) -> Result<Run, CliError> {
    let d = two_qubit(args)?;
    if epsilons.is_empty() {
        return Err(validation("--epsilons must not be empty"));
    }
    let mut t = Table::new("oracle_check", &["check", "value", "tolerance", "pass"]);
    let mut failed = Vec::new();
    let mut record = |t: &mut Table, name: String, value: f64, tol: f64, ok: bool| {
        if !ok {
            failed.push(name.clone());
        }
        t.push(vec![name, num(value), num(tol), ok.to_string()]);
    };

    let c = d.device.cavity();
    let single = DeviceSpec::new(
        CavitySpec::new(c.omega_c_ghz, c.kappa_mhz).map_err(validation)?,
        vec![d.device.qubits()[0]],
        d.device.levels(),
    )
    .map_err(validation)?;
    let drive = DriveSpec::new(epsilons[0], 0.0).map_err(validation)?;
    let all = QubitChannels {
        relaxation: true,
        dephasing: true,
    };
    let sys = oracle::build_system(&single, &drive, cutoff, all).map_err(oracle_err)?;
    let h = sys.hermiticity_error();
    record(&mut t, "hamiltonian_hermiticity".into(), h, HERMITICITY_TOL, h <= HERMITICITY_TOL);
    let defect = oracle::trace_defect(&oracle::liouvillian(&sys), sys.dim());
    record(&mut t, "trace_conservation".into(), defect, TRACE_TOL, defect <= TRACE_TOL);
    let small = oracle::build_system(&single, &drive, UNIQUENESS_CUTOFF, QubitChannels::default()).map_err(oracle_err)?;
    let ratio = oracle::uniqueness_ratio(&small).map_err(oracle_err)?;
    record(&mut t, "kernel_singular_value_ratio".into(), ratio, UNIQUENESS_TOL, ratio <= UNIQUENESS_TOL);

    for r in oracle::commutator_check(&d.device).map_err(oracle_err)? {
        let e = r.relative_error();
        record(
            &mut t,
            format!("commutator_q{}_t{}_relative_error", r.qubit, r.transition),
            e,
            COMMUTATOR_TOL,
            e <= COMMUTATOR_TOL,
        );
    }

    let rows = oracle::compare_low_branch(&single, epsilons, 0.0, cutoff).map_err(|e| match e {
        ComparisonError::Oracle(o) => oracle_err(o),
        ComparisonError::Spectrum(s) => spectrum_err(s),
        ComparisonError::Solve(s) => solve_err(s),
    })?;
    for r in rows {
        if r.n_semiclassical > ORACLE_MAX_PHOTONS {
            t.note(format!(
                "epsilon = {} MHz gives n = {} > {ORACLE_MAX_PHOTONS}, outside the linear regime",
                r.epsilon_mhz, r.n_semiclassical
            ));
        }
        let dev = r.relative_deviation();
        record(
            &mut t,
            format!("photon_number_deviation_eps_{}", r.epsilon_mhz),
            dev,
            ORACLE_DEVIATION_TOL,
            dev <= ORACLE_DEVIATION_TOL,
        );
        let tr = r.truncation_change();
        record(
            &mut t,
            format!("truncation_change_eps_{}", r.epsilon_mhz),
            tr,
            ORACLE_TRUNCATION_TOL,
            tr < ORACLE_TRUNCATION_TOL,
        );
    }
    let mut run = Run::new("oracle-check", &d)
        .param("cutoff", json!(cutoff))
        .param("epsilons_mhz", json!(epsilons))
        .table(t);
    if !failed.is_empty() {
        run.failure = Some(format!("oracle checks failed: {}", failed.join(", ")));
    }
    Ok(run)
}

type StateSweeps = Vec<(LogicalState, Vec<SweepResult>)>;

fn sweeps_table(name: &str, p: &SpectralParams, kappa: f64, dirs: &[Direction]) -> Result<(Table, StateSweeps), CliError> {
    let states = LogicalState::all(p.qubits.len());
    let grid = db_grid(25.0, 45.0, 400);
    let opts = SolverOptions::default();
    let results = exec::try_map(&states, |s| {
        dirs.iter()
            .map(|&dir| steadystate::sweep_drive(&grid, dir, s, p, kappa, 0.0, &opts))
            .collect::<Result<Vec<_>, _>>()
            .map(|r| (s.clone(), r))
    })
    .map_err(sweep_err)?;
    let mut t = Table::new(name, &SWEEP_HEADER);
    t.note(format!("kappa = {kappa} MHz, delta_c = 0"));
    for (s, rs) in &results {
        for r in rs {
            sweep_rows(&mut t, &s.to_string(), r);
        }
    }
    Ok((t, results))
}

fn epsilon2_scan(name: &str, p: &SpectralParams, kappa: f64, from: f64, to: f64, points: usize) -> Table {
    let states = LogicalState::all(p.qubits.len());
    let models: Vec<QuarticModel> = states
        .iter()
        .map(|s| QuarticModel::new(s, p).expect("state matches device"))
        .collect();
    let mut header = vec!["delta_c_mhz".to_string()];
    header.extend(states.iter().map(|s| format!("epsilon2_{s}_mhz")));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new(name, &refs);
    t.note(format!("kappa = {kappa} MHz; empty cells: no bifurcation"));
    let deltas = linspace(from, to, points);
    let rows = exec::map(&deltas, |&dc| {
        let mut row = vec![num(dc)];
        row.extend(models.iter().map(|m| opt(m.bifurcation(kappa, dc).epsilon2_mhz())));
        row
    });
    for r in rows {
        t.push(r);
    }
    t
}

pub fn repro(figure: Figure, args: &DeviceArgs) -> Result<Run, CliError> {
    let four = matches!(figure, Figure::Fig4 | Figure::Fig5);
    let d = if four {
        load(args, four_qubit_ten_levels, "four-qubit-10-levels")?
    } else {
        two_qubit(args)?
    };
    let p = d.params()?;
    let kappa = d.kappa();
    let id = format!("{figure:?}").to_lowercase();
    let run = Run::new("repro", &d).param("figure", json!(id));
    Ok(match figure {
        Figure::Fig2 | Figure::Fig4 => {
            let dirs: &[Direction] = if four { &[Direction::Up] } else { &[Direction::Up, Direction::Down] };
            let (sweeps, results) = sweeps_table(&format!("{id}_sweeps"), &p, kappa, dirs)?;
            let mut crit = Table::new(
                &format!("{id}_critical"),
                &["state", "epsilon1_db", "epsilon2_db", "up_jump_db", "down_jump_db"],
            );
            for (s, rs) in &results {
                let b = stability::bifurcation(s, &p, kappa, 0.0);
                let jump = |dir: Direction| {
                    rs.iter()
                        .find(|r| r.direction == dir)
                        .and_then(|r| r.jump_epsilon_mhz)
                        .map(mhz_to_db)
                };
                crit.push(vec![
                    s.to_string(),
                    opt(b.epsilon1_mhz().map(mhz_to_db)),
                    opt(b.epsilon2_mhz().map(mhz_to_db)),
                    opt(jump(Direction::Up)),
                    opt(jump(Direction::Down)),
                ]);
            }
            run.param("grid_db", json!([25.0, 45.0, 400]))
                .param("kappa_mhz", json!(kappa))
                .table(sweeps)
                .table(crit)
        }
        Figure::Fig3 | Figure::Fig5 => {
            let (from, to) = if four { (-80.0, 20.0) } else { (-60.0, 20.0) };
            let points = ((to - from) * 10.0) as usize + 1;
            let scan = epsilon2_scan(&format!("{id}_epsilon2"), &p, kappa, from, to, points);
            let borders = borders_table(&format!("{id}_borders"), &p, kappa);
            let plan = plan_tables(&format!("{id}_plan_"), &p, kappa, None)?;
            let run = run
                .param("delta_c_grid_mhz", json!([from, to, points]))
                .param("kappa_mhz", json!(kappa))
                .table(scan)
                .table(borders);
            plan.into_iter().fold(run, Run::table)
        }
        Figure::Table1 => {
            let kappa = args.kappa_mhz.unwrap_or(TABLE_KAPPA_MHZ);
            let mut t = Table::new("table1", &["state", "epsilon2_mhz", "epsilon2_db", "reference_db", "difference_db"]);
            t.note(format!("kappa = {kappa} MHz, delta_c = 0"));
            for (s, want) in TABLE_REFERENCE_DB {
                let st = parse_state(s, d.device.n_qubits())?;
                let e2 = stability::bifurcation(&st, &p, kappa, 0.0).epsilon2_mhz();
                let db = e2.map(mhz_to_db);
                t.push(vec![s.to_string(), opt(e2), opt(db), num(want), opt(db.map(|x| x - want))]);
            }
            run.param("kappa_mhz", json!(kappa)).table(t)
        }
        Figure::GammaPhi => {
            let kappas = linspace(1.0, 5.0, 41);
            let t = gamma_table("gamma_phi", &p, 0, 10.0, -20.0, &kappas)?;
            run.param("epsilon_mhz", json!(10.0))
                .param("delta_c_mhz", json!(-20.0))
                .param("kappa_grid_mhz", json!([1.0, 5.0, 41]))
                .table(t)
        }
    })
}
