use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqed-parity")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
        .display()
        .to_string()
}

#[test]
fn spectrum_to_stdout_succeeds() {
    let o = run(&["spectrum"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("qubit,transition,omega_ghz,g_ghz,tilde_omega_ghz,delta_ghz,lambda,chi_mhz\n"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn unknown_subcommand_exits_one() {
    let o = run(&["bogus"]);
    assert_eq!(code(&o), 1);
    assert!(!o.stderr.is_empty());
}

#[test]
fn invalid_input_exits_one() {
    assert_eq!(code(&run(&["sweep", "--state", "012"])), 1);
    assert_eq!(code(&run(&["sweep", "--state", "0"])), 1);
    assert_eq!(code(&run(&["spectrum", "--kappa-mhz=-1"])), 1);
    assert_eq!(code(&run(&["spectrum", "--levels", "1"])), 1);
    assert_eq!(code(&run(&["spectrum", "--config", "/nonexistent/device.toml"])), 1);
    assert_eq!(code(&run(&["sweep", "--state", "01", "--from-db", "40", "--to-db", "30"])), 1);
    assert_eq!(code(&run(&["decoherence", "rate", "--qubit", "7"])), 1);
    assert_eq!(code(&run(&["oracle-check", "--cutoff", "2"])), 1);
}

#[test]
fn bad_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    fs::write(&p, "levels = 3\n[cavity]\nomega_c_ghz = 5.0\n").unwrap();
    assert_eq!(code(&run(&["spectrum", "--config", p.to_str().unwrap()])), 1);
}

#[test]
fn numerical_failure_exits_two() {
    assert_eq!(code(&run(&["parity-plan", "--kappa-mhz", "5000"])), 2);
    let o = run(&["oracle-check", "--cutoff", "4", "--epsilons", "30"]);
    assert_eq!(code(&o), 2);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("photon_number_deviation_eps_30"));
}

#[test]
fn file_output_has_manifest_line_and_units() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = run(&[
        "sweep",
        "--config",
        &config("two_qubit.toml"),
        "--state",
        "10",
        "--points",
        "21",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# manifest: sweep.csv.manifest.json"));
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(
        header,
        "state,direction,epsilon_mhz,epsilon_db,n_photons,branch,chi_mhz,effective_cavity_ghz"
    );
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 21);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sweep.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "sweep");
    assert_eq!(manifest["parameters"]["state"], "10");
    assert!(manifest["device"].as_str().unwrap().ends_with("two_qubit.toml"));
}

#[test]
fn csv_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for k in 0..2 {
        let d = dir.path().join(format!("run{k}"));
        let o = run(&["repro", "fig3", "--out-dir", d.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        let mut files: Vec<_> = fs::read_dir(&d)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect();
        files.sort();
        texts.push(files.iter().map(|p| fs::read(p).unwrap()).collect::<Vec<_>>());
    }
    assert_eq!(texts[0].len(), 4);
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn json_output_parses() {
    let o = run(&["--json", "bifurcation", "--delta-c", "-20"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["name"], "bifurcation");
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    assert_eq!(v["rows"][0]["state"], "00");
}

#[test]
fn four_qubit_config_plans_two_drives() {
    let o = run(&["parity-plan", "--config", &config("four_qubit.toml")]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let drives = text.split("drive,odd_class").nth(1).expect("drives table");
    assert_eq!(drives.lines().skip(1).filter(|l| !l.is_empty()).count(), 2);
}

#[test]
fn table_repro_uses_fixed_kappa() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["repro", "table1", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    assert!(text.contains("# kappa = 5 MHz"));
    assert!(dir.path().join("manifest.json").exists());
}
