//! Device description, logical states and configuration loading.
//!
//! Frequencies are linear (ω/2π). Qubit and cavity frequencies are in GHz,
//! rates, drive strengths and detunings δ_c are in MHz.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest level count accepted by [`DeviceSpec`].
pub const MAX_LEVELS: usize = 12;
/// Level count used when a config omits `levels`.
pub const DEFAULT_LEVELS: usize = 3;
/// Default "≪" factor for [`DeviceSpec::hierarchy_warnings`].
pub const DEFAULT_HIERARCHY_FACTOR: f64 = 5.0;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> ModelError {
    ModelError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitSpec {
    pub omega10_ghz: f64,
    pub omega21_ghz: f64,
    pub g1_ghz: f64,
    #[serde(default)]
    pub gamma1_mhz: f64,
    #[serde(default)]
    pub gamma_phi_mhz: f64,
}

impl QubitSpec {
    pub fn new(
        omega10_ghz: f64,
        omega21_ghz: f64,
        g1_ghz: f64,
        gamma1_mhz: f64,
        gamma_phi_mhz: f64,
    ) -> Result<Self, ModelError> {
        let q = Self {
            omega10_ghz,
            omega21_ghz,
            g1_ghz,
            gamma1_mhz,
            gamma_phi_mhz,
        };
        q.validate("qubit")?;
        Ok(q)
    }

    /// ω₂₁ − ω₁₀ in GHz.
    pub fn anharmonicity_ghz(&self) -> f64 {
        self.omega21_ghz - self.omega10_ghz
    }

    fn validate(&self, path: &str) -> Result<(), ModelError> {
        positive(self.omega10_ghz, &format!("{path}.omega10_ghz"))?;
        positive(self.omega21_ghz, &format!("{path}.omega21_ghz"))?;
        positive(self.g1_ghz, &format!("{path}.g1_ghz"))?;
        non_negative(self.gamma1_mhz, &format!("{path}.gamma1_mhz"))?;
        non_negative(self.gamma_phi_mhz, &format!("{path}.gamma_phi_mhz"))?;
        if self.anharmonicity_ghz() == 0.0 {
            return Err(invalid(
                format!("{path}.omega21_ghz"),
                "zero anharmonicity (omega21 == omega10)",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySpec {
    pub omega_c_ghz: f64,
    pub kappa_mhz: f64,
}

impl CavitySpec {
    pub fn new(omega_c_ghz: f64, kappa_mhz: f64) -> Result<Self, ModelError> {
        let c = Self {
            omega_c_ghz,
            kappa_mhz,
        };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<(), ModelError> {
        positive(self.omega_c_ghz, "cavity.omega_c_ghz")?;
        positive(self.kappa_mhz, "cavity.kappa_mhz")
    }
}

fn positive(x: f64, field: &str) -> Result<(), ModelError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and > 0, got {x}")))
    }
}

fn non_negative(x: f64, field: &str) -> Result<(), ModelError> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be finite and >= 0, got {x}")))
    }
}

/// On-disk layout: `[cavity]`, repeated `[[qubit]]`, top-level `levels`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceFile {
    #[serde(default = "default_levels")]
    levels: usize,
    cavity: CavitySpec,
    #[serde(rename = "qubit")]
    qubits: Vec<QubitSpec>,
}

fn default_levels() -> usize {
    DEFAULT_LEVELS
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    cavity: CavitySpec,
    qubits: Vec<QubitSpec>,
    levels: usize,
}

/// One violated "a ≪ b" relation of the rate hierarchy.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyWarning {
    pub qubit: usize,
    pub relation: &'static str,
    pub smaller_mhz: f64,
    pub larger_mhz: f64,
}

impl fmt::Display for HierarchyWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "qubit {}: {} not satisfied ({:.4} MHz vs {:.4} MHz)",
            self.qubit, self.relation, self.smaller_mhz, self.larger_mhz
        )
    }
}

impl DeviceSpec {
    pub fn new(
        cavity: CavitySpec,
        qubits: Vec<QubitSpec>,
        levels: usize,
    ) -> Result<Self, ModelError> {
        cavity.validate()?;
        if qubits.is_empty() {
            return Err(invalid("qubit", "at least one qubit is required"));
        }
        if !(3..=MAX_LEVELS).contains(&levels) {
            return Err(invalid(
                "levels",
                format!("must be in 3..={MAX_LEVELS}, got {levels}"),
            ));
        }
        for (j, q) in qubits.iter().enumerate() {
            q.validate(&format!("qubit[{j}]"))?;
            for (i, w) in transition_frequencies(q, levels).iter().enumerate() {
                if *w == cavity.omega_c_ghz {
                    return Err(invalid(
                        format!("qubit[{j}]"),
                        format!("transition {} is resonant with the cavity", i + 1),
                    ));
                }
            }
        }
        Ok(Self {
            cavity,
            qubits,
            levels,
        })
    }

    pub fn cavity(&self) -> &CavitySpec {
        &self.cavity
    }

    pub fn qubits(&self) -> &[QubitSpec] {
        &self.qubits
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn n_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn kappa_mhz(&self) -> f64 {
        self.cavity.kappa_mhz
    }

    pub fn with_kappa(&self, kappa_mhz: f64) -> Result<Self, ModelError> {
        Self::new(
            CavitySpec::new(self.cavity.omega_c_ghz, kappa_mhz)?,
            self.qubits.clone(),
            self.levels,
        )
    }

    pub fn with_levels(&self, levels: usize) -> Result<Self, ModelError> {
        Self::new(self.cavity, self.qubits.clone(), levels)
    }

    /// Checks γ₁, γ_φ ≪ κ ≪ g²/|Δ| ≪ g ≪ ω_c for every transition, where
    /// "a ≪ b" means `factor * a <= b`.
    pub fn hierarchy_warnings(&self, factor: f64) -> Vec<HierarchyWarning> {
        let mut out = Vec::new();
        let kappa = self.cavity.kappa_mhz;
        let wc = self.cavity.omega_c_ghz * 1e3;
        let mut check = |qubit, relation, a: f64, b: f64| {
            if factor * a.abs() > b.abs() {
                out.push(HierarchyWarning {
                    qubit,
                    relation,
                    smaller_mhz: a,
                    larger_mhz: b,
                });
            }
        };
        for (j, q) in self.qubits.iter().enumerate() {
            check(j, "gamma1 << kappa", q.gamma1_mhz, kappa);
            check(j, "gamma_phi << kappa", q.gamma_phi_mhz, kappa);
            let ws = transition_frequencies(q, self.levels);
            let gs = coupling_ladder(q.g1_ghz, self.levels);
            for (w, g) in ws.iter().zip(&gs) {
                let g = g * 1e3;
                let delta = w * 1e3 - wc;
                let disp = g * g / delta.abs();
                check(j, "kappa << g^2/|Delta|", kappa, disp);
                check(j, "g^2/|Delta| << g", disp, g);
                check(j, "g << omega_c", g, wc);
            }
        }
        out
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ModelError> {
        let file: DeviceFile = toml::from_str(text)?;
        Self::new(file.cavity, file.qubits, file.levels)
    }

    pub fn to_toml_string(&self) -> String {
        let file = DeviceFile {
            levels: self.levels,
            cavity: self.cavity,
            qubits: self.qubits.clone(),
        };
        toml::to_string(&file).expect("device spec is always serializable")
    }
}

/// Parses and validates a device config, logging hierarchy warnings.
pub fn load_device(config_text: &str) -> Result<DeviceSpec, ModelError> {
    let device = DeviceSpec::from_toml_str(config_text)?;
    for w in device.hierarchy_warnings(DEFAULT_HIERARCHY_FACTOR) {
        log::warn!("parameter hierarchy: {w}");
    }
    Ok(device)
}

/// g_i = √i · g₁ for i = 1..M−1.
pub fn coupling_ladder(g1: f64, levels: usize) -> Vec<f64> {
    (1..levels).map(|i| (i as f64).sqrt() * g1).collect()
}

/// ω_{i,i−1} for i = 1..M−1 with constant anharmonicity above ω₂₁.
pub fn transition_frequencies(q: &QubitSpec, levels: usize) -> Vec<f64> {
    let a = q.anharmonicity_ghz();
    (1..levels)
        .map(|i| match i {
            1 => q.omega10_ghz,
            2 => q.omega21_ghz,
            _ => q.omega10_ghz + (i - 1) as f64 * a,
        })
        .collect()
}

/// Computational-basis label; `bits[j]` is qubit j.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LogicalState {
    bits: Vec<u8>,
}

/// Per-qubit ⟨σ_{z,i}⟩ and ⟨Π_i⟩; index 0 of `occupation` is level 0,
/// index i−1 of `sigma_z` is transition i.
#[derive(Debug, Clone, PartialEq)]
pub struct QubitExpectations {
    pub sigma_z: Vec<f64>,
    pub occupation: Vec<f64>,
}

impl LogicalState {
    pub fn new(bits: Vec<u8>) -> Result<Self, ModelError> {
        if bits.is_empty() {
            return Err(invalid("state", "empty bit string"));
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(invalid("state", format!("bit value {b} is not 0 or 1")));
        }
        Ok(Self { bits })
    }

    /// Bits from the leftmost character: "01" has qubit 0 in |0⟩.
    pub fn parse(s: &str) -> Result<Self, ModelError> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(invalid("state", format!("'{s}' is not a bit string"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(bits)
    }

    pub fn from_index(index: usize, n_qubits: usize) -> Self {
        let bits = (0..n_qubits)
            .map(|j| ((index >> (n_qubits - 1 - j)) & 1) as u8)
            .collect();
        Self { bits }
    }

    /// All 2^N states in binary order.
    pub fn all(n_qubits: usize) -> Vec<Self> {
        (0..1usize << n_qubits)
            .map(|k| Self::from_index(k, n_qubits))
            .collect()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn n_qubits(&self) -> usize {
        self.bits.len()
    }

    pub fn excitations(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn is_odd(&self) -> bool {
        self.excitations() % 2 == 1
    }

    /// Level occupations and σ_z expectations for every qubit, M ≥ 2.
    pub fn expectations(&self, levels: usize) -> Vec<QubitExpectations> {
        self.bits
            .iter()
            .map(|&b| {
                let mut occupation = vec![0.0; levels];
                occupation[b as usize] = 1.0;
                let sigma_z = (1..levels)
                    .map(|i| occupation[i] - occupation[i - 1])
                    .collect();
                QubitExpectations {
                    sigma_z,
                    occupation,
                }
            })
            .collect()
    }
}

impl fmt::Display for LogicalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Drive strength ε and detuning δ_c = ω_c − ω_d, both in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub epsilon_mhz: f64,
    pub delta_c_mhz: f64,
}

impl DriveSpec {
    pub fn new(epsilon_mhz: f64, delta_c_mhz: f64) -> Result<Self, ModelError> {
        non_negative(epsilon_mhz, "drive.epsilon_mhz")?;
        if !delta_c_mhz.is_finite() {
            return Err(invalid("drive.delta_c_mhz", "must be finite"));
        }
        Ok(Self {
            epsilon_mhz,
            delta_c_mhz,
        })
    }
}

/// Two-qubit device of the two-qubit parity example, κ = 1 MHz.
pub fn two_qubit_reference() -> DeviceSpec {
    DeviceSpec::new(
        CavitySpec {
            omega_c_ghz: 5.005,
            kappa_mhz: 1.0,
        },
        vec![
            QubitSpec {
                omega10_ghz: 4.297,
                omega21_ghz: 4.071,
                g1_ghz: 0.12,
                gamma1_mhz: 0.01,
                gamma_phi_mhz: 0.01,
            },
            QubitSpec {
                omega10_ghz: 4.094,
                omega21_ghz: 3.868,
                g1_ghz: 0.12,
                gamma1_mhz: 0.01,
                gamma_phi_mhz: 0.01,
            },
        ],
        DEFAULT_LEVELS,
    )
    .expect("reference device is valid")
}

/// Four identical qubits sharing one cavity, κ = 1 MHz.
pub fn four_qubit_reference() -> DeviceSpec {
    let q = QubitSpec {
        omega10_ghz: 4.297,
        omega21_ghz: 4.071,
        g1_ghz: 0.12,
        gamma1_mhz: 0.01,
        gamma_phi_mhz: 0.01,
    };
    DeviceSpec::new(
        CavitySpec {
            omega_c_ghz: 5.005,
            kappa_mhz: 1.0,
        },
        vec![q; 4],
        DEFAULT_LEVELS,
    )
    .expect("reference device is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_QUBIT: &str = r#"
levels = 3

[cavity]
omega_c_ghz = 5.005
kappa_mhz = 1.0

[[qubit]]
omega10_ghz = 4.297
omega21_ghz = 4.071
g1_ghz = 0.12

[[qubit]]
omega10_ghz = 4.094
omega21_ghz = 3.868
g1_ghz = 0.12
"#;

    #[test]
    fn loads_two_qubit_config() {
        let d = load_device(TWO_QUBIT).unwrap();
        assert_eq!(d.n_qubits(), 2);
        assert_eq!(d.levels(), 3);
        assert_eq!(d.qubits()[1].omega10_ghz, 4.094);
    }

    #[test]
    fn rejects_zero_coupling() {
        let text = TWO_QUBIT.replacen("g1_ghz = 0.12", "g1_ghz = 0.0", 1);
        let err = load_device(&text).unwrap_err();
        assert!(err.to_string().contains("qubit[0].g1_ghz"), "{err}");
    }

    #[test]
    fn rejects_zero_anharmonicity() {
        let text = TWO_QUBIT.replacen("omega21_ghz = 4.071", "omega21_ghz = 4.297", 1);
        let err = load_device(&text).unwrap_err();
        assert!(err.to_string().contains("anharmonicity"), "{err}");
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = TWO_QUBIT.replacen("kappa_mhz = 1.0", "kappa_mhz = 1.0\nkappa = 2.0", 1);
        assert!(matches!(load_device(&text), Err(ModelError::Parse(_))));
    }

    #[test]
    fn rejects_bad_level_count() {
        let text = TWO_QUBIT.replacen("levels = 3", "levels = 13", 1);
        assert!(load_device(&text).is_err());
        let text = TWO_QUBIT.replacen("levels = 3", "levels = 2", 1);
        assert!(load_device(&text).is_err());
    }

    #[test]
    fn coupling_ladder_values() {
        let g = coupling_ladder(0.12, 3);
        assert_eq!(g.len(), 2);
        assert!((g[1] - 0.169706).abs() < 1e-6);
        assert_eq!(coupling_ladder(0.3, 2), vec![0.3]);
        assert!((coupling_ladder(0.12, 4)[2] - 0.207846).abs() < 1e-6);
    }

    #[test]
    fn transition_ladder_extrapolates() {
        let q = QubitSpec::new(4.297, 4.071, 0.12, 0.0, 0.0).unwrap();
        assert_eq!(transition_frequencies(&q, 3), vec![4.297, 4.071]);
        assert!((transition_frequencies(&q, 4)[2] - 3.845).abs() < 1e-12);
    }

    #[test]
    fn state_expectations() {
        let s = LogicalState::parse("01").unwrap();
        let e = s.expectations(3);
        assert_eq!(e[0].sigma_z, vec![-1.0, 0.0]);
        assert_eq!(e[1].sigma_z, vec![1.0, -1.0]);
        assert_eq!(e[1].occupation, vec![0.0, 1.0, 0.0]);
        let e = LogicalState::parse("1").unwrap().expectations(10);
        assert_eq!(e[0].sigma_z, vec![1.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn state_enumeration_order() {
        let names: Vec<_> = LogicalState::all(2).iter().map(|s| s.to_string()).collect();
        assert_eq!(names, ["00", "01", "10", "11"]);
        assert!(LogicalState::parse("012").is_err());
    }

    #[test]
    fn reference_device_satisfies_hierarchy() {
        assert!(two_qubit_reference()
            .hierarchy_warnings(DEFAULT_HIERARCHY_FACTOR)
            .is_empty());
    }
}
