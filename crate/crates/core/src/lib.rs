//! Nonlinear dispersive readout of multilevel qubits in a driven cavity, and
//! planning of parity measurements built on it.
//!
//! Units: qubit and cavity frequencies in GHz; κ, γ, ε, δ_c and all shifts in
//! MHz. Every frequency is linear (ω/2π).

pub mod decoherence;
pub mod exec;
pub mod model;
pub mod oracle;
pub mod parity;
pub mod spectrum;
pub mod stability;
pub mod steadystate;

pub use model::{CavitySpec, DeviceSpec, DriveSpec, LogicalState, QubitSpec};
pub use spectrum::{detunings_and_lambdas, SpectralParams};
