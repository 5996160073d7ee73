//! Simulation and analysis of polarization-entangled photon pairs distributed
//! over optical fiber.

pub mod error;
pub mod fiber;
pub mod linalg;
pub mod montecarlo;
pub mod optimize;
pub mod polarization;
pub mod qkd;
pub mod scenario;
pub mod source;
pub mod tomography;

pub use error::{Error, Result};
pub use polarization::{AnalyzerSetting, Basis, Bell, PolarizationChannel, Qubit, TwoQubitState};
