use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiber::{FiberLink, Wavepacket, DEFAULT_PMD_EXPONENT};
use crate::qkd::{KeyRateParams, ReachModel, DEFAULT_VISIBILITY_THRESHOLD};
use crate::source::{DetectorSpec, SourceSpec};

pub const SCHEMA_VERSION: u32 = 1;

/// Birefringence of Bob's fiber and how it is handled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    #[serde(default = "default_pmd_exponent")]
    pub pmd_exponent: f64,
    /// Principal axis on the Poincaré sphere. Drawn from `pmd_axis_seed`
    /// when absent.
    #[serde(default)]
    pub pmd_axis: Option<[f64; 3]>,
    #[serde(default)]
    pub pmd_axis_seed: u64,
    #[serde(default)]
    pub drift_rate_rad_per_hour: f64,
    #[serde(default)]
    pub drift_hours: f64,
    #[serde(default)]
    pub drift_seed: u64,
    #[serde(default = "yes")]
    pub compensate: bool,
}

fn default_pmd_exponent() -> f64 {
    DEFAULT_PMD_EXPONENT
}

fn yes() -> bool {
    true
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            pmd_exponent: DEFAULT_PMD_EXPONENT,
            pmd_axis: None,
            pmd_axis_seed: 0,
            drift_rate_rad_per_hour: 0.0,
            drift_hours: 0.0,
            drift_seed: 0,
            compensate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementConfig {
    /// Displacement of the gate used to measure background.
    pub delayed_gate_offset_ns: f64,
    /// Acquisition time per setting in tomography.
    pub tomography_duration_s: f64,
    /// Independent tomography runs averaged per length.
    pub tomography_repeats: u32,
    /// Acquisition time per setting for visibility records.
    pub visibility_duration_s: f64,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        Self {
            delayed_gate_offset_ns: 10.0,
            tomography_duration_s: 10.0,
            tomography_repeats: 32,
            visibility_duration_s: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub n_gates: u64,
    #[serde(default = "yes")]
    pub multipairs: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            n_gates: 100_000_000,
            multipairs: true,
        }
    }
}

/// Reach estimate with a replacement detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReachConfig {
    #[serde(default)]
    pub detector_override: Option<DetectorSpec>,
    pub link: ReachModel,
    #[serde(default = "default_threshold")]
    pub visibility_threshold: f64,
    #[serde(default = "default_sweep")]
    pub sensitivity_thresholds: Vec<f64>,
}

fn default_threshold() -> f64 {
    DEFAULT_VISIBILITY_THRESHOLD
}

fn default_sweep() -> Vec<f64> {
    vec![0.5, 0.6, 0.7, 0.71, 0.8]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    pub name: String,
    pub source: SourceSpec,
    pub wavepacket: Wavepacket,
    /// Bob's gated detector. Alice's detector enters through the source
    /// singles rate.
    pub detector: DetectorSpec,
    /// Fiber to Bob; absent for back-to-back measurements.
    #[serde(default)]
    pub link: Option<FiberLink>,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub measurement: MeasurementConfig,
    #[serde(default)]
    pub lengths_km: Vec<f64>,
    #[serde(default)]
    pub keyrate: KeyRateParams,
    #[serde(default)]
    pub reach: Option<ReachConfig>,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl Scenario {
    /// Parses a scenario, reporting the JSON location and field path of the
    /// first problem.
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scn: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            Error::Config {
                path: format!("{origin}:{}:{}", inner.line(), inner.column()),
                message: format!("at `{}`: {inner}", e.path()),
            }
        })?;
        if scn.version != SCHEMA_VERSION {
            return Err(Error::Config {
                path: origin.to_string(),
                message: format!("unsupported schema version {} (expected {SCHEMA_VERSION})", scn.version),
            });
        }
        Ok(scn)
    }

    /// Loads and validates a scenario file, returning non-fatal warnings.
    pub fn load(path: &Path) -> Result<(Self, Vec<String>)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let origin = path.display().to_string();
        let scn = Self::from_json(&text, &origin)?;
        let warnings = scn.validate().map_err(|e| Error::Config {
            path: origin,
            message: e.to_string(),
        })?;
        Ok((scn, warnings))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Checks every unit-bearing field; returns warnings for settings that
    /// are legal but probably unintended.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.source.validate()?;
        self.wavepacket.validate()?;
        self.detector.validate()?;
        let mut warnings = Vec::new();
        let link_len = self.link.as_ref().map_or(0.0, FiberLink::length_km);
        for &l in &self.lengths_km {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::InvalidInput(format!("invalid length {l} km")));
            }
            if l > link_len + 1e-9 {
                warnings.push(format!("length {l} km exceeds the {link_len} km link; the link end is used"));
            }
        }
        let ch = &self.channel;
        if !(ch.pmd_exponent > 0.0 && ch.pmd_exponent.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid PMD exponent {}", ch.pmd_exponent)));
        }
        if let Some(axis) = ch.pmd_axis {
            crate::fiber::axes_from_bloch(axis)?;
        }
        if !(ch.drift_hours >= 0.0 && ch.drift_rate_rad_per_hour >= 0.0) {
            return Err(Error::InvalidInput("drift rate and time must be non-negative".into()));
        }
        if ch.drift_hours > 0.0 && ch.drift_rate_rad_per_hour > 0.0 && !ch.compensate {
            warnings.push("polarization drift without compensation".into());
        }
        let m = &self.measurement;
        if !(m.tomography_duration_s > 0.0 && m.visibility_duration_s > 0.0) || m.tomography_repeats == 0 {
            return Err(Error::InvalidInput("measurement durations and repeats must be positive".into()));
        }
        if m.delayed_gate_offset_ns.abs() < 3.0 * self.detector.gate.width_ns {
            return Err(Error::InvalidInput(format!(
                "delayed gate offset {} ns is less than three gate widths",
                m.delayed_gate_offset_ns
            )));
        }
        self.keyrate.validate()?;
        if let Some(r) = &self.reach {
            if let Some(d) = &r.detector_override {
                d.validate()?;
            }
            if !(r.link.loss_db_per_km >= 0.0 && (0.0..1.0).contains(&r.link.contrast_decay_per_100km)) {
                return Err(Error::InvalidInput("invalid reach link".into()));
            }
            for &t in std::iter::once(&r.visibility_threshold).chain(&r.sensitivity_thresholds) {
                if !(t > 0.0 && t < 1.0) {
                    return Err(Error::InvalidInput(format!("visibility threshold {t} outside (0, 1)")));
                }
            }
        }
        if self.oracle.n_gates == 0 {
            return Err(Error::InvalidInput("oracle needs at least one gate".into()));
        }
        Ok(warnings)
    }
}
