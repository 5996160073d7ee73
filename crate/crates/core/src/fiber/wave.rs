use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Ket2, Mat2};
use crate::polarization::PolarizationChannel;

/// Speed of light in nm·GHz.
const C_NM_GHZ: f64 = 299_792_458.0;
const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;
/// Default constant κ in γ = exp(−κ τ_PMD² / τ_coh²).
pub const DEFAULT_PMD_EXPONENT: f64 = 0.5;

/// Spectral and temporal description of the photon sent through the fiber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WavepacketConfig")]
pub struct Wavepacket {
    pub center_wavelength_nm: f64,
    pub delta_lambda_nm: f64,
    pub delta_nu_ghz: f64,
    pub tau0_ps: f64,
    pub tau_coh_ps: f64,
}

/// Serialized form of a wavepacket; the derived widths are optional.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct WavepacketConfig {
    center_wavelength_nm: f64,
    delta_lambda_nm: f64,
    delta_nu_ghz: Option<f64>,
    tau0_ps: f64,
    tau_coh_ps: Option<f64>,
}

impl TryFrom<WavepacketConfig> for Wavepacket {
    type Error = Error;

    fn try_from(c: WavepacketConfig) -> Result<Self> {
        Wavepacket::new(c.center_wavelength_nm, c.delta_lambda_nm, c.delta_nu_ghz, c.tau0_ps, c.tau_coh_ps)
    }
}

impl Wavepacket {
    /// Builds a wavepacket from its spectral width. `delta_nu_ghz` defaults
    /// to the value implied by Δλ, and `tau_coh_ps` to 0.441/Δν.
    pub fn new(
        center_wavelength_nm: f64,
        delta_lambda_nm: f64,
        delta_nu_ghz: Option<f64>,
        tau0_ps: f64,
        tau_coh_ps: Option<f64>,
    ) -> Result<Self> {
        let implied = C_NM_GHZ * delta_lambda_nm / (center_wavelength_nm * center_wavelength_nm);
        let delta_nu_ghz = delta_nu_ghz.unwrap_or(implied);
        let tau_coh_ps = tau_coh_ps.unwrap_or(441.0 / delta_nu_ghz);
        let wp = Self {
            center_wavelength_nm,
            delta_lambda_nm,
            delta_nu_ghz,
            tau0_ps,
            tau_coh_ps,
        };
        wp.validate()?;
        Ok(wp)
    }

    /// 1550 nm photon, 3.2 nm wide, 3 ps long, coherence time pinned at 1.6 ps.
    pub fn paper_default() -> Self {
        Self::new(1550.0, 3.2, None, 3.0, Some(1.6)).expect("valid defaults")
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.center_wavelength_nm, self.delta_lambda_nm, self.delta_nu_ghz, self.tau0_ps, self.tau_coh_ps]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.center_wavelength_nm <= 0.0 || self.delta_lambda_nm <= 0.0 || self.delta_nu_ghz <= 0.0 {
            return Err(Error::InvalidInput(format!("invalid wavepacket {self:?}")));
        }
        if self.tau_coh_ps <= 0.0 || self.tau0_ps < 0.0 {
            return Err(Error::InvalidInput("wavepacket times must be positive".into()));
        }
        let implied = C_NM_GHZ * self.delta_lambda_nm / (self.center_wavelength_nm * self.center_wavelength_nm);
        if (self.delta_nu_ghz - implied).abs() > 0.01 * implied {
            return Err(Error::InvalidInput(format!(
                "spectral width {} GHz inconsistent with {} nm at {} nm ({implied:.1} GHz)",
                self.delta_nu_ghz, self.delta_lambda_nm, self.center_wavelength_nm
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateShape {
    #[default]
    Rectangular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateWindow {
    pub width_ns: f64,
    #[serde(default)]
    pub shape: GateShape,
    #[serde(default)]
    pub offset_ns: f64,
}

impl GateWindow {
    pub fn new(width_ns: f64) -> Self {
        Self {
            width_ns,
            shape: GateShape::Rectangular,
            offset_ns: 0.0,
        }
    }

    pub fn with_offset(mut self, offset_ns: f64) -> Self {
        self.offset_ns = offset_ns;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.width_ns.is_finite() && self.width_ns > 0.0 && self.offset_ns.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid gate window {self:?}")))
        }
    }
}

/// Fraction of a Gaussian wavepacket of FWHM √(τ₀² + τ_P²) falling inside
/// the rectangular gate, with the gate displaced by its timing offset.
pub fn gate_overlap(gate: &GateWindow, wp: &Wavepacket, tau_p_ns: f64) -> f64 {
    let tau0_ns = wp.tau0_ps / 1000.0;
    let fwhm = (tau0_ns * tau0_ns + tau_p_ns * tau_p_ns).sqrt();
    let half = gate.width_ns / 2.0;
    let off = gate.offset_ns;
    if fwhm == 0.0 {
        return if off.abs() < half {
            1.0
        } else if off.abs() == half {
            0.5
        } else {
            0.0
        };
    }
    let scale = std::f64::consts::SQRT_2 * fwhm / FWHM_PER_SIGMA;
    let a = (off - half) / scale;
    let b = (off + half) / scale;
    // evaluate on the side where erfc keeps precision in the tails
    let f = if a > 0.0 {
        0.5 * (libm::erfc(a) - libm::erfc(b))
    } else if b < 0.0 {
        0.5 * (libm::erfc(-b) - libm::erfc(-a))
    } else {
        0.5 * (libm::erf(b) - libm::erf(a))
    };
    f.clamp(0.0, 1.0)
}

/// Off-diagonal survival factor exp(−κ τ_PMD² / τ_coh²).
pub fn pmd_dephasing(tau_pmd_ps: f64, tau_coh_ps: f64, exponent: f64) -> f64 {
    (-exponent * (tau_pmd_ps / tau_coh_ps).powi(2)).exp()
}

/// Phase damping between the principal states of polarization given by the
/// columns of `axes`.
pub fn pmd_channel(tau_pmd_ps: f64, wp: &Wavepacket, axes: &Mat2, exponent: f64) -> Result<PolarizationChannel> {
    if !(tau_pmd_ps >= 0.0) {
        return Err(Error::InvalidInput(format!("negative PMD delay {tau_pmd_ps}")));
    }
    PolarizationChannel::phase_damping(pmd_dephasing(tau_pmd_ps, wp.tau_coh_ps, exponent), axes)
}

/// Unitary whose first column is the polarization with Bloch vector `n`
/// (second column orthogonal). Used to express PMD principal axes.
pub fn axes_from_bloch(n: [f64; 3]) -> Result<Mat2> {
    let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidInput("PMD axis must be a non-zero vector".into()));
    }
    let (x, y, z) = (n[0] / norm, n[1] / norm, n[2] / norm);
    let theta = z.clamp(-1.0, 1.0).acos();
    let phi = y.atan2(x);
    let (s, co) = (theta / 2.0).sin_cos();
    let up = Ket2::new(crate::linalg::c(co, 0.0), num_complex::Complex64::from_polar(s, phi));
    let down = Ket2::new(
        num_complex::Complex64::from_polar(-s, -phi),
        crate::linalg::c(co, 0.0),
    );
    Ok(Mat2::from_columns(&[up, down]))
}

/// Uniformly distributed random principal axis on the Poincaré sphere.
pub fn random_axis<R: rand::Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    [r * phi.cos(), r * phi.sin(), z]
}
