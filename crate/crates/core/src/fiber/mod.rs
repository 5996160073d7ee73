//! Fiber channel: loss, chromatic dispersion and gate overlap, PMD
//! dephasing, polarization drift and its compensation.

mod drift;
mod link;
mod wave;

pub use drift::{advance_drift, compensate_drift, compensate_state, Compensation, DriftState, DEFAULT_MAX_RESIDUAL};
pub use link::{cd_broadening, pmd_delay, transmission, FiberLink, FiberSegment};
pub use wave::{
    axes_from_bloch, gate_overlap, pmd_channel, pmd_dephasing, random_axis, GateShape, GateWindow, Wavepacket,
    DEFAULT_PMD_EXPONENT,
};

/// Channel quantities at one point along a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkProfile {
    pub length_km: f64,
    pub transmission: f64,
    pub tau_p_ns: f64,
    pub tau_pmd_ps: f64,
}

impl LinkProfile {
    /// Profile of the first `length_km` of `link`; zero length is the
    /// back-to-back configuration.
    pub fn at(link: &FiberLink, length_km: f64, wp: &Wavepacket) -> Self {
        match link.prefix(length_km) {
            None => Self {
                length_km: 0.0,
                transmission: 1.0,
                tau_p_ns: 0.0,
                tau_pmd_ps: 0.0,
            },
            Some(p) => Self {
                length_km: p.length_km(),
                transmission: transmission(&p),
                tau_p_ns: cd_broadening(&p, wp),
                tau_pmd_ps: pmd_delay(&p),
            },
        }
    }

    pub fn overlap(&self, gate: &GateWindow, wp: &Wavepacket) -> f64 {
        gate_overlap(gate, wp, self.tau_p_ns)
    }
}
