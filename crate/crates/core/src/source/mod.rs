//! Pair source and gated detector rate model, the raw-visibility prediction
//! model, and background estimation.
//!
//! All coincidence rates are per analyzer setting pair. A polarization-blind
//! background rate `r` per setting therefore adds `2r` to the Max + Min
//! denominator of a single-setting visibility, which is the grouping of the
//! visibility model.

mod records;

use serde::{Deserialize, Serialize};

pub use records::{corrected_visibility, raw_visibility, read_records, read_records_file, write_records, CountRecord};

use crate::error::{Error, Result};
use crate::fiber::GateWindow;
use crate::polarization::{AnalyzerSetting, Basis, Bell, TwoQubitState};

/// Description of the source state before transmission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum StateSpec {
    /// weight·|Φ(phase)><Φ(phase)| + (1 − weight)·I/4
    Werner {
        weight: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    Bell {
        which: Bell,
        #[serde(default)]
        phase_rad: f64,
    },
}

impl StateSpec {
    pub fn state(&self) -> Result<TwoQubitState> {
        match *self {
            StateSpec::Werner { weight, phase_rad } => {
                if !(0.0..=1.0).contains(&weight) {
                    return Err(Error::InvalidInput(format!("Werner weight {weight} outside [0, 1]")));
                }
                Ok(TwoQubitState::mix(
                    &TwoQubitState::bell(Bell::PhiPlus, phase_rad),
                    &TwoQubitState::maximally_mixed(),
                    weight,
                ))
            }
            StateSpec::Bell { which, phase_rad } => Ok(TwoQubitState::bell(which, phase_rad)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub pump_power_mw: f64,
    /// Alice detections per second and mW with her polarizer removed.
    pub singles_rate_per_mw: f64,
    /// Local pair coincidences per second and mW, summed over the four
    /// outcomes of a basis, measured with a detector of `calibration_qe`.
    pub pair_coincidence_rate_per_mw: f64,
    /// Multi-pair accidental coincidences per second in one setting pair at
    /// `reference_power_mw`.
    pub accidental_rate_ref_cps: f64,
    pub reference_power_mw: f64,
    pub calibration_qe: f64,
    pub intrinsic_state: StateSpec,
}

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.pump_power_mw,
            self.singles_rate_per_mw,
            self.pair_coincidence_rate_per_mw,
            self.accidental_rate_ref_cps,
            self.reference_power_mw,
            self.calibration_qe,
        ];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("source rates must be finite and non-negative".into()));
        }
        if self.pump_power_mw <= 0.0 || self.reference_power_mw <= 0.0 {
            return Err(Error::InvalidInput("pump powers must be positive".into()));
        }
        if !(self.calibration_qe > 0.0 && self.calibration_qe <= 1.0) {
            return Err(Error::InvalidInput(format!("calibration QE {} outside (0, 1]", self.calibration_qe)));
        }
        self.intrinsic_state.state().map(|_| ())
    }

    pub fn with_pump_power(&self, mw: f64) -> Self {
        Self {
            pump_power_mw: mw,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub qe: f64,
    pub dark_prob_per_gate: f64,
    pub gate: GateWindow,
    pub deadtime_us: f64,
    pub max_gate_rate_mhz: f64,
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.qe) || !(0.0..=1.0).contains(&self.dark_prob_per_gate) {
            return Err(Error::InvalidInput("detector QE and dark probability must lie in [0, 1]".into()));
        }
        if !(self.deadtime_us >= 0.0 && self.deadtime_us.is_finite()) {
            return Err(Error::InvalidInput(format!("invalid deadtime {}", self.deadtime_us)));
        }
        if !(self.max_gate_rate_mhz > 0.0) {
            return Err(Error::InvalidInput(format!("invalid max gate rate {}", self.max_gate_rate_mhz)));
        }
        self.gate.validate()
    }
}

/// Number of gates that fall inside the deadtime after a click, for periodic
/// gates at `gate_rate_hz`.
pub fn blocked_gates(deadtime_us: f64, gate_rate_hz: f64) -> u64 {
    let periods = deadtime_us * 1e-6 * gate_rate_hz;
    ((periods - 1e-9).ceil() - 1.0).max(0.0) as u64
}

/// Fraction of gates during which a non-paralyzable detector with per-gate
/// click probability `q` is armed.
pub fn live_fraction(q: f64, blocked: u64) -> f64 {
    1.0 / (1.0 + blocked as f64 * q)
}

/// Multi-pair accidental rate per setting pair at the current pump power.
pub fn accidental_rate(src: &SourceSpec) -> f64 {
    let x = src.pump_power_mw / src.reference_power_mw;
    src.accidental_rate_ref_cps * x * x
}

/// Per-setting rates before the deadtime of Bob's detector is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettingRates {
    /// Alice triggers per second (gates opened at Bob).
    pub trigger_rate: f64,
    /// Ratio of gates opened to triggers produced, below one when the
    /// trigger stream exceeds the maximum gate rate.
    pub saturation: f64,
    pub signal: f64,
    pub accidental: f64,
    pub dark: f64,
    /// Gates blocked after each click of Bob's detector.
    pub blocked_gates: u64,
}

impl SettingRates {
    pub fn click_probability(&self) -> f64 {
        ((self.signal + self.accidental + self.dark) / self.trigger_rate).min(1.0)
    }

    pub fn live_fraction(&self) -> f64 {
        live_fraction(self.click_probability(), self.blocked_gates)
    }
}

/// Detected coincidence rates in one setting pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceRates {
    pub signal: f64,
    pub background: f64,
}

impl CoincidenceRates {
    pub fn total(&self) -> f64 {
        self.signal + self.background
    }
}

/// Pair coincidence rate summed over the four outcomes of a basis, scaled to
/// the detector's QE.
pub fn pair_rate(src: &SourceSpec, det: &DetectorSpec) -> f64 {
    src.pair_coincidence_rate_per_mw * src.pump_power_mw * det.qe / src.calibration_qe
}

fn alice_marginal(rho: &TwoQubitState, a: AnalyzerSetting) -> f64 {
    rho.probability(a, AnalyzerSetting::H) + rho.probability(a, AnalyzerSetting::V)
}

pub fn setting_rates(
    rho: &TwoQubitState,
    src: &SourceSpec,
    det: &DetectorSpec,
    t: f64,
    f: f64,
    a: AnalyzerSetting,
    b: AnalyzerSetting,
) -> SettingRates {
    let pa = alice_marginal(rho, a);
    let offered = src.singles_rate_per_mw * src.pump_power_mw * pa;
    let trigger_rate = offered.min(det.max_gate_rate_mhz * 1e6);
    let saturation = if offered > 0.0 { trigger_rate / offered } else { 1.0 };
    let qe_scale = det.qe / src.calibration_qe;
    SettingRates {
        trigger_rate,
        saturation,
        signal: pair_rate(src, det) * rho.probability(a, b) * t * f * saturation,
        accidental: accidental_rate(src) * qe_scale * 2.0 * pa * t * saturation,
        dark: det.dark_prob_per_gate * trigger_rate,
        blocked_gates: blocked_gates(det.deadtime_us, trigger_rate),
    }
}

/// Signal and background coincidence rates in settings (a, b) after a channel
/// with transmission `t` and gate overlap `f`, including trigger saturation
/// and Bob's deadtime.
pub fn coincidence_rates(
    rho_after_channel: &TwoQubitState,
    src: &SourceSpec,
    det: &DetectorSpec,
    t: f64,
    f: f64,
    a: AnalyzerSetting,
    b: AnalyzerSetting,
) -> CoincidenceRates {
    let r = setting_rates(rho_after_channel, src, det, t, f, a, b);
    let live = r.live_fraction();
    CoincidenceRates {
        signal: r.signal * live,
        background: (r.accidental + r.dark) * live,
    }
}

/// Visibility computed from the full rate model in the four settings of a
/// basis, Max = parallel settings, Min = crossed settings.
pub fn rate_model_visibility(
    rho: &TwoQubitState,
    src: &SourceSpec,
    det: &DetectorSpec,
    t: f64,
    f: f64,
    basis: Basis,
) -> Result<f64> {
    let (s, o) = basis.settings();
    let rate = |a, b| coincidence_rates(rho, src, det, t, f, a, b).total();
    let max = rate(s, s) + rate(o, o);
    let min = rate(s, o) + rate(o, s);
    if max + min <= 0.0 {
        return Err(Error::Undefined("no coincidences in the rate model".into()));
    }
    Ok((max - min) / (max + min))
}

/// Parameters of the raw-visibility model: local parallel and crossed
/// coincidence rates of a single setting pair, and the per-setting
/// accidental and dark coincidence rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityModelParams {
    pub max0: f64,
    pub min0: f64,
    pub r_acc: f64,
    pub r_dark: f64,
}

impl VisibilityModelParams {
    pub fn new(max0: f64, min0: f64, r_acc: f64, r_dark: f64) -> Result<Self> {
        let p = Self { max0, min0, r_acc, r_dark };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.max0, self.min0, self.r_acc, self.r_dark];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput(format!("visibility model rates must be non-negative: {self:?}")));
        }
        if self.max0 <= self.min0 {
            return Err(Error::InvalidInput(format!("max0 {} not above min0 {}", self.max0, self.min0)));
        }
        Ok(())
    }

    /// The parameters as they would be measured back to back: HH and HV
    /// signal rates at zero length, accidentals from a displaced gate at zero
    /// length, darks with the source blocked.
    pub fn from_source(src: &SourceSpec, det: &DetectorSpec) -> Result<Self> {
        use AnalyzerSetting::{H, V};
        let rho = src.intrinsic_state.state()?;
        let hh = setting_rates(&rho, src, det, 1.0, 1.0, H, H);
        let hv = setting_rates(&rho, src, det, 1.0, 1.0, H, V);
        let (lh, lv) = (hh.live_fraction(), hv.live_fraction());
        Self::new(
            hh.signal * lh,
            hv.signal * lv,
            hh.accidental * 0.5 * (lh + lv),
            hh.dark,
        )
    }
}

/// Predicted raw visibility at transmission `t` and gate overlap `f`:
/// (max0 − min0)·T·F / ((max0 + min0)·F·T + 2·r_acc·T + 2·r_dark).
pub fn model_visibility(p: &VisibilityModelParams, t: f64, f: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 1.0) || !(f > 0.0 && f <= 1.0) {
        return Err(Error::InvalidInput(format!("transmission {t} and overlap {f} must lie in (0, 1]")));
    }
    let num = (p.max0 - p.min0) * t * f;
    let den = (p.max0 + p.min0) * f * t + 2.0 * p.r_acc * t + 2.0 * p.r_dark;
    if den <= 0.0 {
        return Err(Error::Undefined("zero denominator in visibility model".into()));
    }
    Ok(num / den)
}

/// Background coincidence rate per setting seen by a gate displaced by
/// `delayed_gate_offset_ns`: accidentals attenuated by the link plus darks.
pub fn estimate_background(det: &DetectorSpec, src: &SourceSpec, t: f64, delayed_gate_offset_ns: f64) -> Result<f64> {
    if !(delayed_gate_offset_ns.abs() >= 3.0 * det.gate.width_ns) {
        return Err(Error::InvalidInput(format!(
            "gate offset {delayed_gate_offset_ns} ns is less than three gate widths"
        )));
    }
    let rho = src.intrinsic_state.state()?;
    let r = setting_rates(&rho, src, det, t, 1.0, AnalyzerSetting::H, AnalyzerSetting::H);
    Ok(r.accidental + r.dark)
}

/// Quantum bit error rate (1 − V)/2.
pub fn qber_from_visibility(v: f64) -> f64 {
    (1.0 - v) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use AnalyzerSetting::*;

    pub(crate) fn lab_source() -> SourceSpec {
        SourceSpec {
            pump_power_mw: 16.0,
            singles_rate_per_mw: 100_000.0,
            pair_coincidence_rate_per_mw: 790.0,
            accidental_rate_ref_cps: 80.0,
            reference_power_mw: 16.0,
            calibration_qe: 0.06,
            intrinsic_state: StateSpec::Werner {
                weight: 0.993,
                phase_rad: 0.0,
            },
        }
    }

    pub(crate) fn lab_detector() -> DetectorSpec {
        DetectorSpec {
            qe: 0.06,
            dark_prob_per_gate: 3e-6,
            gate: GateWindow::new(1.5),
            deadtime_us: 10.0,
            max_gate_rate_mhz: 4.0,
        }
    }

    #[test]
    fn accidentals_scale_quadratically() {
        let src = lab_source();
        assert_eq!(accidental_rate(&src), 80.0);
        assert_abs_diff_eq!(accidental_rate(&src.with_pump_power(32.0)), 320.0, epsilon = 1e-12);
    }

    #[test]
    fn model_limits() {
        let p = VisibilityModelParams::new(100.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(model_visibility(&p, 0.01, 0.5).unwrap(), 1.0);
        let p = VisibilityModelParams::new(100.0, 2.0, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(model_visibility(&p, 1.0, 1.0).unwrap(), 98.0 / 105.0, epsilon = 1e-15);
        assert!(model_visibility(&p, 0.0, 1.0).is_err());
        assert!(VisibilityModelParams::new(1.0, 2.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn blocked_gate_count_handles_rounding() {
        assert_eq!(blocked_gates(10.0, 0.8e6), 7);
        assert_eq!(blocked_gates(10.0, 0.85e6), 8);
        assert_eq!(blocked_gates(0.0, 0.8e6), 0);
        assert_eq!(blocked_gates(1.0, 0.5e6), 0);
    }

    #[test]
    fn local_parallel_rate_is_half_of_total() {
        let src = lab_source();
        let det = lab_detector();
        let rho = src.intrinsic_state.state().unwrap();
        let hh = coincidence_rates(&rho, &src, &det, 1.0, 1.0, H, H);
        // 12.6 kc/s total, half of it in HH, reduced by the deadtime
        assert!(hh.signal > 5500.0 && hh.signal < 6500.0, "{hh:?}");
        let total: f64 = [(H, H), (H, V), (V, H), (V, V)]
            .iter()
            .map(|&(a, b)| coincidence_rates(&rho, &src, &det, 1.0, 1.0, a, b).total())
            .sum();
        assert!(total > 11_000.0 && total < 13_000.0, "{total}");
    }

    #[test]
    fn orthogonal_ideal_rate_is_zero() {
        let mut src = lab_source();
        src.accidental_rate_ref_cps = 0.0;
        src.intrinsic_state = StateSpec::Bell {
            which: Bell::PhiPlus,
            phase_rad: 0.0,
        };
        let mut det = lab_detector();
        det.dark_prob_per_gate = 0.0;
        let rho = src.intrinsic_state.state().unwrap();
        assert_eq!(coincidence_rates(&rho, &src, &det, 1.0, 1.0, H, V).total(), 0.0);
    }

    #[test]
    fn trigger_saturation_clips() {
        let src = lab_source().with_pump_power(100.0);
        let det = lab_detector();
        let rho = src.intrinsic_state.state().unwrap();
        let r = setting_rates(&rho, &src, &det, 1.0, 1.0, H, H);
        assert_abs_diff_eq!(r.trigger_rate, 4e6, epsilon = 1e-6);
        assert_abs_diff_eq!(r.saturation, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn background_estimate() {
        let mut src = lab_source();
        src.accidental_rate_ref_cps = 0.0;
        let det = lab_detector();
        let rd = estimate_background(&det, &src, 1.0, 10.0).unwrap();
        assert_abs_diff_eq!(rd, 3e-6 * 0.8e6, epsilon = 1e-12);
        assert!(estimate_background(&det, &src, 1.0, 4.0).is_err());

        let mut src = lab_source();
        src.accidental_rate_ref_cps = 100.0;
        let mut det = lab_detector();
        det.dark_prob_per_gate = 0.0;
        assert_abs_diff_eq!(estimate_background(&det, &src, 0.00757, 10.0).unwrap(), 0.757, epsilon = 1e-12);
    }

    #[test]
    fn qber_examples() {
        assert_eq!(qber_from_visibility(1.0), 0.0);
        assert_abs_diff_eq!(qber_from_visibility(0.886), 0.057, epsilon = 1e-12);
        assert_eq!(qber_from_visibility(0.0), 0.5);
    }

    #[test]
    fn model_reproduces_rate_model_at_zero_length() {
        let src = lab_source();
        let det = lab_detector();
        let p = VisibilityModelParams::from_source(&src, &det).unwrap();
        let rho = src.intrinsic_state.state().unwrap();
        let exact = rate_model_visibility(&rho, &src, &det, 1.0, 1.0, Basis::HV).unwrap();
        // the model cannot see that deadtime suppresses background in the
        // busy parallel setting more than in the crossed one
        assert_abs_diff_eq!(model_visibility(&p, 1.0, 1.0).unwrap(), exact, epsilon = 1e-3);
    }

    proptest! {
        #[test]
        fn model_non_increasing_as_loss_grows(t in 1e-4f64..1.0, k in 0.0f64..1.0, f in 0.05f64..1.0) {
            let p = VisibilityModelParams::new(6000.0, 20.0, 80.0, 2.4).unwrap();
            let a = model_visibility(&p, t, f).unwrap();
            let b = model_visibility(&p, t * k.max(1e-6), f).unwrap();
            prop_assert!(b <= a + 1e-15);
        }

        #[test]
        fn model_without_darks_ignores_transmission(t1 in 1e-4f64..1.0, t2 in 1e-4f64..1.0, f in 0.05f64..1.0) {
            let p = VisibilityModelParams::new(6000.0, 20.0, 80.0, 0.0).unwrap();
            prop_assert!((model_visibility(&p, t1, f).unwrap() - model_visibility(&p, t2, f).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn qber_inverts_visibility(e in 0.0f64..=0.5) {
            prop_assert!((qber_from_visibility(1.0 - 2.0 * e) - e).abs() < 1e-15);
        }

        #[test]
        fn rates_scale_with_transmission(t in 1e-4f64..1.0) {
            let src = lab_source();
            let det = lab_detector();
            let rho = src.intrinsic_state.state().unwrap();
            let one = setting_rates(&rho, &src, &det, 1.0, 0.7, H, H);
            let r = setting_rates(&rho, &src, &det, t, 0.7, H, H);
            prop_assert!((r.signal - one.signal * t).abs() < 1e-9 * one.signal);
            prop_assert!((r.accidental - one.accidental * t).abs() < 1e-9 * one.accidental);
            prop_assert_eq!(r.dark, one.dark);
        }
    }
}
