//! Sixteen-setting two-photon state tomography.

mod linear;
mod mle;
mod settings;

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

pub use linear::{linear_inversion, ordered_records};
pub use mle::{default_options, log_likelihood, mle_reconstruct, mle_reconstruct_with, MleOutcome};
pub use settings::{design_matrix, measurement_operators, TOMOGRAPHY_SETTINGS};

use crate::error::{Error, Result};
use crate::polarization::{fidelity_to_pure, format_density_matrix, log_negativity, negativity, TwoQubitState};
use crate::source::CountRecord;

/// Acquisition time and trigger count attached to each simulated record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exposure {
    pub duration_s: f64,
    pub triggers: f64,
}

impl Default for Exposure {
    fn default() -> Self {
        Self {
            duration_s: 1.0,
            triggers: 1e9,
        }
    }
}

/// Counts for the sixteen settings with mean `scale·p(a,b|ρ) + background`
/// per setting. With `seed = None` the means themselves are returned;
/// otherwise each count is Poisson distributed.
pub fn simulate_tomography_counts(
    rho: &TwoQubitState,
    per_setting_signal_scale: f64,
    background_per_setting: f64,
    seed: Option<u64>,
    exposure: Exposure,
) -> Result<Vec<CountRecord>> {
    if !(per_setting_signal_scale >= 0.0 && background_per_setting >= 0.0) {
        return Err(Error::InvalidInput("count scales must be non-negative".into()));
    }
    let means = TOMOGRAPHY_SETTINGS.map(|(a, b)| per_setting_signal_scale * rho.probability(a, b) + background_per_setting);
    counts_from_means(&means, seed, exposure)
}

/// Records in the standard setting order with the given mean counts, either
/// as they are (`seed = None`) or Poisson sampled.
pub fn counts_from_means(means: &[f64; 16], seed: Option<u64>, exposure: Exposure) -> Result<Vec<CountRecord>> {
    let mut rng = seed.map(ChaCha8Rng::seed_from_u64);
    TOMOGRAPHY_SETTINGS
        .iter()
        .zip(means)
        .map(|(&(a, b), &mean)| {
            if !(mean >= 0.0 && mean.is_finite()) {
                return Err(Error::InvalidInput(format!("invalid mean count {mean}")));
            }
            let coincidences = match rng.as_mut() {
                None => mean,
                Some(_) if mean == 0.0 => 0.0,
                Some(r) => Poisson::new(mean)
                    .map_err(|e| Error::InvalidInput(format!("Poisson mean {mean}: {e}")))?
                    .sample(r),
            };
            Ok(CountRecord {
                setting_a: a,
                setting_b: b,
                duration_s: exposure.duration_s,
                coincidences,
                triggers: exposure.triggers.max(coincidences),
            })
        })
        .collect()
}

/// Removes `background_cps · duration` from every record, flooring at zero.
pub fn subtract_background(counts: &[CountRecord], background_cps: f64) -> Result<Vec<CountRecord>> {
    if !(background_cps >= 0.0) {
        return Err(Error::InvalidInput(format!("negative background {background_cps}")));
    }
    Ok(counts
        .iter()
        .map(|r| CountRecord {
            coincidences: (r.coincidences - background_cps * r.duration_s).max(0.0),
            ..r.clone()
        })
        .collect())
}

/// Background-subtracted maximum-likelihood reconstruction.
pub fn corrected_reconstruct(counts: &[CountRecord], background_cps: f64) -> Result<MleOutcome> {
    mle_reconstruct(&subtract_background(counts, background_cps)?, None)
}

#[derive(Debug, Clone)]
pub struct TomographyResult {
    pub rho_raw: TwoQubitState,
    pub rho_corrected: TwoQubitState,
    pub negativity_raw: f64,
    pub negativity_corrected: f64,
    pub log_negativity_raw: f64,
    pub log_negativity_corrected: f64,
    pub fidelity_phi_plus_raw: f64,
    pub fidelity_phi_plus_corrected: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
}

impl TomographyResult {
    pub fn from_states(raw: MleOutcome, corrected: MleOutcome) -> Result<Self> {
        let phi = TwoQubitState::phi_plus();
        Ok(Self {
            negativity_raw: negativity(&raw.state),
            negativity_corrected: negativity(&corrected.state),
            log_negativity_raw: log_negativity(&raw.state),
            log_negativity_corrected: log_negativity(&corrected.state),
            fidelity_phi_plus_raw: fidelity_to_pure(&raw.state, &phi)?,
            fidelity_phi_plus_corrected: fidelity_to_pure(&corrected.state, &phi)?,
            log_likelihood: raw.log_likelihood,
            iterations: raw.iterations,
            rho_raw: raw.state,
            rho_corrected: corrected.state,
        })
    }

    pub fn summary_line(&self) -> String {
        format!(
            "E_N raw {:.4} corrected {:.4}; negativity raw {:.4} corrected {:.4}; fidelity raw {:.4} corrected {:.4}",
            self.log_negativity_raw,
            self.log_negativity_corrected,
            self.negativity_raw,
            self.negativity_corrected,
            self.fidelity_phi_plus_raw,
            self.fidelity_phi_plus_corrected
        )
    }

    /// Text report: summary, then both density matrices.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.summary_line());
        let _ = writeln!(out, "log-likelihood {:.6} after {} iterations", self.log_likelihood, self.iterations);
        let _ = writeln!(out, "\n[raw]");
        out.push_str(&format_density_matrix(&self.rho_raw));
        let _ = writeln!(out, "\n[corrected]");
        out.push_str(&format_density_matrix(&self.rho_corrected));
        out
    }
}

/// Raw and background-corrected reconstructions of one data set.
pub fn reconstruct(counts: &[CountRecord], background_cps: f64) -> Result<TomographyResult> {
    let raw = mle_reconstruct(counts, None)?;
    let corrected = corrected_reconstruct(counts, background_cps)?;
    TomographyResult::from_states(raw, corrected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, Mat4};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn exact(rho: &TwoQubitState) -> Vec<CountRecord> {
        simulate_tomography_counts(rho, 1e6, 0.0, None, Exposure::default()).unwrap()
    }

    fn random_state(params: &[f64]) -> TwoQubitState {
        let l = Mat4::from_fn(|i, j| c(params[4 * i + j], params[16 + 4 * i + j]));
        TwoQubitState::from_numerical(&(l * l.adjoint())).unwrap()
    }

    #[test]
    fn expected_counts_for_phi_plus() {
        let recs = simulate_tomography_counts(&TwoQubitState::phi_plus(), 1.0, 0.0, None, Exposure::default()).unwrap();
        // Born rule by hand: HH 1/2, HV 0, DD 1/2, RR |1 + (−i)(−i)|²/8 = 0
        let expected = [0.5, 0.0, 0.0, 0.5, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.5, 0.25, 0.25, 0.25, 0.25, 0.0];
        for (r, e) in recs.iter().zip(expected) {
            assert_abs_diff_eq!(r.coincidences, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_scale_gives_zero_counts() {
        let recs = simulate_tomography_counts(&TwoQubitState::phi_plus(), 0.0, 0.0, Some(3), Exposure::default()).unwrap();
        assert!(recs.iter().all(|r| r.coincidences == 0.0));
        assert!(mle_reconstruct(&recs, None).is_err());
    }

    #[test]
    fn sampled_means_match_expectation() {
        let rho = TwoQubitState::werner(0.8).unwrap();
        let runs = 1000;
        let mut sums = [0.0; 16];
        for s in 0..runs {
            let recs = simulate_tomography_counts(&rho, 200.0, 3.0, Some(s), Exposure::default()).unwrap();
            for (acc, r) in sums.iter_mut().zip(&recs) {
                *acc += r.coincidences;
            }
        }
        let mean = simulate_tomography_counts(&rho, 200.0, 3.0, None, Exposure::default()).unwrap();
        for (sum, m) in sums.iter().zip(&mean) {
            let sigma = (m.coincidences / runs as f64).sqrt();
            assert!((sum / runs as f64 - m.coincidences).abs() < 3.0 * sigma.max(1e-9), "{sum} vs {}", m.coincidences);
        }
    }

    #[test]
    fn linear_inversion_round_trips() {
        for rho in [TwoQubitState::phi_plus(), TwoQubitState::werner(0.9).unwrap()] {
            let back = linear_inversion(&exact(&rho)).unwrap();
            assert!((back - rho.matrix()).norm() < 1e-10);
        }
    }

    #[test]
    fn linear_inversion_may_leave_cone() {
        let recs = simulate_tomography_counts(&TwoQubitState::phi_plus(), 50.0, 0.0, Some(11), Exposure::default()).unwrap();
        let m = linear_inversion(&recs).unwrap();
        assert!((m.trace().re - 1.0).abs() < 1e-12);
        assert!(crate::linalg::hermiticity_error(&m) < 1e-12);
    }

    #[test]
    fn linear_inversion_rejects_degenerate_counts() {
        let mut recs = exact(&TwoQubitState::phi_plus());
        recs.iter_mut().for_each(|r| r.coincidences = 0.0);
        assert!(matches!(linear_inversion(&recs), Err(Error::Singular(_))));
        assert!(linear_inversion(&recs[..15]).is_err());
    }

    #[test]
    fn mle_recovers_exact_states() {
        let phi = TwoQubitState::phi_plus();
        let out = mle_reconstruct(&exact(&phi), None).unwrap();
        assert!(fidelity_to_pure(&out.state, &phi).unwrap() > 0.9999);

        let w = TwoQubitState::werner(0.9).unwrap();
        let out = mle_reconstruct(&exact(&w), None).unwrap();
        assert_abs_diff_eq!(log_negativity(&out.state), 1.85f64.log2(), epsilon = 1e-3);
    }

    #[test]
    fn mle_beats_clipped_linear_inversion() {
        for seed in 0..20 {
            let recs = simulate_tomography_counts(&TwoQubitState::werner(0.97).unwrap(), 80.0, 1.0, Some(seed), Exposure::default()).unwrap();
            let lin = linear_inversion(&recs).unwrap();
            let clipped = TwoQubitState::project_physical(&lin).unwrap();
            let out = mle_reconstruct(&recs, Some(&lin)).unwrap();
            assert!(out.log_likelihood >= log_likelihood(&recs, &clipped).unwrap() - 1e-9);
            assert!(TwoQubitState::new(*out.state.matrix()).is_ok());
        }
    }

    #[test]
    fn imaginary_parts_stay_small_for_real_states() {
        let rho = TwoQubitState::werner(0.95).unwrap();
        let recs = simulate_tomography_counts(&rho, 2000.0, 20.0, Some(5), Exposure::default()).unwrap();
        let out = mle_reconstruct(&recs, None).unwrap();
        assert!(out.state.matrix().iter().all(|z| z.im.abs() < 0.09));
    }

    #[test]
    fn report_contains_both_matrices() {
        let recs = simulate_tomography_counts(&TwoQubitState::werner(0.95).unwrap(), 500.0, 5.0, Some(1), Exposure::default()).unwrap();
        let res = reconstruct(&recs, 5.0).unwrap();
        let text = res.report();
        assert_eq!(text.matches(crate::polarization::DENSITY_HEADER).count(), 2);
        assert!(res.log_negativity_corrected >= res.log_negativity_raw - 0.05);
    }

    #[test]
    fn zero_background_correction_is_plain_mle() {
        let recs = simulate_tomography_counts(&TwoQubitState::werner(0.9).unwrap(), 300.0, 2.0, Some(9), Exposure::default()).unwrap();
        let a = mle_reconstruct(&recs, None).unwrap();
        let b = corrected_reconstruct(&recs, 0.0).unwrap();
        assert_eq!(a.state, b.state);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn round_trip_from_exact_probabilities(params in proptest::collection::vec(-1.0f64..1.0, 32)) {
            let rho = random_state(&params);
            let recs = exact(&rho);
            let lin = TwoQubitState::from_numerical(&linear_inversion(&recs).unwrap()).unwrap();
            prop_assert!(lin.trace_distance(&rho) < 1e-8);
            let out = mle_reconstruct(&recs, None).unwrap();
            prop_assert!(out.state.trace_distance(&rho) < 1e-6, "trace distance {}", out.state.trace_distance(&rho));
        }

        #[test]
        fn mle_output_is_physical(seed in any::<u64>(), scale in 1.0f64..500.0, bg in 0.0f64..20.0) {
            let recs = simulate_tomography_counts(&TwoQubitState::phi_plus(), scale, bg, Some(seed), Exposure::default()).unwrap();
            prop_assume!(recs.iter().any(|r| r.coincidences > 0.0));
            match mle_reconstruct(&recs, None) {
                Ok(out) => prop_assert!(TwoQubitState::new(*out.state.matrix()).is_ok()),
                Err(Error::MleNonConvergence { best, .. }) => prop_assert!(TwoQubitState::new(*best.matrix()).is_ok()),
                Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
            }
        }
    }
}
