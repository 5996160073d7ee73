use rayon::prelude::*;
use serde::Serialize;

use super::config::Scenario;
use crate::error::{Error, Result};
use crate::fiber::{
    advance_drift, axes_from_bloch, compensate_state, pmd_channel, pmd_dephasing, random_axis, DriftState,
    LinkProfile,
};
use crate::linalg::Mat2;
use crate::montecarlo::{oracle_compare_with, rng::mix64, run_gates, visibility_with_error, GateModel, OracleReport, SimConfig};
use crate::polarization::{log_negativity, AnalyzerSetting, Basis, Qubit, TwoQubitState};
use crate::qkd::{max_distance, threshold_sensitivity, QkdReport, Reach};
use crate::source::{
    coincidence_rates, corrected_visibility, estimate_background, model_visibility, rate_model_visibility,
    raw_visibility, CountRecord, DetectorSpec, SourceSpec, VisibilityModelParams,
};
use crate::tomography::{counts_from_means, reconstruct, Exposure, TomographyResult, TOMOGRAPHY_SETTINGS};

/// State and channel quantities at one distance.
#[derive(Debug, Clone)]
pub struct LinkPoint {
    pub length_km: f64,
    pub transmission: f64,
    pub overlap: f64,
    pub tau_p_ns: f64,
    pub tau_pmd_ps: f64,
    pub dephasing: f64,
    /// p(V,H) + p(D,A) left after drift compensation.
    pub compensation_residual: Option<f64>,
    /// Pair state at the analyzers.
    pub rho: TwoQubitState,
}

/// Bases averaged for visibility, as in the lab where both are recorded.
pub const VISIBILITY_BASES: [Basis; 2] = [Basis::HV, Basis::DA];

fn basis_settings(basis: Basis) -> [(AnalyzerSetting, AnalyzerSetting); 4] {
    let (h, v) = basis.settings();
    [(h, h), (h, v), (v, h), (v, v)]
}

#[derive(Debug, Clone, Copy)]
pub struct BasisVisibility {
    pub basis: Basis,
    pub rate_v: f64,
    pub corrected_v: f64,
}

/// Analytic predictions at one distance.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub point: LinkPoint,
    /// Visibility-model prediction.
    pub model_v: f64,
    /// Full rate model with the transmitted state, averaged over
    /// [`VISIBILITY_BASES`].
    pub rate_v: f64,
    pub corrected_v: f64,
    pub per_basis: Vec<BasisVisibility>,
    /// Coincidences per second summed over HH and VV.
    pub parallel_rate_cps: f64,
    /// Background per setting measured with a displaced gate.
    pub background_cps: f64,
    /// Expected records for the configured acquisition time, four per basis.
    pub records: Vec<CountRecord>,
}

/// Accidental reference rate that gives `target_v` back to back at `power_mw`.
pub fn calibrate_accidental_ref(src: &SourceSpec, det: &DetectorSpec, power_mw: f64, target_v: f64) -> Result<f64> {
    let v_at = |acc: f64| -> Result<f64> {
        let s = SourceSpec {
            accidental_rate_ref_cps: acc,
            ..src.with_pump_power(power_mw)
        };
        model_visibility(&VisibilityModelParams::from_source(&s, det)?, 1.0, 1.0)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    if v_at(lo)? < target_v {
        return Err(Error::InvalidInput(format!("visibility {target_v} unreachable even without accidentals")));
    }
    while v_at(hi)? > target_v {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Unbounded("accidental calibration".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if v_at(mid)? > target_v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

impl Scenario {
    pub fn pmd_axes(&self) -> Result<Mat2> {
        let axis = match self.channel.pmd_axis {
            Some(a) => a,
            None => {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.channel.pmd_axis_seed);
                random_axis(&mut rng)
            }
        };
        axes_from_bloch(axis)
    }

    pub fn drift_unitary(&self) -> Result<Mat2> {
        let d = DriftState::new(self.channel.drift_rate_rad_per_hour);
        Ok(advance_drift(&d, self.channel.drift_hours, self.channel.drift_seed)?.unitary())
    }

    pub fn model_params(&self) -> Result<VisibilityModelParams> {
        VisibilityModelParams::from_source(&self.source, &self.detector)
    }

    fn profile(&self, length_km: f64) -> LinkProfile {
        match &self.link {
            Some(link) => LinkProfile::at(link, length_km, &self.wavepacket),
            None => LinkProfile {
                length_km: 0.0,
                transmission: 1.0,
                tau_p_ns: 0.0,
                tau_pmd_ps: 0.0,
            },
        }
    }

    /// Source state sent through PMD and drift on Bob's arm, then
    /// compensated as in the lab.
    pub fn link_point(&self, length_km: f64) -> Result<LinkPoint> {
        let prof = self.profile(length_km);
        let rho0 = self.source.intrinsic_state.state()?;
        let pmd = pmd_channel(prof.tau_pmd_ps, &self.wavepacket, &self.pmd_axes()?, self.channel.pmd_exponent)?;
        let drifted = rho0
            .apply_channel(&pmd, Qubit::Second)
            .apply_local_unitaries(&Mat2::identity(), &self.drift_unitary()?);
        let (rho, residual) = if self.channel.compensate {
            let comp = compensate_state(&drifted, f64::INFINITY)?;
            (drifted.apply_local_unitaries(&Mat2::identity(), &comp.unitary), Some(comp.residual))
        } else {
            (drifted, None)
        };
        Ok(LinkPoint {
            length_km: prof.length_km,
            transmission: prof.transmission,
            overlap: prof.overlap(&self.detector.gate, &self.wavepacket),
            tau_p_ns: prof.tau_p_ns,
            tau_pmd_ps: prof.tau_pmd_ps,
            dephasing: pmd_dephasing(prof.tau_pmd_ps, self.wavepacket.tau_coh_ps, self.channel.pmd_exponent),
            compensation_residual: residual,
            rho,
        })
    }

    pub fn evaluate(&self, length_km: f64) -> Result<Evaluation> {
        let point = self.link_point(length_km)?;
        let (t, f) = (point.transmission, point.overlap);
        let model_v = model_visibility(&self.model_params()?, t, f)?;
        let background_cps = estimate_background(&self.detector, &self.source, t, self.measurement.delayed_gate_offset_ns)?;
        let duration = self.measurement.visibility_duration_s;
        let triggers = self.trigger_rate()? * duration;
        let mut records = Vec::with_capacity(8);
        let mut per_basis = Vec::with_capacity(2);
        for basis in VISIBILITY_BASES {
            let recs: Vec<CountRecord> = basis_settings(basis)
                .iter()
                .map(|&(a, b)| CountRecord {
                    setting_a: a,
                    setting_b: b,
                    duration_s: duration,
                    coincidences: coincidence_rates(&point.rho, &self.source, &self.detector, t, f, a, b).total() * duration,
                    triggers,
                })
                .collect();
            per_basis.push(BasisVisibility {
                basis,
                rate_v: rate_model_visibility(&point.rho, &self.source, &self.detector, t, f, basis)?,
                corrected_v: corrected_visibility(&recs, background_cps)?,
            });
            records.extend(recs);
        }
        let mean = |g: fn(&BasisVisibility) -> f64| per_basis.iter().map(g).sum::<f64>() / per_basis.len() as f64;
        let parallel_rate_cps = (records[0].coincidences + records[3].coincidences) / duration;
        Ok(Evaluation {
            model_v,
            rate_v: mean(|b| b.rate_v),
            corrected_v: mean(|b| b.corrected_v),
            point,
            per_basis,
            parallel_rate_cps,
            background_cps,
            records,
        })
    }

    fn trigger_rate(&self) -> Result<f64> {
        let rho = self.source.intrinsic_state.state()?;
        Ok(crate::source::setting_rates(&rho, &self.source, &self.detector, 1.0, 1.0, AnalyzerSetting::H, AnalyzerSetting::H).trigger_rate)
    }

    pub fn gate_model(&self, point: &LinkPoint, multipairs: bool) -> Result<GateModel> {
        GateModel::from_specs(point.rho.clone(), &self.source, &self.detector, point.transmission, point.overlap, multipairs)
    }

    /// Model, Monte Carlo and corrected visibilities per length. With
    /// `n_gates = 0` the simulation is skipped.
    pub fn visibility_curve(&self, lengths: &[f64], n_gates: u64, seed: u64) -> Result<Vec<CurveRow>> {
        lengths
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let ev = self.evaluate(l)?;
                let mut row = CurveRow {
                    length_km: l,
                    transmission: ev.point.transmission,
                    overlap: ev.point.overlap,
                    model_v: ev.model_v,
                    rate_v: ev.rate_v,
                    corrected_v: ev.corrected_v,
                    coincidence_rate_cps: ev.parallel_rate_cps,
                    mc_raw_v: None,
                    mc_sigma: None,
                    mc_corrected_v: None,
                };
                if n_gates > 0 {
                    let model = self.gate_model(&ev.point, self.oracle.multipairs)?;
                    let mut cfg = SimConfig::new(model, n_gates, mix64(seed ^ i as u64));
                    cfg.settings = VISIBILITY_BASES.iter().flat_map(|&b| basis_settings(b)).collect();
                    let recs = run_gates(&cfg)?;
                    let raw: Option<Vec<(f64, f64)>> =
                        VISIBILITY_BASES.iter().map(|&b| visibility_with_error(&recs, b)).collect();
                    if let Some(raw) = raw {
                        let n = raw.len() as f64;
                        row.mc_raw_v = Some(raw.iter().map(|r| r.0).sum::<f64>() / n);
                        row.mc_sigma = Some(raw.iter().map(|r| r.1 * r.1).sum::<f64>().sqrt() / n);
                        row.mc_corrected_v = recs
                            .chunks(4)
                            .map(|c| corrected_visibility(c, ev.background_cps))
                            .sum::<Result<f64>>()
                            .ok()
                            .map(|v| v / n);
                    }
                }
                Ok(row)
            })
            .collect()
    }

    /// Expected tomography counts at one length for the configured exposure.
    pub fn tomography_means(&self, point: &LinkPoint) -> [f64; 16] {
        let d = self.measurement.tomography_duration_s;
        TOMOGRAPHY_SETTINGS.map(|(a, b)| {
            coincidence_rates(&point.rho, &self.source, &self.detector, point.transmission, point.overlap, a, b).total() * d
        })
    }

    /// Simulated tomography at one length, repeated `repeats` times.
    pub fn tomography_at(&self, length_km: f64, repeats: u32, seed: u64) -> Result<TomographySummary> {
        let ev = self.evaluate(length_km)?;
        let means = self.tomography_means(&ev.point);
        let d = self.measurement.tomography_duration_s;
        let exposure = Exposure {
            duration_s: d,
            triggers: self.trigger_rate()? * d,
        };
        let results: Vec<TomographyResult> = (0..repeats)
            .into_par_iter()
            .map(|r| {
                let s = mix64(seed ^ mix64(length_km.to_bits()) ^ (r as u64).wrapping_mul(0x9E37_79B9));
                let counts = counts_from_means(&means, Some(s), exposure)?;
                reconstruct(&counts, ev.background_cps)
            })
            .collect::<Result<_>>()?;
        let stats = |f: &dyn Fn(&TomographyResult) -> f64| {
            let n = results.len() as f64;
            let mean = results.iter().map(f).sum::<f64>() / n;
            let var = results.iter().map(|r| (f(r) - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            (mean, var.sqrt())
        };
        let (raw_mean, raw_sd) = stats(&|r| r.log_negativity_raw);
        let (cor_mean, cor_sd) = stats(&|r| r.log_negativity_corrected);
        Ok(TomographySummary {
            length_km,
            log_negativity_raw_mean: raw_mean,
            log_negativity_raw_sd: raw_sd,
            log_negativity_corrected_mean: cor_mean,
            log_negativity_corrected_sd: cor_sd,
            log_negativity_transmitted: log_negativity(&ev.point.rho),
            background_cps: ev.background_cps,
            results,
        })
    }

    pub fn keyrate(&self, length_km: f64) -> Result<QkdReport> {
        let ev = self.evaluate(length_km)?;
        let r_acc = self.model_params()?.r_acc;
        QkdReport::new(ev.point.length_km, ev.model_v, ev.parallel_rate_cps, r_acc, &self.keyrate)
    }

    /// Reach with the configured (or overriding) detector.
    pub fn reach(&self) -> Result<ReachReport> {
        let cfg = self
            .reach
            .as_ref()
            .ok_or_else(|| Error::InvalidInput(format!("scenario {} has no reach section", self.name)))?;
        let det = cfg.detector_override.as_ref().unwrap_or(&self.detector);
        let params = VisibilityModelParams::from_source(&self.source, det)?;
        Ok(ReachReport {
            params,
            reach: max_distance(&params, &cfg.link, cfg.visibility_threshold)?,
            sensitivity: threshold_sensitivity(&params, &cfg.link, &cfg.sensitivity_thresholds)?,
        })
    }

    /// Monte Carlo against the analytic model at each length. The analytic
    /// side uses the link transmission multiplied by `transmission_scale`
    /// (1 for a genuine check).
    pub fn oracle_check(&self, lengths: &[f64], n_gates: u64, seed: u64, transmission_scale: f64) -> Result<Vec<(f64, OracleReport)>> {
        lengths
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let point = self.link_point(l)?;
                let model = self.gate_model(&point, self.oracle.multipairs)?;
                let cfg = SimConfig::new(model, n_gates, mix64(seed ^ (i as u64 + 1)));
                let rep = oracle_compare_with(&cfg, &self.source, &self.detector, point.transmission * transmission_scale)?;
                Ok((l, rep))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveRow {
    pub length_km: f64,
    pub transmission: f64,
    pub overlap: f64,
    pub model_v: f64,
    pub rate_v: f64,
    pub corrected_v: f64,
    pub coincidence_rate_cps: f64,
    pub mc_raw_v: Option<f64>,
    pub mc_sigma: Option<f64>,
    pub mc_corrected_v: Option<f64>,
}

pub const CURVE_CSV_HEADER: &str =
    "length_km,transmission,overlap,model_v,rate_v,corrected_v,coincidence_rate_cps,mc_raw_v,mc_sigma,mc_corrected_v";

impl CurveRow {
    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.6}"));
        format!(
            "{:.3},{:.6e},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{}",
            self.length_km,
            self.transmission,
            self.overlap,
            self.model_v,
            self.rate_v,
            self.corrected_v,
            self.coincidence_rate_cps,
            opt(self.mc_raw_v),
            opt(self.mc_sigma),
            opt(self.mc_corrected_v)
        )
    }
}

/// Matplotlib script drawing visibility against length from the CSV file
/// `csv_name` in the same directory.
pub fn curve_plot_script(csv_name: &str, title: &str) -> String {
    format!(
        r#"import csv
import os
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
rows = list(csv.DictReader(open(os.path.join(here, "{csv_name}"))))
L = [float(r["length_km"]) for r in rows]

def col(name):
    return [(l, float(r[name])) for l, r in zip(L, rows) if r[name]]

fig, ax = plt.subplots()
ax.plot(L, [float(r["model_v"]) for r in rows], "-", label="model")
mc = col("mc_raw_v")
if mc:
    err = [float(r["mc_sigma"]) for r in rows if r["mc_raw_v"]]
    ax.errorbar([p[0] for p in mc], [p[1] for p in mc], yerr=err, fmt="o", label="simulated raw")
ax.plot(L, [float(r["corrected_v"]) for r in rows], "s--", label="background corrected")
ax.set_xlabel("fiber length (km)")
ax.set_ylabel("visibility")
ax.set_title("{title}")
ax.legend()
fig.savefig(os.path.join(here, "visibility.png"), dpi=150)
"#
    )
}

#[derive(Debug, Clone)]
pub struct TomographySummary {
    pub length_km: f64,
    pub log_negativity_raw_mean: f64,
    pub log_negativity_raw_sd: f64,
    pub log_negativity_corrected_mean: f64,
    pub log_negativity_corrected_sd: f64,
    /// Log-negativity of the transmitted state without detection noise.
    pub log_negativity_transmitted: f64,
    pub background_cps: f64,
    pub results: Vec<TomographyResult>,
}

#[derive(Debug, Clone)]
pub struct ReachReport {
    pub params: VisibilityModelParams,
    pub reach: Reach,
    pub sensitivity: Vec<(f64, Option<Reach>)>,
}

/// Visibility of the recorded HV counts without background removal.
pub fn records_visibility(records: &[CountRecord]) -> Result<f64> {
    raw_visibility(records)
}
