use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::wave::random_axis;
use crate::error::{Error, Result};
use crate::linalg::{c, su2_rotation, Mat2, ONE, ZERO};
use crate::optimize::{golden_section, nelder_mead};
use crate::polarization::{AnalyzerSetting, TwoQubitState};

/// Accumulated birefringence rotation of one fiber arm.
///
/// The rotation is held as a unit quaternion (w, x, y, z) representing the
/// SU(2) matrix w·I − i(x·σx + y·σy + z·σz); it is renormalized after every
/// composition so unitarity does not decay over long walks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftState {
    quaternion: [f64; 4],
    pub rate_rad_per_hour: f64,
}

impl DriftState {
    pub fn new(rate_rad_per_hour: f64) -> Self {
        Self {
            quaternion: [1.0, 0.0, 0.0, 0.0],
            rate_rad_per_hour,
        }
    }

    pub fn unitary(&self) -> Mat2 {
        let [w, x, y, z] = self.quaternion;
        Mat2::new(c(w, -z), c(-y, -x), c(y, -x), c(w, z))
    }

    /// Rotation angle on the Poincaré sphere.
    pub fn rotation_angle(&self) -> f64 {
        2.0 * self.quaternion[0].abs().clamp(0.0, 1.0).acos()
    }

    fn compose(&self, axis: [f64; 3], angle: f64) -> Self {
        let (s, w2) = (angle / 2.0).sin_cos();
        let (x2, y2, z2) = (s * axis[0], s * axis[1], s * axis[2]);
        let [w1, x1, y1, z1] = self.quaternion;
        let mut q = [
            w2 * w1 - x2 * x1 - y2 * y1 - z2 * z1,
            w2 * x1 + x2 * w1 + y2 * z1 - z2 * y1,
            w2 * y1 - x2 * z1 + y2 * w1 + z2 * x1,
            w2 * z1 + x2 * y1 - y2 * x1 + z2 * w1,
        ];
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        q.iter_mut().for_each(|v| *v /= n);
        Self {
            quaternion: q,
            rate_rad_per_hour: self.rate_rad_per_hour,
        }
    }
}

/// One random-walk step: a rotation about a uniformly random axis by an angle
/// drawn uniformly from [0.5, 1.5]·rate·hours, applied after `d`.
pub fn advance_drift(d: &DriftState, hours: f64, seed: u64) -> Result<DriftState> {
    if !(hours >= 0.0) {
        return Err(Error::InvalidInput(format!("negative drift time {hours}")));
    }
    if hours == 0.0 {
        return Ok(d.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axis = random_axis(&mut rng);
    let u: f64 = rng.random();
    Ok(d.compose(axis, d.rate_rad_per_hour * hours * (0.5 + u)))
}

#[derive(Debug, Clone)]
pub struct Compensation {
    /// Unitary to apply on the compensated arm.
    pub unitary: Mat2,
    /// p(V,H) + p(D,A) after compensation.
    pub residual: f64,
}

pub const DEFAULT_MAX_RESIDUAL: f64 = 1e-6;

fn euler(p: &[f64]) -> Mat2 {
    let z = [0.0, 0.0, 1.0];
    su2_rotation(z, p[0]) * su2_rotation([0.0, 1.0, 0.0], p[1]) * su2_rotation(z, p[2])
}

fn phase_plate(phi: f64) -> Mat2 {
    Mat2::new(ONE, ZERO, ZERO, c(phi.cos(), phi.sin()))
}

/// Two-stage compensation of an unknown rotation on the second arm.
///
/// `oracle(C, a, b)` returns the coincidence probability in settings (a, b)
/// after applying the candidate compensator `C` on the second arm. Stage one
/// minimizes p(V,H) over a general rotation; stage two minimizes p(D,A) over
/// the relative H/V phase.
pub fn compensate_drift<F>(oracle: F, max_residual: f64) -> Result<Compensation>
where
    F: Fn(&Mat2, AnalyzerSetting, AnalyzerSetting) -> f64,
{
    use AnalyzerSetting::*;
    let stage1 = |p: &[f64]| oracle(&euler(p), V, H);

    let starts: [[f64; 3]; 4] = [[0.0, 0.0, 0.0], [0.7, 1.6, -0.4], [2.1, 2.6, 1.0], [-1.3, 0.9, 2.4]];
    let mut best: Option<crate::optimize::Minimum> = None;
    for s in &starts {
        let m = nelder_mead(stage1, s, 0.6, 1e-18, 4000);
        if best.as_ref().map_or(true, |b| m.value < b.value) {
            best = Some(m);
        }
        if best.as_ref().is_some_and(|b| b.value < 1e-14) {
            break;
        }
    }
    let rotation = euler(&best.expect("at least one start").x);

    let stage2 = |phi: f64| oracle(&(phase_plate(phi) * rotation), D, A);
    let n_grid = 64;
    let step = std::f64::consts::TAU / n_grid as f64;
    let k = (0..n_grid)
        .min_by(|&a, &b| stage2(a as f64 * step).total_cmp(&stage2(b as f64 * step)))
        .unwrap_or(0);
    let centre = k as f64 * step;
    let (phi, _) = golden_section(stage2, centre - step, centre + step, 1e-10);

    let unitary = phase_plate(phi) * rotation;
    let residual = oracle(&unitary, V, H) + oracle(&unitary, D, A);
    if !(residual <= max_residual) {
        return Err(Error::Convergence {
            what: "drift compensation",
            residual,
        });
    }
    Ok(Compensation { unitary, residual })
}

/// Compensates the second arm of `rho` using its exact Born probabilities.
pub fn compensate_state(rho: &TwoQubitState, max_residual: f64) -> Result<Compensation> {
    let id = Mat2::identity();
    compensate_drift(
        |comp, a, b| rho.apply_local_unitaries(&id, comp).probability(a, b),
        max_residual,
    )
}
