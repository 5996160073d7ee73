use nalgebra::Cholesky;

use super::linear::{linear_inversion, ordered_records};
use super::settings::measurement_operators;
use crate::error::{Error, Result};
use crate::linalg::{c, eigvalsh, hermitian_part, trace_product_re, Mat4};
use crate::optimize::{bfgs, BfgsOptions};
use crate::polarization::TwoQubitState;
use crate::source::CountRecord;

/// Weight of the maximally mixed state added to the initial guess so that it
/// has a Cholesky factor.
const INIT_MIXING: f64 = 1e-3;

/// Most negative eigenvalue of a linear inversion still taken as rounding.
const PHYSICAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct MleOutcome {
    pub state: TwoQubitState,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

pub(crate) fn lower_from_params(t: &[f64]) -> Mat4 {
    let mut l = Mat4::zeros();
    for i in 0..4 {
        l[(i, i)] = c(t[i], 0.0);
    }
    let mut k = 4;
    for r in 1..4 {
        for col in 0..r {
            l[(r, col)] = c(t[k], t[k + 1]);
            k += 2;
        }
    }
    l
}

fn params_from_lower(l: &Mat4) -> Vec<f64> {
    let mut t = vec![0.0; 16];
    for i in 0..4 {
        t[i] = l[(i, i)].re;
    }
    let mut k = 4;
    for r in 1..4 {
        for col in 0..r {
            t[k] = l[(r, col)].re;
            t[k + 1] = l[(r, col)].im;
            k += 2;
        }
    }
    t
}

struct Likelihood {
    ops: [Mat4; 16],
    n: [f64; 16],
    exposure: [f64; 16],
    n_total: f64,
}

impl Likelihood {
    fn new(recs: &[CountRecord; 16]) -> Self {
        let n = std::array::from_fn(|i| recs[i].coincidences);
        Self {
            ops: measurement_operators(),
            n,
            exposure: std::array::from_fn(|i| recs[i].duration_s),
            n_total: n.iter().sum(),
        }
    }

    /// Poisson log-likelihood with the overall rate profiled out; invariant
    /// under rescaling of `rho`. Returns the per-setting predicted traces too.
    fn value(&self, rho: &Mat4) -> (f64, [f64; 16]) {
        let tr: [f64; 16] = std::array::from_fn(|i| trace_product_re(&self.ops[i], rho));
        let norm: f64 = tr.iter().zip(&self.exposure).map(|(t, d)| t * d).sum();
        if !(norm > 0.0) {
            return (f64::NEG_INFINITY, tr);
        }
        let mut ll = 0.0;
        for i in 0..16 {
            if self.n[i] > 0.0 {
                let p = self.exposure[i] * tr[i] / norm;
                if !(p > 0.0) {
                    return (f64::NEG_INFINITY, tr);
                }
                ll += self.n[i] * p.ln();
            }
        }
        (ll, tr)
    }

    /// Negative log-likelihood plus a penalty pinning Tr(L L†) to one, and
    /// its gradient with respect to the sixteen parameters of L.
    fn objective(&self, t: &[f64], grad: &mut [f64]) -> f64 {
        let l = lower_from_params(t);
        let rho = l * l.adjoint();
        let (ll, tr) = self.value(&rho);
        let norm_sq: f64 = t.iter().map(|v| v * v).sum();
        let lambda = self.n_total.max(1.0);
        let penalty = lambda * (norm_sq - 1.0).powi(2);
        if !ll.is_finite() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return f64::INFINITY;
        }
        let norm: f64 = tr.iter().zip(&self.exposure).map(|(t, d)| t * d).sum();
        let mut w = Mat4::zeros();
        for i in 0..16 {
            let mut coeff = -self.n_total * self.exposure[i] / norm;
            if self.n[i] > 0.0 {
                coeff += self.n[i] / tr[i];
            }
            w += self.ops[i] * c(coeff, 0.0);
        }
        // d(ll)/dL: 2 Re(L† W)_{cr} for the real part of L_rc, −2 Im(L† W)_{cr} for the imaginary part
        let lw = l.adjoint() * w;
        let dpen = 4.0 * lambda * (norm_sq - 1.0);
        for i in 0..4 {
            grad[i] = -2.0 * lw[(i, i)].re + dpen * t[i];
        }
        let mut k = 4;
        for r in 1..4 {
            for col in 0..r {
                grad[k] = -2.0 * lw[(col, r)].re + dpen * t[k];
                grad[k + 1] = 2.0 * lw[(col, r)].im + dpen * t[k + 1];
                k += 2;
            }
        }
        -ll + penalty
    }
}

/// Log-likelihood of `rho` for the given records, up to a constant.
pub fn log_likelihood(counts: &[CountRecord], rho: &TwoQubitState) -> Result<f64> {
    let recs = ordered_records(counts)?;
    Ok(Likelihood::new(&recs).value(rho.matrix()).0)
}

/// Linear inversion reproduces all sixteen count ratios exactly, so it is
/// the unconstrained likelihood maximum; when it is also a valid state, it
/// is the estimate.
fn physical_inversion(counts: &[CountRecord], lik: &Likelihood) -> Option<MleOutcome> {
    let m = linear_inversion(counts).ok()?;
    if eigvalsh(&hermitian_part(&m))[0] < -PHYSICAL_TOL {
        return None;
    }
    let state = TwoQubitState::project_physical(&m).ok()?;
    let log_likelihood = lik.value(state.matrix()).0;
    log_likelihood.is_finite().then_some(MleOutcome {
        state,
        log_likelihood,
        iterations: 0,
        gradient_norm: 0.0,
    })
}

fn initial_factor(counts: &[CountRecord], init: Option<&Mat4>) -> Mat4 {
    let guess = match init {
        Some(m) => TwoQubitState::project_physical(m).ok(),
        None => linear_inversion(counts)
            .ok()
            .and_then(|m| TwoQubitState::project_physical(&m).ok()),
    }
    .unwrap_or_else(TwoQubitState::maximally_mixed);
    let mixed = TwoQubitState::mix(&guess, &TwoQubitState::maximally_mixed(), 1.0 - INIT_MIXING);
    match Cholesky::new(*mixed.matrix()) {
        Some(ch) => ch.l(),
        None => Mat4::identity().scale(0.5),
    }
}

/// Maximum-likelihood state for sixteen-setting counts, optimized over
/// ρ = L L† / Tr(L L†) with L lower triangular.
pub fn mle_reconstruct(counts: &[CountRecord], init: Option<&Mat4>) -> Result<MleOutcome> {
    mle_reconstruct_with(counts, init, default_options())
}

/// Stopping rule for reconstructions. The per-step relative change is held
/// well below 1e-10 because progress towards rank-deficient states is slow
/// and a looser rule stops visibly short of the optimum.
pub fn default_options() -> BfgsOptions {
    BfgsOptions {
        rel_tol: 1e-13,
        ..BfgsOptions::default()
    }
}

pub fn mle_reconstruct_with(counts: &[CountRecord], init: Option<&Mat4>, opts: BfgsOptions) -> Result<MleOutcome> {
    let recs = ordered_records(counts)?;
    let lik = Likelihood::new(&recs);
    if lik.n_total <= 0.0 {
        return Err(Error::InvalidInput("all tomography counts are zero".into()));
    }
    if let Some(exact) = physical_inversion(counts, &lik) {
        return Ok(exact);
    }
    let t0 = params_from_lower(&initial_factor(counts, init));
    let res = bfgs(|t, g| lik.objective(t, g), &t0, opts);
    let l = lower_from_params(&res.x);
    let state = TwoQubitState::from_numerical(&(l * l.adjoint()))?;
    let log_likelihood = lik.value(state.matrix()).0;
    if !res.converged {
        return Err(Error::MleNonConvergence {
            best: Box::new(state),
            log_likelihood,
            gradient_norm: res.gradient_norm,
            iterations: res.iterations,
        });
    }
    Ok(MleOutcome {
        state,
        log_likelihood,
        iterations: res.iterations,
        gradient_norm: res.gradient_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_layout_round_trips() {
        let t: Vec<f64> = (0..16).map(|i| i as f64 * 0.1 - 0.4).collect();
        assert_eq!(params_from_lower(&lower_from_params(&t)), t);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let recs: Vec<CountRecord> = super::super::settings::TOMOGRAPHY_SETTINGS
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| CountRecord {
                setting_a: a,
                setting_b: b,
                duration_s: 1.0 + (i % 3) as f64,
                coincidences: 10.0 + (i * 7 % 11) as f64,
                triggers: 1e6,
            })
            .collect();
        let lik = Likelihood::new(&ordered_records(&recs).unwrap());
        let t: Vec<f64> = (0..16).map(|i| 0.3 + 0.05 * ((i * 5 % 7) as f64 - 3.0)).collect();
        let mut g = vec![0.0; 16];
        lik.objective(&t, &mut g);
        let mut scratch = vec![0.0; 16];
        for k in 0..16 {
            let h = 1e-6;
            let mut tp = t.clone();
            tp[k] += h;
            let mut tm = t.clone();
            tm[k] -= h;
            let fd = (lik.objective(&tp, &mut scratch) - lik.objective(&tm, &mut scratch)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-5 * (1.0 + fd.abs()), "param {k}: {fd} vs {}", g[k]);
        }
    }
}
