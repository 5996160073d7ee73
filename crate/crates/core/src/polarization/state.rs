use serde::{Deserialize, Serialize};

use super::channel::{PolarizationChannel, Qubit};
use super::setting::AnalyzerSetting;
use crate::error::{Error, Result};
use crate::linalg::{c, eigh, eigvalsh, hermiticity_error, kron, outer4, trace_product_re, Ket4, Mat2, Mat4, C64};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bell {
    #[serde(rename = "phi+")]
    PhiPlus,
    #[serde(rename = "phi-")]
    PhiMinus,
}

/// Density matrix of a polarization photon pair, basis |HH>,|HV>,|VH>,|VV>.
///
/// Construction validates Hermiticity, unit trace and positivity, so every
/// value of this type is a physical state.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    rho: Mat4,
}

impl TwoQubitState {
    pub fn new(rho: Mat4) -> Result<Self> {
        let herm = hermiticity_error(&rho);
        if !herm.is_finite() || herm > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = rho.trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let min = eigvalsh(&rho)[0];
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { rho })
    }

    /// Symmetrizes and renormalizes `m` before validating. For matrices that
    /// are physical up to accumulated rounding.
    pub fn from_numerical(m: &Mat4) -> Result<Self> {
        let h = (m + m.adjoint()).scale(0.5);
        let tr = h.trace().re;
        if !(tr.is_finite() && tr > 0.0) {
            return Err(Error::InvalidState(format!("trace {tr} is not positive")));
        }
        Self::new(h.unscale(tr))
    }

    /// Closest state obtained by clipping negative eigenvalues of the
    /// Hermitian part of `m` and renormalizing.
    pub fn project_physical(m: &Mat4) -> Result<Self> {
        let (vals, vecs) = eigh(m);
        let clipped = vals.map(|v| c(v.max(0.0), 0.0));
        let sum: f64 = clipped.iter().map(|z| z.re).sum();
        if sum <= 0.0 {
            return Err(Error::InvalidState("no positive spectrum to project".into()));
        }
        let out = vecs * Mat4::from_diagonal(&clipped) * vecs.adjoint();
        Self::from_numerical(&out)
    }

    pub fn pure(psi: &Ket4) -> Result<Self> {
        let n = psi.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidInput("zero state vector".into()));
        }
        Self::from_numerical(&outer4(&psi.unscale(n)))
    }

    pub fn bell(which: Bell, phase: f64) -> Self {
        let phase = match which {
            Bell::PhiPlus => phase,
            Bell::PhiMinus => phase + std::f64::consts::PI,
        };
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = Ket4::new(c(s, 0.0), C64::default(), C64::default(), C64::from_polar(s, phase));
        let mut rho = outer4(&psi);
        // keep exact zeros/halves on the corners
        rho = (rho + rho.adjoint()).scale(0.5);
        Self { rho }
    }

    pub fn phi_plus() -> Self {
        Self::bell(Bell::PhiPlus, 0.0)
    }

    pub fn maximally_mixed() -> Self {
        Self {
            rho: Mat4::identity().scale(0.25),
        }
    }

    /// p·|Φ+><Φ+| + (1−p)·I/4.
    pub fn werner(p: f64) -> Result<Self> {
        if !(-1.0 / 3.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!("Werner weight {p} outside [-1/3, 1]")));
        }
        Ok(Self::mix(&Self::phi_plus(), &Self::maximally_mixed(), p))
    }

    /// w·a + (1−w)·b for w in [0, 1].
    pub fn mix(a: &Self, b: &Self, w: f64) -> Self {
        Self {
            rho: a.rho.scale(w) + b.rho.scale(1.0 - w),
        }
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.rho
    }

    pub fn into_matrix(self) -> Mat4 {
        self.rho
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        eigvalsh(&self.rho)
    }

    pub fn purity(&self) -> f64 {
        trace_product_re(&self.rho, &self.rho)
    }

    pub fn probability(&self, a: AnalyzerSetting, b: AnalyzerSetting) -> f64 {
        coincidence_probability(self, a, b)
    }

    pub fn apply_local_unitaries(&self, ua: &Mat2, ub: &Mat2) -> Self {
        let u = kron(ua, ub);
        Self {
            rho: hermitize(&(u * self.rho * u.adjoint())),
        }
    }

    pub fn apply_channel(&self, ch: &PolarizationChannel, which: Qubit) -> Self {
        apply_channel(self, ch, which)
    }

    /// Half the trace norm of the difference.
    pub fn trace_distance(&self, other: &Self) -> f64 {
        let d = self.rho - other.rho;
        0.5 * eigvalsh(&d).iter().map(|v| v.abs()).sum::<f64>()
    }
}

fn hermitize(m: &Mat4) -> Mat4 {
    (m + m.adjoint()).scale(0.5)
}

/// Born probability Tr[(Πa ⊗ Πb) ρ] of a coincidence in settings (a, b).
pub fn coincidence_probability(rho: &TwoQubitState, a: AnalyzerSetting, b: AnalyzerSetting) -> f64 {
    let psi = crate::linalg::kron_ket(&a.ket(), &b.ket());
    let v = rho.rho * psi;
    psi.dotc(&v).re.clamp(0.0, 1.0)
}

/// Transpose on the second qubit's indices.
pub fn partial_transpose(rho: &TwoQubitState) -> Mat4 {
    let m = &rho.rho;
    Mat4::from_fn(|r, col| {
        let (i, k) = (r / 2, r % 2);
        let (j, l) = (col / 2, col % 2);
        m[(2 * i + l, 2 * j + k)]
    })
}

pub fn negativity(rho: &TwoQubitState) -> f64 {
    let ev = eigvalsh(&partial_transpose(rho));
    ev.iter().map(|&l| (l.abs() - l) / 2.0).sum::<f64>().abs()
}

pub fn log_negativity(rho: &TwoQubitState) -> f64 {
    (2.0 * negativity(rho) + 1.0).log2()
}

/// <ψ|ρ|ψ> for a pure target state.
pub fn fidelity_to_pure(rho: &TwoQubitState, target: &TwoQubitState) -> Result<f64> {
    let purity = target.purity();
    if (purity - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "fidelity target is not pure (purity {purity})"
        )));
    }
    Ok(trace_product_re(&rho.rho, &target.rho).clamp(0.0, 1.0))
}

/// Signed visibility (Max − Min)/(Max + Min) with Max the parallel-setting
/// probabilities of `basis` and Min the crossed ones.
pub fn visibility_of_state(rho: &TwoQubitState, basis: super::Basis) -> Result<f64> {
    let (s, t) = basis.settings();
    let max = rho.probability(s, s) + rho.probability(t, t);
    let min = rho.probability(s, t) + rho.probability(t, s);
    if max + min <= 0.0 {
        return Err(Error::Undefined("visibility with zero total probability".into()));
    }
    Ok((max - min) / (max + min))
}

pub fn apply_channel(rho: &TwoQubitState, ch: &PolarizationChannel, which: Qubit) -> TwoQubitState {
    let id = Mat2::identity();
    let mut out = Mat4::zeros();
    for k in ch.kraus() {
        let op = match which {
            Qubit::First => kron(k, &id),
            Qubit::Second => kron(&id, k),
        };
        out += op * rho.rho * op.adjoint();
    }
    TwoQubitState { rho: hermitize(&out) }
}

#[cfg(test)]
mod tests {
    use super::super::Basis;
    use super::*;
    use crate::linalg::{pauli_x, su2_rotation, ZERO};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use AnalyzerSetting::*;

    #[test]
    fn bell_states_have_expected_corners() {
        let p = TwoQubitState::bell(Bell::PhiPlus, 0.0);
        let m = p.matrix();
        for &(i, j) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
            assert_abs_diff_eq!(m[(i, j)].re, 0.5, epsilon = 1e-15);
        }
        assert_eq!(m[(1, 1)], ZERO);

        let m = TwoQubitState::bell(Bell::PhiMinus, 0.0).into_matrix();
        assert_abs_diff_eq!(m[(0, 3)].re, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(3, 0)].re, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(3, 3)].re, 0.5, epsilon = 1e-15);

        let m = TwoQubitState::bell(Bell::PhiPlus, std::f64::consts::FRAC_PI_2).into_matrix();
        assert_abs_diff_eq!(m[(0, 3)].re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m[(0, 3)].im, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn born_rule_values() {
        let p = TwoQubitState::phi_plus();
        assert_abs_diff_eq!(p.probability(H, H), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.probability(H, V), 0.0, epsilon = 1e-15);
        // direct arithmetic: <DA|Φ+> = (1·1 + 1·(−1))/(2√2) = 0
        assert_abs_diff_eq!(p.probability(D, A), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.probability(D, D), 0.5, epsilon = 1e-15);
        // <RR|Φ+> = (1 + (−i)(−i))/(2√2) = 0
        assert_abs_diff_eq!(p.probability(R, R), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.probability(R, L), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn invalid_matrices_rejected() {
        let mut m = Mat4::identity().scale(0.25);
        m[(0, 1)] = c(0.1, 0.0);
        assert!(TwoQubitState::new(m).is_err());
        assert!(TwoQubitState::new(Mat4::identity().scale(0.3)).is_err());
        let neg = Mat4::from_diagonal(&nalgebra::Vector4::new(c(1.1, 0.0), c(-0.1, 0.0), ZERO, ZERO));
        assert!(TwoQubitState::new(neg).is_err());
    }

    #[test]
    fn partial_transpose_examples() {
        let mixed = TwoQubitState::maximally_mixed();
        assert_eq!(partial_transpose(&mixed), *mixed.matrix());

        let ev = eigvalsh(&partial_transpose(&TwoQubitState::phi_plus()));
        let expected = [-0.5, 0.5, 0.5, 0.5];
        for (a, b) in ev.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }

        let hh = TwoQubitState::pure(&crate::linalg::kron_ket(&H.ket(), &H.ket())).unwrap();
        assert_eq!(partial_transpose(&hh), *hh.matrix());
    }

    #[test]
    fn negativity_examples() {
        assert_abs_diff_eq!(negativity(&TwoQubitState::phi_plus()), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(negativity(&TwoQubitState::maximally_mixed()), 0.0, epsilon = 1e-12);
        let w = TwoQubitState::werner(0.9).unwrap();
        assert_abs_diff_eq!(negativity(&w), 0.425, epsilon = 1e-12);
        assert_abs_diff_eq!(log_negativity(&TwoQubitState::phi_plus()), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(log_negativity(&TwoQubitState::maximally_mixed()), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(log_negativity(&w), 1.85_f64.log2(), epsilon = 1e-12);
    }

    #[test]
    fn fidelity_examples() {
        let phi = TwoQubitState::phi_plus();
        assert_abs_diff_eq!(fidelity_to_pure(&phi, &phi).unwrap(), 1.0, epsilon = 1e-12);
        let mixed = TwoQubitState::maximally_mixed();
        assert_abs_diff_eq!(fidelity_to_pure(&mixed, &phi).unwrap(), 0.25, epsilon = 1e-12);
        let w = TwoQubitState::werner(0.9).unwrap();
        assert_abs_diff_eq!(fidelity_to_pure(&w, &phi).unwrap(), 0.925, epsilon = 1e-12);
        assert!(fidelity_to_pure(&phi, &mixed).is_err());
    }

    #[test]
    fn visibility_examples() {
        let phi = TwoQubitState::phi_plus();
        assert_abs_diff_eq!(visibility_of_state(&phi, Basis::HV).unwrap(), 1.0, epsilon = 1e-12);
        let w = TwoQubitState::werner(0.9).unwrap();
        assert_abs_diff_eq!(visibility_of_state(&w, Basis::HV).unwrap(), 0.9, epsilon = 1e-12);
        let minus = TwoQubitState::bell(Bell::PhiMinus, 0.0);
        let v = visibility_of_state(&minus, Basis::DA).unwrap();
        assert_abs_diff_eq!(v, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn channel_examples() {
        let phi = TwoQubitState::phi_plus();
        let same = phi.apply_channel(&PolarizationChannel::identity(), Qubit::Second);
        assert!((same.matrix() - phi.matrix()).norm() < 1e-15);

        let deph = PolarizationChannel::phase_damping(0.0, &Mat2::identity()).unwrap();
        let out = phi.apply_channel(&deph, Qubit::Second);
        let expected = Mat4::from_diagonal(&nalgebra::Vector4::new(c(0.5, 0.0), ZERO, ZERO, c(0.5, 0.0)));
        assert!((out.matrix() - expected).norm() < 1e-15);

        let flip = PolarizationChannel::unitary(&pauli_x()).unwrap();
        let psi = phi.apply_channel(&flip, Qubit::Second);
        let m = psi.matrix();
        for &(i, j) in &[(1, 1), (1, 2), (2, 1), (2, 2)] {
            assert_abs_diff_eq!(m[(i, j)].re, 0.5, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(m[(0, 0)].re, 0.0, epsilon = 1e-15);
    }

    fn random_unitary(a: f64, b: f64, g: f64, d: f64) -> Mat2 {
        su2_rotation([0.0, 0.0, 1.0], a) * su2_rotation([0.0, 1.0, 0.0], b) * su2_rotation([0.0, 0.0, 1.0], g) * c(d.cos(), d.sin())
    }

    fn random_state(params: &[f64]) -> TwoQubitState {
        let l = Mat4::from_fn(|i, j| c(params[4 * i + j], params[16 + 4 * i + j]));
        TwoQubitState::from_numerical(&(l * l.adjoint())).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn werner_negativity_closed_form(p in 0.0f64..=1.0) {
            let w = TwoQubitState::werner(p).unwrap();
            let expected = ((3.0 * p - 1.0) / 4.0).max(0.0);
            prop_assert!((negativity(&w) - expected).abs() < 1e-10);
        }

        #[test]
        fn negativity_is_local_unitary_invariant(
            params in proptest::collection::vec(-1.0f64..1.0, 32),
            angles in proptest::collection::vec(0.0f64..6.3, 8),
        ) {
            let rho = random_state(&params);
            let ua = random_unitary(angles[0], angles[1], angles[2], angles[3]);
            let ub = random_unitary(angles[4], angles[5], angles[6], angles[7]);
            let rotated = rho.apply_local_unitaries(&ua, &ub);
            prop_assert!((negativity(&rho) - negativity(&rotated)).abs() < 1e-10);
        }

        #[test]
        fn basis_probabilities_sum_to_one(params in proptest::collection::vec(-1.0f64..1.0, 32)) {
            let rho = random_state(&params);
            for basis in [Basis::HV, Basis::DA, Basis::RL] {
                let (s, t) = basis.settings();
                let total: f64 = [(s, s), (s, t), (t, s), (t, t)].iter().map(|&(a, b)| rho.probability(a, b)).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn kraus_channels_preserve_trace(
            params in proptest::collection::vec(-1.0f64..1.0, 32),
            gamma in 0.0f64..=1.0,
            angles in proptest::collection::vec(0.0f64..6.3, 4),
        ) {
            let rho = random_state(&params);
            let axes = random_unitary(angles[0], angles[1], angles[2], angles[3]);
            let ch = PolarizationChannel::phase_damping(gamma, &axes).unwrap()
                .then(&PolarizationChannel::unitary(&axes).unwrap());
            for q in [Qubit::First, Qubit::Second] {
                let out = rho.apply_channel(&ch, q);
                prop_assert!((out.matrix().trace().re - 1.0).abs() < 1e-12);
                prop_assert!(TwoQubitState::new(*out.matrix()).is_ok());
            }
        }
    }
}
