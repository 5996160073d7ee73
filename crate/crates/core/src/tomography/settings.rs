use nalgebra::SMatrix;

use crate::linalg::{kron, paulis, trace_product_re, Mat4};
use crate::polarization::AnalyzerSetting::{self, *};

/// The sixteen analyzer pairs, in acquisition order.
pub const TOMOGRAPHY_SETTINGS: [(AnalyzerSetting, AnalyzerSetting); 16] = [
    (H, H),
    (H, V),
    (V, H),
    (V, V),
    (H, D),
    (V, D),
    (H, R),
    (V, R),
    (D, H),
    (D, V),
    (D, D),
    (D, R),
    (R, H),
    (R, V),
    (R, D),
    (R, R),
];

pub type Mat16 = SMatrix<f64, 16, 16>;

pub fn measurement_operators() -> [Mat4; 16] {
    TOMOGRAPHY_SETTINGS.map(|(a, b)| kron(&a.projector(), &b.projector()))
}

/// Two-qubit Pauli products σj⊗σk, index 4j + k.
pub fn pauli_products() -> [Mat4; 16] {
    let p = paulis();
    std::array::from_fn(|n| kron(&p[n / 4], &p[n % 4]))
}

/// Real matrix A with A[i][n] = Tr(M_i · σ_n)/4, mapping Pauli coefficients
/// of ρ to measurement probabilities.
pub fn design_matrix() -> Mat16 {
    let m = measurement_operators();
    let s = pauli_products();
    Mat16::from_fn(|i, n| trace_product_re(&m[i], &s[n]) / 4.0)
}
