//! Small dense complex matrices used throughout the crate.
//!
//! Two-qubit operators are `Matrix4<Complex64>` in the product basis
//! |HH>, |HV>, |VH>, |VV>; single-qubit operators are `Matrix2<Complex64>`
//! in the basis |H>, |V>.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;
pub type Mat4 = Matrix4<C64>;
pub type Ket2 = Vector2<C64>;
pub type Ket4 = Vector4<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn pauli_x() -> Mat2 {
    Mat2::new(ZERO, ONE, ONE, ZERO)
}

pub fn pauli_y() -> Mat2 {
    Mat2::new(ZERO, -I, I, ZERO)
}

pub fn pauli_z() -> Mat2 {
    Mat2::new(ONE, ZERO, ZERO, -ONE)
}

/// Identity, X, Y, Z.
pub fn paulis() -> [Mat2; 4] {
    [Mat2::identity(), pauli_x(), pauli_y(), pauli_z()]
}

pub fn kron(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut out = Mat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn kron_ket(a: &Ket2, b: &Ket2) -> Ket4 {
    Ket4::new(a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
}

pub fn outer2(v: &Ket2) -> Mat2 {
    v * v.adjoint()
}

pub fn outer4(v: &Ket4) -> Mat4 {
    v * v.adjoint()
}

/// Real part of the trace of `a * b`, without forming the product.
pub fn trace_product_re(a: &Mat4, b: &Mat4) -> f64 {
    let mut acc = 0.0;
    for i in 0..4 {
        for k in 0..4 {
            let x = a[(i, k)] * b[(k, i)];
            acc += x.re;
        }
    }
    acc
}

pub fn hermitian_part(m: &Mat4) -> Mat4 {
    (m + m.adjoint()).scale(0.5)
}

/// Largest absolute deviation of `m` from its adjoint.
pub fn hermiticity_error(m: &Mat4) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian 4x4 matrix.
///
/// Only the Hermitian part of `m` is used.
pub fn eigh(m: &Mat4) -> (Vector4<f64>, Mat4) {
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut values = Vector4::zeros();
    let mut vectors = Mat4::zeros();
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn eigvalsh(m: &Mat4) -> [f64; 4] {
    let (v, _) = eigh(m);
    [v[0], v[1], v[2], v[3]]
}

/// Rotation of the Poincaré sphere by `angle` about the unit axis `n`,
/// as the SU(2) matrix exp(-i angle/2 n.sigma).
pub fn su2_rotation(axis: [f64; 3], angle: f64) -> Mat2 {
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let (nx, ny, nz) = (axis[0] / norm, axis[1] / norm, axis[2] / norm);
    let (s, co) = (0.5 * angle).sin_cos();
    Mat2::identity().scale(co)
        - (pauli_x().scale(nx) + pauli_y().scale(ny) + pauli_z().scale(nz)) * c(0.0, s)
}

/// Deviation of `u` from unitarity, max |(U^dagger U - 1)_ij|.
pub fn unitarity_error(u: &Mat2) -> f64 {
    let d = u.adjoint() * u - Mat2::identity();
    d.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Rotation angle on the Poincaré sphere of a single-qubit unitary
/// (global phase ignored).
pub fn rotation_angle(u: &Mat2) -> f64 {
    let det = u.determinant();
    let phase = det.sqrt();
    let tr = (u[(0, 0)] + u[(1, 1)]) / phase;
    let half = (tr.re.abs() / 2.0).clamp(0.0, 1.0);
    2.0 * half.acos()
}

/// Bloch vector of the single-qubit operator `rho` (trace assumed 1).
pub fn bloch_vector(rho: &Mat2) -> [f64; 3] {
    [
        (rho * pauli_x()).trace().re,
        (rho * pauli_y()).trace().re,
        (rho * pauli_z()).trace().re,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn char_poly_residual(m: &Mat4, lambda: f64) -> f64 {
        (m - Mat4::identity() * c(lambda, 0.0)).determinant().norm()
    }

    #[test]
    fn eigenvalues_are_roots_of_characteristic_polynomial() {
        let a = Mat4::from_fn(|i, j| c((i + 2 * j) as f64 * 0.1, (i as f64 - j as f64) * 0.07));
        let h = hermitian_part(&a);
        let vals = eigvalsh(&h);
        let scale = vals.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
        for &v in &vals {
            // det is a degree-4 polynomial; scale the residual accordingly.
            assert!(char_poly_residual(&h, v) / scale.powi(4) < 1e-10, "residual for {v}");
        }
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn eigh_reconstructs_matrix() {
        let a = Mat4::from_fn(|i, j| c((i * j) as f64 * 0.3 - 0.2, (i as f64) * 0.1 - (j as f64) * 0.05));
        let h = hermitian_part(&a);
        let (vals, vecs) = eigh(&h);
        let d = Mat4::from_diagonal(&vals.map(|v| c(v, 0.0)));
        let back = vecs * d * vecs.adjoint();
        assert!((back - h).norm() < 1e-12);
    }

    #[test]
    fn kron_matches_index_convention() {
        let k = kron(&pauli_x(), &Mat2::identity());
        // X on the first qubit swaps |HH> <-> |VH>
        assert_eq!(k[(2, 0)], ONE);
        assert_eq!(k[(0, 2)], ONE);
        assert_eq!(k[(1, 0)], ZERO);
    }

    #[test]
    fn rotation_angle_roundtrip() {
        for &angle in &[0.0, 0.3, 1.2, 2.9] {
            let u = su2_rotation([0.3, -0.4, 0.8], angle);
            assert!(unitarity_error(&u) < 1e-14);
            assert_abs_diff_eq!(rotation_angle(&u), angle, epsilon = 1e-7);
            // global phase does not matter
            let phased = u * c(0.6, 0.8);
            assert_abs_diff_eq!(rotation_angle(&phased), angle, epsilon = 1e-7);
        }
    }
}
