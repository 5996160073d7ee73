use crate::error::{Error, Result};
use crate::linalg::{outer2, unitarity_error, Mat2};

pub const KRAUS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Qubit {
    First,
    Second,
}

/// Completely positive trace-preserving map on one polarization qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationChannel {
    kraus: Vec<Mat2>,
}

impl PolarizationChannel {
    pub fn new(kraus: Vec<Mat2>) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::InvalidInput("channel needs at least one Kraus operator".into()));
        }
        let sum: Mat2 = kraus.iter().map(|k| k.adjoint() * k).sum();
        let dev = (sum - Mat2::identity()).iter().fold(0.0_f64, |a, z| a.max(z.norm()));
        if !(dev <= KRAUS_TOL) {
            return Err(Error::InvalidInput(format!("Kraus operators not complete (deviation {dev:e})")));
        }
        Ok(Self { kraus })
    }

    pub fn identity() -> Self {
        Self {
            kraus: vec![Mat2::identity()],
        }
    }

    pub fn unitary(u: &Mat2) -> Result<Self> {
        let err = unitarity_error(u);
        if !(err <= KRAUS_TOL) {
            return Err(Error::InvalidInput(format!("matrix is not unitary (deviation {err:e})")));
        }
        Ok(Self { kraus: vec![*u] })
    }

    /// Phase damping in the basis given by the columns of `axes`: populations
    /// along the axes are kept, coherences between them are multiplied by
    /// `gamma`.
    pub fn phase_damping(gamma: f64, axes: &Mat2) -> Result<Self> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidInput(format!("dephasing factor {gamma} outside [0, 1]")));
        }
        if unitarity_error(axes) > 1e-10 {
            return Err(Error::InvalidInput("dephasing axes are not orthonormal".into()));
        }
        if gamma == 1.0 {
            return Ok(Self::identity());
        }
        let p0 = outer2(&axes.column(0).into_owned());
        let p1 = outer2(&axes.column(1).into_owned());
        let z = p0 - p1;
        let k0 = Mat2::identity().scale(((1.0 + gamma) / 2.0).sqrt());
        let k1 = z.scale(((1.0 - gamma) / 2.0).sqrt());
        Ok(Self { kraus: vec![k0, k1] })
    }

    pub fn kraus(&self) -> &[Mat2] {
        &self.kraus
    }

    /// Apply `self` first, then `next`.
    pub fn then(&self, next: &PolarizationChannel) -> Self {
        let mut kraus = Vec::with_capacity(self.kraus.len() * next.kraus.len());
        for b in &next.kraus {
            for a in &self.kraus {
                kraus.push(b * a);
            }
        }
        Self { kraus }
    }

    /// Action on a single-qubit density matrix.
    pub fn apply_single(&self, rho: &Mat2) -> Mat2 {
        self.kraus.iter().map(|k| k * rho * k.adjoint()).sum()
    }
}
