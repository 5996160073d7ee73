use super::settings::{design_matrix, pauli_products, TOMOGRAPHY_SETTINGS};
use crate::error::{Error, Result};
use crate::linalg::{c, Mat4};
use crate::source::CountRecord;

/// Orders records by the standard acquisition sequence, checking that all
/// sixteen settings are present exactly once.
pub fn ordered_records(counts: &[CountRecord]) -> Result<[CountRecord; 16]> {
    if counts.len() != 16 {
        return Err(Error::InvalidInput(format!("expected 16 records, got {}", counts.len())));
    }
    let mut out: Vec<CountRecord> = Vec::with_capacity(16);
    for (a, b) in TOMOGRAPHY_SETTINGS {
        let mut found = counts.iter().filter(|r| r.setting_a == a && r.setting_b == b);
        let r = found
            .next()
            .ok_or_else(|| Error::InvalidInput(format!("missing tomography setting {a}{b}")))?;
        if found.next().is_some() {
            return Err(Error::InvalidInput(format!("duplicate tomography setting {a}{b}")));
        }
        r.validate()?;
        out.push(r.clone());
    }
    Ok(out.try_into().expect("sixteen records"))
}

/// Linear inversion of the sixteen count rates. The result is Hermitian with
/// unit trace but need not be positive.
pub fn linear_inversion(counts: &[CountRecord]) -> Result<Mat4> {
    let recs = ordered_records(counts)?;
    let y = nalgebra::SVector::<f64, 16>::from_fn(|i, _| recs[i].coincidences / recs[i].duration_s);
    let a = design_matrix();
    let x = a
        .lu()
        .solve(&y)
        .ok_or_else(|| Error::Singular("tomography design matrix".into()))?;
    if !(x[0] > 0.0) {
        return Err(Error::Singular("count rates do not determine a state with positive trace".into()));
    }
    let s = pauli_products();
    let mut rho = Mat4::zeros();
    for n in 0..16 {
        rho += s[n] * c(x[n] / (4.0 * x[0]), 0.0);
    }
    Ok((rho + rho.adjoint()).scale(0.5))
}
