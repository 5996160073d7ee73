use std::fmt::Write as _;

use super::state::TwoQubitState;
use crate::error::{Error, Result};
use crate::linalg::{c, Mat4, C64};

pub const DENSITY_HEADER: &str = "# density matrix 4x4, basis HH,HV,VH,VV, row-major, entries re+imj";

fn format_entry(z: C64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:e}{}{:e}j", z.re, sign, z.im.abs())
}

/// Text form: header line, then four rows of comma-separated `re+imj` entries.
pub fn format_density_matrix(rho: &TwoQubitState) -> String {
    let m = rho.matrix();
    let mut out = String::from(DENSITY_HEADER);
    out.push('\n');
    for i in 0..4 {
        let row: Vec<String> = (0..4).map(|j| format_entry(m[(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

fn parse_entry(s: &str, line: usize) -> Result<C64> {
    let err = || Error::Parse {
        line,
        message: format!("bad complex entry {s:?}"),
    };
    let s = s.trim();
    let body = s.strip_suffix('j').ok_or_else(err)?;
    // the sign separating re and im is the last +/- not following an exponent marker
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'))
        .ok_or_else(err)?;
    let re: f64 = body[..split].parse().map_err(|_| err())?;
    let im: f64 = body[split..].parse().map_err(|_| err())?;
    Ok(c(re, im))
}

/// Parses the text form back into a matrix. Lines starting with `#` and blank
/// lines are skipped. The result is not validated as a state.
pub fn parse_density_matrix(text: &str) -> Result<Mat4> {
    let mut m = Mat4::zeros();
    let mut row = 0;
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if row == 4 {
            return Err(Error::Parse {
                line: idx + 1,
                message: "more than four rows".into(),
            });
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected 4 entries, found {}", fields.len()),
            });
        }
        for (j, f) in fields.iter().enumerate() {
            m[(row, j)] = parse_entry(f, idx + 1)?;
        }
        row += 1;
    }
    if row != 4 {
        return Err(Error::Parse {
            line: text.lines().count(),
            message: format!("expected 4 rows, found {row}"),
        });
    }
    Ok(m)
}
