use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg::{c, outer2, Ket2, Mat2, ONE, ZERO};

/// Polarizer orientation on one arm.
///
/// `D`/`A` are the diagonal (+45°) and antidiagonal (−45°) settings, written
/// `+` and `−` in the lab. Circular settings use R = (H − iV)/√2 and
/// L = (H + iV)/√2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnalyzerSetting {
    H,
    V,
    #[serde(alias = "+")]
    D,
    #[serde(alias = "-")]
    A,
    R,
    L,
}

/// Pair of orthogonal settings used for a visibility measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    HV,
    DA,
    RL,
}

impl Basis {
    pub fn settings(self) -> (AnalyzerSetting, AnalyzerSetting) {
        use AnalyzerSetting::*;
        match self {
            Basis::HV => (H, V),
            Basis::DA => (D, A),
            Basis::RL => (R, L),
        }
    }
}

impl AnalyzerSetting {
    pub const ALL: [AnalyzerSetting; 6] = [
        AnalyzerSetting::H,
        AnalyzerSetting::V,
        AnalyzerSetting::D,
        AnalyzerSetting::A,
        AnalyzerSetting::R,
        AnalyzerSetting::L,
    ];

    pub fn ket(self) -> Ket2 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            AnalyzerSetting::H => Ket2::new(ONE, ZERO),
            AnalyzerSetting::V => Ket2::new(ZERO, ONE),
            AnalyzerSetting::D => Ket2::new(c(s, 0.0), c(s, 0.0)),
            AnalyzerSetting::A => Ket2::new(c(s, 0.0), c(-s, 0.0)),
            AnalyzerSetting::R => Ket2::new(c(s, 0.0), c(0.0, -s)),
            AnalyzerSetting::L => Ket2::new(c(s, 0.0), c(0.0, s)),
        }
    }

    pub fn projector(self) -> Mat2 {
        outer2(&self.ket())
    }

    pub fn orthogonal(self) -> AnalyzerSetting {
        match self {
            AnalyzerSetting::H => AnalyzerSetting::V,
            AnalyzerSetting::V => AnalyzerSetting::H,
            AnalyzerSetting::D => AnalyzerSetting::A,
            AnalyzerSetting::A => AnalyzerSetting::D,
            AnalyzerSetting::R => AnalyzerSetting::L,
            AnalyzerSetting::L => AnalyzerSetting::R,
        }
    }

    pub fn basis(self) -> Basis {
        match self {
            AnalyzerSetting::H | AnalyzerSetting::V => Basis::HV,
            AnalyzerSetting::D | AnalyzerSetting::A => Basis::DA,
            AnalyzerSetting::R | AnalyzerSetting::L => Basis::RL,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AnalyzerSetting::H => "H",
            AnalyzerSetting::V => "V",
            AnalyzerSetting::D => "D",
            AnalyzerSetting::A => "A",
            AnalyzerSetting::R => "R",
            AnalyzerSetting::L => "L",
        }
    }
}

impl fmt::Display for AnalyzerSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AnalyzerSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "H" | "h" => Ok(AnalyzerSetting::H),
            "V" | "v" => Ok(AnalyzerSetting::V),
            "D" | "d" | "+" => Ok(AnalyzerSetting::D),
            "A" | "a" | "-" | "\u{2212}" => Ok(AnalyzerSetting::A),
            "R" | "r" => Ok(AnalyzerSetting::R),
            "L" | "l" => Ok(AnalyzerSetting::L),
            other => Err(Error::InvalidInput(format!("unknown analyzer setting {other:?}"))),
        }
    }
}
