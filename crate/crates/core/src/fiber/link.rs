use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One spool of fiber. Connector loss is lumped at the segment entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSegment {
    pub length_km: f64,
    pub loss_db_per_km: f64,
    pub cd_ps_per_nm_km: f64,
    pub dgd_ps_per_sqrt_km: f64,
    #[serde(default)]
    pub connector_loss_db: f64,
}

impl FiberSegment {
    pub fn new(length_km: f64, loss_db_per_km: f64, cd_ps_per_nm_km: f64, dgd_ps_per_sqrt_km: f64) -> Self {
        Self {
            length_km,
            loss_db_per_km,
            cd_ps_per_nm_km,
            dgd_ps_per_sqrt_km,
            connector_loss_db: 0.0,
        }
    }

    pub fn with_connector_loss(mut self, db: f64) -> Self {
        self.connector_loss_db = db;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.length_km.is_finite()
            && self.length_km > 0.0
            && self.loss_db_per_km.is_finite()
            && self.loss_db_per_km >= 0.0
            && self.cd_ps_per_nm_km.is_finite()
            && self.dgd_ps_per_sqrt_km.is_finite()
            && self.dgd_ps_per_sqrt_km >= 0.0
            && self.connector_loss_db.is_finite()
            && self.connector_loss_db >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid fiber segment {self:?}")))
        }
    }

    pub fn loss_db(&self) -> f64 {
        self.loss_db_per_km * self.length_km + self.connector_loss_db
    }
}

/// Ordered concatenation of fiber segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FiberSegment>", into = "Vec<FiberSegment>")]
pub struct FiberLink {
    segments: Vec<FiberSegment>,
}

impl TryFrom<Vec<FiberSegment>> for FiberLink {
    type Error = Error;

    fn try_from(segments: Vec<FiberSegment>) -> Result<Self> {
        FiberLink::new(segments)
    }
}

impl From<FiberLink> for Vec<FiberSegment> {
    fn from(link: FiberLink) -> Self {
        link.segments
    }
}

impl FiberLink {
    pub fn new(segments: Vec<FiberSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidInput("fiber link has no segments".into()));
        }
        for s in &segments {
            s.validate()?;
        }
        Ok(Self { segments })
    }

    pub fn single(segment: FiberSegment) -> Result<Self> {
        Self::new(vec![segment])
    }

    pub fn segments(&self) -> &[FiberSegment] {
        &self.segments
    }

    pub fn length_km(&self) -> f64 {
        self.segments.iter().map(|s| s.length_km).sum()
    }

    pub fn concat(&self, other: &FiberLink) -> FiberLink {
        let mut segments = self.segments.clone();
        segments.extend(other.segments.iter().cloned());
        FiberLink { segments }
    }

    /// The first `length_km` of the link, cutting the last segment entered.
    /// Returns `None` for a zero length. Lengths beyond the end are clamped
    /// to the full link.
    pub fn prefix(&self, length_km: f64) -> Option<FiberLink> {
        if !(length_km > 0.0) {
            return None;
        }
        let mut remaining = length_km;
        let mut segments = Vec::new();
        for s in &self.segments {
            if remaining <= 1e-9 {
                break;
            }
            let mut part = s.clone();
            if s.length_km > remaining {
                part.length_km = remaining;
            }
            remaining -= part.length_km;
            segments.push(part);
        }
        Some(FiberLink { segments })
    }

    pub fn total_loss_db(&self) -> f64 {
        self.segments.iter().map(FiberSegment::loss_db).sum()
    }
}

/// Power transmission of the link, 10^(−loss/10).
pub fn transmission(link: &FiberLink) -> f64 {
    10f64.powf(-link.total_loss_db() / 10.0)
}

/// CD broadening τ_P = Σ |CD|·Δλ·L, in ns.
pub fn cd_broadening(link: &FiberLink, wp: &super::Wavepacket) -> f64 {
    link.segments
        .iter()
        .map(|s| s.cd_ps_per_nm_km.abs() * wp.delta_lambda_nm * s.length_km)
        .sum::<f64>()
        / 1000.0
}

/// First-order PMD delay accumulated in quadrature over segments, in ps.
pub fn pmd_delay(link: &FiberLink) -> f64 {
    link.segments
        .iter()
        .map(|s| s.dgd_ps_per_sqrt_km * s.dgd_ps_per_sqrt_km * s.length_km)
        .sum::<f64>()
        .sqrt()
}
