//! Palate/tongue gap to the sampled 1D area function.

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{PalateCurve, TongueCurve};

pub const DEFAULT_STATIONS: usize = 44;
pub const MIN_STATIONS: usize = 8;
/// Minimum area at or below which the tract counts as occluded (cm²).
pub const A_STOP: f64 = 0.005;
/// Minimum area at or below which a constriction is narrow enough to hiss (cm²).
pub const A_FRIC: f64 = 0.3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AreaError {
    #[error("need at least {MIN_STATIONS} stations, got {0}")]
    TooFewStations(usize),
    #[error("palate spans [0, {palate}] cm but tongue spans [{lo}, {hi}] cm")]
    DomainMismatch { palate: f64, lo: f64, hi: f64 },
}

/// Gap between palate and tongue at uniform stations, glottis to lips (cm).
#[derive(Debug, Clone, PartialEq)]
pub struct DiameterProfile(pub Vec<f64>);

/// Cross-sectional areas, glottis to lips (cm²).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AreaFunction(pub Vec<f64>);

impl AreaFunction {
    pub fn uniform(stations: usize, area: f64) -> Self {
        Self(vec![area; stations])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.iter().map(|a| a * c).collect())
    }
}

/// Station centres: station `i` of `n` covers `[i, i + 1) * L / n`.
pub fn station_centers(n: usize, length: f64) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) * length / n as f64).collect()
}

pub fn compute_diameters(
    palate: &PalateCurve,
    tongue: &TongueCurve,
    n: usize,
) -> Result<DiameterProfile, AreaError> {
    if n < MIN_STATIONS {
        return Err(AreaError::TooFewStations(n));
    }
    let length = palate.length();
    let (lo, hi) = tongue.domain();
    let tol = 1e-9 * length.max(1.0);
    if lo.abs() > tol || (hi - length).abs() > tol {
        return Err(AreaError::DomainMismatch { palate: length, lo, hi });
    }
    Ok(DiameterProfile(
        station_centers(n, length)
            .into_iter()
            .map(|x| (palate.height_at(x) - tongue.height_at(x)).max(0.0))
            .collect(),
    ))
}

/// Square law: the engine family's diameter-to-area convention. Any constant
/// factor cancels in the reflection coefficients.
pub fn diameters_to_areas(d: &DiameterProfile) -> AreaFunction {
    AreaFunction(d.0.iter().map(|d| d * d).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstrictionClass {
    Open,
    Fricative,
    Occluded,
}

impl ConstrictionClass {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Open => "open",
            Self::Fricative => "fricative",
            Self::Occluded => "occluded",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstrictionThresholds {
    pub a_stop: f64,
    pub a_fric: f64,
}

impl Default for ConstrictionThresholds {
    fn default() -> Self {
        Self {
            a_stop: A_STOP,
            a_fric: A_FRIC,
        }
    }
}

impl ConstrictionThresholds {
    pub fn classify(&self, min_area: f64) -> ConstrictionClass {
        if min_area <= self.a_stop {
            ConstrictionClass::Occluded
        } else if min_area <= self.a_fric {
            ConstrictionClass::Fricative
        } else {
            ConstrictionClass::Open
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstrictionInfo {
    pub index: usize,
    pub min_area: f64,
    pub class: ConstrictionClass,
}

/// Minimum-area station; ties go to the most anterior (largest index).
pub fn detect_constriction(a: &AreaFunction) -> ConstrictionInfo {
    detect_constriction_with(a, ConstrictionThresholds::default())
}

pub fn detect_constriction_with(a: &AreaFunction, th: ConstrictionThresholds) -> ConstrictionInfo {
    let (index, min_area) = a
        .0
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if v <= best.1 { (i, v) } else { best });
    ConstrictionInfo {
        index,
        min_area,
        class: th.classify(min_area),
    }
}
