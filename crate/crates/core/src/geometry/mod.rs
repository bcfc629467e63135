//! Mid-sagittal tract geometry: the fixed palate and the tongue spline.
//!
//! The tongue is described by seven control points: a glottis anchor, a
//! tongue-root point and five regional points, one per finger. Their heights
//! are expressed as a closure fraction of the local palate height, so `0` sits
//! on the tract floor and `1` touches the palate. A [`TongueModel`] holds the
//! layout; its defaults are the values the vowel presets were tuned against.

mod palate;
pub mod spline;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use palate::{PalateCurve, PalateProfile, MIN_PALATE_STATIONS};
pub use spline::{NaturalSpline, RobustOptions};

use crate::kinematics::{ArticulatoryState, FINGERS};

/// Default tract length in centimeters (adult male).
pub const DEFAULT_TRACT_LENGTH: f64 = 17.5;
pub const DEFAULT_LAMBDA: f64 = 0.05;
/// Gap the neutral posture must leave open everywhere (cm).
pub const G_MIN: f64 = 0.1;
/// Largest alveolar gap allowed at full pinky elevation (cm).
pub const D_FRIC: f64 = 0.15;
/// Largest velar gap allowed at full thumb elevation (cm).
pub const D_STOP: f64 = 0.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("bad dimensions: {stations} stations over {length} cm")]
    BadDimension { stations: usize, length: f64 },
    #[error("invalid palate: {0}")]
    BadPalate(String),
    #[error("spline needs at least {min} strictly increasing control points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("invalid control points: {0}")]
    BadControlPoints(String),
    #[error("station {x} cm lies outside [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
}

pub const MIN_CONTROL_POINTS: usize = 4;

/// Control points for the tongue fit, glottis to lips.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPointSet {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    /// Structural points the robust pass must keep (e.g. the glottis anchor).
    pub pinned: Vec<usize>,
    /// Evaluation domain of the fitted curve.
    pub domain: (f64, f64),
    /// Upper clamp for the fitted curve; `None` leaves it unbounded above.
    pub ceiling: Option<Arc<PalateCurve>>,
}

impl ControlPointSet {
    /// Unit-weight points whose domain is their own x span.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, GeometryError> {
        let w = vec![1.0; x.len()];
        let domain = match (x.first(), x.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => (0.0, 0.0),
        };
        let set = Self {
            x,
            y,
            w,
            pinned: Vec::new(),
            domain,
            ceiling: None,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.x.len() < MIN_CONTROL_POINTS {
            return Err(GeometryError::TooFewPoints {
                min: MIN_CONTROL_POINTS,
                got: self.x.len(),
            });
        }
        if self.y.len() != self.x.len() || self.w.len() != self.x.len() {
            return Err(GeometryError::BadControlPoints("x, y and w lengths differ".into()));
        }
        if self.x.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(GeometryError::BadControlPoints("x must be strictly increasing".into()));
        }
        if self.y.iter().chain(&self.x).any(|v| !v.is_finite()) {
            return Err(GeometryError::BadControlPoints("non-finite coordinate".into()));
        }
        if self.w.iter().any(|&w| !(w > 0.0 && w <= 1.0)) {
            return Err(GeometryError::BadControlPoints("weights must lie in (0, 1]".into()));
        }
        if self.pinned.iter().any(|&k| k >= self.x.len()) {
            return Err(GeometryError::BadControlPoints("pinned index out of range".into()));
        }
        Ok(())
    }
}

/// Closure fractions for the six movable points: root, then thumb (velar),
/// index, middle, ring (palato-alveolar), pinky (alveolar).
pub type Closures = [f64; FINGERS + 1];

/// Layout of the seven tongue control points.
///
/// Positions are fractions of the tract length. Heights are closure fractions
/// of the local palate height. The base posture is a bilinear blend of four
/// corner postures over (r, theta); fingers then lift their own point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TongueModel {
    /// Tongue root position at theta = 0.
    pub root_x: f64,
    /// Regional points at theta = 0, finger order: thumb (velar), index,
    /// middle, ring (palato-alveolar), pinky (alveolar).
    pub regional_x: [f64; FINGERS],
    /// Root shift per unit theta (fraction of length). Points further
    /// forward move proportionally less; a point at the lips stays put.
    pub theta_shift: f64,
    /// Corner postures: jaw closed (r = 0) or open (r = 1), tongue
    /// protruded (theta = 1) or retracted (theta = -1).
    pub closed_front: Closures,
    pub closed_back: Closures,
    pub open_front: Closures,
    pub open_back: Closures,
    /// Closure targeted at full finger elevation; values above 1 overshoot
    /// the palate and are clamped, so contact is reached before full elevation.
    pub finger_reach: [f64; FINGERS],
    /// Fraction of a finger's lift shared with the adjacent regional points.
    pub finger_spread: f64,
}

impl Default for TongueModel {
    fn default() -> Self {
        Self {
            root_x: 0.30,
            regional_x: [0.55, 0.66, 0.77, 0.88, 1.0],
            theta_shift: 0.05,
            closed_front: [0.076, 0.506, 0.700, 0.408, 0.017, 0.229],
            closed_back: [0.014, 0.736, 0.304, 0.001, 0.297, 0.389],
            open_front: [0.651, 0.575, 0.598, 0.275, 0.000, 0.002],
            open_back: [0.684, 0.420, 0.312, 0.078, 0.001, 0.779],
            finger_reach: [1.5; FINGERS],
            finger_spread: 0.5,
        }
    }
}

impl TongueModel {
    /// Base closures before finger lifts.
    pub fn posture(&self, r: f64, theta: f64) -> Closures {
        let u = 0.5 * (theta + 1.0);
        let w = [(1.0 - r) * (1.0 - u), (1.0 - r) * u, r * (1.0 - u), r * u];
        std::array::from_fn(|k| {
            w[0] * self.closed_back[k] + w[1] * self.closed_front[k] + w[2] * self.open_back[k] + w[3] * self.open_front[k]
        })
    }

    /// Point positions as fractions of the length: root, then regional.
    pub fn positions(&self, theta: f64) -> Closures {
        let span = (1.0 - self.root_x).max(f64::EPSILON);
        std::array::from_fn(|k| {
            let base = if k == 0 { self.root_x } else { self.regional_x[k - 1] };
            base + self.theta_shift * theta * ((1.0 - base) / span).clamp(0.0, 1.0)
        })
    }

    /// Emits the seven control points for `state`, heights clamped to the palate.
    pub fn control_points(&self, state: &ArticulatoryState, palate: &Arc<PalateCurve>) -> ControlPointSet {
        let s = state.clamped();
        let length = palate.length();
        let base = self.posture(s.r, s.theta);

        // each finger pulls its own point toward its reach and drags the
        // neighbours along by `finger_spread`
        let mut lifted = base;
        for f in 0..FINGERS {
            let e = s.fingers[f];
            if e <= 0.0 {
                continue;
            }
            for k in 0..FINGERS {
                let share = match k.abs_diff(f) {
                    0 => 1.0,
                    1 => self.finger_spread,
                    _ => 0.0,
                };
                if share > 0.0 {
                    let c = base[k + 1];
                    lifted[k + 1] = lifted[k + 1].max(c + share * e * (self.finger_reach[f] - c));
                }
            }
        }

        let mut x = Vec::with_capacity(FINGERS + 2);
        let mut y = Vec::with_capacity(FINGERS + 2);
        x.push(0.0);
        y.push(0.0);
        for (frac, c) in self.positions(s.theta).iter().zip(lifted) {
            let xk = (frac * length).clamp(0.0, length);
            x.push(xk);
            y.push(c.clamp(0.0, 1.0) * palate.height_at(xk));
        }
        ControlPointSet {
            w: vec![1.0; x.len()],
            pinned: vec![0],
            x,
            y,
            domain: (0.0, length),
            ceiling: Some(Arc::clone(palate)),
        }
    }
}

/// [`TongueModel::control_points`] with the default layout.
pub fn control_points(state: &ArticulatoryState, palate: &Arc<PalateCurve>) -> ControlPointSet {
    TongueModel::default().control_points(state, palate)
}

/// Fitted lower tract surface.
#[derive(Debug, Clone, PartialEq)]
pub struct TongueCurve {
    spline: NaturalSpline,
    domain: (f64, f64),
    ceiling: Option<Arc<PalateCurve>>,
    /// `y_k - f(x_k)` per control point, before clamping.
    pub residuals: Vec<f64>,
    /// Control points rejected by the robust pass.
    pub rejected: Vec<usize>,
}

impl TongueCurve {
    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn spline(&self) -> &NaturalSpline {
        &self.spline
    }

    /// Unchecked evaluation; `x` outside the domain is extrapolated.
    pub fn height_at(&self, x: f64) -> f64 {
        let y = self.spline.eval(x);
        match &self.ceiling {
            Some(p) => y.min(p.height_at(x)).max(0.0),
            None => y.max(0.0),
        }
    }

    pub fn evaluate(&self, stations: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let (lo, hi) = self.domain;
        let tol = 1e-9 * (hi - lo).abs().max(1.0);
        stations
            .iter()
            .map(|&x| {
                if x < lo - tol || x > hi + tol || x.is_nan() {
                    Err(GeometryError::OutOfDomain { x, lo, hi })
                } else {
                    Ok(self.height_at(x))
                }
            })
            .collect()
    }
}

/// Smoothing-spline fit with the default robust options.
pub fn fit_spline(points: &ControlPointSet, lambda: f64) -> Result<TongueCurve, GeometryError> {
    fit_spline_with(points, lambda, RobustOptions::default())
}

pub fn fit_spline_with(
    points: &ControlPointSet,
    lambda: f64,
    robust: RobustOptions,
) -> Result<TongueCurve, GeometryError> {
    points.validate()?;
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(GeometryError::BadControlPoints(format!("lambda must be >= 0, got {lambda}")));
    }
    let fit = spline::smooth(&points.x, &points.y, &points.w, &points.pinned, lambda, robust);
    Ok(TongueCurve {
        spline: fit.spline,
        domain: points.domain,
        ceiling: points.ceiling.clone(),
        residuals: fit.residuals,
        rejected: fit.rejected,
    })
}

pub fn evaluate(curve: &TongueCurve, stations: &[f64]) -> Result<Vec<f64>, GeometryError> {
    curve.evaluate(stations)
}
