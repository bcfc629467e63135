use std::path::Path;

use super::GeometryError;

/// Fixed upper surface of the tract, glottis (x = 0) to lips (x = length).
///
/// Heights are in centimeters above the tract floor datum and linearly
/// interpolated between stations.
#[derive(Debug, Clone, PartialEq)]
pub struct PalateCurve {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

/// Parameters of the analytic dome
/// `h_min + (h_lips - h_min) * x / L + (h_max - h_min) * sin(pi x / L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PalateProfile {
    /// Height at the glottis.
    pub h_min: f64,
    /// Dome height above the glottis-to-lips baseline, plus `h_min`.
    pub h_max: f64,
    /// Height at the lips.
    pub h_lips: f64,
}

impl Default for PalateProfile {
    fn default() -> Self {
        Self {
            h_min: 1.0,
            h_max: 2.5,
            h_lips: 2.0,
        }
    }
}

pub const MIN_PALATE_STATIONS: usize = 8;

impl PalateCurve {
    /// Samples the default dome at `stations` uniform points on `[0, length]`.
    pub fn default_dome(stations: usize, length: f64) -> Result<Self, GeometryError> {
        Self::dome(stations, length, PalateProfile::default())
    }

    pub fn dome(stations: usize, length: f64, profile: PalateProfile) -> Result<Self, GeometryError> {
        if stations < MIN_PALATE_STATIONS || !(length > 0.0) || !length.is_finite() {
            return Err(GeometryError::BadDimension { stations, length });
        }
        if !(profile.h_min > 0.0 && profile.h_max >= profile.h_min && profile.h_lips > 0.0)
            || !(profile.h_max.is_finite() && profile.h_lips.is_finite())
        {
            return Err(GeometryError::BadPalate(
                "dome heights must satisfy 0 < h_min <= h_max and h_lips > 0".into(),
            ));
        }
        let xs: Vec<f64> = (0..stations)
            .map(|j| length * j as f64 / (stations - 1) as f64)
            .collect();
        let ys = xs
            .iter()
            .map(|&x| {
                let u = x / length;
                profile.h_min
                    + (profile.h_lips - profile.h_min) * u
                    + (profile.h_max - profile.h_min) * (std::f64::consts::PI * u).sin()
            })
            .collect();
        Ok(Self { xs, ys })
    }

    /// Builds a palate from explicit samples. The first station must sit at
    /// the glottis (x = 0), abscissae must strictly increase and every height
    /// must be positive.
    pub fn from_samples(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, GeometryError> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(GeometryError::BadPalate(format!(
                "need at least two (x, y) samples, got {} x and {} y",
                xs.len(),
                ys.len()
            )));
        }
        if xs[0].abs() > 1e-9 {
            return Err(GeometryError::BadPalate(format!("first station must be x = 0, got {}", xs[0])));
        }
        if let Some(i) = xs.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(GeometryError::BadPalate(format!("x not strictly increasing at row {}", i + 2)));
        }
        if let Some(i) = ys.iter().position(|y| !(*y > 0.0) || !y.is_finite()) {
            return Err(GeometryError::BadPalate(format!("height at row {} must be positive", i + 1)));
        }
        Ok(Self { xs, ys })
    }

    /// Reads a `x_cm,y_cm` CSV override.
    pub fn from_csv_path(path: &Path) -> Result<Self, GeometryError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GeometryError::BadPalate(format!("{}: {e}", path.display())))?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self, GeometryError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "x_cm,y_cm" => {}
            _ => return Err(GeometryError::BadPalate("line 1: expected header x_cm,y_cm".into())),
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let parse = |s: Option<&str>| s.and_then(|v| v.trim().parse::<f64>().ok());
            match (parse(cols.next()), parse(cols.next()), cols.next()) {
                (Some(x), Some(y), None) => {
                    xs.push(x);
                    ys.push(y);
                }
                _ => return Err(GeometryError::BadPalate(format!("line {}: expected two numbers", i + 1))),
            }
        }
        Self::from_samples(xs, ys)
    }

    pub fn length(&self) -> f64 {
        *self.xs.last().expect("palate has samples")
    }

    pub fn stations(&self) -> &[f64] {
        &self.xs
    }

    pub fn heights(&self) -> &[f64] {
        &self.ys
    }

    /// Height at `x`, clamped to the domain ends.
    pub fn height_at(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&s| s <= x) - 1;
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.ys[i] + t * (self.ys[i + 1] - self.ys[i])
    }
}
