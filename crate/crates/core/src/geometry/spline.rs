//! Penalized cubic smoothing spline with one robust reweighting pass.
//!
//! The fit minimizes
//!
//! ```text
//! sum_k w_k (y_k - f(x_k))^2 + lambda * integral f''(x)^2 dx
//! ```
//!
//! over natural cubic splines with knots at the data abscissae, solved with
//! the Reinsch value/second-derivative formulation. Outside the knot span the
//! curve continues linearly, which is the natural spline's own extension.

use nalgebra::{DMatrix, DVector};

/// Weight multiplier applied to rejected points. Kept nonzero so the
/// weighted system stays well posed.
const REJECTED_WEIGHT: f64 = 1e-8;

/// Natural cubic spline in value/second-derivative form.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalSpline {
    pub(crate) knots: Vec<f64>,
    pub(crate) values: Vec<f64>,
    /// Second derivatives at the knots (zero at both ends).
    pub(crate) curvature: Vec<f64>,
}

impl NaturalSpline {
    pub fn eval(&self, x: f64) -> f64 {
        let t = &self.knots;
        let g = &self.values;
        let c = &self.curvature;
        let n = t.len();
        if x <= t[0] {
            return g[0] + self.end_slope(0) * (x - t[0]);
        }
        if x >= t[n - 1] {
            return g[n - 1] + self.end_slope(n - 1) * (x - t[n - 1]);
        }
        let i = t.partition_point(|&k| k <= x).saturating_sub(1).min(n - 2);
        let h = t[i + 1] - t[i];
        let a = x - t[i];
        let b = t[i + 1] - x;
        (a * g[i + 1] + b * g[i]) / h
            - a * b / 6.0 * ((1.0 + a / h) * c[i + 1] + (1.0 + b / h) * c[i])
    }

    fn end_slope(&self, at: usize) -> f64 {
        let t = &self.knots;
        let g = &self.values;
        let c = &self.curvature;
        if at == 0 {
            let h = t[1] - t[0];
            (g[1] - g[0]) / h - h / 6.0 * c[1]
        } else {
            let n = t.len();
            let h = t[n - 1] - t[n - 2];
            (g[n - 1] - g[n - 2]) / h + h / 6.0 * c[n - 2]
        }
    }

    /// Exact integral of `f''^2` over the knot span (f'' is piecewise linear).
    pub fn roughness(&self) -> f64 {
        self.knots
            .windows(2)
            .zip(self.curvature.windows(2))
            .map(|(t, c)| (t[1] - t[0]) * (c[0] * c[0] + c[0] * c[1] + c[1] * c[1]) / 3.0)
            .sum()
    }
}

/// Banded pieces of the Reinsch system for fixed knots.
struct Reinsch {
    /// n x (n-2)
    q: DMatrix<f64>,
    /// (n-2) x (n-2)
    r: DMatrix<f64>,
}

impl Reinsch {
    fn new(x: &[f64]) -> Self {
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let mut q = DMatrix::zeros(n, n - 2);
        let mut r = DMatrix::zeros(n - 2, n - 2);
        for j in 1..n - 1 {
            let col = j - 1;
            q[(j - 1, col)] = 1.0 / h[j - 1];
            q[(j, col)] = -1.0 / h[j - 1] - 1.0 / h[j];
            q[(j + 1, col)] = 1.0 / h[j];
            r[(col, col)] = (h[j - 1] + h[j]) / 3.0;
            if col + 1 < n - 2 {
                r[(col, col + 1)] = h[j] / 6.0;
                r[(col + 1, col)] = h[j] / 6.0;
            }
        }
        Self { q, r }
    }

    /// Returns `(values, interior curvature)`.
    fn solve(&self, y: &[f64], w: &[f64], lambda: f64) -> (Vec<f64>, Vec<f64>) {
        let n = y.len();
        let winv = DVector::from_iterator(n, w.iter().map(|&wk| 1.0 / wk));
        let winv_q = DMatrix::from_fn(n, n - 2, |i, j| winv[i] * self.q[(i, j)]);
        let system = &self.r + lambda * self.q.transpose() * &winv_q;
        let chol = system
            .cholesky()
            .expect("Reinsch system is symmetric positive definite for positive weights");
        let yv = DVector::from_column_slice(y);
        let gamma = chol.solve(&(self.q.transpose() * &yv));
        let g = &yv - lambda * &winv_q * &gamma;
        (g.iter().copied().collect(), gamma.iter().copied().collect())
    }
}

/// Outcome of a robust smoothing fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingFit {
    pub spline: NaturalSpline,
    /// `y_k - f(x_k)` for the final fit.
    pub residuals: Vec<f64>,
    /// Final per-point weights after robust reweighting.
    pub weights: Vec<f64>,
    /// Indices down-weighted by the robust pass.
    pub rejected: Vec<usize>,
}

/// Robust-pass tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustOptions {
    /// Rejection threshold in robust standard deviations.
    pub tau: f64,
    /// Lower bound on the robust scale (cm); keeps tiny residuals from being flagged.
    pub scale_floor: f64,
}

impl Default for RobustOptions {
    fn default() -> Self {
        Self {
            tau: 2.5,
            scale_floor: 0.2,
        }
    }
}

/// Fits the smoothing spline, then refits once with outlying points
/// down-weighted.
///
/// Outliers are found by deletion: every point is left out in turn and the
/// deletion whose fit explains the remaining points best (smallest weighted
/// residual sum) becomes the reference. The robust scale is
/// `1.4826 * median |e_j|` over the leave-one-out errors `e_j` of the retained
/// points, never below `scale_floor`. Points whose residual against the
/// reference exceeds `tau` scales are down-weighted. A single gross outlier
/// therefore cannot hide behind the neighbours it drags along.
///
/// Indices in `pinned` are structural constraints rather than measurements:
/// they are never rejected. With `lambda == 0` the fit interpolates and no
/// point is ever rejected. The caller guarantees `x` strictly increasing, `x.len() >= 4`, positive
/// weights and `lambda >= 0`.
pub fn smooth(
    x: &[f64],
    y: &[f64],
    w: &[f64],
    pinned: &[usize],
    lambda: f64,
    robust: RobustOptions,
) -> SmoothingFit {
    let (g, gamma) = Reinsch::new(x).solve(y, w, lambda);
    let residuals: Vec<f64> = y.iter().zip(&g).map(|(yk, gk)| yk - gk).collect();
    let first = SmoothingFit {
        spline: assemble(x, g, &gamma),
        residuals,
        weights: w.to_vec(),
        rejected: Vec::new(),
    };
    if lambda == 0.0 || !robust.tau.is_finite() {
        return first;
    }

    let n = x.len();
    let without = |v: &[f64], skip: &[usize]| -> Vec<f64> {
        v.iter().enumerate().filter(|(i, _)| !skip.contains(i)).map(|(_, v)| *v).collect()
    };
    let mut best: Option<(f64, usize, NaturalSpline)> = None;
    for k in (0..n).filter(|k| !pinned.contains(k)) {
        let (xs, ys, ws) = (without(x, &[k]), without(y, &[k]), without(w, &[k]));
        let (g, gamma) = Reinsch::new(&xs).solve(&ys, &ws, lambda);
        let rss: f64 = ys.iter().zip(&g).zip(&ws).map(|((yk, gk), wk)| wk * (yk - gk).powi(2)).sum();
        if best.as_ref().is_none_or(|(b, _, _)| rss < *b) {
            best = Some((rss, k, assemble(&xs, g, &gamma)));
        }
    }
    let Some((_, dropped, reference)) = best else {
        return first;
    };

    // How well the retained points predict one another sets the scale, so a
    // strongly curved posture tolerates more than a straight one.
    let mut spread: Vec<f64> = Vec::with_capacity(n - 1);
    if n >= 5 {
        for j in (0..n).filter(|&j| j != dropped) {
            let skip = [dropped, j];
            let (xs, ys, ws) = (without(x, &skip), without(y, &skip), without(w, &skip));
            let (g, gamma) = Reinsch::new(&xs).solve(&ys, &ws, lambda);
            spread.push((y[j] - assemble(&xs, g, &gamma).eval(x[j])).abs());
        }
    }
    spread.sort_by(f64::total_cmp);
    let scale = if spread.is_empty() {
        robust.scale_floor
    } else {
        (1.4826 * median_sorted(&spread)).max(robust.scale_floor)
    };
    let rejected: Vec<usize> = x
        .iter()
        .zip(y)
        .map(|(xk, yk)| yk - reference.eval(*xk))
        .enumerate()
        .filter(|(i, r)| r.abs() > robust.tau * scale && !pinned.contains(i))
        .map(|(i, _)| i)
        .collect();
    if rejected.is_empty() {
        return first;
    }

    let mut weights = w.to_vec();
    for &k in &rejected {
        weights[k] *= REJECTED_WEIGHT;
    }
    let (g, gamma) = Reinsch::new(x).solve(y, &weights, lambda);
    let residuals = y.iter().zip(&g).map(|(yk, gk)| yk - gk).collect();
    SmoothingFit {
        spline: assemble(x, g, &gamma),
        residuals,
        weights,
        rejected,
    }
}

fn assemble(x: &[f64], values: Vec<f64>, interior: &[f64]) -> NaturalSpline {
    let mut curvature = Vec::with_capacity(x.len());
    curvature.push(0.0);
    curvature.extend_from_slice(interior);
    curvature.push(0.0);
    NaturalSpline {
        knots: x.to_vec(),
        values,
        curvature,
    }
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
