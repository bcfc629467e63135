//! LF-model glottal flow derivative with aspiration noise.
//!
//! One period on normalized time `t in [0, 1)`:
//!
//! ```text
//! open:   E(t) = E0 * exp(alpha t) * sin(pi t / t_p)                    t <= t_e
//! return: E(t) = -E_e * (exp(-eps (t - t_e)) - exp(-eps (1 - t_e)))
//!                     / (1 - exp(-eps (1 - t_e)))                         t >  t_e
//! ```
//!
//! `E0` pins `E(t_e) = -E_e`, so the waveform is continuous at `t_e` and
//! returns to zero at the period end. `eps` is solved so the derivative
//! integrates to zero over the period (no net flow change).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use std::f64::consts::PI;

pub const MIN_F0: f64 = 20.0;
pub const MAX_F0: f64 = 1000.0;

/// Breathy (tenseness 0) and pressed (tenseness 1) timing presets.
pub const BREATHY_TP: f64 = 0.45;
pub const BREATHY_TE: f64 = 0.70;
pub const PRESSED_TP: f64 = 0.40;
pub const PRESSED_TE: f64 = 0.55;
/// Return-phase time constant (fraction of the period) at the two presets.
pub const BREATHY_TA: f64 = 0.025;
pub const PRESSED_TA: f64 = 0.005;
/// Growth added beyond the rate that makes `t_e` the waveform's extremum.
const ALPHA_MARGIN: f64 = 0.1;
const MAX_ALPHA: f64 = 60.0;

const EPSILON_TOLERANCE: f64 = 1e-10;
const EPSILON_MAX_ITER: usize = 200;
/// Aspiration noise low-pass corner (Hz).
const ASPIRATION_CUTOFF: f64 = 4000.0;
/// Aspiration level during the closed phase, relative to the open phase.
const CLOSED_PHASE_NOISE: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GlottisError {
    #[error("return-phase constant did not converge within {0} iterations")]
    ConvergenceFailure(usize),
    #[error("no return-phase constant closes the period (open-phase integral {0})")]
    Unsolvable(f64),
    #[error("invalid glottal controls: {0}")]
    InvalidControls(String),
}

/// Direct voice-source controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlottalControls {
    pub f0: f64,
    /// 0 = breathy, 1 = pressed.
    pub tenseness: f64,
    pub voiced: bool,
}

impl Default for GlottalControls {
    fn default() -> Self {
        Self {
            f0: 120.0,
            tenseness: 0.6,
            voiced: true,
        }
    }
}

impl GlottalControls {
    pub fn validate(&self) -> Result<(), GlottisError> {
        if !(MIN_F0..=MAX_F0).contains(&self.f0) {
            return Err(GlottisError::InvalidControls(format!(
                "f0 {} Hz outside [{MIN_F0}, {MAX_F0}]",
                self.f0
            )));
        }
        if !(0.0..=1.0).contains(&self.tenseness) {
            return Err(GlottisError::InvalidControls(format!(
                "tenseness {} outside [0, 1]",
                self.tenseness
            )));
        }
        Ok(())
    }
}

/// Timing and shape of one LF period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LfShape {
    /// Flow peak, fraction of the period.
    pub t_p: f64,
    /// Maximum negative flow derivative, fraction of the period.
    pub t_e: f64,
    pub alpha: f64,
    pub epsilon: f64,
    /// Excitation strength; the waveform is normalized so this is 1.
    pub e_e: f64,
    e0: f64,
    omega: f64,
    /// `exp(-eps (1 - t_e))`
    tail: f64,
}

fn open_integral(alpha: f64, omega: f64, e0: f64, t_e: f64) -> f64 {
    // integral of e0 exp(alpha t) sin(omega t) over [0, t_e]
    let at = |t: f64| (alpha * t).exp() * (alpha * (omega * t).sin() - omega * (omega * t).cos());
    e0 * (at(t_e) - at(0.0)) / (alpha * alpha + omega * omega)
}

fn return_integral(eps: f64, t_e: f64, e_e: f64) -> f64 {
    let d = 1.0 - t_e;
    let tail = (-eps * d).exp();
    -e_e * ((1.0 - tail) / eps - d * tail) / (1.0 - tail)
}

/// Derives the LF shape for `controls`. Timing moves affinely from the breathy
/// preset to the pressed preset as tenseness rises, so `t_p` and `t_e` both
/// fall (earlier, sharper closure) with tenseness.
///
/// The growth rate is picked so that the return phase can close the period
/// with a time constant near `t_a` (also affine in tenseness); `epsilon` is
/// then solved by bisection for exact closure.
pub fn lf_shape(controls: &GlottalControls) -> Result<LfShape, GlottisError> {
    let tau = controls.tenseness.clamp(0.0, 1.0);
    let t_p = BREATHY_TP + (PRESSED_TP - BREATHY_TP) * tau;
    let t_e = BREATHY_TE + (PRESSED_TE - BREATHY_TE) * tau;
    let t_a = BREATHY_TA + (PRESSED_TA - BREATHY_TA) * tau;
    let e_e = 1.0;

    let omega = PI / t_p;
    let scale = |alpha: f64| -e_e / ((alpha * t_e).exp() * (omega * t_e).sin());
    let open_for = |alpha: f64| open_integral(alpha, omega, scale(alpha), t_e);
    // Growth must be fast enough that the open phase is still falling at t_e,
    // otherwise the sinusoid's trough would precede the closure instant.
    let critical = -omega * (omega * t_e).cos() / (omega * t_e).sin();
    let slowest = critical + ALPHA_MARGIN;
    // open area shrinks as growth speeds up
    let wanted = -return_integral(1.0 / t_a, t_e, e_e);
    let alpha = if open_for(slowest) <= wanted {
        slowest
    } else if open_for(MAX_ALPHA) >= wanted {
        MAX_ALPHA
    } else {
        let (mut lo, mut hi) = (slowest, MAX_ALPHA);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if open_for(mid) > wanted {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let e0 = scale(alpha);
    let open = open_for(alpha);

    // The return integral runs from -e_e (1 - t_e) / 2 (eps -> 0) up to 0
    // (eps -> inf); it must cancel the open phase.
    let d = 1.0 - t_e;
    if !(open > 0.0 && open < e_e * d / 2.0) {
        return Err(GlottisError::Unsolvable(open));
    }
    let residual = |eps: f64| open + return_integral(eps, t_e, e_e);
    let (mut lo, mut hi) = (1e-6, 1.0);
    while residual(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(GlottisError::Unsolvable(open));
        }
    }
    let mut iterations = 0;
    while hi - lo > EPSILON_TOLERANCE * hi.max(1.0) {
        iterations += 1;
        if iterations > EPSILON_MAX_ITER {
            return Err(GlottisError::ConvergenceFailure(EPSILON_MAX_ITER));
        }
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let epsilon = 0.5 * (lo + hi);
    Ok(LfShape {
        t_p,
        t_e,
        alpha,
        epsilon,
        e_e,
        e0,
        omega,
        tail: (-epsilon * d).exp(),
    })
}

/// Flow-derivative value at `phase` in `[0, 1)`.
pub fn lf_sample(shape: &LfShape, phase: f64) -> f64 {
    let t = phase.rem_euclid(1.0);
    if t <= shape.t_e {
        shape.e0 * (shape.alpha * t).exp() * (shape.omega * t).sin()
    } else {
        -shape.e_e * ((-shape.epsilon * (t - shape.t_e)).exp() - shape.tail) / (1.0 - shape.tail)
    }
}

/// First-order low-pass; stays within the input's bounds.
#[derive(Debug, Clone, Copy)]
pub(crate) struct OnePole {
    coeff: f64,
    state: f64,
}

impl OnePole {
    pub(crate) fn lowpass(cutoff: f64, sr: f64) -> Self {
        Self {
            coeff: 1.0 - (-2.0 * PI * cutoff / sr).exp(),
            state: 0.0,
        }
    }

    pub(crate) fn process(&mut self, x: f64) -> f64 {
        self.state += self.coeff * (x - self.state);
        self.state
    }
}

/// Phase-accumulating LF source. Shape changes take effect at the next
/// period boundary so a period is never spliced from two shapes.
#[derive(Debug, Clone)]
pub struct GlottalSource {
    sample_rate: f64,
    phase: f64,
    shape: LfShape,
    pending: Option<LfShape>,
    rng: ChaCha8Rng,
    noise_lp: OnePole,
}

impl GlottalSource {
    pub fn new(sample_rate: f64, controls: &GlottalControls, seed: u64) -> Result<Self, GlottisError> {
        Ok(Self {
            sample_rate,
            phase: 0.0,
            shape: lf_shape(controls)?,
            pending: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            noise_lp: OnePole::lowpass(ASPIRATION_CUTOFF.min(0.45 * sample_rate), sample_rate),
        })
    }

    pub fn shape(&self) -> &LfShape {
        &self.shape
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// Queues a new shape for the next period.
    pub fn set_shape(&mut self, shape: LfShape) {
        self.pending = Some(shape);
    }

    /// Next excitation sample. `voicing` in `[0, 1]` scales the LF pulse;
    /// `noise_amp` is the aspiration amplitude before tenseness weighting.
    pub fn next_sample(&mut self, f0: f64, tenseness: f64, voicing: f64, noise_amp: f64) -> f64 {
        let voiced = voicing * lf_sample(&self.shape, self.phase);

        let white: f64 = self.rng.random_range(-1.0..1.0);
        let filtered = self.noise_lp.process(white);
        let modulation = if voicing > 0.0 && self.phase > self.shape.t_e {
            1.0 - voicing * (1.0 - CLOSED_PHASE_NOISE)
        } else {
            1.0
        };
        let aspiration = noise_amp * (1.0 - tenseness.clamp(0.0, 1.0)) * modulation * filtered;

        self.phase += f0 / self.sample_rate;
        if self.phase >= 1.0 {
            self.phase -= self.phase.floor();
            if let Some(next) = self.pending.take() {
                self.shape = next;
            }
        }
        voiced + aspiration
    }
}

/// Renders `n` excitation samples from a fresh source.
pub fn excitation_block(
    controls: &GlottalControls,
    shape: &LfShape,
    n: usize,
    sample_rate: f64,
    noise_gain: f64,
    seed: u64,
) -> Vec<f64> {
    assert!(n > 0, "excitation block must be non-empty");
    let mut src = GlottalSource {
        sample_rate,
        phase: 0.0,
        shape: *shape,
        pending: None,
        rng: ChaCha8Rng::seed_from_u64(seed),
        noise_lp: OnePole::lowpass(ASPIRATION_CUTOFF.min(0.45 * sample_rate), sample_rate),
    };
    let voicing = if controls.voiced { 1.0 } else { 0.0 };
    (0..n)
        .map(|_| src.next_sample(controls.f0, controls.tenseness, voicing, noise_gain))
        .collect()
}
