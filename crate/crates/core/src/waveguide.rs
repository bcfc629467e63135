//! Kelly-Lochbaum digital waveguide over a chain of cylindrical sections.
//!
//! Section `i` holds a forward (toward the lips) and backward (toward the
//! glottis) travelling wave. Junction `j` joins sections `j` and `j + 1` with
//!
//! ```text
//! k_j   = (a_j - a_{j+1}) / (a_j + a_{j+1})
//! w     = k_j * (f_in + b_in)
//! f_out = f_in - w = (1 - k) f_in - k b_in      (into section j + 1)
//! b_out = b_in + w = (1 + k) b_in + k f_in      (into section j)
//! ```
//!
//! Each step moves every wave by one section, so a wave crosses the tract in
//! `N` steps. The step rate is therefore tied to the physical tract length:
//! `rate = N * c / L`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::area::{
    detect_constriction_with, AreaFunction, ConstrictionClass, ConstrictionInfo, ConstrictionThresholds,
};
use crate::glottis::OnePole;

pub const K_GLOTTIS: f64 = 0.75;
pub const K_LIP: f64 = -0.85;
/// Speed of sound used to tie section count to tract length (cm/s).
pub const SOUND_SPEED: f64 = 35_000.0;
/// Turbulence band edges (Hz).
const TURBULENCE_LOW: f64 = 1000.0;
const TURBULENCE_HIGH: f64 = 8000.0;
/// Time constant of the flow envelope feeding turbulence (s).
const FLOW_TAU: f64 = 0.005;

/// Grid the coefficients are snapped to. Scaling an area function by a
/// non-power-of-two rounds the scaled areas, which perturbs the raw ratio in
/// the last ulp; snapping makes uniformly scaled tracts produce identical
/// coefficients.
const COEFF_GRID: f64 = 4_294_967_296.0; // 2^32

/// Reflection coefficients from adjacent section areas. Two closed sections
/// meeting give `k = 0`; blocking at an occlusion is handled separately.
pub fn reflection_coefficients(a: &AreaFunction) -> Vec<f64> {
    a.0.windows(2)
        .map(|p| {
            let sum = p[0] + p[1];
            if sum > 0.0 {
                let k = ((p[0] - p[1]) / sum).clamp(-1.0, 1.0);
                (k * COEFF_GRID).round() / COEFF_GRID
            } else {
                0.0
            }
        })
        .collect()
}

/// One Kelly-Lochbaum junction; returns `(f_out, b_out)`.
#[inline]
pub fn junction_scatter(f_in: f64, b_in: f64, k: f64) -> (f64, f64) {
    let w = k * (f_in + b_in);
    (f_in - w, b_in + w)
}

/// Static waveguide parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TractConfig {
    pub sections: usize,
    /// Step rate (Hz).
    pub sample_rate: f64,
    pub k_glottis: f64,
    pub k_lip: f64,
    pub thresholds: ConstrictionThresholds,
    /// Turbulence level at a vanishing fricative constriction.
    pub turbulence_gain: f64,
}

impl TractConfig {
    /// Step rate that makes `sections` span `length_cm`.
    pub fn rate_for_length(sections: usize, length_cm: f64) -> f64 {
        sections as f64 * SOUND_SPEED / length_cm
    }

    pub fn new(sections: usize, sample_rate: f64) -> Self {
        Self {
            sections,
            sample_rate,
            k_glottis: K_GLOTTIS,
            k_lip: K_LIP,
            thresholds: ConstrictionThresholds::default(),
            turbulence_gain: 1.0,
        }
    }
}

/// Linearly ramped parameter vector.
#[derive(Debug, Clone)]
struct Ramp {
    current: Vec<f64>,
    target: Vec<f64>,
    step: Vec<f64>,
    remaining: usize,
}

impl Ramp {
    fn new(values: Vec<f64>) -> Self {
        Self {
            step: vec![0.0; values.len()],
            target: values.clone(),
            current: values,
            remaining: 0,
        }
    }

    fn retarget(&mut self, target: Vec<f64>, horizon: usize) {
        if horizon == 0 {
            self.current.clone_from(&target);
            self.target = target;
            self.remaining = 0;
            return;
        }
        for ((s, c), t) in self.step.iter_mut().zip(&self.current).zip(&target) {
            *s = (t - c) / horizon as f64;
        }
        self.target = target;
        self.remaining = horizon;
    }

    #[inline]
    fn advance(&mut self) {
        if self.remaining == 0 {
            return;
        }
        self.remaining -= 1;
        if self.remaining == 0 {
            self.current.clone_from(&self.target);
        } else {
            for (c, s) in self.current.iter_mut().zip(&self.step) {
                *c += s;
            }
        }
    }
}

/// Complete mutable state of the tract simulation.
#[derive(Debug, Clone)]
pub struct TractState {
    config: TractConfig,
    fwd: Vec<f64>,
    bwd: Vec<f64>,
    next_fwd: Vec<f64>,
    next_bwd: Vec<f64>,
    coeffs: Ramp,
    /// Per-junction transmission, 1 = open, 0 = blocked by an occlusion.
    gates: Ramp,
    turbulence: Ramp,
    turbulence_site: usize,
    constriction: Option<ConstrictionInfo>,
    rng: ChaCha8Rng,
    noise_hp: OnePole,
    noise_lp: OnePole,
    flow: f64,
    flow_coeff: f64,
}

impl TractState {
    /// Tract at rest with the given area function already in place.
    pub fn new(config: TractConfig, areas: &AreaFunction, seed: u64) -> Self {
        assert_eq!(areas.len(), config.sections, "area function length must match section count");
        assert!(config.sections >= 2, "tract needs at least two sections");
        let n = config.sections;
        let sr = config.sample_rate;
        let mut state = Self {
            fwd: vec![0.0; n],
            bwd: vec![0.0; n],
            next_fwd: vec![0.0; n],
            next_bwd: vec![0.0; n],
            coeffs: Ramp::new(reflection_coefficients(areas)),
            gates: Ramp::new(vec![1.0; n - 1]),
            turbulence: Ramp::new(vec![0.0]),
            turbulence_site: 0,
            constriction: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            noise_hp: OnePole::lowpass(TURBULENCE_LOW, sr),
            noise_lp: OnePole::lowpass(TURBULENCE_HIGH.min(0.45 * sr), sr),
            flow: 0.0,
            flow_coeff: 1.0 - (-1.0 / (FLOW_TAU * sr)).exp(),
            config,
        };
        state.retarget_areas(areas, 0);
        state
    }

    pub fn config(&self) -> &TractConfig {
        &self.config
    }

    pub fn sections(&self) -> usize {
        self.config.sections
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs.current
    }

    pub fn target_coefficients(&self) -> &[f64] {
        &self.coeffs.target
    }

    pub fn transmission(&self) -> &[f64] {
        &self.gates.current
    }

    pub fn constriction(&self) -> Option<ConstrictionInfo> {
        self.constriction
    }

    pub fn forward(&self) -> &[f64] {
        &self.fwd
    }

    pub fn backward(&self) -> &[f64] {
        &self.bwd
    }

    pub fn is_finite(&self) -> bool {
        self.fwd.iter().chain(&self.bwd).all(|v| v.is_finite())
    }

    /// Moves coefficients, occlusion gates and turbulence toward the shape
    /// `a`, reaching it after `horizon` steps (immediately when 0).
    pub fn retarget_areas(&mut self, a: &AreaFunction, horizon: usize) {
        assert_eq!(a.len(), self.config.sections, "area function length must match section count");
        self.coeffs.retarget(reflection_coefficients(a), horizon);

        let info = detect_constriction_with(a, self.config.thresholds);
        let n = self.config.sections;
        let mut gates = vec![1.0; n - 1];
        if info.class == ConstrictionClass::Occluded {
            gates[info.index.min(n - 2)] = 0.0;
        }
        self.gates.retarget(gates, horizon);

        let level = match info.class {
            ConstrictionClass::Fricative => {
                let a_fric = self.config.thresholds.a_fric;
                self.config.turbulence_gain * ((a_fric - info.min_area) / a_fric).clamp(0.0, 1.0)
            }
            _ => 0.0,
        };
        if level > 0.0 {
            self.turbulence_site = (info.index + 1).min(n - 1);
        }
        self.turbulence.retarget(vec![level], horizon);
        self.constriction = Some(info);
    }

    /// Advances one step: excitation enters at the glottis, every junction
    /// scatters, both ends reflect, turbulence is added downstream of a
    /// fricative constriction. Returns the wave radiated at the lips.
    pub fn step(&mut self, excitation: f64) -> f64 {
        let n = self.config.sections;
        let out = (1.0 + self.config.k_lip) * self.fwd[n - 1];

        self.next_fwd[0] = self.config.k_glottis * self.bwd[0] + excitation;
        self.next_bwd[n - 1] = self.config.k_lip * self.fwd[n - 1];
        for j in 0..n - 1 {
            let f_in = self.fwd[j];
            let b_in = self.bwd[j + 1];
            let (f_out, b_out) = junction_scatter(f_in, b_in, self.coeffs.current[j]);
            let g = self.gates.current[j];
            // a closed gate reflects each side back on itself
            self.next_fwd[j + 1] = g * f_out + (1.0 - g) * b_in;
            self.next_bwd[j] = g * b_out + (1.0 - g) * f_in;
        }

        self.flow += self.flow_coeff * (excitation.abs() - self.flow);
        let white: f64 = self.rng.random_range(-1.0..1.0);
        let low = self.noise_hp.process(white);
        let band = self.noise_lp.process(white - low);
        let level = self.turbulence.current[0];
        if level > 0.0 {
            let noise = 0.5 * level * self.flow * band;
            self.next_fwd[self.turbulence_site] += noise;
            self.next_bwd[self.turbulence_site] += noise;
        }

        std::mem::swap(&mut self.fwd, &mut self.next_fwd);
        std::mem::swap(&mut self.bwd, &mut self.next_bwd);
        self.coeffs.advance();
        self.gates.advance();
        self.turbulence.advance();
        out
    }
}
