//! Block renderer: controls in, smoothed geometry and audio out.
//!
//! Each block consumes the newest control snapshot, smooths every control
//! scalar with a one-pole low-pass, refits the tongue, retargets the tract and
//! then runs source and tract sample by sample. The tract steps at the rate
//! that makes its sections span the physical tract length (`N * c / L`), and
//! its lip output is resampled to the audio rate.

mod mailbox;
mod resample;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use resample::Resampler;

use crate::area::{
    compute_diameters, detect_constriction_with, diameters_to_areas, AreaFunction, ConstrictionInfo,
    ConstrictionThresholds, DEFAULT_STATIONS, MIN_STATIONS,
};
use crate::geometry::{
    fit_spline_with, GeometryError, PalateCurve, RobustOptions, TongueModel, DEFAULT_LAMBDA, DEFAULT_TRACT_LENGTH,
};
use crate::glottis::{lf_shape, GlottalControls, GlottalSource, MAX_F0, MIN_F0};
use crate::kinematics::{
    frame_to_articulation, normalize_frame, ArticulatoryState, Calibration, ChannelLayout, KinematicsError,
    SensorFrame, FINGERS,
};
use crate::waveguide::{TractConfig, TractState, K_GLOTTIS, K_LIP};

pub const DEFAULT_SAMPLE_RATE: u32 = 48_000;
pub const DEFAULT_BLOCK_SIZE: usize = 512;
/// Control smoothing time constant (s).
pub const DEFAULT_CONTROL_TAU: f64 = 0.020;
/// Aspiration amplitude at tenseness 0.
pub const DEFAULT_ASPIRATION: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid engine configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("no calibration supplied for replay")]
    CalibrationMissing,
    #[error("gesture has no frames")]
    EmptyGesture,
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Everything the engine needs at construction.
#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub sample_rate: u32,
    pub sections: usize,
    pub tract_length: f64,
    pub block_size: usize,
    pub control_tau: f64,
    pub lambda: f64,
    pub robust: RobustOptions,
    pub thresholds: ConstrictionThresholds,
    pub k_glottis: f64,
    pub k_lip: f64,
    pub aspiration: f64,
    pub turbulence_gain: f64,
    /// Linear gain ahead of the soft clipper.
    pub output_gain: f64,
    pub seed: u64,
    pub tongue: TongueModel,
    /// Palate override; the default dome when `None`.
    pub palate: Option<Arc<PalateCurve>>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            sections: DEFAULT_STATIONS,
            tract_length: DEFAULT_TRACT_LENGTH,
            block_size: DEFAULT_BLOCK_SIZE,
            control_tau: DEFAULT_CONTROL_TAU,
            lambda: DEFAULT_LAMBDA,
            robust: RobustOptions::default(),
            thresholds: ConstrictionThresholds::default(),
            k_glottis: K_GLOTTIS,
            k_lip: K_LIP,
            aspiration: DEFAULT_ASPIRATION,
            turbulence_gain: 1.0,
            output_gain: 2.5,
            seed: 0,
            tongue: TongueModel::default(),
            palate: None,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::Config(m));
        if !(8_000..=192_000).contains(&self.sample_rate) {
            return bad(format!("sample rate {} Hz out of range", self.sample_rate));
        }
        if self.sections < MIN_STATIONS {
            return bad(format!("need at least {MIN_STATIONS} sections, got {}", self.sections));
        }
        if !(self.tract_length > 0.0 && self.tract_length.is_finite()) {
            return bad(format!("tract length {} cm", self.tract_length));
        }
        if self.block_size == 0 {
            return bad("block size must be positive".into());
        }
        if !(self.control_tau >= 0.0) || !(self.lambda >= 0.0) {
            return bad("control_tau and lambda must be >= 0".into());
        }
        if !(self.k_glottis.abs() <= 1.0 && self.k_lip.abs() <= 1.0) {
            return bad("boundary reflections must lie in [-1, 1]".into());
        }
        if let Some(p) = &self.palate {
            if (p.length() - self.tract_length).abs() > 1e-9 * self.tract_length {
                return bad(format!("palate spans {} cm, tract is {} cm", p.length(), self.tract_length));
            }
        }
        Ok(())
    }

    /// Tract step rate (Hz).
    pub fn tract_rate(&self) -> f64 {
        TractConfig::rate_for_length(self.sections, self.tract_length)
    }
}

/// One control update: articulation, voice source, and when it was taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSnapshot {
    pub state: ArticulatoryState,
    pub glottal: GlottalControls,
    pub t_ms: f64,
}

impl Default for ControlSnapshot {
    fn default() -> Self {
        Self {
            state: ArticulatoryState::NEUTRAL,
            glottal: GlottalControls::default(),
            t_ms: 0.0,
        }
    }
}

impl ControlSnapshot {
    pub fn new(state: ArticulatoryState, glottal: GlottalControls) -> Self {
        Self {
            state,
            glottal,
            t_ms: 0.0,
        }
    }

    /// Clamps every field into range; NaN falls back to the default.
    pub fn sanitized(self) -> Self {
        let g = self.glottal;
        let d = GlottalControls::default();
        Self {
            state: self.state.clamped(),
            glottal: GlottalControls {
                f0: if g.f0.is_nan() { d.f0 } else { g.f0.clamp(MIN_F0, MAX_F0) },
                tenseness: if g.tenseness.is_nan() { d.tenseness } else { g.tenseness.clamp(0.0, 1.0) },
                voiced: g.voiced,
            },
            t_ms: self.t_ms,
        }
    }
}

/// Producer handle for pushing controls from another thread. Wait-free;
/// a newer push replaces an unconsumed older one.
pub struct ControlSender(mailbox::Sender<ControlSnapshot>);

impl ControlSender {
    pub fn push(&mut self, snapshot: ControlSnapshot) {
        self.0.push(snapshot.sanitized());
    }
}

/// One rendered block with the tract state that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBlock {
    pub sample_rate: u32,
    /// Start of the block in milliseconds since the engine was created.
    pub t_ms: f64,
    /// Soft-clipped samples in `[-1, 1]`.
    pub samples: Vec<f64>,
    pub areas: AreaFunction,
    pub constriction: ConstrictionInfo,
    pub rms: f64,
}

/// Smoothed controls: r, theta, five fingers, f0, tenseness, voicing.
const SMOOTHED: usize = FINGERS + 5;

fn to_vector(s: &ControlSnapshot) -> [f64; SMOOTHED] {
    let mut v = [0.0; SMOOTHED];
    v[0] = s.state.r;
    v[1] = s.state.theta;
    v[2..2 + FINGERS].copy_from_slice(&s.state.fingers);
    v[2 + FINGERS] = s.glottal.f0;
    v[3 + FINGERS] = s.glottal.tenseness;
    v[4 + FINGERS] = if s.glottal.voiced { 1.0 } else { 0.0 };
    v
}

pub struct Engine {
    config: EngineConfig,
    palate: Arc<PalateCurve>,
    inbox: mailbox::Receiver<ControlSnapshot>,
    sender: Option<ControlSender>,
    target: [f64; SMOOTHED],
    smoothed: [f64; SMOOTHED],
    smoothing: f64,
    source: GlottalSource,
    shape_tenseness: f64,
    tract: TractState,
    resampler: Resampler,
    steps_per_block: usize,
    areas: AreaFunction,
    constriction: ConstrictionInfo,
    blocks: u64,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self, EngineError> {
        config.validate()?;
        let palate = match &config.palate {
            Some(p) => Arc::clone(p),
            None => Arc::new(PalateCurve::default_dome(config.sections.max(8), config.tract_length)?),
        };
        let initial = ControlSnapshot::default();
        let (tx, rx) = mailbox::channel(initial);
        let sr = config.sample_rate as f64;
        let tract_rate = config.tract_rate();
        let block_seconds = config.block_size as f64 / sr;
        let smoothing = if config.control_tau > 0.0 {
            1.0 - (-block_seconds / config.control_tau).exp()
        } else {
            1.0
        };

        let areas = shape_areas(&config, &palate, &initial.state)?;
        let constriction = detect_constriction_with(&areas, config.thresholds);
        let mut tract_config = TractConfig::new(config.sections, tract_rate);
        tract_config.k_glottis = config.k_glottis;
        tract_config.k_lip = config.k_lip;
        tract_config.thresholds = config.thresholds;
        tract_config.turbulence_gain = config.turbulence_gain;
        // distinct streams for the source and the tract noise
        let tract = TractState::new(tract_config, &areas, config.seed ^ 0x5DEE_CE66_D1CE_5EED);
        let source = GlottalSource::new(tract_rate, &initial.glottal, config.seed).map_err(|e| {
            EngineError::Config(format!("default voice source: {e}"))
        })?;

        Ok(Self {
            steps_per_block: (block_seconds * tract_rate).round() as usize,
            resampler: Resampler::new(tract_rate, sr),
            target: to_vector(&initial),
            smoothed: to_vector(&initial),
            shape_tenseness: initial.glottal.tenseness,
            sender: Some(ControlSender(tx)),
            inbox: rx,
            smoothing,
            source,
            tract,
            areas,
            constriction,
            palate,
            config,
            blocks: 0,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn palate(&self) -> &Arc<PalateCurve> {
        &self.palate
    }

    /// The cross-thread producer handle. Available once; later calls get `None`.
    pub fn control_sender(&mut self) -> Option<ControlSender> {
        self.sender.take()
    }

    /// Sets the control target from the rendering side. Supersedes anything
    /// queued through the sender so far.
    pub fn push_control(&mut self, snapshot: ControlSnapshot) {
        while self.inbox.take().is_some() {}
        self.target = to_vector(&snapshot.sanitized());
    }

    /// The smoothed controls the next block starts from.
    pub fn effective_controls(&self) -> ControlSnapshot {
        let v = &self.smoothed;
        ControlSnapshot {
            state: ArticulatoryState {
                r: v[0],
                theta: v[1],
                fingers: std::array::from_fn(|k| v[2 + k]),
            },
            glottal: GlottalControls {
                f0: v[2 + FINGERS],
                tenseness: v[3 + FINGERS],
                voiced: v[4 + FINGERS] > 0.5,
            },
            t_ms: self.blocks as f64 * self.config.block_size as f64 * 1000.0 / self.config.sample_rate as f64,
        }
    }

    pub fn areas(&self) -> &AreaFunction {
        &self.areas
    }

    pub fn constriction(&self) -> ConstrictionInfo {
        self.constriction
    }

    pub fn tract(&self) -> &TractState {
        &self.tract
    }

    /// Blocks rendered so far.
    pub fn blocks_rendered(&self) -> u64 {
        self.blocks
    }

    pub fn render_block(&mut self) -> AudioBlock {
        let t_ms = self.blocks as f64 * self.config.block_size as f64 * 1000.0 / self.config.sample_rate as f64;
        let mut samples = vec![0.0; self.config.block_size];
        self.render_into(&mut samples);
        let rms = (samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64).sqrt();
        AudioBlock {
            sample_rate: self.config.sample_rate,
            t_ms,
            samples,
            areas: self.areas.clone(),
            constriction: self.constriction,
            rms,
        }
    }

    pub fn render(&mut self, n_blocks: usize) -> Vec<AudioBlock> {
        (0..n_blocks).map(|_| self.render_block()).collect()
    }

    /// Renders one block into `out`, whose length must equal the block size.
    pub fn render_into(&mut self, out: &mut [f64]) {
        assert_eq!(out.len(), self.config.block_size, "output slice must hold one block");
        self.begin_block();

        let f0 = self.smoothed[2 + FINGERS];
        let tenseness = self.smoothed[3 + FINGERS];
        let voicing = self.smoothed[4 + FINGERS];
        let aspiration = self.config.aspiration;
        let gain = self.config.output_gain;
        let source = &mut self.source;
        let tract = &mut self.tract;
        for o in out.iter_mut() {
            let y = self
                .resampler
                .next(|| tract.step(source.next_sample(f0, tenseness, voicing, aspiration)));
            *o = (gain * y).tanh();
        }
        self.blocks += 1;
    }

    fn begin_block(&mut self) {
        if let Some(s) = self.inbox.take() {
            self.target = to_vector(&s);
        }
        for (s, t) in self.smoothed.iter_mut().zip(&self.target) {
            *s += self.smoothing * (t - *s);
        }

        let state = self.effective_controls().state.clamped();
        // A failed fit keeps the previous shape; valid states never fail.
        if let Ok(areas) = shape_areas(&self.config, &self.palate, &state) {
            self.tract.retarget_areas(&areas, self.steps_per_block);
            self.constriction = self.tract.constriction().unwrap_or(self.constriction);
            self.areas = areas;
        }

        let tenseness = self.smoothed[3 + FINGERS];
        if (tenseness - self.shape_tenseness).abs() > 1e-6 {
            let controls = GlottalControls {
                f0: self.smoothed[2 + FINGERS].clamp(MIN_F0, MAX_F0),
                tenseness: tenseness.clamp(0.0, 1.0),
                voiced: true,
            };
            if let Ok(shape) = lf_shape(&controls) {
                self.source.set_shape(shape);
                self.shape_tenseness = tenseness;
            }
        }
    }

    /// Renders recorded glove frames with zero-order hold at block starts.
    /// The output lasts the last timestamp rounded up to whole blocks (at
    /// least one block).
    pub fn replay(
        &mut self,
        frames: &[SensorFrame],
        calib: Option<&Calibration>,
        layout: &ChannelLayout,
        glottal: GlottalControls,
    ) -> Result<Vec<AudioBlock>, EngineError> {
        let calib = calib.ok_or(EngineError::CalibrationMissing)?;
        calib.validate()?;
        layout.validate()?;
        if frames.is_empty() {
            return Err(EngineError::EmptyGesture);
        }
        let states = frames
            .iter()
            .map(|f| frame_to_articulation(&normalize_frame(f, calib), layout).map(|s| (f.t_ms, s)))
            .collect::<Result<Vec<_>, _>>()?;

        let sr = self.config.sample_rate as f64;
        let block = self.config.block_size as f64;
        let last_ms = frames.iter().map(|f| f.t_ms).fold(0.0, f64::max);
        let n_blocks = ((last_ms * sr / 1000.0 / block).ceil() as usize).max(1);

        let mut out = Vec::with_capacity(n_blocks);
        let mut next = 0;
        for b in 0..n_blocks {
            let t_ms = b as f64 * block * 1000.0 / sr;
            while next + 1 < states.len() && states[next + 1].0 <= t_ms {
                next += 1;
            }
            let snapshot = ControlSnapshot {
                state: states[next].1,
                glottal,
                t_ms,
            };
            self.push_control(snapshot);
            out.push(self.render_block());
        }
        Ok(out)
    }
}

/// Geometry pipeline for one articulatory state.
pub fn shape_areas(
    config: &EngineConfig,
    palate: &Arc<PalateCurve>,
    state: &ArticulatoryState,
) -> Result<AreaFunction, EngineError> {
    let points = config.tongue.control_points(state, palate);
    let tongue = fit_spline_with(&points, config.lambda, config.robust)?;
    let d = compute_diameters(palate, &tongue, config.sections)
        .map_err(|e| EngineError::Config(e.to_string()))?;
    Ok(diameters_to_areas(&d))
}

/// Concatenated samples of `blocks`.
pub fn concat(blocks: &[AudioBlock]) -> Vec<f64> {
    blocks.iter().flat_map(|b| b.samples.iter().copied()).collect()
}
