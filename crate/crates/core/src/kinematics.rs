//! Glove frames to articulatory state.
//!
//! A glove delivers [`CHANNELS`] raw bend readings per frame. Calibration
//! captures the per-channel raw range, normalization maps readings into
//! `[0, 1]`, and a [`ChannelLayout`] assigns the wrist and fingertip roles
//! that produce an [`ArticulatoryState`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of sensor channels in one glove frame (three per finger, three on the wrist).
pub const CHANNELS: usize = 18;

/// Number of fingers, ordered thumb, index, middle, ring, pinky.
pub const FINGERS: usize = 5;

/// Relative floor below which a channel's raw range counts as a dead sensor.
pub const CALIBRATION_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("calibration needs at least two frames, got {0}")]
    EmptySequence(usize),
    /// Zero-based channel indices.
    #[error("no usable raw range on channel(s) {}", fmt_channels(.0))]
    DegenerateChannels(Vec<usize>),
    #[error("layout references channel {0}, but frames only have {CHANNELS} channels")]
    LayoutMismatch(usize),
    #[error("calibration channel {0} has min >= max")]
    InvalidCalibration(usize),
}

/// Names channels the way the gesture CSV header does (`s1`..`s18`).
fn fmt_channels(channels: &[usize]) -> String {
    channels.iter().map(|c| format!("s{}", c + 1)).collect::<Vec<_>>().join(", ")
}

/// One timestamped raw glove reading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorFrame {
    /// Milliseconds since session start.
    pub t_ms: f64,
    pub channels: [f64; CHANNELS],
}

impl SensorFrame {
    pub fn new(t_ms: f64, channels: [f64; CHANNELS]) -> Self {
        Self { t_ms, channels }
    }
}

/// Per-channel raw range captured from a calibration sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Calibration {
    /// Identity calibration: raw values already live in `[0, 1]`.
    pub fn unit() -> Self {
        Self {
            min: vec![0.0; CHANNELS],
            max: vec![1.0; CHANNELS],
        }
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        if self.min.len() != CHANNELS || self.max.len() != CHANNELS {
            return Err(KinematicsError::LayoutMismatch(self.min.len().min(self.max.len())));
        }
        for (i, (lo, hi)) in self.min.iter().zip(&self.max).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(KinematicsError::InvalidCalibration(i));
            }
        }
        Ok(())
    }
}

/// Takes the per-channel min/max over a recording.
///
/// Channels whose range is below [`CALIBRATION_EPSILON`] of the raw scale are
/// rejected, all of them in one error.
pub fn calibrate(frames: &[SensorFrame]) -> Result<Calibration, KinematicsError> {
    if frames.len() < 2 {
        return Err(KinematicsError::EmptySequence(frames.len()));
    }
    let mut min = vec![f64::INFINITY; CHANNELS];
    let mut max = vec![f64::NEG_INFINITY; CHANNELS];
    for frame in frames {
        for (c, &v) in frame.channels.iter().enumerate() {
            min[c] = min[c].min(v);
            max[c] = max[c].max(v);
        }
    }
    let dead: Vec<usize> = (0..CHANNELS)
        .filter(|&c| {
            let scale = min[c].abs().max(max[c].abs()).max(1.0);
            !(max[c] - min[c] >= CALIBRATION_EPSILON * scale)
        })
        .collect();
    if !dead.is_empty() {
        return Err(KinematicsError::DegenerateChannels(dead));
    }
    Ok(Calibration { min, max })
}

/// A frame whose channels have been mapped into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedFrame {
    pub t_ms: f64,
    pub channels: [f64; CHANNELS],
}

/// Affine map from each channel's calibrated range onto `[0, 1]`, clamped.
pub fn normalize_frame(raw: &SensorFrame, calib: &Calibration) -> NormalizedFrame {
    let mut channels = [0.0; CHANNELS];
    for (c, out) in channels.iter_mut().enumerate() {
        let (lo, hi) = (calib.min[c], calib.max[c]);
        let v = (raw.channels[c] - lo) / (hi - lo);
        // NaN readings collapse to the base posture
        *out = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    }
    NormalizedFrame {
        t_ms: raw.t_ms,
        channels,
    }
}

/// Assignment of glove channels to articulatory roles.
///
/// Serialized as `{"flexion": int, "deviation": int, "fingertips": [int; 5]}`.
/// The optional `finger_groups` key lists, per finger, channels whose mean is
/// used as that finger's elevation instead of the fingertip alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelLayout {
    pub flexion: usize,
    pub deviation: usize,
    pub fingertips: [usize; FINGERS],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finger_groups: Option<[Vec<usize>; FINGERS]>,
}

impl Default for ChannelLayout {
    /// Fingers occupy channels 0..15 in thumb-to-pinky triples, fingertip
    /// last; channels 15, 16, 17 are wrist flexion, deviation and spare.
    fn default() -> Self {
        Self {
            flexion: 15,
            deviation: 16,
            fingertips: [2, 5, 8, 11, 14],
            finger_groups: None,
        }
    }
}

impl ChannelLayout {
    /// Layout that averages each finger's full sensor triple.
    pub fn averaged_triples() -> Self {
        Self {
            finger_groups: Some(std::array::from_fn(|f| vec![3 * f, 3 * f + 1, 3 * f + 2])),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        let groups = self.finger_groups.iter().flatten().flatten();
        let all = [self.flexion, self.deviation]
            .into_iter()
            .chain(self.fingertips)
            .chain(groups.copied());
        for idx in all {
            if idx >= CHANNELS {
                return Err(KinematicsError::LayoutMismatch(idx));
            }
        }
        if let Some(groups) = &self.finger_groups {
            if let Some(f) = groups.iter().position(Vec::is_empty) {
                return Err(KinematicsError::LayoutMismatch(self.fingertips[f]));
            }
        }
        Ok(())
    }
}

/// The control variables: jaw radius, tongue advancement, finger elevations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArticulatoryState {
    /// 0 = closed jaw (wrist extension), 1 = open jaw (full flexion).
    pub r: f64,
    /// -1 = full retraction (radial deviation), +1 = full protrusion (ulnar deviation).
    pub theta: f64,
    /// Thumb, index, middle, ring, pinky; 0 = base grip, 1 = full extension.
    pub fingers: [f64; FINGERS],
}

impl Default for ArticulatoryState {
    fn default() -> Self {
        Self::NEUTRAL
    }
}

impl ArticulatoryState {
    /// Horizontal wrist, gripping fingers: the middle of the vowel triangle.
    pub const NEUTRAL: Self = Self {
        r: 0.5,
        theta: 0.0,
        fingers: [0.0; FINGERS],
    };

    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.r)
            && (-1.0..=1.0).contains(&self.theta)
            && self.fingers.iter().all(|f| (0.0..=1.0).contains(f))
    }

    /// Clamps every field into its legal range; NaN goes to the neutral value.
    pub fn clamped(self) -> Self {
        fn fix(v: f64, lo: f64, hi: f64, fallback: f64) -> f64 {
            if v.is_nan() {
                fallback
            } else {
                v.clamp(lo, hi)
            }
        }
        Self {
            r: fix(self.r, 0.0, 1.0, 0.5),
            theta: fix(self.theta, -1.0, 1.0, 0.0),
            fingers: self.fingers.map(|f| fix(f, 0.0, 1.0, 0.0)),
        }
    }
}

pub fn frame_to_articulation(
    frame: &NormalizedFrame,
    layout: &ChannelLayout,
) -> Result<ArticulatoryState, KinematicsError> {
    layout.validate()?;
    let ch = &frame.channels;
    let fingers = match &layout.finger_groups {
        Some(groups) => std::array::from_fn(|f| {
            groups[f].iter().map(|&c| ch[c]).sum::<f64>() / groups[f].len() as f64
        }),
        None => layout.fingertips.map(|c| ch[c]),
    };
    Ok(ArticulatoryState {
        r: ch[layout.flexion],
        theta: 2.0 * ch[layout.deviation] - 1.0,
        fingers,
    }
    .clamped())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(t: f64, v: f64) -> SensorFrame {
        SensorFrame::new(t, [v; CHANNELS])
    }

    #[test]
    fn calibrate_takes_channel_extremes() {
        let mut a = frame(0.0, 0.0);
        let mut b = frame(1.0, 100.0);
        a.channels[0] = 10.0;
        b.channels[0] = 90.0;
        let calib = calibrate(&[a, b]).unwrap();
        assert_eq!((calib.min[0], calib.max[0]), (10.0, 90.0));
        assert!(calib.min[1..].iter().all(|&v| v == 0.0));
        assert!(calib.max[1..].iter().all(|&v| v == 100.0));
    }

    #[test]
    fn calibrate_rejects_dead_channel() {
        let f = frame(0.0, 3.0);
        assert_eq!(
            calibrate(&[f, f]),
            Err(KinematicsError::DegenerateChannels((0..CHANNELS).collect()))
        );
        let mut g = frame(1.0, 4.0);
        g.channels[7] = 3.0;
        g.channels[12] = 3.0;
        let err = calibrate(&[f, g]).unwrap_err();
        assert_eq!(err, KinematicsError::DegenerateChannels(vec![7, 12]));
        assert!(err.to_string().ends_with("s8, s13"), "{err}");
    }

    #[test]
    fn calibrate_needs_two_frames() {
        assert_eq!(calibrate(&[]), Err(KinematicsError::EmptySequence(0)));
        assert_eq!(calibrate(&[frame(0.0, 1.0)]), Err(KinematicsError::EmptySequence(1)));
    }

    #[test]
    fn normalize_endpoints_and_midpoint() {
        let calib = calibrate(&[frame(0.0, 10.0), frame(1.0, 90.0)]).unwrap();
        assert_eq!(normalize_frame(&frame(0.0, 10.0), &calib).channels, [0.0; CHANNELS]);
        assert_eq!(normalize_frame(&frame(0.0, 90.0), &calib).channels, [1.0; CHANNELS]);
        assert_eq!(normalize_frame(&frame(0.0, 50.0), &calib).channels, [0.5; CHANNELS]);
        assert_eq!(normalize_frame(&frame(0.0, 500.0), &calib).channels, [1.0; CHANNELS]);
        assert_eq!(normalize_frame(&frame(0.0, -5.0), &calib).channels, [0.0; CHANNELS]);
    }

    fn normalized(flex: f64, dev: f64) -> NormalizedFrame {
        let mut channels = [0.0; CHANNELS];
        channels[15] = flex;
        channels[16] = dev;
        NormalizedFrame { t_ms: 0.0, channels }
    }

    #[test]
    fn neutral_wrist_is_mid_radius() {
        let s = frame_to_articulation(&normalized(0.5, 0.5), &ChannelLayout::default()).unwrap();
        assert_eq!(s, ArticulatoryState::NEUTRAL);
    }

    #[test]
    fn wrist_extremes_and_deviation() {
        let layout = ChannelLayout::default();
        assert_eq!(frame_to_articulation(&normalized(1.0, 0.5), &layout).unwrap().r, 1.0);
        assert_eq!(frame_to_articulation(&normalized(0.5, 0.75), &layout).unwrap().theta, 0.5);
        assert_eq!(frame_to_articulation(&normalized(0.5, 0.0), &layout).unwrap().theta, -1.0);
    }

    #[test]
    fn fingertips_and_groups() {
        let mut f = normalized(0.5, 0.5);
        f.channels[12] = 0.3;
        f.channels[13] = 0.6;
        f.channels[14] = 0.9;
        let tip = frame_to_articulation(&f, &ChannelLayout::default()).unwrap();
        assert_eq!(tip.fingers, [0.0, 0.0, 0.0, 0.0, 0.9]);
        let avg = frame_to_articulation(&f, &ChannelLayout::averaged_triples()).unwrap();
        assert!((avg.fingers[4] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn bad_layout_index() {
        let layout = ChannelLayout {
            deviation: 18,
            ..ChannelLayout::default()
        };
        assert_eq!(
            frame_to_articulation(&normalized(0.5, 0.5), &layout),
            Err(KinematicsError::LayoutMismatch(18))
        );
    }

    #[test]
    fn layout_json_shape() {
        let json = serde_json::to_string(&ChannelLayout::default()).unwrap();
        assert_eq!(json, r#"{"flexion":15,"deviation":16,"fingertips":[2,5,8,11,14]}"#);
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent_under_unit_calibration(vals in prop::array::uniform18(-10.0f64..10.0)) {
            let calib = calibrate(&[frame(0.0, -10.0), frame(1.0, 10.0)]).unwrap();
            let once = normalize_frame(&SensorFrame::new(0.0, vals), &calib);
            let again = normalize_frame(&SensorFrame::new(0.0, once.channels), &Calibration::unit());
            prop_assert_eq!(once.channels, again.channels);
        }

        #[test]
        fn articulation_is_total_and_monotone(
            vals in prop::array::uniform18(-1e3f64..1e3),
            bump in 0.0f64..5.0,
        ) {
            let calib = calibrate(&[frame(0.0, -50.0), frame(1.0, 50.0)]).unwrap();
            let layout = ChannelLayout::default();
            let base = SensorFrame::new(0.0, vals);
            let s = frame_to_articulation(&normalize_frame(&base, &calib), &layout).unwrap();
            prop_assert!(s.is_valid());

            let mut more = base;
            more.channels[layout.flexion] += bump;
            more.channels[layout.deviation] += bump;
            let t = frame_to_articulation(&normalize_frame(&more, &calib), &layout).unwrap();
            prop_assert!(t.r >= s.r);
            prop_assert!(t.theta >= s.theta);
        }
    }
}
