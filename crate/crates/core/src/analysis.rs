//! Offline measurement: Hann-windowed magnitude spectrum and LPC formants.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;
use thiserror::Error;

pub const MIN_SPECTRUM_LEN: usize = 256;
pub const PRE_EMPHASIS: f64 = 0.97;
pub const FRAME_SECONDS: f64 = 0.040;
/// Roots wider than this are not formants.
pub const MAX_BANDWIDTH: f64 = 400.0;
/// Roots below this are treated as glottal/DC structure rather than formants.
pub const MIN_FORMANT_HZ: f64 = 90.0;
pub const MAX_FORMANTS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("no frame produced a qualifying formant")]
    UnstableFrame,
    #[error("formant count must be in 1..={MAX_FORMANTS}, got {0}")]
    BadCount(usize),
    #[error("sample rate must be positive, got {0}")]
    BadSampleRate(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Magnitudes for bins `0..=fft_len / 2`.
    pub magnitudes: Vec<f64>,
    pub fft_len: usize,
    pub bin_hz: f64,
}

impl Spectrum {
    pub fn peak_bin(&self) -> usize {
        self.magnitudes
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &m)| if m > best.1 { (i, m) } else { best })
            .0
    }
}

pub fn spectrum(samples: &[f64], sr: f64) -> Result<Spectrum, AnalysisError> {
    if samples.len() < MIN_SPECTRUM_LEN {
        return Err(AnalysisError::TooShort {
            needed: MIN_SPECTRUM_LEN,
            got: samples.len(),
        });
    }
    if !(sr > 0.0) {
        return Err(AnalysisError::BadSampleRate(sr));
    }
    let fft_len = samples.len().next_power_of_two();
    let window = hann(samples.len());
    let mut buf: Vec<Complex<f64>> = samples
        .iter()
        .zip(&window)
        .map(|(s, w)| Complex::new(s * w, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(fft_len)
        .collect();
    FftPlanner::new().plan_fft_forward(fft_len).process(&mut buf);
    Ok(Spectrum {
        magnitudes: buf[..=fft_len / 2].iter().map(|c| c.norm()).collect(),
        fft_len,
        bin_hz: sr / fft_len as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Formant {
    pub frequency_hz: f64,
    pub bandwidth_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormantEstimate {
    /// Ascending by frequency.
    pub formants: Vec<Formant>,
    /// Frames that yielded at least one formant.
    pub frames: usize,
    pub frame_len: usize,
    pub hop: usize,
    pub order: usize,
}

impl FormantEstimate {
    pub fn frequency(&self, k: usize) -> Option<f64> {
        self.formants.get(k).map(|f| f.frequency_hz)
    }
}

pub fn lpc_order(sr: f64) -> usize {
    2 + (sr / 1000.0).round() as usize
}

/// Formant candidates of every analysis frame, ascending within each frame.
/// Silent or singular frames yield an empty list.
pub fn frame_formants(samples: &[f64], sr: f64) -> Result<FrameAnalysis, AnalysisError> {
    if !(sr > 0.0) {
        return Err(AnalysisError::BadSampleRate(sr));
    }
    let needed = (0.030 * sr).ceil() as usize;
    if samples.len() < needed.max(2) {
        return Err(AnalysisError::TooShort {
            needed,
            got: samples.len(),
        });
    }
    let frame_len = ((FRAME_SECONDS * sr).round() as usize).min(samples.len());
    let hop = (frame_len / 2).max(1);
    let order = lpc_order(sr).min(frame_len - 1);

    let mut emphasized = Vec::with_capacity(samples.len());
    emphasized.push(samples[0]);
    emphasized.extend(samples.windows(2).map(|w| w[1] - PRE_EMPHASIS * w[0]));

    let window = hann(frame_len);
    let mut frames = Vec::new();
    let mut start = 0;
    while start + frame_len <= emphasized.len() {
        let frame: Vec<f64> = emphasized[start..start + frame_len]
            .iter()
            .zip(&window)
            .map(|(s, w)| s * w)
            .collect();
        start += hop;
        frames.push(match levinson(&autocorrelation(&frame, order)) {
            Some(a) => formants_from_lpc(&a, sr),
            None => Vec::new(),
        });
    }
    Ok(FrameAnalysis {
        frames,
        frame_len,
        hop,
        order,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameAnalysis {
    pub frames: Vec<Vec<Formant>>,
    pub frame_len: usize,
    pub hop: usize,
    pub order: usize,
}

/// Autocorrelation LPC over 40 ms Hann frames with 50% overlap; each formant
/// slot is the median over the frames that filled it.
pub fn estimate_formants(samples: &[f64], sr: f64, count: usize) -> Result<FormantEstimate, AnalysisError> {
    if !(1..=MAX_FORMANTS).contains(&count) {
        return Err(AnalysisError::BadCount(count));
    }
    let analysis = frame_formants(samples, sr)?;
    let mut slots: Vec<Vec<Formant>> = vec![Vec::new(); count];
    let mut frames = 0;
    for found in analysis.frames.iter().filter(|f| !f.is_empty()) {
        frames += 1;
        for (slot, f) in slots.iter_mut().zip(found) {
            slot.push(*f);
        }
    }
    if frames == 0 {
        return Err(AnalysisError::UnstableFrame);
    }
    let formants = slots
        .into_iter()
        .filter(|s| !s.is_empty())
        .map(|s| Formant {
            frequency_hz: median(s.iter().map(|f| f.frequency_hz).collect()),
            bandwidth_hz: median(s.iter().map(|f| f.bandwidth_hz).collect()),
        })
        .collect();
    Ok(FormantEstimate {
        formants,
        frames,
        frame_len: analysis.frame_len,
        hop: analysis.hop,
        order: analysis.order,
    })
}

fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

fn autocorrelation(x: &[f64], order: usize) -> Vec<f64> {
    (0..=order)
        .map(|lag| x[lag..].iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// Levinson-Durbin: returns `[1, a_1, .., a_p]` or `None` for a silent or
/// numerically singular frame.
fn levinson(r: &[f64]) -> Option<Vec<f64>> {
    let p = r.len() - 1;
    if !(r[0] > 0.0) || !r[0].is_finite() {
        return None;
    }
    let mut a = vec![0.0; p + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for i in 1..=p {
        let acc: f64 = (1..i).map(|j| a[j] * r[i - j]).sum::<f64>() + r[i];
        let k = -acc / err;
        if !k.is_finite() || k.abs() >= 1.0 {
            return None;
        }
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if !(err > 0.0) {
            // perfectly predictable frame; keep what we have
            a.truncate(i + 1);
            break;
        }
    }
    Some(a)
}

fn formants_from_lpc(a: &[f64], sr: f64) -> Vec<Formant> {
    let p = a.len() - 1;
    if p < 2 {
        return Vec::new();
    }
    // companion matrix of z^p + a_1 z^(p-1) + .. + a_p
    let companion = DMatrix::from_fn(p, p, |i, j| {
        if i == 0 {
            -a[j + 1]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let mut out: Vec<Formant> = companion
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im > 0.0 && z.norm() < 1.0)
        .map(|z| Formant {
            frequency_hz: z.arg() * sr / (2.0 * PI),
            bandwidth_hz: -z.norm().ln() * sr / PI,
        })
        .filter(|f| f.bandwidth_hz < MAX_BANDWIDTH && f.frequency_hz > MIN_FORMANT_HZ && f.frequency_hz < sr / 2.0)
        .collect();
    out.sort_by(|x, y| x.frequency_hz.total_cmp(&y.frequency_hz));
    out
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
