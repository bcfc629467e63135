//! File formats: gesture CSV, calibration and layout JSON, area traces, WAV.

use std::fmt::Write as _;
use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::engine::AudioBlock;
use crate::kinematics::{Calibration, ChannelLayout, KinematicsError, SensorFrame, CHANNELS};

pub const SUPPORTED_SAMPLE_RATES: [u32; 2] = [48_000, 44_100];

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// `line` is 1-based and counts the header.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Kinematics {
        path: PathBuf,
        #[source]
        source: KinematicsError,
    },
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error("unsupported wav format: {0}")]
    WavFormat(String),
}

impl IoError {
    fn file(path: &Path, source: std::io::Error) -> Self {
        Self::File {
            path: path.to_path_buf(),
            source,
        }
    }

    fn at(line: usize, message: impl Into<String>) -> Self {
        Self::Parse {
            line,
            message: message.into(),
        }
    }

    /// Prefixes parse errors with the file they came from.
    fn in_file(self, path: &Path) -> Self {
        match self {
            Self::Parse { line, message } => Self::Parse {
                line,
                message: format!("{message} (in {})", path.display()),
            },
            other => other,
        }
    }
}

pub fn gesture_header() -> String {
    let mut h = String::from("t_ms");
    for c in 1..=CHANNELS {
        let _ = write!(h, ",s{c}");
    }
    h
}

/// Parses a gesture recording. Timestamps must be finite and non-decreasing;
/// a file without frames is an error.
pub fn parse_gesture_csv(text: &str) -> Result<Vec<SensorFrame>, IoError> {
    let mut lines = text.split('\n').enumerate().map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)));
    let expected = gesture_header();
    match lines.next() {
        Some((_, h)) if h.trim() == expected => {}
        Some((_, h)) if h.trim().is_empty() => return Err(IoError::at(1, "empty file")),
        Some((_, h)) => return Err(IoError::at(1, format!("expected header `{expected}`, found `{}`", h.trim()))),
        None => return Err(IoError::at(1, "empty file")),
    }

    let mut frames = Vec::new();
    let mut last_t = f64::NEG_INFINITY;
    for (line, row) in lines {
        if row.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != CHANNELS + 1 {
            return Err(IoError::at(line, format!("expected {} fields, found {}", CHANNELS + 1, fields.len())));
        }
        let mut values = [0.0; CHANNELS + 1];
        for (col, (field, out)) in fields.iter().zip(values.iter_mut()).enumerate() {
            *out = field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| IoError::at(line, format!("column {}: `{field}` is not a finite number", col + 1)))?;
        }
        if values[0] < last_t {
            return Err(IoError::at(line, format!("timestamp {} ms goes backwards", values[0])));
        }
        last_t = values[0];
        let mut channels = [0.0; CHANNELS];
        channels.copy_from_slice(&values[1..]);
        frames.push(SensorFrame::new(values[0], channels));
    }
    if frames.is_empty() {
        return Err(IoError::at(2, "no frames after the header"));
    }
    Ok(frames)
}

pub fn gesture_csv(frames: &[SensorFrame]) -> String {
    let mut out = gesture_header();
    out.push('\n');
    for f in frames {
        let _ = write!(out, "{}", f.t_ms);
        for v in f.channels {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn read_gesture_csv(path: &Path) -> Result<Vec<SensorFrame>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    parse_gesture_csv(&text).map_err(|e| e.in_file(path))
}

pub fn write_gesture_csv(path: &Path, frames: &[SensorFrame]) -> Result<(), IoError> {
    fs::write(path, gesture_csv(frames)).map_err(|e| IoError::file(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::file(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn read_calibration(path: &Path) -> Result<Calibration, IoError> {
    let calib: Calibration = read_json(path)?;
    calib.validate().map_err(|source| IoError::Kinematics {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(calib)
}

pub fn write_calibration(path: &Path, calib: &Calibration) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(calib).expect("calibration serializes");
    fs::write(path, text + "\n").map_err(|e| IoError::file(path, e))
}

pub fn read_layout(path: &Path) -> Result<ChannelLayout, IoError> {
    let layout: ChannelLayout = read_json(path)?;
    layout.validate().map_err(|source| IoError::Kinematics {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(layout)
}

/// One row per block: the block start time and the area function it used.
pub fn area_trace_csv(blocks: &[AudioBlock]) -> String {
    let n = blocks.first().map_or(0, |b| b.areas.0.len());
    let mut out = String::from("t_ms");
    for i in 0..n {
        let _ = write!(out, ",a_{i}");
    }
    out.push('\n');
    for b in blocks {
        let _ = write!(out, "{}", b.t_ms);
        for a in &b.areas.0 {
            let _ = write!(out, ",{a}");
        }
        out.push('\n');
    }
    out
}

pub fn write_area_trace(path: &Path, blocks: &[AudioBlock]) -> Result<(), IoError> {
    fs::write(path, area_trace_csv(blocks)).map_err(|e| IoError::file(path, e))
}

/// Rounds a sample in `[-1, 1]` to signed 16-bit; out-of-range input saturates.
pub fn to_pcm16(x: f64) -> i16 {
    if x.is_nan() {
        return 0;
    }
    (x * i16::MAX as f64).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

fn wav_spec(sample_rate: u32) -> hound::WavSpec {
    hound::WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    }
}

/// Mono 16-bit PCM WAV image.
pub fn wav_bytes(samples: &[f64], sample_rate: u32) -> Result<Vec<u8>, IoError> {
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut w = hound::WavWriter::new(&mut cursor, wav_spec(sample_rate))?;
        for &s in samples {
            w.write_sample(to_pcm16(s))?;
        }
        w.finalize()?;
    }
    Ok(cursor.into_inner())
}

pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<(), IoError> {
    let bytes = wav_bytes(samples, sample_rate)?;
    fs::write(path, bytes).map_err(|e| IoError::file(path, e))
}

/// Decoded audio: samples in `[-1, 1]`, channels averaged to mono.
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

pub fn read_wav(path: &Path) -> Result<Audio, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::file(path, e))?;
    decode_wav(&bytes)
}

/// Accepts integer PCM up to 32 bits and 32-bit float.
pub fn decode_wav(bytes: &[u8]) -> Result<Audio, IoError> {
    let mut reader = hound::WavReader::new(Cursor::new(bytes))?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.sample_rate == 0 {
        return Err(IoError::WavFormat(format!(
            "{} channels at {} Hz",
            spec.channels, spec.sample_rate
        )));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, bits @ 1..=32) => {
            let scale = (1u64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<Result<_, _>>()?
        }
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()?,
        (format, bits) => return Err(IoError::WavFormat(format!("{bits}-bit {format:?}"))),
    };
    let ch = spec.channels as usize;
    let samples = interleaved
        .chunks_exact(ch)
        .map(|frame| frame.iter().sum::<f64>() / ch as f64)
        .collect();
    Ok(Audio {
        samples,
        sample_rate: spec.sample_rate,
    })
}
