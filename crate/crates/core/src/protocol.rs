//! Live control/audio wire format.
//!
//! Text messages are single-line JSON terminated by `\n`; a text frame may
//! carry several of them. Audio goes out as binary frames of one block of
//! signed 16-bit little-endian samples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::area::{ConstrictionClass, ConstrictionInfo};
use crate::engine::{AudioBlock, ControlSnapshot};
use crate::glottis::{GlottalControls, MAX_F0, MIN_F0};
use crate::io::to_pcm16;
use crate::kinematics::{ArticulatoryState, FINGERS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("{field} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        field: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

/// Client to server. Glottal fields may be omitted to keep their last value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ClientMessage {
    Control(ControlMessage),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlMessage {
    pub r: f64,
    pub theta: f64,
    pub fingers: [f64; FINGERS],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tenseness: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub voiced: Option<bool>,
}

impl ControlMessage {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let check = |field, value: f64, lo, hi| {
            if (lo..=hi).contains(&value) {
                Ok(())
            } else {
                Err(ProtocolError::OutOfRange { field, value, lo, hi })
            }
        };
        check("r", self.r, 0.0, 1.0)?;
        check("theta", self.theta, -1.0, 1.0)?;
        const NAMES: [&str; FINGERS] = ["fingers[0]", "fingers[1]", "fingers[2]", "fingers[3]", "fingers[4]"];
        for (name, &f) in NAMES.iter().zip(&self.fingers) {
            check(name, f, 0.0, 1.0)?;
        }
        if let Some(f0) = self.f0 {
            check("f0", f0, MIN_F0, MAX_F0)?;
        }
        if let Some(t) = self.tenseness {
            check("tenseness", t, 0.0, 1.0)?;
        }
        Ok(())
    }

    /// Merges into the session's previous glottal settings.
    pub fn to_snapshot(&self, previous: GlottalControls) -> ControlSnapshot {
        let glottal = GlottalControls {
            f0: self.f0.unwrap_or(previous.f0),
            tenseness: self.tenseness.unwrap_or(previous.tenseness),
            voiced: self.voiced.unwrap_or(previous.voiced),
        };
        let state = ArticulatoryState {
            r: self.r,
            theta: self.theta,
            fingers: self.fingers,
        };
        ControlSnapshot::new(state, glottal)
    }
}

/// Parses one JSON message; blank input is malformed.
pub fn parse_client(text: &str) -> Result<ClientMessage, ProtocolError> {
    let msg: ClientMessage =
        serde_json::from_str(text.trim()).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
    match &msg {
        ClientMessage::Control(c) => c.validate()?,
    }
    Ok(msg)
}

/// Splits a text frame into its newline-delimited messages.
pub fn parse_client_lines(text: &str) -> Vec<Result<ClientMessage, ProtocolError>> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.is_empty() {
        return vec![Err(ProtocolError::Malformed("empty message".into()))];
    }
    lines.into_iter().map(parse_client).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ServerMessage {
    State(StateMessage),
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMessage {
    pub areas: Vec<f64>,
    pub constriction: ConstrictionMessage,
    pub rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrictionMessage {
    pub index: usize,
    pub area: f64,
    /// `open`, `fricative` or `occluded`.
    pub class: String,
}

impl From<&ConstrictionInfo> for ConstrictionMessage {
    fn from(c: &ConstrictionInfo) -> Self {
        let class = match c.class {
            ConstrictionClass::Open => "open",
            ConstrictionClass::Fricative => "fricative",
            ConstrictionClass::Occluded => "occluded",
        };
        Self {
            index: c.index,
            area: c.min_area,
            class: class.into(),
        }
    }
}

impl ServerMessage {
    pub fn state(block: &AudioBlock) -> Self {
        Self::State(StateMessage {
            areas: block.areas.0.clone(),
            constriction: (&block.constriction).into(),
            rms: block.rms,
        })
    }

    pub fn error(err: &ProtocolError) -> Self {
        Self::Error {
            message: err.to_string(),
        }
    }

    /// One JSON line, newline included.
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("server messages serialize");
        s.push('\n');
        s
    }
}

pub fn audio_frame(samples: &[f64]) -> Vec<u8> {
    samples.iter().flat_map(|&s| to_pcm16(s).to_le_bytes()).collect()
}

pub fn decode_audio_frame(bytes: &[u8]) -> Vec<i16> {
    bytes
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]))
        .collect()
}
