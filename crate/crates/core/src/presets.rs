//! Named postures at the corners of the vowel triangle.

use std::fmt;
use std::str::FromStr;

use crate::kinematics::{ArticulatoryState, FINGERS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Vowel {
    /// Close front: jaw closed, tongue protruded.
    I,
    /// Open back: jaw open, tongue retracted.
    A,
    /// Close back: jaw closed, tongue retracted.
    U,
    /// Mid-radius rest posture.
    Neutral,
}

impl Vowel {
    pub const ALL: [Vowel; 4] = [Vowel::I, Vowel::A, Vowel::U, Vowel::Neutral];

    pub fn state(self) -> ArticulatoryState {
        let (r, theta) = match self {
            Vowel::I => (0.0, 1.0),
            Vowel::A => (1.0, -1.0),
            Vowel::U => (0.0, -1.0),
            Vowel::Neutral => return ArticulatoryState::NEUTRAL,
        };
        ArticulatoryState {
            r,
            theta,
            fingers: [0.0; FINGERS],
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Vowel::I => "i",
            Vowel::A => "a",
            Vowel::U => "u",
            Vowel::Neutral => "neutral",
        }
    }
}

impl fmt::Display for Vowel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Vowel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().trim_matches('/') {
            "i" => Ok(Vowel::I),
            "a" => Ok(Vowel::A),
            "u" => Ok(Vowel::U),
            "neutral" | "schwa" => Ok(Vowel::Neutral),
            other => Err(format!("unknown vowel {other:?} (expected i, a, u or neutral)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for v in Vowel::ALL {
            assert_eq!(v.symbol().parse::<Vowel>().unwrap(), v);
            assert!(v.state().is_valid());
        }
        assert_eq!("/i/".parse::<Vowel>().unwrap(), Vowel::I);
        assert!("e".parse::<Vowel>().is_err());
    }
}
