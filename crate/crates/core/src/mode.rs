use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Laser degradation mode. The integer codes are part of every file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum DegradationMode {
    Normal = 0,
    Gradual = 1,
    Rapid = 2,
    Sudden = 3,
}

pub const NUM_CLASSES: usize = 4;

impl DegradationMode {
    pub const ALL: [DegradationMode; NUM_CLASSES] = [
        DegradationMode::Normal,
        DegradationMode::Gradual,
        DegradationMode::Rapid,
        DegradationMode::Sudden,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::Argument(format!("mode code {code} is outside 0..=3")))
    }

    pub fn is_fault(self) -> bool {
        self != DegradationMode::Normal
    }

    pub fn name(self) -> &'static str {
        match self {
            DegradationMode::Normal => "normal",
            DegradationMode::Gradual => "gradual",
            DegradationMode::Rapid => "rapid",
            DegradationMode::Sudden => "sudden",
        }
    }
}

impl From<DegradationMode> for u8 {
    fn from(mode: DegradationMode) -> u8 {
        mode.code()
    }
}

impl TryFrom<u8> for DegradationMode {
    type Error = Error;

    fn try_from(code: u8) -> Result<Self> {
        Self::from_code(code)
    }
}

impl fmt::Display for DegradationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Index of the largest score; ties go to the lowest class code.
pub fn argmax_mode(scores: &[f64; NUM_CLASSES]) -> DegradationMode {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    DegradationMode::ALL[best]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_stable() {
        for (i, mode) in DegradationMode::ALL.iter().enumerate() {
            assert_eq!(mode.code() as usize, i);
            assert_eq!(DegradationMode::from_code(i as u8).unwrap(), *mode);
        }
        assert!(DegradationMode::from_code(4).is_err());
    }

    #[test]
    fn serializes_as_integer_code() {
        let json = serde_json::to_string(&DegradationMode::Rapid).unwrap();
        assert_eq!(json, "2");
        let back: DegradationMode = serde_json::from_str("3").unwrap();
        assert_eq!(back, DegradationMode::Sudden);
        assert!(serde_json::from_str::<DegradationMode>("7").is_err());
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax_mode(&[0.25; 4]), DegradationMode::Normal);
        assert_eq!(argmax_mode(&[0.1, 0.4, 0.4, 0.1]), DegradationMode::Gradual);
        assert_eq!(argmax_mode(&[0.7, 0.1, 0.1, 0.1]), DegradationMode::Normal);
    }
}
