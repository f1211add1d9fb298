use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Number of output classes.
pub const NUM_CLASSES: usize = 3;

/// Transportation mode of a trip. The discriminant is the class index used by the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TravelMode {
    Walking = 0,
    Biking = 1,
    Driving = 2,
}

impl TravelMode {
    pub const ALL: [TravelMode; NUM_CLASSES] =
        [TravelMode::Walking, TravelMode::Biking, TravelMode::Driving];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Short wire name used in roster, trip and feature files.
    pub fn code(self) -> &'static str {
        match self {
            TravelMode::Walking => "walk",
            TravelMode::Biking => "bike",
            TravelMode::Driving => "drive",
        }
    }
}

impl fmt::Display for TravelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            TravelMode::Walking => "Walking",
            TravelMode::Biking => "Biking",
            TravelMode::Driving => "Driving",
        };
        f.write_str(name)
    }
}

impl FromStr for TravelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "walk" | "walking" => Ok(TravelMode::Walking),
            "bike" | "biking" => Ok(TravelMode::Biking),
            "drive" | "driving" => Ok(TravelMode::Driving),
            other => Err(Error::InvalidArgument(format!("unknown mode {other:?}"))),
        }
    }
}
