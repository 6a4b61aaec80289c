use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

/// Position-decay schemes shared by the rule and neighbor methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decay {
    Same,
    Linear,
    Div,
    Quadratic,
    Log,
}

impl Decay {
    pub const ALL: [Decay; 5] = [Decay::Same, Decay::Linear, Decay::Div, Decay::Quadratic, Decay::Log];

    /// Weight of the 1-based position `pos` in a session of length `len`;
    /// the last position weighs the most.
    pub fn position_weight(self, pos: usize, len: usize) -> f64 {
        debug_assert!(pos >= 1 && pos <= len);
        let (p, l) = (pos as f64, len as f64);
        match self {
            Decay::Same => 1.0,
            Decay::Linear => (1.0 - 0.1 * (l - p)).max(0.0),
            Decay::Div => p / l,
            Decay::Quadratic => (p / l) * (p / l),
            Decay::Log => 1.0 / (l - p + 1.7).log10(),
        }
    }

    /// Weight of a forward gap of `distance >= 1` positions.
    pub fn distance_weight(self, distance: usize) -> f64 {
        debug_assert!(distance >= 1);
        let x = distance as f64;
        match self {
            Decay::Same => 1.0,
            Decay::Linear => (1.0 - 0.1 * x).max(0.0),
            Decay::Div => 1.0 / x,
            Decay::Quadratic => 1.0 / (x * x),
            Decay::Log => 1.0 / (x + 1.7).log10(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Decay::Same => "same",
            Decay::Linear => "linear",
            Decay::Div => "div",
            Decay::Quadratic => "quadratic",
            Decay::Log => "log",
        }
    }
}

impl fmt::Display for Decay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Decay {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Decay::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown weighting scheme '{s}'")))
    }
}
