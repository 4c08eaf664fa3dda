//! The seven modeled ball outcomes and the phase partition of an innings.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Result of one legal delivery from the batting side's point of view.
///
/// Five-run outcomes are not modeled; wides and no-balls never reach this
/// type because they are not legal deliveries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "W")]
    Wicket,
    #[serde(rename = "0")]
    Dot,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "3")]
    Three,
    #[serde(rename = "4")]
    Four,
    #[serde(rename = "6")]
    Six,
}

impl Outcome {
    pub const COUNT: usize = 7;

    /// Canonical order used for every probability array in the crate.
    pub const ALL: [Outcome; 7] = [
        Outcome::Wicket,
        Outcome::Dot,
        Outcome::One,
        Outcome::Two,
        Outcome::Three,
        Outcome::Four,
        Outcome::Six,
    ];

    /// Runs credited to the batting side. A wicket scores nothing.
    pub const fn runs(self) -> u32 {
        match self {
            Outcome::Wicket | Outcome::Dot => 0,
            Outcome::One => 1,
            Outcome::Two => 2,
            Outcome::Three => 3,
            Outcome::Four => 4,
            Outcome::Six => 6,
        }
    }

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(idx: usize) -> Option<Outcome> {
        Outcome::ALL.get(idx).copied()
    }

    /// Maps bat-credited runs onto an outcome; `None` for 5 and anything above 6.
    pub fn from_runs(runs: u32) -> Option<Outcome> {
        match runs {
            0 => Some(Outcome::Dot),
            1 => Some(Outcome::One),
            2 => Some(Outcome::Two),
            3 => Some(Outcome::Three),
            4 => Some(Outcome::Four),
            6 => Some(Outcome::Six),
            _ => None,
        }
    }

    pub const fn label(self) -> &'static str {
        match self {
            Outcome::Wicket => "W",
            Outcome::Dot => "0",
            Outcome::One => "1",
            Outcome::Two => "2",
            Outcome::Three => "3",
            Outcome::Four => "4",
            Outcome::Six => "6",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Innings phase, assigned from the 0-indexed over number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    /// Powerplay, overs 0-5.
    PP,
    /// Middle overs, 6-14.
    MI,
    /// Death overs, 15-19.
    DE,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::PP, Phase::MI, Phase::DE];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            Phase::PP => "PP",
            Phase::MI => "MI",
            Phase::DE => "DE",
        }
    }

    /// Total version of [`crate::ingest::phase_of_over`] for internal use where
    /// the over index is already known to be in range.
    pub(crate) const fn of_over_unchecked(over: u32) -> Phase {
        if over <= 5 {
            Phase::PP
        } else if over <= 14 {
            Phase::MI
        } else {
            Phase::DE
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "PP" => Ok(Phase::PP),
            "MI" => Ok(Phase::MI),
            "DE" => Ok(Phase::DE),
            other => Err(format!("unknown phase `{other}` (expected PP, MI or DE)")),
        }
    }
}
