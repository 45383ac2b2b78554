//! Forecast targets and point forecasts shared by the forecasters, the
//! quantile layer and scoring.

use serde::{Deserialize, Serialize};

use crate::data::Channel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Cases,
    Deaths,
    Hosp,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::Cases, Target::Deaths, Target::Hosp];

    pub fn channel(self) -> Channel {
        match self {
            Target::Cases => Channel::Cases,
            Target::Deaths => Channel::Deaths,
            Target::Hosp => Channel::Hosp,
        }
    }

    pub fn name(self) -> &'static str {
        self.channel().name()
    }

    pub fn parse(s: &str) -> Option<Target> {
        match Channel::parse(s)? {
            Channel::Cases => Some(Target::Cases),
            Channel::Deaths => Some(Target::Deaths),
            Channel::Hosp => Some(Target::Hosp),
            _ => None,
        }
    }

    /// Noun used in forecast hub target strings.
    pub fn hub_noun(self) -> &'static str {
        match self {
            Target::Cases => "case",
            Target::Deaths => "death",
            Target::Hosp => "hosp",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A weekly total forecast in original units, made at the end of
/// `origin_week` for week `origin_week + horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointForecast {
    pub target: Target,
    pub horizon: u32,
    pub origin_week: u32,
    pub value: f64,
}

impl PointForecast {
    pub fn target_week(&self) -> u32 {
        self.origin_week + self.horizon
    }
}
