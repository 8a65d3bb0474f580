use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tde_core::InterpolationKind;

/// The five estimators compared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Estimator {
    Bomp,
    IbompParabolic,
    IbompPolar,
    TdeMusic,
    DsMusic,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [
        Estimator::Bomp,
        Estimator::DsMusic,
        Estimator::IbompParabolic,
        Estimator::IbompPolar,
        Estimator::TdeMusic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Bomp => "BOMP",
            Estimator::IbompParabolic => "IBOMP-Parabolic",
            Estimator::IbompPolar => "IBOMP-Polar",
            Estimator::TdeMusic => "TDE-MUSIC",
            Estimator::DsMusic => "DS-MUSIC",
        }
    }

    /// Interpolation used by the greedy estimators.
    pub fn interpolation(self) -> Option<InterpolationKind> {
        match self {
            Estimator::Bomp => Some(InterpolationKind::None),
            Estimator::IbompParabolic => Some(InterpolationKind::Parabolic),
            Estimator::IbompPolar => Some(InterpolationKind::Polar),
            _ => None,
        }
    }

    /// Sort and deduplicate by name, the order used in every output table.
    pub fn canonical(list: &[Estimator]) -> Vec<Estimator> {
        let mut v = list.to_vec();
        v.sort_by_key(|e| e.name());
        v.dedup();
        v
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown estimator `{0}` (expected one of BOMP, IBOMP-Parabolic, IBOMP-Polar, TDE-MUSIC, DS-MUSIC)")]
pub struct UnknownEstimator(pub String);

impl FromStr for Estimator {
    type Err = UnknownEstimator;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .trim()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "bomp" => Ok(Estimator::Bomp),
            "ibompparabolic" | "parabolic" => Ok(Estimator::IbompParabolic),
            "ibomppolar" | "polar" => Ok(Estimator::IbompPolar),
            "tdemusic" => Ok(Estimator::TdeMusic),
            "dsmusic" | "downsamplemusic" => Ok(Estimator::DsMusic),
            _ => Err(UnknownEstimator(s.to_string())),
        }
    }
}

impl TryFrom<String> for Estimator {
    type Error = UnknownEstimator;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Estimator> for String {
    fn from(e: Estimator) -> String {
        e.name().to_string()
    }
}
