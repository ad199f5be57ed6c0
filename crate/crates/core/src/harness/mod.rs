//! Episodes, policies, metrics and benchmark reporting.

mod benchmark;
mod config;
mod episode;
mod export;
mod metrics;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use benchmark::{run_benchmark, write_report, Aggregate, BenchmarkReport, EpisodeRow};
pub use config::{EpisodeSettings, ExperimentConfig};
pub use episode::{
    run_episode, run_episode_detailed, run_episode_with, EpisodeRun, visible_ground_truth, EpisodeLog, EpisodeOptions, Observation, Pipeline, PushLog,
    StepLog, UncertaintySummary,
};
pub use export::write_depth_png;
pub use metrics::{count_matches, f1_score, metrics, CountMatch, Metrics};

/// Exploration strategy of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    /// Recognize once, never push.
    None,
    /// Uniform start among low cells, uniform direction.
    Random,
    /// Lowest-obstacle start among occupied regions, uniform direction.
    SceRandom,
    /// Uncertainty-driven planner with a termination threshold.
    Smart,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::None, Policy::Random, Policy::SceRandom, Policy::Smart];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::None => "none",
            Policy::Random => "random",
            Policy::SceRandom => "sce_random",
            Policy::Smart => "smart",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Policy::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::UnknownPolicy(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_names_round_trip() {
        for p in Policy::ALL {
            assert_eq!(p.as_str().parse::<Policy>().unwrap(), p);
        }
        assert!(matches!("greedy".parse::<Policy>(), Err(Error::UnknownPolicy(_))));
    }
}
