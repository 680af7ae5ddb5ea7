//! Policy search under a reward program.
//!
//! Policies are linear in the environment's feature map and are optimized with
//! the cross-entropy method (CEM) with retained elites. All randomness is
//! split from the configured seed, and population rollouts are reduced in
//! candidate order, so results do not depend on the number of worker threads.

mod cem;
mod policy;
mod rollout;
mod stats;

pub use cem::{train, IterationSummary, TrainingLog};
pub use policy::Policy;
pub use rollout::{discounted_return, evaluate_policy, rollout, EvalMetrics, Step, Trajectory};
pub use stats::{collect_stats, ComponentStat, ComponentStats, StatsAccumulator};

use crate::env::EnvError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("invalid trainer config: {0}")]
    Config(String),
    #[error("policy has shape {got:?} (actions x features), environment needs {expected:?}")]
    PolicyShape { expected: (usize, usize), got: (usize, usize) },
    #[error("non-finite return {value} for candidate {candidate} in CEM iteration {iteration}")]
    NonFiniteReturn { iteration: usize, candidate: usize, value: f64 },
    #[error("statistics need at least one trajectory")]
    NoTrajectories,
    #[error("trajectory {index} has components {found:?}, expected {expected:?}")]
    MismatchedComponents { index: usize, expected: Vec<String>, found: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub population: usize,
    pub elite_fraction: f64,
    pub iterations: usize,
    /// Episode cap; `None` uses the task horizon. Larger values are cut to it.
    pub horizon: Option<usize>,
    pub gamma: f64,
    pub seed: u64,
    /// Episodes per candidate; the seed set is fixed for the whole run.
    pub train_episodes: usize,
    /// Initial sampling standard deviation of every policy parameter.
    pub init_std: f64,
    /// Floor for the sampling standard deviation.
    pub min_std: f64,
    /// Exploration noise of the returned policy.
    pub noise: f64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            population: 64,
            elite_fraction: 0.125,
            iterations: 30,
            horizon: None,
            gamma: 0.99,
            seed: 0,
            train_episodes: 32,
            init_std: 1.0,
            min_std: 0.02,
            noise: 0.0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.population == 0 || self.iterations == 0 || self.train_episodes == 0 {
            return bad("population, iterations and train_episodes must be at least 1");
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction <= 1.0) {
            return bad("elite_fraction must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if self.horizon == Some(0) {
            return bad("horizon must be at least 1");
        }
        if !(self.init_std >= 0.0 && self.min_std >= 0.0 && self.noise >= 0.0)
            || !(self.init_std.is_finite() && self.min_std.is_finite() && self.noise.is_finite())
        {
            return bad("standard deviations and noise must be finite and non-negative");
        }
        Ok(())
    }

    pub fn n_elites(&self) -> usize {
        ((self.population as f64 * self.elite_fraction).ceil() as usize).clamp(1, self.population)
    }
}
