//! Reward evolution for reinforcement-learning agents.
//!
//! A language-model critic decomposes a task into a text-attributed stage
//! graph and rewrites a reward program written in a small checked expression
//! language. A rollout critic inspects transcripts of the trained agent and
//! feeds structured feedback into the next rewrite. The lower level trains a
//! policy under the current reward with the cross-entropy method.
//!
//! Module map:
//! - [`env`]: environment contract, API catalogs and the built-in toy tasks.
//! - [`graph`]: the stage graph, its parser, validator and path enumeration.
//! - [`dsl`]: reward-program language (parser, checker, interpreter, diff).
//! - [`trainer`]: policies, rollouts, CEM training, metrics and statistics.
//! - [`critics`]: prompt templates and the scripted/remote critic backends.
//! - [`evolution`]: the iterate-train-evaluate-refine loop with persistence.

pub mod critics;
pub mod dsl;
pub mod env;
pub mod evolution;
pub mod graph;
pub mod seeding;
pub mod trainer;

pub use critics::{CriticBackend, Feedback, ProblemTag, RolloutTranscript};
pub use dsl::{CheckedProgram, RewardBreakdown, RewardProgram};
pub use env::{EnvApiCatalog, EnvState, Environment, TaskSpec};
pub use evolution::{EvolutionConfig, IterationRecord, RunReport};
pub use graph::TaskGraph;
pub use trainer::{ComponentStats, Policy, TrainerConfig, TrainingLog, Trajectory};
