//! The iterate-train-evaluate-refine loop.
//!
//! A run builds the stage graph once, then for each iteration trains a policy
//! under the current reward program, records `k` rollout transcripts, asks the
//! evaluator for feedback and the refiner for the next program. Every
//! iteration is written to the run directory atomically before the next
//! critic call, so an interrupted run resumes where it stopped.
//!
//! Run directory layout:
//!
//! ```text
//! config.snapshot     TOML config as run (run_dir omitted)
//! run.json            format version, config checksum, base directory
//! task.json           task spec used by the run
//! setup.json          graph and initial-program call accounting
//! graph.json          stage graph wire form
//! graph.txt           prompt rendering of the graph
//! timing.json         wall-clock seconds per iteration (not part of the report)
//! iter_<i>/           program.reward, diff.txt, training_log.json, stats.json,
//!                     transcripts/rollout_<j>.json, feedback.json,
//!                     metrics.json, next_program.reward, record.json
//! report.json
//! summary.csv         iteration,success_rate,mean_episode_length
//! ```

mod run;
mod store;

pub use run::{resume, resume_with, run_evolution, run_evolution_with, Backends, IterationHook, RunControl};
pub use store::{read_report, summary_csv, RunDir, FORMAT_VERSION};

use crate::critics::{BackendConfig, CriticError, Feedback, PromptMode, RolloutTranscript, DEFAULT_MAX_REPAIR};
use crate::dsl::ProgramDiff;
use crate::env::{EnvError, TaskSpec};
use crate::trainer::{ComponentStats, TrainerConfig, TrainingLog};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: corrupt artifact: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("{0}")]
    VersionMismatch(String),
    #[error("graph construction failed: {0}")]
    Graph(CriticError),
    #[error("initial program generation failed: {0}")]
    InitialProgram(CriticError),
    #[error("run stopped after iteration {after} as requested")]
    Interrupted { after: usize },
    #[error("no iteration completed")]
    NoCompletedIterations,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticsConfig {
    pub graph_builder: BackendConfig,
    pub evaluator: BackendConfig,
    pub refiner: BackendConfig,
}

fn default_iterations() -> usize {
    8
}
fn default_rollouts() -> usize {
    5
}
fn default_eval_episodes() -> usize {
    100
}
fn default_max_repair() -> usize {
    DEFAULT_MAX_REPAIR
}

/// Everything a run depends on. `trainer.seed` is replaced per iteration by
/// a seed split from `seed`.
///
/// ```toml
/// env = "hinge1d"
/// iterations = 4
/// rollouts = 5
/// seed = 7
/// initial_program = """
/// component progress weight 0.05 := joint_value("lid") - 1.5708
/// """
///
/// [trainer]
/// population = 64
///
/// [critics.refiner]
/// kind = "scripted"
/// rules = "default"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub env: String,
    /// Task spec JSON; the environment's built-in task when absent. Relative
    /// paths resolve against the config file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<PathBuf>,
    /// Initial reward program text; generated by the refiner when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_program: Option<String>,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    /// Rollout transcripts shown to the evaluator per iteration.
    #[serde(default = "default_rollouts")]
    pub rollouts: usize,
    /// Noise-free episodes behind each iteration's success rate.
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub prompt_mode: PromptMode,
    #[serde(default = "default_max_repair")]
    pub max_repair: usize,
    #[serde(default)]
    pub trainer: TrainerConfig,
    #[serde(default)]
    pub critics: CriticsConfig,
    /// Where artifacts go. Not part of the snapshot, so a run can be moved.
    #[serde(default, skip_serializing)]
    pub run_dir: Option<PathBuf>,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl EvolutionConfig {
    pub fn new(env: &str) -> Self {
        Self {
            env: env.to_string(),
            task: None,
            initial_program: None,
            iterations: default_iterations(),
            rollouts: default_rollouts(),
            eval_episodes: default_eval_episodes(),
            seed: 0,
            prompt_mode: PromptMode::default(),
            max_repair: default_max_repair(),
            trainer: TrainerConfig::default(),
            critics: CriticsConfig::default(),
            run_dir: None,
            base_dir: PathBuf::from("."),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, EvolutionError> {
        let mut c: Self = toml::from_str(text).map_err(|e| EvolutionError::Config(e.to_string()))?;
        c.base_dir = PathBuf::from(".");
        Ok(c)
    }

    /// Reads a TOML config and applies `section.key=value` overrides in order.
    /// Values are parsed as TOML and fall back to plain strings.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, EvolutionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EvolutionError::Io { path: path.to_path_buf(), message: e.to_string() })?;
        let mut table: toml::Table =
            toml::from_str(&text).map_err(|e| EvolutionError::Config(format!("{}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut c: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| EvolutionError::Config(format!("{}: {e}", path.display())))?;
        c.base_dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf();
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), EvolutionError> {
        let bad = |m: String| Err(EvolutionError::Config(m));
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.rollouts == 0 {
            return bad("rollouts must be at least 1".into());
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be at least 1".into());
        }
        self.trainer.validate().map_err(|e| EvolutionError::Config(e.to_string()))?;
        for (role, b) in [
            ("graph_builder", &self.critics.graph_builder),
            ("evaluator", &self.critics.evaluator),
            ("refiner", &self.critics.refiner),
        ] {
            b.validate().map_err(|e| EvolutionError::Config(format!("critics.{role}: {e}")))?;
        }
        Ok(())
    }

    /// Snapshot text; stable for equal configs.
    pub fn snapshot(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Snapshot without the `[critics]` section.
    pub fn report_snapshot(&self) -> String {
        let mut table = toml::Table::try_from(self).expect("config serializes to TOML");
        table.remove("critics");
        toml::to_string(&table).expect("config serializes to TOML")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn load_task(&self) -> Result<Option<TaskSpec>, EvolutionError> {
        self.task.as_ref().map(|p| TaskSpec::load(&self.resolve(p)).map_err(EvolutionError::Config)).transpose()
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), EvolutionError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| EvolutionError::Config(format!("override `{spec}` is not of the form key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(EvolutionError::Config(format!("override key `{key}` is malformed")));
    }
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| EvolutionError::Config(format!("override `{key}`: `{p}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationMetrics {
    pub success_rate: f64,
    pub mean_episode_length: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum IterationStatus {
    Completed,
    Failed { reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CriticCalls {
    pub evaluator: usize,
    pub refiner: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub index: usize,
    pub status: IterationStatus,
    /// Program trained in this iteration.
    pub program: String,
    /// Change from the previous iteration's program (or the initial one).
    pub diff: ProgramDiff,
    pub training_log: Option<TrainingLog>,
    /// Pooled over the `k` rollouts.
    pub stats: Option<ComponentStats>,
    pub transcripts: Vec<RolloutTranscript>,
    pub feedback: Option<Feedback>,
    pub metrics: Option<IterationMetrics>,
    /// Program for the next iteration.
    pub next_program: String,
    pub no_change: bool,
    /// Critic problems that did not stop the iteration.
    pub notes: Vec<String>,
    pub critic_calls: CriticCalls,
}

impl IterationRecord {
    pub fn is_completed(&self) -> bool {
        self.status == IterationStatus::Completed && self.metrics.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub iteration: usize,
    pub success_rate: f64,
    pub mean_episode_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupRecord {
    pub graph_calls: usize,
    pub initial_program: String,
    /// Refiner calls spent generating the initial program.
    pub initial_program_calls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    /// Configuration as run, without the `[critics]` transport section, so a
    /// replayed session reports the same text as the recorded one.
    pub config: String,
    pub task: TaskSpec,
    /// Stage graph in its JSON wire form.
    pub graph: serde_json::Value,
    pub setup: SetupRecord,
    pub iterations: Vec<IterationRecord>,
    /// 1-based index of the best completed iteration.
    pub best_iteration: Option<usize>,
    pub summary: Vec<SummaryRow>,
}

impl RunReport {
    pub fn best(&self) -> Option<&IterationRecord> {
        self.best_iteration.and_then(|i| self.iterations.iter().find(|r| r.index == i))
    }

    /// Fixed-width iteration table.
    pub fn render_table(&self) -> String {
        let mut out = format!("{:>9}  {:>12}  {:>19}\n", "iteration", "success_rate", "mean_episode_length");
        for r in &self.iterations {
            let best = if Some(r.index) == self.best_iteration { "  *" } else { "" };
            match &r.metrics {
                Some(m) => out.push_str(&format!(
                    "{:>9}  {:>12.4}  {:>19.2}{best}\n",
                    r.index, m.success_rate, m.mean_episode_length
                )),
                None => out.push_str(&format!("{:>9}  {:>12}  {:>19}\n", r.index, "failed", "-")),
            }
        }
        out
    }
}

/// Best completed iteration (1-based): highest success rate, then shorter
/// mean episode length, then earlier index.
pub fn select_best(records: &[IterationRecord]) -> Result<usize, EvolutionError> {
    let mut best: Option<(usize, IterationMetrics)> = None;
    for r in records.iter().filter(|r| r.is_completed()) {
        let m = r.metrics.expect("completed records have metrics");
        let better = match best {
            None => true,
            Some((_, b)) => {
                m.success_rate > b.success_rate
                    || (m.success_rate == b.success_rate && m.mean_episode_length < b.mean_episode_length)
            }
        };
        if better {
            best = Some((r.index, m));
        }
    }
    best.map(|(i, _)| i).ok_or(EvolutionError::NoCompletedIterations)
}
