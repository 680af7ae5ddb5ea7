//! Critic boundary: prompt construction, interchangeable backends and output
//! parsing with bounded repair.
//!
//! Three roles talk to a backend. The graph builder decomposes the task into
//! a stage graph once per run; the evaluator reads rollout transcripts and
//! returns [`Feedback`]; the refiner rewrites the reward program. Every
//! answer is parsed and checked, and a rejected answer is sent back with the
//! verbatim error list at most `max_repair` times.
//!
//! Backends:
//! - [`ScriptedBackend`]: deterministic rule tables, for tests and offline runs.
//! - [`RemoteBackend`]: chat-completion HTTP client with bounded retries.
//! - [`RecordingBackend`] / [`ReplayBackend`]: capture a session to disk and
//!   play it back without network access.

mod feedback;
mod prompt;
mod remote;
mod replay;
mod scripted;
mod transcript;

pub use feedback::{Feedback, Problem, ProblemTag};
pub use prompt::{
    examples_block, PromptError, PromptMode, PromptTemplate, EVALUATE_TEMPLATE, GRAPH_TEMPLATE, REFINE_TEMPLATE,
    REPAIR_TEMPLATE,
};
pub use remote::{RemoteBackend, RemoteConfig, RetryPolicy, API_KEY_ENV};
pub use replay::{request_key, RecordedExchange, RecordingBackend, ReplayBackend, SessionStore};
pub use scripted::{RuleSet, ScriptedBackend};
pub use transcript::{RolloutTranscript, TranscriptRecord};

use crate::dsl::{check_program, diff_programs, parse_program, ProgramDiff, RewardProgram};
use crate::env::{EnvApiCatalog, TaskSpec};
use crate::graph::{parse_graph, render_prompt_block, validate, TaskGraph};
use crate::trainer::ComponentStats;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use thiserror::Error;

pub const DEFAULT_MAX_REPAIR: usize = 3;
/// Refiner reply that keeps the current program.
pub const NO_CHANGE: &str = "NO-CHANGE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    GraphBuilder,
    Evaluator,
    Refiner,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::GraphBuilder => "graph_builder",
            Role::Evaluator => "evaluator",
            Role::Refiner => "refiner",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: "assistant".into(), content: content.into() }
    }
}

/// One logical call. Remote backends send `messages`; the scripted backend
/// reads the structured `payload` the messages were rendered from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticRequest {
    pub role: Role,
    pub messages: Vec<Message>,
    pub payload: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("transport failed after {attempts} attempts: {message}")]
    Transport { attempts: usize, message: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    Response(String),
    #[error("no recorded response for {role} request {key} (exchange {index})")]
    NotRecorded { role: Role, key: String, index: usize },
    #[error("session store: {0}")]
    Store(String),
    #[error("backend config: {0}")]
    Config(String),
}

/// Synchronous request/response contract shared by every backend.
pub trait CriticBackend: Send {
    fn complete(&mut self, request: &CriticRequest) -> Result<String, BackendError>;
}

impl<B: CriticBackend + ?Sized> CriticBackend for Box<B> {
    fn complete(&mut self, request: &CriticRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

/// Wraps a backend and counts calls into a shared counter.
pub struct CountingBackend<B> {
    inner: B,
    calls: Arc<AtomicUsize>,
}

impl<B: CriticBackend> CountingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self { inner, calls: Arc::new(AtomicUsize::new(0)) }
    }

    pub fn counter(&self) -> Arc<AtomicUsize> {
        Arc::clone(&self.calls)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<B: CriticBackend> CriticBackend for CountingBackend<B> {
    fn complete(&mut self, request: &CriticRequest) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(request)
    }
}

/// How to build a backend for one role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Scripted {
        #[serde(default)]
        rules: RuleSet,
    },
    Remote {
        #[serde(flatten)]
        remote: RemoteConfig,
        /// Store every exchange in this session file.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        record: Option<PathBuf>,
    },
    /// Offline playback of a recorded session.
    Replay { session: PathBuf },
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Scripted { rules: RuleSet::Default }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            BackendConfig::Remote { remote, .. } => remote.validate(),
            _ => Ok(()),
        }
    }

    /// Builds the backend. Relative session paths resolve against `base`;
    /// remote request logs go to `log_path` when given.
    pub fn build(&self, base: &Path, log_path: Option<PathBuf>) -> Result<Box<dyn CriticBackend>, BackendError> {
        let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        Ok(match self {
            BackendConfig::Scripted { rules } => Box::new(ScriptedBackend::new(*rules)),
            BackendConfig::Remote { remote, record } => {
                let client = RemoteBackend::new(remote.clone(), log_path).map_err(BackendError::Config)?;
                match record {
                    Some(path) => Box::new(RecordingBackend::create(client, resolve(path))?),
                    None => Box::new(client),
                }
            }
            BackendConfig::Replay { session } => Box::new(ReplayBackend::open(&resolve(session))?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CriticOptions {
    pub mode: PromptMode,
    pub max_repair: usize,
}

impl Default for CriticOptions {
    fn default() -> Self {
        Self { mode: PromptMode::FewShot, max_repair: DEFAULT_MAX_REPAIR }
    }
}

/// A rejected answer and the reasons it was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub output: String,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriticError {
    #[error("{role} backend failed: {source}")]
    Backend { role: Role, source: BackendError },
    #[error("{role} output still invalid after {} attempts; last errors: {}", .attempts.len(), last_errors(.attempts))]
    Irreparable { role: Role, attempts: Vec<Attempt> },
    #[error("repair budget exhausted: attempt {attempt} exceeds max_repair {max_repair}")]
    BudgetExhausted { attempt: usize, max_repair: usize },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("invalid critic input: {0}")]
    Input(String),
}

fn last_errors(attempts: &[Attempt]) -> String {
    attempts.last().map(|a| a.errors.join("; ")).unwrap_or_default()
}

/// Accepted answer with its call accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct Answer<T> {
    pub value: T,
    /// Backend calls issued, repairs included.
    pub calls: usize,
    /// Rejected answers that preceded the accepted one.
    pub rejected: Vec<Attempt>,
}

/// Removes a surrounding Markdown code fence, if any.
pub fn strip_code_fence(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else { return t };
    let body = match rest.find('\n') {
        Some(i) => &rest[i + 1..],
        None => rest,
    };
    body.trim_end().strip_suffix("```").unwrap_or(body).trim()
}

/// Builds the follow-up request for a rejected answer: the original
/// conversation, the rejected answer, and the verbatim errors.
pub fn repair_request(
    original: &CriticRequest,
    prior_output: &str,
    errors: &[String],
    attempt: usize,
    max_repair: usize,
) -> Result<CriticRequest, CriticError> {
    if attempt == 0 || attempt > max_repair {
        return Err(CriticError::BudgetExhausted { attempt, max_repair });
    }
    let vars = BTreeMap::from([
        ("attempt", attempt.to_string()),
        ("max_attempts", max_repair.to_string()),
        ("errors", errors.iter().map(|e| format!("- {e}\n")).collect::<String>()),
    ]);
    let follow_up = REPAIR_TEMPLATE.render(&vars)?.pop().expect("repair template has a user message");
    let mut messages = original.messages.clone();
    messages.push(Message::assistant(prior_output));
    messages.push(follow_up);
    let mut payload = original.payload.clone();
    if let Value::Object(map) = &mut payload {
        map.insert(
            "repair".into(),
            serde_json::json!({ "attempt": attempt, "errors": errors, "prior_output": prior_output }),
        );
    }
    Ok(CriticRequest { role: original.role, messages, payload })
}

/// Issues one repair call.
pub fn repair(
    backend: &mut dyn CriticBackend,
    original: &CriticRequest,
    prior_output: &str,
    errors: &[String],
    attempt: usize,
    max_repair: usize,
) -> Result<String, CriticError> {
    let request = repair_request(original, prior_output, errors, attempt, max_repair)?;
    backend.complete(&request).map_err(|source| CriticError::Backend { role: original.role, source })
}

/// Sends `request` and re-asks with the error list until `accept` succeeds or
/// the repair budget runs out, issuing at most `1 + max_repair` calls.
pub fn ask<T>(
    backend: &mut dyn CriticBackend,
    request: &CriticRequest,
    max_repair: usize,
    mut accept: impl FnMut(&str) -> Result<T, Vec<String>>,
) -> Result<Answer<T>, CriticError> {
    let role = request.role;
    let mut output = backend.complete(request).map_err(|source| CriticError::Backend { role, source })?;
    let mut rejected = Vec::new();
    loop {
        match accept(&output) {
            Ok(value) => return Ok(Answer { value, calls: rejected.len() + 1, rejected }),
            Err(errors) => {
                tracing::debug!(%role, attempt = rejected.len() + 1, ?errors, "critic output rejected");
                let attempt = rejected.len() + 1;
                let next = if attempt <= max_repair {
                    Some(repair(backend, request, &output, &errors, attempt, max_repair)?)
                } else {
                    None
                };
                rejected.push(Attempt { output, errors });
                match next {
                    Some(o) => output = o,
                    None => return Err(CriticError::Irreparable { role, attempts: rejected }),
                }
            }
        }
    }
}

fn task_vars(task: &TaskSpec) -> BTreeMap<&'static str, String> {
    BTreeMap::from([
        ("task_name", task.name.clone()),
        ("task_description", task.goal_description.clone()),
        ("substeps", task.render_substeps()),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct GraphPayload {
    pub task: TaskSpec,
    pub catalog: EnvApiCatalog,
    pub mode: PromptMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct EvaluatePayload {
    pub task: TaskSpec,
    pub transcripts: Vec<RolloutTranscript>,
    pub stats: ComponentStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct RefinePayload {
    pub task: TaskSpec,
    pub graph: String,
    pub program: String,
    pub feedback: Feedback,
    pub stats: ComponentStats,
    pub catalog: EnvApiCatalog,
}

fn payload<T: Serialize>(p: &T) -> Value {
    serde_json::to_value(p).expect("critic payloads serialize")
}

pub fn graph_request(task: &TaskSpec, catalog: &EnvApiCatalog, mode: PromptMode) -> Result<CriticRequest, CriticError> {
    let mut vars = task_vars(task);
    vars.insert("api_catalog", catalog.render());
    vars.insert("examples", examples_block(mode));
    Ok(CriticRequest {
        role: Role::GraphBuilder,
        messages: GRAPH_TEMPLATE.render(&vars)?,
        payload: payload(&GraphPayload { task: task.clone(), catalog: catalog.clone(), mode }),
    })
}

fn check_graph(text: &str) -> Result<TaskGraph, Vec<String>> {
    let g =
        parse_graph(strip_code_fence(text)).map_err(|errs| errs.iter().map(|e| e.to_string()).collect::<Vec<_>>())?;
    let violations = validate(&g);
    if violations.is_empty() {
        Ok(g)
    } else {
        Err(violations.iter().map(|v| v.to_string()).collect())
    }
}

/// Asks the graph builder for the task's stage graph. The answer must parse
/// and pass every validation rule.
pub fn construct_graph(
    backend: &mut dyn CriticBackend,
    task: &TaskSpec,
    catalog: &EnvApiCatalog,
    options: CriticOptions,
) -> Result<Answer<TaskGraph>, CriticError> {
    let request = graph_request(task, catalog, options.mode)?;
    ask(backend, &request, options.max_repair, check_graph)
}

pub fn evaluate_request(
    task: &TaskSpec,
    transcripts: &[RolloutTranscript],
    stats: &ComponentStats,
) -> Result<CriticRequest, CriticError> {
    if transcripts.is_empty() {
        return Err(CriticError::Input("evaluation needs at least one transcript".into()));
    }
    let mut vars = task_vars(task);
    vars.insert("stats", stats.render());
    vars.insert("transcripts", transcripts.iter().map(RolloutTranscript::render).collect::<Vec<_>>().join("\n"));
    Ok(CriticRequest {
        role: Role::Evaluator,
        messages: EVALUATE_TEMPLATE.render(&vars)?,
        payload: payload(&EvaluatePayload {
            task: task.clone(),
            transcripts: transcripts.to_vec(),
            stats: stats.clone(),
        }),
    })
}

/// Asks the evaluator to judge the rollouts.
pub fn evaluate_rollouts(
    backend: &mut dyn CriticBackend,
    task: &TaskSpec,
    transcripts: &[RolloutTranscript],
    stats: &ComponentStats,
    options: CriticOptions,
) -> Result<Answer<Feedback>, CriticError> {
    let request = evaluate_request(task, transcripts, stats)?;
    ask(backend, &request, options.max_repair, |text| Feedback::parse(strip_code_fence(text)))
}

/// Outcome of a refinement round.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    /// Checked against the catalog.
    pub program: RewardProgram,
    pub diff: ProgramDiff,
    /// The refiner explicitly kept the input program.
    pub no_change: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn refine_request(
    task: &TaskSpec,
    graph: &TaskGraph,
    program: &RewardProgram,
    feedback: &Feedback,
    stats: &ComponentStats,
    catalog: &EnvApiCatalog,
) -> Result<CriticRequest, CriticError> {
    let mut vars = task_vars(task);
    let current = if program.components.is_empty() { "(empty)\n".to_string() } else { program.to_string() };
    vars.insert("graph_block", render_prompt_block(graph));
    vars.insert("api_catalog", catalog.render());
    vars.insert("current_program", current.clone());
    vars.insert("stats", stats.render());
    vars.insert("feedback", feedback.render());
    Ok(CriticRequest {
        role: Role::Refiner,
        messages: REFINE_TEMPLATE.render(&vars)?,
        payload: payload(&RefinePayload {
            task: task.clone(),
            graph: graph.to_json(),
            program: program.to_string(),
            feedback: feedback.clone(),
            stats: stats.clone(),
            catalog: catalog.clone(),
        }),
    })
}

fn check_refinement(text: &str, current: &RewardProgram, catalog: &EnvApiCatalog) -> Result<Refinement, Vec<String>> {
    let body = strip_code_fence(text);
    if body == NO_CHANGE {
        if current.components.is_empty() {
            return Err(vec!["the current program is empty; reply with a complete program".into()]);
        }
        return Ok(Refinement { program: current.clone(), diff: diff_programs(current, current), no_change: true });
    }
    let program = parse_program(body).map_err(|errs| errs.iter().map(|e| e.to_string()).collect::<Vec<_>>())?;
    check_program(&program, catalog).map_err(|errs| errs.iter().map(|e| e.to_string()).collect::<Vec<_>>())?;
    let diff = diff_programs(current, &program);
    if diff.is_unchanged() {
        return Err(vec![format!("the program is identical to the current one; reply {NO_CHANGE} to keep it")]);
    }
    Ok(Refinement { program, diff, no_change: false })
}

/// Asks the refiner for a new reward program. The answer must parse and
/// check against `catalog`, and must either differ from `program` or be the
/// explicit no-change marker.
#[allow(clippy::too_many_arguments)]
pub fn refine_reward(
    backend: &mut dyn CriticBackend,
    task: &TaskSpec,
    graph: &TaskGraph,
    program: &RewardProgram,
    feedback: &Feedback,
    stats: &ComponentStats,
    catalog: &EnvApiCatalog,
    options: CriticOptions,
) -> Result<Answer<Refinement>, CriticError> {
    let request = refine_request(task, graph, program, feedback, stats, catalog)?;
    ask(backend, &request, options.max_repair, |text| check_refinement(text, program, catalog))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Environment, Hinge1d};

    struct Canned(Vec<&'static str>, usize);

    impl CriticBackend for Canned {
        fn complete(&mut self, _: &CriticRequest) -> Result<String, BackendError> {
            let out = self.0[self.1.min(self.0.len() - 1)];
            self.1 += 1;
            Ok(out.to_string())
        }
    }

    #[test]
    fn code_fences_are_stripped() {
        assert_eq!(strip_code_fence("```json\n{\"a\": 1}\n```"), "{\"a\": 1}");
        assert_eq!(strip_code_fence("  NO-CHANGE \n"), "NO-CHANGE");
        assert_eq!(strip_code_fence("```\nx\n```\n"), "x");
    }

    #[test]
    fn repair_budget_is_enforced() {
        let env = Hinge1d::new();
        let req = graph_request(env.task(), env.catalog(), PromptMode::ZeroShot).unwrap();
        assert!(matches!(
            repair_request(&req, "x", &[], 4, 3),
            Err(CriticError::BudgetExhausted { attempt: 4, max_repair: 3 })
        ));
        let r = repair_request(&req, "bad", &["R3 at e: skip".into()], 1, 3).unwrap();
        assert_eq!(r.messages.len(), req.messages.len() + 2);
        assert!(r.messages.last().unwrap().content.contains("R3 at e: skip"));
        assert_eq!(r.payload["repair"]["attempt"], 1);
    }

    #[test]
    fn ask_counts_calls() {
        let env = Hinge1d::new();
        let req = graph_request(env.task(), env.catalog(), PromptMode::ZeroShot).unwrap();
        let mut b = Canned(vec!["nope", "nope", "ok"], 0);
        let a = ask(&mut b, &req, 3, |t| if t == "ok" { Ok(()) } else { Err(vec!["bad".into()]) }).unwrap();
        assert_eq!((a.calls, a.rejected.len()), (3, 2));

        let mut b = Canned(vec!["nope"], 0);
        match ask(&mut b, &req, 2, |_| Err::<(), _>(vec!["bad".into()])) {
            Err(CriticError::Irreparable { attempts, .. }) => assert_eq!(attempts.len(), 3),
            other => panic!("{other:?}"),
        }
        assert_eq!(b.1, 3);
    }

    #[test]
    fn refiner_must_change_or_say_so() {
        let env = Hinge1d::new();
        let p = parse_program("component progress weight 1 := joint_value(\"lid\")").unwrap();
        let cat = env.catalog();
        assert!(check_refinement(&p.to_string(), &p, cat).unwrap_err()[0].contains(NO_CHANGE));
        assert!(check_refinement("NO-CHANGE", &p, cat).unwrap().no_change);
        assert!(check_refinement("NO-CHANGE", &RewardProgram::empty(), cat).is_err());
        let errs = check_refinement("component x weight 1 := door_angle()", &p, cat).unwrap_err();
        assert!(errs[0].contains("door_angle"));
        let r = check_refinement("component progress weight 2 := joint_value(\"lid\")", &p, cat).unwrap();
        assert_eq!(r.diff.reweighted().count(), 1);
    }
}
