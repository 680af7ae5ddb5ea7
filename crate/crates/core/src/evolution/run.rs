use super::store::{json_text, sha256_hex, Manifest};
use super::{
    select_best, summary_csv, CriticCalls, EvolutionConfig, EvolutionError, IterationMetrics, IterationRecord,
    IterationStatus, RunDir, RunReport, SetupRecord, SummaryRow, FORMAT_VERSION,
};
use crate::critics::{
    construct_graph, evaluate_rollouts, refine_reward, CriticBackend, CriticOptions, Feedback, RolloutTranscript,
};
use crate::dsl::{check_program, diff_programs, parse_program, RewardProgram};
use crate::env::{make_env, make_env_with_task, Environment, TaskSpec};
use crate::graph::{parse_graph, render_prompt_block, TaskGraph};
use crate::seeding::{self, label};
use crate::trainer::{collect_stats, evaluate_policy, rollout, train, ComponentStats, TrainerConfig};
use std::path::Path;
use std::time::Instant;

/// One backend per critic role.
pub struct Backends {
    pub graph_builder: Box<dyn CriticBackend>,
    pub evaluator: Box<dyn CriticBackend>,
    pub refiner: Box<dyn CriticBackend>,
}

impl Backends {
    /// Builds the configured backends; remote request logs go to
    /// `critic_log.jsonl` in the run directory.
    pub fn from_config(config: &EvolutionConfig, run: &RunDir) -> Result<Self, EvolutionError> {
        let log = Some(run.path("critic_log.jsonl"));
        let build = |b: &crate::critics::BackendConfig| {
            b.build(&config.base_dir, log.clone()).map_err(|e| EvolutionError::Config(e.to_string()))
        };
        Ok(Self {
            graph_builder: build(&config.critics.graph_builder)?,
            evaluator: build(&config.critics.evaluator)?,
            refiner: build(&config.critics.refiner)?,
        })
    }
}

/// Observer invoked after each iteration is persisted.
pub type IterationHook = Box<dyn FnMut(&IterationRecord)>;

/// Hooks into a running loop.
#[derive(Default)]
pub struct RunControl {
    /// Stop with [`EvolutionError::Interrupted`] once this iteration is on
    /// disk (fault injection for crash-safety tests).
    pub stop_after: Option<usize>,
    /// Called after each iteration is persisted.
    pub on_iteration: Option<IterationHook>,
}

struct Context<'a> {
    config: &'a EvolutionConfig,
    env: Box<dyn Environment>,
    graph: TaskGraph,
    run: RunDir,
    backends: Backends,
}

fn options(config: &EvolutionConfig) -> CriticOptions {
    CriticOptions { mode: config.prompt_mode, max_repair: config.max_repair }
}

fn build_env(config: &EvolutionConfig, task: Option<TaskSpec>) -> Result<Box<dyn Environment>, EvolutionError> {
    Ok(match task {
        Some(t) => make_env_with_task(&config.env, t)?,
        None => make_env(&config.env)?,
    })
}

/// Runs a fresh evolution in `config.run_dir` with the configured backends.
pub fn run_evolution(config: &EvolutionConfig) -> Result<RunReport, EvolutionError> {
    let dir = config.run_dir.clone().ok_or_else(|| EvolutionError::Config("run_dir is not set".into()))?;
    let dir = config.resolve(&dir);
    let backends = Backends::from_config(config, &RunDir::new(&dir))?;
    run_evolution_with(config, &dir, backends, RunControl::default())
}

/// Runs a fresh evolution in `dir` with explicit backends.
pub fn run_evolution_with(
    config: &EvolutionConfig,
    dir: &Path,
    backends: Backends,
    control: RunControl,
) -> Result<RunReport, EvolutionError> {
    config.validate()?;
    let run = RunDir::new(dir);
    if run.exists("run.json") {
        return Err(EvolutionError::Config(format!(
            "{} already holds a run; resume it or choose another run_dir",
            dir.display()
        )));
    }
    let env = build_env(config, config.load_task()?)?;
    let initial = match &config.initial_program {
        Some(text) => {
            let p = parse_program(text).map_err(|e| {
                EvolutionError::Config(format!(
                    "initial_program: {}",
                    e.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
                ))
            })?;
            check_program(&p, env.catalog()).map_err(|e| {
                EvolutionError::Config(format!(
                    "initial_program: {}",
                    e.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
                ))
            })?;
            Some(p)
        }
        None => None,
    };

    run.create()?;
    let snapshot = config.snapshot();
    let base_dir = std::path::absolute(&config.base_dir).unwrap_or_else(|_| config.base_dir.clone());
    run.write_text("config.snapshot", &snapshot)?;
    run.write_text("task.json", &(env.task().to_json() + "\n"))?;
    run.write_json(
        "run.json",
        &Manifest { format_version: FORMAT_VERSION, config_sha256: sha256_hex(snapshot.as_bytes()), base_dir },
    )?;
    let placeholder = TaskGraph::from_parts(env.task().name.clone(), 0, vec![], vec![]);
    let mut ctx = Context { config, env, graph: placeholder, run, backends };
    setup(&mut ctx, initial)?;
    drive(&mut ctx, control)
}

/// Builds the graph and initial program and persists them.
fn setup(ctx: &mut Context<'_>, initial: Option<RewardProgram>) -> Result<(), EvolutionError> {
    let opts = options(ctx.config);
    let task = ctx.env.task().clone();
    let graph = construct_graph(ctx.backends.graph_builder.as_mut(), &task, ctx.env.catalog(), opts)
        .map_err(EvolutionError::Graph)?;
    ctx.graph = graph.value;
    let (program, initial_calls) = match initial {
        Some(p) => (p, 0),
        None => {
            let answer = refine_reward(
                ctx.backends.refiner.as_mut(),
                &task,
                &ctx.graph,
                &RewardProgram::empty(),
                &Feedback::initial(),
                &ComponentStats::default(),
                ctx.env.catalog(),
                opts,
            )
            .map_err(EvolutionError::InitialProgram)?;
            (answer.value.program, answer.calls)
        }
    };
    ctx.run.write_text("graph.json", &(ctx.graph.to_json() + "\n"))?;
    ctx.run.write_text("graph.txt", &render_prompt_block(&ctx.graph))?;
    ctx.run.write_json(
        "setup.json",
        &SetupRecord {
            graph_calls: graph.calls,
            initial_program: program.to_string(),
            initial_program_calls: initial_calls,
        },
    )
}

/// Continues the run in `dir` from its first missing iteration using the
/// configured backends. A finished run returns its report without building
/// any backend.
pub fn resume(dir: &Path, control: RunControl) -> Result<RunReport, EvolutionError> {
    resume_with(dir, Backends::from_config, control)
}

pub fn resume_with(
    dir: &Path,
    backends: impl FnOnce(&EvolutionConfig, &RunDir) -> Result<Backends, EvolutionError>,
    control: RunControl,
) -> Result<RunReport, EvolutionError> {
    let run = RunDir::new(dir);
    let manifest: Manifest = run.read_json("run.json")?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(EvolutionError::VersionMismatch(format!(
            "{}: run format {} (expected {FORMAT_VERSION})",
            dir.display(),
            manifest.format_version
        )));
    }
    let snapshot = run.read_text("config.snapshot")?;
    if sha256_hex(snapshot.as_bytes()) != manifest.config_sha256 {
        return Err(EvolutionError::VersionMismatch(format!(
            "{}: config.snapshot does not match the checksum recorded when the run started",
            dir.display()
        )));
    }
    let mut config = EvolutionConfig::from_toml(&snapshot)?;
    config.base_dir = manifest.base_dir.clone();
    config.run_dir = Some(dir.to_path_buf());

    if run.completed_iterations().len() >= config.iterations && run.exists("report.json") {
        return super::read_report(dir);
    }
    let task = TaskSpec::from_json(&run.read_text("task.json")?)
        .map_err(|message| EvolutionError::Corrupt { path: run.path("task.json"), message })?;
    let env = build_env(&config, Some(task))?;
    let backends = backends(&config, &run)?;
    let placeholder = TaskGraph::from_parts(env.task().name.clone(), 0, vec![], vec![]);
    let mut ctx = Context { config: &config, env, graph: placeholder, run, backends };
    if ctx.run.exists("setup.json") && ctx.run.exists("graph.json") {
        let text = ctx.run.read_text("graph.json")?;
        ctx.graph = parse_graph(&text).map_err(|e| EvolutionError::Corrupt {
            path: ctx.run.path("graph.json"),
            message: e.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; "),
        })?;
    } else {
        let initial = config
            .initial_program
            .as_deref()
            .map(parse_program)
            .transpose()
            .map_err(|e| EvolutionError::Config(format!("initial_program: {e:?}")))?;
        setup(&mut ctx, initial)?;
    }
    drive(&mut ctx, control)
}

fn parse_stored(text: &str, what: &str) -> Result<RewardProgram, EvolutionError> {
    parse_program(text).map_err(|e| EvolutionError::Corrupt {
        path: what.into(),
        message: e.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; "),
    })
}

fn drive(ctx: &mut Context<'_>, mut control: RunControl) -> Result<RunReport, EvolutionError> {
    let setup: SetupRecord = ctx.run.read_json("setup.json")?;
    let done = ctx.run.completed_iterations();
    let mut previous = RewardProgram::empty();
    let mut current = parse_stored(&setup.initial_program, "setup.json")?;
    let mut last_good = current.clone();
    for &i in done.iter().take(ctx.config.iterations) {
        let rec = ctx.run.load_iteration(i)?;
        previous = parse_stored(&rec.program, "record.json")?;
        current = parse_stored(&rec.next_program, "record.json")?;
        if rec.is_completed() {
            last_good = previous.clone();
        }
    }
    for i in done.len() + 1..=ctx.config.iterations {
        let started = Instant::now();
        let rec = iteration(ctx, i, &previous, &current, &last_good);
        ctx.run.write_iteration(&rec)?;
        ctx.run.record_timing(i, started.elapsed().as_secs_f64())?;
        match &rec.metrics {
            Some(m) => tracing::info!(iteration = i, success_rate = m.success_rate, "iteration complete"),
            None => tracing::warn!(iteration = i, "iteration failed"),
        }
        if let Some(f) = control.on_iteration.as_mut() {
            f(&rec);
        }
        previous = current;
        current = parse_stored(&rec.next_program, "record.json")?;
        if rec.is_completed() {
            last_good = previous.clone();
        }
        if control.stop_after == Some(i) && i < ctx.config.iterations {
            return Err(EvolutionError::Interrupted { after: i });
        }
    }
    finish(ctx, setup)
}

fn finish(ctx: &Context<'_>, setup: SetupRecord) -> Result<RunReport, EvolutionError> {
    let iterations = (1..=ctx.config.iterations).map(|i| ctx.run.load_iteration(i)).collect::<Result<Vec<_>, _>>()?;
    let best = select_best(&iterations).ok();
    let summary = iterations
        .iter()
        .filter(|r| r.is_completed())
        .map(|r| {
            let m = r.metrics.expect("completed");
            SummaryRow { iteration: r.index, success_rate: m.success_rate, mean_episode_length: m.mean_episode_length }
        })
        .collect();
    let graph: serde_json::Value = serde_json::from_str(&ctx.graph.to_json()).expect("graph JSON is valid");
    let report = RunReport {
        format_version: FORMAT_VERSION,
        config: ctx.config.report_snapshot(),
        task: ctx.env.task().clone(),
        graph,
        setup,
        iterations,
        best_iteration: best,
        summary,
    };
    ctx.run.write_text("report.json", &json_text(&report))?;
    ctx.run.write_text("summary.csv", &summary_csv(&report))?;
    if best.is_none() {
        return Err(EvolutionError::NoCompletedIterations);
    }
    Ok(report)
}

/// First seed of a block of `n` consecutive admissible seeds.
fn seed_block(task: &TaskSpec, raw: u64, n: usize) -> u64 {
    let space = task.seed_space;
    let span = (space.end - space.start).saturating_add(1);
    let n = n as u64;
    if span <= n {
        space.start
    } else {
        space.start + raw % (span - n + 1)
    }
}

fn failed(
    index: usize,
    program: &RewardProgram,
    previous: &RewardProgram,
    last_good: &RewardProgram,
    reason: String,
) -> IterationRecord {
    IterationRecord {
        index,
        status: IterationStatus::Failed { reason },
        program: program.to_string(),
        diff: diff_programs(previous, program),
        training_log: None,
        stats: None,
        transcripts: vec![],
        feedback: None,
        metrics: None,
        next_program: last_good.to_string(),
        no_change: false,
        notes: vec![],
        critic_calls: CriticCalls::default(),
    }
}

fn iteration(
    ctx: &mut Context<'_>,
    index: usize,
    previous: &RewardProgram,
    program: &RewardProgram,
    last_good: &RewardProgram,
) -> IterationRecord {
    let config = ctx.config;
    let env = ctx.env.as_ref();
    let task = env.task().clone();
    let checked = match check_program(program, env.catalog()) {
        Ok(c) => c,
        Err(errs) => {
            let reason = errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ");
            return failed(index, program, previous, last_good, format!("program does not check: {reason}"));
        }
    };
    let trainer =
        TrainerConfig { seed: seeding::derive(config.seed, label::ITERATION, index as u64), ..config.trainer.clone() };
    let (policy, log) = match train(env, &checked, &trainer) {
        Ok(x) => x,
        Err(e) => return failed(index, program, previous, last_good, format!("training failed: {e}")),
    };
    let eval_base = seed_block(&task, seeding::derive(config.seed, label::EVAL, 0), config.eval_episodes);
    let metrics = match evaluate_policy(&policy, env, config.eval_episodes, eval_base) {
        Ok(m) => IterationMetrics { success_rate: m.success_rate, mean_episode_length: m.mean_episode_length },
        Err(e) => return failed(index, program, previous, last_good, format!("evaluation failed: {e}")),
    };
    let k = config.rollouts as u64;
    let trajectories = (0..k)
        .map(|j| {
            let seed = task.seed_space.wrap(seeding::derive(config.seed, label::ROLLOUT, (index as u64 - 1) * k + j));
            rollout(&policy, env, Some(&checked), seed, task.horizon)
        })
        .collect::<Result<Vec<_>, _>>();
    let trajectories = match trajectories {
        Ok(t) => t,
        Err(e) => return failed(index, program, previous, last_good, format!("rollout failed: {e}")),
    };
    let stats = match collect_stats(&trajectories) {
        Ok(s) => s,
        Err(e) => return failed(index, program, previous, last_good, format!("statistics failed: {e}")),
    };
    let transcripts: Vec<RolloutTranscript> =
        trajectories.iter().map(|t| RolloutTranscript::from_trajectory(&task.name, t, &stats)).collect();

    let opts = options(config);
    let mut notes = Vec::new();
    let mut calls = CriticCalls::default();
    let mut next = program.clone();
    let mut no_change = false;
    let feedback = match evaluate_rollouts(ctx.backends.evaluator.as_mut(), &task, &transcripts, &stats, opts) {
        Ok(a) => {
            calls.evaluator = a.calls;
            Some(a.value)
        }
        Err(e) => {
            calls.evaluator = config.max_repair + 1;
            notes.push(format!("evaluation critic failed, keeping the program: {e}"));
            None
        }
    };
    if let Some(fb) = &feedback {
        match refine_reward(ctx.backends.refiner.as_mut(), &task, &ctx.graph, program, fb, &stats, env.catalog(), opts)
        {
            Ok(a) => {
                calls.refiner = a.calls;
                no_change = a.value.no_change;
                next = a.value.program;
            }
            Err(e) => {
                calls.refiner = config.max_repair + 1;
                notes.push(format!("refinement failed, keeping the program: {e}"));
            }
        }
    }
    IterationRecord {
        index,
        status: IterationStatus::Completed,
        program: program.to_string(),
        diff: diff_programs(previous, program),
        training_log: Some(log),
        stats: Some(stats),
        transcripts,
        feedback,
        metrics: Some(metrics),
        next_program: next.to_string(),
        no_change,
        notes,
        critic_calls: calls,
    }
}
