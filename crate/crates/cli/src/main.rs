//! `regot`: batch entry points for reward evolution runs.

use clap::{Parser, Subcommand};
use regot_core::dsl::{check_program, parse_program};
use regot_core::env::make_env;
use regot_core::evolution::{self, EvolutionConfig, EvolutionError, RunControl};
use regot_core::graph::{parse_graph, validate};
use regot_core::seeding::{self, label};
use regot_core::trainer::{collect_stats, rollout, Policy};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "regot", version, about = "Evolve reward programs with critic feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an evolution, or resume an interrupted one.
    Run {
        #[arg(long, required_unless_present = "resume")]
        config: Option<PathBuf>,
        /// Run directory to continue; its stored config is used.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// `section.key=value` override, applied in order.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Check a stage-graph JSON file against the structural rules.
    ValidateGraph { path: PathBuf },
    /// Score a reward program on random-policy rollouts.
    EvalReward {
        program: PathBuf,
        #[arg(long)]
        env: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the iteration table of a finished run.
    Report {
        dir: PathBuf,
        /// Also write per-iteration series files for plotting.
        #[arg(long)]
        plot_data: bool,
    },
}

/// Exit status with a message for standard error.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

fn from_evolution(e: EvolutionError) -> Failure {
    match e {
        EvolutionError::Config(_) | EvolutionError::VersionMismatch(_) => Failure::usage(e.to_string()),
        other => Failure::runtime(other.to_string()),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, resume, set } => cmd_run(config.as_deref(), resume.as_deref(), &set),
        Command::ValidateGraph { path } => cmd_validate_graph(&path),
        Command::EvalReward { program, env, n, seed } => cmd_eval_reward(&program, &env, n, seed),
        Command::Report { dir, plot_data } => cmd_report(&dir, plot_data),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn progress(total: usize) -> RunControl {
    RunControl {
        stop_after: None,
        on_iteration: Some(Box::new(move |rec| match &rec.metrics {
            Some(m) => println!(
                "iteration {}/{total}  success_rate {:.4}  mean_episode_length {:.2}",
                rec.index, m.success_rate, m.mean_episode_length
            ),
            None => println!("iteration {}/{total}  failed", rec.index),
        })),
    }
}

fn cmd_run(config: Option<&Path>, resume: Option<&Path>, set: &[String]) -> Result<(), Failure> {
    let report = if let Some(dir) = resume {
        if !set.is_empty() {
            return Err(Failure::usage("--set cannot change the config of a run being resumed"));
        }
        let stored = std::fs::read_to_string(dir.join("config.snapshot"))
            .map_err(|e| Failure::usage(format!("{}: {e}", dir.join("config.snapshot").display())))?;
        let stored = EvolutionConfig::from_toml(&stored).map_err(from_evolution)?;
        if let Some(path) = config {
            let given = EvolutionConfig::load(path, &[]).map_err(from_evolution)?;
            if given.snapshot() != stored.snapshot() {
                return Err(Failure::usage(format!(
                    "{} does not match the config stored in {}",
                    path.display(),
                    dir.display()
                )));
            }
        }
        evolution::resume(dir, progress(stored.iterations)).map_err(from_evolution)?
    } else {
        let path = config.expect("clap requires --config without --resume");
        let mut cfg = EvolutionConfig::load(path, set).map_err(|e| match e {
            EvolutionError::Io { path, message } => Failure::usage(format!("{}: {message}", path.display())),
            other => from_evolution(other),
        })?;
        let dir = match cfg.run_dir.take() {
            Some(d) => cfg.resolve(&d),
            None => {
                let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
                Path::new("runs").join(stem)
            }
        };
        let backends = evolution::Backends::from_config(&cfg, &evolution::RunDir::new(&dir)).map_err(from_evolution)?;
        evolution::run_evolution_with(&cfg, &dir, backends, progress(cfg.iterations)).map_err(from_evolution)?
    };
    match report.best() {
        Some(best) => {
            let m = best.metrics.expect("best iteration completed");
            println!("best iteration {}  success_rate {:.4}", best.index, m.success_rate);
        }
        None => println!("no completed iteration"),
    }
    Ok(())
}

fn cmd_validate_graph(path: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let graph = parse_graph(&text).map_err(|errors| {
        Failure::usage(errors.iter().map(|e| format!("{}: {e}", path.display())).collect::<Vec<_>>().join("\n"))
    })?;
    let violations = validate(&graph);
    if violations.is_empty() {
        println!("valid");
        return Ok(());
    }
    for v in &violations {
        println!("{v}");
    }
    Err(Failure::runtime(format!("{} violation(s)", violations.len())))
}

fn cmd_eval_reward(program: &Path, env_id: &str, n: usize, seed: u64) -> Result<(), Failure> {
    if n == 0 {
        return Err(Failure::usage("--n must be at least 1"));
    }
    let env = make_env(env_id).map_err(|e| Failure::usage(e.to_string()))?;
    let text = std::fs::read_to_string(program).map_err(|e| Failure::usage(format!("{}: {e}", program.display())))?;
    let parsed = parse_program(&text).map_err(|errors| {
        Failure::runtime(errors.iter().map(|e| format!("{}: {e}", program.display())).collect::<Vec<_>>().join("\n"))
    })?;
    let checked = check_program(&parsed, env.catalog()).map_err(|errors| {
        Failure::runtime(errors.iter().map(|e| format!("{}: {e}", program.display())).collect::<Vec<_>>().join("\n"))
    })?;
    let policy = Policy { noise: 1.0, ..Policy::zeros(env.as_ref()) };
    let task = env.task();
    let trajectories = (0..n as u64)
        .map(|i| {
            rollout(
                &policy,
                env.as_ref(),
                Some(&checked),
                task.seed_space.wrap(seeding::derive(seed, label::ROLLOUT, i)),
                task.horizon,
            )
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::runtime(e.to_string()))?;
    let stats = collect_stats(&trajectories).map_err(|e| Failure::runtime(e.to_string()))?;
    print!("{}", stats.render());
    let successes = trajectories.iter().filter(|t| t.success).count();
    let mean_len = trajectories.iter().map(|t| t.length).sum::<usize>() as f64 / n as f64;
    println!("success_rate {:.4} ({successes}/{n})", successes as f64 / n as f64);
    println!("mean_episode_length {mean_len:.2}");
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))
}

fn cmd_report(dir: &Path, plot_data: bool) -> Result<(), Failure> {
    let report = evolution::read_report(dir).map_err(|e| Failure::runtime(e.to_string()))?;
    print!("{}", report.render_table());
    let csv = dir.join("summary.csv");
    if !csv.exists() {
        write(&csv, &evolution::summary_csv(&report))?;
        println!("wrote {}", csv.display());
    }
    if plot_data {
        let series = |f: fn(&evolution::SummaryRow) -> f64, column: &str| {
            let mut out = format!("# iteration {column}\n");
            for r in &report.summary {
                out.push_str(&format!("{} {}\n", r.iteration, f(r)));
            }
            out
        };
        for (name, text) in [
            ("success_rate.dat", series(|r| r.success_rate, "success_rate")),
            ("episode_length.dat", series(|r| r.mean_episode_length, "mean_episode_length")),
        ] {
            let path = dir.join(name);
            write(&path, &text)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
