mod support;

use regot_core::critics::SessionStore;
use regot_core::evolution::{run_evolution_with, Backends, EvolutionConfig, EvolutionError, RunControl, RunDir};
use support::fake_llm::{recording_critics, FakeLlm};
use support::fixture;

fn fixture_config() -> EvolutionConfig {
    EvolutionConfig::load(&fixture("press_start_button/config.toml"), &[]).unwrap()
}

fn run(config: &EvolutionConfig, dir: &std::path::Path) -> Result<regot_core::RunReport, EvolutionError> {
    let backends = Backends::from_config(config, &RunDir::new(dir))?;
    run_evolution_with(config, dir, backends, RunControl::default())
}

/// Rewrites the committed session files from the local fake server.
#[test]
#[ignore = "rewrites fixtures/press_start_button/sessions"]
fn regenerate_start_button_sessions() {
    let sessions = fixture("press_start_button/sessions");
    let _ = std::fs::remove_dir_all(&sessions);
    let llm = FakeLlm::start();
    let mut config = fixture_config();
    config.critics = recording_critics(&llm.url, &sessions);
    let tmp = tempfile::tempdir().unwrap();
    run(&config, tmp.path()).unwrap();
    assert!(llm.hits() > 0);
}

#[test]
fn committed_session_replays_offline() {
    let tmp = tempfile::tempdir().unwrap();
    let report = run(&fixture_config(), tmp.path()).unwrap();
    assert_eq!(report.task.name, "press_start_button");
    assert_eq!(report.graph["n_stages"], 5);
    assert_eq!(report.setup.graph_calls, 2, "the first graph answer skips a stage and is repaired");
    assert_eq!(report.iterations.len(), 3);
    assert!(report.iterations.iter().all(|r| r.is_completed() && r.notes.is_empty()));
    let last = report.iterations.last().unwrap();
    assert!(last.program.contains("component press"));

    let graph_session = SessionStore::load(&fixture("press_start_button/sessions/graph_builder.json")).unwrap();
    assert_eq!(graph_session.exchanges.len(), 2);
    assert!(!tmp.path().join("critic_log.jsonl").exists());
}

#[test]
fn replay_refuses_requests_it_never_saw() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = fixture_config();
    config.seed += 1;
    match run(&config, tmp.path()) {
        Ok(report) => {
            let notes: Vec<&String> = report.iterations.iter().flat_map(|r| &r.notes).collect();
            assert!(notes.iter().any(|n| n.contains("not recorded") || n.contains("no recorded")), "{notes:?}");
        }
        Err(e) => panic!("graph and initial program do not depend on the seed, so the run starts: {e}"),
    }
}
