//! Benchmark fixtures shared by the criterion targets.

use regot_core::dsl::{check_program, parse_program};
use regot_core::env::make_env;
use regot_core::graph::{edge, node, status, TaskGraph};
use regot_core::{CheckedProgram, Environment};

/// Three-component shaped reward for reach2d.
pub const REACH_PROGRAM: &str = r#"component reach weight 1 := 0 - distance(ee_position(), object_position("target"))
component near weight 0.5 := distance(ee_position(), object_position("target")) < 0.05
component effort weight 0.01 := 0 - (abs(action(0)) + abs(action(1)))
"#;

pub fn reach_setup() -> (Box<dyn Environment>, CheckedProgram) {
    let env = make_env("reach2d").expect("reach2d is built in");
    let program = parse_program(REACH_PROGRAM).expect("bench program parses");
    let checked = check_program(&program, env.catalog()).expect("bench program checks");
    (env, checked)
}

/// Layered graph with `width` nodes per stage, fully connected between
/// adjacent stages.
pub fn layered_graph(n_stages: usize, width: usize) -> TaskGraph {
    let id = |s: usize, k: usize| format!("s{s}_{k}");
    let mut nodes = vec![node(&id(0, 0), 0, status("robot idle", "object resting", "scene static"))];
    let mut edges = Vec::new();
    for s in 1..n_stages {
        let prev = if s == 1 { 1 } else { width };
        for k in 0..width {
            nodes.push(node(&id(s, k), s, status("robot moving", "object moving", "scene changing")));
            for j in 0..prev {
                edges.push(edge(&id(s - 1, j), &id(s, k), "advance"));
            }
        }
    }
    TaskGraph::from_parts("bench", n_stages, nodes, edges)
}
