//! Random stage graphs, single-rule fault injection and a brute-force path
//! enumerator.

use rand::Rng;
use regot_core::graph::{edge, node, status, BehaviorEdge, Rule, StageNode, StageStatus, TaskGraph};
use std::collections::BTreeMap;

fn text<R: Rng>(rng: &mut R, what: &str) -> String {
    format!("{what} {}", rng.random_range(0..1000))
}

fn st<R: Rng>(rng: &mut R) -> StageStatus {
    status(&text(rng, "robot"), &text(rng, "object"), &text(rng, "scene"))
}

pub fn id(stage: usize, k: usize) -> String {
    format!("n{stage}_{k}")
}

/// Valid graph: one initial node, 1..=`width` nodes per later stage, every
/// node fed from the previous stage, plus random extra adjacent-stage edges.
pub fn valid_graph<R: Rng>(rng: &mut R, n_stages: usize, width: usize) -> TaskGraph {
    let mut nodes = vec![node(&id(0, 0), 0, st(rng))];
    let mut edges: BTreeMap<String, BehaviorEdge> = BTreeMap::new();
    let mut counts = vec![1];
    for s in 1..n_stages {
        let count = rng.random_range(1..=width);
        counts.push(count);
        for k in 0..count {
            nodes.push(node(&id(s, k), s, st(rng)));
            let src = id(s - 1, rng.random_range(0..counts[s - 1]));
            let e = edge(&src, &id(s, k), &text(rng, "move"));
            edges.insert(e.id.clone(), e);
        }
        for _ in 0..rng.random_range(0..=count) {
            let e = edge(
                &id(s - 1, rng.random_range(0..counts[s - 1])),
                &id(s, rng.random_range(0..count)),
                &text(rng, "move"),
            );
            edges.entry(e.id.clone()).or_insert(e);
        }
    }
    TaskGraph::from_parts("t", n_stages, nodes, edges.into_values().collect())
}

fn count_at(g: &TaskGraph, stage: usize) -> usize {
    g.nodes_at(stage).count()
}

/// Takes a valid graph and breaks exactly one rule.
pub fn inject<R: Rng>(g: &TaskGraph, rule: Rule, rng: &mut R) -> TaskGraph {
    let mut nodes: Vec<StageNode> = g.nodes().to_vec();
    let mut edges: Vec<BehaviorEdge> = g.edges().to_vec();
    let mut n_stages = g.n_stages();
    let goal = g.goal_stage();
    match rule {
        Rule::R1 => {
            nodes.push(node("extra_root", 0, st(rng)));
            let dst = id(1, rng.random_range(0..count_at(g, 1)));
            edges.push(edge("extra_root", &dst, "also start"));
        }
        Rule::R2 => n_stages += 1,
        Rule::R3 => {
            let e = if n_stages >= 3 {
                let s = rng.random_range(0..n_stages - 2);
                edge(
                    &id(s, rng.random_range(0..count_at(g, s))),
                    &id(s + 2, rng.random_range(0..count_at(g, s + 2))),
                    "skip",
                )
            } else {
                edge(&id(1, rng.random_range(0..count_at(g, 1))), &id(0, 0), "back")
            };
            edges.retain(|x| x.id != e.id);
            edges.push(e);
        }
        Rule::R4 => edges.retain(|e| !e.dst.starts_with(&format!("n{goal}_"))),
        Rule::R5 => {
            if rng.random_bool(0.5) || edges.is_empty() {
                let i = rng.random_range(0..nodes.len());
                match rng.random_range(0..3) {
                    0 => nodes[i].status.robot = "  ".into(),
                    1 => nodes[i].status.object = String::new(),
                    _ => nodes[i].status.environment = "\t".into(),
                }
            } else {
                let i = rng.random_range(0..edges.len());
                edges[i].behavior = String::new();
            }
        }
        Rule::R6 => {
            let s = rng.random_range(1..n_stages);
            nodes.push(node("orphan", s, st(rng)));
            if s < goal {
                let dst = id(s + 1, rng.random_range(0..count_at(g, s + 1)));
                edges.push(edge("orphan", &dst, "continue"));
            }
        }
    }
    TaskGraph::from_parts("t", n_stages, nodes, edges)
}

/// Arbitrary forward-only graph (edges may skip stages, several initial
/// nodes allowed).
pub fn forward_graph<R: Rng>(rng: &mut R, n_stages: usize, width: usize) -> TaskGraph {
    let mut nodes = Vec::new();
    for s in 0..n_stages {
        for k in 0..rng.random_range(1..=width) {
            nodes.push(node(&id(s, k), s, status("r", "o", "e")));
        }
    }
    let mut edges = Vec::new();
    for a in &nodes {
        for b in &nodes {
            if b.stage > a.stage && rng.random_bool(0.4) {
                edges.push(edge(&a.id, &b.id, "go"));
            }
        }
    }
    TaskGraph::from_parts("t", n_stages, nodes, edges)
}

/// Every initial-to-goal id sequence, found by extending all partial paths
/// breadth-first.
pub fn brute_force_paths(g: &TaskGraph) -> Vec<Vec<String>> {
    let goal = g.goal_stage();
    let stage: BTreeMap<&str, usize> = g.nodes().iter().map(|n| (n.id.as_str(), n.stage)).collect();
    let mut frontier: Vec<Vec<String>> =
        g.nodes().iter().filter(|n| n.stage == 0).map(|n| vec![n.id.clone()]).collect();
    let mut done = Vec::new();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for path in frontier {
            let last = path.last().unwrap().clone();
            if stage[last.as_str()] == goal {
                done.push(path);
                continue;
            }
            for e in g.edges() {
                if e.src == last {
                    let mut p = path.clone();
                    p.push(e.id.clone());
                    p.push(e.dst.clone());
                    next.push(p);
                }
            }
        }
        frontier = next;
    }
    done.sort();
    done
}
