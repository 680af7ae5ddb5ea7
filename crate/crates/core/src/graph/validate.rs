//! Heuristic rules that guard against malformed critic graphs.

use super::TaskGraph;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    /// Exactly one node at stage 0.
    R1,
    /// Every stage in `[0, n_stages)` holds at least one node.
    R2,
    /// Every edge advances the stage index by exactly one.
    R3,
    /// Some goal-stage node is reachable from the initial node.
    R4,
    /// All text attributes are nonempty.
    R5,
    /// Every node is reachable from stage 0.
    R6,
}

impl Rule {
    pub fn describe(self) -> &'static str {
        match self {
            Rule::R1 => "exactly one initial (stage 0) node",
            Rule::R2 => "every stage holds at least one node",
            Rule::R3 => "edges advance the stage by exactly 1",
            Rule::R4 => "a goal-stage node is reachable from the initial node",
            Rule::R5 => "all status and behavior texts are nonempty",
            Rule::R6 => "no node is unreachable from stage 0",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    /// Node id, edge id or `stage <k>` the violation points at.
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.rule, self.location, self.message)
    }
}

/// Returns every violated rule, ordered by rule then location. Empty means
/// valid.
///
/// R4 is only evaluated once R2 holds: an empty stage already explains why no
/// goal can be reached. Unreachable goal-stage nodes are reported under R4
/// when no goal is reachable and under R6 otherwise, so each defect maps to a
/// single rule.
pub fn validate(g: &TaskGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |rule, location: String, message: String| out.push(Violation { rule, location, message });

    let initial: Vec<&str> = g.nodes_at(0).map(|n| n.id.as_str()).collect();
    if initial.len() != 1 {
        push(
            Rule::R1,
            "stage 0".into(),
            format!("expected exactly one initial node, found {} ({})", initial.len(), initial.join(", ")),
        );
    }

    let mut empty_stage = false;
    for stage in 0..g.n_stages() {
        if g.nodes_at(stage).next().is_none() {
            empty_stage = true;
            push(Rule::R2, format!("stage {stage}"), "no node describes this stage".into());
        }
    }

    let stage_of: HashMap<&str, usize> = g.nodes().iter().map(|n| (n.id.as_str(), n.stage)).collect();
    for e in g.edges() {
        if let (Some(&s), Some(&d)) = (stage_of.get(e.src.as_str()), stage_of.get(e.dst.as_str())) {
            if d != s + 1 {
                push(Rule::R3, e.id.clone(), format!("edge goes from stage {s} to stage {d}"));
            }
        }
    }

    let reached = reachable(g, &initial);
    let goal = g.goal_stage();
    let goal_reached = g.nodes_at(goal).any(|n| reached.contains(n.id.as_str()));
    if !empty_stage && !goal_reached {
        push(Rule::R4, format!("stage {goal}"), "no goal-stage node is reachable from the initial node".into());
    }

    for n in g.nodes() {
        let blank = |s: &str| s.trim().is_empty();
        for (field, text) in [
            ("robot_status", &n.status.robot),
            ("object_status", &n.status.object),
            ("environment_status", &n.status.environment),
        ] {
            if blank(text) {
                push(Rule::R5, n.id.clone(), format!("{field} is empty"));
            }
        }
    }
    for e in g.edges() {
        if e.behavior.trim().is_empty() {
            push(Rule::R5, e.id.clone(), "behavior is empty".into());
        }
    }

    for n in g.nodes() {
        if n.stage == 0 || reached.contains(n.id.as_str()) {
            continue;
        }
        if n.stage == goal && !goal_reached && !empty_stage {
            continue;
        }
        push(Rule::R6, n.id.clone(), "node is unreachable from the initial node".into());
    }

    out.sort_by(|a, b| (a.rule, &a.location).cmp(&(b.rule, &b.location)));
    out
}

fn reachable<'a>(g: &'a TaskGraph, roots: &[&'a str]) -> HashSet<&'a str> {
    let mut seen: HashSet<&str> = roots.iter().copied().collect();
    let mut queue: VecDeque<&str> = roots.iter().copied().collect();
    while let Some(id) = queue.pop_front() {
        for e in g.outgoing(id) {
            if seen.insert(e.dst.as_str()) {
                queue.push_back(e.dst.as_str());
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{edge, node, status, TaskGraph};

    fn st() -> crate::graph::StageStatus {
        status("r", "o", "e")
    }

    fn chain(n: usize) -> TaskGraph {
        let nodes = (0..n).map(|i| node(&format!("s{i}"), i, st())).collect();
        let edges = (1..n).map(|i| edge(&format!("s{}", i - 1), &format!("s{i}"), "go")).collect();
        TaskGraph::from_parts("t", n, nodes, edges)
    }

    fn rules(g: &TaskGraph) -> Vec<Rule> {
        let mut r: Vec<Rule> = validate(g).into_iter().map(|v| v.rule).collect();
        r.dedup();
        r
    }

    #[test]
    fn linear_chain_is_valid() {
        for n in 2..6 {
            assert!(validate(&chain(n)).is_empty());
        }
    }

    #[test]
    fn stage_skip_is_r3() {
        let g = chain(3);
        let mut edges = g.edges().to_vec();
        edges.push(edge("s0", "s2", "jump"));
        let g = TaskGraph::from_parts("t", 3, g.nodes().to_vec(), edges);
        assert_eq!(rules(&g), vec![Rule::R3]);
    }

    #[test]
    fn unreachable_goal_is_r4() {
        let g = chain(3);
        let edges = vec![edge("s0", "s1", "go")];
        let g = TaskGraph::from_parts("t", 3, g.nodes().to_vec(), edges);
        assert_eq!(rules(&g), vec![Rule::R4]);
    }

    #[test]
    fn two_initial_nodes_is_r1() {
        let g = chain(3);
        let mut nodes = g.nodes().to_vec();
        nodes.push(node("alt0", 0, st()));
        let mut edges = g.edges().to_vec();
        edges.push(edge("alt0", "s1", "go"));
        assert_eq!(rules(&TaskGraph::from_parts("t", 3, nodes, edges)), vec![Rule::R1]);
    }

    #[test]
    fn empty_trailing_stage_is_r2_only() {
        let g = chain(3);
        assert_eq!(rules(&TaskGraph::from_parts("t", 4, g.nodes().to_vec(), g.edges().to_vec())), vec![Rule::R2]);
    }

    #[test]
    fn blank_text_is_r5() {
        let g = chain(3);
        let mut edges = g.edges().to_vec();
        edges[0].behavior = "  ".into();
        assert_eq!(rules(&TaskGraph::from_parts("t", 3, g.nodes().to_vec(), edges)), vec![Rule::R5]);
    }

    #[test]
    fn orphan_middle_node_is_r6() {
        let g = chain(3);
        let mut nodes = g.nodes().to_vec();
        nodes.push(node("orphan", 1, st()));
        let mut edges = g.edges().to_vec();
        edges.push(edge("orphan", "s2", "go"));
        assert_eq!(rules(&TaskGraph::from_parts("t", 3, nodes, edges)), vec![Rule::R6]);
    }
}
