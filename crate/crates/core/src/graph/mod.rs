//! Text-attributed stage graph.
//!
//! Nodes are task stages annotated with robot, object and environment status
//! text; edges are the robot behaviors that move the task from one stage to
//! the next. Stage 0 holds the single shared initial state and stage
//! `n_stages - 1` holds the goal outcomes. A stage can hold several nodes when
//! a sub-goal has more than one possible outcome.

mod parse;
mod paths;
mod render;
mod validate;

pub use parse::{parse_graph, GraphParseError, GRAPH_SCHEMA_VERSION};
pub use paths::{enumerate_paths, Path, PathError, DEFAULT_PATH_CAP};
pub use render::render_prompt_block;
pub use validate::{validate, Rule, Violation};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStatus {
    pub robot: String,
    pub object: String,
    pub environment: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageNode {
    pub id: String,
    pub stage: usize,
    pub status: StageStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorEdge {
    pub id: String,
    pub src: String,
    pub dst: String,
    pub behavior: String,
}

/// Stage graph with nodes kept in (stage, id) order and edges in id order, so
/// structural equality does not depend on input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskGraph {
    task: String,
    n_stages: usize,
    nodes: Vec<StageNode>,
    edges: Vec<BehaviorEdge>,
}

impl TaskGraph {
    /// Assembles a graph without running the heuristic rules; see
    /// [`validate`]. Reference-level problems (duplicate ids, dangling edges,
    /// out-of-range stages) are still reported by [`parse_graph`], which is the
    /// normal way in.
    pub fn from_parts(
        task: impl Into<String>,
        n_stages: usize,
        mut nodes: Vec<StageNode>,
        mut edges: Vec<BehaviorEdge>,
    ) -> Self {
        nodes.sort_by(|a, b| (a.stage, &a.id).cmp(&(b.stage, &b.id)));
        edges.sort_by(|a, b| a.id.cmp(&b.id));
        Self { task: task.into(), n_stages, nodes, edges }
    }

    pub fn task(&self) -> &str {
        &self.task
    }

    pub fn n_stages(&self) -> usize {
        self.n_stages
    }

    pub fn goal_stage(&self) -> usize {
        self.n_stages.saturating_sub(1)
    }

    pub fn nodes(&self) -> &[StageNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[BehaviorEdge] {
        &self.edges
    }

    pub fn node(&self, id: &str) -> Option<&StageNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn nodes_at(&self, stage: usize) -> impl Iterator<Item = &StageNode> {
        self.nodes.iter().filter(move |n| n.stage == stage)
    }

    pub fn outgoing<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a BehaviorEdge> + 'a {
        self.edges.iter().filter(move |e| e.src == id)
    }

    /// JSON wire form accepted by [`parse_graph`].
    pub fn to_json(&self) -> String {
        parse::to_json(self)
    }

    /// True when every edge strictly increases the stage index, which rules
    /// out cycles.
    pub fn is_forward_only(&self) -> bool {
        self.edges.iter().all(|e| match (self.node(&e.src), self.node(&e.dst)) {
            (Some(s), Some(d)) => d.stage > s.stage,
            _ => false,
        })
    }
}

/// Builds a status triple; shorthand for fixtures and canned graphs.
pub fn status(robot: &str, object: &str, environment: &str) -> StageStatus {
    StageStatus { robot: robot.into(), object: object.into(), environment: environment.into() }
}

pub fn node(id: &str, stage: usize, st: StageStatus) -> StageNode {
    StageNode { id: id.into(), stage, status: st }
}

pub fn edge(src: &str, dst: &str, behavior: &str) -> BehaviorEdge {
    BehaviorEdge { id: format!("{src}->{dst}"), src: src.into(), dst: dst.into(), behavior: behavior.into() }
}
