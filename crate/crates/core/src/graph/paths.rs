use super::TaskGraph;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_PATH_CAP: usize = 256;

/// An initial-to-goal path as alternating node and edge ids, starting and
/// ending with a node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Path(pub Vec<String>);

impl Path {
    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.0.iter().step_by(2).map(String::as_str)
    }

    pub fn edges(&self) -> impl Iterator<Item = &str> {
        self.0.iter().skip(1).step_by(2).map(String::as_str)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PathError {
    #[error("graph has more than {cap} initial-to-goal paths; simplify the graph by merging equivalent outcomes")]
    TooManyPaths { cap: usize },
}

/// All directed paths from the initial node to any goal-stage node, sorted
/// lexicographically by id sequence.
pub fn enumerate_paths(g: &TaskGraph, cap: usize) -> Result<Vec<Path>, PathError> {
    let goal = g.goal_stage();
    let mut out = Vec::new();
    let mut trail = Vec::new();
    for root in g.nodes_at(0) {
        trail.push(root.id.clone());
        walk(g, &root.id, goal, cap, &mut trail, &mut out)?;
        trail.pop();
    }
    out.sort();
    Ok(out)
}

fn walk(
    g: &TaskGraph,
    at: &str,
    goal: usize,
    cap: usize,
    trail: &mut Vec<String>,
    out: &mut Vec<Path>,
) -> Result<(), PathError> {
    if g.node(at).is_some_and(|n| n.stage == goal) {
        if out.len() == cap {
            return Err(PathError::TooManyPaths { cap });
        }
        out.push(Path(trail.clone()));
        return Ok(());
    }
    for e in g.outgoing(at) {
        trail.push(e.id.clone());
        trail.push(e.dst.clone());
        walk(g, &e.dst, goal, cap, trail, out)?;
        trail.truncate(trail.len() - 2);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{edge, node, status, TaskGraph};

    #[test]
    fn chain_has_one_path() {
        let st = || status("r", "o", "e");
        let g = TaskGraph::from_parts(
            "t",
            3,
            vec![node("a", 0, st()), node("b", 1, st()), node("c", 2, st())],
            vec![edge("a", "b", "x"), edge("b", "c", "y")],
        );
        let p = enumerate_paths(&g, DEFAULT_PATH_CAP).unwrap();
        assert_eq!(p, vec![Path(vec!["a".into(), "a->b".into(), "b".into(), "b->c".into(), "c".into()])]);
        assert_eq!(p[0].nodes().collect::<Vec<_>>(), ["a", "b", "c"]);
    }

    #[test]
    fn diamond_has_two_paths() {
        let st = || status("r", "o", "e");
        let g = TaskGraph::from_parts(
            "t",
            3,
            vec![node("a", 0, st()), node("b1", 1, st()), node("b2", 1, st()), node("c", 2, st())],
            vec![edge("a", "b1", "x"), edge("a", "b2", "x"), edge("b1", "c", "y"), edge("b2", "c", "y")],
        );
        let p = enumerate_paths(&g, DEFAULT_PATH_CAP).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p[0] < p[1]);
        assert_eq!(enumerate_paths(&g, 1), Err(PathError::TooManyPaths { cap: 1 }));
    }
}
