use super::{BehaviorEdge, StageNode, StageStatus, TaskGraph};
use serde_json::{json, Map, Value};
use std::collections::HashSet;
use std::fmt;

pub const GRAPH_SCHEMA_VERSION: u64 = 1;

/// A located problem in a serialized graph. `location` is a path such as
/// `nodes[2].id` or `edges[0]`, or `line 3, column 7` for syntax errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphParseError {
    pub location: String,
    pub message: String,
}

impl fmt::Display for GraphParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

struct Collector(Vec<GraphParseError>);

impl Collector {
    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.0.push(GraphParseError { location: location.into(), message: message.into() });
    }

    fn string(&mut self, obj: &Map<String, Value>, key: &str, at: &str) -> Option<String> {
        match obj.get(key) {
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.push(format!("{at}.{key}"), "expected a string");
                None
            }
            None => {
                self.push(at, format!("missing required field `{key}`"));
                None
            }
        }
    }

    fn index(&mut self, obj: &Map<String, Value>, key: &str, at: &str) -> Option<usize> {
        match obj.get(key) {
            Some(v) => match v.as_u64() {
                Some(n) => Some(n as usize),
                None => {
                    self.push(format!("{at}.{key}"), "expected a non-negative integer");
                    None
                }
            },
            None => {
                self.push(at, format!("missing required field `{key}`"));
                None
            }
        }
    }
}

/// Parses the JSON wire form of a stage graph.
///
/// Collects every reference-level problem it can find instead of stopping at
/// the first, so the whole list can be handed back to a critic for repair.
/// Empty text attributes are accepted here and reported by the validator.
pub fn parse_graph(text: &str) -> Result<TaskGraph, Vec<GraphParseError>> {
    let root: Value = serde_json::from_str(text).map_err(|e| {
        vec![GraphParseError {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: format!("syntax error: {e}"),
        }]
    })?;
    let mut errs = Collector(Vec::new());
    let Some(obj) = root.as_object() else {
        errs.push("$", "expected a JSON object with `nodes` and `edges`");
        return Err(errs.0);
    };

    if let Some(v) = obj.get("schema_version") {
        if v.as_u64() != Some(GRAPH_SCHEMA_VERSION) {
            errs.push("schema_version", format!("unsupported version {v} (expected {GRAPH_SCHEMA_VERSION})"));
        }
    }
    let task = match obj.get("task") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            errs.push("task", "expected a string");
            String::new()
        }
        None => String::new(),
    };
    let n_stages = errs.index(obj, "n_stages", "$");
    if let Some(n) = n_stages {
        if n < 2 {
            errs.push("n_stages", "a task graph needs at least an initial and a goal stage");
        }
    }

    let mut nodes = Vec::new();
    let mut ids = HashSet::new();
    match obj.get("nodes") {
        Some(Value::Array(items)) => {
            if items.is_empty() {
                errs.push("nodes", "node set is empty");
            }
            for (i, item) in items.iter().enumerate() {
                let at = format!("nodes[{i}]");
                let Some(n) = item.as_object() else {
                    errs.push(at, "expected an object");
                    continue;
                };
                let id = errs.string(n, "id", &at);
                let stage = errs.index(n, "stage", &at);
                let robot = errs.string(n, "robot_status", &at);
                let object = errs.string(n, "object_status", &at);
                let environment = errs.string(n, "environment_status", &at);
                if let (Some(stage), Some(n_stages)) = (stage, n_stages) {
                    if stage >= n_stages {
                        errs.push(
                            format!("{at}.stage"),
                            format!("stage {stage} outside [0, {}]", n_stages.saturating_sub(1)),
                        );
                    }
                }
                if let Some(id) = &id {
                    if id.is_empty() {
                        errs.push(format!("{at}.id"), "empty node id");
                    } else if !ids.insert(id.clone()) {
                        errs.push(format!("{at}.id"), format!("duplicate node id `{id}`"));
                    }
                }
                if let (Some(id), Some(stage), Some(robot), Some(object), Some(environment)) =
                    (id, stage, robot, object, environment)
                {
                    nodes.push(StageNode { id, stage, status: StageStatus { robot, object, environment } });
                }
            }
        }
        Some(_) => errs.push("nodes", "expected an array"),
        None => errs.push("$", "missing required field `nodes`"),
    }

    let mut edges = Vec::new();
    let mut edge_ids = HashSet::new();
    match obj.get("edges") {
        Some(Value::Array(items)) => {
            for (i, item) in items.iter().enumerate() {
                let at = format!("edges[{i}]");
                let Some(e) = item.as_object() else {
                    errs.push(at, "expected an object");
                    continue;
                };
                let src = errs.string(e, "src", &at);
                let dst = errs.string(e, "dst", &at);
                let behavior = errs.string(e, "behavior", &at);
                let explicit = match e.get("id") {
                    Some(Value::String(s)) => Some(s.clone()),
                    Some(_) => {
                        errs.push(format!("{at}.id"), "expected a string");
                        None
                    }
                    None => None,
                };
                for (field, r) in [("src", &src), ("dst", &dst)] {
                    if let Some(r) = r {
                        if !ids.contains(r) {
                            errs.push(format!("{at}.{field}"), format!("edge {at} references unknown node `{r}`"));
                        }
                    }
                }
                if let (Some(src), Some(dst), Some(behavior)) = (src, dst, behavior) {
                    let id = explicit.unwrap_or_else(|| format!("{src}->{dst}"));
                    if !edge_ids.insert(id.clone()) {
                        errs.push(at, format!("duplicate edge id `{id}`"));
                    }
                    edges.push(BehaviorEdge { id, src, dst, behavior });
                }
            }
        }
        Some(_) => errs.push("edges", "expected an array"),
        None => errs.push("$", "missing required field `edges`"),
    }

    if errs.0.is_empty() {
        Ok(TaskGraph::from_parts(task, n_stages.unwrap_or(0), nodes, edges))
    } else {
        Err(errs.0)
    }
}

pub(super) fn to_json(g: &TaskGraph) -> String {
    let nodes: Vec<Value> = g
        .nodes
        .iter()
        .map(|n| {
            json!({
                "id": n.id,
                "stage": n.stage,
                "robot_status": n.status.robot,
                "object_status": n.status.object,
                "environment_status": n.status.environment,
            })
        })
        .collect();
    let edges: Vec<Value> =
        g.edges.iter().map(|e| json!({"id": e.id, "src": e.src, "dst": e.dst, "behavior": e.behavior})).collect();
    let doc = json!({
        "schema_version": GRAPH_SCHEMA_VERSION,
        "task": g.task,
        "n_stages": g.n_stages,
        "nodes": nodes,
        "edges": edges,
    });
    serde_json::to_string_pretty(&doc).expect("graph serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHAIN: &str = r#"{
        "n_stages": 2,
        "nodes": [
            {"id": "a", "stage": 0, "robot_status": "r", "object_status": "o", "environment_status": "e"},
            {"id": "b", "stage": 1, "robot_status": "r", "object_status": "o", "environment_status": "e"}
        ],
        "edges": [{"src": "a", "dst": "b", "behavior": "move"}]
    }"#;

    #[test]
    fn parses_minimal_chain() {
        let g = parse_graph(CHAIN).unwrap();
        assert_eq!(g.n_stages(), 2);
        assert_eq!(g.edges()[0].id, "a->b");
    }

    #[test]
    fn dangling_edge_names_the_edge() {
        let text = CHAIN.replace(r#""dst": "b""#, r#""dst": "zz""#);
        let errs = parse_graph(&text).unwrap_err();
        assert!(errs.iter().any(|e| e.location == "edges[0].dst" && e.message.contains("zz")), "{errs:?}");
    }

    #[test]
    fn empty_nodes_rejected() {
        let errs = parse_graph(r#"{"n_stages": 2, "nodes": [], "edges": []}"#).unwrap_err();
        assert!(errs.iter().any(|e| e.message.contains("empty")));
    }

    #[test]
    fn syntax_error_is_located() {
        let errs = parse_graph("{\"n_stages\": 2,\n  \"nodes\": [,]}").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].location.starts_with("line 2"));
    }

    #[test]
    fn duplicate_ids_and_missing_fields() {
        let text = CHAIN.replace(r#""id": "b""#, r#""id": "a""#).replace(r#""behavior": "move""#, r#""note": "x""#);
        let errs = parse_graph(&text).unwrap_err();
        assert!(errs.iter().any(|e| e.message.contains("duplicate node id `a`")));
        assert!(errs.iter().any(|e| e.message.contains("missing required field `behavior`")));
    }

    #[test]
    fn stage_out_of_range() {
        let text = CHAIN.replace(r#""stage": 1"#, r#""stage": 5"#);
        let errs = parse_graph(&text).unwrap_err();
        assert!(errs.iter().any(|e| e.location == "nodes[1].stage"));
    }

    #[test]
    fn round_trip_preserves_structure() {
        let g = parse_graph(CHAIN).unwrap();
        assert_eq!(parse_graph(&g.to_json()).unwrap(), g);
    }
}
