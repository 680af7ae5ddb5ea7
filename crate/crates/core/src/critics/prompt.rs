use super::{Message, Role};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    ZeroShot,
    #[default]
    FewShot,
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PromptMode::ZeroShot => "zero_shot",
            PromptMode::FewShot => "few_shot",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("template `{template}` has unresolved placeholders: {names:?}")]
    Unresolved { template: String, names: Vec<String> },
    #[error("template `{template}` has an unterminated placeholder at byte {offset}")]
    Unterminated { template: String, offset: usize },
}

/// A versioned pair of system and user texts with `{name}` placeholders.
/// `{{` and `}}` produce literal braces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: &'static str,
    pub version: u32,
    pub role: Role,
    pub system: &'static str,
    pub user: &'static str,
}

enum Piece<'a> {
    Text(&'a str),
    Brace(char),
    Slot(&'a str),
}

fn pieces(text: &str) -> Result<Vec<Piece<'_>>, usize> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let (mut i, mut start) = (0, 0);
    while i < bytes.len() {
        match bytes[i] {
            b'{' | b'}' if bytes.get(i + 1) == Some(&bytes[i]) => {
                out.push(Piece::Text(&text[start..i]));
                out.push(Piece::Brace(bytes[i] as char));
                i += 2;
                start = i;
            }
            b'{' => {
                let end = text[i..].find('}').ok_or(i)? + i;
                out.push(Piece::Text(&text[start..i]));
                out.push(Piece::Slot(&text[i + 1..end]));
                i = end + 1;
                start = i;
            }
            _ => i += 1,
        }
    }
    out.push(Piece::Text(&text[start..]));
    Ok(out)
}

impl PromptTemplate {
    /// Placeholder names in order of first appearance.
    pub fn placeholders(&self) -> Vec<&'static str> {
        let mut names = Vec::new();
        for text in [self.system, self.user] {
            for p in pieces(text).unwrap_or_default() {
                if let Piece::Slot(s) = p {
                    if !names.contains(&s) {
                        names.push(s);
                    }
                }
            }
        }
        names
    }

    fn fill(
        &self,
        text: &str,
        vars: &BTreeMap<&str, String>,
        missing: &mut Vec<String>,
    ) -> Result<String, PromptError> {
        let parts =
            pieces(text).map_err(|offset| PromptError::Unterminated { template: self.name.to_string(), offset })?;
        let mut out = String::with_capacity(text.len());
        for p in parts {
            match p {
                Piece::Text(t) => out.push_str(t),
                Piece::Brace(c) => out.push(c),
                Piece::Slot(name) => match vars.get(name) {
                    Some(v) => out.push_str(v),
                    None => {
                        if !missing.iter().any(|m| m == name) {
                            missing.push(name.to_string());
                        }
                    }
                },
            }
        }
        Ok(out)
    }

    /// Substitutes every placeholder; any name without a value is an error,
    /// so nothing is dispatched half-rendered.
    pub fn render(&self, vars: &BTreeMap<&str, String>) -> Result<Vec<Message>, PromptError> {
        let mut missing = Vec::new();
        let system = self.fill(self.system, vars, &mut missing)?;
        let user = self.fill(self.user, vars, &mut missing)?;
        if !missing.is_empty() {
            return Err(PromptError::Unresolved { template: self.name.to_string(), names: missing });
        }
        Ok(vec![Message::system(system), Message::user(user)])
    }

    pub fn id(&self) -> String {
        format!("{}@v{}", self.name, self.version)
    }
}

pub const GRAPH_TEMPLATE: PromptTemplate = PromptTemplate {
    name: "graph_builder",
    version: 1,
    role: Role::GraphBuilder,
    system: "You are a robotics task planner. You decompose a manipulation task into a text-attributed \
stage graph. Nodes are stages; each node describes the robot status, the object status and the \
environment status at that stage. Edges are the robot behaviors that move the task from one stage \
to the next.\n\n\
Rules the graph must satisfy:\n\
R1 exactly one node at stage 0 (the shared initial state)\n\
R2 every stage from 0 to n_stages-1 holds at least one node\n\
R3 every edge goes from stage k to stage k+1\n\
R4 some node at the last stage is reachable from the initial node\n\
R5 every status and behavior text is nonempty\n\
R6 every node is reachable from the initial node\n\
A stage may hold several nodes when a sub-goal has more than one outcome.\n\n\
Answer with a single JSON object and nothing else:\n\
{{\"schema_version\": 1, \"task\": <name>, \"n_stages\": <int>, \
\"nodes\": [{{\"id\", \"stage\", \"robot_status\", \"object_status\", \"environment_status\"}}], \
\"edges\": [{{\"src\", \"dst\", \"behavior\"}}]}}",
    user: "Task: {task_name}\n{task_description}\n\nSubsteps:\n{substeps}\n\
Environment API:\n{api_catalog}\n{examples}Produce the stage graph for this task.",
};

pub const EVALUATE_TEMPLATE: PromptTemplate = PromptTemplate {
    name: "evaluator",
    version: 1,
    role: Role::Evaluator,
    system: "You evaluate a trained robot policy. You receive transcripts of several rollouts: for each \
step, the end-effector position, object positions, joint values, grasp flags and the furthest task \
stage reached. You also receive per-component reward statistics gathered during training. Judge the \
behavior, not the reward magnitude.\n\n\
Answer with a single JSON object and nothing else:\n\
{{\"video_description\": <text>, \
\"potential_problems\": [{{\"text\": <text>, \"tag\": <optional tag>}}], \
\"possible_improvements\": [<text>]}}\n\
Allowed tags: no-progress, overshoot, wrong-object, stalled-at-stage(<i>). Omit the tag when none fits.",
    user: "Task: {task_name}\n{task_description}\n\nSubsteps:\n{substeps}\n\
Reward statistics from training:\n{stats}\n\nRollouts:\n{transcripts}",
};

pub const REFINE_TEMPLATE: PromptTemplate = PromptTemplate {
    name: "refiner",
    version: 1,
    role: Role::Refiner,
    system: "You improve reward programs for reinforcement learning. A program is a list of lines\n\
  component <name> weight <number> := <expression>\n\
The reward is the weighted sum of the component values. Expressions use numbers, + - * /, \
comparisons (which yield 1 or 0), abs, exp, tanh, min, max, clamp, dist(a, b), action(i) and the \
environment API functions listed by the user, with object and joint names in double quotes. Use \
only those functions and names.\n\n\
You may add constraints, remove redundant ones, change an expression, or change weights. Reply \
with the complete new program and nothing else. If the current program should be kept, reply with \
the single word NO-CHANGE.",
    user: "Task: {task_name}\n{task_description}\n\n{graph_block}\n\
Environment API:\n{api_catalog}\n\
Current program:\n{current_program}\n\
Reward statistics from training:\n{stats}\n\n\
Evaluator feedback:\n{feedback}",
};

pub const REPAIR_TEMPLATE: PromptTemplate = PromptTemplate {
    name: "repair",
    version: 1,
    role: Role::Refiner,
    system: "",
    user: "Your previous answer was rejected (attempt {attempt} of {max_attempts}). Errors:\n{errors}\n\
Reply again with a corrected answer in the same format and nothing else.",
};

struct Example {
    name: &'static str,
    description: &'static str,
    substeps: &'static str,
    graph: &'static str,
}

const EXAMPLES: [Example; 2] = [
    Example {
        name: "push_puck",
        description: "Slide the puck across the table until it rests on the marked spot.",
        substeps: "1. [reward] push the puck onto the marked spot\n",
        graph: r#"{"schema_version": 1, "task": "push_puck", "n_stages": 2,
 "nodes": [
  {"id": "start", "stage": 0, "robot_status": "gripper above the table, away from the puck", "object_status": "puck resting off the spot", "environment_status": "table clear"},
  {"id": "on_spot", "stage": 1, "robot_status": "gripper next to the puck", "object_status": "puck resting on the marked spot", "environment_status": "table clear"}],
 "edges": [{"src": "start", "dst": "on_spot", "behavior": "approach the puck and push it toward the spot"}]}"#,
    },
    Example {
        name: "open_drawer",
        description: "Pull the drawer open by its handle.",
        substeps: "1. [primitive] move the gripper to the drawer handle\n2. [reward] pull the drawer open\n",
        graph: r#"{"schema_version": 1, "task": "open_drawer", "n_stages": 3,
 "nodes": [
  {"id": "start", "stage": 0, "robot_status": "gripper away from the drawer", "object_status": "drawer closed", "environment_status": "cabinet upright"},
  {"id": "at_handle", "stage": 1, "robot_status": "gripper holding the handle", "object_status": "drawer closed", "environment_status": "cabinet upright"},
  {"id": "open", "stage": 2, "robot_status": "gripper holding the handle", "object_status": "drawer pulled fully open", "environment_status": "cabinet upright"},
  {"id": "jammed", "stage": 2, "robot_status": "gripper holding the handle", "object_status": "drawer stuck partly open", "environment_status": "cabinet tilted"}],
 "edges": [
  {"src": "start", "dst": "at_handle", "behavior": "reach for the handle and close the gripper"},
  {"src": "at_handle", "dst": "open", "behavior": "pull straight out along the rail"},
  {"src": "at_handle", "dst": "jammed", "behavior": "pull at an angle so the drawer binds"}]}"#,
    },
];

/// The `{examples}` block: empty in zero-shot mode.
pub fn examples_block(mode: PromptMode) -> String {
    match mode {
        PromptMode::ZeroShot => String::new(),
        PromptMode::FewShot => {
            let mut out = String::from("\nExamples:\n");
            for e in &EXAMPLES {
                out.push_str(&format!(
                    "\nTask: {}\n{}\nSubsteps:\n{}Graph:\n{}\n",
                    e.name, e.description, e.substeps, e.graph
                ));
            }
            out.push('\n');
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{parse_graph, validate};

    #[test]
    fn placeholders_are_listed_once() {
        assert_eq!(
            GRAPH_TEMPLATE.placeholders(),
            vec!["task_name", "task_description", "substeps", "api_catalog", "examples"]
        );
        assert_eq!(REPAIR_TEMPLATE.placeholders(), vec!["attempt", "max_attempts", "errors"]);
    }

    #[test]
    fn unresolved_placeholders_are_rejected() {
        let vars = BTreeMap::from([("task_name", "t".to_string())]);
        match GRAPH_TEMPLATE.render(&vars) {
            Err(PromptError::Unresolved { names, .. }) => {
                assert_eq!(names, vec!["task_description", "substeps", "api_catalog", "examples"])
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn literal_braces_survive_and_values_are_not_rescanned() {
        let vars: BTreeMap<&str, String> =
            GRAPH_TEMPLATE.placeholders().into_iter().map(|n| (n, format!("<{{{n}}}>"))).collect();
        let msgs = GRAPH_TEMPLATE.render(&vars).unwrap();
        assert!(msgs[0].content.contains("{\"schema_version\": 1"));
        assert!(msgs[1].content.contains("<{task_name}>"));
    }

    #[test]
    fn bundled_examples_are_valid_graphs() {
        for e in &EXAMPLES {
            let g = parse_graph(e.graph).unwrap();
            assert!(validate(&g).is_empty(), "{}", e.name);
        }
        assert!(examples_block(PromptMode::ZeroShot).is_empty());
        assert!(examples_block(PromptMode::FewShot).contains("open_drawer"));
    }
}
