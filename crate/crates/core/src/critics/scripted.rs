//! Deterministic rule-based critic.
//!
//! Outputs are a function of the request payload (plus a call counter for
//! the fault-injecting rule sets), so runs using it are reproducible bit for
//! bit.

use super::{
    BackendError, CriticBackend, CriticRequest, EvaluatePayload, Feedback, GraphPayload, Problem, ProblemTag,
    RefinePayload, Role, RolloutTranscript, NO_CHANGE,
};
use crate::dsl::{parse_program, Component, RewardProgram};
use crate::env::{distance, EnvApiCatalog, TaskSpec};
use crate::graph::{edge, node, status, BehaviorEdge, StageNode, TaskGraph};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// Joint value (rad) a failing rollout must exceed to count as progress.
pub const NO_PROGRESS_JOINT: f64 = 0.3;
/// Fraction of the initial goal distance a rollout must get below to count
/// as progress on distance tasks.
pub const NO_PROGRESS_DISTANCE_RATIO: f64 = 0.7;
/// Overshoot: got within this fraction of the initial distance ...
pub const OVERSHOOT_REACHED_RATIO: f64 = 0.5;
/// ... then moved away again by at least this fraction of it.
pub const OVERSHOOT_REGRESS_RATIO: f64 = 0.25;
/// Proximity (m) at which the gripper counts as touching an object.
pub const CONTACT_RADIUS: f64 = 0.05;

pub const MALFORMED_OUTPUT: &str = "I could not complete this request.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleSet {
    #[default]
    Default,
    /// The first graph answer contains an edge that skips a stage.
    StageSkipOnce,
    /// Every answer is unparseable.
    AlwaysMalformed,
    /// The first answer of the session is unparseable.
    FailOnce,
}

impl fmt::Display for RuleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuleSet::Default => "default",
            RuleSet::StageSkipOnce => "stage-skip-once",
            RuleSet::AlwaysMalformed => "always-malformed",
            RuleSet::FailOnce => "fail-once",
        })
    }
}

impl FromStr for RuleSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown scripted rule set `{s}`"))
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    rules: RuleSet,
    calls: usize,
}

impl ScriptedBackend {
    pub fn new(rules: RuleSet) -> Self {
        Self { rules, calls: 0 }
    }

    pub fn rules(&self) -> RuleSet {
        self.rules
    }
}

fn decode<T: for<'de> Deserialize<'de>>(request: &CriticRequest) -> Result<T, BackendError> {
    serde_json::from_value(request.payload.clone())
        .map_err(|e| BackendError::Response(format!("scripted {} payload: {e}", request.role)))
}

impl CriticBackend for ScriptedBackend {
    fn complete(&mut self, request: &CriticRequest) -> Result<String, BackendError> {
        let first = self.calls == 0;
        self.calls += 1;
        let is_repair = request.payload.get("repair").is_some();
        match self.rules {
            RuleSet::AlwaysMalformed => return Ok(MALFORMED_OUTPUT.to_string()),
            RuleSet::FailOnce if first => return Ok(MALFORMED_OUTPUT.to_string()),
            _ => {}
        }
        match request.role {
            Role::GraphBuilder => {
                let p: GraphPayload = decode(request)?;
                let skip = self.rules == RuleSet::StageSkipOnce && !is_repair;
                Ok(graph_for(&p.task, skip).to_json())
            }
            Role::Evaluator => {
                let p: EvaluatePayload = decode(request)?;
                let fb = evaluate(&p.task, &p.transcripts);
                Ok(serde_json::to_string_pretty(&fb).expect("feedback serializes"))
            }
            Role::Refiner => {
                let p: RefinePayload = decode(request)?;
                let program = parse_program(&p.program).map_err(|e| {
                    BackendError::Response(format!("scripted refiner got an unparseable program: {e:?}"))
                })?;
                Ok(refine(&program, &p.feedback, &p.catalog).map(|q| q.to_string()).unwrap_or_else(|| NO_CHANGE.into()))
            }
        }
    }
}

fn chain(task: &str, stages: &[(&str, [&str; 3])], behaviors: &[&str]) -> (String, Vec<StageNode>, Vec<BehaviorEdge>) {
    let nodes: Vec<StageNode> =
        stages.iter().enumerate().map(|(i, (id, s))| node(id, i, status(s[0], s[1], s[2]))).collect();
    let edges = stages.windows(2).zip(behaviors).map(|(w, b)| edge(w[0].0, w[1].0, b)).collect();
    (task.to_string(), nodes, edges)
}

/// Canned stage graph for the task. With `skip`, an extra edge jumps from
/// the initial stage straight to the goal (or, for two-stage graphs, runs
/// backwards), which the validator rejects.
pub fn graph_for(task: &TaskSpec, skip: bool) -> TaskGraph {
    let (name, nodes, mut edges) = match task.success_predicate_id.as_str() {
        "hinge_open" => chain(
            &task.name,
            &[
                ("approach", ["gripper away from the lid", "lid closed", "dispenser on the table"]),
                ("at_handle", ["gripper at the lid handle", "lid closed", "dispenser on the table"]),
                ("opened", ["gripper at the handle", "lid rotated at least 90% open", "dispenser on the table"]),
            ],
            &["move the gripper to the handle", "rotate the lid about its hinge until it is open"],
        ),
        "reach_target" => chain(
            &task.name,
            &[
                ("start", ["gripper at its start pose", "target marker on the table", "table clear"]),
                ("at_target", ["gripper within 5 cm of the marker", "target marker on the table", "table clear"]),
            ],
            &["move the gripper toward the marker and stop on it"],
        ),
        "item_in_zone" => chain(
            &task.name,
            &[
                ("start", ["gripper empty, away from the item", "item on the table", "storage zone empty"]),
                ("at_item", ["gripper above the item", "item on the table", "storage zone empty"]),
                ("holding", ["gripper closed on the item", "item lifted", "storage zone empty"]),
                ("stored", ["gripper over the zone", "item inside the storage zone", "storage zone occupied"]),
            ],
            &["move the gripper to the item", "close the gripper on the item", "carry the item into the zone"],
        ),
        _ => {
            let mut stages = vec![("s0".to_string(), "robot at its start pose".to_string())];
            for s in &task.substeps {
                stages.push((format!("s{}", s.index + 1), format!("robot has finished: {}", s.description)));
            }
            let nodes: Vec<StageNode> = stages
                .iter()
                .enumerate()
                .map(|(i, (id, robot))| {
                    node(id, i, status(robot, "objects as left by the previous stage", "scene unchanged"))
                })
                .collect();
            let edges = task
                .substeps
                .iter()
                .map(|s| edge(&format!("s{}", s.index), &format!("s{}", s.index + 1), &s.description))
                .collect();
            (task.name.clone(), nodes, edges)
        }
    };
    if skip {
        let first = nodes[0].id.clone();
        let last = nodes[nodes.len() - 1].id.clone();
        if nodes.len() >= 3 {
            edges.push(edge(&first, &last, "jump straight to the goal"));
        } else {
            edges.push(edge(&last, &first, "return to the start"));
        }
    }
    let n_stages = nodes.iter().map(|n| n.stage).max().unwrap_or(0) + 1;
    TaskGraph::from_parts(name, n_stages, nodes, edges)
}

/// Splits a rollout into maximal runs of equal stage, so distance rules are
/// applied per sub-goal.
fn stage_segments(t: &RolloutTranscript) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut current = None;
    for r in &t.records {
        if current != Some(r.snapshot.stage) {
            out.push(Vec::new());
            current = Some(r.snapshot.stage);
        }
        out.last_mut().expect("segment pushed").push(r.snapshot.goal_distance);
    }
    out
}

fn made_no_progress(t: &RolloutTranscript) -> bool {
    if t.furthest_stage() > t.first().stage {
        return false;
    }
    if !t.first().joints.is_empty() {
        let max_joint = t.records.iter().flat_map(|r| r.snapshot.joints.values()).fold(f64::MIN, |a, b| a.max(*b));
        return max_joint <= NO_PROGRESS_JOINT;
    }
    let d0 = t.first().goal_distance;
    let min = t.records.iter().map(|r| r.snapshot.goal_distance).fold(f64::MAX, f64::min);
    min > NO_PROGRESS_DISTANCE_RATIO * d0
}

fn overshot(t: &RolloutTranscript) -> bool {
    stage_segments(t).iter().any(|seg| {
        let d0 = seg[0];
        if d0 <= 0.0 {
            return false;
        }
        let mut best = d0;
        seg.iter().any(|&d| {
            best = best.min(d);
            best <= OVERSHOOT_REACHED_RATIO * d0 && d >= best + OVERSHOOT_REGRESS_RATIO * d0
        })
    })
}

/// Name of an object the gripper touched without starting near it, while
/// holding nothing.
fn wrong_contact(t: &RolloutTranscript) -> Option<String> {
    let start = t.first();
    for r in &t.records {
        let s = &r.snapshot;
        if s.grasped.values().any(|g| *g) {
            continue;
        }
        for (name, p) in &s.objects {
            let near_now = distance(s.ee, *p) <= CONTACT_RADIUS;
            let near_at_start = start.objects.get(name).is_some_and(|p0| distance(start.ee, *p0) <= CONTACT_RADIUS);
            if near_now && !near_at_start {
                return Some(name.clone());
            }
        }
    }
    None
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Evaluator rule table.
///
/// | condition (over failing rollouts)                          | tag                  |
/// |------------------------------------------------------------|----------------------|
/// | any failure                                                | `stalled-at-stage(k)`, k = furthest stage |
/// | every failure stays in its first stage with joints <= 0.3 rad, or above 70% of the initial goal distance | `no-progress` |
/// | some failure gets within 50% of a sub-goal's initial distance then recedes by 25% of it | `overshoot` |
/// | some failure touches an object it did not start at, holding nothing | `wrong-object` |
///
/// All rollouts successful gives no problems. Mixed outcomes are reported as
/// partial success in the description.
pub fn evaluate(task: &TaskSpec, transcripts: &[RolloutTranscript]) -> Feedback {
    let n = transcripts.len();
    let successes = transcripts.iter().filter(|t| t.success).count();
    let failing: Vec<&RolloutTranscript> = transcripts.iter().filter(|t| !t.success).collect();
    let furthest = transcripts.iter().map(RolloutTranscript::furthest_stage).max().unwrap_or(0);
    let n_stages = task.substeps.len();
    let outcome = match successes {
        s if s == n => format!("all {n} rollouts succeeded"),
        0 => format!("none of the {n} rollouts succeeded"),
        s => format!("partial success: {s}/{n} rollouts succeeded"),
    };
    let video_description = format!(
        "The robot attempted `{}` in {n} rollouts; {outcome}. Furthest stage reached: {furthest} of {n_stages}. \
         Mean episode length {:.1} steps.",
        task.name,
        mean(transcripts.iter().map(|t| t.length as f64)),
    );
    let mut problems = Vec::new();
    let mut improvements = Vec::new();
    if !failing.is_empty() {
        let stall = failing.iter().map(|t| t.furthest_stage()).max().unwrap_or(0);
        let pending = task.substeps.get(stall).map(|s| s.description.as_str()).unwrap_or("the final sub-goal");
        problems.push(Problem::tagged(
            ProblemTag::StalledAtStage(stall),
            format!("{} failing rollouts stop at stage {stall} without completing `{pending}`", failing.len()),
        ));
        improvements.push(format!("reward completing `{pending}` more strongly"));
        if failing.iter().all(|t| made_no_progress(t)) {
            problems.push(Problem::tagged(
                ProblemTag::NoProgress,
                "the failing rollouts barely move toward the goal; the policy mostly idles",
            ));
            improvements.push("increase the weight of the progress term so it outweighs the regularizers".into());
        }
        if failing.iter().any(|t| overshot(t)) {
            problems.push(Problem::tagged(
                ProblemTag::Overshoot,
                "the gripper gets close to the sub-goal and then moves past it",
            ));
            improvements.push("penalize fast motion near the sub-goal".into());
        }
        if let Some(name) = failing.iter().find_map(|t| wrong_contact(t)) {
            problems.push(Problem::tagged(
                ProblemTag::WrongObject,
                format!("the gripper reaches `{name}` while holding nothing"),
            ));
            improvements.push("reward holding the item before moving on".into());
        }
    }
    Feedback { video_description, potential_problems: problems, possible_improvements: improvements }
}

fn component(line: &str) -> Component {
    parse_program(line).expect("scripted component parses").components.remove(0)
}

/// Initial program for a catalog with no prior reward.
pub fn default_program(catalog: &EnvApiCatalog) -> RewardProgram {
    let mut text = String::new();
    if let Some(j) = catalog.joints.first() {
        text.push_str(&format!("component progress weight 1 := joint_value(\"{j}\") - joint_target(\"{j}\")\n"));
    } else if let [only] = catalog.objects.as_slice() {
        text.push_str(&format!(
            "component progress weight 1 := 0 - dist(ee_position(), object_position(\"{only}\"))\n"
        ));
    } else if let (Some(first), Some(last)) = (catalog.objects.first(), catalog.objects.last()) {
        text.push_str(&format!(
            "component approach weight 1 := 0 - dist(ee_position(), object_position(\"{first}\"))\n\
             component holding weight 1 := is_grasped(\"{first}\")\n\
             component progress weight 1 := 0 - dist(object_position(\"{first}\"), object_position(\"{last}\"))\n"
        ));
    } else {
        text.push_str("component progress weight 1 := task_success()\n");
    }
    parse_program(&text).expect("default program parses")
}

fn overshoot_penalty(catalog: &EnvApiCatalog) -> Option<Component> {
    let speed = (0..catalog.actions.len().min(2)).map(|i| format!("abs(action({i}))")).collect::<Vec<_>>();
    if speed.is_empty() {
        return None;
    }
    let remaining = if let Some(j) = catalog.joints.first() {
        format!("joint_target(\"{j}\") - joint_value(\"{j}\")")
    } else {
        let o = catalog.objects.last()?;
        format!("dist(ee_position(), object_position(\"{o}\"))")
    };
    Some(component(&format!(
        "component overshoot_penalty weight 1 := 0 - clamp({} - ({remaining}), 0, 1)",
        speed.join(" + ")
    )))
}

fn scale(program: &RewardProgram, name: &str, factor: f64) -> RewardProgram {
    let w = program.component(name).map(|c| c.weight * factor).unwrap_or(1.0);
    program.set_weights(&BTreeMap::from([(name.to_string(), w)])).expect("component exists and weight is finite")
}

/// Refiner rule table; `None` means keep the program.
///
/// - empty program: the catalog's default program
/// - no problems: keep
/// - `no-progress`: progress weight (or the first component's) x2
/// - `overshoot`: add `overshoot_penalty`, or double it if present
/// - `wrong-object`: add `holding` on the first object, or double it if present
/// - only `stalled-at-stage`: progress weight x1.5
pub fn refine(program: &RewardProgram, feedback: &Feedback, catalog: &EnvApiCatalog) -> Option<RewardProgram> {
    if program.components.is_empty() {
        return Some(default_program(catalog));
    }
    if feedback.potential_problems.is_empty() {
        return None;
    }
    let progress = if program.component("progress").is_some() {
        "progress".to_string()
    } else {
        program.components[0].name.clone()
    };
    let mut out = program.clone();
    let mut changed = false;
    if feedback.has_tag(ProblemTag::NoProgress) {
        out = scale(&out, &progress, 2.0);
        changed = true;
    }
    if feedback.has_tag(ProblemTag::Overshoot) {
        if out.component("overshoot_penalty").is_some() {
            out = scale(&out, "overshoot_penalty", 2.0);
            changed = true;
        } else if let Some(c) = overshoot_penalty(catalog) {
            out = out.with_component(c);
            changed = true;
        }
    }
    if feedback.has_tag(ProblemTag::WrongObject) {
        if out.component("holding").is_some() {
            out = scale(&out, "holding", 2.0);
            changed = true;
        } else if let Some(o) = catalog.objects.first() {
            out = out.with_component(component(&format!("component holding weight 1 := is_grasped(\"{o}\")")));
            changed = true;
        }
    }
    if !changed {
        out = scale(&out, &progress, 1.5);
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critics::TranscriptRecord;
    use crate::dsl::check_program;
    use crate::env::hinge::THETA_MAX;
    use crate::env::{Environment, Fetch2d, Hinge1d, Reach2d, Snapshot};
    use crate::graph::validate;
    use crate::trainer::ComponentStats;

    fn snap(ee: [f64; 2], objects: &[(&str, [f64; 2])], lid: Option<f64>, stage: usize, gd: f64) -> Snapshot {
        Snapshot {
            ee,
            objects: objects.iter().map(|(n, p)| (n.to_string(), *p)).collect(),
            joints: lid.map(|v| ("lid".to_string(), v)).into_iter().collect(),
            grasped: objects.iter().map(|(n, _)| (n.to_string(), false)).collect(),
            stage,
            goal_distance: gd,
        }
    }

    fn transcript(snaps: Vec<Snapshot>, success: bool) -> RolloutTranscript {
        RolloutTranscript {
            task: "t".into(),
            seed: 0,
            length: snaps.len() - 1,
            records: snaps
                .into_iter()
                .enumerate()
                .map(|(step, snapshot)| TranscriptRecord { step, snapshot })
                .collect(),
            success,
            stats: ComponentStats::default(),
        }
    }

    fn hinge(lids: &[f64], success: bool) -> RolloutTranscript {
        let stage = |l: f64| if l >= 0.9 * THETA_MAX { 2 } else { 1 };
        transcript(
            lids.iter()
                .map(|&l| snap([0.3, 0.0], &[("handle", [0.3, 0.0])], Some(l), stage(l), THETA_MAX - l))
                .collect(),
            success,
        )
    }

    #[test]
    fn canned_graphs_validate() {
        for env in
            [Box::new(Hinge1d::new()) as Box<dyn Environment>, Box::new(Reach2d::new()), Box::new(Fetch2d::new())]
        {
            let g = graph_for(env.task(), false);
            assert!(validate(&g).is_empty(), "{}", env.id());
            assert_eq!(g.n_stages(), env.task().substeps.len() + 1);
            let skipped = graph_for(env.task(), true);
            assert!(validate(&skipped).iter().any(|v| v.rule == crate::graph::Rule::R3));
        }
        let g = graph_for(Hinge1d::new().task(), false);
        let ids: Vec<&str> = g.nodes().iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, ["approach", "at_handle", "opened"]);
        let mut generic = Hinge1d::builtin_task();
        generic.success_predicate_id = "custom".into();
        assert!(validate(&graph_for(&generic, false)).is_empty());
    }

    #[test]
    fn all_successful_means_no_problems() {
        let task = Hinge1d::builtin_task();
        let fb = evaluate(&task, &[hinge(&[0.0, 0.8, 1.45], true), hinge(&[0.0, 0.9, 1.5], true)]);
        assert!(fb.potential_problems.is_empty());
        assert!(fb.video_description.contains("all 2 rollouts succeeded"));
    }

    #[test]
    fn idle_hinge_is_no_progress() {
        let task = Hinge1d::builtin_task();
        let fb = evaluate(&task, &[hinge(&[0.0, 0.1, 0.3], false), hinge(&[0.0, 0.0, 0.0], false)]);
        assert!(fb.has_tag(ProblemTag::NoProgress));
        assert!(fb.has_tag(ProblemTag::StalledAtStage(1)));
        let moving = evaluate(&task, &[hinge(&[0.0, 0.5, 0.9], false)]);
        assert!(!moving.has_tag(ProblemTag::NoProgress));
    }

    #[test]
    fn mixed_success_is_partial() {
        let task = Hinge1d::builtin_task();
        let mut ts: Vec<_> = (0..3).map(|_| hinge(&[0.0, 1.0, 1.45], true)).collect();
        ts.extend((0..2).map(|_| hinge(&[0.0, 0.6, 0.8], false)));
        let fb = evaluate(&task, &ts);
        assert!(fb.video_description.contains("partial success: 3/5"));
        assert!(!fb.potential_problems.is_empty());
    }

    #[test]
    fn overshoot_and_wrong_object_rules() {
        let task = Reach2d::builtin_task();
        let t = [0.5, 0.0];
        let past = transcript(
            [[0.0, 0.0], [0.3, 0.0], [0.47, 0.0], [0.56, 0.0], [0.7, 0.0]]
                .iter()
                .map(|&ee| snap(ee, &[("target", t)], None, 0, distance(ee, t)))
                .collect(),
            false,
        );
        let fb = evaluate(&task, &[past]);
        assert!(fb.has_tag(ProblemTag::Overshoot));
        assert!(!fb.has_tag(ProblemTag::NoProgress));

        let task = Fetch2d::builtin_task();
        let item = [0.2, 0.2];
        let zone = [-0.4, 0.3];
        let brushed = transcript(
            vec![
                snap(item, &[("item", item), ("zone", zone)], None, 1, 0.0),
                snap([-0.2, 0.25], &[("item", item), ("zone", zone)], None, 1, 0.0),
                snap([-0.39, 0.3], &[("item", item), ("zone", zone)], None, 1, 0.0),
            ],
            false,
        );
        let fb = evaluate(&task, &[brushed]);
        assert!(fb.has_tag(ProblemTag::WrongObject));
        assert!(fb.potential_problems.iter().any(|p| p.text.contains("`zone`")));
    }

    #[test]
    fn refiner_rules() {
        let env = Hinge1d::new();
        let cat = env.catalog();
        let p = parse_program(
            "component progress weight 0.05 := joint_value(\"lid\") - 1.5708\ncomponent effort weight 5 := 0 - abs(action(0))",
        )
        .unwrap();
        let fb = |tags: &[ProblemTag]| Feedback {
            video_description: "d".into(),
            potential_problems: tags.iter().map(|t| Problem::tagged(*t, "x")).collect(),
            possible_improvements: vec![],
        };
        assert_eq!(refine(&p, &fb(&[]), cat), None);

        let q = refine(&p, &fb(&[ProblemTag::StalledAtStage(1), ProblemTag::NoProgress]), cat).unwrap();
        assert_eq!(q.component("progress").unwrap().weight, 0.1);
        assert_eq!(q.component("effort").unwrap().weight, 5.0);

        let q = refine(&p, &fb(&[ProblemTag::Overshoot]), cat).unwrap();
        let pen = q.component("overshoot_penalty").unwrap();
        assert!(pen.expr.to_string().contains("clamp"));
        check_program(&q, cat).unwrap();
        let q2 = refine(&q, &fb(&[ProblemTag::Overshoot]), cat).unwrap();
        assert_eq!(q2.component("overshoot_penalty").unwrap().weight, 2.0);

        let q = refine(&p, &fb(&[ProblemTag::StalledAtStage(1)]), cat).unwrap();
        assert!((q.component("progress").unwrap().weight - 0.075).abs() < 1e-15);
    }

    #[test]
    fn default_programs_check() {
        for env in
            [Box::new(Hinge1d::new()) as Box<dyn Environment>, Box::new(Reach2d::new()), Box::new(Fetch2d::new())]
        {
            let p = refine(&RewardProgram::empty(), &Feedback::initial(), env.catalog()).unwrap();
            check_program(&p, env.catalog()).unwrap();
            assert!(p.component("progress").is_some());
            let q = refine(
                &p,
                &Feedback {
                    potential_problems: vec![Problem::tagged(ProblemTag::WrongObject, "x")],
                    ..Feedback::initial()
                },
                env.catalog(),
            );
            if !env.catalog().objects.is_empty() {
                check_program(&q.unwrap(), env.catalog()).unwrap();
            }
        }
    }

    #[test]
    fn fault_injecting_rule_sets() {
        let env = Hinge1d::new();
        let req = super::super::graph_request(env.task(), env.catalog(), super::super::PromptMode::FewShot).unwrap();
        let mut b = ScriptedBackend::new(RuleSet::FailOnce);
        assert_eq!(b.complete(&req).unwrap(), MALFORMED_OUTPUT);
        assert_ne!(b.complete(&req).unwrap(), MALFORMED_OUTPUT);
        let mut d = ScriptedBackend::default();
        assert_eq!(d.complete(&req).unwrap(), d.complete(&req).unwrap());
        assert!("fail-once".parse::<RuleSet>().is_ok() && "nope".parse::<RuleSet>().is_err());
    }
}
