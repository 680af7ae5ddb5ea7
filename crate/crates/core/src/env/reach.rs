//! Planar point reaching.

use super::task::substeps;
use super::{
    distance, ActionSpec, Dim, EnvApiCatalog, EnvState, Environment, ObservationSpec, Substep, SubstepKind, TaskSpec,
};
use crate::seeding::{self, label};

pub const MAX_SPEED: f64 = 0.05;
pub const SUCCESS_RADIUS: f64 = 0.05;
/// Target placement box `[x_lo, x_hi, y_lo, y_hi]` (invented; the source
/// randomization ranges are not published).
pub const TARGET_BOX: [f64; 4] = [-0.5, 0.5, 0.2, 0.6];

const EE_X: usize = 0;
const EE_Y: usize = 1;
const TARGET_X: usize = 2;
const TARGET_Y: usize = 3;

#[derive(Debug, Clone)]
pub struct Reach2d {
    task: TaskSpec,
    obs: ObservationSpec,
    act: ActionSpec,
    catalog: EnvApiCatalog,
}

impl Default for Reach2d {
    fn default() -> Self {
        Self::new()
    }
}

impl Reach2d {
    pub fn new() -> Self {
        Self::with_task(Self::builtin_task())
    }

    pub fn with_task(task: TaskSpec) -> Self {
        let obs = ObservationSpec::new(vec![
            Dim::new("ee_x", "m", -1.0, 1.0),
            Dim::new("ee_y", "m", -1.0, 1.0),
            Dim::new("target_x", "m", -1.0, 1.0),
            Dim::new("target_y", "m", -1.0, 1.0),
        ])
        .expect("static spec");
        let act = ActionSpec::new(vec![
            Dim::new("vx", "m/step", -MAX_SPEED, MAX_SPEED),
            Dim::new("vy", "m/step", -MAX_SPEED, MAX_SPEED),
        ])
        .expect("static spec");
        Self { task, obs, act, catalog: EnvApiCatalog::standard(&["target"], &[], &["vx", "vy"]) }
    }

    pub fn builtin_task() -> TaskSpec {
        TaskSpec {
            schema_version: super::TASK_SCHEMA_VERSION,
            name: "reach_target".into(),
            goal_description: "Move the gripper to within 5 cm of the target marker on the table.".into(),
            substeps: substeps(&[("move the gripper to the target marker", SubstepKind::Reward)]),
            success_predicate_id: "reach_target".into(),
            horizon: 50,
            seed_space: Default::default(),
        }
    }

    pub fn state_at(ee: [f64; 2], target: [f64; 2]) -> EnvState {
        EnvState { values: vec![ee[0], ee[1], target[0], target[1]], step: 0 }
    }
}

impl Environment for Reach2d {
    fn id(&self) -> &'static str {
        "reach2d"
    }
    fn task(&self) -> &TaskSpec {
        &self.task
    }
    fn observation_spec(&self) -> &ObservationSpec {
        &self.obs
    }
    fn action_spec(&self) -> &ActionSpec {
        &self.act
    }
    fn catalog(&self) -> &EnvApiCatalog {
        &self.catalog
    }

    fn initial_values(&self, seed: u64) -> Vec<f64> {
        let [x0, x1, y0, y1] = TARGET_BOX;
        let tx = x0 + (x1 - x0) * seeding::unit(seed, label::PLACEMENT, 0);
        let ty = y0 + (y1 - y0) * seeding::unit(seed, label::PLACEMENT, 1);
        vec![0.0, 0.0, tx, ty]
    }

    fn integrate(&self, values: &[f64], action: &[f64]) -> Vec<f64> {
        let mut next = values.to_vec();
        next[EE_X] += action[0];
        next[EE_Y] += action[1];
        next
    }

    fn apply_primitive(&self, _values: &[f64], _substep: &Substep) -> Option<Vec<f64>> {
        None
    }

    fn ee_position(&self, state: &EnvState) -> [f64; 2] {
        [state.values[EE_X], state.values[EE_Y]]
    }
    fn object_position(&self, state: &EnvState, name: &str) -> Option<[f64; 2]> {
        (name == "target").then(|| [state.values[TARGET_X], state.values[TARGET_Y]])
    }
    fn joint_value(&self, _state: &EnvState, _name: &str) -> Option<f64> {
        None
    }
    fn joint_target(&self, _name: &str) -> Option<f64> {
        None
    }
    fn is_grasped(&self, _state: &EnvState, name: &str) -> Option<bool> {
        (name == "target").then_some(false)
    }

    fn success(&self, state: &EnvState) -> bool {
        self.goal_distance(state) <= SUCCESS_RADIUS
    }

    fn stage(&self, state: &EnvState) -> usize {
        usize::from(self.success(state))
    }

    fn goal_distance(&self, state: &EnvState) -> f64 {
        distance(self.ee_position(state), [state.values[TARGET_X], state.values[TARGET_Y]])
    }

    fn features(&self, state: &EnvState) -> Vec<f64> {
        let v = &state.values;
        vec![v[TARGET_X] - v[EE_X], v[TARGET_Y] - v[EE_Y], 1.0]
    }
}
