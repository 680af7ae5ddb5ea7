//! Pick an item and carry it to a target zone.

use super::task::substeps;
use super::{
    distance, ActionSpec, Dim, EnvApiCatalog, EnvState, Environment, ObservationSpec, Substep, SubstepKind, TaskSpec,
};
use crate::seeding::{self, label};

pub const MAX_SPEED: f64 = 0.05;
pub const GRASP_RADIUS: f64 = 0.05;
pub const ZONE_RADIUS: f64 = 0.05;
/// Placement boxes `[x_lo, x_hi, y_lo, y_hi]` (invented).
pub const ITEM_BOX: [f64; 4] = [-0.6, -0.2, -0.4, 0.4];
pub const ZONE_BOX: [f64; 4] = [0.2, 0.6, -0.4, 0.4];

const EE_X: usize = 0;
const EE_Y: usize = 1;
const ITEM_X: usize = 2;
const ITEM_Y: usize = 3;
const ZONE_X: usize = 4;
const ZONE_Y: usize = 5;
const GRASPED: usize = 6;

#[derive(Debug, Clone)]
pub struct Fetch2d {
    task: TaskSpec,
    obs: ObservationSpec,
    act: ActionSpec,
    catalog: EnvApiCatalog,
}

impl Default for Fetch2d {
    fn default() -> Self {
        Self::new()
    }
}

impl Fetch2d {
    pub fn new() -> Self {
        Self::with_task(Self::builtin_task())
    }

    pub fn with_task(task: TaskSpec) -> Self {
        let obs = ObservationSpec::new(vec![
            Dim::new("ee_x", "m", -1.0, 1.0),
            Dim::new("ee_y", "m", -1.0, 1.0),
            Dim::new("item_x", "m", -1.0, 1.0),
            Dim::new("item_y", "m", -1.0, 1.0),
            Dim::new("zone_x", "m", -1.0, 1.0),
            Dim::new("zone_y", "m", -1.0, 1.0),
            Dim::new("grasped", "indicator", 0.0, 1.0),
        ])
        .expect("static spec");
        let act = ActionSpec::new(vec![
            Dim::new("vx", "m/step", -MAX_SPEED, MAX_SPEED),
            Dim::new("vy", "m/step", -MAX_SPEED, MAX_SPEED),
            Dim::new("grasp", "command", 0.0, 1.0),
        ])
        .expect("static spec");
        Self { task, obs, act, catalog: EnvApiCatalog::standard(&["item", "zone"], &[], &["vx", "vy", "grasp"]) }
    }

    pub fn builtin_task() -> TaskSpec {
        TaskSpec {
            schema_version: super::TASK_SCHEMA_VERSION,
            name: "store_item".into(),
            goal_description: "Pick up the item from the table and place it inside the storage zone.".into(),
            substeps: substeps(&[
                ("move the gripper to the item", SubstepKind::Primitive),
                ("grasp the item", SubstepKind::Reward),
                ("carry the item into the storage zone", SubstepKind::Reward),
            ]),
            success_predicate_id: "item_in_zone".into(),
            horizon: 60,
            seed_space: Default::default(),
        }
    }

    fn grasped(state: &EnvState) -> bool {
        state.values[GRASPED] > 0.5
    }
}

impl Environment for Fetch2d {
    fn id(&self) -> &'static str {
        "fetch2d"
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
        let pick = |b: [f64; 4], i: u64| {
            [
                b[0] + (b[1] - b[0]) * seeding::unit(seed, label::PLACEMENT, i),
                b[2] + (b[3] - b[2]) * seeding::unit(seed, label::PLACEMENT, i + 1),
            ]
        };
        let item = pick(ITEM_BOX, 0);
        let zone = pick(ZONE_BOX, 2);
        vec![0.0, 0.0, item[0], item[1], zone[0], zone[1], 0.0]
    }

    fn integrate(&self, values: &[f64], action: &[f64]) -> Vec<f64> {
        let mut next = values.to_vec();
        next[EE_X] = (values[EE_X] + action[0]).clamp(-1.0, 1.0);
        next[EE_Y] = (values[EE_Y] + action[1]).clamp(-1.0, 1.0);
        let ee = [next[EE_X], next[EE_Y]];
        let held = values[GRASPED] > 0.5;
        // Grasp latches on proximity plus a closed gripper command.
        if held || (action[2] > 0.5 && distance(ee, [values[ITEM_X], values[ITEM_Y]]) <= GRASP_RADIUS) {
            next[GRASPED] = 1.0;
            next[ITEM_X] = ee[0];
            next[ITEM_Y] = ee[1];
        }
        next
    }

    fn apply_primitive(&self, values: &[f64], substep: &Substep) -> Option<Vec<f64>> {
        (substep.index == 0).then(|| {
            let mut next = values.to_vec();
            next[EE_X] = values[ITEM_X];
            next[EE_Y] = values[ITEM_Y];
            next
        })
    }

    fn ee_position(&self, state: &EnvState) -> [f64; 2] {
        [state.values[EE_X], state.values[EE_Y]]
    }
    fn object_position(&self, state: &EnvState, name: &str) -> Option<[f64; 2]> {
        let v = &state.values;
        match name {
            "item" => Some([v[ITEM_X], v[ITEM_Y]]),
            "zone" => Some([v[ZONE_X], v[ZONE_Y]]),
            _ => None,
        }
    }
    fn joint_value(&self, _state: &EnvState, _name: &str) -> Option<f64> {
        None
    }
    fn joint_target(&self, _name: &str) -> Option<f64> {
        None
    }
    fn is_grasped(&self, state: &EnvState, name: &str) -> Option<bool> {
        match name {
            "item" => Some(Self::grasped(state)),
            "zone" => Some(false),
            _ => None,
        }
    }

    fn success(&self, state: &EnvState) -> bool {
        let v = &state.values;
        Self::grasped(state) && distance([v[ITEM_X], v[ITEM_Y]], [v[ZONE_X], v[ZONE_Y]]) <= ZONE_RADIUS
    }

    fn stage(&self, state: &EnvState) -> usize {
        let v = &state.values;
        if self.success(state) {
            3
        } else if Self::grasped(state) {
            2
        } else if distance(self.ee_position(state), [v[ITEM_X], v[ITEM_Y]]) <= GRASP_RADIUS {
            1
        } else {
            0
        }
    }

    fn goal_distance(&self, state: &EnvState) -> f64 {
        let v = &state.values;
        if Self::grasped(state) {
            distance([v[ITEM_X], v[ITEM_Y]], [v[ZONE_X], v[ZONE_Y]])
        } else {
            distance(self.ee_position(state), [v[ITEM_X], v[ITEM_Y]])
        }
    }

    fn features(&self, state: &EnvState) -> Vec<f64> {
        let v = &state.values;
        vec![v[ITEM_X] - v[EE_X], v[ITEM_Y] - v[EE_Y], v[ZONE_X] - v[EE_X], v[ZONE_Y] - v[EE_Y], v[GRASPED], 1.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ApiValue;

    #[test]
    fn not_grasped_at_reset() {
        let env = Fetch2d::new();
        let s = env.reset(11).unwrap();
        assert_eq!(env.api_call(&s, "is_grasped", &[ApiValue::Name("item".into())]).unwrap(), ApiValue::Scalar(0.0));
    }

    #[test]
    fn approach_then_grasp_then_carry() {
        let env = Fetch2d::new();
        let s = env.reset(3).unwrap();
        let s = env.execute_primitive(&s, &env.task().substeps[0]).unwrap();
        let item = env.object_position(&s, "item").unwrap();
        assert!(distance(env.ee_position(&s), item) <= GRASP_RADIUS);
        assert_eq!(env.stage(&s), 1);

        // open gripper: no latch
        let s1 = env.step(&s, &[0.0, 0.0, 0.2]).unwrap();
        assert!(!env.is_grasped(&s1, "item").unwrap());
        let mut s = env.step(&s1, &[0.0, 0.0, 1.0]).unwrap();
        assert!(env.is_grasped(&s, "item").unwrap());

        let zone = env.object_position(&s, "zone").unwrap();
        while !env.success(&s) {
            let ee = env.ee_position(&s);
            s = env.step(&s, &[zone[0] - ee[0], zone[1] - ee[1], 0.0]).unwrap();
        }
        assert_eq!(env.stage(&s), 3);
        // item travels with the gripper, the latch holds with an open command
        assert_eq!(env.object_position(&s, "item").unwrap(), env.ee_position(&s));
    }

    #[test]
    fn grasp_needs_proximity() {
        let env = Fetch2d::new();
        let s = env.reset(3).unwrap();
        let s = env.step(&s, &[0.0, 0.0, 1.0]).unwrap();
        assert!(!env.is_grasped(&s, "item").unwrap());
    }
}
