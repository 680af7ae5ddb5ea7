//! Single revolute joint task ("open the lid / door / knob").

use super::task::substeps;
use super::{
    distance, ActionSpec, Dim, EnvApiCatalog, EnvState, Environment, ObservationSpec, Substep, SubstepKind, TaskSpec,
};
use crate::seeding::{self, label};

#[allow(clippy::approx_constant)]
pub const THETA_MAX: f64 = 1.5708;
pub const SUCCESS_FRACTION: f64 = 0.9;
pub const MAX_JOINT_SPEED: f64 = 0.2;
const AT_HANDLE: f64 = 0.05;

const EE_X: usize = 0;
const EE_Y: usize = 1;
const HANDLE_X: usize = 2;
const HANDLE_Y: usize = 3;
const LID: usize = 4;

#[derive(Debug, Clone)]
pub struct Hinge1d {
    task: TaskSpec,
    obs: ObservationSpec,
    act: ActionSpec,
    catalog: EnvApiCatalog,
}

impl Default for Hinge1d {
    fn default() -> Self {
        Self::new()
    }
}

impl Hinge1d {
    pub fn new() -> Self {
        Self::with_task(Self::builtin_task())
    }

    pub fn with_task(task: TaskSpec) -> Self {
        let obs = ObservationSpec::new(vec![
            Dim::new("ee_x", "m", -1.0, 1.0),
            Dim::new("ee_y", "m", -1.0, 1.0),
            Dim::new("handle_x", "m", -1.0, 1.0),
            Dim::new("handle_y", "m", -1.0, 1.0),
            Dim::new("lid", "rad", 0.0, THETA_MAX),
        ])
        .expect("static spec");
        let act = ActionSpec::new(vec![Dim::new("lid_velocity", "rad/step", -MAX_JOINT_SPEED, MAX_JOINT_SPEED)])
            .expect("static spec");
        Self { task, obs, act, catalog: EnvApiCatalog::standard(&["handle"], &["lid"], &["lid_velocity"]) }
    }

    pub fn builtin_task() -> TaskSpec {
        TaskSpec {
            schema_version: super::TASK_SCHEMA_VERSION,
            name: "open_lid".into(),
            goal_description: "Open the dispenser lid by rotating it about its hinge until it is at least 90% of \
                               the way to fully open. The lid handle sits on the table in front of the robot."
                .into(),
            substeps: substeps(&[
                ("move the gripper to the lid handle", SubstepKind::Primitive),
                ("rotate the lid open about its hinge", SubstepKind::Reward),
            ]),
            success_predicate_id: "hinge_open".into(),
            horizon: 40,
            seed_space: Default::default(),
        }
    }

    pub fn success_threshold() -> f64 {
        SUCCESS_FRACTION * THETA_MAX
    }

    /// Builds a state directly from the lid angle, with the gripper at the
    /// origin and the handle at a fixed pose.
    pub fn state_with_lid(lid: f64) -> EnvState {
        EnvState { values: vec![0.0, 0.0, 0.5, 0.0, lid], step: 0 }
    }
}

impl Environment for Hinge1d {
    fn id(&self) -> &'static str {
        "hinge1d"
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
        // Handle placement box (invented): x in [0.3, 0.7], y in [-0.3, 0.3].
        let hx = 0.3 + 0.4 * seeding::unit(seed, label::PLACEMENT, 0);
        let hy = -0.3 + 0.6 * seeding::unit(seed, label::PLACEMENT, 1);
        vec![0.0, 0.0, hx, hy, 0.0]
    }

    fn integrate(&self, values: &[f64], action: &[f64]) -> Vec<f64> {
        let mut next = values.to_vec();
        next[LID] += action[0];
        next
    }

    fn apply_primitive(&self, values: &[f64], substep: &Substep) -> Option<Vec<f64>> {
        (substep.index == 0).then(|| {
            let mut next = values.to_vec();
            next[EE_X] = values[HANDLE_X];
            next[EE_Y] = values[HANDLE_Y];
            next
        })
    }

    fn ee_position(&self, state: &EnvState) -> [f64; 2] {
        [state.values[EE_X], state.values[EE_Y]]
    }
    fn object_position(&self, state: &EnvState, name: &str) -> Option<[f64; 2]> {
        (name == "handle").then(|| [state.values[HANDLE_X], state.values[HANDLE_Y]])
    }
    fn joint_value(&self, state: &EnvState, name: &str) -> Option<f64> {
        (name == "lid").then(|| state.values[LID])
    }
    fn joint_target(&self, name: &str) -> Option<f64> {
        (name == "lid").then_some(THETA_MAX)
    }
    fn is_grasped(&self, _state: &EnvState, name: &str) -> Option<bool> {
        (name == "handle").then_some(false)
    }

    fn success(&self, state: &EnvState) -> bool {
        state.values[LID] >= Self::success_threshold()
    }

    fn stage(&self, state: &EnvState) -> usize {
        if self.success(state) {
            2
        } else if distance(self.ee_position(state), [state.values[HANDLE_X], state.values[HANDLE_Y]]) <= AT_HANDLE {
            1
        } else {
            0
        }
    }

    fn goal_distance(&self, state: &EnvState) -> f64 {
        (Self::success_threshold() - state.values[LID]).max(0.0)
    }

    fn features(&self, state: &EnvState) -> Vec<f64> {
        vec![state.values[LID] / THETA_MAX, 1.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ApiValue;

    #[test]
    fn reset_starts_closed() {
        let env = Hinge1d::new();
        for seed in [0, 1, 99, 123_456] {
            let s = env.reset(seed).unwrap();
            assert_eq!(s.values[LID], 0.0);
            assert_eq!(s.step, 0);
            assert_eq!(
                env.api_call(&s, "joint_value", &[ApiValue::Name("lid".into())]).unwrap(),
                ApiValue::Scalar(0.0)
            );
        }
    }

    #[test]
    fn unit_integration_and_clamp() {
        let env = Hinge1d::new();
        let s = env.step(&Hinge1d::state_with_lid(0.0), &[0.2]).unwrap();
        assert_eq!(s.values[LID], 0.2);
        assert_eq!(s.step, 1);
        let s = env.step(&Hinge1d::state_with_lid(THETA_MAX), &[0.2]).unwrap();
        assert_eq!(s.values[LID], THETA_MAX);
        // out-of-range commands clamp to the action bounds first
        let s = env.step(&Hinge1d::state_with_lid(0.0), &[5.0]).unwrap();
        assert_eq!(s.values[LID], 0.2);
    }

    #[test]
    fn success_threshold_arithmetic() {
        let env = Hinge1d::new();
        assert!(env.success(&Hinge1d::state_with_lid(1.5)));
        assert!(!env.success(&Hinge1d::state_with_lid(1.0)));
    }

    #[test]
    fn primitive_moves_to_handle_exactly() {
        let env = Hinge1d::new();
        let s = env.reset(5).unwrap();
        let s2 = env.execute_primitive(&s, &env.task().substeps[0]).unwrap();
        assert_eq!(env.ee_position(&s2), env.object_position(&s2, "handle").unwrap());
        assert_eq!(env.stage(&s2), 1);
        assert_eq!(s2.step, s.step);
    }
}
