use super::{Policy, TrainError};
use crate::dsl::{CheckedProgram, RewardBreakdown};
use crate::env::{EnvState, Environment, Snapshot, SubstepKind};
use crate::seeding::{self, label};
use serde::{Deserialize, Serialize};

/// One transition: the pre-step state, the applied action and the reward
/// `R(s_t, a_t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub state: EnvState,
    pub snapshot: Snapshot,
    pub action: Vec<f64>,
    pub reward: RewardBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub steps: Vec<Step>,
    /// Snapshot after the last step (or after the initial primitives).
    pub final_snapshot: Snapshot,
    pub success: bool,
    pub length: usize,
}

impl Trajectory {
    pub fn totals(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.reward.total)
    }

    pub fn component_names(&self) -> Vec<String> {
        self.steps.first().map(|s| s.reward.values.iter().map(|(n, _)| n.clone()).collect()).unwrap_or_default()
    }
}

/// `sum_t gamma^t * total_t`.
pub fn discounted_return(traj: &Trajectory, gamma: f64) -> f64 {
    discounted(traj.totals(), gamma)
}

fn discounted(totals: impl Iterator<Item = f64>, gamma: f64) -> f64 {
    let mut acc = 0.0;
    let mut g = 1.0;
    for r in totals {
        acc += g * r;
        g *= gamma;
    }
    acc
}

/// Executes every primitive substep the pointer reaches and moves past
/// reward substeps whose postcondition already holds.
fn advance<E: Environment + ?Sized>(env: &E, state: EnvState, pointer: &mut usize) -> Result<EnvState, TrainError> {
    let substeps = &env.task().substeps;
    let mut state = state;
    while let Some(sub) = substeps.get(*pointer) {
        match sub.kind {
            SubstepKind::Primitive => {
                state = env.execute_primitive(&state, sub)?;
                *pointer += 1;
            }
            SubstepKind::Reward if env.stage(&state) > sub.index => *pointer += 1,
            SubstepKind::Reward => break,
        }
    }
    Ok(state)
}

/// Core episode loop. `visit` sees each pre-step state, the applied action,
/// the component values and the weighted total. Returns the final state.
pub(crate) fn run_episode<E: Environment + ?Sized>(
    policy: &Policy,
    env: &E,
    program: Option<&CheckedProgram>,
    seed: u64,
    horizon: usize,
    mut visit: impl FnMut(&EnvState, &[f64], &[f64], f64),
) -> Result<EnvState, TrainError> {
    policy.check_env(env)?;
    let horizon = horizon.min(env.task().horizon);
    let mut noise = seeding::rng(seeding::derive(seed, label::NOISE, 0));
    let mut pointer = 0;
    let mut state = advance(env, env.reset(seed)?, &mut pointer)?;
    let mut values = Vec::new();
    let mut taken = 0;
    while taken < horizon && !env.success(&state) {
        let action = env.action_spec().clamp(&policy.act(&env.features(&state), &mut noise));
        let total = match program {
            Some(p) => p.evaluate_into(env, &state, &action, &mut values),
            None => 0.0,
        };
        let next = env.step(&state, &action)?;
        visit(&state, &action, &values, total);
        taken += 1;
        state = advance(env, next, &mut pointer)?;
    }
    Ok(state)
}

/// Runs one episode from `seed` for at most `horizon` steps (capped at the
/// task horizon), ending early on success. Rewards are recorded when a
/// program is given; otherwise every breakdown is empty.
pub fn rollout<E: Environment + ?Sized>(
    policy: &Policy,
    env: &E,
    program: Option<&CheckedProgram>,
    seed: u64,
    horizon: usize,
) -> Result<Trajectory, TrainError> {
    let names: Vec<&str> = program.map(|p| p.program().names().collect()).unwrap_or_default();
    let mut steps = Vec::new();
    let last = run_episode(policy, env, program, seed, horizon, |state, action, values, total| {
        steps.push(Step {
            state: state.clone(),
            snapshot: env.snapshot(state),
            action: action.to_vec(),
            reward: RewardBreakdown {
                values: names.iter().zip(values).map(|(n, v)| (n.to_string(), *v)).collect(),
                total,
            },
        });
    })?;
    Ok(Trajectory {
        seed,
        length: steps.len(),
        success: env.success(&last),
        final_snapshot: env.snapshot(&last),
        steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub success_rate: f64,
    pub mean_episode_length: f64,
}

/// Noise-free evaluation over seeds `seed_base .. seed_base + n_episodes`.
pub fn evaluate_policy<E: Environment + ?Sized>(
    policy: &Policy,
    env: &E,
    n_episodes: usize,
    seed_base: u64,
) -> Result<EvalMetrics, TrainError> {
    use rayon::prelude::*;
    if n_episodes == 0 {
        return Err(TrainError::Config("n_episodes must be at least 1".into()));
    }
    let policy = policy.noiseless();
    let horizon = env.task().horizon;
    let results = (0..n_episodes as u64)
        .into_par_iter()
        .map(|i| {
            let mut length = 0;
            let last = run_episode(&policy, env, None, seed_base + i, horizon, |_, _, _, _| length += 1)?;
            Ok((env.success(&last), length))
        })
        .collect::<Result<Vec<_>, TrainError>>()?;
    let successes = results.iter().filter(|(s, _)| *s).count();
    let lengths: usize = results.iter().map(|(_, l)| l).sum();
    Ok(EvalMetrics {
        success_rate: successes as f64 / n_episodes as f64,
        mean_episode_length: lengths as f64 / n_episodes as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{check_program, parse_program};
    use crate::env::{Hinge1d, Reach2d};

    fn traj_with(totals: &[f64]) -> Trajectory {
        let env = Hinge1d::new();
        let s = Hinge1d::state_with_lid(0.0);
        let snap = env.snapshot(&s);
        Trajectory {
            seed: 0,
            steps: totals
                .iter()
                .map(|t| Step {
                    state: s.clone(),
                    snapshot: snap.clone(),
                    action: vec![0.0],
                    reward: RewardBreakdown { values: vec![], total: *t },
                })
                .collect(),
            final_snapshot: snap,
            success: false,
            length: totals.len(),
        }
    }

    #[test]
    fn discounted_return_fixtures() {
        assert_eq!(discounted_return(&traj_with(&[1.0, 1.0, 1.0]), 1.0), 3.0);
        assert_eq!(discounted_return(&traj_with(&[1.0, 1.0, 1.0]), 0.5), 1.75);
        assert_eq!(discounted_return(&traj_with(&[-2.5]), 0.3), -2.5);
    }

    #[test]
    fn always_open_policy_succeeds_at_step_eight() {
        let env = Hinge1d::new();
        let p = Policy::with_params(&env, vec![0.0, 1.0]).unwrap();
        let t = rollout(&p, &env, None, 4, 40).unwrap();
        assert!(t.success);
        assert_eq!(t.length, 8);
        let m = evaluate_policy(&p, &env, 10, 0).unwrap();
        assert_eq!(m, EvalMetrics { success_rate: 1.0, mean_episode_length: 8.0 });
    }

    #[test]
    fn idle_policy_runs_to_horizon() {
        let env = Hinge1d::new();
        let p = Policy::zeros(&env);
        let m = evaluate_policy(&p, &env, 5, 100).unwrap();
        assert_eq!(m, EvalMetrics { success_rate: 0.0, mean_episode_length: 40.0 });
    }

    #[test]
    fn primitive_runs_before_first_step() {
        let env = Hinge1d::new();
        let t = rollout(&Policy::zeros(&env), &env, None, 1, 3).unwrap();
        assert_eq!(t.steps[0].snapshot.stage, 1);
        assert_eq!(t.length, 3);
    }

    #[test]
    fn recorded_rewards_replay_exactly() {
        let env = Reach2d::new();
        let prog = check_program(
            &parse_program("component near weight 1 := 0 - dist(ee_position(), object_position(\"target\"))").unwrap(),
            env.catalog(),
        )
        .unwrap();
        let mut p = Policy::with_params(&env, vec![0.5, 0.0, 0.0, 0.0, 0.5, 0.0]).unwrap();
        p.noise = 0.01;
        let t = rollout(&p, &env, Some(&prog), 9, 50).unwrap();
        assert_eq!(t, rollout(&p, &env, Some(&prog), 9, 50).unwrap());
        for s in &t.steps {
            assert_eq!(prog.evaluate(&env, &s.state, &s.action), s.reward);
        }
    }
}
