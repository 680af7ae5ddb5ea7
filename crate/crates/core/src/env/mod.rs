//! Environment abstraction and the built-in desk-scale manipulation tasks.
//!
//! An environment is an immutable description (spaces, API catalog, task)
//! plus pure functions over [`EnvState`] values. Stepping returns a new state
//! and never mutates the environment, so rollouts can run on any number of
//! workers at once.

mod catalog;
mod fetch;
pub(crate) mod hinge;
mod reach;
mod task;

pub use catalog::{ApiSignature, ApiValue, ArgSpec, EnvApiCatalog, SemType};
pub use fetch::Fetch2d;
pub use hinge::Hinge1d;
pub use reach::Reach2d;
pub use task::{SeedSpace, Substep, SubstepKind, TaskSpec, TASK_SCHEMA_VERSION};

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Ids of the registered environments.
pub const ENV_IDS: [&str; 3] = ["hinge1d", "reach2d", "fetch2d"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("unknown environment id `{0}` (known: hinge1d, reach2d, fetch2d)")]
    UnknownEnv(String),
    #[error("seed {seed} outside the task seed space [{start}, {end}]")]
    SeedOutOfRange { seed: u64, start: u64, end: u64 },
    #[error("action has {got} dimensions, expected {expected}")]
    ActionDims { expected: usize, got: usize },
    #[error("cannot step past the horizon of {horizon} steps")]
    HorizonExceeded { horizon: usize },
    #[error("unknown API `{0}`")]
    UnknownApi(String),
    #[error("bad arguments for `{name}`: {reason}")]
    BadArguments { name: String, reason: String },
    #[error("substep {index} (`{description}`) is a reward substep and cannot be executed as a primitive")]
    NotPrimitive { index: usize, description: String },
    #[error("environment has no scripted primitive for substep {0}")]
    NoPrimitive(usize),
    #[error("invalid task spec: {0}")]
    InvalidTask(String),
}

/// One named, bounded scalar dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dim {
    pub name: String,
    pub unit: String,
    pub low: f64,
    pub high: f64,
}

impl Dim {
    pub fn new(name: &str, unit: &str, low: f64, high: f64) -> Self {
        Self { name: name.to_string(), unit: unit.to_string(), low, high }
    }
}

fn check_dims(dims: &[Dim], strict: bool) -> Result<(), String> {
    let mut seen = std::collections::HashSet::new();
    for d in dims {
        if !d.low.is_finite() || !d.high.is_finite() {
            return Err(format!("dimension `{}` has non-finite bounds", d.name));
        }
        if (strict && d.low >= d.high) || d.low > d.high {
            return Err(format!("dimension `{}` has empty bounds", d.name));
        }
        if !seen.insert(d.name.as_str()) {
            return Err(format!("duplicate dimension `{}`", d.name));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSpec {
    pub dims: Vec<Dim>,
}

impl ObservationSpec {
    pub fn new(dims: Vec<Dim>) -> Result<Self, String> {
        check_dims(&dims, false)?;
        Ok(Self { dims })
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }

    pub fn clamp(&self, values: &mut [f64]) {
        for (v, d) in values.iter_mut().zip(&self.dims) {
            *v = v.clamp(d.low, d.high);
        }
    }

    pub fn contains(&self, values: &[f64]) -> bool {
        values.len() == self.dims.len() && values.iter().zip(&self.dims).all(|(v, d)| *v >= d.low && *v <= d.high)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub dims: Vec<Dim>,
}

impl ActionSpec {
    pub fn new(dims: Vec<Dim>) -> Result<Self, String> {
        check_dims(&dims, true)?;
        Ok(Self { dims })
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn clamp(&self, action: &[f64]) -> Vec<f64> {
        action.iter().zip(&self.dims).map(|(a, d)| a.clamp(d.low, d.high)).collect()
    }
}

/// Environment state: one value per observation dimension plus the step
/// counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub values: Vec<f64>,
    pub step: usize,
}

/// What a critic may observe about a state: everything reachable through the
/// API catalog, plus the furthest task stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub ee: [f64; 2],
    pub objects: BTreeMap<String, [f64; 2]>,
    pub joints: BTreeMap<String, f64>,
    pub grasped: BTreeMap<String, bool>,
    pub stage: usize,
    /// Remaining distance to the current sub-goal in the task's native unit.
    pub goal_distance: f64,
}

/// The environment contract.
///
/// Implementors supply the task-specific dynamics and accessors; the provided
/// methods layer the shared contract on top (seed checks, action clamping,
/// horizon enforcement, API dispatch).
pub trait Environment: Send + Sync {
    fn id(&self) -> &'static str;
    fn task(&self) -> &TaskSpec;
    fn observation_spec(&self) -> &ObservationSpec;
    fn action_spec(&self) -> &ActionSpec;
    fn catalog(&self) -> &EnvApiCatalog;

    /// Raw initial values for a seed; clamped by [`Environment::reset`].
    fn initial_values(&self, seed: u64) -> Vec<f64>;
    /// One step of dynamics on an already-clamped action.
    fn integrate(&self, values: &[f64], action: &[f64]) -> Vec<f64>;
    /// Scripted transformation achieving the postcondition of a primitive.
    fn apply_primitive(&self, values: &[f64], substep: &Substep) -> Option<Vec<f64>>;

    fn ee_position(&self, state: &EnvState) -> [f64; 2];
    fn object_position(&self, state: &EnvState, name: &str) -> Option<[f64; 2]>;
    fn joint_value(&self, state: &EnvState, name: &str) -> Option<f64>;
    fn joint_target(&self, name: &str) -> Option<f64>;
    fn is_grasped(&self, state: &EnvState, name: &str) -> Option<bool>;

    fn success(&self, state: &EnvState) -> bool;
    /// Number of substeps whose postcondition holds in `state`.
    fn stage(&self, state: &EnvState) -> usize;
    fn goal_distance(&self, state: &EnvState) -> f64;
    /// Policy features; the last entry is a constant bias term.
    fn features(&self, state: &EnvState) -> Vec<f64>;

    fn reset(&self, seed: u64) -> Result<EnvState, EnvError> {
        let space = self.task().seed_space;
        if !space.contains(seed) {
            return Err(EnvError::SeedOutOfRange { seed, start: space.start, end: space.end });
        }
        let mut values = self.initial_values(seed);
        self.observation_spec().clamp(&mut values);
        Ok(EnvState { values, step: 0 })
    }

    fn step(&self, state: &EnvState, action: &[f64]) -> Result<EnvState, EnvError> {
        let spec = self.action_spec();
        if action.len() != spec.len() {
            return Err(EnvError::ActionDims { expected: spec.len(), got: action.len() });
        }
        let horizon = self.task().horizon;
        if state.step >= horizon {
            return Err(EnvError::HorizonExceeded { horizon });
        }
        let action = spec.clamp(action);
        let mut values = self.integrate(&state.values, &action);
        self.observation_spec().clamp(&mut values);
        Ok(EnvState { values, step: state.step + 1 })
    }

    fn api_call(&self, state: &EnvState, name: &str, args: &[ApiValue]) -> Result<ApiValue, EnvError> {
        let sig = self.catalog().get(name).ok_or_else(|| EnvError::UnknownApi(name.to_string()))?;
        if args.len() != sig.args.len() {
            return Err(EnvError::BadArguments {
                name: name.to_string(),
                reason: format!("expected {} arguments, got {}", sig.args.len(), args.len()),
            });
        }
        let bad = |reason: String| EnvError::BadArguments { name: name.to_string(), reason };
        let text_arg = |i: usize| match &args[i] {
            ApiValue::Name(s) => Ok(s.as_str()),
            other => Err(bad(format!("argument {i} must be a name, got {other:?}"))),
        };
        let vec_arg = |i: usize| match &args[i] {
            ApiValue::Vec2(v) => Ok(*v),
            other => Err(bad(format!("argument {i} must be a vec2, got {other:?}"))),
        };
        let unknown = |kind: &str, n: &str| bad(format!("unknown {kind} `{n}`"));
        match name {
            "ee_position" => Ok(ApiValue::Vec2(self.ee_position(state))),
            "object_position" => {
                let n = text_arg(0)?;
                self.object_position(state, n).map(ApiValue::Vec2).ok_or_else(|| unknown("object", n))
            }
            "joint_value" => {
                let n = text_arg(0)?;
                self.joint_value(state, n).map(ApiValue::Scalar).ok_or_else(|| unknown("joint", n))
            }
            "joint_target" => {
                let n = text_arg(0)?;
                self.joint_target(n).map(ApiValue::Scalar).ok_or_else(|| unknown("joint", n))
            }
            "is_grasped" => {
                let n = text_arg(0)?;
                self.is_grasped(state, n)
                    .map(|g| ApiValue::Scalar(if g { 1.0 } else { 0.0 }))
                    .ok_or_else(|| unknown("object", n))
            }
            "distance" => {
                let (a, b) = (vec_arg(0)?, vec_arg(1)?);
                Ok(ApiValue::Scalar(distance(a, b)))
            }
            // No physics: the toy tasks never collide.
            "detect_collision" => Ok(ApiValue::Scalar(0.0)),
            "task_success" => Ok(ApiValue::Scalar(if self.success(state) { 1.0 } else { 0.0 })),
            other => Err(EnvError::UnknownApi(other.to_string())),
        }
    }

    fn execute_primitive(&self, state: &EnvState, substep: &Substep) -> Result<EnvState, EnvError> {
        if substep.kind != SubstepKind::Primitive {
            return Err(EnvError::NotPrimitive { index: substep.index, description: substep.description.clone() });
        }
        let mut values = self.apply_primitive(&state.values, substep).ok_or(EnvError::NoPrimitive(substep.index))?;
        self.observation_spec().clamp(&mut values);
        Ok(EnvState { values, step: state.step })
    }

    fn snapshot(&self, state: &EnvState) -> Snapshot {
        let cat = self.catalog();
        Snapshot {
            ee: self.ee_position(state),
            objects: cat
                .objects
                .iter()
                .filter_map(|o| self.object_position(state, o).map(|p| (o.clone(), p)))
                .collect(),
            joints: cat.joints.iter().filter_map(|j| self.joint_value(state, j).map(|v| (j.clone(), v))).collect(),
            grasped: cat.objects.iter().filter_map(|o| self.is_grasped(state, o).map(|g| (o.clone(), g))).collect(),
            stage: self.stage(state),
            goal_distance: self.goal_distance(state),
        }
    }
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Looks up a registered environment with its built-in task.
pub fn make_env(id: &str) -> Result<Box<dyn Environment>, EnvError> {
    match id {
        "hinge1d" => Ok(Box::new(Hinge1d::new())),
        "reach2d" => Ok(Box::new(Reach2d::new())),
        "fetch2d" => Ok(Box::new(Fetch2d::new())),
        other => Err(EnvError::UnknownEnv(other.to_string())),
    }
}

/// Looks up a registered environment and installs a custom task.
///
/// The task must keep the environment's substep ladder (same count and kinds)
/// and success predicate; names, descriptions, horizon and seed space are free.
pub fn make_env_with_task(id: &str, task: TaskSpec) -> Result<Box<dyn Environment>, EnvError> {
    task.validate().map_err(EnvError::InvalidTask)?;
    let builtin = make_env(id)?;
    let base = builtin.task();
    if task.success_predicate_id != base.success_predicate_id {
        return Err(EnvError::InvalidTask(format!(
            "success predicate `{}` is not provided by {id} (expected `{}`)",
            task.success_predicate_id, base.success_predicate_id
        )));
    }
    let kinds = |t: &TaskSpec| t.substeps.iter().map(|s| s.kind).collect::<Vec<_>>();
    if kinds(&task) != kinds(base) {
        return Err(EnvError::InvalidTask(format!(
            "substep kinds {:?} do not match the {id} ladder {:?}",
            kinds(&task),
            kinds(base)
        )));
    }
    Ok(match id {
        "hinge1d" => Box::new(Hinge1d::with_task(task)),
        "reach2d" => Box::new(Reach2d::with_task(task)),
        _ => Box::new(Fetch2d::with_task(task)),
    })
}
