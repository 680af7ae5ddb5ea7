use serde::{Deserialize, Serialize};
use std::path::Path;

/// Current version of the task-spec JSON schema.
pub const TASK_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubstepKind {
    /// Executed by a scripted motion and assumed to succeed.
    Primitive,
    /// Requires a trained policy.
    Reward,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substep {
    pub index: usize,
    pub description: String,
    pub kind: SubstepKind,
}

/// Inclusive range of admissible reset seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpace {
    pub start: u64,
    pub end: u64,
}

impl SeedSpace {
    pub fn contains(&self, seed: u64) -> bool {
        seed >= self.start && seed <= self.end
    }

    /// Maps an arbitrary 64-bit value into the space.
    pub fn wrap(&self, raw: u64) -> u64 {
        let width = self.end - self.start;
        if width == u64::MAX {
            raw
        } else {
            self.start + raw % (width + 1)
        }
    }
}

impl Default for SeedSpace {
    fn default() -> Self {
        Self { start: 0, end: u64::from(u32::MAX) }
    }
}

/// Task description handed to critics and used to drive primitives.
///
/// Stored on disk as JSON:
///
/// ```json
/// {
///   "schema_version": 1,
///   "name": "open_lid",
///   "goal_description": "Open the dispenser lid.",
///   "substeps": [
///     {"index": 0, "description": "move to the lid handle", "kind": "primitive"},
///     {"index": 1, "description": "rotate the lid open", "kind": "reward"}
///   ],
///   "success_predicate_id": "hinge_open",
///   "horizon": 40,
///   "seed_space": {"start": 0, "end": 4294967295}
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub schema_version: u32,
    pub name: String,
    pub goal_description: String,
    pub substeps: Vec<Substep>,
    pub success_predicate_id: String,
    pub horizon: usize,
    #[serde(default)]
    pub seed_space: SeedSpace,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.schema_version != TASK_SCHEMA_VERSION {
            return Err(format!(
                "schema_version {} is not supported (expected {TASK_SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.horizon == 0 {
            return Err("horizon must be at least 1".into());
        }
        if !self.substeps.iter().any(|s| s.kind == SubstepKind::Reward) {
            return Err("a task needs at least one reward substep".into());
        }
        for (i, s) in self.substeps.iter().enumerate() {
            if s.index != i {
                return Err(format!("substep at position {i} has index {}", s.index));
            }
        }
        if self.seed_space.start > self.seed_space.end {
            return Err("seed space is empty".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let task: TaskSpec = serde_json::from_str(text).map_err(|e| e.to_string())?;
        task.validate()?;
        Ok(task)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("task spec serializes")
    }

    pub fn reward_substeps(&self) -> impl Iterator<Item = &Substep> {
        self.substeps.iter().filter(|s| s.kind == SubstepKind::Reward)
    }

    /// Prompt-facing substep list.
    pub fn render_substeps(&self) -> String {
        self.substeps
            .iter()
            .map(|s| {
                let kind = match s.kind {
                    SubstepKind::Primitive => "primitive",
                    SubstepKind::Reward => "reward",
                };
                format!("{}. [{kind}] {}\n", s.index + 1, s.description)
            })
            .collect()
    }
}

pub(crate) fn substeps(spec: &[(&str, SubstepKind)]) -> Vec<Substep> {
    spec.iter()
        .enumerate()
        .map(|(index, (d, kind))| Substep { index, description: d.to_string(), kind: *kind })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TaskSpec {
        TaskSpec {
            schema_version: 1,
            name: "t".into(),
            goal_description: "g".into(),
            substeps: substeps(&[("a", SubstepKind::Primitive), ("b", SubstepKind::Reward)]),
            success_predicate_id: "p".into(),
            horizon: 10,
            seed_space: SeedSpace::default(),
        }
    }

    #[test]
    fn json_round_trip() {
        let t = sample();
        assert_eq!(TaskSpec::from_json(&t.to_json()).unwrap(), t);
    }

    #[test]
    fn needs_reward_substep_and_horizon() {
        let mut t = sample();
        t.substeps[1].kind = SubstepKind::Primitive;
        assert!(t.validate().is_err());
        let mut t = sample();
        t.horizon = 0;
        assert!(t.validate().is_err());
    }

    #[test]
    fn unknown_kind_is_rejected() {
        let text = sample().to_json().replace("\"reward\"", "\"teleport\"");
        assert!(TaskSpec::from_json(&text).is_err());
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let text = sample().to_json().replace("\"schema_version\": 1", "\"schema_version\": 7");
        assert!(TaskSpec::from_json(&text).unwrap_err().contains("schema_version"));
    }

    #[test]
    fn wrap_maps_into_space() {
        let s = SeedSpace { start: 10, end: 19 };
        for raw in [0u64, 9, 10, 123_456_789, u64::MAX] {
            assert!(s.contains(s.wrap(raw)));
        }
    }
}
