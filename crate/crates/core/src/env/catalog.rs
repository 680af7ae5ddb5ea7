use serde::{Deserialize, Serialize};
use std::fmt::{self, Write as _};

/// Semantic type of an API argument or return value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemType {
    Scalar,
    Vec2,
    /// A scalar restricted to {0, 1}.
    Indicator,
    /// String literal naming one of the catalog's objects.
    ObjectName,
    /// String literal naming one of the catalog's joints.
    JointName,
}

impl fmt::Display for SemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SemType::Scalar => "scalar",
            SemType::Vec2 => "vec2",
            SemType::Indicator => "indicator {0,1}",
            SemType::ObjectName => "object name",
            SemType::JointName => "joint name",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ApiValue {
    Scalar(f64),
    Vec2([f64; 2]),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgSpec {
    pub name: String,
    pub ty: SemType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiSignature {
    pub name: String,
    pub args: Vec<ArgSpec>,
    pub ret: SemType,
    pub doc: String,
}

/// The callable query functions an environment exposes to reward programs,
/// together with the object and joint names they accept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvApiCatalog {
    pub entries: Vec<ApiSignature>,
    pub objects: Vec<String>,
    pub joints: Vec<String>,
    /// Action channel names; `action(i)` refers to the i-th.
    pub actions: Vec<String>,
}

fn sig(name: &str, args: &[(&str, SemType)], ret: SemType, doc: &str) -> ApiSignature {
    ApiSignature {
        name: name.to_string(),
        args: args.iter().map(|(n, t)| ArgSpec { name: n.to_string(), ty: *t }).collect(),
        ret,
        doc: doc.to_string(),
    }
}

impl EnvApiCatalog {
    /// The catalog every built-in environment exposes.
    pub fn standard(objects: &[&str], joints: &[&str], actions: &[&str]) -> Self {
        use SemType::*;
        let entries = vec![
            sig("ee_position", &[], Vec2, "Planar position of the end effector in meters."),
            sig("object_position", &[("name", ObjectName)], Vec2, "Planar position of a named object in meters."),
            sig("joint_value", &[("name", JointName)], Scalar, "Current value of a named joint in radians."),
            sig("joint_target", &[("name", JointName)], Scalar, "Fully-actuated value of a named joint in radians."),
            sig(
                "is_grasped",
                &[("name", ObjectName)],
                Indicator,
                "1 while the named object is held by the gripper, else 0.",
            ),
            sig(
                "distance",
                &[("a", Vec2), ("b", Vec2)],
                Scalar,
                "Euclidean distance between two planar points in meters.",
            ),
            sig("detect_collision", &[], Indicator, "1 if the robot is in collision with the scene, else 0."),
            sig("task_success", &[], Indicator, "1 once the task's success predicate holds, else 0."),
        ];
        let cat = Self {
            entries,
            objects: objects.iter().map(|s| s.to_string()).collect(),
            joints: joints.iter().map(|s| s.to_string()).collect(),
            actions: actions.iter().map(|s| s.to_string()).collect(),
        };
        debug_assert!(cat.validate().is_ok());
        cat
    }

    pub fn get(&self, name: &str) -> Option<&ApiSignature> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn accepts_name(&self, ty: SemType, name: &str) -> bool {
        match ty {
            SemType::ObjectName => self.objects.iter().any(|o| o == name),
            SemType::JointName => self.joints.iter().any(|j| j == name),
            _ => false,
        }
    }

    /// Names unique and docs nonempty.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = std::collections::HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.name.as_str()) {
                return Err(format!("duplicate API `{}`", e.name));
            }
            if e.doc.trim().is_empty() {
                return Err(format!("API `{}` has no documentation", e.name));
            }
        }
        Ok(())
    }

    /// Prompt-facing listing, one API per line.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let args: Vec<String> = e.args.iter().map(|a| format!("{}: {}", a.name, a.ty)).collect();
            let _ = writeln!(out, "- {}({}) -> {}: {}", e.name, args.join(", "), e.ret, e.doc);
        }
        let list = |v: &[String]| if v.is_empty() { "(none)".to_string() } else { v.join(", ") };
        let _ = writeln!(out, "objects: {}", list(&self.objects));
        let _ = writeln!(out, "joints: {}", list(&self.joints));
        let channels: Vec<String> =
            self.actions.iter().enumerate().map(|(i, a)| format!("action({i}) = {a}")).collect();
        let _ = writeln!(out, "action channels: {}", list(&channels));
        out
    }
}
