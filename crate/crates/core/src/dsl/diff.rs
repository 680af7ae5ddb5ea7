use super::RewardProgram;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Change {
    Added {
        weight: f64,
        expr: String,
    },
    Removed {
        weight: f64,
        expr: String,
    },
    /// Expression changed; the weight may have changed too.
    ModifiedExpression {
        old_expr: String,
        new_expr: String,
        old_weight: f64,
        new_weight: f64,
    },
    Reweighted {
        old_weight: f64,
        new_weight: f64,
    },
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffEntry {
    pub name: String,
    pub change: Change,
}

/// Component-level difference between two programs. Entries follow the old
/// program's order, then components new in the second program.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProgramDiff {
    pub entries: Vec<DiffEntry>,
}

impl ProgramDiff {
    pub fn is_unchanged(&self) -> bool {
        self.entries.iter().all(|e| e.change == Change::Unchanged)
    }

    pub fn added(&self) -> impl Iterator<Item = &DiffEntry> {
        self.entries.iter().filter(|e| matches!(e.change, Change::Added { .. }))
    }

    pub fn removed(&self) -> impl Iterator<Item = &DiffEntry> {
        self.entries.iter().filter(|e| matches!(e.change, Change::Removed { .. }))
    }

    pub fn modified(&self) -> impl Iterator<Item = &DiffEntry> {
        self.entries.iter().filter(|e| matches!(e.change, Change::ModifiedExpression { .. }))
    }

    pub fn reweighted(&self) -> impl Iterator<Item = &DiffEntry> {
        self.entries.iter().filter(|e| matches!(e.change, Change::Reweighted { .. }))
    }
}

pub fn diff_programs(old: &RewardProgram, new: &RewardProgram) -> ProgramDiff {
    let mut entries = Vec::new();
    for o in &old.components {
        let change = match new.component(&o.name) {
            None => Change::Removed { weight: o.weight, expr: o.expr.to_string() },
            Some(n) if n.expr != o.expr => Change::ModifiedExpression {
                old_expr: o.expr.to_string(),
                new_expr: n.expr.to_string(),
                old_weight: o.weight,
                new_weight: n.weight,
            },
            Some(n) if n.weight != o.weight => Change::Reweighted { old_weight: o.weight, new_weight: n.weight },
            Some(_) => Change::Unchanged,
        };
        entries.push(DiffEntry { name: o.name.clone(), change });
    }
    for n in &new.components {
        if old.component(&n.name).is_none() {
            entries.push(DiffEntry {
                name: n.name.clone(),
                change: Change::Added { weight: n.weight, expr: n.expr.to_string() },
            });
        }
    }
    ProgramDiff { entries }
}

impl fmt::Display for ProgramDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            match &e.change {
                Change::Added { weight, expr } => writeln!(f, "+ {} weight {weight} := {expr}", e.name)?,
                Change::Removed { weight, expr } => writeln!(f, "- {} weight {weight} := {expr}", e.name)?,
                Change::ModifiedExpression { old_expr, new_expr, old_weight, new_weight } => {
                    writeln!(f, "~ {} weight {old_weight} := {old_expr}", e.name)?;
                    writeln!(f, "  -> weight {new_weight} := {new_expr}")?;
                }
                Change::Reweighted { old_weight, new_weight } => {
                    writeln!(f, "w {} weight {old_weight} -> {new_weight}", e.name)?
                }
                Change::Unchanged => writeln!(f, "= {}", e.name)?,
            }
        }
        Ok(())
    }
}
