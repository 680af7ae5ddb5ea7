//! Reward-program language.
//!
//! A program is a list of named components, each an expression over the
//! environment's API catalog and the current action, with one weight per
//! component. The reward at a step is the weighted sum of component values,
//! so the weights enter linearly and can be tuned without touching the
//! expressions.
//!
//! Programs go through [`parse_program`], then [`check_program`] against a
//! catalog, which yields a [`CheckedProgram`] that evaluates infallibly.
//! Division by a denominator smaller than [`DIVISION_EPSILON`] in magnitude
//! yields [`DIVISION_GUARD_VALUE`] for that subexpression.

pub mod ast;
mod check;
mod diff;
mod eval;
mod parser;

pub use ast::{BinOp, Builtin, CmpOp, Expr};
pub use check::{check_program, CheckError, CheckedProgram};
pub use diff::{diff_programs, Change, DiffEntry, ProgramDiff};
pub use eval::{evaluate, RewardBreakdown};
pub use parser::{parse_program, DslParseError};

use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

pub const DIVISION_EPSILON: f64 = 1e-12;
pub const DIVISION_GUARD_VALUE: f64 = 0.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub name: String,
    pub weight: f64,
    pub expr: Expr,
}

/// Parsed reward program. Equality is structural and ignores `source_text`.
#[derive(Debug, Clone)]
pub struct RewardProgram {
    pub components: Vec<Component>,
    /// Text the program was parsed from (or its canonical print after an
    /// edit such as [`RewardProgram::set_weights`]).
    pub source_text: String,
}

impl PartialEq for RewardProgram {
    fn eq(&self, other: &Self) -> bool {
        self.components == other.components
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("weight for `{0}` is not finite")]
    NonFinite(String),
}

impl RewardProgram {
    pub fn empty() -> Self {
        Self { components: Vec::new(), source_text: String::new() }
    }

    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.components.iter().map(|c| c.name.as_str())
    }

    pub fn weights(&self) -> BTreeMap<String, f64> {
        self.components.iter().map(|c| (c.name.clone(), c.weight)).collect()
    }

    /// Returns a copy with the given weights replaced; absent names keep
    /// their weight and expressions are untouched.
    pub fn set_weights(&self, weights: &BTreeMap<String, f64>) -> Result<RewardProgram, WeightError> {
        for (name, w) in weights {
            if self.component(name).is_none() {
                return Err(WeightError::UnknownComponent(name.clone()));
            }
            if !w.is_finite() {
                return Err(WeightError::NonFinite(name.clone()));
            }
        }
        if weights.is_empty() {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        for c in &mut out.components {
            if let Some(w) = weights.get(&c.name) {
                c.weight = *w;
            }
        }
        out.source_text = out.to_string();
        Ok(out)
    }

    /// Same program with every weight multiplied by `factor`.
    pub fn scale_weights(&self, factor: f64) -> Result<RewardProgram, WeightError> {
        let w = self.components.iter().map(|c| (c.name.clone(), c.weight * factor)).collect();
        self.set_weights(&w)
    }

    pub fn with_component(&self, component: Component) -> RewardProgram {
        let mut out = self.clone();
        out.components.push(component);
        out.source_text = out.to_string();
        out
    }
}

/// Canonical program text, one declaration per line.
impl fmt::Display for RewardProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.components {
            writeln!(f, "component {} weight {} := {}", c.name, c.weight, c.expr)?;
        }
        Ok(())
    }
}
