use super::ast::{BinOp, CmpOp};
use super::check::CheckedProgram;
use super::{DIVISION_EPSILON, DIVISION_GUARD_VALUE};
use crate::env::{distance, ApiValue, EnvState, Environment};
use serde::{Deserialize, Serialize};

/// Stack-machine instruction produced by the checker.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Op {
    Const(f64),
    Action(usize),
    /// Catalog call. `Some` slots are name literals baked in at check time,
    /// `None` slots pop a value from the stack (in argument order).
    Api {
        name: String,
        slots: Vec<Option<String>>,
    },
    Neg,
    Bin(BinOp),
    Cmp(CmpOp),
    Abs,
    Exp,
    Tanh,
    Min(usize),
    Max(usize),
    Clamp,
    Dist,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Val {
    S(f64),
    V([f64; 2]),
}

impl Val {
    fn scalar(self) -> f64 {
        match self {
            Val::S(v) => v,
            Val::V(_) => {
                debug_assert!(false, "type checker admitted a vector where a scalar was required");
                0.0
            }
        }
    }

    fn vec2(self) -> [f64; 2] {
        match self {
            Val::V(v) => v,
            Val::S(_) => {
                debug_assert!(false, "type checker admitted a scalar where a vector was required");
                [0.0, 0.0]
            }
        }
    }
}

pub(crate) fn apply_bin(op: BinOp, a: f64, b: f64) -> f64 {
    match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b.abs() < DIVISION_EPSILON {
                DIVISION_GUARD_VALUE
            } else {
                a / b
            }
        }
    }
}

pub(crate) fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Runs one compiled component. The stack is reused across calls.
pub(crate) fn run<E: Environment + ?Sized>(
    code: &[Op],
    env: &E,
    state: &EnvState,
    action: &[f64],
    stack: &mut Vec<Val>,
) -> f64 {
    stack.clear();
    for op in code {
        let v = match op {
            Op::Const(c) => Val::S(*c),
            Op::Action(i) => Val::S(action.get(*i).copied().unwrap_or(0.0)),
            Op::Api { name, slots } => {
                let popped = slots.iter().filter(|s| s.is_none()).count();
                let mut vals = stack.split_off(stack.len() - popped).into_iter();
                let args: Vec<ApiValue> = slots
                    .iter()
                    .map(|s| match s {
                        Some(n) => ApiValue::Name(n.clone()),
                        None => match vals.next() {
                            Some(Val::S(x)) => ApiValue::Scalar(x),
                            Some(Val::V(x)) => ApiValue::Vec2(x),
                            None => ApiValue::Scalar(0.0),
                        },
                    })
                    .collect();
                match env.api_call(state, name, &args) {
                    Ok(ApiValue::Scalar(x)) => Val::S(x),
                    Ok(ApiValue::Vec2(x)) => Val::V(x),
                    Ok(ApiValue::Name(_)) | Err(_) => {
                        debug_assert!(false, "checked call `{name}` failed at runtime");
                        Val::S(0.0)
                    }
                }
            }
            Op::Neg => Val::S(-pop(stack).scalar()),
            Op::Bin(b) => {
                let rhs = pop(stack).scalar();
                let lhs = pop(stack).scalar();
                Val::S(apply_bin(*b, lhs, rhs))
            }
            Op::Cmp(c) => {
                let rhs = pop(stack).scalar();
                let lhs = pop(stack).scalar();
                Val::S(indicator(c.holds(lhs, rhs)))
            }
            Op::Abs => Val::S(pop(stack).scalar().abs()),
            Op::Exp => Val::S(pop(stack).scalar().exp()),
            Op::Tanh => Val::S(pop(stack).scalar().tanh()),
            Op::Min(n) => Val::S(fold_n(stack, *n, f64::min)),
            Op::Max(n) => Val::S(fold_n(stack, *n, f64::max)),
            Op::Clamp => {
                let hi = pop(stack).scalar();
                let lo = pop(stack).scalar();
                let x = pop(stack).scalar();
                Val::S(x.max(lo).min(hi))
            }
            Op::Dist => {
                let b = pop(stack).vec2();
                let a = pop(stack).vec2();
                Val::S(distance(a, b))
            }
        };
        stack.push(v);
    }
    debug_assert_eq!(stack.len(), 1);
    stack.pop().map(Val::scalar).unwrap_or(0.0)
}

fn pop(stack: &mut Vec<Val>) -> Val {
    stack.pop().unwrap_or(Val::S(0.0))
}

fn fold_n(stack: &mut Vec<Val>, n: usize, f: fn(f64, f64) -> f64) -> f64 {
    let args = stack.split_off(stack.len() - n);
    args.into_iter().map(Val::scalar).reduce(f).unwrap_or(0.0)
}

/// Per-component values (in program order) and the weighted total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub values: Vec<(String, f64)>,
    pub total: f64,
}

impl RewardBreakdown {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Reward at `(state, action)`: `sum_i weight_i * value_i`.
pub fn evaluate<E: Environment + ?Sized>(
    program: &CheckedProgram,
    env: &E,
    state: &EnvState,
    action: &[f64],
) -> RewardBreakdown {
    program.evaluate(env, state, action)
}
