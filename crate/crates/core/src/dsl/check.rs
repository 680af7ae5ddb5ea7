use super::ast::{BinOp, Builtin, Expr};
use super::eval::{apply_bin, indicator, run, Op};
use super::{RewardBreakdown, RewardProgram};
use crate::env::{EnvApiCatalog, EnvState, Environment, SemType};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Scalar,
    Vec2,
    Str,
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ty::Scalar => "scalar",
            Ty::Vec2 => "vec2",
            Ty::Str => "string",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckError {
    #[error("component `{component}`: unknown function `{name}` (not a builtin and not in the API catalog)")]
    UnknownFunction { component: String, name: String },
    #[error("component `{component}`: `{function}` has no {kind} named \"{name}\"")]
    UnknownName { component: String, function: String, kind: String, name: String },
    #[error("component `{component}`: `{function}` expects {expected} arguments, got {got}")]
    Arity { component: String, function: String, expected: String, got: usize },
    #[error("component `{component}`: {context} expects {expected}, found {found}")]
    Type { component: String, context: String, expected: String, found: String },
    #[error("component `{component}`: action({index}) is out of range, the action has {dims} channels")]
    ActionIndex { component: String, index: usize, dims: usize },
}

impl CheckError {
    /// The identifier the error is about.
    pub fn identifier(&self) -> &str {
        match self {
            CheckError::UnknownFunction { name, .. } | CheckError::UnknownName { name, .. } => name,
            CheckError::Arity { function, .. } => function,
            CheckError::Type { context, .. } => context,
            CheckError::ActionIndex { component, .. } => component,
        }
    }
}

/// A program that passed [`check_program`], compiled to stack code.
#[derive(Debug, Clone)]
pub struct CheckedProgram {
    program: RewardProgram,
    code: Vec<Vec<Op>>,
    notes: Vec<String>,
}

impl CheckedProgram {
    pub fn program(&self) -> &RewardProgram {
        &self.program
    }

    /// Non-fatal findings, such as divisions that run behind the guard.
    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn evaluate<E: Environment + ?Sized>(&self, env: &E, state: &EnvState, action: &[f64]) -> RewardBreakdown {
        let mut values = Vec::with_capacity(self.code.len());
        let total = self.evaluate_into(env, state, action, &mut values);
        let values = self.program.components.iter().zip(values).map(|(c, v)| (c.name.clone(), v)).collect();
        RewardBreakdown { values, total }
    }

    /// Writes component values into `values` (cleared first) and returns the
    /// weighted total; same result as [`CheckedProgram::evaluate`].
    pub fn evaluate_into<E: Environment + ?Sized>(
        &self,
        env: &E,
        state: &EnvState,
        action: &[f64],
        values: &mut Vec<f64>,
    ) -> f64 {
        let mut stack = Vec::with_capacity(8);
        let mut total = 0.0;
        values.clear();
        for (c, code) in self.program.components.iter().zip(&self.code) {
            let v = run(code, env, state, action, &mut stack);
            total += c.weight * v;
            values.push(v);
        }
        total
    }
}

struct Compiler<'a> {
    catalog: &'a EnvApiCatalog,
    component: &'a str,
    errors: Vec<CheckError>,
    notes: Vec<String>,
}

/// Result of compiling a subtree: its type, its code, and its value when
/// the subtree is a compile-time constant.
struct Frag {
    ty: Ty,
    code: Vec<Op>,
    constant: Option<f64>,
}

impl Frag {
    fn scalar_const(v: f64) -> Self {
        Frag { ty: Ty::Scalar, code: vec![Op::Const(v)], constant: Some(v) }
    }

    fn poisoned() -> Self {
        Frag { ty: Ty::Scalar, code: vec![Op::Const(0.0)], constant: None }
    }
}

impl Compiler<'_> {
    fn type_error(&mut self, context: String, expected: &str, found: Ty) {
        self.errors.push(CheckError::Type {
            component: self.component.to_string(),
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }

    fn scalar(&mut self, e: &Expr, context: &str) -> Frag {
        let f = self.expr(e);
        if f.ty != Ty::Scalar {
            self.type_error(context.to_string(), "scalar", f.ty);
            return Frag::poisoned();
        }
        f
    }

    /// Compiles scalar operands and then `op`, folding when all are constant.
    fn combine(&mut self, parts: Vec<Frag>, op: Op, fold: impl Fn(&[f64]) -> f64) -> Frag {
        if let Some(consts) = parts.iter().map(|p| p.constant).collect::<Option<Vec<_>>>() {
            return Frag::scalar_const(fold(&consts));
        }
        let mut code: Vec<Op> = parts.into_iter().flat_map(|p| p.code).collect();
        code.push(op);
        Frag { ty: Ty::Scalar, code, constant: None }
    }

    fn expr(&mut self, e: &Expr) -> Frag {
        match e {
            Expr::Num(v) => Frag::scalar_const(*v),
            Expr::Str(_) => Frag { ty: Ty::Str, code: vec![], constant: None },
            Expr::Action(i) => {
                if *i >= self.catalog.actions.len() {
                    self.errors.push(CheckError::ActionIndex {
                        component: self.component.to_string(),
                        index: *i,
                        dims: self.catalog.actions.len(),
                    });
                }
                Frag { ty: Ty::Scalar, code: vec![Op::Action(*i)], constant: None }
            }
            Expr::Neg(inner) => {
                let f = self.scalar(inner, "unary minus");
                self.combine(vec![f], Op::Neg, |v| -v[0])
            }
            Expr::Bin(op, a, b) => {
                let ctx = format!("operator `{}`", op.symbol());
                let fa = self.scalar(a, &ctx);
                let fb = self.scalar(b, &ctx);
                if *op == BinOp::Div && fb.constant.is_none() {
                    self.notes.push(format!(
                        "component `{}`: division `{}` runs behind the zero-denominator guard",
                        self.component, e
                    ));
                }
                let op = *op;
                self.combine(vec![fa, fb], Op::Bin(op), move |v| apply_bin(op, v[0], v[1]))
            }
            Expr::Cmp(op, a, b) => {
                let ctx = format!("comparison `{}`", op.symbol());
                let fa = self.scalar(a, &ctx);
                let fb = self.scalar(b, &ctx);
                let op = *op;
                self.combine(vec![fa, fb], Op::Cmp(op), move |v| indicator(op.holds(v[0], v[1])))
            }
            Expr::Call(name, args) => match Builtin::lookup(name) {
                Some(b) => self.builtin(b, args),
                None => self.api(name, args),
            },
        }
    }

    fn arity(&mut self, function: &str, expected: &str, got: usize) {
        self.errors.push(CheckError::Arity {
            component: self.component.to_string(),
            function: function.to_string(),
            expected: expected.to_string(),
            got,
        });
    }

    fn builtin(&mut self, b: Builtin, args: &[Expr]) -> Frag {
        let name = b.name();
        let ok = match b {
            Builtin::Abs | Builtin::Exp | Builtin::Tanh => args.len() == 1,
            Builtin::Min | Builtin::Max => args.len() >= 2,
            Builtin::Clamp => args.len() == 3,
            Builtin::Dist => args.len() == 2,
        };
        if !ok {
            let expected = match b {
                Builtin::Abs | Builtin::Exp | Builtin::Tanh => "1",
                Builtin::Min | Builtin::Max => "at least 2",
                Builtin::Clamp => "3",
                Builtin::Dist => "2",
            };
            self.arity(name, expected, args.len());
            return Frag::poisoned();
        }
        if b == Builtin::Dist {
            let mut code = Vec::new();
            for (i, a) in args.iter().enumerate() {
                let f = self.expr(a);
                if f.ty != Ty::Vec2 {
                    self.type_error(format!("argument {} of `dist`", i + 1), "vec2", f.ty);
                }
                code.extend(f.code);
            }
            code.push(Op::Dist);
            return Frag { ty: Ty::Scalar, code, constant: None };
        }
        let parts: Vec<Frag> =
            args.iter().enumerate().map(|(i, a)| self.scalar(a, &format!("argument {} of `{name}`", i + 1))).collect();
        let n = parts.len();
        match b {
            Builtin::Abs => self.combine(parts, Op::Abs, |v| v[0].abs()),
            Builtin::Exp => self.combine(parts, Op::Exp, |v| v[0].exp()),
            Builtin::Tanh => self.combine(parts, Op::Tanh, |v| v[0].tanh()),
            Builtin::Min => self.combine(parts, Op::Min(n), |v| v.iter().copied().reduce(f64::min).unwrap_or(0.0)),
            Builtin::Max => self.combine(parts, Op::Max(n), |v| v.iter().copied().reduce(f64::max).unwrap_or(0.0)),
            Builtin::Clamp => self.combine(parts, Op::Clamp, |v| v[0].max(v[1]).min(v[2])),
            Builtin::Dist => unreachable!("handled above"),
        }
    }

    fn api(&mut self, name: &str, args: &[Expr]) -> Frag {
        let Some(sig) = self.catalog.get(name).cloned() else {
            self.errors
                .push(CheckError::UnknownFunction { component: self.component.to_string(), name: name.to_string() });
            return Frag::poisoned();
        };
        if sig.args.len() != args.len() {
            self.arity(name, &sig.args.len().to_string(), args.len());
            return Frag::poisoned();
        }
        let mut code = Vec::new();
        let mut slots = Vec::new();
        for (spec, a) in sig.args.iter().zip(args) {
            let context = format!("argument `{}` of `{name}`", spec.name);
            match spec.ty {
                SemType::ObjectName | SemType::JointName => {
                    let kind = if spec.ty == SemType::ObjectName { "object" } else { "joint" };
                    match a {
                        Expr::Str(s) => {
                            if !self.catalog.accepts_name(spec.ty, s) {
                                self.errors.push(CheckError::UnknownName {
                                    component: self.component.to_string(),
                                    function: name.to_string(),
                                    kind: kind.to_string(),
                                    name: s.clone(),
                                });
                            }
                            slots.push(Some(s.clone()));
                        }
                        other => {
                            let f = self.expr(other);
                            self.type_error(context, &format!("{kind} name literal"), f.ty);
                            slots.push(Some(String::new()));
                        }
                    }
                }
                SemType::Vec2 => {
                    let f = self.expr(a);
                    if f.ty != Ty::Vec2 {
                        self.type_error(context, "vec2", f.ty);
                    }
                    code.extend(f.code);
                    slots.push(None);
                }
                SemType::Scalar | SemType::Indicator => {
                    let f = self.scalar(a, &context);
                    code.extend(f.code);
                    slots.push(None);
                }
            }
        }
        code.push(Op::Api { name: name.to_string(), slots });
        let ty = if sig.ret == SemType::Vec2 { Ty::Vec2 } else { Ty::Scalar };
        Frag { ty, code, constant: None }
    }
}

/// Resolves every call against `catalog`, type-checks every component, and
/// compiles the program for evaluation.
pub fn check_program(program: &RewardProgram, catalog: &EnvApiCatalog) -> Result<CheckedProgram, Vec<CheckError>> {
    let mut errors = Vec::new();
    let mut notes = Vec::new();
    let mut code = Vec::new();
    for c in &program.components {
        let mut comp = Compiler { catalog, component: &c.name, errors: Vec::new(), notes: Vec::new() };
        let f = comp.expr(&c.expr);
        if f.ty != Ty::Scalar {
            comp.type_error("component value".to_string(), "scalar", f.ty);
        }
        errors.extend(comp.errors);
        notes.extend(comp.notes);
        code.push(f.code);
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(CheckedProgram { program: program.clone(), code, notes })
}
