//! Random reward programs, random states and a tree-walking reference
//! interpreter that reads the environment only through snapshots.

use rand::Rng;
use regot_core::dsl::{BinOp, CmpOp, Expr, RewardProgram};
use regot_core::env::{EnvApiCatalog, EnvState, Environment, SemType};

/// Reference value of one expression.
pub fn oracle_eval(e: &Expr, env: &dyn Environment, state: &EnvState, action: &[f64]) -> f64 {
    match oracle(e, env, state, action) {
        Value::Scalar(v) => v,
        Value::Vec2(_) | Value::Name(_) => panic!("component evaluated to a non-scalar"),
    }
}

/// Reference per-component values and weighted total.
pub fn oracle_program(p: &RewardProgram, env: &dyn Environment, state: &EnvState, action: &[f64]) -> (Vec<f64>, f64) {
    let values: Vec<f64> = p.components.iter().map(|c| oracle_eval(&c.expr, env, state, action)).collect();
    let total = p.components.iter().zip(&values).map(|(c, v)| c.weight * v).sum();
    (values, total)
}

#[derive(Debug, Clone)]
enum Value {
    Scalar(f64),
    Vec2([f64; 2]),
    Name(String),
}

impl Value {
    fn s(&self) -> f64 {
        match self {
            Value::Scalar(v) => *v,
            other => panic!("expected scalar, got {other:?}"),
        }
    }
    fn v(&self) -> [f64; 2] {
        match self {
            Value::Vec2(v) => *v,
            other => panic!("expected vec2, got {other:?}"),
        }
    }
    fn name(&self) -> &str {
        match self {
            Value::Name(n) => n,
            other => panic!("expected name, got {other:?}"),
        }
    }
}

fn hypot(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn oracle(e: &Expr, env: &dyn Environment, state: &EnvState, action: &[f64]) -> Value {
    let ev = |x: &Expr| oracle(x, env, state, action);
    match e {
        Expr::Num(v) => Value::Scalar(*v),
        Expr::Str(s) => Value::Name(s.clone()),
        Expr::Action(i) => Value::Scalar(action[*i]),
        Expr::Neg(x) => Value::Scalar(-ev(x).s()),
        Expr::Bin(op, a, b) => {
            let (a, b) = (ev(a).s(), ev(b).s());
            Value::Scalar(match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div if b.abs() < 1e-12 => 0.0,
                BinOp::Div => a / b,
            })
        }
        Expr::Cmp(op, a, b) => {
            let (a, b) = (ev(a).s(), ev(b).s());
            let holds = match op {
                CmpOp::Lt => a < b,
                CmpOp::Le => a <= b,
                CmpOp::Gt => a > b,
                CmpOp::Ge => a >= b,
            };
            Value::Scalar(if holds { 1.0 } else { 0.0 })
        }
        Expr::Call(name, args) => {
            let args: Vec<Value> = args.iter().map(ev).collect();
            let snap = env.snapshot(state);
            match name.as_str() {
                "abs" => Value::Scalar(args[0].s().abs()),
                "exp" => Value::Scalar(args[0].s().exp()),
                "tanh" => Value::Scalar(args[0].s().tanh()),
                "min" => Value::Scalar(args.iter().map(Value::s).fold(f64::INFINITY, f64::min)),
                "max" => Value::Scalar(args.iter().map(Value::s).fold(f64::NEG_INFINITY, f64::max)),
                "clamp" => {
                    let (x, lo, hi) = (args[0].s(), args[1].s(), args[2].s());
                    let raised = if x < lo { lo } else { x };
                    Value::Scalar(if raised > hi { hi } else { raised })
                }
                "dist" | "distance" => Value::Scalar(hypot(args[0].v(), args[1].v())),
                "ee_position" => Value::Vec2(snap.ee),
                "object_position" => Value::Vec2(snap.objects[args[0].name()]),
                "joint_value" => Value::Scalar(snap.joints[args[0].name()]),
                "joint_target" => Value::Scalar(env.joint_target(args[0].name()).expect("known joint")),
                "is_grasped" => Value::Scalar(if snap.grasped[args[0].name()] { 1.0 } else { 0.0 }),
                "detect_collision" => Value::Scalar(0.0),
                "task_success" => Value::Scalar(if env.success(state) { 1.0 } else { 0.0 }),
                other => panic!("oracle does not know `{other}`"),
            }
        }
    }
}

/// Uniform state inside the observation bounds.
pub fn random_state<R: Rng>(env: &dyn Environment, rng: &mut R) -> EnvState {
    let values = env.observation_spec().dims.iter().map(|d| rng.random_range(d.low..=d.high)).collect();
    EnvState { values, step: 0 }
}

/// Uniform action inside the action bounds.
pub fn random_action<R: Rng>(env: &dyn Environment, rng: &mut R) -> Vec<f64> {
    env.action_spec().dims.iter().map(|d| rng.random_range(d.low..=d.high)).collect()
}

/// Random well-typed programs over a catalog, as source text.
pub struct ProgramGen<'a> {
    pub catalog: &'a EnvApiCatalog,
    pub max_depth: usize,
}

impl<'a> ProgramGen<'a> {
    pub fn new(catalog: &'a EnvApiCatalog) -> Self {
        Self { catalog, max_depth: 4 }
    }

    pub fn program<R: Rng>(&self, rng: &mut R) -> String {
        let n = rng.random_range(1..=4);
        (0..n)
            .map(|i| {
                let w = rng.random_range(-3.0..3.0_f64);
                format!("component c{i} weight {w:.4} := {}\n", self.scalar(rng, self.max_depth))
            })
            .collect()
    }

    fn literal<R: Rng>(rng: &mut R) -> String {
        format!("{:.3}", rng.random_range(0.0..5.0_f64))
    }

    fn name_for<R: Rng>(&self, ty: SemType, rng: &mut R) -> Option<String> {
        let pool = match ty {
            SemType::ObjectName => &self.catalog.objects,
            SemType::JointName => &self.catalog.joints,
            _ => return None,
        };
        if pool.is_empty() {
            None
        } else {
            Some(format!("\"{}\"", pool[rng.random_range(0..pool.len())]))
        }
    }

    fn can_fill(&self, ty: SemType) -> bool {
        match ty {
            SemType::ObjectName => !self.catalog.objects.is_empty(),
            SemType::JointName => !self.catalog.joints.is_empty(),
            _ => true,
        }
    }

    /// Catalog call returning `want`, when one can be formed.
    fn api<R: Rng>(&self, rng: &mut R, depth: usize, want: SemType) -> Option<String> {
        let fits = |t: SemType| match want {
            SemType::Vec2 => t == SemType::Vec2,
            _ => matches!(t, SemType::Scalar | SemType::Indicator),
        };
        let options: Vec<_> = self
            .catalog
            .entries
            .iter()
            .filter(|e| fits(e.ret))
            .filter(|e| e.args.iter().all(|a| self.can_fill(a.ty)))
            .collect();
        if options.is_empty() {
            return None;
        }
        let sig = options[rng.random_range(0..options.len())];
        let args: Vec<String> = sig
            .args
            .iter()
            .map(|a| match a.ty {
                SemType::ObjectName | SemType::JointName => self.name_for(a.ty, rng).expect("filtered"),
                SemType::Vec2 => self.vector(rng),
                _ => self.scalar(rng, depth.saturating_sub(1)),
            })
            .collect();
        Some(format!("{}({})", sig.name, args.join(", ")))
    }

    pub fn vector<R: Rng>(&self, rng: &mut R) -> String {
        self.api(rng, 0, SemType::Vec2).expect("every catalog has a vec2 query")
    }

    pub fn scalar<R: Rng>(&self, rng: &mut R, depth: usize) -> String {
        let leaf = depth == 0 || rng.random_bool(0.25);
        if leaf {
            return match rng.random_range(0..3) {
                0 => Self::literal(rng),
                1 if !self.catalog.actions.is_empty() => {
                    format!("action({})", rng.random_range(0..self.catalog.actions.len()))
                }
                _ => self.api(rng, 0, SemType::Scalar).unwrap_or_else(|| Self::literal(rng)),
            };
        }
        let d = depth - 1;
        match rng.random_range(0..12) {
            0 => format!("(-{})", self.scalar(rng, d)),
            1..=4 => {
                let op = ["+", "-", "*", "/"][rng.random_range(0..4)];
                format!("({} {op} {})", self.scalar(rng, d), self.scalar(rng, d))
            }
            5 => {
                let op = ["<", "<=", ">", ">="][rng.random_range(0..4)];
                format!("({} {op} {})", self.scalar(rng, d), self.scalar(rng, d))
            }
            6 => {
                let f = ["abs", "tanh"][rng.random_range(0..2)];
                format!("{f}({})", self.scalar(rng, d))
            }
            7 => format!("exp(clamp({}, -5, 5))", self.scalar(rng, d)),
            8 => {
                let f = ["min", "max"][rng.random_range(0..2)];
                let n = rng.random_range(2..=3);
                let args: Vec<String> = (0..n).map(|_| self.scalar(rng, d)).collect();
                format!("{f}({})", args.join(", "))
            }
            9 => format!("clamp({}, {}, {})", self.scalar(rng, d), Self::literal(rng), Self::literal(rng)),
            10 => format!("dist({}, {})", self.vector(rng), self.vector(rng)),
            _ => self.api(rng, d, SemType::Scalar).unwrap_or_else(|| Self::literal(rng)),
        }
    }
}

/// Identifiers that no catalog or builtin defines.
pub const FAKE_APIS: [&str; 8] = [
    "gripper_force",
    "get_object_pose",
    "robot_velocity",
    "button_pressed",
    "contact_count",
    "lid_angle",
    "object_height",
    "torque_norm",
];

/// Kind of identifier a hallucinated program invents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hallucination {
    Function,
    Object,
    Joint,
}

/// Valid program with one invented identifier spliced into a random
/// component. Returns the text and the invented identifier.
pub fn hallucinated_program<R: Rng>(g: &ProgramGen<'_>, rng: &mut R, case: usize) -> (String, String, Hallucination) {
    let kind = match case % 3 {
        0 => Hallucination::Function,
        1 => Hallucination::Object,
        _ => Hallucination::Joint,
    };
    let fake_name = format!("{}_{case}", FAKE_APIS[case % FAKE_APIS.len()]);
    let injected = match kind {
        Hallucination::Function => {
            let args: Vec<String> = (0..rng.random_range(0..3)).map(|_| g.scalar(rng, 1)).collect();
            format!("{fake_name}({})", args.join(", "))
        }
        Hallucination::Object => {
            if rng.random_bool(0.5) {
                format!("dist(ee_position(), object_position(\"{fake_name}\"))")
            } else {
                format!("is_grasped(\"{fake_name}\")")
            }
        }
        Hallucination::Joint => format!("joint_value(\"{fake_name}\")"),
    };
    let lines: Vec<String> = g.program(rng).lines().map(str::to_string).collect();
    let target = rng.random_range(0..lines.len());
    let text = lines
        .iter()
        .enumerate()
        .map(|(i, l)| if i == target { format!("{l} + {injected}\n") } else { format!("{l}\n") })
        .collect();
    (text, fake_name, kind)
}
