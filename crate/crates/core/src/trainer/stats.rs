use super::{TrainError, Trajectory};
use serde::{Deserialize, Serialize};

/// Summary of one reward component's per-step values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentStat {
    pub name: String,
    pub count: u64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Population standard deviation.
    pub std: f64,
}

/// Per-component statistics, in program order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ComponentStats {
    pub components: Vec<ComponentStat>,
}

impl ComponentStats {
    pub fn get(&self, name: &str) -> Option<&ComponentStat> {
        self.components.iter().find(|c| c.name == name)
    }

    /// Prompt-facing table, one component per line.
    pub fn render(&self) -> String {
        if self.components.is_empty() {
            return "(no reward components)\n".to_string();
        }
        self.components
            .iter()
            .map(|c| {
                format!(
                    "{}: mean={:.6} min={:.6} max={:.6} std={:.6} (n={})\n",
                    c.name, c.mean, c.min, c.max, c.std, c.count
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl Moments {
    const EMPTY: Moments = Moments { n: 0, mean: 0.0, m2: 0.0, min: f64::INFINITY, max: f64::NEG_INFINITY };

    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n as f64;
        self.m2 += o.m2 + d * d * (self.n as f64 * o.n as f64 / n as f64);
        self.n = n;
        self.min = self.min.min(o.min);
        self.max = self.max.max(o.max);
    }
}

/// Streaming per-component moments (Welford, with Chan's merge).
///
/// Merging accumulators in a fixed order gives the same result regardless of
/// how the work was split across threads.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatsAccumulator {
    names: Vec<String>,
    moments: Vec<Moments>,
}

impl StatsAccumulator {
    pub fn new(names: Vec<String>) -> Self {
        let moments = vec![Moments::EMPTY; names.len()];
        Self { names, moments }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Adds every step of a trajectory. The caller guarantees that the
    /// trajectory's components match `names`.
    pub fn push_trajectory(&mut self, t: &Trajectory) {
        for step in &t.steps {
            for (m, (_, v)) in self.moments.iter_mut().zip(&step.reward.values) {
                m.push(*v);
            }
        }
    }

    pub fn push_values(&mut self, values: &[f64]) {
        for (m, v) in self.moments.iter_mut().zip(values) {
            m.push(*v);
        }
    }

    pub fn merge(&mut self, other: &StatsAccumulator) {
        for (a, b) in self.moments.iter_mut().zip(&other.moments) {
            a.merge(b);
        }
    }

    pub fn finish(&self) -> ComponentStats {
        let components = self
            .names
            .iter()
            .zip(&self.moments)
            .map(|(name, m)| {
                if m.n == 0 {
                    return ComponentStat { name: name.clone(), count: 0, mean: 0.0, min: 0.0, max: 0.0, std: 0.0 };
                }
                // Rounding can put the running mean a hair outside [min, max].
                let mean = m.mean.clamp(m.min, m.max);
                let std = (m.m2.max(0.0) / m.n as f64).sqrt();
                ComponentStat { name: name.clone(), count: m.n, mean, min: m.min, max: m.max, std }
            })
            .collect();
        ComponentStats { components }
    }
}

/// Pools every step of every trajectory per component.
pub fn collect_stats(trajectories: &[Trajectory]) -> Result<ComponentStats, TrainError> {
    let first = trajectories.first().ok_or(TrainError::NoTrajectories)?;
    let names = trajectories.iter().find(|t| !t.steps.is_empty()).unwrap_or(first).component_names();
    let mut acc = StatsAccumulator::new(names.clone());
    for (index, t) in trajectories.iter().enumerate() {
        for step in &t.steps {
            if step.reward.values.len() != names.len()
                || step.reward.values.iter().zip(&names).any(|((n, _), want)| n != want)
            {
                return Err(TrainError::MismatchedComponents {
                    index,
                    expected: names,
                    found: step.reward.values.iter().map(|(n, _)| n.clone()).collect(),
                });
            }
        }
        acc.push_trajectory(t);
    }
    Ok(acc.finish())
}
