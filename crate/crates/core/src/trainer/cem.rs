use super::rollout::run_episode;
use super::{ComponentStats, Policy, StatsAccumulator, TrainError, TrainerConfig};
use crate::dsl::CheckedProgram;
use crate::env::Environment;
use crate::seeding::{self, label};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: usize,
    /// Best mean discounted return in the population, retained elites included.
    pub best_return: f64,
    /// Mean over the freshly sampled candidates.
    pub mean_return: f64,
    pub elite_mean_return: f64,
    /// Mean sampling standard deviation after the update.
    pub sigma: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub seed: u64,
    pub iterations: Vec<IterationSummary>,
    /// Training score of the returned policy.
    pub best_return: f64,
    /// Pooled over every step of every rollout of the final CEM iteration.
    pub stats: ComponentStats,
    pub warnings: Vec<String>,
    /// Not serialized, so persisted logs are reproducible byte for byte.
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl PartialEq for TrainingLog {
    fn eq(&self, o: &Self) -> bool {
        self.seed == o.seed
            && self.iterations == o.iterations
            && self.best_return == o.best_return
            && self.stats == o.stats
            && self.warnings == o.warnings
    }
}

struct Scored {
    params: Vec<f64>,
    score: f64,
}

/// Mean discounted return over the training seed set, plus the candidate's
/// component moments.
fn score<E: Environment + ?Sized>(
    env: &E,
    program: &CheckedProgram,
    template: &Policy,
    params: &[f64],
    seeds: &[u64],
    config: &TrainerConfig,
    horizon: usize,
) -> Result<(f64, StatsAccumulator), TrainError> {
    let policy = Policy { params: params.to_vec(), ..template.clone() };
    let mut acc = StatsAccumulator::new(program.program().names().map(str::to_string).collect());
    let mut sum = 0.0;
    for &seed in seeds {
        let mut ret = 0.0;
        let mut discount = 1.0;
        run_episode(&policy, env, Some(program), seed, horizon, |_, _, values, total| {
            ret += discount * total;
            discount *= config.gamma;
            acc.push_values(values);
        })?;
        sum += ret;
    }
    Ok((sum / seeds.len() as f64, acc))
}

/// Cross-entropy method with retained elites.
///
/// Each iteration samples `population` parameter vectors from a diagonal
/// Gaussian, scores them together with the previous iteration's elites on a
/// fixed seed set, and refits the Gaussian to the top candidates. Because the
/// seed set is fixed and elites are carried over, the best score never
/// decreases from one iteration to the next.
pub fn train<E: Environment + ?Sized>(
    env: &E,
    program: &CheckedProgram,
    config: &TrainerConfig,
) -> Result<(Policy, TrainingLog), TrainError> {
    config.validate()?;
    let started = Instant::now();
    let template = Policy { noise: config.noise, ..Policy::zeros(env) };
    let dim = template.params.len();
    let space = env.task().seed_space;
    let seeds: Vec<u64> =
        (0..config.train_episodes as u64).map(|j| space.wrap(seeding::derive(config.seed, label::TRAIN, j))).collect();
    let horizon = config.horizon.unwrap_or(env.task().horizon).min(env.task().horizon);
    let n_elites = config.n_elites();

    let mut mean = vec![0.0; dim];
    let mut sigma = vec![config.init_std.max(config.min_std); dim];
    let mut elites: Vec<Scored> = Vec::new();
    let mut iterations = Vec::with_capacity(config.iterations);
    let mut stats = ComponentStats::default();
    let mut all_scores_equal = true;
    let mut first_score: Option<f64> = None;

    for it in 0..config.iterations {
        let base = it as u64 * config.population as u64;
        let fresh: Vec<Vec<f64>> = (0..config.population as u64)
            .map(|i| {
                let mut rng = seeding::rng(seeding::derive(config.seed, label::CEM, base + i));
                (0..dim)
                    .map(|d| {
                        let z: f64 = rng.sample(StandardNormal);
                        mean[d] + sigma[d] * z
                    })
                    .collect()
            })
            .collect();
        let results = fresh
            .par_iter()
            .map(|p| score(env, program, &template, p, &seeds, config, horizon))
            .collect::<Result<Vec<_>, _>>()?;

        let mut acc = StatsAccumulator::new(program.program().names().map(str::to_string).collect());
        let mut candidates: Vec<Scored> = Vec::with_capacity(elites.len() + fresh.len());
        candidates.append(&mut elites);
        for (i, (params, (s, a))) in fresh.into_iter().zip(results).enumerate() {
            if !s.is_finite() {
                return Err(TrainError::NonFiniteReturn { iteration: it, candidate: i, value: s });
            }
            acc.merge(&a);
            match first_score {
                None => first_score = Some(s),
                Some(f) if f != s => all_scores_equal = false,
                Some(_) => {}
            }
            candidates.push(Scored { params, score: s });
        }
        let fresh_mean = candidates[candidates.len() - config.population..].iter().map(|c| c.score).sum::<f64>()
            / config.population as f64;

        // Stable sort: on equal scores, retained elites and earlier samples win.
        candidates.sort_by(|a, b| b.score.total_cmp(&a.score));
        candidates.truncate(n_elites);
        let k = candidates.len() as f64;
        for d in 0..dim {
            let m = candidates.iter().map(|c| c.params[d]).sum::<f64>() / k;
            let var = candidates.iter().map(|c| (c.params[d] - m).powi(2)).sum::<f64>() / k;
            mean[d] = m;
            sigma[d] = var.sqrt().max(config.min_std);
        }
        iterations.push(IterationSummary {
            iteration: it + 1,
            best_return: candidates[0].score,
            mean_return: fresh_mean,
            elite_mean_return: candidates.iter().map(|c| c.score).sum::<f64>() / k,
            sigma: sigma.iter().sum::<f64>() / dim.max(1) as f64,
        });
        elites = candidates;
        if it + 1 == config.iterations {
            stats = acc.finish();
        }
    }

    let mut warnings = Vec::new();
    if program.program().components.is_empty() {
        warnings.push("degenerate reward: the program has no components, so every return is 0".to_string());
    } else if all_scores_equal {
        warnings.push("degenerate reward: every candidate received the same return".to_string());
    }
    let best = &elites[0];
    let policy = Policy { params: best.params.clone(), ..template };
    let log = TrainingLog {
        seed: config.seed,
        iterations,
        best_return: best.score,
        stats,
        warnings,
        wall_clock: started.elapsed(),
    };
    Ok((policy, log))
}
