use super::TrainError;
use crate::env::{EnvState, Environment};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Linear-Gaussian controller: `action = W * features + noise`.
///
/// The environment's feature map ends with a constant 1, so the last column
/// of `W` is the bias `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    /// Environment id whose feature map this policy reads.
    pub feature_map: String,
    pub n_features: usize,
    pub action_dims: usize,
    /// Row-major `action_dims x n_features`.
    pub params: Vec<f64>,
    pub noise: f64,
}

impl Policy {
    pub fn zeros<E: Environment + ?Sized>(env: &E) -> Self {
        let probe = EnvState { values: vec![0.0; env.observation_spec().dims.len()], step: 0 };
        let n_features = env.features(&probe).len();
        let action_dims = env.action_spec().len();
        Self {
            feature_map: env.id().to_string(),
            n_features,
            action_dims,
            params: vec![0.0; n_features * action_dims],
            noise: 0.0,
        }
    }

    pub fn with_params<E: Environment + ?Sized>(env: &E, params: Vec<f64>) -> Result<Self, TrainError> {
        let mut p = Self::zeros(env);
        if params.len() != p.params.len() {
            return Err(TrainError::PolicyShape {
                expected: (p.action_dims, p.n_features),
                got: (params.len() / p.n_features.max(1), p.n_features),
            });
        }
        p.params = params;
        Ok(p)
    }

    pub fn check_env<E: Environment + ?Sized>(&self, env: &E) -> Result<(), TrainError> {
        let expected = Self::zeros(env);
        let shape = (self.action_dims, self.n_features);
        let want = (expected.action_dims, expected.n_features);
        if shape != want || self.params.len() != expected.params.len() {
            return Err(TrainError::PolicyShape { expected: want, got: shape });
        }
        Ok(())
    }

    /// Deterministic part of the action.
    pub fn mean_action(&self, features: &[f64]) -> Vec<f64> {
        self.params.chunks(self.n_features).map(|row| row.iter().zip(features).map(|(w, x)| w * x).sum()).collect()
    }

    pub fn act<R: Rng>(&self, features: &[f64], rng: &mut R) -> Vec<f64> {
        let mut a = self.mean_action(features);
        if self.noise > 0.0 {
            for v in &mut a {
                let z: f64 = rng.sample(StandardNormal);
                *v += self.noise * z;
            }
        }
        a
    }

    pub fn noiseless(&self) -> Self {
        Self { noise: 0.0, ..self.clone() }
    }
}
