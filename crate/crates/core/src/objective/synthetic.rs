use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{fidelity_gap, request_seed, Objective, ObjectiveRequest, ObjectiveResult};
use crate::error::{Error, Result};

/// Closed-form multi-fidelity accuracy surface.
///
/// The target task is `a0 - c * |w - w_opt|^2`. Task `l` of `m` subtracts
/// `delta * (m - 1 - l)` and `gamma * g * mean(w)` and adds Gaussian noise
/// with standard deviation `noise * g`, where `g = (m - 1 - l) / (m - 1)`.
/// Results are clamped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticParams {
    pub a0: f64,
    pub c: f64,
    /// One entry per weight, or a single entry applied to all.
    pub w_opt: Vec<f64>,
    pub delta: f64,
    pub gamma: f64,
    pub noise: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            a0: 0.9,
            c: 1.0,
            w_opt: vec![0.7],
            delta: 0.02,
            gamma: 0.03,
            noise: 0.005,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.a0, self.c, self.delta, self.gamma, self.noise];
        if finite.iter().any(|v| !v.is_finite()) || self.w_opt.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("synthetic parameters must be finite"));
        }
        if self.w_opt.is_empty() {
            return Err(Error::config("synthetic w_opt must not be empty"));
        }
        if self.c < 0.0 || self.noise < 0.0 {
            return Err(Error::config("synthetic c and noise must be nonnegative"));
        }
        Ok(())
    }

    fn optimum(&self, i: usize) -> f64 {
        if self.w_opt.len() == 1 {
            self.w_opt[0]
        } else {
            self.w_opt[i]
        }
    }

    /// Noise-free target-task value.
    pub fn target_value(&self, w: &[f64]) -> f64 {
        let d2: f64 = w.iter().enumerate().map(|(i, v)| (v - self.optimum(i)).powi(2)).sum();
        self.a0 - self.c * d2
    }

    /// Noise-free value at task `task` of `task_count`, before clamping.
    pub fn mean_value(&self, w: &[f64], task: usize, task_count: usize) -> f64 {
        let g = fidelity_gap(task, task_count);
        let steps = (task_count - 1 - task.min(task_count - 1)) as f64;
        let mean_w = w.iter().sum::<f64>() / w.len().max(1) as f64;
        self.target_value(w) - self.delta * steps - self.gamma * g * mean_w
    }
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    params: SyntheticParams,
    task_count: usize,
}

impl Synthetic {
    pub fn new(params: SyntheticParams, task_count: usize) -> Result<Self> {
        params.validate()?;
        if task_count == 0 {
            return Err(Error::config("task count must be positive"));
        }
        Ok(Synthetic { params, task_count })
    }

    pub fn params(&self) -> &SyntheticParams {
        &self.params
    }
}

impl Objective for Synthetic {
    fn evaluate(&mut self, request: &ObjectiveRequest) -> ObjectiveResult {
        let w = request.weights.weights();
        if self.params.w_opt.len() != 1 && self.params.w_opt.len() != w.len() {
            return ObjectiveResult::failed(
                super::Status::Failed,
                format!("w_opt has {} entries for {} weights", self.params.w_opt.len(), w.len()),
            );
        }
        let mut y = self.params.mean_value(w, request.task, self.task_count);
        let sd = self.params.noise * fidelity_gap(request.task, self.task_count);
        if sd > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(request_seed(request));
            let z: f64 = StandardNormal.sample(&mut rng);
            y += sd * z;
        }
        ObjectiveResult::ok(y.clamp(0.0, 1.0), f64::from(request.epochs.max(1)))
    }
}
