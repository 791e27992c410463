//! Multi-task Gaussian process over curve weights, one task per
//! training-epoch fidelity.
//!
//! Covariance follows the intrinsic correlation model
//! `cov(f_l(x), f_l'(x')) = K^f[l, l'] * k(x, x')` with a squared-exponential
//! input kernel. On a complete (input, task) grid ordered task-major the
//! training covariance is `K^f (x) K^x + D (x) I`; scattered data is handled
//! entry by entry.

mod fit;
mod kernel;
mod model;

pub use fit::{fit, FitConfig, FitReport, RestartReport};
pub use kernel::{build_train_covariance, input_kernel, kernel_entry, GpHyperparams};
pub use model::{GpModel, GpSnapshot, Posterior};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fidelity ladder. The last task is the target fidelity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TaskSetRaw", into = "TaskSetRaw")]
pub struct TaskSet {
    epochs: Vec<u32>,
    costs: Vec<f64>,
    noise: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TaskSetRaw {
    epochs: Vec<u32>,
    costs: Vec<f64>,
    noise: Vec<f64>,
}

impl TryFrom<TaskSetRaw> for TaskSet {
    type Error = Error;

    fn try_from(r: TaskSetRaw) -> Result<Self> {
        TaskSet::new(r.epochs, r.costs, r.noise)
    }
}

impl From<TaskSet> for TaskSetRaw {
    fn from(t: TaskSet) -> Self {
        TaskSetRaw {
            epochs: t.epochs,
            costs: t.costs,
            noise: t.noise,
        }
    }
}

/// Observation noise variance assumed when none is given (accuracy units).
pub const DEFAULT_TASK_NOISE: f64 = 1e-4;

impl TaskSet {
    pub fn new(epochs: Vec<u32>, costs: Vec<f64>, noise: Vec<f64>) -> Result<Self> {
        let m = epochs.len();
        if m == 0 {
            return Err(Error::config("task ladder needs at least one task"));
        }
        if costs.len() != m || noise.len() != m {
            return Err(Error::config(format!(
                "task ladder has {m} epochs but {} costs and {} noise values",
                costs.len(),
                noise.len()
            )));
        }
        if epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("task epochs must be strictly increasing"));
        }
        if costs.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::config("task costs must be positive"));
        }
        if noise.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
            return Err(Error::config("task noise variances must be non-negative"));
        }
        Ok(TaskSet { epochs, costs, noise })
    }

    /// Costs `max(epochs, 1)` and the default noise for every task.
    pub fn from_epochs(epochs: Vec<u32>) -> Result<Self> {
        let costs = epochs.iter().map(|&e| f64::from(e.max(1))).collect();
        let noise = vec![DEFAULT_TASK_NOISE; epochs.len()];
        Self::new(epochs, costs, noise)
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn target(&self) -> usize {
        self.epochs.len() - 1
    }

    pub fn epochs(&self) -> &[u32] {
        &self.epochs
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn noise(&self) -> &[f64] {
        &self.noise
    }

    /// Lowest-cost task; the earliest wins ties.
    pub fn cheapest(&self) -> usize {
        self.costs
            .iter()
            .enumerate()
            .fold(0, |best, (i, &c)| if c < self.costs[best] { i } else { best })
    }
}

/// One evaluated `(weights, task)` pair. `task` is zero-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: Vec<f64>,
    pub task: usize,
    pub y: f64,
    #[serde(default)]
    pub cost: f64,
}

impl Observation {
    pub fn new(x: Vec<f64>, task: usize, y: f64) -> Self {
        Observation { x, task, y, cost: 0.0 }
    }
}

/// A query location: curve weights plus a zero-based task index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPoint {
    pub x: Vec<f64>,
    pub task: usize,
}

impl TaskPoint {
    pub fn new(x: Vec<f64>, task: usize) -> Self {
        TaskPoint { x, task }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_costs_follow_epochs() {
        let t = TaskSet::from_epochs(vec![0, 1, 2, 15]).unwrap();
        assert_eq!(t.costs(), &[1.0, 1.0, 2.0, 15.0]);
        assert_eq!(t.target(), 3);
        assert_eq!(t.cheapest(), 0);
    }

    #[test]
    fn invalid_ladders() {
        assert!(TaskSet::from_epochs(vec![]).is_err());
        assert!(TaskSet::from_epochs(vec![2, 1]).is_err());
        assert!(TaskSet::new(vec![0, 1], vec![1.0, 0.0], vec![0.0, 0.0]).is_err());
        assert!(TaskSet::new(vec![0, 1], vec![1.0, 1.0], vec![0.0, -1.0]).is_err());
        assert!(TaskSet::new(vec![0, 1], vec![1.0], vec![0.0, 0.0]).is_err());
    }
}
