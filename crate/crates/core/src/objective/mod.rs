//! Accuracy oracles queried by the search loop.
//!
//! [`Synthetic`] is a closed-form multi-fidelity function with a known
//! optimum, [`Surrogate`] maps quantization SNR of real weight tensors to a
//! pseudo-accuracy, and [`External`] talks to a training process over
//! standard streams.

mod external;
mod surrogate;
mod synthetic;

pub use external::{External, ExternalRequest, ExternalResponse};
pub use surrogate::{Surrogate, SurrogateParams};
pub use synthetic::{Synthetic, SyntheticParams};

use serde::{Deserialize, Serialize};

use crate::curvespace::{BitConfig, CurveParams};

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveRequest {
    pub bits: BitConfig,
    pub weights: CurveParams,
    /// Zero-based task index; the last task is the target.
    pub task: usize,
    pub epochs: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Ok,
    Failed,
    Timeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveResult {
    /// Present exactly when `status` is [`Status::Ok`].
    pub accuracy: Option<f64>,
    pub cost_actual: f64,
    pub status: Status,
    pub message: Option<String>,
}

impl ObjectiveResult {
    pub fn ok(accuracy: f64, cost_actual: f64) -> Self {
        ObjectiveResult {
            accuracy: Some(accuracy),
            cost_actual,
            status: Status::Ok,
            message: None,
        }
    }

    pub fn failed(status: Status, message: impl Into<String>) -> Self {
        debug_assert_ne!(status, Status::Ok);
        ObjectiveResult {
            accuracy: None,
            cost_actual: 0.0,
            status,
            message: Some(message.into()),
        }
    }
}

pub trait Objective {
    fn evaluate(&mut self, request: &ObjectiveRequest) -> ObjectiveResult;
}

impl<T: Objective + ?Sized> Objective for Box<T> {
    fn evaluate(&mut self, request: &ObjectiveRequest) -> ObjectiveResult {
        (**self).evaluate(request)
    }
}

/// Seed for per-request noise, mixing the run seed with the request contents.
pub(crate) fn request_seed(request: &ObjectiveRequest) -> u64 {
    let mut h = splitmix(request.seed);
    h = splitmix(h ^ request.task as u64);
    h = splitmix(h ^ u64::from(request.epochs));
    for w in request.weights.weights() {
        h = splitmix(h ^ w.to_bits());
    }
    h
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fraction of the way from the target down to the lowest fidelity:
/// 0 at the target task, 1 at task 0.
pub(crate) fn fidelity_gap(task: usize, task_count: usize) -> f64 {
    if task_count <= 1 {
        0.0
    } else {
        (task_count - 1 - task.min(task_count - 1)) as f64 / (task_count - 1) as f64
    }
}
