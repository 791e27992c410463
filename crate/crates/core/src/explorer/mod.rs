//! Budgeted exploration: pick the `(weights, task)` pair whose observation
//! tells the most about the target task per unit cost, evaluate it, repeat.
//!
//! The target task's latent function is represented by its values on a
//! finite [`CandidatePool`], which makes the information gain a Gaussian
//! conditioning computation.

mod acquisition;
mod history;
mod pool;
mod search;

pub use acquisition::{best_action, gain_table, info_gain, select_action, ActionChoice, GainEstimate, GAIN_CAP};
pub use history::{read_history, HistoryLog, HistoryRecord, Phase, RunHeader};
pub use pool::{default_pool_size, halton_point, radical_inverse, CandidatePool};
pub use search::{posterior_argmax, resume_search, run_search, Budget, SearchOutcome, SearchProblem};
