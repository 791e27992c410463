//! Ranking explored configurations by effective accuracy and memory, and
//! extracting the accuracy-versus-size Pareto front.
//!
//! Accuracies are fractions in `[0, 1]`. With the default `k = 100` every
//! bit above a uniform 4-bit budget costs one percentage point.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::curvespace::{bits_for_layers, BitConfig, CurveBasis, CurveParams};
use crate::error::{Error, Result};
use crate::explorer::CandidatePool;
use crate::mtgp::{GpModel, TaskPoint};
use crate::quant::{model_size_bytes, NetworkSpec, DEFAULT_BLOCK_SIZE};

pub const DEFAULT_K: f64 = 100.0;
/// Bits per layer at which the effective-accuracy penalty is zero.
pub const BASELINE_BITS: u32 = 4;

/// `a - (sum(b) - 4 n) / k`.
pub fn effective_accuracy(a: f64, bits: &BitConfig, k: f64) -> f64 {
    let excess = f64::from(bits.bit_sum()) - f64::from(BASELINE_BITS) * bits.len() as f64;
    a - excess / k
}

/// Negative accuracy per bit, `-a / sum(b)`.
pub fn naive_loss(a: f64, bits: &BitConfig) -> f64 {
    -a / f64::from(bits.bit_sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedConfig {
    pub weights: CurveParams,
    pub bits: BitConfig,
    pub predicted_accuracy: f64,
    pub predicted_std: f64,
    pub bit_sum: u32,
    pub memory_bytes: f64,
    pub effective_accuracy: f64,
    pub naive_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankOptions {
    pub k: f64,
    pub top_k: Option<usize>,
    /// Rank by `mean - beta * std` instead of the mean.
    pub beta: f64,
    pub block_size: usize,
}

impl Default for RankOptions {
    fn default() -> Self {
        RankOptions {
            k: DEFAULT_K,
            top_k: None,
            beta: 0.0,
            block_size: DEFAULT_BLOCK_SIZE,
        }
    }
}

impl RankOptions {
    fn validate(&self) -> Result<()> {
        if self.k.is_nan() || self.k <= 0.0 {
            return Err(Error::config("k must be positive"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::config("beta must be a nonnegative number"));
        }
        Ok(())
    }
}

/// A configuration with its prediction, before ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub weights: CurveParams,
    pub bits: BitConfig,
    pub mean: f64,
    pub std: f64,
    pub memory_bytes: f64,
}

fn rank_key(c: &RankedConfig, beta: f64, k: f64) -> f64 {
    let a = c.predicted_accuracy - beta * c.predicted_std;
    -effective_accuracy(a, &c.bits, k)
}

/// Sorts by `-E` ascending, then lower memory, then lexicographic weights.
pub fn rank_candidates(candidates: Vec<Candidate>, opts: &RankOptions) -> Result<Vec<RankedConfig>> {
    opts.validate()?;
    let mut ranked: Vec<RankedConfig> = candidates
        .into_iter()
        .map(|c| RankedConfig {
            bit_sum: c.bits.bit_sum(),
            effective_accuracy: effective_accuracy(c.mean, &c.bits, opts.k),
            naive_loss: naive_loss(c.mean, &c.bits),
            weights: c.weights,
            bits: c.bits,
            predicted_accuracy: c.mean,
            predicted_std: c.std,
            memory_bytes: c.memory_bytes,
        })
        .collect();
    ranked.sort_by(|a, b| {
        rank_key(a, opts.beta, opts.k)
            .total_cmp(&rank_key(b, opts.beta, opts.k))
            .then(a.memory_bytes.total_cmp(&b.memory_bytes))
            .then_with(|| lex(a.weights.weights(), b.weights.weights()))
    });
    if let Some(k) = opts.top_k {
        ranked.truncate(k);
    }
    Ok(ranked)
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}

/// Predicts every pool point at the target task and ranks the results.
pub fn rank_configs(
    model: &GpModel,
    pool: &CandidatePool,
    basis: CurveBasis,
    spec: &NetworkSpec,
    opts: &RankOptions,
) -> Result<Vec<RankedConfig>> {
    candidates(model, pool, basis, spec, opts.block_size).and_then(|c| rank_candidates(c, opts))
}

/// Target-task predictions and memory for every pool point, in pool order.
pub fn candidates(
    model: &GpModel,
    pool: &CandidatePool,
    basis: CurveBasis,
    spec: &NetworkSpec,
    block_size: usize,
) -> Result<Vec<Candidate>> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    let target = model.task_count() - 1;
    let queries: Vec<TaskPoint> = pool
        .points()
        .iter()
        .map(|x| TaskPoint::new(x.clone(), target))
        .collect();
    let post = model.predict(&queries)?;
    let n = spec.conv_count();
    pool.points()
        .iter()
        .zip(post.mean.iter().zip(post.std()))
        .map(|(x, (&mean, std))| {
            let weights = CurveParams::new(basis, x.clone())?;
            let bits = bits_for_layers(&weights, n)?;
            let memory_bytes = model_size_bytes(spec, &bits, block_size)?;
            Ok(Candidate {
                weights,
                bits,
                mean,
                std,
                memory_bytes,
            })
        })
        .collect()
}

/// Indices of the points not dominated in (lower memory, higher accuracy),
/// in input order.
///
/// A point is dominated when another has memory no larger and accuracy no
/// smaller, with at least one strict. Equal points keep each other.
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i]
            .0
            .total_cmp(&points[j].0)
            .then(points[j].1.total_cmp(&points[i].1))
    });
    let mut keep = vec![false; points.len()];
    let mut best_prev = f64::NEG_INFINITY;
    let mut g = 0;
    while g < order.len() {
        let mem = points[order[g]].0;
        let top = points[order[g]].1;
        let mut end = g;
        while end < order.len() && points[order[end]].0 == mem {
            end += 1;
        }
        if top > best_prev {
            for &i in &order[g..end] {
                if points[i].1 == top {
                    keep[i] = true;
                }
            }
            best_prev = top;
        }
        g = end;
    }
    (0..points.len()).filter(|&i| keep[i]).collect()
}
