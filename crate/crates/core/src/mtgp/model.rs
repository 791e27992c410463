use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, log_det, mean_diagonal};
use crate::mtgp::kernel::{build_train_covariance, check_observations, input_kernel, GpHyperparams};
use crate::mtgp::{Observation, TaskPoint};

/// A conditioned multi-task GP. Immutable once built.
#[derive(Debug, Clone)]
pub struct GpModel {
    hyper: GpHyperparams,
    data: Vec<Observation>,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
}

/// Serializable form of a model: hyperparameters plus the training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpSnapshot {
    pub hyper: GpHyperparams,
    pub data: Vec<Observation>,
}

/// Predictive distribution of the latent function, in accuracy units.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub covariance: Option<DMatrix<f64>>,
}

impl Posterior {
    pub fn std(&self) -> Vec<f64> {
        self.variance.iter().map(|v| v.sqrt()).collect()
    }
}

impl GpModel {
    pub fn new(hyper: GpHyperparams, data: Vec<Observation>) -> Result<Self> {
        hyper.validate()?;
        if data.is_empty() {
            return Err(Error::domain("a GP model needs at least one observation"));
        }
        check_observations(&hyper, &data)?;
        let sigma = build_train_covariance(&data, &hyper, 0.0);
        let (chol, rel) = cholesky_with_jitter(&sigma)?;
        let jitter = rel * mean_diagonal(&sigma);
        let z = DVector::from_iterator(data.len(), data.iter().map(|o| hyper.normalize(o.y)));
        let alpha = chol.solve(&z);
        Ok(GpModel {
            hyper,
            data,
            chol,
            alpha,
            jitter,
        })
    }

    pub fn from_snapshot(s: GpSnapshot) -> Result<Self> {
        Self::new(s.hyper, s.data)
    }

    pub fn snapshot(&self) -> GpSnapshot {
        GpSnapshot {
            hyper: self.hyper.clone(),
            data: self.data.clone(),
        }
    }

    /// Same hyperparameters, conditioned on extra observations.
    pub fn with_observations(&self, extra: impl IntoIterator<Item = Observation>) -> Result<Self> {
        let mut data = self.data.clone();
        data.extend(extra);
        Self::new(self.hyper.clone(), data)
    }

    pub fn hyper(&self) -> &GpHyperparams {
        &self.hyper
    }

    pub fn data(&self) -> &[Observation] {
        &self.data
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.hyper.dim()
    }

    pub fn task_count(&self) -> usize {
        self.hyper.task_count()
    }

    /// `-1/2 z^T S^-1 z - 1/2 log|S| - N/2 log 2pi` on normalized targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let z = DVector::from_iterator(self.data.len(), self.data.iter().map(|o| self.hyper.normalize(o.y)));
        let n = self.data.len() as f64;
        -0.5 * z.dot(&self.alpha) - 0.5 * log_det(&self.chol) - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }

    fn check_queries(&self, queries: &[TaskPoint]) -> Result<()> {
        for q in queries {
            if q.x.len() != self.dim() {
                return Err(Error::LengthMismatch {
                    expected: self.dim(),
                    actual: q.x.len(),
                });
            }
            if q.task >= self.task_count() {
                return Err(Error::domain(format!("query task {} out of range", q.task)));
            }
        }
        Ok(())
    }

    /// Prior covariance between training points (rows) and queries (columns).
    pub(crate) fn train_cross(&self, queries: &[TaskPoint]) -> DMatrix<f64> {
        let kf = self.hyper.task_covariance();
        DMatrix::from_fn(self.data.len(), queries.len(), |i, j| {
            let (o, q) = (&self.data[i], &queries[j]);
            kf[(o.task, q.task)] * input_kernel(&self.hyper, &o.x, &q.x)
        })
    }

    /// Prior covariance among queries.
    pub(crate) fn prior_cov(&self, a: &[TaskPoint], b: &[TaskPoint]) -> DMatrix<f64> {
        let kf = self.hyper.task_covariance();
        DMatrix::from_fn(a.len(), b.len(), |i, j| {
            kf[(a[i].task, b[j].task)] * input_kernel(&self.hyper, &a[i].x, &b[j].x)
        })
    }

    /// `L^-1 B` with `L` the lower Cholesky factor of the training covariance.
    pub(crate) fn whiten(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol
            .l_dirty()
            .solve_lower_triangular(b)
            .expect("cholesky factor has a positive diagonal")
    }

    /// Normalized posterior means for queries given their whitened cross covariance.
    pub(crate) fn normalized_mean(&self, cross: &DMatrix<f64>) -> DVector<f64> {
        cross.transpose() * &self.alpha
    }

    pub fn predict(&self, queries: &[TaskPoint]) -> Result<Posterior> {
        self.predict_impl(queries, false)
    }

    /// Like [`predict`](Self::predict) but also returns the full predictive covariance.
    pub fn predict_full(&self, queries: &[TaskPoint]) -> Result<Posterior> {
        self.predict_impl(queries, true)
    }

    fn predict_impl(&self, queries: &[TaskPoint], full: bool) -> Result<Posterior> {
        self.check_queries(queries)?;
        let cross = self.train_cross(queries);
        let mean_n = self.normalized_mean(&cross);
        let v = self.whiten(&cross);
        let kf = self.hyper.task_covariance();
        let s2 = self.hyper.target_scale * self.hyper.target_scale;
        let variance = queries
            .iter()
            .enumerate()
            .map(|(j, q)| {
                let prior = kf[(q.task, q.task)] * self.hyper.signal_variance;
                let explained: f64 = v.column(j).norm_squared();
                (prior - explained).max(0.0) * s2
            })
            .collect();
        let mean = mean_n
            .iter()
            .map(|m| m * self.hyper.target_scale + self.hyper.target_mean)
            .collect();
        let covariance = full.then(|| (self.prior_cov(queries, queries) - v.transpose() * &v) * s2);
        Ok(Posterior {
            mean,
            variance,
            covariance,
        })
    }
}
