use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mtgp::Observation;

/// Kernel hyperparameters plus the target normalization they were fitted under.
///
/// Noise variances are in normalized units: an observation `y` enters the
/// model as `(y - target_mean) / target_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    /// Lower-triangular factor `L` of `K^f = L L^T`, row `l` holding `l + 1` entries.
    pub task_factor: Vec<Vec<f64>>,
    pub noise: Vec<f64>,
    pub target_mean: f64,
    pub target_scale: f64,
}

impl GpHyperparams {
    /// Identity normalization and unit signal variance.
    pub fn new(lengthscales: Vec<f64>, task_factor: &DMatrix<f64>, noise: Vec<f64>) -> Result<Self> {
        let m = task_factor.nrows();
        let rows = (0..m).map(|l| (0..=l).map(|j| task_factor[(l, j)]).collect()).collect();
        let h = GpHyperparams {
            lengthscales,
            signal_variance: 1.0,
            task_factor: rows,
            noise,
            target_mean: 0.0,
            target_scale: 1.0,
        };
        h.validate()?;
        Ok(h)
    }

    /// Builds the factor from a task covariance via Cholesky.
    pub fn with_task_covariance(lengthscales: Vec<f64>, kf: &DMatrix<f64>, noise: Vec<f64>) -> Result<Self> {
        let l = nalgebra::Cholesky::new(kf.clone())
            .ok_or_else(|| Error::domain("task covariance is not positive definite"))?
            .unpack();
        Self::new(lengthscales, &l, noise)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() || self.lengthscales.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::domain("lengthscales must be positive"));
        }
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(Error::domain("signal variance must be positive"));
        }
        let m = self.task_factor.len();
        if m == 0 || self.task_factor.iter().enumerate().any(|(l, row)| row.len() != l + 1) {
            return Err(Error::domain("task factor must be lower triangular"));
        }
        if self.noise.len() != m || self.noise.iter().any(|&s| !(s >= 0.0 && s.is_finite())) {
            return Err(Error::domain("need one non-negative noise variance per task"));
        }
        if !(self.target_scale > 0.0 && self.target_scale.is_finite()) || !self.target_mean.is_finite() {
            return Err(Error::domain("invalid target normalization"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn task_count(&self) -> usize {
        self.task_factor.len()
    }

    pub fn task_factor_matrix(&self) -> DMatrix<f64> {
        let m = self.task_count();
        DMatrix::from_fn(m, m, |i, j| if j <= i { self.task_factor[i][j] } else { 0.0 })
    }

    /// `K^f = L L^T`.
    pub fn task_covariance(&self) -> DMatrix<f64> {
        let l = self.task_factor_matrix();
        &l * l.transpose()
    }

    pub(crate) fn normalize(&self, y: f64) -> f64 {
        (y - self.target_mean) / self.target_scale
    }
}

/// `sigma_f^2 exp(-1/2 sum_j ((x_j - x'_j) / l_j)^2)`.
pub fn input_kernel(h: &GpHyperparams, x: &[f64], x2: &[f64]) -> f64 {
    let r2: f64 = x
        .iter()
        .zip(x2)
        .zip(&h.lengthscales)
        .map(|((a, b), l)| ((a - b) / l).powi(2))
        .sum();
    h.signal_variance * (-0.5 * r2).exp()
}

/// `K^f[l, l'] * k(x, x')`.
pub fn kernel_entry(h: &GpHyperparams, x: &[f64], l: usize, x2: &[f64], l2: usize) -> Result<f64> {
    if x.len() != h.dim() || x2.len() != h.dim() {
        return Err(Error::LengthMismatch {
            expected: h.dim(),
            actual: if x.len() != h.dim() { x.len() } else { x2.len() },
        });
    }
    let m = h.task_count();
    if l >= m || l2 >= m {
        return Err(Error::domain(format!("task index out of range for {m} tasks")));
    }
    let kf = h.task_covariance();
    Ok(kf[(l, l2)] * input_kernel(h, x, x2))
}

pub(crate) fn check_observations(h: &GpHyperparams, data: &[Observation]) -> Result<()> {
    for o in data {
        if o.x.len() != h.dim() {
            return Err(Error::LengthMismatch {
                expected: h.dim(),
                actual: o.x.len(),
            });
        }
        if o.task >= h.task_count() {
            return Err(Error::domain(format!("observation task {} out of range", o.task)));
        }
    }
    Ok(())
}

/// Prior covariance of the observations plus per-task noise and `jitter` on the diagonal.
pub fn build_train_covariance(data: &[Observation], h: &GpHyperparams, jitter: f64) -> DMatrix<f64> {
    let kf = h.task_covariance();
    let n = data.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kf[(data[i].task, data[j].task)] * input_kernel(h, &data[i].x, &data[j].x);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += h.noise[data[i].task] + jitter;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(l: f64) -> GpHyperparams {
        GpHyperparams::new(vec![l], &DMatrix::identity(1, 1), vec![0.0]).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let h = single(0.4);
        assert_eq!(kernel_entry(&h, &[0.3], 0, &[0.3], 0).unwrap(), 1.0);
        let v = kernel_entry(&h, &[0.2], 0, &[0.6], 0).unwrap();
        assert!((v - (-0.5_f64).exp()).abs() < 1e-15);
        assert!((v - 0.60653).abs() < 1e-5);

        let indep = GpHyperparams::new(vec![0.4], &DMatrix::identity(2, 2), vec![0.0, 0.0]).unwrap();
        assert_eq!(kernel_entry(&indep, &[0.2], 0, &[0.2], 1).unwrap(), 0.0);
        assert!(kernel_entry(&h, &[0.2, 0.1], 0, &[0.2], 0).is_err());
        assert!(kernel_entry(&h, &[0.2], 1, &[0.2], 0).is_err());
    }

    #[test]
    fn single_observation_covariance() {
        let h = single(0.4);
        let k = build_train_covariance(&[Observation::new(vec![0.5], 0, 0.7)], &h, 1e-6);
        assert_eq!(k.shape(), (1, 1));
        assert!((k[(0, 0)] - (1.0 + 1e-6)).abs() < 1e-15);
    }

    #[test]
    fn factor_round_trip() {
        let kf = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 0.5]);
        let h = GpHyperparams::with_task_covariance(vec![0.3], &kf, vec![0.0, 0.0]).unwrap();
        assert!((h.task_covariance() - kf).abs().max() < 1e-14);
    }
}
