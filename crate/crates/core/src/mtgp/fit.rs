//! Type-II maximum likelihood for the kernel hyperparameters.
//!
//! The signal variance is held at 1; scale lives in the task factor `L`.
//! Parameters are optimized in log space (lengthscales, diagonal of `L`,
//! noise variances) with L-BFGS from several seeded starting points. Box
//! bounds are enforced by a quadratic penalty outside the box.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::cholesky_with_jitter;
use crate::mtgp::kernel::{check_observations, input_kernel, GpHyperparams};
use crate::mtgp::{GpModel, Observation, TaskSet};
use crate::optim::{minimize, LbfgsOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    /// Learn per-task noise. Off by default: the task ladder's values are used.
    pub learn_noise: bool,
    /// Lower bound on learned noise variance, normalized units.
    pub noise_floor: f64,
    pub lengthscale_bounds: (f64, f64),
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            restarts: 5,
            seed: 0,
            max_iters: 200,
            learn_noise: false,
            noise_floor: 1e-6,
            lengthscale_bounds: (1e-2, 10.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartReport {
    pub initial_lml: Option<f64>,
    pub final_lml: Option<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub restarts: Vec<RestartReport>,
    pub best_lml: f64,
    pub failed_restarts: usize,
}

const PENALTY: f64 = 100.0;
const FACTOR_DIAG_BOUNDS: (f64, f64) = (1e-3, 10.0);
const FACTOR_OFF_BOUND: f64 = 10.0;

struct Layout {
    d: usize,
    m: usize,
    learn_noise: bool,
    fixed_noise: Vec<f64>,
}

impl Layout {
    fn factor_len(&self) -> usize {
        self.m * (self.m + 1) / 2
    }

    fn len(&self) -> usize {
        self.d + self.factor_len() + if self.learn_noise { self.m } else { 0 }
    }

    fn factor_index(&self, row: usize, col: usize) -> usize {
        self.d + row * (row + 1) / 2 + col
    }

    fn noise_index(&self, l: usize) -> usize {
        self.d + self.factor_len() + l
    }

    fn unpack(&self, theta: &[f64]) -> (Vec<f64>, DMatrix<f64>, Vec<f64>) {
        let ls = theta[..self.d].iter().map(|v| v.exp()).collect();
        let mut l = DMatrix::zeros(self.m, self.m);
        for r in 0..self.m {
            for c in 0..=r {
                let v = theta[self.factor_index(r, c)];
                l[(r, c)] = if r == c { v.exp() } else { v };
            }
        }
        let noise = if self.learn_noise {
            (0..self.m).map(|t| theta[self.noise_index(t)].exp()).collect()
        } else {
            self.fixed_noise.clone()
        };
        (ls, l, noise)
    }

    fn pack(&self, ls: &[f64], l: &DMatrix<f64>, noise: &[f64]) -> Vec<f64> {
        let mut theta = vec![0.0; self.len()];
        for (t, v) in theta.iter_mut().zip(ls) {
            *t = v.ln();
        }
        for r in 0..self.m {
            for c in 0..=r {
                theta[self.factor_index(r, c)] = if r == c { l[(r, c)].ln() } else { l[(r, c)] };
            }
        }
        if self.learn_noise {
            for t in 0..self.m {
                theta[self.noise_index(t)] = noise[t].ln();
            }
        }
        theta
    }

    fn bounds(&self, cfg: &FitConfig) -> Vec<(f64, f64)> {
        let mut b = vec![(cfg.lengthscale_bounds.0.ln(), cfg.lengthscale_bounds.1.ln()); self.d];
        for r in 0..self.m {
            for c in 0..=r {
                b.push(if r == c {
                    (FACTOR_DIAG_BOUNDS.0.ln(), FACTOR_DIAG_BOUNDS.1.ln())
                } else {
                    (-FACTOR_OFF_BOUND, FACTOR_OFF_BOUND)
                });
            }
        }
        if self.learn_noise {
            // the ladder's noise acts as a floor
            b.extend(
                self.fixed_noise
                    .iter()
                    .map(|&v| (v.max(cfg.noise_floor).ln(), 10f64.ln().max(v.ln()))),
            );
        }
        b
    }
}

/// Log marginal likelihood and its gradient with respect to `theta`.
///
/// Diagonal jitter follows the same policy as [`GpModel::new`]. When it is
/// nonzero it is proportional to the mean diagonal, and that dependence on
/// `theta` is included in the gradient.
fn lml_with_gradient(
    layout: &Layout,
    theta: &[f64],
    data: &[Observation],
    z: &DVector<f64>,
) -> Option<(f64, Vec<f64>)> {
    let (ls, lf, noise) = layout.unpack(theta);
    let kf = &lf * lf.transpose();
    let n = data.len();
    let h = GpHyperparams {
        lengthscales: ls.clone(),
        signal_variance: 1.0,
        task_factor: vec![],
        noise: vec![],
        target_mean: 0.0,
        target_scale: 1.0,
    };
    let kx = DMatrix::from_fn(n, n, |i, j| input_kernel(&h, &data[i].x, &data[j].x));
    let mut sigma = DMatrix::from_fn(n, n, |i, j| kf[(data[i].task, data[j].task)] * kx[(i, j)]);
    for i in 0..n {
        sigma[(i, i)] += noise[data[i].task];
    }
    let (chol, rel) = cholesky_with_jitter(&sigma).ok()?;
    let alpha = chol.solve(z);
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let lml = -0.5 * z.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // G = alpha alpha^T - Sigma^-1; dLML/dtheta = 1/2 tr(G dSigma/dtheta)
    let g = &alpha * alpha.transpose() - chol.inverse();
    let tr_g = g.trace();
    // every diagonal entry moves by rel * mean(dSigma_ii)
    let jitter_term = |diag_sum: f64| 0.5 * tr_g * rel * diag_sum / n as f64;

    let mut grad = vec![0.0; layout.len()];
    for j in 0..layout.d {
        let l2 = ls[j] * ls[j];
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..a {
                let diff = data[a].x[j] - data[b].x[j];
                s += g[(a, b)] * kf[(data[a].task, data[b].task)] * kx[(a, b)] * diff * diff / l2;
            }
        }
        grad[j] = s; // symmetric pairs counted once, times 2, times 1/2
    }

    let m = layout.m;
    let mut t = DMatrix::zeros(m, m);
    let mut counts = vec![0usize; m];
    for a in 0..n {
        counts[data[a].task] += 1;
        for b in 0..n {
            t[(data[a].task, data[b].task)] += g[(a, b)] * kx[(a, b)];
        }
    }
    // jitter depends on Kf[p,p] through the mean diagonal
    for p in 0..m {
        t[(p, p)] += tr_g * rel * counts[p] as f64 / n as f64;
    }
    let grad_l: DMatrix<f64> = (&t + t.transpose()) * &lf * 0.5;
    for r in 0..m {
        for c in 0..=r {
            let v = grad_l[(r, c)];
            grad[layout.factor_index(r, c)] = if r == c { v * lf[(r, c)] } else { v };
        }
    }

    if layout.learn_noise {
        for l in 0..m {
            let diag: f64 = (0..n).filter(|&i| data[i].task == l).map(|i| g[(i, i)]).sum();
            grad[layout.noise_index(l)] = noise[l] * (0.5 * diag + jitter_term(counts[l] as f64));
        }
    }
    Some((lml, grad))
}

fn penalty(theta: &[f64], bounds: &[(f64, f64)]) -> (f64, Vec<f64>) {
    let mut p = 0.0;
    let mut g = vec![0.0; theta.len()];
    for (i, (&t, &(lo, hi))) in theta.iter().zip(bounds).enumerate() {
        if t < lo {
            p += PENALTY * (lo - t).powi(2);
            g[i] = -2.0 * PENALTY * (lo - t);
        } else if t > hi {
            p += PENALTY * (t - hi).powi(2);
            g[i] = 2.0 * PENALTY * (t - hi);
        }
    }
    (p, g)
}

fn normalization(data: &[Observation]) -> (f64, f64) {
    let n = data.len() as f64;
    let mean = data.iter().map(|o| o.y).sum::<f64>() / n;
    let var = data.iter().map(|o| (o.y - mean).powi(2)).sum::<f64>() / n;
    let scale = if var.sqrt() > 1e-9 { var.sqrt() } else { 1.0 };
    (mean, scale)
}

fn initial_point(
    layout: &Layout,
    restart: usize,
    rng: &mut ChaCha8Rng,
    prior_noise: &[f64],
    cfg: &FitConfig,
) -> Vec<f64> {
    let m = layout.m;
    let clamp_noise = |v: f64| v.max(cfg.noise_floor);
    if restart == 0 {
        let ls = vec![0.3; layout.d];
        let kf = DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.5 });
        let l = nalgebra::Cholesky::new(kf).expect("diagonally dominant").unpack();
        let noise: Vec<f64> = prior_noise.iter().map(|&v| clamp_noise(v)).collect();
        return layout.pack(&ls, &l, &noise);
    }
    let ls: Vec<f64> = (0..layout.d)
        .map(|_| rng.random_range(0.05f64.ln()..2f64.ln()).exp())
        .collect();
    let l = DMatrix::from_fn(m, m, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => rng.random_range(0.3..1.2),
        std::cmp::Ordering::Greater => rng.random_range(-0.8..0.8),
        std::cmp::Ordering::Less => 0.0,
    });
    let noise: Vec<f64> = prior_noise
        .iter()
        .map(|&v| clamp_noise(v * rng.random_range(0f64..3f64.ln()).exp()))
        .collect();
    layout.pack(&ls, &l, &noise)
}

/// Fits hyperparameters by maximizing the log marginal likelihood.
///
/// Targets are normalized to zero mean and unit variance first. The best
/// restart wins; restarts that fail to evaluate are counted in the report.
pub fn fit(data: &[Observation], tasks: &TaskSet, cfg: &FitConfig) -> Result<(GpModel, FitReport)> {
    let Some(first) = data.first() else {
        return Err(Error::Fit("no observations".into()));
    };
    let d = first.x.len();
    let m = tasks.len();
    let (mean, scale) = normalization(data);
    let prior_noise: Vec<f64> = tasks.noise().iter().map(|v| v / (scale * scale)).collect();
    let probe = GpHyperparams::new(vec![1.0; d.max(1)], &DMatrix::identity(m, m), vec![0.0; m])?;
    if d == 0 {
        return Err(Error::Fit("observations have no inputs".into()));
    }
    check_observations(&probe, data)?;

    let layout = Layout {
        d,
        m,
        learn_noise: cfg.learn_noise,
        fixed_noise: prior_noise.clone(),
    };
    let bounds = layout.bounds(cfg);
    let z = DVector::from_iterator(data.len(), data.iter().map(|o| (o.y - mean) / scale));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let objective = |theta: &[f64]| {
        let (lml, g) = lml_with_gradient(&layout, theta, data, &z)?;
        let (p, pg) = penalty(theta, &bounds);
        Some((-lml + p, g.iter().zip(&pg).map(|(a, b)| -a + b).collect::<Vec<_>>()))
    };

    let mut reports = Vec::with_capacity(cfg.restarts.max(1));
    let mut best: Option<(f64, Vec<f64>)> = None;
    for r in 0..cfg.restarts.max(1) {
        let theta0 = initial_point(&layout, r, &mut rng, &prior_noise, cfg);
        let initial_lml = lml_with_gradient(&layout, &theta0, data, &z).map(|(v, _)| v);
        let opts = LbfgsOptions {
            max_iters: cfg.max_iters,
            ..Default::default()
        };
        let Some(found) = minimize(objective, theta0, opts) else {
            reports.push(RestartReport {
                initial_lml,
                final_lml: None,
                iterations: 0,
            });
            continue;
        };
        let final_lml = lml_with_gradient(&layout, &found.x, data, &z).map(|(v, _)| v);
        reports.push(RestartReport {
            initial_lml,
            final_lml,
            iterations: found.iterations,
        });
        if let Some(v) = final_lml {
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, found.x));
            }
        }
    }
    let failed = reports.iter().filter(|r| r.final_lml.is_none()).count();
    let Some((best_lml, theta)) = best else {
        return Err(Error::Fit(format!("all {} restarts failed", reports.len())));
    };
    let (ls, l, noise) = layout.unpack(&theta);
    let mut hyper = GpHyperparams::new(ls, &l, noise)?;
    hyper.target_mean = mean;
    hyper.target_scale = scale;
    let model = GpModel::new(hyper, data.to_vec())?;
    Ok((
        model,
        FitReport {
            restarts: reports,
            best_lml,
            failed_restarts: failed,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_data() -> Vec<Observation> {
        let mut data = Vec::new();
        for i in 0..7 {
            let x = i as f64 / 6.0;
            data.push(Observation::new(vec![x, 1.0 - x * x], 0, (3.0 * x).sin()));
            if i % 2 == 0 {
                data.push(Observation::new(vec![x, 0.5], 1, (3.0 * x).sin() + 0.1 * x));
            }
        }
        data
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = toy_data();
        let z = DVector::from_iterator(data.len(), data.iter().map(|o| o.y));
        for learn_noise in [true, false] {
            let layout = Layout {
                d: 2,
                m: 2,
                learn_noise,
                fixed_noise: vec![1e-3, 2e-3],
            };
            let theta: Vec<f64> = (0..layout.len()).map(|i| -0.7 + 0.13 * i as f64).collect();
            let (_, g) = lml_with_gradient(&layout, &theta, &data, &z).unwrap();
            for i in 0..theta.len() {
                let h = 1e-6;
                let mut tp = theta.clone();
                tp[i] += h;
                let mut tm = theta.clone();
                tm[i] -= h;
                let fd = (lml_with_gradient(&layout, &tp, &data, &z).unwrap().0
                    - lml_with_gradient(&layout, &tm, &data, &z).unwrap().0)
                    / (2.0 * h);
                assert!(
                    (fd - g[i]).abs() < 1e-5 * (1.0 + fd.abs()),
                    "param {i}: fd {fd} vs {}",
                    g[i]
                );
            }
        }
    }

    #[test]
    fn model_lml_agrees_with_objective() {
        let data = toy_data();
        let tasks = TaskSet::from_epochs(vec![0, 5]).unwrap();
        let (model, report) = fit(&data, &tasks, &FitConfig::default()).unwrap();
        assert!((model.log_marginal_likelihood() - report.best_lml).abs() < 1e-6);
        for r in &report.restarts {
            if let (Some(a), Some(b)) = (r.initial_lml, r.final_lml) {
                assert!(b >= a - 1e-9);
            }
        }
    }
}
