use std::cmp::Ordering;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::CandidatePool;
use crate::error::{Error, Result};
use crate::linalg::pivoted_cholesky;
use crate::mtgp::{input_kernel, GpModel, TaskPoint, TaskSet};

/// Relative tolerance of the pivoted factorization of the target posterior.
const PIVOT_TOL: f64 = 1e-10;
/// Conditional variance is never taken below this fraction of the marginal.
const REL_VAR_FLOOR: f64 = 1e-10;
/// Largest reportable gain, reached when an observation pins down its own
/// latent value exactly.
pub const GAIN_CAP: f64 = 11.512_925_464_970_229; // ln(1e10) / 2

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainEstimate {
    pub nats: f64,
    /// The variances involved hit a numerical floor.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionChoice {
    pub x: Vec<f64>,
    pub pool_index: usize,
    /// Zero-based task index.
    pub task: usize,
    pub info_gain: f64,
    pub cost: f64,
    pub score: f64,
}

/// Gain from the predictive variance `total` of `y` and the part `explained`
/// by knowing the target on the pool.
fn gain_from(total: f64, explained: f64, noise: f64) -> GainEstimate {
    if !total.is_finite() || total <= 0.0 {
        return GainEstimate {
            nats: 0.0,
            degenerate: true,
        };
    }
    let floor = noise.max(REL_VAR_FLOOR * total);
    let raw = total - explained.max(0.0);
    let degenerate = raw < floor - 1e-8 * total;
    let cond = raw.max(floor);
    GainEstimate {
        nats: (0.5 * (total / cond).ln()).clamp(0.0, GAIN_CAP),
        degenerate,
    }
}

/// Target-task posterior on the pool, factored once per model.
struct TargetFactor {
    kx: DMatrix<f64>,
    v_target: DMatrix<f64>,
    piv: Vec<usize>,
    l_r: DMatrix<f64>,
}

impl TargetFactor {
    fn new(model: &GpModel, pool: &CandidatePool) -> Self {
        let h = model.hyper();
        let m = model.task_count() - 1;
        let kf = h.task_covariance();
        let pts = pool.points();
        let p = pts.len();
        let kx = DMatrix::from_fn(p, p, |i, j| input_kernel(h, &pts[i], &pts[j]));
        let v_target = model.whiten(&model.train_cross(&task_points(pool, m)));
        let s = &kx * kf[(m, m)] - v_target.transpose() * &v_target;
        let (piv, l_r) = pivoted_cholesky(&s, PIVOT_TOL);
        TargetFactor { kx, v_target, piv, l_r }
    }

    /// `|L_r^-1 c[piv]|^2` for each column `c` of `cross` (pool rows).
    fn explained(&self, cross: &DMatrix<f64>) -> Vec<f64> {
        if self.piv.is_empty() {
            return vec![0.0; cross.ncols()];
        }
        let sub = DMatrix::from_fn(self.piv.len(), cross.ncols(), |i, j| cross[(self.piv[i], j)]);
        let w = self
            .l_r
            .solve_lower_triangular(&sub)
            .expect("pivoted factor has a positive diagonal");
        w.column_iter().map(|c| c.norm_squared()).collect()
    }
}

fn task_points(pool: &CandidatePool, task: usize) -> Vec<TaskPoint> {
    pool.points().iter().map(|x| TaskPoint::new(x.clone(), task)).collect()
}

fn check(model: &GpModel, pool: &CandidatePool) -> Result<()> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if pool.dim() != model.dim() {
        return Err(Error::LengthMismatch {
            expected: model.dim(),
            actual: pool.dim(),
        });
    }
    Ok(())
}

/// Mutual information (nats) between a noisy observation of task `task` at
/// `x` and the target-task values on the pool.
///
/// `x` need not be a pool point.
pub fn info_gain(model: &GpModel, pool: &CandidatePool, x: &[f64], task: usize) -> Result<GainEstimate> {
    check(model, pool)?;
    if x.len() != model.dim() {
        return Err(Error::LengthMismatch {
            expected: model.dim(),
            actual: x.len(),
        });
    }
    if task >= model.task_count() {
        return Err(Error::domain(format!("task {task} out of range")));
    }
    let factor = TargetFactor::new(model, pool);
    let h = model.hyper();
    let kf = h.task_covariance();
    let m = model.task_count() - 1;
    let v_a = model.whiten(&model.train_cross(&[TaskPoint::new(x.to_vec(), task)]));
    let k_row = DMatrix::from_fn(pool.len(), 1, |i, _| input_kernel(h, &pool.points()[i], x));
    let cross = k_row * kf[(task, m)] - factor.v_target.transpose() * &v_a;
    let explained = factor.explained(&cross)[0];
    let total = kf[(task, task)] * input_kernel(h, x, x) - v_a.norm_squared() + h.noise[task];
    Ok(gain_from(total, explained, h.noise[task]))
}

/// Gains for every `(task, pool point)` pair, indexed `[task][point]`.
pub fn gain_table(model: &GpModel, pool: &CandidatePool) -> Result<Vec<Vec<GainEstimate>>> {
    check(model, pool)?;
    let factor = TargetFactor::new(model, pool);
    let h = model.hyper();
    let kf = h.task_covariance();
    let m = model.task_count() - 1;
    let mut table = Vec::with_capacity(m + 1);
    for l in 0..=m {
        let v_l = if l == m {
            factor.v_target.clone()
        } else {
            model.whiten(&model.train_cross(&task_points(pool, l)))
        };
        // column j: covariance between f_l(pool_j) and f_m(pool)
        let cross = &factor.kx * kf[(l, m)] - factor.v_target.transpose() * &v_l;
        let explained = factor.explained(&cross);
        let row = (0..pool.len())
            .map(|j| {
                let total = kf[(l, l)] * factor.kx[(j, j)] - v_l.column(j).norm_squared() + h.noise[l];
                gain_from(total, explained[j], h.noise[l])
            })
            .collect();
        table.push(row);
    }
    Ok(table)
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Argmax of `gain / cost` over allowed tasks; ties go to the higher task,
/// then the lexicographically smaller point.
pub fn best_action(
    gains: &[Vec<f64>],
    pool: &CandidatePool,
    costs: &[f64],
    allowed: impl Fn(usize) -> bool,
) -> Option<ActionChoice> {
    let mut best: Option<ActionChoice> = None;
    for (l, row) in gains.iter().enumerate() {
        if !allowed(l) {
            continue;
        }
        for (j, &g) in row.iter().enumerate() {
            let score = g / costs[l];
            let better = match &best {
                None => true,
                Some(b) => match score.total_cmp(&b.score) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => l > b.task || (l == b.task && lex(pool.point(j), &b.x).is_lt()),
                },
            };
            if better {
                best = Some(ActionChoice {
                    x: pool.point(j).to_vec(),
                    pool_index: j,
                    task: l,
                    info_gain: g,
                    cost: costs[l],
                    score,
                });
            }
        }
    }
    best
}

/// Best action whose cost fits in `remaining`; `None` when nothing is affordable.
pub fn select_action(
    model: &GpModel,
    pool: &CandidatePool,
    tasks: &TaskSet,
    remaining: f64,
) -> Result<Option<ActionChoice>> {
    if tasks.len() != model.task_count() {
        return Err(Error::LengthMismatch {
            expected: model.task_count(),
            actual: tasks.len(),
        });
    }
    let costs = tasks.costs();
    if !costs.iter().any(|&c| c <= remaining) {
        return Ok(None);
    }
    let table = gain_table(model, pool)?;
    let gains: Vec<Vec<f64>> = table.iter().map(|r| r.iter().map(|g| g.nats).collect()).collect();
    Ok(best_action(&gains, pool, costs, |l| costs[l] <= remaining))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mtgp::{GpHyperparams, Observation};

    fn model(kf: &[f64], noise: Vec<f64>, data: Vec<Observation>) -> GpModel {
        let m = noise.len();
        let kf = DMatrix::from_row_slice(m, m, kf);
        let h = GpHyperparams::with_task_covariance(vec![0.3], &kf, noise).unwrap();
        GpModel::new(h, data).unwrap()
    }

    #[test]
    fn observing_the_target_noise_free_is_capped() {
        let g = model(
            &[1.0, 0.5, 0.5, 1.0],
            vec![1e-3, 0.0],
            vec![Observation::new(vec![0.2], 0, 0.1)],
        );
        let pool = CandidatePool::new(vec![vec![0.0], vec![0.5], vec![1.0]]).unwrap();
        let e = info_gain(&g, &pool, &[0.5], 1).unwrap();
        assert_eq!(e.nats, GAIN_CAP);
    }

    #[test]
    fn independent_task_carries_nothing() {
        let g = model(
            &[1.0, 0.0, 0.0, 1.0],
            vec![1e-3, 1e-3],
            vec![Observation::new(vec![0.2], 1, 0.3)],
        );
        let pool = CandidatePool::grid_1d(9).unwrap();
        for x in [0.0, 0.33, 0.9] {
            assert!(info_gain(&g, &pool, &[x], 0).unwrap().nats.abs() < 1e-8);
        }
    }

    #[test]
    fn batched_table_matches_single_queries() {
        let data = vec![
            Observation::new(vec![0.1], 0, 0.2),
            Observation::new(vec![0.6], 0, 0.5),
            Observation::new(vec![0.4], 1, 0.6),
        ];
        let g = model(&[1.0, 0.8, 0.8, 1.0], vec![1e-2, 1e-3], data);
        let pool = CandidatePool::grid_1d(7).unwrap();
        let table = gain_table(&g, &pool).unwrap();
        for (l, row) in table.iter().enumerate() {
            for (j, x) in pool.points().iter().enumerate() {
                let single = info_gain(&g, &pool, x, l).unwrap();
                assert!((single.nats - row[j].nats).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn expensive_task_never_wins_equal_gains() {
        let pool = CandidatePool::grid_1d(5).unwrap();
        let gains = vec![vec![0.3; 5]; 4];
        let a = best_action(&gains, &pool, &[1.0, 1.0, 1.0, 10.0], |_| true).unwrap();
        assert_eq!(a.task, 2);
        assert_eq!(a.x, vec![0.0]);
    }

    #[test]
    fn single_candidate_single_task() {
        let pool = CandidatePool::new(vec![vec![0.4]]).unwrap();
        let a = best_action(&[vec![0.0]], &pool, &[2.0], |_| true).unwrap();
        assert_eq!((a.pool_index, a.task, a.score), (0, 0, 0.0));
    }

    #[test]
    fn gain_floor_handling() {
        assert_eq!(gain_from(0.0, 0.0, 0.0).nats, 0.0);
        assert!(gain_from(0.0, 0.0, 0.0).degenerate);
        let e = gain_from(1.0, 0.5, 0.1);
        assert!((e.nats - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert!(!e.degenerate);
    }
}
