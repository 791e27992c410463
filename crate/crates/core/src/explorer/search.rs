use std::path::Path;

use serde::{Deserialize, Serialize};

use super::history::{read_history, HistoryLog, HistoryRecord, Phase, RunHeader};
use super::{select_action, CandidatePool};
use crate::curvespace::{bits_for_layers, CurveBasis, CurveParams};
use crate::error::{Error, Result};
use crate::mtgp::{fit, FitConfig, FitReport, GpHyperparams, GpModel, Observation, TaskPoint, TaskSet};
use crate::objective::{Objective, ObjectiveRequest, Status};

/// Evaluation budget in task-cost units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub total: f64,
    pub spent: f64,
    pub max_evaluations: Option<usize>,
    pub evaluations: usize,
}

impl Budget {
    pub fn new(total: f64, max_evaluations: Option<usize>) -> Result<Self> {
        if !(total >= 0.0 && total.is_finite()) {
            return Err(Error::config(format!(
                "budget must be a nonnegative number, got {total}"
            )));
        }
        Ok(Budget {
            total,
            spent: 0.0,
            max_evaluations,
            evaluations: 0,
        })
    }

    pub fn remaining(&self) -> f64 {
        self.total - self.spent
    }

    pub fn can_afford(&self, cost: f64) -> bool {
        cost <= self.remaining() && self.max_evaluations.is_none_or(|m| self.evaluations < m)
    }

    fn charge(&mut self, cost: f64) {
        debug_assert!(self.can_afford(cost));
        self.spent += cost;
        self.evaluations += 1;
    }
}

/// Everything that defines a search run.
#[derive(Debug, Clone)]
pub struct SearchProblem {
    pub basis: CurveBasis,
    /// Number of quantized layers the curve is sampled at.
    pub layers: usize,
    pub tasks: TaskSet,
    pub pool: CandidatePool,
    pub budget: f64,
    pub max_evaluations: Option<usize>,
    pub seed: u64,
    /// Full hyperparameter refit after this many new observations.
    pub refit_every: usize,
    pub fit: FitConfig,
    /// Space-filling seed points at the cheapest task; `dim + 1` by default.
    pub init_points: Option<usize>,
}

impl SearchProblem {
    pub fn new(basis: CurveBasis, layers: usize, tasks: TaskSet, pool: CandidatePool, budget: f64, seed: u64) -> Self {
        SearchProblem {
            basis,
            layers,
            tasks,
            pool,
            budget,
            max_evaluations: None,
            seed,
            refit_every: 5,
            fit: FitConfig::default(),
            init_points: None,
        }
    }

    fn header(&self) -> RunHeader {
        RunHeader {
            seed: self.seed,
            basis: self.basis,
            layers: self.layers,
            tasks: self.tasks.clone(),
            budget: self.budget,
            max_evaluations: self.max_evaluations,
            pool_size: self.pool.len(),
            dim: self.pool.dim(),
        }
    }

    fn validate(&self) -> Result<()> {
        Budget::new(self.budget, self.max_evaluations)?;
        if self.layers == 0 {
            return Err(Error::config("layer count must be positive"));
        }
        if self.refit_every == 0 {
            return Err(Error::config("refit_every must be positive"));
        }
        Ok(())
    }

    /// `(pool index, task)` pairs of the initial design.
    fn initial_design(&self) -> Vec<(usize, usize)> {
        let d = self.pool.dim();
        let count = self.init_points.unwrap_or(d + 1);
        let cheap = self.tasks.cheapest();
        let mut design: Vec<(usize, usize)> = self
            .pool
            .space_filling(count, self.seed)
            .into_iter()
            .map(|i| (i, cheap))
            .collect();
        let target = self.tasks.target();
        if cheap != target || design.is_empty() {
            design.push((self.pool.nearest(&vec![0.5; d]), target));
        }
        design
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub model: GpModel,
    pub history: Vec<HistoryRecord>,
    pub budget: Budget,
    pub fit_report: FitReport,
}

impl SearchOutcome {
    /// Pool point with the highest target-task posterior mean.
    pub fn target_argmax(&self, pool: &CandidatePool) -> Result<(usize, f64)> {
        posterior_argmax(&self.model, pool)
    }
}

/// Pool index and value of the largest target-task posterior mean; the
/// lowest index wins ties.
pub fn posterior_argmax(model: &GpModel, pool: &CandidatePool) -> Result<(usize, f64)> {
    let target = model.task_count() - 1;
    let pts: Vec<TaskPoint> = pool
        .points()
        .iter()
        .map(|x| TaskPoint::new(x.clone(), target))
        .collect();
    let post = model.predict(&pts)?;
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &m) in post.mean.iter().enumerate() {
        if m > best.1 {
            best = (i, m);
        }
    }
    Ok(best)
}

fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct State<'a> {
    problem: &'a SearchProblem,
    observations: Vec<Observation>,
    history: Vec<HistoryRecord>,
    budget: Budget,
    /// Observations available when exploration started; refits happen at
    /// `base + k * refit_every`.
    base: usize,
    fitted: Option<(usize, GpHyperparams, FitReport)>,
}

impl State<'_> {
    fn fit_at(&mut self, count: usize) -> Result<(GpHyperparams, FitReport)> {
        if let Some((n, h, r)) = &self.fitted {
            if *n == count {
                return Ok((h.clone(), r.clone()));
            }
        }
        let config = FitConfig {
            seed: mix(self.problem.seed, count as u64),
            ..self.problem.fit.clone()
        };
        let (model, report) = fit(&self.observations[..count], &self.problem.tasks, &config)?;
        let h = model.hyper().clone();
        self.fitted = Some((count, h.clone(), report.clone()));
        Ok((h, report))
    }

    /// Model for the current data: refit on schedule, posterior update otherwise.
    fn model(&mut self) -> Result<GpModel> {
        let n = self.observations.len();
        let every = self.problem.refit_every;
        let point = self.base + (n - self.base) / every * every;
        let (h, _) = self.fit_at(point)?;
        GpModel::new(h, self.observations.clone())
    }

    fn evaluate(
        &mut self,
        objective: &mut (impl Objective + ?Sized),
        pool_index: usize,
        task: usize,
        phase: Phase,
        gain: Option<f64>,
        score: Option<f64>,
    ) -> Result<HistoryRecord> {
        let p = self.problem;
        let x = p.pool.point(pool_index).to_vec();
        let weights = CurveParams::new(p.basis, x.clone())?;
        let step = self.history.len();
        let request = ObjectiveRequest {
            bits: bits_for_layers(&weights, p.layers)?,
            weights,
            task,
            epochs: p.tasks.epochs()[task],
            seed: mix(p.seed, step as u64 + 1),
        };
        let result = objective.evaluate(&request);
        let cost = match phase {
            Phase::Init => 0.0,
            Phase::Explore => {
                let c = p.tasks.costs()[task];
                self.budget.charge(c);
                c
            }
        };
        let y = match (result.status, result.accuracy) {
            (Status::Ok, Some(a)) if a.is_finite() => Some(a),
            _ => None,
        };
        if let Some(a) = y {
            self.observations.push(Observation {
                x: x.clone(),
                task,
                y: a,
                cost,
            });
        }
        let record = HistoryRecord {
            step,
            phase,
            x,
            task: task + 1,
            epochs: request.epochs,
            y,
            status: if y.is_some() {
                Status::Ok
            } else if result.status == Status::Ok {
                Status::Failed
            } else {
                result.status
            },
            cost,
            cumulative_cost: self.budget.spent,
            gain,
            score,
            reported_cost: result.cost_actual,
            message: result.message,
        };
        self.history.push(record.clone());
        Ok(record)
    }

    /// Rebuilds observations and budget from logged records.
    fn replay(&mut self, records: Vec<HistoryRecord>) -> Result<()> {
        let p = self.problem;
        for r in records {
            if r.step != self.history.len() || r.task == 0 || r.task > p.tasks.len() {
                return Err(Error::format(format!("history record {} is out of sequence", r.step)));
            }
            let task = r.task - 1;
            if r.phase == Phase::Explore {
                if !self.budget.can_afford(r.cost) {
                    return Err(Error::format("history overspends its budget"));
                }
                self.budget.charge(r.cost);
            }
            if let (Status::Ok, Some(y)) = (r.status, r.y) {
                self.observations.push(Observation {
                    x: r.x.clone(),
                    task,
                    y,
                    cost: r.cost,
                });
            }
            self.history.push(r);
        }
        Ok(())
    }
}

/// Runs the initial design and then explores until the budget is spent.
///
/// When `log` is given the history is written there as it happens,
/// replacing any existing file.
pub fn run_search(
    objective: &mut (impl Objective + ?Sized),
    problem: &SearchProblem,
    log: Option<&Path>,
) -> Result<SearchOutcome> {
    problem.validate()?;
    let mut log = log.map(|p| HistoryLog::create(p, &problem.header())).transpose()?;
    drive(objective, problem, Vec::new(), log.as_mut())
}

/// Continues a run from its history log, appending to it.
///
/// The problem must match the one that wrote the log. The continuation is
/// identical to what an uninterrupted run would have produced.
pub fn resume_search(
    objective: &mut (impl Objective + ?Sized),
    problem: &SearchProblem,
    log: &Path,
) -> Result<SearchOutcome> {
    problem.validate()?;
    let (header, records) = read_history(log)?;
    if header != problem.header() {
        return Err(Error::config(format!(
            "{} was written by a different run configuration",
            log.display()
        )));
    }
    // rewrite without any torn tail before appending
    let mut fresh = HistoryLog::create(log, &header)?;
    for r in &records {
        fresh.write(r)?;
    }
    drop(fresh);
    let mut out = HistoryLog::append_to(log)?;
    drive(objective, problem, records, Some(&mut out))
}

fn drive(
    objective: &mut (impl Objective + ?Sized),
    problem: &SearchProblem,
    logged: Vec<HistoryRecord>,
    mut log: Option<&mut HistoryLog>,
) -> Result<SearchOutcome> {
    let mut state = State {
        problem,
        observations: Vec::new(),
        history: Vec::new(),
        budget: Budget::new(problem.budget, problem.max_evaluations)?,
        base: 0,
        fitted: None,
    };
    let design = problem.initial_design();
    state.replay(logged)?;

    for &(idx, task) in design.iter().skip(state.history.len()) {
        let r = state.evaluate(objective, idx, task, Phase::Init, None, None)?;
        if let Some(l) = log.as_deref_mut() {
            l.write(&r)?;
        }
    }
    state.base = state.history[..design.len()]
        .iter()
        .filter(|r| r.status == Status::Ok)
        .count();
    if state.base == 0 {
        return Err(Error::Objective("every initial evaluation failed".into()));
    }

    loop {
        let model = state.model()?;
        let Some(choice) = select_action(&model, &problem.pool, &problem.tasks, state.budget.remaining())? else {
            break;
        };
        if !state.budget.can_afford(choice.cost) {
            break;
        }
        let r = state.evaluate(
            objective,
            choice.pool_index,
            choice.task,
            Phase::Explore,
            Some(choice.info_gain),
            Some(choice.score),
        )?;
        if let Some(l) = log.as_deref_mut() {
            l.write(&r)?;
        }
    }

    let n = state.observations.len();
    let (h, fit_report) = state.fit_at(n)?;
    let model = GpModel::new(h, state.observations.clone())?;
    Ok(SearchOutcome {
        model,
        history: state.history,
        budget: state.budget,
        fit_report,
    })
}
