//! Information gain about the target task per unit cost, for every task,
//! on a small pool.
//!
//!     cargo run --example info_gain

use curvequant::explorer::{gain_table, select_action, CandidatePool};
use curvequant::mtgp::{GpHyperparams, GpModel, Observation, TaskSet};
use nalgebra::DMatrix;

fn main() -> curvequant::Result<()> {
    let tasks = TaskSet::new(
        vec![0, 1, 2, 15],
        vec![1.0, 1.0, 2.0, 15.0],
        vec![1e-3, 5e-4, 2e-4, 1e-4],
    )?;
    let kf = DMatrix::from_fn(4, 4, |i, j| 0.9_f64.powi((i as i32 - j as i32).abs()));
    let hyper = GpHyperparams::with_task_covariance(vec![0.25], &kf, tasks.noise().to_vec())?;
    let data = vec![Observation::new(vec![0.2], 0, 0.3), Observation::new(vec![0.5], 3, 0.1)];
    let model = GpModel::new(hyper, data)?;
    let pool = CandidatePool::grid_1d(11)?;

    let table = gain_table(&model, &pool)?;
    print!("   x ");
    for (l, c) in tasks.costs().iter().enumerate() {
        print!("   task{} (λ={c:<4})", l + 1);
    }
    println!();
    for (i, x) in pool.points().iter().enumerate() {
        print!("{:.1} ", x[0]);
        for (l, row) in table.iter().enumerate() {
            let g = row[i].nats;
            print!("  {g:>7.4} /{:<7.4}", g / tasks.costs()[l]);
        }
        println!();
    }

    if let Some(a) = select_action(&model, &pool, &tasks, 30.0)? {
        println!(
            "next: x={:?} task {} gain {:.4} nats, cost {}, score {:.4}",
            a.x,
            a.task + 1,
            a.info_gain,
            a.cost,
            a.score
        );
    }
    Ok(())
}
