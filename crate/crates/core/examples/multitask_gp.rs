//! Fits a two-task GP where the cheap task is a shifted copy of the
//! expensive one, then predicts the expensive task where it was never
//! observed.
//!
//!     cargo run --example multitask_gp

use curvequant::mtgp::{fit, FitConfig, Observation, TaskPoint, TaskSet};

fn truth(x: f64) -> f64 {
    0.8 - (x - 0.6).powi(2)
}

fn main() -> curvequant::Result<()> {
    let tasks = TaskSet::new(vec![1, 15], vec![1.0, 15.0], vec![1e-5, 1e-5])?;
    let mut data: Vec<Observation> = (0..12)
        .map(|i| {
            let x = i as f64 / 11.0;
            Observation::new(vec![x], 0, truth(x) - 0.1)
        })
        .collect();
    data.extend([0.1, 0.9].map(|x| Observation::new(vec![x], 1, truth(x))));

    let (model, report) = fit(&data, &tasks, &FitConfig::default())?;
    let h = model.hyper();
    println!(
        "best LML {:.3} over {} restarts",
        report.best_lml,
        report.restarts.len()
    );
    println!("lengthscale {:.3}", h.lengthscales[0]);
    println!("task covariance\n{:.4}", h.task_covariance());

    let queries: Vec<TaskPoint> = (0..=5).map(|i| TaskPoint::new(vec![i as f64 / 5.0], 1)).collect();
    let post = model.predict(&queries)?;
    println!("   x   truth    mean     std");
    for ((q, m), s) in queries.iter().zip(&post.mean).zip(post.std()) {
        println!("{:.2}  {:.4}  {:.4}  {:.4}", q.x[0], truth(q.x[0]), m, s);
    }
    Ok(())
}
