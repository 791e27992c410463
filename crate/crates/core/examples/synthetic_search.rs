//! Budgeted search on the closed-form synthetic objective, then ranking
//! the pool for a VGG16 inventory.
//!
//!     cargo run --release --example synthetic_search [-- <seed>]

use curvequant::decision::{pareto_front, rank_configs, RankOptions};
use curvequant::explorer::{run_search, CandidatePool, Phase, SearchProblem};
use curvequant::mtgp::TaskSet;
use curvequant::objective::{Synthetic, SyntheticParams};
use curvequant::quant::network::BYTES_PER_MB;
use curvequant::quant::zoo;
use curvequant::CurveBasis;

fn main() -> curvequant::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let spec = zoo::bundled("vgg16").expect("bundled");
    let tasks = TaskSet::from_epochs(vec![0, 1, 2, 15])?;
    let params = SyntheticParams {
        w_opt: vec![0.8, 0.3],
        ..SyntheticParams::default()
    };
    let pool = CandidatePool::for_dim(2, None)?;
    let problem = SearchProblem::new(
        CurveBasis::Bezier,
        spec.conv_count(),
        tasks.clone(),
        pool.clone(),
        30.0,
        seed,
    );
    let mut objective = Synthetic::new(params, tasks.len())?;

    let out = run_search(&mut objective, &problem, None)?;
    for r in &out.history {
        let tag = if r.phase == Phase::Init { "init" } else { "    " };
        println!(
            "{tag} step {:>2} task {} x [{:.3}, {:.3}] y {:.4} cost {:>4} total {:>4}",
            r.step,
            r.task,
            r.x[0],
            r.x[1],
            r.y.unwrap_or(f64::NAN),
            r.cost,
            r.cumulative_cost
        );
    }
    let (i, mean) = out.target_argmax(&pool)?;
    println!(
        "spent {} of {}; target argmax {:?} mean {mean:.4}",
        out.budget.spent,
        out.budget.total,
        pool.point(i)
    );

    let ranked = rank_configs(&out.model, &pool, CurveBasis::Bezier, &spec, &RankOptions::default())?;
    println!("\ntop 5 by effective accuracy:");
    for r in ranked.iter().take(5) {
        println!(
            "  {:?}  bits {:?}  acc {:.4}  E {:.4}  {:.2} MB",
            r.weights.weights(),
            r.bits.bits(),
            r.predicted_accuracy,
            r.effective_accuracy,
            r.memory_bytes / BYTES_PER_MB
        );
    }
    let pts: Vec<(f64, f64)> = ranked.iter().map(|r| (r.memory_bytes, r.predicted_accuracy)).collect();
    println!(
        "pareto front: {} of {} pool points",
        pareto_front(&pts).len(),
        pts.len()
    );
    Ok(())
}
