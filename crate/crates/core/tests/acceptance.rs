//! One PASS/FAIL line per acceptance criterion. Tolerances and time limits
//! are fixed here.

use std::time::{Duration, Instant};

use curvequant::cli::{cmd_search, cmd_size, HISTORY_FILE};
use curvequant::decision::{effective_accuracy, naive_loss, pareto_front};
use curvequant::explorer::{gain_table, info_gain, run_search, CandidatePool, SearchProblem};
use curvequant::mtgp::{build_train_covariance, GpHyperparams, GpModel, Observation, TaskPoint, TaskSet};
use curvequant::objective::{Synthetic, SyntheticParams};
use curvequant::quant::dsconv::quantize_block;
use curvequant::quant::DEFAULT_BLOCK_SIZE;
use curvequant::{BitConfig, CurveBasis};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, name: &str, limit: Option<Duration>, check: impl FnOnce() -> Result<String, String>) {
    let start = Instant::now();
    let outcome = check();
    let elapsed = start.elapsed();
    let outcome = match (outcome, limit) {
        (Ok(_), Some(l)) if elapsed >= l => Err(format!("took {elapsed:.2?}, limit {l:?}")),
        (o, _) => o,
    };
    match outcome {
        Ok(detail) => println!("criterion {id} {name}: PASS ({elapsed:.2?}) {detail}"),
        Err(why) => {
            println!("criterion {id} {name}: FAIL ({elapsed:.2?}) {why}");
            panic!("criterion {id} failed: {why}");
        }
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn size_mb(net: &str, bits: &str) -> Result<f64, String> {
    let text = cmd_size(net, bits, DEFAULT_BLOCK_SIZE).map_err(|e| e.to_string())?;
    let line = text.lines().find(|l| l.starts_with("total")).ok_or("no total line")?;
    line.split(" = ")
        .nth(1)
        .and_then(|s| s.split_whitespace().next())
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format!("unparsable total: {line}"))
}

#[test]
fn criterion_1_memory_golden_values() {
    report(1, "memory model", Some(Duration::from_secs(1)), || {
        let rows = [
            ("vgg16", "4x13", 8.28),
            ("vgg16", "3x13", 6.44),
            ("vgg19", "3x16", 8.76),
            ("vgg19", "2x16", 6.25),
            ("resnet18", "3x20", 4.90),
            ("resnet18", "2x20", 3.49),
            ("googlenet", "3x64", 2.68),
            ("googlenet", "2x64", 1.92),
        ];
        let mut worst: f64 = 0.0;
        for (net, bits, want) in rows {
            let got = size_mb(net, bits)?;
            let rel = (got - want).abs() / want;
            ensure(rel <= 0.02, || format!("{net} {bits}: {got:.3} MB vs {want} MB"))?;
            worst = worst.max(rel);
        }
        Ok(format!("8 rows, worst relative error {:.2}%", worst * 100.0))
    });
}

/// Every configuration of the reference results table with its listed bit total.
const TABLE_ROWS: &[(&str, &str, u32)] = &[
    ("VGG16", "6555443332211", 50),
    ("VGG16", "1122333445556", 50),
    ("VGG16", "7665544332221", 50),
    ("VGG16", "1222334455667", 50),
    ("VGG16", "4444444444444", 52),
    ("VGG16", "3333333333333", 39),
    ("VGG19", "6555444433322211", 54),
    ("VGG19", "1122233344445556", 54),
    ("VGG19", "5444433333222211", 46),
    ("VGG19", "1122223333344445", 46),
    ("VGG19", "3333333333333333", 48),
    ("VGG19", "2222222222222222", 32),
    ("ResNet18", "66655554444333322221", 75),
    ("ResNet18", "12222333344445555666", 75),
    ("ResNet18", "44444444333333333322", 60),
    ("ResNet18", "22333333333344444444", 66),
    ("ResNet18", "33333333333333333333", 60),
    ("ResNet18", "22222222222222222222", 40),
    ("GoogLeNet", "4x21 3x27 2x16", 207),
    ("GoogLeNet", "2x16 3x27 4x21", 207),
    ("GoogLeNet", "6x8 5x13 4x12 3x13 2x13 1x5", 231),
    ("GoogLeNet", "1x5 2x13 3x13 4x12 5x14 6x8", 231),
    ("GoogLeNet", "3x64", 192),
    ("GoogLeNet", "2x64", 127),
];

#[test]
fn criterion_2_bit_sum_golden_values() {
    report(2, "bit sums", Some(Duration::from_secs(1)), || {
        let mut wrong = Vec::new();
        for &(net, config, listed) in TABLE_ROWS {
            let bits: BitConfig = config.parse().map_err(|e| format!("{net} {config}: {e}"))?;
            let sum = bits.bit_sum();
            if sum != listed {
                wrong.push(format!("{net} {config} sums to {sum}, listed {listed}"));
            }
        }
        ensure(wrong.is_empty(), || {
            format!(
                "{} of {} rows differ: {}",
                wrong.len(),
                TABLE_ROWS.len(),
                wrong.join("; ")
            )
        })?;
        Ok(format!("{} rows", TABLE_ROWS.len()))
    });
}

/// Minimizes `sum (w - s q)^2` over `s` by repeatedly refining a uniform grid.
fn grid_scale(w: &[f64], q: &[i8]) -> f64 {
    let err = |s: f64| -> f64 { w.iter().zip(q).map(|(&wi, &qi)| (wi - s * f64::from(qi)).powi(2)).sum() };
    let span = w.iter().fold(0.0_f64, |m, v| m.max(v.abs())) * 2.0;
    let (mut lo, mut hi) = (-span, span);
    for _ in 0..12 {
        let n = 200;
        let step = (hi - lo) / n as f64;
        let best = (0..=n)
            .map(|i| lo + step * i as f64)
            .min_by(|a, b| err(*a).total_cmp(&err(*b)))
            .unwrap();
        lo = best - step;
        hi = best + step;
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_3_quantizer_oracle() {
    report(3, "quantizer oracle", Some(Duration::from_secs(10)), || {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut worst_xi: f64 = 0.0;
        let mut worst_dot: f64 = 0.0;
        for i in 0..500 {
            let bits = (i % 8 + 1) as u8;
            let scale = 10f64.powf(rng.random_range(-3.0..1.0));
            let w: Vec<f64> = (0..DEFAULT_BLOCK_SIZE)
                .map(|_| rng.random_range(-1.0..1.0) * scale)
                .collect();
            let (q, xi) = quantize_block(&w, bits).map_err(|e| e.to_string())?;
            let dot: f64 = w
                .iter()
                .zip(&q)
                .map(|(&wi, &qi)| (wi - xi * f64::from(qi)) * f64::from(qi))
                .sum();
            ensure(dot.abs() <= 1e-6, || {
                format!("block {i} b={bits}: residual dot {dot:e}")
            })?;
            worst_dot = worst_dot.max(dot.abs());
            if q.iter().all(|&c| c == 0) {
                ensure(xi == 0.0, || format!("block {i}: zero codes with scale {xi}"))?;
                continue;
            }
            let oracle = grid_scale(&w, &q);
            let diff = (xi - oracle).abs();
            ensure(diff <= 1e-6, || {
                format!("block {i} b={bits}: scale {xi} vs grid {oracle}")
            })?;
            worst_xi = worst_xi.max(diff);
        }
        Ok(format!(
            "500 blocks, max |xi - grid| {worst_xi:.1e}, max |residual dot| {worst_dot:.1e}"
        ))
    });
}

fn se(x: &[f64], y: &[f64], l: f64) -> f64 {
    let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
    (-0.5 * r2 / (l * l)).exp()
}

fn random_task_cov(rng: &mut ChaCha8Rng, m: usize, ridge: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(m, m) * ridge
}

fn single_task_reference() -> Result<(), String> {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..12);
        let l = rng.random_range(0.1..0.8);
        let noise = rng.random_range(1e-3..0.1);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(0.0..1.0)]).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = GpHyperparams::new(vec![l], &DMatrix::identity(1, 1), vec![noise]).map_err(|e| e.to_string())?;
        let data = xs
            .iter()
            .zip(&ys)
            .map(|(x, &y)| Observation::new(x.clone(), 0, y))
            .collect();
        let model = GpModel::new(h, data).map_err(|e| e.to_string())?;
        let total_noise = noise + model.jitter();
        let k = DMatrix::from_fn(n, n, |i, j| {
            se(&xs[i], &xs[j], l) + if i == j { total_noise } else { 0.0 }
        });
        let inv = k.try_inverse().ok_or("singular reference matrix")?;
        let y = DVector::from_column_slice(&ys);
        for _ in 0..5 {
            let q = vec![rng.random_range(0.0..1.0)];
            let ks = DVector::from_fn(n, |i, _| se(&xs[i], &q, l));
            let mean = ks.dot(&(&inv * &y));
            let var = 1.0 - ks.dot(&(&inv * &ks));
            let post = model.predict(&[TaskPoint::new(q, 0)]).map_err(|e| e.to_string())?;
            ensure(
                (post.mean[0] - mean).abs() <= 1e-10 && (post.variance[0] - var).abs() <= 1e-10,
                || {
                    format!(
                        "seed {seed}: ({}, {}) vs ({mean}, {var})",
                        post.mean[0], post.variance[0]
                    )
                },
            )?;
        }
    }
    Ok(())
}

fn noise_free_interpolation() -> Result<(), String> {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.random_range(1..=3);
        let kf = random_task_cov(&mut rng, m, 0.1);
        let h = GpHyperparams::with_task_covariance(vec![0.3], &kf, vec![0.0; m]).map_err(|e| e.to_string())?;
        let data: Vec<Observation> = (0..8)
            .map(|i| Observation::new(vec![i as f64 / 7.0], i % m, rng.random_range(0.0..1.0)))
            .collect();
        let model = GpModel::new(h, data.clone()).map_err(|e| e.to_string())?;
        let q: Vec<TaskPoint> = data.iter().map(|o| TaskPoint::new(o.x.clone(), o.task)).collect();
        let post = model.predict(&q).map_err(|e| e.to_string())?;
        for (o, m) in data.iter().zip(&post.mean) {
            ensure((m - o.y).abs() <= 1e-6, || format!("seed {seed}: {m} vs {}", o.y))?;
        }
    }
    Ok(())
}

fn kronecker_grid() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for m in 1..=4 {
        let kf = random_task_cov(&mut rng, m, 0.1);
        let noise: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..0.1)).collect();
        let (l0, l1) = (0.4, 0.7);
        let h = GpHyperparams::with_task_covariance(vec![l0, l1], &kf, noise.clone()).map_err(|e| e.to_string())?;
        let xs: Vec<Vec<f64>> = (0..4)
            .map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
            .collect();
        let data: Vec<Observation> = (0..m)
            .flat_map(|l| xs.iter().map(move |x| Observation::new(x.clone(), l, 0.0)))
            .collect();
        let kx = DMatrix::from_fn(xs.len(), xs.len(), |i, j| {
            let r2 = ((xs[i][0] - xs[j][0]) / l0).powi(2) + ((xs[i][1] - xs[j][1]) / l1).powi(2);
            (-0.5 * r2).exp()
        });
        let d = DMatrix::from_diagonal(&DVector::from_vec(noise));
        let expected = h.task_covariance().kronecker(&kx) + d.kronecker(&DMatrix::identity(xs.len(), xs.len()));
        let got = build_train_covariance(&data, &h, 0.0);
        let err = (got - expected).abs().max();
        ensure(err <= 1e-12, || format!("m={m}: max entry error {err:e}"))?;
    }
    Ok(())
}

#[test]
fn criterion_4_gp_correctness() {
    report(4, "GP correctness", Some(Duration::from_secs(30)), || {
        single_task_reference()?;
        noise_free_interpolation()?;
        kronecker_grid()?;
        Ok("single-task 20 seeds, interpolation 10 seeds, Kronecker m=1..4".into())
    });
}

fn gain_scenario(seed: u64, pool_size: usize) -> Result<(GpModel, CandidatePool), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(1..=4);
    let d = rng.random_range(1..=2);
    let kf = random_task_cov(&mut rng, m, 0.05);
    let ls = (0..d).map(|_| rng.random_range(0.1..0.8)).collect();
    let noise = (0..m).map(|_| rng.random_range(1e-4..0.05)).collect();
    let h = GpHyperparams::with_task_covariance(ls, &kf, noise).map_err(|e| e.to_string())?;
    let n = rng.random_range(1..8);
    let data = (0..n)
        .map(|_| {
            let x = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
            Observation::new(x, rng.random_range(0..m), rng.random_range(0.0..1.0))
        })
        .collect();
    let pts = (0..pool_size)
        .map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let pool = CandidatePool::new(pts).map_err(|e| e.to_string())?;
    Ok((GpModel::new(h, data).map_err(|e| e.to_string())?, pool))
}

/// Mutual information between a new observation and the target values on
/// the pool, from log-determinants of the dense joint posterior.
fn dense_gain(model: &GpModel, pool: &CandidatePool, x: &[f64], task: usize) -> Result<f64, String> {
    let target = model.task_count() - 1;
    let mut q: Vec<TaskPoint> = pool
        .points()
        .iter()
        .map(|p| TaskPoint::new(p.clone(), target))
        .collect();
    q.push(TaskPoint::new(x.to_vec(), task));
    let mut s = model
        .predict_full(&q)
        .map_err(|e| e.to_string())?
        .covariance
        .ok_or("no covariance")?;
    let p = pool.len();
    s[(p, p)] += model.hyper().noise[task];
    let ln_det = |a: DMatrix<f64>| -> Result<f64, String> {
        let c = a.cholesky().ok_or("oracle covariance not positive definite")?;
        Ok(2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
    };
    Ok(0.5 * (ln_det(s.view((0, 0), (p, p)).into_owned())? + s[(p, p)].ln() - ln_det(s)?))
}

#[test]
fn criterion_5_acquisition_correctness() {
    report(5, "acquisition correctness", Some(Duration::from_secs(30)), || {
        for seed in 0..1000 {
            let (model, pool) = gain_scenario(seed, 6)?;
            for row in gain_table(&model, &pool).map_err(|e| e.to_string())? {
                ensure(row.iter().all(|g| g.nats >= 0.0 && g.nats.is_finite()), || {
                    format!("scenario {seed}: negative gain")
                })?;
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = GpHyperparams::new(vec![0.3], &DMatrix::identity(3, 3), vec![1e-3; 3]).map_err(|e| e.to_string())?;
        let data = (0..6)
            .map(|i| Observation::new(vec![rng.random_range(0.0..1.0)], i % 3, rng.random_range(0.0..1.0)))
            .collect();
        let model = GpModel::new(h, data).map_err(|e| e.to_string())?;
        let pool = CandidatePool::grid_1d(9).map_err(|e| e.to_string())?;
        for l in 0..2 {
            for x in [0.0, 0.33, 0.9] {
                let g = info_gain(&model, &pool, &[x], l).map_err(|e| e.to_string())?.nats;
                ensure(g.abs() <= 1e-8, || format!("independent task {l} at {x}: gain {g:e}"))?;
            }
        }

        let mut checked = 0;
        let mut worst: f64 = 0.0;
        for seed in 0..200 {
            let (model, pool) = gain_scenario(seed, 3)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..model.dim()).map(|_| rng.random_range(0.0..1.0)).collect();
            for task in 0..model.task_count() {
                let g = info_gain(&model, &pool, &x, task).map_err(|e| e.to_string())?;
                if g.degenerate {
                    continue;
                }
                let oracle = dense_gain(&model, &pool, &x, task)?;
                let diff = (g.nats - oracle).abs();
                ensure(diff <= 1e-8, || {
                    format!("scenario {seed} task {task}: {} vs {oracle}", g.nats)
                })?;
                worst = worst.max(diff);
                checked += 1;
            }
        }
        Ok(format!(
            "1000 scenarios nonnegative, {checked} oracle comparisons (max diff {worst:.1e})"
        ))
    });
}

#[test]
fn criterion_6_end_to_end_search() {
    report(6, "end-to-end search", None, || {
        let params = SyntheticParams::default();
        let tasks = TaskSet::from_epochs(vec![0, 1, 2, 15]).map_err(|e| e.to_string())?;
        let pool = CandidatePool::for_dim(1, None).map_err(|e| e.to_string())?;
        let probe = Synthetic::new(params.clone(), tasks.len()).map_err(|e| e.to_string())?;
        let true_best = pool
            .points()
            .iter()
            .max_by(|a, b| {
                probe
                    .params()
                    .target_value(a)
                    .total_cmp(&probe.params().target_value(b))
            })
            .ok_or("empty pool")?
            .clone();
        let mut hits = 0;
        let mut slowest = Duration::ZERO;
        let mut misses = Vec::new();
        for seed in 0..20 {
            let problem = SearchProblem::new(CurveBasis::Bezier, 13, tasks.clone(), pool.clone(), 30.0, seed);
            let mut objective = Synthetic::new(params.clone(), tasks.len()).map_err(|e| e.to_string())?;
            let start = Instant::now();
            let outcome = run_search(&mut objective, &problem, None).map_err(|e| e.to_string())?;
            let elapsed = start.elapsed();
            ensure(elapsed < Duration::from_secs(60), || {
                format!("seed {seed} took {elapsed:.2?}")
            })?;
            ensure(outcome.budget.spent <= 30.0, || {
                format!("seed {seed} spent {}", outcome.budget.spent)
            })?;
            slowest = slowest.max(elapsed);
            let (i, _) = outcome.target_argmax(&pool).map_err(|e| e.to_string())?;
            let found = pool.point(i);
            let dist = found
                .iter()
                .zip(&true_best)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if dist <= 0.05 {
                hits += 1;
            } else {
                misses.push(format!("seed {seed} -> {found:?}"));
            }
        }
        ensure(hits >= 18, || {
            format!("{hits}/20 recovered {true_best:?}; misses: {}", misses.join(", "))
        })?;
        Ok(format!(
            "{hits}/20 within 0.05 of {true_best:?}, slowest run {slowest:.2?}"
        ))
    });
}

#[test]
fn criterion_7_effective_accuracy_arithmetic() {
    report(7, "effective accuracy", None, || {
        let a: BitConfig = "4x10".parse().map_err(|e: curvequant::Error| e.to_string())?;
        let b: BitConfig = "4x9 7x1".parse().map_err(|e: curvequant::Error| e.to_string())?;
        ensure(a.bit_sum() == 40 && b.bit_sum() == 43, || "bit totals".into())?;
        let la = naive_loss(0.80, &a);
        let lb = naive_loss(0.85, &b);
        ensure(la == -0.02, || format!("naive loss {la} for (0.80, 40 bits)"))?;
        ensure((lb + 0.019767).abs() < 5e-7, || {
            format!("naive loss {lb} for (0.85, 43 bits)")
        })?;
        let mut bits = vec![4u8; 13];
        let base = effective_accuracy(0.9, &BitConfig::new(bits.clone()).map_err(|e| e.to_string())?, 100.0);
        ensure(base == 0.9, || format!("uniform 4-bit gives {base}"))?;
        for extra in 1..=13 {
            bits[extra - 1] = 5;
            let e = effective_accuracy(0.9, &BitConfig::new(bits.clone()).map_err(|e| e.to_string())?, 100.0);
            let want = 0.9 - extra as f64 * 0.01;
            ensure((e - want).abs() < 1e-15, || {
                format!("{extra} extra bits: {e} vs {want}")
            })?;
        }
        Ok(format!("naive {la} and {lb:.6}, penalty 0.01 per bit"))
    });
}

#[test]
fn criterion_8_determinism() {
    report(8, "determinism", None, || {
        let cfg = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.toml");
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut logs = Vec::new();
        for run in ["a", "b"] {
            let out = dir.path().join(run);
            cmd_search(&cfg, None, Some(&out), false).map_err(|e| e.to_string())?;
            logs.push(std::fs::read(out.join(HISTORY_FILE)).map_err(|e| e.to_string())?);
        }
        ensure(logs[0] == logs[1], || "history logs differ".into())?;
        Ok(format!("{} identical bytes", logs[0].len()))
    });
}

fn dominance_oracle(points: &[(f64, f64)]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            let (mi, ai) = points[i];
            !points
                .iter()
                .any(|&(mj, aj)| mj <= mi && aj >= ai && (mj < mi || aj > ai))
        })
        .collect()
}

#[test]
fn criterion_9_pareto_extraction() {
    report(9, "Pareto extraction", Some(Duration::from_secs(5)), || {
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let points: Vec<(f64, f64)> = (0..100)
                .map(|_| {
                    (
                        (rng.random_range(1..40) as f64) * 0.25,
                        (rng.random_range(0..60) as f64) / 60.0,
                    )
                })
                .collect();
            let mut got = pareto_front(&points);
            got.sort_unstable();
            let want = dominance_oracle(&points);
            ensure(got == want, || format!("seed {seed}: {got:?} vs {want:?}"))?;
        }
        Ok("50 seeds x 100 points".into())
    });
}
