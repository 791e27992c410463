//! The `curvequant` command line.
//!
//! Exit codes: 0 on success, 2 for configuration or usage errors, 3 for
//! runtime failures.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{resolve_output_dir, RunConfig};
use crate::curvespace::{bits_for_layers, BitConfig, CurveBasis, CurveParams};
use crate::decision::{candidates, pareto_front, rank_candidates, RankOptions, RankedConfig};
use crate::error::{Error, Result};
use crate::explorer::{posterior_argmax, read_history, resume_search, run_search, CandidatePool, Phase};
use crate::mtgp::{GpModel, GpSnapshot, TaskPoint, TaskSet};
use crate::objective::Status;
use crate::quant::network::layer_footprints;
use crate::quant::tensor::{encode_qtns, QtnsData};
use crate::quant::{quantize_weights, reconstruction_snr, zoo, NetworkSpec, Snr, Tensor, WeightTensor};
use crate::schema;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "curvequant",
    version,
    about = "Curve-constrained mixed-precision bit-width search"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the budgeted exploration and write history, checkpoint and summary.
    Search {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue from an existing history in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Rank every pool point by effective accuracy and emit scatter and Pareto data.
    Rank {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to `model.json` in the output directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        top_k: Option<usize>,
        /// Rank by mean minus beta standard deviations.
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
    },
    /// Posterior accuracy of one curve-weight vector.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated curve weights.
        #[arg(long, value_delimiter = ',', required = true)]
        weights: Vec<f64>,
        /// One-based task; the target by default.
        #[arg(long)]
        task: Option<usize>,
    },
    /// Quantize a QTNS weight tensor and report reconstruction SNR.
    Quantize {
        input: PathBuf,
        #[arg(long)]
        bits: u8,
        #[arg(long, default_value_t = crate::quant::DEFAULT_BLOCK_SIZE)]
        block: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Memory footprint of a network at a bit configuration.
    Size {
        /// Bundled network name or path to a network TOML file.
        network: String,
        /// Bit widths, e.g. `4444444444444`, `4,4,3` or `4x21 3x27 2x16`.
        bits: String,
        #[arg(long, default_value_t = crate::quant::DEFAULT_BLOCK_SIZE)]
        block: usize,
    },
    /// Summarize a finished run and emit plot data.
    Report {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(text) => {
            print!("{text}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                EXIT_CONFIG
            } else {
                EXIT_RUNTIME
            }
        }
    }
}

/// Runs a command, returning what it prints on success.
pub fn run(command: Command) -> Result<String> {
    match command {
        Command::Search {
            config,
            seed,
            out,
            resume,
        } => cmd_search(&config, seed, out.as_deref(), resume),
        Command::Rank {
            config,
            checkpoint,
            out,
            top_k,
            beta,
        } => cmd_rank(&config, checkpoint.as_deref(), out.as_deref(), top_k, beta),
        Command::Predict {
            checkpoint,
            weights,
            task,
        } => cmd_predict(&checkpoint, weights, task),
        Command::Quantize {
            input,
            bits,
            block,
            out,
        } => cmd_quantize(&input, bits, block, out.as_deref()),
        Command::Size { network, bits, block } => cmd_size(&network, &bits, block),
        Command::Report { out, checkpoint } => cmd_report(out.as_deref(), checkpoint.as_deref()),
    }
}

pub const HISTORY_FILE: &str = "history.jsonl";
pub const CHECKPOINT_FILE: &str = "model.json";
pub const SUMMARY_FILE: &str = "summary.json";

/// Fitted model plus what is needed to rebuild its pool and bit configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub seed: u64,
    pub basis: CurveBasis,
    pub layers: usize,
    pub network: String,
    pub tasks: TaskSet,
    pub pool_size: usize,
    pub dim: usize,
    pub model: GpSnapshot,
}

impl Checkpoint {
    pub fn write(&self, path: &Path) -> Result<()> {
        let v = schema::with_header(schema::CHECKPOINT, serde_json::to_value(self)?);
        fs::write(path, serde_json::to_string_pretty(&v)? + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::config(format!("checkpoint {}: {e}", path.display())))?;
        let v: Value =
            serde_json::from_str(&text).map_err(|e| Error::format(format!("checkpoint {}: {e}", path.display())))?;
        schema::check(schema::CHECKPOINT, &v)?;
        serde_json::from_value(v).map_err(|e| Error::format(format!("checkpoint {}: {e}", path.display())))
    }

    pub fn pool(&self) -> Result<CandidatePool> {
        CandidatePool::for_dim(self.dim, Some(self.pool_size))
    }

    pub fn model(&self) -> Result<GpModel> {
        GpModel::from_snapshot(self.model.clone())
    }
}

fn write_json(path: &Path, name: &str, body: Value) -> Result<()> {
    let v = schema::with_header(name, body);
    fs::write(path, serde_json::to_string_pretty(&v)? + "\n")?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::config(format!("output directory {}: {e}", dir.display())))
}

pub fn cmd_search(config: &Path, seed: Option<u64>, out: Option<&Path>, resume: bool) -> Result<String> {
    let cfg = RunConfig::load(config)?;
    let seed = seed
        .or(cfg.seed)
        .ok_or_else(|| Error::config("search needs a seed (config `seed` or --seed)"))?;
    let dir = cfg.output_dir(out);
    create_dir(&dir)?;
    let problem = cfg.search_problem(seed)?;
    let network = cfg.network_spec()?;
    let mut objective = cfg.build_objective()?;
    let history_path = dir.join(HISTORY_FILE);
    let outcome = if resume {
        resume_search(&mut objective, &problem, &history_path)?
    } else {
        run_search(&mut objective, &problem, Some(&history_path))?
    };

    let checkpoint = Checkpoint {
        seed,
        basis: problem.basis,
        layers: problem.layers,
        network: network.name.clone(),
        tasks: problem.tasks.clone(),
        pool_size: problem.pool.len(),
        dim: problem.pool.dim(),
        model: outcome.model.snapshot(),
    };
    checkpoint.write(&dir.join(CHECKPOINT_FILE))?;

    let (best_i, best_mean) = posterior_argmax(&outcome.model, &problem.pool)?;
    let best_x = problem.pool.point(best_i).to_vec();
    let best_bits = bits_for_layers(&CurveParams::new(problem.basis, best_x.clone())?, problem.layers)?;
    let target = problem.tasks.len();
    let best_observed = outcome
        .history
        .iter()
        .filter(|r| r.task == target && r.y.is_some())
        .max_by(|a, b| a.y.unwrap_or(0.0).total_cmp(&b.y.unwrap_or(0.0)));
    let failures = outcome.history.iter().filter(|r| r.status != Status::Ok).count();
    let summary = json!({
        "seed": seed,
        "network": network.name,
        "budget": outcome.budget.total,
        "spent": outcome.budget.spent,
        "evaluations": outcome.history.len(),
        "explore_evaluations": outcome.history.iter().filter(|r| r.phase == Phase::Explore).count(),
        "failures": failures,
        "observations": outcome.model.data().len(),
        "target_argmax": {"x": best_x, "bits": best_bits.to_string(), "predicted_accuracy": best_mean},
        "best_observed_target": best_observed.map(|r| json!({"x": r.x, "y": r.y})),
        "log_marginal_likelihood": outcome.fit_report.best_lml,
    });
    write_json(&dir.join(SUMMARY_FILE), schema::SUMMARY, summary)?;
    Ok(format!(
        "search done: {} evaluations, spent {} of {}, predicted best x={:?} bits={} acc={:.4}\nwrote {}\n",
        outcome.history.len(),
        outcome.budget.spent,
        outcome.budget.total,
        best_x,
        best_bits,
        best_mean,
        dir.display()
    ))
}

fn weights_field(w: &[f64]) -> String {
    w.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

fn mb(bytes: f64) -> f64 {
    bytes / crate::quant::network::BYTES_PER_MB
}

fn ranking_csv(rows: &[RankedConfig]) -> String {
    let mut s = schema::csv_header(schema::RANKING) + "\n";
    s.push_str("rank,weights,bits,bit_sum,memory_MB,pred_acc,pred_std,E\n");
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            i + 1,
            weights_field(r.weights.weights()),
            r.bits,
            r.bit_sum,
            mb(r.memory_bytes),
            r.predicted_accuracy,
            r.predicted_std,
            r.effective_accuracy
        );
    }
    s
}

pub fn cmd_rank(
    config: &Path,
    checkpoint: Option<&Path>,
    out: Option<&Path>,
    top_k: Option<usize>,
    beta: f64,
) -> Result<String> {
    let cfg = RunConfig::load(config)?;
    let dir = cfg.output_dir(out);
    let ck_path = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join(CHECKPOINT_FILE));
    let ck = Checkpoint::read(&ck_path)?;
    let network = cfg.network_spec()?;
    if network.conv_count() != ck.layers {
        return Err(Error::config(format!(
            "checkpoint was built for {} layers but {} has {}",
            ck.layers,
            network.name,
            network.conv_count()
        )));
    }
    let model = ck.model()?;
    let pool = ck.pool()?;
    let opts = RankOptions {
        k: cfg.k,
        top_k,
        beta,
        block_size: cfg.block_size,
    };
    let all = candidates(&model, &pool, ck.basis, &network, cfg.block_size)?;
    let points: Vec<(f64, f64)> = all.iter().map(|c| (c.memory_bytes, c.mean)).collect();
    let front = pareto_front(&points);

    let mut scatter = schema::csv_header(schema::SCATTER) + "\nmemory_MB,pred_acc,bits\n";
    for c in &all {
        let _ = writeln!(scatter, "{},{},{}", mb(c.memory_bytes), c.mean, c.bits);
    }
    let mut pareto = schema::csv_header(schema::PARETO) + "\nweights,memory_MB,pred_acc,bits\n";
    for &i in &front {
        let c = &all[i];
        let _ = writeln!(
            pareto,
            "{},{},{},{}",
            weights_field(c.weights.weights()),
            mb(c.memory_bytes),
            c.mean,
            c.bits
        );
    }
    let ranked = rank_candidates(all, &opts)?;

    create_dir(&dir)?;
    fs::write(dir.join("ranking.csv"), ranking_csv(&ranked))?;
    fs::write(dir.join("scatter.csv"), scatter)?;
    fs::write(dir.join("pareto.csv"), pareto)?;

    let mut text = String::from("rank  bits                      sum  MB       acc     E\n");
    for (i, r) in ranked.iter().take(10).enumerate() {
        let _ = writeln!(
            text,
            "{:<5} {:<25} {:<4} {:<8.3} {:.4}  {:.4}",
            i + 1,
            r.bits.to_string(),
            r.bit_sum,
            mb(r.memory_bytes),
            r.predicted_accuracy,
            r.effective_accuracy
        );
    }
    let _ = writeln!(
        text,
        "{} ranked, {} on the Pareto front; wrote {}",
        ranked.len(),
        front.len(),
        dir.display()
    );
    Ok(text)
}

pub fn cmd_predict(checkpoint: &Path, weights: Vec<f64>, task: Option<usize>) -> Result<String> {
    let ck = Checkpoint::read(checkpoint)?;
    let model = ck.model()?;
    let task = match task {
        None => ck.tasks.len(),
        Some(t) if (1..=ck.tasks.len()).contains(&t) => t,
        Some(t) => return Err(Error::config(format!("task {t} outside 1..={}", ck.tasks.len()))),
    };
    let params = CurveParams::new(ck.basis, weights.clone())?;
    if weights.len() != ck.dim {
        return Err(Error::LengthMismatch {
            expected: ck.dim,
            actual: weights.len(),
        });
    }
    let bits = bits_for_layers(&params, ck.layers)?;
    let post = model.predict(&[TaskPoint::new(weights.clone(), task - 1)])?;
    let line = json!({
        "weights": weights,
        "task": task,
        "epochs": ck.tasks.epochs()[task - 1],
        "bits": bits.to_string(),
        "mean": post.mean[0],
        "std": post.variance[0].sqrt(),
    });
    Ok(serde_json::to_string(&line)? + "\n")
}

pub fn cmd_quantize(input: &Path, bits: u8, block: usize, out: Option<&Path>) -> Result<String> {
    let tensor = Tensor::read_qtns(input).map_err(|e| match e {
        Error::Io(io) => Error::config(format!("{}: {io}", input.display())),
        other => other,
    })?;
    let w = WeightTensor::try_from(tensor)?;
    let q = quantize_weights(&w, bits, block)?;
    let total = reconstruction_snr(&w, &q)?;
    let blocks = crate::quant::dsconv::block_snrs(&w, &q)?;

    let dir = match out {
        Some(_) => resolve_output_dir(out, None),
        None => match std::env::var_os(crate::config::OUT_ENV) {
            Some(_) => resolve_output_dir(None, None),
            None => input.parent().map(Path::to_path_buf).unwrap_or_default(),
        },
    };
    create_dir(&dir)?;
    let stem = input
        .file_name()
        .and_then(|n| n.to_str())
        .map(|n| n.strip_suffix(".qtns").unwrap_or(n))
        .unwrap_or("tensor");
    let vqk_path = dir.join(format!("{stem}.vqk.qtns"));
    let kds_path = dir.join(format!("{stem}.kds.qtns"));
    fs::write(&vqk_path, encode_qtns(&w.shape(), &QtnsData::I8(q.vqk().to_vec()))?)?;
    let kds: Vec<f32> = q.kds().iter().map(|&v| v as f32).collect();
    fs::write(&kds_path, encode_qtns(&q.kds_shape(), &QtnsData::F32(kds))?)?;

    let mut finite: Vec<f64> = blocks.iter().filter_map(|s| s.db()).filter(|v| v.is_finite()).collect();
    finite.sort_by(f64::total_cmp);
    let exact = blocks.iter().filter(|s| matches!(s, Snr::Exact)).count();
    let zero = blocks.iter().filter(|s| matches!(s, Snr::NoSignal)).count();
    let mut text = format!("{} at {bits} bits, block {block}: SNR {total}\n", input.display());
    let _ = write!(text, "blocks {}: exact {exact}, all-zero {zero}", blocks.len());
    if let (Some(lo), Some(hi)) = (finite.first(), finite.last()) {
        let _ = write!(
            text,
            ", min {lo:.3} dB, median {:.3} dB, max {hi:.3} dB",
            finite[finite.len() / 2]
        );
    }
    let _ = writeln!(text, "\nwrote {} and {}", vqk_path.display(), kds_path.display());
    Ok(text)
}

fn load_network(arg: &str) -> Result<NetworkSpec> {
    if let Some(spec) = zoo::bundled(arg) {
        return Ok(spec);
    }
    let path = Path::new(arg);
    if !path.is_file() {
        return Err(Error::config(format!(
            "{arg:?} is neither a bundled network ({}) nor a file",
            zoo::BUNDLED.join(", ")
        )));
    }
    NetworkSpec::load(path)
}

pub fn cmd_size(network: &str, bits: &str, block: usize) -> Result<String> {
    let spec = load_network(network)?;
    let bits: BitConfig = bits.parse()?;
    let layers = layer_footprints(&spec, &bits, block)?;
    let total: f64 = layers.iter().map(|l| l.bytes).sum();
    let mut text = format!("{} ({}), block {block}\n", spec.name, spec.dataset);
    for l in &layers {
        let width = l.bits.map_or_else(|| "fp32".to_string(), |b| format!("{b}"));
        let _ = writeln!(
            text,
            "  {:<24} {:>10} params  {:>4}  {:>14.1} B",
            l.name, l.param_count, width, l.bytes
        );
    }
    let _ = writeln!(
        text,
        "total {total:.0} bytes = {:.4} MB (bits sum {})",
        mb(total),
        bits.bit_sum()
    );
    Ok(text)
}

pub fn cmd_report(out: Option<&Path>, checkpoint: Option<&Path>) -> Result<String> {
    let dir = resolve_output_dir(out, None);
    let (header, records) = read_history(&dir.join(HISTORY_FILE))?;
    let ck_path = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| dir.join(CHECKPOINT_FILE));
    let ck = Checkpoint::read(&ck_path)?;
    let model = ck.model()?;
    let pool = ck.pool()?;

    let m = header.tasks.len();
    let mut per_task = Vec::with_capacity(m);
    for t in 1..=m {
        let rows: Vec<_> = records.iter().filter(|r| r.task == t).collect();
        per_task.push(json!({
            "task": t,
            "epochs": header.tasks.epochs()[t - 1],
            "evaluations": rows.len(),
            "failures": rows.iter().filter(|r| r.status != Status::Ok).count(),
            "cost": rows.iter().map(|r| r.cost).sum::<f64>(),
        }));
    }
    let spent = records.last().map_or(0.0, |r| r.cumulative_cost);

    let target = m - 1;
    let queries: Vec<TaskPoint> = pool
        .points()
        .iter()
        .map(|x| TaskPoint::new(x.clone(), target))
        .collect();
    let post = model.predict(&queries)?;
    let mut posterior = schema::csv_header(schema::REPORT) + "\nweights,bits,mean,std\n";
    for (i, x) in pool.points().iter().enumerate() {
        let bits = bits_for_layers(&CurveParams::new(ck.basis, x.clone())?, ck.layers)?;
        let _ = writeln!(
            posterior,
            "{},{},{},{}",
            weights_field(x),
            bits,
            post.mean[i],
            post.variance[i].sqrt()
        );
    }
    let mut trace = schema::csv_header(schema::REPORT) + "\nstep,phase,task,y,cost,cumulative_cost,gain\n";
    for r in &records {
        let phase = match r.phase {
            Phase::Init => "init",
            Phase::Explore => "explore",
        };
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            trace,
            "{},{phase},{},{},{},{},{}",
            r.step,
            r.task,
            opt(r.y),
            r.cost,
            r.cumulative_cost,
            opt(r.gain)
        );
    }
    let (best_i, best_mean) = posterior_argmax(&model, &pool)?;
    let report = json!({
        "seed": header.seed,
        "budget": header.budget,
        "spent": spent,
        "tasks": per_task,
        "target_argmax": {"x": pool.point(best_i), "predicted_accuracy": best_mean},
    });
    write_json(&dir.join("report.json"), schema::REPORT, report)?;
    fs::write(dir.join("posterior.csv"), posterior)?;
    fs::write(dir.join("trace.csv"), trace)?;

    let mut text = format!("run seed {}: spent {spent} of {}\n", header.seed, header.budget);
    for t in 0..m {
        let rows = records.iter().filter(|r| r.task == t + 1).count();
        let _ = writeln!(
            text,
            "  task {} ({} epochs): {rows} evaluations",
            t + 1,
            header.tasks.epochs()[t]
        );
    }
    let _ = writeln!(text, "predicted best x={:?} acc={best_mean:.4}", pool.point(best_i));
    let _ = writeln!(text, "wrote report.json, posterior.csv, trace.csv to {}", dir.display());
    Ok(text)
}
