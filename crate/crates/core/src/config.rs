//! Run configuration, read from a single TOML file.
//!
//! ```toml
//! seed = 7
//! out = "runs/demo"
//! k = 100.0
//!
//! [curve]
//! basis = "bezier"      # or "chebyshev"
//! degree = 1            # bezier: degree + 1 weights; chebyshev: number of terms
//!
//! [network]
//! bundled = "vgg16"     # or: spec = "networks/vgg16.toml"
//!
//! [tasks]
//! epochs = [0, 1, 2, 15]
//! costs = [1, 1, 2, 15] # default max(epochs, 1)
//! noise = [1e-4, 1e-4, 1e-4, 1e-4]
//!
//! [search]
//! budget = 30
//!
//! [objective]
//! kind = "synthetic"    # or "surrogate", "external"
//! ```
//!
//! Relative paths are resolved against the directory holding the file.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::curvespace::CurveBasis;
use crate::error::{Error, Result};
use crate::explorer::{CandidatePool, SearchProblem};
use crate::mtgp::{FitConfig, TaskSet, DEFAULT_TASK_NOISE};
use crate::objective::{External, Objective, Surrogate, SurrogateParams, Synthetic, SyntheticParams};
use crate::quant::{zoo, NetworkSpec, DEFAULT_BLOCK_SIZE};

/// Environment variable overriding the output directory.
pub const OUT_ENV: &str = "CURVEQUANT_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default = "default_block")]
    pub block_size: usize,
    pub curve: CurveConfig,
    pub network: NetworkConfig,
    pub tasks: TasksConfig,
    pub search: SearchConfig,
    pub objective: ObjectiveConfig,
    #[serde(skip)]
    base_dir: PathBuf,
}

fn default_k() -> f64 {
    crate::decision::DEFAULT_K
}

fn default_block() -> usize {
    DEFAULT_BLOCK_SIZE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    pub basis: CurveBasis,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub bundled: Option<String>,
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TasksConfig {
    pub epochs: Vec<u32>,
    pub costs: Option<Vec<f64>>,
    pub noise: Option<Vec<f64>>,
}

/// Evaluation-count presets for the exploration phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchPreset {
    /// About 65 evaluated configurations.
    Compact,
    /// About 150 evaluated configurations, for richer curve families.
    Extended,
}

impl SearchPreset {
    pub fn evaluations(self) -> usize {
        match self {
            SearchPreset::Compact => 65,
            SearchPreset::Extended => 150,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// Defaults to the preset's evaluation count times the target cost.
    pub budget: Option<f64>,
    pub max_evaluations: Option<usize>,
    pub preset: Option<SearchPreset>,
    pub pool_size: Option<usize>,
    #[serde(default = "default_refit")]
    pub refit_every: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub learn_noise: bool,
    pub init_points: Option<usize>,
}

fn default_refit() -> usize {
    5
}

fn default_restarts() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ObjectiveConfig {
    Synthetic {
        #[serde(default)]
        params: SyntheticParams,
    },
    Surrogate {
        /// One QTNS weight file per quantized layer, in layer order.
        snapshot: Vec<PathBuf>,
        #[serde(default)]
        params: SurrogateParams,
    },
    External {
        command: Vec<String>,
        timeout_secs: f64,
    },
}

impl RunConfig {
    /// Parses, resolves relative paths against `base_dir`, and validates.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.resolve_paths();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn resolve_paths(&mut self) {
        if let Some(s) = self.network.spec.take() {
            self.network.spec = Some(self.resolve(&s));
        }
        if let Some(o) = self.out.take() {
            self.out = Some(self.resolve(&o));
        }
        if let ObjectiveConfig::Surrogate { snapshot, .. } = &self.objective {
            let resolved = snapshot.iter().map(|p| self.resolve(p)).collect();
            if let ObjectiveConfig::Surrogate { snapshot, .. } = &mut self.objective {
                *snapshot = resolved;
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::config("k must be a positive number"));
        }
        if self.block_size == 0 {
            return Err(Error::InvalidBlockSize(0));
        }
        if self.dim() == 0 {
            return Err(Error::config("curve needs at least one weight"));
        }
        self.task_set()?;
        let network = self.network_spec()?;
        let s = &self.search;
        if s.budget.is_none() && s.preset.is_none() {
            return Err(Error::config("search needs a budget or a preset"));
        }
        if let Some(b) = s.budget {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(Error::config(format!("budget must be nonnegative, got {b}")));
            }
        }
        if s.refit_every == 0 || s.restarts == 0 {
            return Err(Error::config("refit_every and restarts must be positive"));
        }
        if s.pool_size.is_some_and(|p| p < 2) {
            return Err(Error::config("pool_size must be at least 2"));
        }
        match &self.objective {
            ObjectiveConfig::Synthetic { params } => {
                params.validate()?;
                if params.w_opt.len() != 1 && params.w_opt.len() != self.dim() {
                    return Err(Error::config(format!(
                        "w_opt has {} entries but the curve has {} weights",
                        params.w_opt.len(),
                        self.dim()
                    )));
                }
            }
            ObjectiveConfig::Surrogate { snapshot, params } => {
                params.validate()?;
                if snapshot.len() != network.conv_count() {
                    return Err(Error::config(format!(
                        "surrogate snapshot lists {} files for {} quantized layers",
                        snapshot.len(),
                        network.conv_count()
                    )));
                }
                if let Some(missing) = snapshot.iter().find(|p| !p.is_file()) {
                    return Err(Error::config(format!("snapshot file {} not found", missing.display())));
                }
            }
            ObjectiveConfig::External { command, timeout_secs } => {
                if command.first().is_none_or(|c| c.is_empty()) {
                    return Err(Error::config("external command is empty"));
                }
                if !(*timeout_secs > 0.0 && timeout_secs.is_finite()) {
                    return Err(Error::config("timeout_secs must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Number of curve weights.
    pub fn dim(&self) -> usize {
        self.curve.basis.weight_count(self.curve.degree)
    }

    pub fn task_set(&self) -> Result<TaskSet> {
        let t = &self.tasks;
        let costs = t
            .costs
            .clone()
            .unwrap_or_else(|| t.epochs.iter().map(|&e| f64::from(e.max(1))).collect());
        let noise = t
            .noise
            .clone()
            .unwrap_or_else(|| vec![DEFAULT_TASK_NOISE; t.epochs.len()]);
        TaskSet::new(t.epochs.clone(), costs, noise)
    }

    pub fn network_spec(&self) -> Result<NetworkSpec> {
        match (&self.network.bundled, &self.network.spec) {
            (Some(name), None) => zoo::bundled(name).ok_or_else(|| {
                Error::config(format!(
                    "unknown bundled network {name:?}; known: {}",
                    zoo::BUNDLED.join(", ")
                ))
            }),
            (None, Some(path)) => {
                if !path.is_file() {
                    return Err(Error::config(format!("network spec {} not found", path.display())));
                }
                NetworkSpec::load(path).map_err(|e| match e {
                    Error::Io(io) => Error::config(format!("{}: {io}", path.display())),
                    other => other,
                })
            }
            _ => Err(Error::config("[network] needs exactly one of `bundled` or `spec`")),
        }
    }

    pub fn pool(&self) -> Result<CandidatePool> {
        CandidatePool::for_dim(self.dim(), self.search.pool_size)
    }

    pub fn budget(&self) -> Result<f64> {
        match (self.search.budget, self.search.preset) {
            (Some(b), _) => Ok(b),
            (None, Some(p)) => {
                let tasks = self.task_set()?;
                Ok(p.evaluations() as f64 * tasks.costs()[tasks.target()])
            }
            (None, None) => Err(Error::config("search needs a budget or a preset")),
        }
    }

    pub fn max_evaluations(&self) -> Option<usize> {
        self.search
            .max_evaluations
            .or(self.search.preset.map(SearchPreset::evaluations))
    }

    /// Output directory: `flag`, else `$CURVEQUANT_OUT`, else the config's
    /// `out`, else `./out`.
    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        resolve_output_dir(flag, self.out.as_deref())
    }

    pub fn search_problem(&self, seed: u64) -> Result<SearchProblem> {
        let mut p = SearchProblem::new(
            self.curve.basis,
            self.network_spec()?.conv_count(),
            self.task_set()?,
            self.pool()?,
            self.budget()?,
            seed,
        );
        p.max_evaluations = self.max_evaluations();
        p.refit_every = self.search.refit_every;
        p.init_points = self.search.init_points;
        p.fit = FitConfig {
            restarts: self.search.restarts,
            learn_noise: self.search.learn_noise,
            ..FitConfig::default()
        };
        Ok(p)
    }

    pub fn build_objective(&self) -> Result<Box<dyn Objective>> {
        let m = self.tasks.epochs.len();
        Ok(match &self.objective {
            ObjectiveConfig::Synthetic { params } => Box::new(Synthetic::new(params.clone(), m)?),
            ObjectiveConfig::Surrogate { snapshot, params } => {
                Box::new(Surrogate::from_files(snapshot, params.clone(), m)?)
            }
            ObjectiveConfig::External { command, timeout_secs } => {
                Box::new(External::new(command.clone(), Duration::from_secs_f64(*timeout_secs))?)
            }
        })
    }
}

/// `flag`, else `$CURVEQUANT_OUT`, else `configured`, else `./out`.
pub fn resolve_output_dir(flag: Option<&Path>, configured: Option<&Path>) -> PathBuf {
    if let Some(f) = flag {
        return f.to_path_buf();
    }
    if let Some(env) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(env);
    }
    configured
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("out"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEMO: &str = r#"
seed = 3
[curve]
basis = "bezier"
degree = 1
[network]
bundled = "vgg16"
[tasks]
epochs = [0, 1, 2, 15]
[search]
budget = 30
[objective]
kind = "synthetic"
[objective.params]
w_opt = [0.8, 0.3]
"#;

    #[test]
    fn parses_demo() {
        let c = RunConfig::from_toml_str(DEMO, Path::new(".")).unwrap();
        assert_eq!(c.dim(), 2);
        assert_eq!(c.task_set().unwrap().costs(), &[1.0, 1.0, 2.0, 15.0]);
        assert_eq!(c.network_spec().unwrap().conv_count(), 13);
        assert_eq!(c.pool().unwrap().len(), 256);
        let p = c.search_problem(3).unwrap();
        assert_eq!(p.layers, 13);
        assert!(c.build_objective().is_ok());
    }

    #[test]
    fn errors_are_config_errors() {
        let missing = DEMO.replace("bundled = \"vgg16\"", "spec = \"nope/missing.toml\"");
        let e = RunConfig::from_toml_str(&missing, Path::new("/nonexistent")).unwrap_err();
        assert!(e.is_config_error(), "{e}");
        let typo = DEMO.replace("budget = 30", "budjet = 30");
        let e = RunConfig::from_toml_str(&typo, Path::new(".")).unwrap_err();
        assert!(e.is_config_error());
        assert!(e.to_string().contains("line"), "{e}");
        let bad_opt = DEMO.replace("[0.8, 0.3]", "[0.8, 0.3, 0.1]");
        assert!(RunConfig::from_toml_str(&bad_opt, Path::new(".")).is_err());
    }

    #[test]
    fn presets_set_evaluation_caps() {
        let text = DEMO.replace("budget = 30", "preset = \"extended\"");
        let c = RunConfig::from_toml_str(&text, Path::new(".")).unwrap();
        assert_eq!(c.max_evaluations(), Some(150));
        assert_eq!(c.budget().unwrap(), 150.0 * 15.0);
    }
}
