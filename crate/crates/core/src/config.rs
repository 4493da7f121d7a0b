//! Run configuration: built-in defaults, overridden by an optional TOML
//! file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::{DeepError, Result};
use crate::hyperparams::Hyperparams;
use crate::learning::Rule;
use crate::training::{Architecture, BatchSpec, LogicOp, TrainOptions};

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "DEEP_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "deep-runs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub task: String,
    pub rule: String,
    /// Train both rules with identical seeds instead of `rule` alone.
    pub compare: bool,
    pub prune: bool,
    pub runs: usize,
    pub epochs: usize,
    /// Seed of the first run; run `k` uses `seed + k`.
    pub seed: u64,
    pub inputs: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub mse_threshold: f64,
    pub out: PathBuf,

    pub beta: f64,
    pub step_size: f64,
    pub m0: usize,
    pub m_beta: usize,
    pub learning_rate: f64,
    pub l1_coeff: f64,
    pub lambda_prune: f64,
    pub temperature: f64,
    pub init_scale: f64,
    pub state_init: f64,
    pub convergence_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let hp = Hyperparams::default();
        let arch = Architecture::default();
        let opts = TrainOptions::default();
        RunConfig {
            task: "and".into(),
            rule: opts.rule.name().into(),
            compare: false,
            prune: opts.prune,
            runs: 10,
            epochs: opts.epochs,
            seed: hp.seed,
            inputs: arch.n_input,
            hidden: arch.n_hidden,
            outputs: arch.n_output,
            mse_threshold: opts.mse_threshold,
            out: PathBuf::from(DEFAULT_OUT_DIR),
            beta: hp.beta,
            step_size: hp.step_size,
            m0: hp.m0,
            m_beta: hp.m_beta,
            learning_rate: hp.learning_rate,
            l1_coeff: hp.l1_coeff,
            lambda_prune: hp.lambda_prune,
            temperature: hp.temperature,
            init_scale: hp.init_scale,
            state_init: hp.state_init,
            convergence_tol: hp.convergence_tol,
        }
    }
}

/// Command-line overrides; `None` keeps the file or default value.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Logic task: and, or, xor.
    #[arg(long)]
    pub task: Option<String>,
    /// Learning rule: deep or asym.
    #[arg(long)]
    pub rule: Option<String>,
    /// Train both rules with identical seeds and report the comparison.
    #[arg(long)]
    pub compare: bool,
    /// Enable the pruning lottery.
    #[arg(long)]
    pub prune: bool,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "step-size")]
    pub step_size: Option<f64>,
    #[arg(long)]
    pub m0: Option<usize>,
    #[arg(long = "mbeta")]
    pub m_beta: Option<usize>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long = "l1")]
    pub l1_coeff: Option<f64>,
    #[arg(long = "lambda")]
    pub lambda_prune: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long = "init-scale")]
    pub init_scale: Option<f64>,
    #[arg(long = "state-init")]
    pub state_init: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| DeepError::Config(e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config always serializes")
    }

    /// Seeds of the runs, in order.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.runs as u64)
            .map(|k| self.seed.wrapping_add(k))
            .collect()
    }

    /// The resolved configuration with the run seeds listed as comments.
    /// Training again from this file alone reproduces the run.
    pub fn manifest(&self) -> String {
        let seeds: Vec<String> = self.seeds().iter().map(u64::to_string).collect();
        format!(
            "# deep run manifest\n# run seeds: {}\n{}",
            seeds.join(", "),
            self.to_toml()
        )
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = &o.$field { self.$field = v.clone(); })*
            };
        }
        take!(task, rule, runs, epochs, seed, hidden, out, beta, step_size, m0, m_beta);
        take!(
            learning_rate,
            l1_coeff,
            lambda_prune,
            temperature,
            init_scale,
            state_init
        );
        if let Some(t) = o.threshold {
            self.mse_threshold = t;
        }
        self.compare |= o.compare;
        self.prune |= o.prune;
    }

    pub fn task(&self) -> Result<LogicOp> {
        self.task.parse()
    }

    pub fn rule(&self) -> Result<Rule> {
        self.rule.parse()
    }

    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            beta: self.beta,
            step_size: self.step_size,
            m0: self.m0,
            m_beta: self.m_beta,
            learning_rate: self.learning_rate,
            l1_coeff: self.l1_coeff,
            lambda_prune: self.lambda_prune,
            temperature: self.temperature,
            init_scale: self.init_scale,
            seed: self.seed,
            state_init: self.state_init,
            convergence_tol: self.convergence_tol,
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            n_input: self.inputs,
            n_hidden: self.hidden,
            n_output: self.outputs,
        }
    }

    pub fn batch_spec(&self) -> Result<BatchSpec> {
        Ok(BatchSpec {
            task: self.task()?,
            arch: self.architecture(),
            n_runs: self.runs,
            base_seed: self.seed,
        })
    }

    pub fn train_options(&self) -> Result<TrainOptions> {
        Ok(TrainOptions {
            epochs: self.epochs,
            rule: self.rule()?,
            prune: self.prune,
            mse_threshold: self.mse_threshold,
        })
    }

    /// Checks names, ranges and the fixed shape of the logic tasks.
    pub fn validate(&self) -> Result<()> {
        self.task()?;
        self.rule()?;
        self.hyperparams().validate()?;
        if self.runs < 1 {
            return Err(DeepError::Config("runs must be >= 1".into()));
        }
        if self.epochs < 1 {
            return Err(DeepError::Config("epochs must be >= 1".into()));
        }
        if self.inputs != 2 || self.outputs != 1 {
            return Err(DeepError::Config(format!(
                "logic tasks need 2 inputs and 1 output, got {} and {}",
                self.inputs, self.outputs
            )));
        }
        if self.mse_threshold.is_nan() || self.mse_threshold <= 0.0 {
            return Err(DeepError::Config("mse_threshold must be > 0".into()));
        }
        Ok(())
    }
}

/// Resolves defaults, then `$DEEP_OUT_DIR`, then the optional file, then
/// the flags.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let env_out = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
    resolve(path, env_out, overrides)
}

fn resolve(
    path: Option<&Path>,
    env_out: Option<PathBuf>,
    overrides: &Overrides,
) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| DeepError::io(p, e))?;
            let mut base = RunConfig::default();
            if let Some(dir) = env_out {
                base.out = dir;
            }
            merge_file(base, &text)?
        }
        None => {
            let mut base = RunConfig::default();
            if let Some(dir) = env_out {
                base.out = dir;
            }
            base
        }
    };
    cfg.apply(overrides);
    cfg.validate()?;
    Ok(cfg)
}

/// Overlays the keys present in `text` onto `base`.
fn merge_file(base: RunConfig, text: &str) -> Result<RunConfig> {
    // Validate keys and types against the full schema first.
    RunConfig::from_toml(text)?;
    let file: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| DeepError::Config(e.message().to_string()))?;
    let mut merged = toml::Table::try_from(&base).expect("run config always serializes");
    merged.extend(file);
    merged
        .try_into()
        .map_err(|e: toml::de::Error| DeepError::Config(e.message().to_string()))
}
