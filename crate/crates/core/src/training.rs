//! Logic-gate datasets, the two-phase training loop and multi-seed batches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{free_phase, read_outputs, relax};
use crate::error::{DeepError, Result};
use crate::hyperparams::Hyperparams;
use crate::learning::{apply_update, asym_ep_update, deep_update, Rule};
use crate::network::{sparsity_fraction, Network};
use crate::sparsity::{prune_step, PruneEvent};

/// Stream id of the pruning generator, kept apart from network init.
const PRUNE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LogicOp {
    And,
    Or,
    Xor,
}

impl LogicOp {
    pub const ALL: [LogicOp; 3] = [LogicOp::And, LogicOp::Or, LogicOp::Xor];

    pub fn name(self) -> &'static str {
        match self {
            LogicOp::And => "and",
            LogicOp::Or => "or",
            LogicOp::Xor => "xor",
        }
    }

    fn apply(self, a: bool, b: bool) -> bool {
        match self {
            LogicOp::And => a && b,
            LogicOp::Or => a || b,
            LogicOp::Xor => a ^ b,
        }
    }
}

impl std::str::FromStr for LogicOp {
    type Err = DeepError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "and" => Ok(LogicOp::And),
            "or" => Ok(LogicOp::Or),
            "xor" => Ok(LogicOp::Xor),
            _ => Err(DeepError::UnknownTask(s.to_string())),
        }
    }
}

impl std::fmt::Display for LogicOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub patterns: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Dataset {
    pub fn new(patterns: Vec<(Vec<f64>, Vec<f64>)>) -> Result<Self> {
        let Some((x0, y0)) = patterns.first() else {
            return Err(DeepError::Dimension {
                what: "dataset needs at least one pattern",
                expected: 1,
                got: 0,
            });
        };
        for (x, y) in &patterns {
            if x.len() != x0.len() || y.len() != y0.len() {
                return Err(DeepError::Dimension {
                    what: "pattern width differs from the first pattern",
                    expected: x0.len() + y0.len(),
                    got: x.len() + y.len(),
                });
            }
        }
        Ok(Dataset { patterns })
    }

    pub fn input_len(&self) -> usize {
        self.patterns[0].0.len()
    }

    pub fn target_len(&self) -> usize {
        self.patterns[0].1.len()
    }

    fn check(&self, net: &Network) -> Result<()> {
        if self.input_len() != net.n_input() {
            return Err(DeepError::Dimension {
                what: "dataset inputs vs input neurons",
                expected: net.n_input(),
                got: self.input_len(),
            });
        }
        if self.target_len() != net.n_output() {
            return Err(DeepError::Dimension {
                what: "dataset targets vs output neurons",
                expected: net.n_output(),
                got: self.target_len(),
            });
        }
        Ok(())
    }
}

/// Truth table of `op` in the order (0,0), (0,1), (1,0), (1,1).
pub fn logic_dataset(op: LogicOp) -> Dataset {
    let patterns = [(false, false), (false, true), (true, false), (true, true)]
        .into_iter()
        .map(|(a, b)| {
            let bit = |v: bool| if v { 1.0 } else { 0.0 };
            (vec![bit(a), bit(b)], vec![bit(op.apply(a, b))])
        })
        .collect();
    Dataset { patterns }
}

/// Neuron counts of the architecture: inputs first, outputs last.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub n_input: usize,
    pub n_hidden: usize,
    pub n_output: usize,
}

impl Default for Architecture {
    /// Eight neurons: two inputs, five hidden, one output.
    fn default() -> Self {
        Architecture {
            n_input: 2,
            n_hidden: 5,
            n_output: 1,
        }
    }
}

impl Architecture {
    pub fn with_hidden(n_hidden: usize) -> Self {
        Architecture {
            n_hidden,
            ..Architecture::default()
        }
    }

    pub fn n_total(&self) -> usize {
        self.n_input + self.n_hidden + self.n_output
    }

    pub fn build(&self, init_scale: f64, seed: u64) -> Result<Network> {
        Network::new_complete(
            self.n_total(),
            self.n_input,
            self.n_output,
            init_scale,
            seed,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub mse: f64,
    pub accuracy: f64,
}

/// Free-phase predictions on every pattern. `mse` averages
/// `sum_k (y_hat_k - y_k)^2 / n_output` over patterns; a pattern counts as
/// correct when every output thresholded at 0.5 (ties to 1) matches.
pub fn evaluate(net: &Network, ds: &Dataset, hp: &Hyperparams) -> Result<Evaluation> {
    ds.check(net)?;
    let mut total = 0.0;
    let mut correct = 0usize;
    for (x, y) in &ds.patterns {
        let traj = free_phase(net, x, hp)?;
        let y_hat = read_outputs(net, traj.last());
        let sq: f64 = y_hat.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
        total += sq / y.len() as f64;
        let hit = y_hat.iter().zip(y).all(|(a, b)| (*a >= 0.5) == (*b >= 0.5));
        correct += usize::from(hit);
    }
    let n = ds.patterns.len() as f64;
    Ok(Evaluation {
        mse: total / n,
        accuracy: correct as f64 / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub rule: Rule,
    pub prune: bool,
    /// MSE below which a run counts as converged.
    pub mse_threshold: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 2000,
            rule: Rule::Deep,
            prune: false,
            mse_threshold: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    /// Free-phase MSE after each epoch.
    pub mse: Vec<f64>,
    /// Sparsity after each epoch, relative to the parameters present at the
    /// start of training.
    pub sparsity: Vec<f64>,
    pub converged: bool,
    /// First epoch (1-based) whose MSE fell below the threshold.
    pub epochs_to_threshold: Option<usize>,
    pub final_sparsity: f64,
    pub prune_events: Vec<PruneEvent>,
}

/// Generator used for the pruning lottery of the run seeded with `seed`.
pub fn prune_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PRUNE_STREAM);
    rng
}

/// Trains `net` in place with per-example updates in dataset order.
///
/// Per pattern: free phase for `m0` steps from the standard initial state,
/// nudged phase for `m_beta` steps from its end, rule update, l1 shrinkage
/// and, when enabled, one pruning pass.
pub fn train(
    net: &mut Network,
    ds: &Dataset,
    hp: &Hyperparams,
    opts: &TrainOptions,
    rng: &mut ChaCha8Rng,
) -> Result<RunRecord> {
    hp.validate()?;
    ds.check(net)?;
    if opts.epochs < 1 {
        return Err(DeepError::Hyperparam("epochs must be >= 1".into()));
    }
    let original = net.trainable_parameter_count();
    let wrap = |epoch: usize, pattern: usize| {
        move |e: DeepError| DeepError::Training {
            seed: hp.seed,
            epoch,
            pattern,
            source: Box::new(e),
        }
    };

    let mut record = RunRecord {
        seed: hp.seed,
        mse: Vec::with_capacity(opts.epochs),
        sparsity: Vec::with_capacity(opts.epochs),
        converged: false,
        epochs_to_threshold: None,
        final_sparsity: 0.0,
        prune_events: Vec::new(),
    };

    for epoch in 1..=opts.epochs {
        for (k, (x, y)) in ds.patterns.iter().enumerate() {
            let free = free_phase(net, x, hp).map_err(wrap(epoch, k))?;
            let s0 = free.last();
            let nudged = relax(net, s0, x, y, hp.beta, hp.m_beta, hp).map_err(wrap(epoch, k))?;
            let upd = match opts.rule {
                Rule::Deep => deep_update(&nudged, net),
                Rule::Asym => asym_ep_update(s0, nudged.last(), net),
            }
            .map_err(wrap(epoch, k))?;
            apply_update(net, &upd, hp)?;
            if opts.prune {
                let events = prune_step(net, hp.lambda_prune, hp.temperature, rng, epoch, k);
                record.prune_events.extend(events);
            }
        }
        let eval = evaluate(net, ds, hp).map_err(wrap(epoch, ds.patterns.len()))?;
        record.mse.push(eval.mse);
        record.sparsity.push(if original == 0 {
            0.0
        } else {
            sparsity_fraction(net, original)?
        });
        if record.epochs_to_threshold.is_none() && eval.mse < opts.mse_threshold {
            record.epochs_to_threshold = Some(epoch);
            record.converged = true;
        }
    }
    record.final_sparsity = record.sparsity.last().copied().unwrap_or(0.0);
    Ok(record)
}

/// One run of a batch: the initial and trained networks plus the record.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub initial: Network,
    pub trained: Network,
    pub record: RunRecord,
}

/// Fresh network from `seed`, trained on `task`.
pub fn run_single(
    task: LogicOp,
    arch: &Architecture,
    hp: &Hyperparams,
    opts: &TrainOptions,
    seed: u64,
) -> Result<RunOutput> {
    let hp = Hyperparams { seed, ..*hp };
    let initial = arch.build(hp.init_scale, seed)?;
    let mut trained = initial.clone();
    let mut rng = prune_rng(seed);
    let record = train(&mut trained, &logic_dataset(task), &hp, opts, &mut rng)?;
    Ok(RunOutput {
        initial,
        trained,
        record,
    })
}

/// Quantile summary of the runs at one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(quantile(&v, 0.5))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchSpec {
    pub task: LogicOp,
    pub arch: Architecture,
    pub n_runs: usize,
    pub base_seed: u64,
}

#[derive(Debug)]
pub struct Batch {
    pub spec: BatchSpec,
    pub rule: Rule,
    /// One entry per seed `base_seed..base_seed + n_runs`, in order.
    pub runs: Vec<(u64, Result<RunOutput>)>,
}

impl Batch {
    pub fn records(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs
            .iter()
            .filter_map(|(_, r)| r.as_ref().ok())
            .map(|o| &o.record)
    }

    pub fn converged_count(&self) -> usize {
        self.records().filter(|r| r.converged).count()
    }

    pub fn failed_count(&self) -> usize {
        self.runs.iter().filter(|(_, r)| r.is_err()).count()
    }

    /// Median epochs-to-threshold over converged runs.
    pub fn median_epochs_to_threshold(&self) -> Option<f64> {
        let v: Vec<f64> = self
            .records()
            .filter_map(|r| r.epochs_to_threshold.map(|e| e as f64))
            .collect();
        median(&v)
    }

    pub fn final_sparsities(&self) -> Vec<f64> {
        self.records().map(|r| r.final_sparsity).collect()
    }

    /// Per-epoch min / quartiles / max of the MSE over successful runs.
    pub fn aggregate(&self) -> Vec<EpochStats> {
        let records: Vec<&RunRecord> = self.records().collect();
        let epochs = records.iter().map(|r| r.mse.len()).min().unwrap_or(0);
        (0..epochs)
            .map(|e| {
                let mut v: Vec<f64> = records.iter().map(|r| r.mse[e]).collect();
                v.sort_by(f64::total_cmp);
                EpochStats {
                    epoch: e + 1,
                    min: v[0],
                    q25: quantile(&v, 0.25),
                    median: quantile(&v, 0.5),
                    q75: quantile(&v, 0.75),
                    max: v[v.len() - 1],
                }
            })
            .collect()
    }
}

/// Independent runs with seeds `base_seed..base_seed + n_runs`. A failing
/// run is recorded and does not stop the others.
pub fn run_batch(spec: &BatchSpec, hp: &Hyperparams, opts: &TrainOptions) -> Result<Batch> {
    if spec.n_runs < 1 {
        return Err(DeepError::Hyperparam(
            "a batch needs at least one run".into(),
        ));
    }
    let runs = (0..spec.n_runs as u64)
        .map(|k| {
            let seed = spec.base_seed.wrapping_add(k);
            (seed, run_single(spec.task, &spec.arch, hp, opts, seed))
        })
        .collect();
    Ok(Batch {
        spec: *spec,
        rule: opts.rule,
        runs,
    })
}

#[derive(Debug)]
pub struct Comparison {
    pub deep: Batch,
    pub asym: Batch,
}

impl Comparison {
    pub fn summary(&self) -> String {
        let line = |b: &Batch| {
            let median = b
                .median_epochs_to_threshold()
                .map_or_else(|| "n/a".to_string(), |m| format!("{m}"));
            format!(
                "{:<5} converged {}/{}  median epochs to threshold {}\n",
                b.rule.name(),
                b.converged_count(),
                b.runs.len(),
                median
            )
        };
        format!(
            "task {}\n{}{}",
            self.deep.spec.task,
            line(&self.deep),
            line(&self.asym)
        )
    }
}

/// Runs DEEP and the asymmetric-EP baseline with identical seeds and
/// hyperparameters.
pub fn compare_rules(
    spec: &BatchSpec,
    hp: &Hyperparams,
    opts: &TrainOptions,
) -> Result<Comparison> {
    let deep = run_batch(
        spec,
        hp,
        &TrainOptions {
            rule: Rule::Deep,
            ..*opts
        },
    )?;
    let asym = run_batch(
        spec,
        hp,
        &TrainOptions {
            rule: Rule::Asym,
            ..*opts
        },
    )?;
    Ok(Comparison { deep, asym })
}
