use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use deep_core::analysis::{
    conservation_residual, empirical_stability_probe, stability_certificate,
};
use deep_core::config::{load_config, Overrides, RunConfig};
use deep_core::dynamics::{free_equilibrium, read_outputs};
use deep_core::io::{
    aggregate_csv, load_network, metrics_csv, network_to_dot, prune_events_csv, save_network,
    stability_csv, stability_table, write_file,
};
use deep_core::training::{compare_rules, evaluate, logic_dataset, median, run_batch, Batch};
use deep_core::{DeepError, Hyperparams, LogicOp, Result};

#[derive(Parser)]
#[command(
    name = "deep",
    version,
    about = "Directed equilibrium propagation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a batch of seeded runs on a logic gate and write the artifacts.
    Train {
        /// TOML run configuration (a manifest from an earlier run works too).
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        flags: Box<Overrides>,
    },
    /// Print the stability certificate of a saved network.
    Analyze {
        network: PathBuf,
        /// Input pattern for the equilibrium, comma separated; defaults to zeros.
        #[arg(long, value_delimiter = ',')]
        input: Option<Vec<f64>>,
        /// Number of perturb-and-relax trials; 0 skips the probe.
        #[arg(long, default_value_t = 0)]
        probe: usize,
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the per-neuron table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Export a saved network as a Graphviz digraph.
    ExportDot {
        network: PathBuf,
        /// Output file; stdout when omitted.
        out: Option<PathBuf>,
    },
    /// Evaluate a saved network on a logic gate.
    Eval {
        network: PathBuf,
        #[arg(long)]
        task: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { config, flags } => cmd_train(config.as_deref(), &flags),
        Command::Analyze {
            network,
            input,
            probe,
            noise,
            seed,
            csv,
        } => cmd_analyze(&network, input, probe, noise, seed, csv.as_deref()),
        Command::ExportDot { network, out } => cmd_export_dot(&network, out.as_deref()),
        Command::Eval { network, task } => cmd_eval(&network, &task),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| DeepError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn cmd_train(config: Option<&Path>, flags: &Overrides) -> Result<()> {
    let cfg = load_config(config, flags)?;
    let spec = cfg.batch_spec()?;
    let hp = cfg.hyperparams();
    let opts = cfg.train_options()?;
    create_dir(&cfg.out)?;

    let batches = if cfg.compare {
        let c = compare_rules(&spec, &hp, &opts)?;
        vec![c.deep, c.asym]
    } else {
        vec![run_batch(&spec, &hp, &opts)?]
    };

    let mut summary = String::new();
    for batch in &batches {
        write_batch(&cfg.out, batch)?;
        summary.push_str(&batch_summary(batch));
    }
    write_file(&cfg.out.join("manifest.toml"), &cfg.manifest())?;
    write_file(&cfg.out.join("summary.txt"), &summary)?;
    print!("{summary}");
    println!("artifacts written to {}", cfg.out.display());

    if batches.iter().all(|b| b.failed_count() == b.runs.len()) {
        let (_, first) = &batches[0].runs[0];
        let cause = first
            .as_ref()
            .err()
            .map(|e| e.to_string())
            .unwrap_or_default();
        return Err(DeepError::Config(format!(
            "every run failed; first failure: {cause}"
        )));
    }
    Ok(())
}

/// Per rule: `metrics.csv`, `aggregate.csv` and one directory per run with
/// the initial and final networks and the prune-event log.
fn write_batch(out: &Path, batch: &Batch) -> Result<()> {
    let dir = out.join(batch.rule.name());
    create_dir(&dir)?;
    write_file(&dir.join("metrics.csv"), &metrics_csv(batch.records()))?;
    write_file(
        &dir.join("aggregate.csv"),
        &aggregate_csv(&batch.aggregate()),
    )?;
    for (seed, run) in &batch.runs {
        let run_dir = dir.join(format!("run_{seed}"));
        create_dir(&run_dir)?;
        match run {
            Ok(o) => {
                save_network(&o.initial, &run_dir.join("initial.net"))?;
                save_network(&o.trained, &run_dir.join("final.net"))?;
                write_file(
                    &run_dir.join("prune_events.csv"),
                    &prune_events_csv(&o.record.prune_events),
                )?;
            }
            Err(e) => write_file(&run_dir.join("error.txt"), &format!("{e}\n"))?,
        }
    }
    Ok(())
}

fn batch_summary(batch: &Batch) -> String {
    let fmt_opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |m| format!("{m}"));
    let mut s = format!(
        "task {} rule {}: converged {}/{} (failed {}), median epochs to threshold {}, median final sparsity {}\n",
        batch.spec.task,
        batch.rule,
        batch.converged_count(),
        batch.runs.len(),
        batch.failed_count(),
        fmt_opt(batch.median_epochs_to_threshold()),
        fmt_opt(median(&batch.final_sparsities())),
    );
    for (seed, run) in &batch.runs {
        match run {
            Ok(o) => {
                let r = &o.record;
                s.push_str(&format!(
                    "  seed {seed}: final mse {:.6e}, epochs to threshold {}, sparsity {:.4}\n",
                    r.mse.last().copied().unwrap_or(f64::NAN),
                    r.epochs_to_threshold
                        .map_or_else(|| "-".to_string(), |e| e.to_string()),
                    r.final_sparsity
                ));
            }
            Err(e) => s.push_str(&format!("  seed {seed}: failed: {e}\n")),
        }
    }
    s
}

fn cmd_analyze(
    path: &Path,
    input: Option<Vec<f64>>,
    probe: usize,
    noise: f64,
    seed: u64,
    csv: Option<&Path>,
) -> Result<()> {
    let net = load_network(path)?;
    let report = stability_certificate(&net);
    print!("{}", stability_table(&report));
    if let Some(p) = csv {
        write_file(p, &stability_csv(&report))?;
    }

    let hp = RunConfig::default().hyperparams();
    let x = input.unwrap_or_else(|| vec![0.0; net.n_input()]);
    let eq = free_equilibrium(&net, &x, &hp)?;
    let residual = conservation_residual(&net, &eq)?;
    let bias_sum: f64 = net.bias().sum();
    let assumptions = if net.n_input() == 0 && net.bias().iter().all(|b| *b == 0.0) {
        "holds"
    } else {
        "violated (network has inputs or biases)"
    };
    println!("conservation residual at the free state: {residual:.6e}");
    println!("  zero-sum assumption: {assumptions}; bias sum {bias_sum:.6e}");

    if probe > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = empirical_stability_probe(&net, &x, &hp, probe, noise, &mut rng)?;
        println!(
            "probe: {}/{} perturbed states returned (fraction {:.3}, noise {noise})",
            r.returned, r.trials, r.fraction
        );
        if !r.equilibrium_settled {
            println!("  warning: the unperturbed free phase did not settle");
        }
        if r.boundary_warning {
            println!("  warning: equilibrium lies on or near the clamp boundary");
        }
    }
    Ok(())
}

fn cmd_export_dot(path: &Path, out: Option<&Path>) -> Result<()> {
    let dot = network_to_dot(&load_network(path)?);
    match out {
        Some(p) => write_file(p, &dot),
        None => {
            print!("{dot}");
            Ok(())
        }
    }
}

fn cmd_eval(path: &Path, task: &str) -> Result<()> {
    let task: LogicOp = task.parse()?;
    let net = load_network(path)?;
    let hp = Hyperparams::default();
    let ds = logic_dataset(task);
    let ev = evaluate(&net, &ds, &hp)?;
    for (x, y) in &ds.patterns {
        let eq = free_equilibrium(&net, x, &hp)?;
        println!(
            "x = {x:?}  target {y:?}  output {:?}",
            read_outputs(&net, &eq)
        );
    }
    println!(
        "task {task}: mse {:.6e}, accuracy {:.2}",
        ev.mse, ev.accuracy
    );
    Ok(())
}
